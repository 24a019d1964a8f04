#pragma once

#include <compare>
#include <cstdint>
#include <string>

namespace splitwiper {

enum class PartyKind : std::uint8_t { Client = 0, Server = 1 };

struct Party {
    PartyKind kind = PartyKind::Server;
    std::uint32_t id = 0;  // meaningful for clients only

    static Party client(std::uint32_t id) { return {PartyKind::Client, id}; }
    static Party server() { return {PartyKind::Server, 0}; }

    bool is_server() const { return kind == PartyKind::Server; }

    std::string name() const {
        return is_server() ? "server" : "client" + std::to_string(id);
    }

    auto operator<=>(const Party&) const = default;
};

}  // namespace splitwiper
