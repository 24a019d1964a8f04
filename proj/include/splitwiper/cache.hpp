#pragma once

#include <cstdint>
#include <map>

#include "splitwiper/message.hpp"
#include "splitwiper/tensor.hpp"

namespace splitwiper {

/// One client's cached transmission: full-shard cut-layer activations plus
/// whatever label view crossed the wire. version counts replacements.
struct CacheEntry {
    Tensor activations;
    LabelSet labels;
    std::uint64_t version = 0;
};

/// Server-side store keyed by client id, iterated in ascending id order.
/// Entries of clients not involved in an unlearning run are never touched.
class ServerCache {
public:
    void put(std::uint32_t client_id, Tensor activations, LabelSet labels);

    const CacheEntry* find(std::uint32_t client_id) const;
    const std::map<std::uint32_t, CacheEntry>& entries() const { return entries_; }

    std::size_t total_rows() const;

private:
    std::map<std::uint32_t, CacheEntry> entries_;
};

}  // namespace splitwiper
