#include "splitwiper/ledger.hpp"

#include "splitwiper/errors.hpp"

namespace splitwiper {

const char* phase_name(Phase p) { return p == Phase::Train ? "train" : "unlearn"; }

namespace {

Phase phase_from_name(const std::string& s) {
    if (s == "train") return Phase::Train;
    if (s == "unlearn") return Phase::Unlearn;
    throw FormatError("unknown phase '" + s + "'");
}

Party party_from_name(const std::string& s) {
    if (s == "server") return Party::server();
    if (s.rfind("client", 0) == 0) {
        return Party::client(static_cast<std::uint32_t>(std::stoul(s.substr(6))));
    }
    throw FormatError("unknown party '" + s + "'");
}

}  // namespace

std::uint64_t LedgerData::compute(Party p, std::optional<Phase> phase) const {
    std::uint64_t total = 0;
    for (const auto& [ph, parties] : party) {
        if (phase && *phase != ph) continue;
        const auto it = parties.find(p);
        if (it != parties.end()) total += it->second.compute_units;
    }
    return total;
}

std::uint64_t LedgerData::epochs(Party p, std::optional<Phase> phase) const {
    std::uint64_t total = 0;
    for (const auto& [ph, parties] : party) {
        if (phase && *phase != ph) continue;
        const auto it = parties.find(p);
        if (it != parties.end()) total += it->second.epochs_run;
    }
    return total;
}

std::uint64_t LedgerData::byte_count(Party from, Party to, std::optional<Phase> phase) const {
    std::uint64_t total = 0;
    for (const auto& [ph, pairs] : bytes) {
        if (phase && *phase != ph) continue;
        const auto it = pairs.find({from, to});
        if (it != pairs.end()) total += it->second;
    }
    return total;
}

std::uint64_t LedgerData::total_bytes(std::optional<Phase> phase) const {
    std::uint64_t total = 0;
    for (const auto& [ph, pairs] : bytes) {
        if (phase && *phase != ph) continue;
        for (const auto& [pair, n] : pairs) total += n;
    }
    return total;
}

std::uint64_t LedgerData::party_bytes(Party p, std::optional<Phase> phase) const {
    return bytes_sent(p, phase) + bytes_received(p, phase);
}

std::uint64_t LedgerData::bytes_sent(Party p, std::optional<Phase> phase) const {
    std::uint64_t total = 0;
    for (const auto& [ph, pairs] : bytes) {
        if (phase && *phase != ph) continue;
        for (const auto& [pair, n] : pairs) {
            if (pair.first == p) total += n;
        }
    }
    return total;
}

std::uint64_t LedgerData::bytes_received(Party p, std::optional<Phase> phase) const {
    std::uint64_t total = 0;
    for (const auto& [ph, pairs] : bytes) {
        if (phase && *phase != ph) continue;
        for (const auto& [pair, n] : pairs) {
            if (pair.second == p) total += n;
        }
    }
    return total;
}

nlohmann::json LedgerData::to_json() const {
    nlohmann::json j;
    for (const auto& [ph, parties] : party) {
        nlohmann::json block;
        for (const auto& [p, totals] : parties) {
            block[p.name()] = {{"compute_units", totals.compute_units},
                               {"epochs_run", totals.epochs_run}};
        }
        j["phases"][phase_name(ph)]["parties"] = std::move(block);
    }
    for (const auto& [ph, pairs] : bytes) {
        nlohmann::json block;
        for (const auto& [pair, n] : pairs) {
            block[pair.first.name() + "->" + pair.second.name()] = n;
        }
        j["phases"][phase_name(ph)]["bytes"] = std::move(block);
    }
    if (j.is_null()) j["phases"] = nlohmann::json::object();
    return j;
}

LedgerData LedgerData::from_json(const nlohmann::json& j) {
    LedgerData data;
    if (!j.contains("phases")) throw FormatError("ledger JSON missing 'phases'");
    for (const auto& [ph_name, block] : j.at("phases").items()) {
        const Phase ph = phase_from_name(ph_name);
        if (block.contains("parties")) {
            for (const auto& [pname, totals] : block.at("parties").items()) {
                PartyTotals t;
                t.compute_units = totals.at("compute_units").get<std::uint64_t>();
                t.epochs_run = totals.at("epochs_run").get<std::uint64_t>();
                data.party[ph][party_from_name(pname)] = t;
            }
        }
        if (block.contains("bytes")) {
            for (const auto& [route, n] : block.at("bytes").items()) {
                const auto sep = route.find("->");
                if (sep == std::string::npos) throw FormatError("bad route '" + route + "'");
                data.bytes[ph][{party_from_name(route.substr(0, sep)),
                                party_from_name(route.substr(sep + 2))}] =
                    n.get<std::uint64_t>();
            }
        }
    }
    return data;
}

void CostLedger::set_phase(Phase p) {
    std::lock_guard lock(mu_);
    phase_ = p;
}

Phase CostLedger::phase() const {
    std::lock_guard lock(mu_);
    return phase_;
}

void CostLedger::add_compute(Party p, std::uint64_t macs) {
    std::lock_guard lock(mu_);
    data_.party[phase_][p].compute_units += macs;
}

void CostLedger::add_epoch(Party p) {
    std::lock_guard lock(mu_);
    data_.party[phase_][p].epochs_run += 1;
}

void CostLedger::add_bytes(Party from, Party to, std::uint64_t n) {
    std::lock_guard lock(mu_);
    data_.bytes[phase_][{from, to}] += n;
}

LedgerData CostLedger::snapshot() const {
    std::lock_guard lock(mu_);
    return data_;
}

LedgerData ledger_delta(const LedgerData& before, const LedgerData& after) {
    LedgerData delta;
    for (const auto& [ph, parties] : after.party) {
        for (const auto& [p, totals] : parties) {
            PartyTotals prev;
            const auto phase_it = before.party.find(ph);
            if (phase_it != before.party.end()) {
                const auto it = phase_it->second.find(p);
                if (it != phase_it->second.end()) prev = it->second;
            }
            delta.party[ph][p] = {totals.compute_units - prev.compute_units,
                                  totals.epochs_run - prev.epochs_run};
        }
    }
    for (const auto& [ph, pairs] : after.bytes) {
        for (const auto& [pair, n] : pairs) {
            std::uint64_t prev = 0;
            const auto phase_it = before.bytes.find(ph);
            if (phase_it != before.bytes.end()) {
                const auto it = phase_it->second.find(pair);
                if (it != phase_it->second.end()) prev = it->second;
            }
            delta.bytes[ph][pair] = n - prev;
        }
    }
    return delta;
}

}  // namespace splitwiper
