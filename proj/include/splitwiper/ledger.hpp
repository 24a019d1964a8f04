#pragma once

#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <utility>

#include <json.hpp>

#include "splitwiper/party.hpp"

namespace splitwiper {

enum class Phase : std::uint8_t { Train = 0, Unlearn = 1 };

const char* phase_name(Phase p);

struct PartyTotals {
    std::uint64_t compute_units = 0;  // MACs
    std::uint64_t epochs_run = 0;
};

/// Plain counters for one run, split by phase. Copyable; used for snapshots
/// and for ledgers parsed back from bundles.
struct LedgerData {
    std::map<Phase, std::map<Party, PartyTotals>> party;
    std::map<Phase, std::map<std::pair<Party, Party>, std::uint64_t>> bytes;

    std::uint64_t compute(Party p, std::optional<Phase> phase = {}) const;
    std::uint64_t epochs(Party p, std::optional<Phase> phase = {}) const;
    std::uint64_t byte_count(Party from, Party to, std::optional<Phase> phase = {}) const;
    std::uint64_t total_bytes(std::optional<Phase> phase = {}) const;
    /// All bytes a party touched (sent or received) in a phase.
    std::uint64_t party_bytes(Party p, std::optional<Phase> phase = {}) const;
    std::uint64_t bytes_sent(Party p, std::optional<Phase> phase = {}) const;
    std::uint64_t bytes_received(Party p, std::optional<Phase> phase = {}) const;

    nlohmann::json to_json() const;
    static LedgerData from_json(const nlohmann::json& j);
};

/// Measures C, S (compute units per party) and I (bytes per direction)
/// empirically. Counters only ever grow; phase sub-totals sum to the grand
/// totals by construction. Safe to update from parallel client workers.
class CostLedger {
public:
    void set_phase(Phase p);
    Phase phase() const;

    void add_compute(Party p, std::uint64_t macs);
    void add_epoch(Party p);
    void add_bytes(Party from, Party to, std::uint64_t n);

    LedgerData snapshot() const;

private:
    mutable std::mutex mu_;
    Phase phase_ = Phase::Train;
    LedgerData data_;
};

/// Per-party, per-phase delta between two snapshots (after - before).
LedgerData ledger_delta(const LedgerData& before, const LedgerData& after);

}  // namespace splitwiper
