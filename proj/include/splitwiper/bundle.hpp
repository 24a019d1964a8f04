#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "splitwiper/gradcheck.hpp"
#include "splitwiper/metrics.hpp"
#include "splitwiper/pipelines.hpp"

namespace splitwiper {

/// Run bundles are directories. run.json is the manifest: run id, command,
/// strategy and an FNV-1a checksum per file, so verify can spot tampering.
/// All content is deterministic -- no timestamps, no absolute paths --
/// which is what makes byte-identical re-runs checkable.
///
///   config.json     canonical config echo
///   run.json        manifest {run_id, command, strategy, files{name: fnv64}}
///   client_k.swpr   per-client checkpoint, k = 0..K-1
///   server.swpr     server checkpoint
///   ledger.json     per-phase per-party counters and per-route bytes
///   messages.jsonl  one {seq, from, to, variant, bytes, phase} per line
///   metrics.csv     run_id, strategy, phase, party, compute, bytes, epochs
///   eval.csv        run_id, client, split, accuracy
///   goal_audit.json unlearn runs: G1..G4 audit (report JSON)
///   gradcheck.json  gradcheck runs only
struct BundleFiles {
    static constexpr const char* kConfig = "config.json";
    static constexpr const char* kManifest = "run.json";
    static constexpr const char* kLedger = "ledger.json";
    static constexpr const char* kMessages = "messages.jsonl";
    static constexpr const char* kMetrics = "metrics.csv";
    static constexpr const char* kEval = "eval.csv";
    static constexpr const char* kGoalAudit = "goal_audit.json";
    static constexpr const char* kGradCheck = "gradcheck.json";
};

void write_train_bundle(const std::filesystem::path& dir, const WorldState& world,
                        const EvalReport& report);

void write_unlearn_bundle(const std::filesystem::path& dir, const WorldState& world,
                          int strategy, const EvalReport& report);

void write_gradcheck_bundle(const std::filesystem::path& dir, const GradCheckReport& report);

/// A bundle read back for verification or as the input world of an unlearn
/// command. Loading re-hashes every manifest entry; any mismatch or missing
/// file raises FormatError.
struct LoadedBundle {
    std::filesystem::path dir;
    std::string command;  // train | unlearn | gradcheck
    int strategy = -1;
    std::string run_id;
    std::optional<ExperimentConfig> cfg;
    std::optional<LedgerData> ledger;
    std::map<std::string, std::uint64_t> unlearn_variant_bytes;
    std::map<std::string, std::uint64_t> phase_log_bytes;  // phase name -> bytes
    std::optional<nlohmann::json> gradcheck;
    std::optional<nlohmann::json> goal_audit;

    RunSummary to_summary() const;
};

LoadedBundle load_bundle(const std::filesystem::path& dir);

/// Reads one checkpoint from a bundle directory.
MlpModel load_bundle_checkpoint(const std::filesystem::path& dir, const std::string& name);

}  // namespace splitwiper
