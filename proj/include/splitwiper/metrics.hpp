#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "splitwiper/pipelines.hpp"

namespace splitwiper {

/// Top-1 accuracy of Concat(client half, server half) from client k's
/// perspective, Eval mode throughout, inverse permutation applied in
/// non-label-sharing mode. Mutates nothing.
double evaluate_client(const WorldState& world, std::uint32_t client_id, const Dataset& data);

struct SplitAccuracy {
    std::string split;  // own | forgotten | remaining
    double accuracy = 0.0;
    std::size_t rows = 0;
};

struct ClientEval {
    std::uint32_t client = 0;
    std::vector<SplitAccuracy> splits;
};

struct GoalCheck {
    std::string goal;    // G1..G4
    std::string status;  // pass | fail | measured
    nlohmann::json details;
};

/// Per-client utility plus the unlearning effectiveness measures: accuracy
/// on the forgotten and remaining sets and the max-abs parameter distance to
/// the retrain oracle when one is supplied.
struct EvalReport {
    std::vector<ClientEval> clients;
    double forgotten_accuracy = 0.0;
    std::size_t forgotten_rows = 0;
    double remaining_accuracy = 0.0;
    std::optional<double> oracle_param_distance;
    std::optional<double> oracle_remaining_accuracy;
    std::vector<GoalCheck> goals;

    nlohmann::json to_json() const;
};

/// Max absolute parameter difference across all client models and the
/// server model. ReportError when the worlds disagree structurally.
double parameter_distance(const WorldState& a, const WorldState& b);

/// Builds the post-run report: per-client own-shard accuracy, forgotten and
/// remaining accuracy for the requesting client, oracle deltas, and the
/// G1-G4 audit. pre_unlearn is the ledger snapshot taken before the
/// strategy ran (used for the interference audit); pre_versions the cache
/// versions at that point. For training runs pass strategy = -1 and an
/// empty request.
EvalReport effectiveness_report(const WorldState& world, int strategy,
                                const std::optional<UnlearnRequest>& req,
                                const Dataset& forgotten,
                                const WorldState* oracle_world,
                                const LedgerData& pre_unlearn,
                                const std::map<std::uint32_t, std::uint64_t>& pre_versions);

struct ComplexityCheck {
    std::string name;
    double expected = 0.0;
    double measured = 0.0;
    bool pass = false;
    std::string detail;
};

/// One run's worth of evidence for the complexity checks, extracted from a
/// live world or parsed back from a bundle.
struct RunSummary {
    std::string run_id;
    int strategy = -1;  // -1 = train
    ExperimentConfig cfg;
    LedgerData ledger;
    /// Bytes per message variant in the Unlearn phase, from the message log.
    std::map<std::string, std::uint64_t> unlearn_variant_bytes;
};

RunSummary summarize_run(const WorldState& world, int strategy);

/// Compares >= 2 runs that differ in exactly one of M, K, or the dataset
/// size and checks the advertised scaling: strategy-1 one-off bytes constant
/// in M, strategy-2 interactive bytes proportional to M, strategy-0 client
/// compute proportional to M and to K. Runs differing in more than one
/// factor (or none) raise DesignError.
std::vector<ComplexityCheck> complexity_assertions(const std::vector<RunSummary>& runs);

/// metrics CSV: run_id, strategy, phase, party, compute_units, bytes_sent,
/// bytes_received, epochs.
std::string metrics_csv(const RunSummary& summary);

/// eval CSV: run_id, client, split, accuracy.
std::string eval_csv(const std::string& run_id, const EvalReport& report);

}  // namespace splitwiper
