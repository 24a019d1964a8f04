#pragma once

#include <memory>
#include <vector>

#include "splitwiper/anonymizer.hpp"
#include "splitwiper/cache.hpp"
#include "splitwiper/client_state.hpp"
#include "splitwiper/config.hpp"
#include "splitwiper/dataset.hpp"
#include "splitwiper/mlp.hpp"
#include "splitwiper/partition.hpp"
#include "splitwiper/transport.hpp"

namespace splitwiper {

/// Everything one run produces and later phases consume: the shards, the
/// frozen client halves, the server half, the activation cache, and the
/// transport/ledger the run accumulated into. Ledger and transport are
/// shared across the phases of one run so phase sub-totals land in one
/// place.
struct WorldState {
    ExperimentConfig cfg;
    std::vector<Shard> shards;
    std::vector<MlpModel> client_models;
    MlpModel server_model;
    ServerCache cache;
    std::shared_ptr<CostLedger> ledger;
    std::shared_ptr<Transport> transport;
    std::vector<Anonymizer> anonymizers;
    std::vector<ClientPhase> client_phases;
};

struct RunOptions {
    /// Worker threads for the parallel client-training phase. Results are
    /// bit-identical for any value; 1 means fully sequential.
    unsigned threads = 1;
};

/// Materializes the configured dataset (blobs or csv).
Dataset build_dataset(const ExperimentConfig& cfg);

/// Partitions per the configured mode (Dirichlet label skew or equal
/// round-robin).
std::vector<Shard> partition_dataset(const ExperimentConfig& cfg, const Dataset& ds);

/// SISA-style training: every client trains its half locally for N epochs
/// (in parallel, no server involvement), freezes, and transmits its full
/// shard's cut activations once; the server then trains its half for M
/// epochs from the cache alone. Requires M > N.
WorldState run_training(const ExperimentConfig& cfg, const Dataset& ds,
                        const RunOptions& opts = {});

/// Same, starting from an existing shard assignment. This is the shared
/// core of run_training and retrain_oracle. Validates structure but not
/// M > N (strategy epochs may equal N).
WorldState train_on_shards(const ExperimentConfig& cfg, std::vector<Shard> shards,
                           const RunOptions& opts = {}, bool require_m_gt_n = false);

/// Baseline: conventional round-robin split learning retrained from scratch
/// on the post-removal data. Every client runs M interactive epochs with
/// the server (activations and gradients cross the wire per batch); nothing
/// is cached. Runs entirely in the Unlearn phase of a fresh ledger.
WorldState run_strategy0(const ExperimentConfig& cfg, const Dataset& ds,
                         const UnlearnRequest& req);

/// Cache-replacement unlearning: client k reinitializes from its model seed,
/// retrains on the kept shard, refreezes, transmits once; the server
/// replaces k's cache entry and retrains M epochs on the full cache,
/// starting warm or cold per cfg.server_init_mode. All other parties stay
/// silent.
WorldState run_strategy1(WorldState world, const ExperimentConfig& cfg,
                         const UnlearnRequest& req);

/// Non-label-sharing unlearning: client k retrains and sends label-free
/// activations; for M epochs the server forwards its outputs for k's rows
/// to client k, which returns loss gradients computed against its private
/// (anonymized-view) labels. No gradients flow back to k's model. Other
/// clients' cached entries replay locally per cfg.strategy2_replay.
WorldState run_strategy2(WorldState world, const ExperimentConfig& cfg,
                         const UnlearnRequest& req);

/// Ground truth: the full pipeline rerun from scratch on the post-removal
/// shards with identical seeds. Shard ownership is inherited, not
/// re-partitioned, so untouched clients retrain into bit-identical models.
WorldState retrain_oracle(const ExperimentConfig& cfg, std::vector<Shard> shards_u,
                          const RunOptions& opts = {});

/// Composed prediction for client k: client half (Eval), server half (Eval),
/// argmax, and the client's inverse permutation in non-label-sharing mode.
std::vector<std::uint32_t> predict_labels(const WorldState& world, std::uint32_t client_id,
                                          const Tensor& features);

}  // namespace splitwiper
