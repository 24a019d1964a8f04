#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

namespace splitwiper {

enum class LabelMode { LabelSharing, NonLabelSharing };
enum class ServerInitMode { WarmStart, ColdReinit };
enum class Strategy2Replay { CacheReplay, InteractiveOnly };
enum class PartitionMode { Dirichlet, Equal };

struct SeedPack {
    std::uint64_t data = 1;
    std::uint64_t model = 2;
    std::uint64_t anonymizer = 3;
    std::uint64_t shuffle = 4;
};

struct DatasetSpec {
    enum class Kind { Blobs, Csv } kind = Kind::Blobs;
    // blobs
    std::uint32_t class_count = 4;
    std::size_t dims = 8;
    std::size_t samples_per_class = 400;
    double spread = 0.3;
    // csv
    std::string path;
    std::string label_column = "label";
};

/// Everything that identifies a run. The canonical JSON echo of this struct
/// is hashed into the run id, so two configs agree exactly iff their run ids
/// do. Thread count is deliberately not part of it: results are
/// schedule-independent.
struct ExperimentConfig {
    std::uint32_t clients = 3;        // K
    std::uint32_t client_epochs = 5;  // N
    std::uint32_t server_epochs = 10; // M
    double lr_client = 0.05;
    double lr_server = 0.1;
    std::size_t batch_size = 32;
    LabelMode label_mode = LabelMode::LabelSharing;
    ServerInitMode server_init_mode = ServerInitMode::ColdReinit;
    Strategy2Replay strategy2_replay = Strategy2Replay::CacheReplay;
    std::vector<std::size_t> client_dims = {8, 16, 8};
    std::vector<std::size_t> server_dims = {8, 16, 4};
    double dropout_rate = 0.0;
    double alpha = 0.5;
    PartitionMode partition_mode = PartitionMode::Dirichlet;
    SeedPack seeds;
    DatasetSpec dataset;

    /// Structural checks that do not depend on the phase: K >= 1, positive
    /// epochs and rates, chained cut dimension, batch size, dropout range.
    void validate() const;

    /// Algorithm-1 entry points additionally require M > N.
    void validate_for_training() const;

    /// Strict parse: every field spelled out above is recognized, anything
    /// else is a ConfigError naming the offending key.
    static ExperimentConfig from_json(const nlohmann::json& j);
    static ExperimentConfig from_json_text(const std::string& text);

    nlohmann::json to_json() const;
    std::string canonical_text() const;
    std::string run_id() const;
};

const char* label_mode_name(LabelMode m);
const char* server_init_mode_name(ServerInitMode m);
const char* strategy2_replay_name(Strategy2Replay m);
const char* partition_mode_name(PartitionMode m);

}  // namespace splitwiper
