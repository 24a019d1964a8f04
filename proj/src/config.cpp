#include "splitwiper/config.hpp"

#include <set>

#include "splitwiper/errors.hpp"
#include "splitwiper/util.hpp"

namespace splitwiper {

const char* label_mode_name(LabelMode m) {
    return m == LabelMode::LabelSharing ? "label_sharing" : "non_label_sharing";
}
const char* server_init_mode_name(ServerInitMode m) {
    return m == ServerInitMode::WarmStart ? "warm_start" : "cold_reinit";
}
const char* strategy2_replay_name(Strategy2Replay m) {
    return m == Strategy2Replay::CacheReplay ? "cache_replay" : "interactive_only";
}
const char* partition_mode_name(PartitionMode m) {
    return m == PartitionMode::Dirichlet ? "dirichlet" : "equal";
}

namespace {

void reject_unknown_keys(const nlohmann::json& obj, const std::set<std::string>& known,
                         const std::string& where) {
    for (const auto& [key, value] : obj.items()) {
        if (!known.contains(key)) {
            throw ConfigError("unknown key '" + key + "' in " + where);
        }
    }
}

template <typename T>
T require(const nlohmann::json& obj, const std::string& key, const std::string& where) {
    if (!obj.contains(key)) throw ConfigError("missing key '" + key + "' in " + where);
    try {
        return obj.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ConfigError("bad value for '" + key + "' in " + where);
    }
}

template <typename T>
T optional_of(const nlohmann::json& obj, const std::string& key, const std::string& where,
              T fallback) {
    if (!obj.contains(key)) return fallback;
    try {
        return obj.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ConfigError("bad value for '" + key + "' in " + where);
    }
}

LabelMode parse_label_mode(const std::string& s) {
    if (s == "label_sharing") return LabelMode::LabelSharing;
    if (s == "non_label_sharing") return LabelMode::NonLabelSharing;
    throw ConfigError("label_mode must be 'label_sharing' or 'non_label_sharing', got '" + s + "'");
}

ServerInitMode parse_server_init(const std::string& s) {
    if (s == "warm_start") return ServerInitMode::WarmStart;
    if (s == "cold_reinit") return ServerInitMode::ColdReinit;
    throw ConfigError("server_init_mode must be 'warm_start' or 'cold_reinit', got '" + s + "'");
}

Strategy2Replay parse_replay(const std::string& s) {
    if (s == "cache_replay") return Strategy2Replay::CacheReplay;
    if (s == "interactive_only") return Strategy2Replay::InteractiveOnly;
    throw ConfigError("strategy2_replay must be 'cache_replay' or 'interactive_only', got '" + s + "'");
}

PartitionMode parse_partition_mode(const std::string& s) {
    if (s == "dirichlet") return PartitionMode::Dirichlet;
    if (s == "equal") return PartitionMode::Equal;
    throw ConfigError("partition_mode must be 'dirichlet' or 'equal', got '" + s + "'");
}

}  // namespace

void ExperimentConfig::validate() const {
    if (clients < 1) throw ConfigError("K must be >= 1");
    if (client_epochs < 1) throw ConfigError("N must be >= 1");
    if (server_epochs < 1) throw ConfigError("M must be >= 1");
    if (!(lr_client > 0.0)) throw ConfigError("lr_client must be > 0");
    if (!(lr_server > 0.0)) throw ConfigError("lr_server must be > 0");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (client_dims.size() < 2) throw ConfigError("client_dims needs at least 2 entries");
    if (server_dims.size() < 2) throw ConfigError("server_dims needs at least 2 entries");
    for (std::size_t d : client_dims) {
        if (d < 1) throw ConfigError("client_dims entries must be >= 1");
    }
    for (std::size_t d : server_dims) {
        if (d < 1) throw ConfigError("server_dims entries must be >= 1");
    }
    if (client_dims.back() != server_dims.front()) {
        throw ConfigError("cut dimension mismatch: client_dims last (" +
                          std::to_string(client_dims.back()) + ") != server_dims first (" +
                          std::to_string(server_dims.front()) + ")");
    }
    if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) {
        throw ConfigError("dropout_rate must lie in [0, 1)");
    }
    if (partition_mode == PartitionMode::Dirichlet && !(alpha > 0.0)) {
        throw ConfigError("alpha must be > 0");
    }
    if (dataset.kind == DatasetSpec::Kind::Blobs) {
        if (dataset.class_count < 1 || dataset.dims < 1 || dataset.samples_per_class < 1) {
            throw ConfigError("dataset blob counts must be >= 1");
        }
        if (dataset.spread < 0.0) throw ConfigError("dataset.spread must be >= 0");
    } else if (dataset.path.empty()) {
        throw ConfigError("dataset.path required for csv datasets");
    }
}

void ExperimentConfig::validate_for_training() const {
    validate();
    if (server_epochs <= client_epochs) {
        throw ConfigError("M > N required: server epochs M (" +
                          std::to_string(server_epochs) + ") must exceed client epochs N (" +
                          std::to_string(client_epochs) + ")");
    }
}

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    reject_unknown_keys(j,
                        {"K", "N", "M", "lr_client", "lr_server", "batch_size", "label_mode",
                         "server_init_mode", "strategy2_replay", "client_dims", "server_dims",
                         "dropout_rate", "alpha", "partition_mode", "seeds", "dataset"},
                        "config");
    ExperimentConfig cfg;
    cfg.clients = require<std::uint32_t>(j, "K", "config");
    cfg.client_epochs = require<std::uint32_t>(j, "N", "config");
    cfg.server_epochs = require<std::uint32_t>(j, "M", "config");
    cfg.lr_client = require<double>(j, "lr_client", "config");
    cfg.lr_server = require<double>(j, "lr_server", "config");
    cfg.batch_size = require<std::size_t>(j, "batch_size", "config");
    cfg.label_mode = parse_label_mode(require<std::string>(j, "label_mode", "config"));
    cfg.server_init_mode =
        parse_server_init(optional_of<std::string>(j, "server_init_mode", "config", "cold_reinit"));
    cfg.strategy2_replay =
        parse_replay(optional_of<std::string>(j, "strategy2_replay", "config", "cache_replay"));
    cfg.client_dims = require<std::vector<std::size_t>>(j, "client_dims", "config");
    cfg.server_dims = require<std::vector<std::size_t>>(j, "server_dims", "config");
    cfg.dropout_rate = optional_of<double>(j, "dropout_rate", "config", 0.0);
    cfg.alpha = optional_of<double>(j, "alpha", "config", 0.5);
    cfg.partition_mode =
        parse_partition_mode(optional_of<std::string>(j, "partition_mode", "config", "dirichlet"));

    const auto seeds = require<nlohmann::json>(j, "seeds", "config");
    reject_unknown_keys(seeds, {"data", "model", "anonymizer", "shuffle"}, "seeds");
    cfg.seeds.data = require<std::uint64_t>(seeds, "data", "seeds");
    cfg.seeds.model = require<std::uint64_t>(seeds, "model", "seeds");
    cfg.seeds.anonymizer = require<std::uint64_t>(seeds, "anonymizer", "seeds");
    cfg.seeds.shuffle = require<std::uint64_t>(seeds, "shuffle", "seeds");

    const auto ds = require<nlohmann::json>(j, "dataset", "config");
    const auto kind = require<std::string>(ds, "kind", "dataset");
    if (kind == "blobs") {
        reject_unknown_keys(ds, {"kind", "class_count", "dims", "samples_per_class", "spread"},
                            "dataset");
        cfg.dataset.kind = DatasetSpec::Kind::Blobs;
        cfg.dataset.class_count = require<std::uint32_t>(ds, "class_count", "dataset");
        cfg.dataset.dims = require<std::size_t>(ds, "dims", "dataset");
        cfg.dataset.samples_per_class = require<std::size_t>(ds, "samples_per_class", "dataset");
        cfg.dataset.spread = require<double>(ds, "spread", "dataset");
    } else if (kind == "csv") {
        reject_unknown_keys(ds, {"kind", "path", "label_column"}, "dataset");
        cfg.dataset.kind = DatasetSpec::Kind::Csv;
        cfg.dataset.path = require<std::string>(ds, "path", "dataset");
        cfg.dataset.label_column =
            optional_of<std::string>(ds, "label_column", "dataset", "label");
    } else {
        throw ConfigError("dataset.kind must be 'blobs' or 'csv', got '" + kind + "'");
    }

    cfg.validate();
    return cfg;
}

ExperimentConfig ExperimentConfig::from_json_text(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    return from_json(j);
}

nlohmann::json ExperimentConfig::to_json() const {
    nlohmann::json ds;
    if (dataset.kind == DatasetSpec::Kind::Blobs) {
        ds = {{"kind", "blobs"},
              {"class_count", dataset.class_count},
              {"dims", dataset.dims},
              {"samples_per_class", dataset.samples_per_class},
              {"spread", dataset.spread}};
    } else {
        ds = {{"kind", "csv"}, {"path", dataset.path}, {"label_column", dataset.label_column}};
    }
    return {{"K", clients},
            {"N", client_epochs},
            {"M", server_epochs},
            {"lr_client", lr_client},
            {"lr_server", lr_server},
            {"batch_size", batch_size},
            {"label_mode", label_mode_name(label_mode)},
            {"server_init_mode", server_init_mode_name(server_init_mode)},
            {"strategy2_replay", strategy2_replay_name(strategy2_replay)},
            {"client_dims", client_dims},
            {"server_dims", server_dims},
            {"dropout_rate", dropout_rate},
            {"alpha", alpha},
            {"partition_mode", partition_mode_name(partition_mode)},
            {"seeds",
             {{"data", seeds.data},
              {"model", seeds.model},
              {"anonymizer", seeds.anonymizer},
              {"shuffle", seeds.shuffle}}},
            {"dataset", std::move(ds)}};
}

std::string ExperimentConfig::canonical_text() const { return to_json().dump(); }

std::string ExperimentConfig::run_id() const { return fnv1a64_hex(canonical_text()); }

}  // namespace splitwiper
