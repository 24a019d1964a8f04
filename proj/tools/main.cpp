#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "splitwiper/bundle.hpp"
#include "splitwiper/errors.hpp"
#include "splitwiper/gradcheck.hpp"
#include "splitwiper/metrics.hpp"
#include "splitwiper/pipelines.hpp"
#include "splitwiper/util.hpp"

namespace sw = splitwiper;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;  // config / contract errors
constexpr int kExitData = 3;    // data / verification errors

unsigned resolve_threads(unsigned flag_value) {
    if (flag_value > 0) return flag_value;
    if (const char* env = std::getenv("SPLITWIPER_THREADS")) {
        const long v = std::strtol(env, nullptr, 10);
        if (v > 0) return static_cast<unsigned>(v);
    }
    return 1;
}

void apply_seed_overrides(sw::ExperimentConfig& cfg, const std::vector<std::string>& overrides) {
    for (const std::string& ov : overrides) {
        const auto eq = ov.find('=');
        if (eq == std::string::npos) {
            throw sw::ConfigError("--seed-override expects name=value, got '" + ov + "'");
        }
        const std::string name = ov.substr(0, eq);
        std::uint64_t value = 0;
        try {
            value = std::stoull(ov.substr(eq + 1));
        } catch (const std::exception&) {
            throw sw::ConfigError("bad seed value in '" + ov + "'");
        }
        if (name == "data") cfg.seeds.data = value;
        else if (name == "model") cfg.seeds.model = value;
        else if (name == "anonymizer") cfg.seeds.anonymizer = value;
        else if (name == "shuffle") cfg.seeds.shuffle = value;
        else throw sw::ConfigError("unknown seed '" + name + "' (data|model|anonymizer|shuffle)");
    }
}

sw::UnlearnRequest parse_select(const std::string& spec, std::uint32_t client) {
    if (spec == "none") return sw::UnlearnRequest::none(client);
    if (spec.rfind("class:", 0) == 0) {
        return sw::UnlearnRequest::by_class(
            client, static_cast<std::uint32_t>(std::stoul(spec.substr(6))));
    }
    if (spec.rfind("indices:", 0) == 0) {
        std::vector<std::size_t> indices;
        std::string rest = spec.substr(8);
        std::size_t pos = 0;
        while (pos < rest.size()) {
            const auto comma = rest.find(',', pos);
            const std::string tok = rest.substr(pos, comma == std::string::npos ? std::string::npos
                                                                                : comma - pos);
            if (!tok.empty()) indices.push_back(std::stoul(tok));
            if (comma == std::string::npos) break;
            pos = comma + 1;
        }
        if (indices.empty()) throw sw::ConfigError("--select indices: needs at least one index");
        return sw::UnlearnRequest::by_indices(client, std::move(indices));
    }
    throw sw::ConfigError("--select must be 'class:<id>', 'indices:<i,j,...>' or 'none'");
}

sw::ExperimentConfig load_config_file(const std::string& path) {
    return sw::ExperimentConfig::from_json_text(sw::read_file(path));
}

/// Unlearn configs may change only what the unlearn phase consumes: M,
/// server_init_mode, strategy2_replay. Everything else must match the
/// training bundle bit for bit, or the replayed world would not be the world
/// the bundle describes.
void check_unlearn_config_compatible(const sw::ExperimentConfig& bundle_cfg,
                                     const sw::ExperimentConfig& unlearn_cfg) {
    auto strip = [](const sw::ExperimentConfig& c) {
        nlohmann::json j = c.to_json();
        j.erase("M");
        j.erase("server_init_mode");
        j.erase("strategy2_replay");
        return j;
    };
    const nlohmann::json a = strip(bundle_cfg);
    const nlohmann::json b = strip(unlearn_cfg);
    if (a == b) return;
    std::string fields;
    for (const auto& [key, value] : a.items()) {
        if (b.at(key) != value) fields += fields.empty() ? key : ", " + key;
    }
    throw sw::ConfigError("unlearn config differs from the training bundle in: " + fields +
                          " (only M, server_init_mode, strategy2_replay may change)");
}

int cmd_train(const std::string& config_path, const std::string& out_dir, unsigned threads,
              const std::vector<std::string>& seed_overrides) {
    sw::ExperimentConfig cfg = load_config_file(config_path);
    apply_seed_overrides(cfg, seed_overrides);
    cfg.validate_for_training();

    const sw::Dataset ds = sw::build_dataset(cfg);
    sw::WorldState world = sw::run_training(cfg, ds, {threads});

    const sw::LedgerData empty;
    const sw::EvalReport report = sw::effectiveness_report(
        world, /*strategy=*/-1, std::nullopt, sw::Dataset{}, nullptr, empty, {});
    sw::write_train_bundle(out_dir, world, report);

    std::cout << "run_id " << cfg.run_id() << "\n";
    for (const auto& ce : report.clients) {
        std::printf("client%u own-shard accuracy %.4f\n", ce.client, ce.splits.front().accuracy);
    }
    std::cout << "bundle written to " << out_dir << "\n";
    return kExitOk;
}

int cmd_unlearn(const std::string& config_path, const std::string& world_dir, int strategy,
                std::uint32_t client, const std::string& select, const std::string& out_dir,
                bool with_oracle, unsigned threads,
                const std::vector<std::string>& seed_overrides) {
    const sw::LoadedBundle bundle = sw::load_bundle(world_dir);
    if (!bundle.cfg) throw sw::FormatError("bundle has no config: " + world_dir);
    if (bundle.command != "train") {
        throw sw::ConfigError("--world must point at a train bundle, found '" + bundle.command +
                              "'");
    }

    sw::ExperimentConfig cfg = load_config_file(config_path);
    apply_seed_overrides(cfg, seed_overrides);
    check_unlearn_config_compatible(*bundle.cfg, cfg);
    if (client >= cfg.clients) {
        throw sw::ConfigError("unknown client " + std::to_string(client) + ", K=" +
                              std::to_string(cfg.clients));
    }
    if (strategy == 2 && cfg.label_mode != sw::LabelMode::NonLabelSharing) {
        throw sw::ConfigError("strategy 2 requires label_mode == non_label_sharing");
    }
    const sw::UnlearnRequest req = parse_select(select, client);

    // The world is reproduced from the bundle's config (training phase), and
    // cross-checked against the stored checkpoints before anything runs.
    const sw::Dataset ds = sw::build_dataset(*bundle.cfg);
    sw::WorldState world = sw::run_training(*bundle.cfg, ds, {threads});
    for (std::uint32_t k = 0; k < bundle.cfg->clients; ++k) {
        const auto name = "client_" + std::to_string(k) + ".swpr";
        if (!sw::models_bit_equal(world.client_models[k],
                                  sw::load_bundle_checkpoint(world_dir, name))) {
            throw sw::FormatError("bundle checkpoint " + name +
                                  " does not match a deterministic replay of its config");
        }
    }
    if (!sw::models_bit_equal(world.server_model,
                              sw::load_bundle_checkpoint(world_dir, "server.swpr"))) {
        throw sw::FormatError("bundle server checkpoint does not match a deterministic replay");
    }

    const std::vector<sw::Shard> original_shards = world.shards;
    const sw::Dataset forgotten = sw::selected_dataset(original_shards[client], req);

    sw::LedgerData pre;
    std::map<std::uint32_t, std::uint64_t> pre_versions;
    sw::WorldState world_u;
    if (strategy == 0) {
        world_u = sw::run_strategy0(cfg, ds, req);
    } else {
        pre = world.ledger->snapshot();
        for (const auto& [id, entry] : world.cache.entries()) pre_versions[id] = entry.version;
        world_u = strategy == 1 ? sw::run_strategy1(std::move(world), cfg, req)
                                : sw::run_strategy2(std::move(world), cfg, req);
    }

    std::optional<sw::WorldState> oracle;
    if (with_oracle) {
        oracle = sw::retrain_oracle(cfg, sw::shards_after_unlearn(original_shards, req),
                                    {threads});
    }

    const sw::EvalReport report =
        sw::effectiveness_report(world_u, strategy, req, forgotten,
                                 oracle ? &*oracle : nullptr, pre, pre_versions);
    sw::write_unlearn_bundle(out_dir, world_u, strategy, report);

    std::cout << "run_id " << cfg.run_id() << " strategy " << strategy << "\n";
    for (const auto& goal : report.goals) {
        std::cout << goal.goal << ": " << goal.status << "\n";
    }
    std::cout << "bundle written to " << out_dir << "\n";
    return kExitOk;
}

int cmd_verify(const std::vector<std::string>& dirs) {
    bool all_pass = true;
    std::map<int, std::vector<sw::RunSummary>> by_strategy;

    auto row = [&all_pass](const std::string& name, bool pass, const std::string& detail) {
        std::printf("[%s] %s%s%s\n", pass ? "PASS" : "FAIL", name.c_str(),
                    detail.empty() ? "" : " -- ", detail.c_str());
        all_pass = all_pass && pass;
    };

    for (const std::string& dir : dirs) {
        const sw::LoadedBundle bundle = sw::load_bundle(dir);  // throws on tampering
        row(dir + ": manifest checksums", true, "");

        if (bundle.ledger) {
            // Byte conservation: the ledger's totals must equal the message
            // log's totals, phase by phase.
            bool ok = true;
            for (const auto& [phase, bytes] : bundle.phase_log_bytes) {
                const sw::Phase ph = phase == "train" ? sw::Phase::Train : sw::Phase::Unlearn;
                if (bundle.ledger->total_bytes(ph) != bytes) ok = false;
            }
            const std::uint64_t ledger_total = bundle.ledger->total_bytes();
            std::uint64_t log_total = 0;
            for (const auto& [phase, bytes] : bundle.phase_log_bytes) log_total += bytes;
            ok = ok && ledger_total == log_total;
            row(dir + ": byte conservation", ok,
                "ledger=" + std::to_string(ledger_total) + " log=" + std::to_string(log_total));
        }
        if (bundle.gradcheck) {
            const double max_err = bundle.gradcheck->at("max_rel_err").get<double>();
            const double tol = bundle.gradcheck->at("tolerance").get<double>();
            char detail[64];
            std::snprintf(detail, sizeof(detail), "max rel err %.3e", max_err);
            row(dir + ": gradcheck", bundle.gradcheck->at("pass").get<bool>() && max_err < tol,
                detail);
        }
        if (bundle.goal_audit && bundle.strategy >= 1 && bundle.goal_audit->contains("goal_audit")) {
            for (const auto& [goal, body] : bundle.goal_audit->at("goal_audit").items()) {
                const auto status = body.at("status").get<std::string>();
                row(dir + ": " + goal, status != "fail", status);
            }
        }
        if (bundle.cfg && bundle.ledger && bundle.command != "gradcheck") {
            by_strategy[bundle.strategy].push_back(bundle.to_summary());
        }
    }

    for (const auto& [strategy, runs] : by_strategy) {
        if (runs.size() < 2) continue;
        for (const sw::ComplexityCheck& c : sw::complexity_assertions(runs)) {
            char detail[160];
            std::snprintf(detail, sizeof(detail), "expected %.6g measured %.6g (%s)", c.expected,
                          c.measured, c.detail.c_str());
            row(c.name, c.pass, detail);
        }
    }
    return all_pass ? kExitOk : kExitData;
}

int cmd_gradcheck(std::uint64_t seed, std::size_t draws, int corrupt_layer,
                  const std::string& out_dir) {
    const sw::GradCheckReport report = sw::run_gradcheck(seed, draws, corrupt_layer);
    std::printf("gradcheck: %zu draws, max rel err %.3e (tolerance %.0e): %s\n", report.draws,
                report.max_rel_err, report.tolerance, report.pass ? "PASS" : "FAIL");
    if (!out_dir.empty()) {
        sw::write_gradcheck_bundle(out_dir, report);
        std::cout << "bundle written to " << out_dir << "\n";
    }
    return report.pass ? kExitOk : kExitData;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"SplitWiper: SISA-based split learning with unlearning strategies"};
    app.require_subcommand(1);

    std::string config_path, out_dir, world_dir, select = "none";
    std::vector<std::string> seed_overrides;
    std::vector<std::string> verify_dirs;
    unsigned threads = 0;
    int strategy = 1;
    std::uint32_t client = 0;
    bool with_oracle = false;
    std::uint64_t gc_seed = 1;
    std::size_t gc_draws = 24;
    int gc_corrupt = -1;

    CLI::App* train = app.add_subcommand("train", "run SISA-based split training");
    train->add_option("--config", config_path, "experiment config JSON")->required();
    train->add_option("--out", out_dir, "output bundle directory")->required();
    train->add_option("--threads", threads, "client-phase worker threads");
    train->add_option("--seed-override", seed_overrides, "override a seed, name=value");

    CLI::App* unlearn = app.add_subcommand("unlearn", "run an unlearning strategy");
    unlearn->add_option("--config", config_path, "experiment config JSON")->required();
    unlearn->add_option("--world", world_dir, "train bundle to unlearn from")->required();
    unlearn->add_option("--strategy", strategy, "0 (baseline), 1 or 2")
        ->required()
        ->check(CLI::Range(0, 2));
    unlearn->add_option("--client", client, "requesting client id")->required();
    unlearn->add_option("--select", select, "class:<id> | indices:<i,j,...> | none");
    unlearn->add_option("--out", out_dir, "output bundle directory")->required();
    unlearn->add_flag("--oracle", with_oracle, "also run the retrain oracle and compare");
    unlearn->add_option("--threads", threads, "client-phase worker threads");
    unlearn->add_option("--seed-override", seed_overrides, "override a seed, name=value");

    CLI::App* verify = app.add_subcommand("verify", "audit one or more run bundles");
    verify->add_option("bundles", verify_dirs, "bundle directories")->required();

    CLI::App* gradcheck = app.add_subcommand("gradcheck", "finite-difference backprop check");
    gradcheck->add_option("--seed", gc_seed, "draw seed");
    gradcheck->add_option("--draws", gc_draws, "number of random model/batch draws");
    gradcheck->add_option("--out", out_dir, "optional bundle directory");
    gradcheck->add_option("--corrupt-layer", gc_corrupt, "")->group("");  // debug, hidden

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kExitOk : kExitConfig;
    }

    try {
        if (train->parsed()) {
            return cmd_train(config_path, out_dir, resolve_threads(threads), seed_overrides);
        }
        if (unlearn->parsed()) {
            return cmd_unlearn(config_path, world_dir, strategy, client, select, out_dir,
                               with_oracle, resolve_threads(threads), seed_overrides);
        }
        if (verify->parsed()) {
            return cmd_verify(verify_dirs);
        }
        return cmd_gradcheck(gc_seed, gc_draws, gc_corrupt, out_dir);
    } catch (const sw::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const sw::ProtocolError& e) {
        std::cerr << "protocol error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const sw::SelectorError& e) {
        std::cerr << "selector error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const sw::DesignError& e) {
        std::cerr << "design error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const sw::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    }
}
