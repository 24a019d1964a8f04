#include "splitwiper/bundle.hpp"

#include <sstream>

#include "splitwiper/errors.hpp"
#include "splitwiper/util.hpp"

namespace splitwiper {

namespace {

std::string client_checkpoint_name(std::uint32_t k) {
    return "client_" + std::to_string(k) + ".swpr";
}

void write_manifest(const std::filesystem::path& dir, const std::string& command,
                    int strategy, const std::string& run_id,
                    const std::vector<std::string>& files) {
    nlohmann::json manifest;
    manifest["run_id"] = run_id;
    manifest["command"] = command;
    manifest["strategy"] = strategy;
    nlohmann::json sums;
    for (const std::string& f : files) {
        sums[f] = fnv1a64_hex(read_file(dir / f));
    }
    manifest["files"] = std::move(sums);
    write_file(dir / BundleFiles::kManifest, manifest.dump(2) + "\n");
}

std::vector<std::string> write_world_files(const std::filesystem::path& dir,
                                           const WorldState& world, int strategy,
                                           const EvalReport& report) {
    std::vector<std::string> files;
    write_file(dir / BundleFiles::kConfig, world.cfg.canonical_text() + "\n");
    files.emplace_back(BundleFiles::kConfig);

    for (std::uint32_t k = 0; k < world.cfg.clients; ++k) {
        const std::string name = client_checkpoint_name(k);
        save_checkpoint(world.client_models[k], dir / name);
        files.push_back(name);
    }
    save_checkpoint(world.server_model, dir / "server.swpr");
    files.emplace_back("server.swpr");

    write_file(dir / BundleFiles::kLedger, world.ledger->snapshot().to_json().dump(2) + "\n");
    files.emplace_back(BundleFiles::kLedger);

    write_file(dir / BundleFiles::kMessages, world.transport->log_jsonl());
    files.emplace_back(BundleFiles::kMessages);

    write_file(dir / BundleFiles::kMetrics, metrics_csv(summarize_run(world, strategy)));
    files.emplace_back(BundleFiles::kMetrics);

    write_file(dir / BundleFiles::kEval, eval_csv(world.cfg.run_id(), report));
    files.emplace_back(BundleFiles::kEval);
    return files;
}

}  // namespace

void write_train_bundle(const std::filesystem::path& dir, const WorldState& world,
                        const EvalReport& report) {
    std::filesystem::create_directories(dir);
    const auto files = write_world_files(dir, world, /*strategy=*/-1, report);
    write_manifest(dir, "train", -1, world.cfg.run_id(), files);
}

void write_unlearn_bundle(const std::filesystem::path& dir, const WorldState& world,
                          int strategy, const EvalReport& report) {
    std::filesystem::create_directories(dir);
    auto files = write_world_files(dir, world, strategy, report);
    write_file(dir / BundleFiles::kGoalAudit, report.to_json().dump(2) + "\n");
    files.emplace_back(BundleFiles::kGoalAudit);
    write_manifest(dir, "unlearn", strategy, world.cfg.run_id(), files);
}

void write_gradcheck_bundle(const std::filesystem::path& dir, const GradCheckReport& report) {
    std::filesystem::create_directories(dir);
    write_file(dir / BundleFiles::kGradCheck, report.to_json().dump(2) + "\n");
    write_manifest(dir, "gradcheck", -1, "gradcheck", {BundleFiles::kGradCheck});
}

LoadedBundle load_bundle(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir)) {
        throw FormatError("bundle directory not found: " + dir.string());
    }
    nlohmann::json manifest;
    try {
        manifest = nlohmann::json::parse(read_file(dir / BundleFiles::kManifest));
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("bad bundle manifest: " + std::string(e.what()));
    }

    LoadedBundle bundle;
    bundle.dir = dir;
    try {
        bundle.command = manifest.at("command").get<std::string>();
        bundle.strategy = manifest.at("strategy").get<int>();
        bundle.run_id = manifest.at("run_id").get<std::string>();
        for (const auto& [name, checksum] : manifest.at("files").items()) {
            const std::string actual = fnv1a64_hex(read_file(dir / name));
            if (actual != checksum.get<std::string>()) {
                throw FormatError("checksum mismatch for " + name + " in " + dir.string());
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("bad bundle manifest: " + std::string(e.what()));
    }

    const auto config_path = dir / BundleFiles::kConfig;
    if (std::filesystem::exists(config_path)) {
        bundle.cfg = ExperimentConfig::from_json_text(read_file(config_path));
        if (bundle.cfg->run_id() != bundle.run_id) {
            throw FormatError("run_id does not match config in " + dir.string());
        }
    }
    const auto ledger_path = dir / BundleFiles::kLedger;
    if (std::filesystem::exists(ledger_path)) {
        try {
            bundle.ledger = LedgerData::from_json(nlohmann::json::parse(read_file(ledger_path)));
        } catch (const nlohmann::json::exception& e) {
            throw FormatError("bad ledger JSON: " + std::string(e.what()));
        }
    }
    const auto messages_path = dir / BundleFiles::kMessages;
    if (std::filesystem::exists(messages_path)) {
        std::istringstream is(read_file(messages_path));
        std::string line;
        while (std::getline(is, line)) {
            if (line.empty()) continue;
            nlohmann::json j;
            try {
                j = nlohmann::json::parse(line);
            } catch (const nlohmann::json::exception& e) {
                throw FormatError("bad message log line: " + std::string(e.what()));
            }
            const auto phase = j.at("phase").get<std::string>();
            const auto n = j.at("bytes").get<std::uint64_t>();
            bundle.phase_log_bytes[phase] += n;
            if (phase == "unlearn") {
                bundle.unlearn_variant_bytes[j.at("variant").get<std::string>()] += n;
            }
        }
    }
    const auto goal_path = dir / BundleFiles::kGoalAudit;
    if (std::filesystem::exists(goal_path)) {
        try {
            bundle.goal_audit = nlohmann::json::parse(read_file(goal_path));
        } catch (const nlohmann::json::exception& e) {
            throw FormatError("bad goal audit JSON: " + std::string(e.what()));
        }
    }
    const auto gradcheck_path = dir / BundleFiles::kGradCheck;
    if (std::filesystem::exists(gradcheck_path)) {
        try {
            bundle.gradcheck = nlohmann::json::parse(read_file(gradcheck_path));
        } catch (const nlohmann::json::exception& e) {
            throw FormatError("bad gradcheck JSON: " + std::string(e.what()));
        }
    }
    return bundle;
}

RunSummary LoadedBundle::to_summary() const {
    if (!cfg || !ledger) {
        throw FormatError("bundle " + dir.string() + " lacks config or ledger");
    }
    RunSummary s;
    s.run_id = run_id;
    s.strategy = strategy;
    s.cfg = *cfg;
    s.ledger = *ledger;
    s.unlearn_variant_bytes = unlearn_variant_bytes;
    return s;
}

MlpModel load_bundle_checkpoint(const std::filesystem::path& dir, const std::string& name) {
    return load_checkpoint(dir / name);
}

}  // namespace splitwiper
