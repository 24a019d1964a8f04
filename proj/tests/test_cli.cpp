#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include <doctest.h>
#include <json.hpp>

#include "splitwiper/util.hpp"

namespace fs = std::filesystem;

namespace {

std::string cli_path() {
    const char* p = std::getenv("SPLITWIPER_CLI");
    REQUIRE_MESSAGE(p != nullptr, "SPLITWIPER_CLI must point at the built binary");
    return p;
}

int run_cli(const std::string& args) {
    const std::string cmd = cli_path() + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
}

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("swpr_cli_" + std::to_string(std::rand()) + std::to_string(std::rand()));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

nlohmann::json small_config() {
    return nlohmann::json::parse(R"({
        "K": 2, "N": 2, "M": 4,
        "lr_client": 0.05, "lr_server": 0.1,
        "batch_size": 16,
        "label_mode": "label_sharing",
        "server_init_mode": "cold_reinit",
        "strategy2_replay": "cache_replay",
        "client_dims": [4, 8, 4],
        "server_dims": [4, 8, 3],
        "dropout_rate": 0.0,
        "alpha": 0.5,
        "partition_mode": "dirichlet",
        "seeds": {"data": 1, "model": 2, "anonymizer": 3, "shuffle": 4},
        "dataset": {"kind": "blobs", "class_count": 3, "dims": 4,
                    "samples_per_class": 30, "spread": 0.3}
    })");
}

fs::path write_config(const TempDir& dir, const nlohmann::json& j, const std::string& name) {
    const fs::path p = dir.path / name;
    std::ofstream os(p);
    os << j.dump(2);
    return p;
}

bool files_equal(const fs::path& a, const fs::path& b) {
    return splitwiper::read_file(a) == splitwiper::read_file(b);
}

}  // namespace

TEST_CASE("train: valid config exits 0 and writes the bundle") {
    TempDir tmp;
    const auto cfg = write_config(tmp, small_config(), "cfg.json");
    const auto out = tmp.path / "run";
    CHECK(run_cli("train --config " + cfg.string() + " --out " + out.string()) == 0);
    for (const char* f : {"config.json", "run.json", "ledger.json", "messages.jsonl",
                          "metrics.csv", "eval.csv", "client_0.swpr", "client_1.swpr",
                          "server.swpr"}) {
        CHECK_MESSAGE(fs::exists(out / f), f);
    }
}

TEST_CASE("train: M <= N exits 2 and cites the requirement") {
    TempDir tmp;
    auto j = small_config();
    j["M"] = 2;  // == N
    const auto cfg = write_config(tmp, j, "cfg.json");
    const std::string cmd = cli_path() + " train --config " + cfg.string() + " --out " +
                            (tmp.path / "run").string() + " 2> " +
                            (tmp.path / "err.txt").string();
    const int status = std::system(cmd.c_str());
    CHECK(WEXITSTATUS(status) == 2);
    const std::string err = splitwiper::read_file(tmp.path / "err.txt");
    CHECK(err.find("M > N") != std::string::npos);
}

TEST_CASE("train: unknown config key exits 2") {
    TempDir tmp;
    auto j = small_config();
    j["typo_key"] = 1;
    const auto cfg = write_config(tmp, j, "cfg.json");
    CHECK(run_cli("train --config " + cfg.string() + " --out " + (tmp.path / "x").string()) == 2);
}

TEST_CASE("train twice: identical run ids and byte-identical artifacts") {
    TempDir tmp;
    const auto cfg = write_config(tmp, small_config(), "cfg.json");
    const auto a = tmp.path / "a";
    const auto b = tmp.path / "b";
    REQUIRE(run_cli("train --config " + cfg.string() + " --out " + a.string()) == 0);
    REQUIRE(run_cli("train --config " + cfg.string() + " --out " + b.string() +
                    " --threads 3") == 0);
    for (const char* f : {"config.json", "run.json", "ledger.json", "messages.jsonl",
                          "metrics.csv", "eval.csv", "client_0.swpr", "client_1.swpr",
                          "server.swpr"}) {
        CHECK_MESSAGE(files_equal(a / f, b / f), f);
    }
}

TEST_CASE("unlearn: strategy 1 with oracle reports exact equivalence") {
    TempDir tmp;
    const auto cfg = write_config(tmp, small_config(), "cfg.json");
    const auto world = tmp.path / "world";
    REQUIRE(run_cli("train --config " + cfg.string() + " --out " + world.string()) == 0);

    const auto out = tmp.path / "unlearn";
    CHECK(run_cli("unlearn --config " + cfg.string() + " --world " + world.string() +
                  " --strategy 1 --client 0 --select class:2 --oracle --out " + out.string()) ==
          0);
    const auto audit = nlohmann::json::parse(splitwiper::read_file(out / "goal_audit.json"));
    CHECK(audit.at("goal_audit").at("G3_effectiveness").at("status") == "pass");
    CHECK(audit.at("oracle_param_distance").get<double>() == 0.0);
    CHECK(audit.at("goal_audit").at("G2_no_interference").at("status") == "pass");
}

TEST_CASE("unlearn: --select none with cold reinit reproduces the input world") {
    TempDir tmp;
    const auto cfg = write_config(tmp, small_config(), "cfg.json");
    const auto world = tmp.path / "world";
    REQUIRE(run_cli("train --config " + cfg.string() + " --out " + world.string()) == 0);
    const auto out = tmp.path / "noop";
    REQUIRE(run_cli("unlearn --config " + cfg.string() + " --world " + world.string() +
                    " --strategy 1 --client 1 --select none --out " + out.string()) == 0);
    for (const char* f : {"client_0.swpr", "client_1.swpr", "server.swpr"}) {
        CHECK_MESSAGE(files_equal(world / f, out / f), f);
    }
}

TEST_CASE("unlearn: strategy 2 on a label-sharing config exits 2") {
    TempDir tmp;
    const auto cfg = write_config(tmp, small_config(), "cfg.json");
    const auto world = tmp.path / "world";
    REQUIRE(run_cli("train --config " + cfg.string() + " --out " + world.string()) == 0);
    CHECK(run_cli("unlearn --config " + cfg.string() + " --world " + world.string() +
                  " --strategy 2 --client 0 --select class:1 --out " +
                  (tmp.path / "s2").string()) == 2);
}

TEST_CASE("unlearn: unknown client exits 2") {
    TempDir tmp;
    const auto cfg = write_config(tmp, small_config(), "cfg.json");
    const auto world = tmp.path / "world";
    REQUIRE(run_cli("train --config " + cfg.string() + " --out " + world.string()) == 0);
    CHECK(run_cli("unlearn --config " + cfg.string() + " --world " + world.string() +
                  " --strategy 1 --client 9 --select none --out " +
                  (tmp.path / "bad").string()) == 2);
}

TEST_CASE("unlearn config may only change M, server_init_mode, strategy2_replay") {
    TempDir tmp;
    const auto cfg = write_config(tmp, small_config(), "cfg.json");
    const auto world = tmp.path / "world";
    REQUIRE(run_cli("train --config " + cfg.string() + " --out " + world.string()) == 0);

    auto changed = small_config();
    changed["M"] = 8;  // allowed
    const auto cfg_m = write_config(tmp, changed, "cfg_m.json");
    CHECK(run_cli("unlearn --config " + cfg_m.string() + " --world " + world.string() +
                  " --strategy 1 --client 0 --select none --out " +
                  (tmp.path / "m8").string()) == 0);

    auto bad = small_config();
    bad["seeds"]["model"] = 99;  // not allowed
    const auto cfg_bad = write_config(tmp, bad, "cfg_bad.json");
    CHECK(run_cli("unlearn --config " + cfg_bad.string() + " --world " + world.string() +
                  " --strategy 1 --client 0 --select none --out " +
                  (tmp.path / "bad").string()) == 2);
}

TEST_CASE("verify: passes coherent bundles, exits 3 on a tampered ledger") {
    TempDir tmp;
    const auto cfg = write_config(tmp, small_config(), "cfg.json");
    const auto world = tmp.path / "world";
    REQUIRE(run_cli("train --config " + cfg.string() + " --out " + world.string()) == 0);
    CHECK(run_cli("verify " + world.string()) == 0);

    // Tamper: flip a byte in ledger.json without updating the manifest.
    const auto ledger_path = world / "ledger.json";
    std::string text = splitwiper::read_file(ledger_path);
    text.back() = text.back() == '}' ? ' ' : '}';
    splitwiper::write_file(ledger_path, text);
    CHECK(run_cli("verify " + world.string()) == 3);
}

TEST_CASE("verify: strategy-1 bundles varying only M pass the one-off check") {
    TempDir tmp;
    const auto cfg = write_config(tmp, small_config(), "cfg.json");
    const auto world = tmp.path / "world";
    REQUIRE(run_cli("train --config " + cfg.string() + " --out " + world.string()) == 0);

    std::string dirs;
    for (int m : {4, 8}) {
        auto j = small_config();
        j["M"] = m;
        const auto cfg_m = write_config(tmp, j, "cfg_m" + std::to_string(m) + ".json");
        const auto out = tmp.path / ("u" + std::to_string(m));
        REQUIRE(run_cli("unlearn --config " + cfg_m.string() + " --world " + world.string() +
                        " --strategy 1 --client 0 --select class:1 --out " + out.string()) == 0);
        dirs += " " + out.string();
    }
    CHECK(run_cli("verify" + dirs) == 0);
}

TEST_CASE("gradcheck: clean pass, corrupted layer caught, deterministic output") {
    TempDir tmp;
    CHECK(run_cli("gradcheck --seed 7") == 0);
    CHECK(run_cli("gradcheck --seed 7 --corrupt-layer 0") == 3);

    const std::string out1 = (tmp.path / "g1.txt").string();
    const std::string out2 = (tmp.path / "g2.txt").string();
    REQUIRE(std::system((cli_path() + " gradcheck --seed 11 > " + out1 + " 2>&1").c_str()) == 0);
    REQUIRE(std::system((cli_path() + " gradcheck --seed 11 > " + out2 + " 2>&1").c_str()) == 0);
    CHECK(files_equal(out1, out2));
}

TEST_CASE("verify accepts a gradcheck bundle and reports the max error") {
    TempDir tmp;
    const auto out = tmp.path / "gc";
    REQUIRE(run_cli("gradcheck --seed 3 --out " + out.string()) == 0);
    CHECK(run_cli("verify " + out.string()) == 0);
}
