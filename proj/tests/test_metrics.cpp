#include <cmath>

#include <doctest.h>

#include "splitwiper/errors.hpp"
#include "splitwiper/metrics.hpp"
#include "splitwiper/pipelines.hpp"

using namespace splitwiper;

namespace {

ExperimentConfig tiny_cfg() {
    ExperimentConfig cfg;
    cfg.clients = 2;
    cfg.client_epochs = 2;
    cfg.server_epochs = 4;
    cfg.lr_client = 0.05;
    cfg.lr_server = 0.1;
    cfg.batch_size = 16;
    cfg.client_dims = {4, 8, 4};
    cfg.server_dims = {4, 8, 3};
    cfg.alpha = 0.5;
    cfg.seeds = {5, 6, 7, 8};
    cfg.dataset.class_count = 3;
    cfg.dataset.dims = 4;
    cfg.dataset.samples_per_class = 40;
    cfg.dataset.spread = 0.3;
    return cfg;
}

// Constructs a world whose composed model is fully under test control.
WorldState constant_logit_world(std::uint32_t winning_class) {
    ExperimentConfig cfg = tiny_cfg();
    cfg.clients = 1;
    WorldState w;
    w.cfg = cfg;
    w.ledger = std::make_shared<CostLedger>();
    w.transport = std::make_shared<Transport>(w.ledger);
    // Client half: identity map 2 -> 2.
    MlpModel client = init_mlp({2, 2}, {Activation::Identity}, 0.0, 1);
    client.layers()[0].weights.at(0, 0) = 1.0;
    client.layers()[0].weights.at(0, 1) = 0.0;
    client.layers()[0].weights.at(1, 0) = 0.0;
    client.layers()[0].weights.at(1, 1) = 1.0;
    w.client_models.push_back(client);
    w.anonymizers.push_back(Anonymizer::make(1, 0, 2));
    w.client_phases.push_back(ClientPhase::Frozen);
    // Server half: zero weights, bias favoring one class -> constant logits.
    MlpModel server = init_mlp({2, 2}, {Activation::Identity}, 0.0, 2);
    for (double& v : server.layers()[0].weights.raw()) v = 0.0;
    server.layers()[0].bias.at(0, winning_class) = 1.0;
    w.server_model = server;
    return w;
}

}  // namespace

TEST_CASE("evaluate_client: constant classifier scores the class share") {
    WorldState w = constant_logit_world(0);
    Dataset ds;
    ds.class_count = 2;
    ds.features = Tensor(10, 2);
    ds.labels = {0, 1, 0, 1, 0, 1, 0, 1, 0, 1};  // balanced
    CHECK(evaluate_client(w, 0, ds) == doctest::Approx(0.5));
}

TEST_CASE("evaluate_client: oracle-constructed separable model scores 1.0") {
    // Features are one-hot; identity client + identity-ish server separates
    // them perfectly.
    WorldState w = constant_logit_world(0);
    for (double& v : w.server_model.layers()[0].weights.raw()) v = 0.0;
    w.server_model.layers()[0].weights.at(0, 0) = 1.0;
    w.server_model.layers()[0].weights.at(1, 1) = 1.0;
    w.server_model.layers()[0].bias.at(0, 0) = 0.0;
    Dataset ds;
    ds.class_count = 2;
    ds.features = Tensor(6, 2);
    for (std::size_t i = 0; i < 6; ++i) ds.features.at(i, i % 2) = 1.0;
    ds.labels = {0, 1, 0, 1, 0, 1};
    CHECK(evaluate_client(w, 0, ds) == 1.0);
}

TEST_CASE("evaluate_client mutates nothing") {
    const ExperimentConfig cfg = tiny_cfg();
    const Dataset ds = build_dataset(cfg);
    const WorldState w = run_training(cfg, ds);
    const auto before_client = checkpoint_bytes(w.client_models[0]);
    const auto before_server = checkpoint_bytes(w.server_model);
    const auto ledger_before = w.ledger->snapshot().to_json();
    (void)evaluate_client(w, 0, w.shards[0].dataset);
    CHECK(checkpoint_bytes(w.client_models[0]) == before_client);
    CHECK(checkpoint_bytes(w.server_model) == before_server);
    CHECK(w.ledger->snapshot().to_json() == ledger_before);
}

TEST_CASE("evaluate_client rejects mismatched feature dims") {
    const ExperimentConfig cfg = tiny_cfg();
    const Dataset ds = build_dataset(cfg);
    const WorldState w = run_training(cfg, ds);
    Dataset bad;
    bad.class_count = 3;
    bad.features = Tensor(2, 9);
    bad.labels = {0, 1};
    CHECK_THROWS_AS(evaluate_client(w, 0, bad), ShapeError);
}

TEST_CASE("effectiveness report: oracle vs itself has zero deltas everywhere") {
    const ExperimentConfig cfg = tiny_cfg();
    const Dataset ds = build_dataset(cfg);
    const WorldState w = run_training(cfg, ds);
    CHECK(parameter_distance(w, w) == 0.0);
}

TEST_CASE("effectiveness report carries all four goals and exact-equivalence pass") {
    const ExperimentConfig cfg = tiny_cfg();
    const Dataset ds = build_dataset(cfg);
    WorldState world = run_training(cfg, ds);
    const std::vector<Shard> original = world.shards;
    const UnlearnRequest req = UnlearnRequest::by_class(0, 1);
    const Dataset forgotten = selected_dataset(original[0], req);

    const LedgerData before = world.ledger->snapshot();
    std::map<std::uint32_t, std::uint64_t> versions;
    for (const auto& [id, e] : world.cache.entries()) versions[id] = e.version;

    const WorldState after = run_strategy1(std::move(world), cfg, req);
    const WorldState oracle = retrain_oracle(cfg, shards_after_unlearn(original, req));

    const EvalReport report =
        effectiveness_report(after, 1, req, forgotten, &oracle, before, versions);

    REQUIRE(report.goals.size() == 4);
    CHECK(report.goals[0].goal == "G1_low_overhead");
    CHECK(report.goals[0].status == "pass");
    CHECK(report.goals[1].goal == "G2_no_interference");
    CHECK(report.goals[1].status == "pass");
    CHECK(report.goals[2].goal == "G3_effectiveness");
    CHECK(report.goals[2].status == "pass");  // distance exactly 0
    REQUIRE(report.oracle_param_distance.has_value());
    CHECK(*report.oracle_param_distance == 0.0);
    CHECK(report.goals[3].goal == "G4_utility");
    CHECK(report.goals[3].status == "pass");  // same-seed gap is identically 0

    const auto j = report.to_json();
    CHECK(j.contains("goal_audit"));
    CHECK(j.at("goal_audit").size() == 4);
}

TEST_CASE("warm-start runs report a nonzero distance instead of asserting zero") {
    ExperimentConfig cfg = tiny_cfg();
    const Dataset ds = build_dataset(cfg);
    WorldState world = run_training(cfg, ds);
    const std::vector<Shard> original = world.shards;
    const UnlearnRequest req = UnlearnRequest::by_class(0, 1);
    const Dataset forgotten = selected_dataset(original[0], req);
    const LedgerData before = world.ledger->snapshot();

    cfg.server_init_mode = ServerInitMode::WarmStart;
    const WorldState after = run_strategy1(std::move(world), cfg, req);
    const WorldState oracle = retrain_oracle(cfg, shards_after_unlearn(original, req));
    const EvalReport report = effectiveness_report(after, 1, req, forgotten, &oracle, before, {});
    REQUIRE(report.oracle_param_distance.has_value());
    CHECK(*report.oracle_param_distance > 0.0);
    CHECK(report.goals[2].status == "measured");
}

TEST_CASE("parameter_distance rejects structurally different worlds") {
    const ExperimentConfig cfg = tiny_cfg();
    const Dataset ds = build_dataset(cfg);
    const WorldState a = run_training(cfg, ds);
    ExperimentConfig other = cfg;
    other.client_dims = {4, 6, 4};
    const WorldState b = run_training(other, ds);
    CHECK_THROWS_AS(parameter_distance(a, b), ReportError);
}

TEST_CASE("complexity_assertions: strategy-1 one-off and strategy-0 scaling") {
    const ExperimentConfig base = tiny_cfg();
    const Dataset ds = build_dataset(base);
    const UnlearnRequest req = UnlearnRequest::by_class(0, 1);

    SUBCASE("strategy 1: bytes constant in M") {
        std::vector<RunSummary> runs;
        for (std::uint32_t m : {4u, 8u}) {
            WorldState world = run_training(base, ds);
            ExperimentConfig cfg = base;
            cfg.server_epochs = m;
            runs.push_back(summarize_run(run_strategy1(std::move(world), cfg, req), 1));
        }
        const auto checks = complexity_assertions(runs);
        REQUIRE(checks.size() == 2);
        CHECK(checks[0].pass);
        CHECK(checks[0].expected == 1.0);
        CHECK(checks[0].measured == 1.0);
        CHECK(checks[1].name == "strategy1_client_compute_constant_in_M");
        CHECK(checks[1].pass);
    }

    SUBCASE("strategy 2: interactive bytes double with M") {
        ExperimentConfig nls = base;
        nls.label_mode = LabelMode::NonLabelSharing;
        std::vector<RunSummary> runs;
        for (std::uint32_t m : {4u, 8u}) {
            WorldState world = run_training(nls, ds);
            ExperimentConfig cfg = nls;
            cfg.server_epochs = m;
            runs.push_back(summarize_run(run_strategy2(std::move(world), cfg, req), 2));
        }
        const auto checks = complexity_assertions(runs);
        REQUIRE(checks.size() == 2);
        CHECK(checks[0].pass);
        CHECK(checks[0].expected == 2.0);
        CHECK(checks[0].measured == 2.0);
        CHECK(checks[1].pass);
    }

    SUBCASE("strategy 0: client compute doubles with M") {
        std::vector<RunSummary> runs;
        for (std::uint32_t m : {4u, 8u}) {
            ExperimentConfig cfg = base;
            cfg.server_epochs = m;
            runs.push_back(summarize_run(run_strategy0(cfg, ds, req), 0));
        }
        const auto checks = complexity_assertions(runs);
        REQUIRE(checks.size() == 1);
        CHECK(checks[0].pass);
        CHECK(checks[0].measured == 2.0);
    }

    SUBCASE("strategy 0: client compute doubles with K on equal shards") {
        std::vector<RunSummary> runs;
        for (std::uint32_t k : {2u, 4u}) {
            ExperimentConfig cfg = base;
            cfg.clients = k;
            cfg.partition_mode = PartitionMode::Equal;
            // Shard size held fixed: the dataset grows with K.
            cfg.dataset.samples_per_class = 20 * k;
            const Dataset grown = build_dataset(cfg);
            runs.push_back(summarize_run(run_strategy0(cfg, grown, UnlearnRequest::none(0)), 0));
        }
        const auto checks = complexity_assertions(runs);
        REQUIRE(checks.size() == 1);
        CHECK(checks[0].pass);
        CHECK(checks[0].expected == 2.0);
        CHECK(checks[0].measured == 2.0);
    }

    SUBCASE("varying K without growing the dataset is refused") {
        std::vector<RunSummary> runs;
        for (std::uint32_t k : {2u, 4u}) {
            ExperimentConfig cfg = base;
            cfg.clients = k;
            cfg.partition_mode = PartitionMode::Equal;
            runs.push_back(summarize_run(run_strategy0(cfg, ds, UnlearnRequest::none(0)), 0));
        }
        CHECK_THROWS_AS(complexity_assertions(runs), DesignError);
    }
}

TEST_CASE("complexity_assertions rejects runs differing in more than one factor") {
    const ExperimentConfig base = tiny_cfg();
    const Dataset ds = build_dataset(base);
    std::vector<RunSummary> runs;
    {
        ExperimentConfig cfg = base;
        runs.push_back(summarize_run(run_strategy0(cfg, ds, UnlearnRequest::none(0)), 0));
        cfg.server_epochs = 8;
        cfg.clients = 3;
        const Dataset ds3 = build_dataset(cfg);
        runs.push_back(summarize_run(run_strategy0(cfg, ds3, UnlearnRequest::none(0)), 0));
    }
    CHECK_THROWS_AS(complexity_assertions(runs), DesignError);
}

TEST_CASE("csv exports carry the documented columns") {
    const ExperimentConfig cfg = tiny_cfg();
    const Dataset ds = build_dataset(cfg);
    const WorldState w = run_training(cfg, ds);
    const RunSummary s = summarize_run(w, -1);
    const std::string metrics = metrics_csv(s);
    CHECK(metrics.rfind("run_id,strategy,phase,party,compute_units,bytes_sent,bytes_received,epochs\n",
                        0) == 0);
    CHECK(metrics.find("server") != std::string::npos);

    EvalReport report;
    report.clients.push_back({0, {{"own", 0.925, 40}}});
    const std::string eval = eval_csv("abc", report);
    CHECK(eval == "run_id,client,split,accuracy\nabc,0,own,0.92500000000000004\n");
}
