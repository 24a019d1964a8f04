#include "splitwiper/pipelines.hpp"

#include <algorithm>
#include <atomic>
#include <numeric>
#include <thread>

#include "splitwiper/errors.hpp"
#include "splitwiper/rng.hpp"

namespace splitwiper {

namespace {

std::vector<std::size_t> shuffled_indices(std::size_t n, SplitMix64& rng) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    for (std::size_t i = n; i > 1; --i) {
        const std::size_t j = rng.next_below(i);
        std::swap(idx[i - 1], idx[j]);
    }
    return idx;
}

/// Checks the config against what the dataset actually provides. The client
/// half trains locally with softmax cross-entropy on its cut outputs, so the
/// cut width must cover the class set; the server head must match it
/// exactly.
void check_dims_against_data(const ExperimentConfig& cfg, std::uint32_t class_count) {
    if (cfg.server_dims.back() != class_count) {
        throw ConfigError("server_dims last (" + std::to_string(cfg.server_dims.back()) +
                          ") must equal the class count (" + std::to_string(class_count) + ")");
    }
    if (cfg.client_dims.back() < class_count) {
        throw ConfigError("client_dims last (" + std::to_string(cfg.client_dims.back()) +
                          ") must be >= the class count (" + std::to_string(class_count) +
                          ") for local training");
    }
}

/// N epochs of local SGD on the client's own shard, seeded mini-batch order.
/// The local loss reads the cut outputs directly as logits over the client's
/// raw labels; nothing leaves the client.
void train_client_local(MlpModel& model, const Shard& shard, const ExperimentConfig& cfg,
                        CostLedger& ledger, ClientPhase& state) {
    const Party me = Party::client(shard.client_id);
    SplitMix64 shuffle_rng(derive_seed(cfg.seeds.shuffle, shard.client_id));
    for (std::uint32_t epoch = 0; epoch < cfg.client_epochs; ++epoch) {
        state = client_state_step(shard.client_id, state, ClientEvent::train_epoch());
        const auto order = shuffled_indices(shard.size(), shuffle_rng);
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t end = std::min(order.size(), start + cfg.batch_size);
            const std::vector<std::size_t> rows(order.begin() + static_cast<std::ptrdiff_t>(start),
                                                order.begin() + static_cast<std::ptrdiff_t>(end));
            const Tensor batch = shard.dataset.features.gather_rows(rows);
            std::vector<std::uint32_t> labels(rows.size());
            for (std::size_t i = 0; i < rows.size(); ++i) {
                labels[i] = shard.dataset.labels[rows[i]];
            }
            auto [logits, trace] = forward(model, batch, RunMode::Train);
            const Tensor dlogits = loss_softmax_xent(logits, labels).second;
            auto [grads, input_grad] = backward(model, trace, dlogits);
            sgd_step(model, grads, cfg.lr_client);
            ledger.add_compute(me, mac_count(model, rows.size(), PassKind::ForwardBackward));
        }
        ledger.add_epoch(me);
    }
}

/// One-off transmission: full-shard cut activations plus the label view the
/// mode dictates (raw, anonymized, or none for strategy-2 retransmission).
void transmit_activations(const WorldState& world, std::uint32_t k, LabelTag tag) {
    const Shard& shard = world.shards[k];
    const Tensor acts = forward_eval(world.client_models[k], shard.dataset.features);
    LabelSet labels = LabelSet::absent();
    if (tag == LabelTag::Raw) {
        labels = LabelSet::raw(shard.dataset.labels);
    } else if (tag == LabelTag::Anonymized) {
        labels = LabelSet::anonymized(world.anonymizers[k].apply_all(shard.dataset.labels));
    }
    world.transport->send(Party::client(k), Party::server(),
                          IntermediateBatch{k, acts, std::move(labels)});
}

LabelTag training_label_tag(const ExperimentConfig& cfg) {
    return cfg.label_mode == LabelMode::LabelSharing ? LabelTag::Raw : LabelTag::Anonymized;
}

/// Receives a pending IntermediateBatch and stores it. Cache replacement is
/// the only server-side mutation a transmission causes.
void server_receive_and_cache(WorldState& world, std::uint32_t k) {
    Message msg = world.transport->receive(Party::client(k), Party::server());
    auto* ib = std::get_if<IntermediateBatch>(&msg);
    if (ib == nullptr) throw ProtocolError("expected IntermediateBatch from client " +
                                           std::to_string(k));
    world.cache.put(ib->client_id, std::move(ib->activations), std::move(ib->labels));
}

/// M epochs of server SGD over the concatenation of all labeled cache
/// entries (ascending client id, cached row order), mini-batches drawn from
/// the server shuffle stream. Entries without labels cannot drive training
/// here and are skipped.
void train_server_on_cache(MlpModel& server, WorldState& world) {
    const ExperimentConfig& cfg = world.cfg;
    Tensor all_rows;
    std::vector<std::uint32_t> all_labels;
    {
        std::size_t rows = 0;
        std::size_t cols = 0;
        for (const auto& [id, entry] : world.cache.entries()) {
            if (entry.labels.tag == LabelTag::Absent) continue;
            rows += entry.activations.rows();
            cols = entry.activations.cols();
        }
        all_rows = Tensor(rows, cols);
        all_labels.reserve(rows);
        std::size_t cursor = 0;
        for (const auto& [id, entry] : world.cache.entries()) {
            if (entry.labels.tag == LabelTag::Absent) continue;
            for (std::size_t r = 0; r < entry.activations.rows(); ++r, ++cursor) {
                for (std::size_t c = 0; c < cols; ++c) {
                    all_rows.at(cursor, c) = entry.activations.at(r, c);
                }
            }
            all_labels.insert(all_labels.end(), entry.labels.values.begin(),
                              entry.labels.values.end());
        }
    }
    if (all_labels.empty()) throw ProtocolError("server cache holds no labeled entries");

    const Party server_party = Party::server();
    SplitMix64 shuffle_rng(derive_seed(cfg.seeds.shuffle, streams::kServerShuffle));
    for (std::uint32_t epoch = 0; epoch < cfg.server_epochs; ++epoch) {
        const auto order = shuffled_indices(all_labels.size(), shuffle_rng);
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t end = std::min(order.size(), start + cfg.batch_size);
            const std::vector<std::size_t> rows(order.begin() + static_cast<std::ptrdiff_t>(start),
                                                order.begin() + static_cast<std::ptrdiff_t>(end));
            const Tensor batch = all_rows.gather_rows(rows);
            std::vector<std::uint32_t> labels(rows.size());
            for (std::size_t i = 0; i < rows.size(); ++i) labels[i] = all_labels[rows[i]];
            auto [logits, trace] = forward(server, batch, RunMode::Train);
            const Tensor dlogits = loss_softmax_xent(logits, labels).second;
            auto [grads, input_grad] = backward(server, trace, dlogits);
            sgd_step(server, grads, cfg.lr_server);
            world.ledger->add_compute(server_party,
                                      mac_count(server, rows.size(), PassKind::ForwardBackward));
        }
        world.ledger->add_epoch(server_party);
    }
}

WorldState make_world(const ExperimentConfig& cfg, std::vector<Shard> shards) {
    WorldState world;
    world.cfg = cfg;
    world.shards = std::move(shards);
    world.ledger = std::make_shared<CostLedger>();
    world.transport = std::make_shared<Transport>(world.ledger);
    world.transport->register_party(Party::server());
    for (std::uint32_t k = 0; k < cfg.clients; ++k) {
        world.transport->register_party(Party::client(k));
        world.anonymizers.push_back(
            Anonymizer::make(cfg.seeds.anonymizer, k, world.shards[k].dataset.class_count));
        world.client_phases.push_back(ClientPhase::Idle);
    }
    return world;
}

}  // namespace

Dataset build_dataset(const ExperimentConfig& cfg) {
    if (cfg.dataset.kind == DatasetSpec::Kind::Blobs) {
        return gen_blobs(cfg.dataset.class_count, cfg.dataset.dims,
                         cfg.dataset.samples_per_class, cfg.dataset.spread,
                         derive_seed(cfg.seeds.data, streams::kBlobMeans));
    }
    return load_csv(cfg.dataset.path, cfg.dataset.label_column);
}

std::vector<Shard> partition_dataset(const ExperimentConfig& cfg, const Dataset& ds) {
    if (cfg.partition_mode == PartitionMode::Equal) {
        return partition_equal(ds, cfg.clients);
    }
    return partition_noniid(ds, cfg.clients, cfg.alpha,
                            derive_seed(cfg.seeds.data, streams::kPartition));
}

WorldState run_training(const ExperimentConfig& cfg, const Dataset& ds,
                        const RunOptions& opts) {
    return train_on_shards(cfg, partition_dataset(cfg, ds), opts, /*require_m_gt_n=*/true);
}

WorldState train_on_shards(const ExperimentConfig& cfg, std::vector<Shard> shards,
                           const RunOptions& opts, bool require_m_gt_n) {
    if (require_m_gt_n) {
        cfg.validate_for_training();
    } else {
        cfg.validate();
    }
    if (shards.size() != cfg.clients) {
        throw ConfigError("shard count " + std::to_string(shards.size()) +
                          " does not match K=" + std::to_string(cfg.clients));
    }
    check_dims_against_data(cfg, shards.front().dataset.class_count);

    WorldState world = make_world(cfg, std::move(shards));
    world.ledger->set_phase(Phase::Train);

    // Client phase: independent workers, one logical party each. Streams are
    // all derived per client, so any schedule produces the same bits.
    world.client_models.resize(cfg.clients);
    auto client_job = [&world, &cfg](std::uint32_t k) {
        world.client_phases[k] = client_state_step(k, world.client_phases[k],
                                                   ClientEvent::begin_training());
        world.client_models[k] =
            init_mlp(cfg.client_dims, /*dropout_rate=*/0.0, derive_seed(cfg.seeds.model, k));
        train_client_local(world.client_models[k], world.shards[k], cfg, *world.ledger,
                           world.client_phases[k]);
        world.client_phases[k] =
            client_state_step(k, world.client_phases[k], ClientEvent::freeze());
        set_frozen(world.client_models[k], true);
    };
    const unsigned threads = std::max(1u, opts.threads);
    if (threads == 1 || cfg.clients == 1) {
        for (std::uint32_t k = 0; k < cfg.clients; ++k) client_job(k);
    } else {
        std::vector<std::thread> workers;
        std::atomic<std::uint32_t> next{0};
        for (unsigned t = 0; t < std::min<unsigned>(threads, cfg.clients); ++t) {
            workers.emplace_back([&client_job, &next, &cfg] {
                for (;;) {
                    const std::uint32_t k = next.fetch_add(1);
                    if (k >= cfg.clients) return;
                    client_job(k);
                }
            });
        }
        for (auto& w : workers) w.join();
    }

    // One-off transmissions after the join, in client order.
    const LabelTag tag = training_label_tag(cfg);
    for (std::uint32_t k = 0; k < cfg.clients; ++k) {
        transmit_activations(world, k, tag);
        server_receive_and_cache(world, k);
    }

    world.server_model = init_mlp(cfg.server_dims, cfg.dropout_rate,
                                  derive_seed(cfg.seeds.model, streams::kServerModel));
    train_server_on_cache(world.server_model, world);
    return world;
}

WorldState retrain_oracle(const ExperimentConfig& cfg, std::vector<Shard> shards_u,
                          const RunOptions& opts) {
    return train_on_shards(cfg, std::move(shards_u), opts, /*require_m_gt_n=*/true);
}

WorldState run_strategy0(const ExperimentConfig& cfg, const Dataset& ds,
                         const UnlearnRequest& req) {
    cfg.validate_for_training();
    std::vector<Shard> shards = shards_after_unlearn(partition_dataset(cfg, ds), req);
    check_dims_against_data(cfg, shards.front().dataset.class_count);

    WorldState world = make_world(cfg, std::move(shards));
    // The whole baseline retrain is the unlearning procedure; every counter
    // lands in the Unlearn phase.
    world.ledger->set_phase(Phase::Unlearn);

    const Party server_party = Party::server();
    world.client_models.reserve(cfg.clients);
    std::vector<SplitMix64> shuffles;
    for (std::uint32_t k = 0; k < cfg.clients; ++k) {
        world.client_phases[k] =
            client_state_step(k, world.client_phases[k], ClientEvent::begin_training());
        world.client_models.push_back(
            init_mlp(cfg.client_dims, /*dropout_rate=*/0.0, derive_seed(cfg.seeds.model, k)));
        shuffles.emplace_back(derive_seed(cfg.seeds.shuffle, k));
    }
    world.server_model = init_mlp(cfg.server_dims, cfg.dropout_rate,
                                  derive_seed(cfg.seeds.model, streams::kServerModel));
    const bool share_labels = cfg.label_mode == LabelMode::LabelSharing;

    for (std::uint32_t round = 0; round < cfg.server_epochs; ++round) {
        for (std::uint32_t k = 0; k < cfg.clients; ++k) {
            // Client k's interactive epoch: per batch, activations up,
            // gradient G back, both halves step.
            const Shard& shard = world.shards[k];
            const Party me = Party::client(k);
            world.client_phases[k] =
                client_state_step(k, world.client_phases[k], ClientEvent::train_epoch());
            const auto order = shuffled_indices(shard.size(), shuffles[k]);
            std::uint32_t tag = 0;
            for (std::size_t start = 0; start < order.size();
                 start += cfg.batch_size, ++tag) {
                const std::size_t end = std::min(order.size(), start + cfg.batch_size);
                const std::vector<std::size_t> rows(
                    order.begin() + static_cast<std::ptrdiff_t>(start),
                    order.begin() + static_cast<std::ptrdiff_t>(end));
                const Tensor batch = shard.dataset.features.gather_rows(rows);
                std::vector<std::uint32_t> labels(rows.size());
                for (std::size_t i = 0; i < rows.size(); ++i) {
                    labels[i] = shard.dataset.labels[rows[i]];
                }

                auto [acts, client_trace] = forward(world.client_models[k], batch, RunMode::Train);
                world.transport->send(
                    me, server_party,
                    IntermediateBatch{k, acts,
                                      share_labels ? LabelSet::raw(labels) : LabelSet::absent()});
                Message up = world.transport->receive(me, server_party);
                auto& ib = std::get<IntermediateBatch>(up);

                auto [logits, server_trace] =
                    forward(world.server_model, ib.activations, RunMode::Train);
                Tensor dlogits;
                if (share_labels) {
                    dlogits = loss_softmax_xent(logits, ib.labels.values).second;
                } else {
                    // The client computes the loss gradient itself from the
                    // returned logits; only gradients cross the wire.
                    world.transport->send(server_party, me, ServerOutput{k, tag, logits});
                    Message so = world.transport->receive(server_party, me);
                    const auto& out = std::get<ServerOutput>(so);
                    Tensor g = loss_softmax_xent(out.logits, labels).second;
                    world.transport->send(me, server_party, OutputGradient{k, tag, std::move(g)});
                    Message og = world.transport->receive(me, server_party);
                    dlogits = std::move(std::get<OutputGradient>(og).grad);
                }
                auto [server_grads, cut_grad] =
                    backward(world.server_model, server_trace, dlogits);
                sgd_step(world.server_model, server_grads, cfg.lr_server);
                world.ledger->add_compute(
                    server_party,
                    mac_count(world.server_model, rows.size(), PassKind::ForwardBackward));

                world.transport->send(server_party, me, OutputGradient{k, tag, std::move(cut_grad)});
                Message back = world.transport->receive(server_party, me);
                auto [client_grads, input_grad] = backward(
                    world.client_models[k], client_trace, std::get<OutputGradient>(back).grad);
                sgd_step(world.client_models[k], client_grads, cfg.lr_client);
                world.ledger->add_compute(
                    me, mac_count(world.client_models[k], rows.size(), PassKind::ForwardBackward));
            }
            world.ledger->add_epoch(me);
        }
        world.ledger->add_epoch(server_party);
    }
    return world;
}

namespace {

/// Shared client-k prologue of both unlearning strategies: unfreeze (state
/// machine), reinitialize from the same model seed stream, drop the selected
/// samples, retrain N epochs, refreeze.
void unlearn_client_retrain(WorldState& world, const ExperimentConfig& cfg,
                            const UnlearnRequest& req) {
    if (req.client_id >= cfg.clients) {
        throw ProtocolError("unlearn request names client " + std::to_string(req.client_id) +
                            " but K=" + std::to_string(cfg.clients));
    }
    const std::uint32_t k = req.client_id;
    // Every client observes the request; only client k changes state.
    for (std::uint32_t c = 0; c < cfg.clients; ++c) {
        world.client_phases[c] =
            client_state_step(c, world.client_phases[c], ClientEvent::begin_unlearn(k));
    }
    world.shards[k] = apply_unlearn_request(world.shards[k], req);
    if (world.shards[k].size() == 0) {
        throw ProtocolError("unlearn request would empty client " + std::to_string(k) +
                            "'s shard");
    }
    world.client_models[k] =
        init_mlp(cfg.client_dims, /*dropout_rate=*/0.0, derive_seed(cfg.seeds.model, k));
    train_client_local(world.client_models[k], world.shards[k], cfg, *world.ledger,
                       world.client_phases[k]);
    world.client_phases[k] = client_state_step(k, world.client_phases[k], ClientEvent::freeze());
    set_frozen(world.client_models[k], true);
}

void require_trained_world(const WorldState& world, const ExperimentConfig& cfg) {
    if (world.client_models.size() != cfg.clients || world.cache.entries().empty()) {
        throw ProtocolError("unlearn request against an untrained world");
    }
    for (std::uint32_t k = 0; k < cfg.clients; ++k) {
        if (world.client_phases[k] != ClientPhase::Frozen) {
            throw ProtocolError("client " + std::to_string(k) + " is not frozen; world untrained");
        }
    }
}

}  // namespace

WorldState run_strategy1(WorldState world, const ExperimentConfig& cfg,
                         const UnlearnRequest& req) {
    cfg.validate();
    require_trained_world(world, cfg);
    world.cfg = cfg;
    world.ledger->set_phase(Phase::Unlearn);

    unlearn_client_retrain(world, cfg, req);
    const std::uint32_t k = req.client_id;
    transmit_activations(world, k, training_label_tag(cfg));
    server_receive_and_cache(world, k);

    if (cfg.server_init_mode == ServerInitMode::ColdReinit) {
        world.server_model = init_mlp(cfg.server_dims, cfg.dropout_rate,
                                      derive_seed(cfg.seeds.model, streams::kServerModel));
    }
    // WarmStart keeps the old server model as the starting point.
    train_server_on_cache(world.server_model, world);
    return world;
}

WorldState run_strategy2(WorldState world, const ExperimentConfig& cfg,
                         const UnlearnRequest& req) {
    cfg.validate();
    if (cfg.label_mode != LabelMode::NonLabelSharing) {
        throw ConfigError("strategy 2 requires label_mode == non_label_sharing");
    }
    require_trained_world(world, cfg);
    world.cfg = cfg;
    world.ledger->set_phase(Phase::Unlearn);

    unlearn_client_retrain(world, cfg, req);
    const std::uint32_t k = req.client_id;
    transmit_activations(world, k, LabelTag::Absent);
    server_receive_and_cache(world, k);

    const Party me = Party::client(k);
    const Party server_party = Party::server();

    // The client's private label view for the exchange. Gradients are
    // computed against the anonymized labels so the server keeps one output
    // space across the cache and the exchange; raw labels never leave.
    const std::vector<std::uint32_t> k_labels =
        world.anonymizers[k].apply_all(world.shards[k].dataset.labels);

    for (std::uint32_t epoch = 0; epoch < cfg.server_epochs; ++epoch) {
        for (const auto& [client_id, entry] : world.cache.entries()) {
            if (client_id == k) {
                // Interactive: batch_tag names the chunk of k's cached rows,
                // so the client can line up its labels without extra fields.
                std::uint32_t tag = 0;
                for (std::size_t start = 0; start < entry.activations.rows();
                     start += cfg.batch_size, ++tag) {
                    const std::size_t end =
                        std::min(entry.activations.rows(), start + cfg.batch_size);
                    std::vector<std::size_t> rows(end - start);
                    std::iota(rows.begin(), rows.end(), start);
                    const Tensor batch = entry.activations.gather_rows(rows);
                    auto [logits, trace] = forward(world.server_model, batch, RunMode::Train);
                    world.transport->send(server_party, me, ServerOutput{k, tag, logits});

                    world.client_phases[k] = client_state_step(
                        k, world.client_phases[k], ClientEvent::serve_gradient_exchange());
                    Message so = world.transport->receive(server_party, me);
                    const auto& out = std::get<ServerOutput>(so);
                    const std::size_t row0 =
                        static_cast<std::size_t>(out.batch_tag) * cfg.batch_size;
                    std::vector<std::uint32_t> labels(
                        k_labels.begin() + static_cast<std::ptrdiff_t>(row0),
                        k_labels.begin() +
                            static_cast<std::ptrdiff_t>(row0 + out.logits.rows()));
                    Tensor dlogits = loss_softmax_xent(out.logits, labels).second;
                    world.transport->send(me, server_party,
                                          OutputGradient{k, out.batch_tag, std::move(dlogits)});

                    Message og = world.transport->receive(me, server_party);
                    auto [grads, cut_grad] = backward(world.server_model, trace,
                                                      std::get<OutputGradient>(og).grad);
                    // cut_grad stays on the server; nothing flows back to k.
                    sgd_step(world.server_model, grads, cfg.lr_server);
                    world.ledger->add_compute(
                        server_party,
                        mac_count(world.server_model, rows.size(), PassKind::ForwardBackward));
                }
            } else if (cfg.strategy2_replay == Strategy2Replay::CacheReplay &&
                       entry.labels.tag != LabelTag::Absent) {
                for (std::size_t start = 0; start < entry.activations.rows();
                     start += cfg.batch_size) {
                    const std::size_t end =
                        std::min(entry.activations.rows(), start + cfg.batch_size);
                    std::vector<std::size_t> rows(end - start);
                    std::iota(rows.begin(), rows.end(), start);
                    const Tensor batch = entry.activations.gather_rows(rows);
                    std::vector<std::uint32_t> labels(
                        entry.labels.values.begin() + static_cast<std::ptrdiff_t>(start),
                        entry.labels.values.begin() + static_cast<std::ptrdiff_t>(end));
                    auto [logits, trace] = forward(world.server_model, batch, RunMode::Train);
                    Tensor dlogits = loss_softmax_xent(logits, labels).second;
                    auto [grads, cut_grad] = backward(world.server_model, trace, dlogits);
                    sgd_step(world.server_model, grads, cfg.lr_server);
                    world.ledger->add_compute(
                        server_party,
                        mac_count(world.server_model, rows.size(), PassKind::ForwardBackward));
                }
            }
        }
        world.ledger->add_epoch(server_party);
    }
    return world;
}

std::vector<std::uint32_t> predict_labels(const WorldState& world, std::uint32_t client_id,
                                          const Tensor& features) {
    if (client_id >= world.client_models.size()) {
        throw ProtocolError("no such client " + std::to_string(client_id));
    }
    const Tensor acts = forward_eval(world.client_models[client_id], features);
    const Tensor logits = forward_eval(world.server_model, acts);
    std::vector<std::uint32_t> out;
    out.reserve(logits.rows());
    const bool anonymized = world.cfg.label_mode == LabelMode::NonLabelSharing;
    for (std::size_t r = 0; r < logits.rows(); ++r) {
        std::uint32_t best = 0;
        for (std::size_t c = 1; c < logits.cols(); ++c) {
            if (logits.at(r, c) > logits.at(r, best)) best = static_cast<std::uint32_t>(c);
        }
        out.push_back(anonymized ? world.anonymizers[client_id].invert(best) : best);
    }
    return out;
}

}  // namespace splitwiper
