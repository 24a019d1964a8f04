#include <cstdint>
#include <memory>
#include <numeric>
#include <sstream>
#include <vector>

#include <doctest.h>
#include <json.hpp>

#include "splitwiper/anonymizer.hpp"
#include "splitwiper/cache.hpp"
#include "splitwiper/client_state.hpp"
#include "splitwiper/errors.hpp"
#include "splitwiper/ledger.hpp"
#include "splitwiper/transport.hpp"

using namespace splitwiper;

namespace {

Tensor filled(std::size_t rows, std::size_t cols, double v) {
    Tensor t(rows, cols);
    for (double& x : t.raw()) x = v;
    return t;
}

// Reference keyed Fisher-Yates, re-derived from its written spec with its
// own splitmix64. Must agree with Anonymizer::make.
std::vector<std::uint32_t> ref_permutation(std::uint64_t seed, std::uint32_t client,
                                           std::uint32_t classes) {
    struct Mix {
        std::uint64_t s;
        std::uint64_t next() {
            s += 0x9E3779B97F4A7C15ULL;
            std::uint64_t z = s;
            z ^= z >> 30;
            z *= 0xBF58476D1CE4E5B9ULL;
            z ^= z >> 27;
            z *= 0x94D049BB133111EBULL;
            z ^= z >> 31;
            return z;
        }
    };
    auto mix_once = [](std::uint64_t z) {
        z ^= z >> 30;
        z *= 0xBF58476D1CE4E5B9ULL;
        z ^= z >> 27;
        z *= 0x94D049BB133111EBULL;
        z ^= z >> 31;
        return z;
    };
    // derive_seed(seed, stream) = mix(seed + golden * (stream + 1))
    Mix rng{mix_once(seed + 0x9E3779B97F4A7C15ULL * (std::uint64_t(client) + 1))};
    std::vector<std::uint32_t> perm(classes);
    std::iota(perm.begin(), perm.end(), 0u);
    for (std::uint32_t i = classes; i > 1; --i) {
        const auto j = static_cast<std::uint32_t>(rng.next() % i);
        std::swap(perm[i - 1], perm[j]);
    }
    return perm;
}

}  // namespace

TEST_CASE("serialize_message: IntermediateBatch size arithmetic") {
    const IntermediateBatch ib{3, filled(8, 16, 1.5), LabelSet::absent()};
    const auto bytes = serialize_message(ib);
    CHECK(bytes.size() == 1042);  // 1+4 + (4+4+8*16*8) + 1+4
    CHECK(serialized_size(Message{ib}) == 1042);
}

TEST_CASE("serialize/deserialize round-trips every variant") {
    std::vector<Message> messages;
    messages.emplace_back(IntermediateBatch{1, filled(3, 4, 0.25),
                                            LabelSet::raw({0, 1, 2})});
    messages.emplace_back(IntermediateBatch{2, filled(2, 2, -1.0),
                                            LabelSet::anonymized({3, 0})});
    messages.emplace_back(IntermediateBatch{0, filled(1, 5, 7.0), LabelSet::absent()});
    messages.emplace_back(ServerOutput{4, 9, filled(2, 3, 0.5)});
    messages.emplace_back(OutputGradient{4, 9, filled(2, 3, -0.5)});
    messages.emplace_back(Control{7, ControlKind::BeginUnlearn});

    for (const Message& msg : messages) {
        const auto bytes = serialize_message(msg);
        CHECK(bytes.size() == serialized_size(msg));
        const Message back = deserialize_message(bytes);
        CHECK(back.index() == msg.index());
        CHECK(serialize_message(back) == bytes);  // canonical encoding
    }
}

TEST_CASE("serialize_message rejects label/row mismatches before send") {
    const IntermediateBatch bad{1, filled(4, 2, 0.0), LabelSet::raw({0, 1})};
    CHECK_THROWS_AS(serialize_message(bad), ShapeError);
}

TEST_CASE("deserialize_message rejects mangled bytes") {
    const auto bytes = serialize_message(ServerOutput{1, 0, filled(2, 2, 1.0)});
    auto truncated = bytes;
    truncated.resize(bytes.size() - 3);
    CHECK_THROWS_AS(deserialize_message(truncated), FormatError);
    auto bad_tag = bytes;
    bad_tag[0] = 9;
    CHECK_THROWS_AS(deserialize_message(bad_tag), FormatError);
}

TEST_CASE("transport meters every send into the ledger") {
    auto ledger = std::make_shared<CostLedger>();
    Transport t(ledger);
    const Party c0 = Party::client(0);
    const Party srv = Party::server();
    t.register_party(c0);
    t.register_party(srv);

    CHECK(ledger->snapshot().total_bytes() == 0);

    const IntermediateBatch ib{0, filled(2, 3, 1.0), LabelSet::raw({1, 0})};
    const auto size = serialized_size(Message{ib});
    t.send(c0, srv, ib);
    CHECK(ledger->snapshot().byte_count(c0, srv) == size);
    t.send(c0, srv, ib);
    CHECK(ledger->snapshot().byte_count(c0, srv) == 2 * size);  // exact doubling

    // Byte conservation: ledger total equals the log total.
    std::uint64_t log_total = 0;
    for (const auto& e : t.log()) log_total += e.bytes;
    CHECK(ledger->snapshot().total_bytes() == log_total);

    // FIFO delivery.
    CHECK(t.pending(c0, srv) == 2);
    const Message m1 = t.receive(c0, srv);
    CHECK(std::get<IntermediateBatch>(m1).client_id == 0);
    t.receive(c0, srv);
    CHECK_THROWS_AS(t.receive(c0, srv), RoutingError);
}

TEST_CASE("transport rejects unregistered parties") {
    auto ledger = std::make_shared<CostLedger>();
    Transport t(ledger);
    t.register_party(Party::server());
    CHECK_THROWS_AS(t.send(Party::client(0), Party::server(), Control{0, ControlKind::Done}),
                    RoutingError);
    CHECK_THROWS_AS(t.send(Party::server(), Party::client(1), Control{1, ControlKind::Done}),
                    RoutingError);
}

TEST_CASE("transport log exports as JSON lines with phase tags") {
    auto ledger = std::make_shared<CostLedger>();
    Transport t(ledger);
    t.register_party(Party::client(0));
    t.register_party(Party::server());
    t.send(Party::client(0), Party::server(), Control{0, ControlKind::Done});
    ledger->set_phase(Phase::Unlearn);
    t.send(Party::client(0), Party::server(), Control{0, ControlKind::BeginUnlearn});

    std::istringstream lines(t.log_jsonl());
    std::string line;
    std::vector<nlohmann::json> entries;
    while (std::getline(lines, line)) entries.push_back(nlohmann::json::parse(line));
    REQUIRE(entries.size() == 2);
    CHECK(entries[0].at("seq") == 0);
    CHECK(entries[0].at("from") == "client0");
    CHECK(entries[0].at("to") == "server");
    CHECK(entries[0].at("variant") == "Control");
    CHECK(entries[0].at("bytes") == 6);
    CHECK(entries[0].at("phase") == "train");
    CHECK(entries[1].at("phase") == "unlearn");
}

TEST_CASE("ledger: phase sub-totals sum to grand totals") {
    CostLedger ledger;
    const Party c = Party::client(2);
    ledger.add_compute(c, 100);
    ledger.add_epoch(c);
    ledger.set_phase(Phase::Unlearn);
    ledger.add_compute(c, 40);
    const LedgerData d = ledger.snapshot();
    CHECK(d.compute(c, Phase::Train) == 100);
    CHECK(d.compute(c, Phase::Unlearn) == 40);
    CHECK(d.compute(c) == 140);
    CHECK(d.epochs(c) == 1);
}

TEST_CASE("ledger JSON round-trip") {
    CostLedger ledger;
    ledger.add_compute(Party::client(0), 7);
    ledger.add_bytes(Party::client(0), Party::server(), 1042);
    ledger.set_phase(Phase::Unlearn);
    ledger.add_bytes(Party::server(), Party::client(1), 99);
    const LedgerData d = ledger.snapshot();
    const LedgerData back = LedgerData::from_json(d.to_json());
    CHECK(back.compute(Party::client(0)) == 7);
    CHECK(back.byte_count(Party::client(0), Party::server()) == 1042);
    CHECK(back.byte_count(Party::server(), Party::client(1), Phase::Unlearn) == 99);
    CHECK(back.total_bytes() == d.total_bytes());
}

TEST_CASE("anonymizer: L=1 is the identity") {
    const Anonymizer a = Anonymizer::make(5, 0, 1);
    CHECK(a.apply(0) == 0);
    CHECK(a.invert(0) == 0);
}

TEST_CASE("anonymizer is a bijection with inverse") {
    for (std::uint32_t client : {0u, 1u, 7u}) {
        const Anonymizer a = Anonymizer::make(99, client, 10);
        std::vector<bool> hit(10, false);
        for (std::uint32_t y = 0; y < 10; ++y) {
            const std::uint32_t p = a.apply(y);
            CHECK(p < 10);
            CHECK_FALSE(hit[p]);
            hit[p] = true;
            CHECK(a.invert(p) == y);
        }
    }
}

TEST_CASE("anonymizer matches the independent keyed Fisher-Yates oracle") {
    const Anonymizer a = Anonymizer::make(5, 2, 10);
    CHECK(a.permutation() == ref_permutation(5, 2, 10));
    // Different clients get different keys (almost surely different perms).
    const Anonymizer b = Anonymizer::make(5, 3, 10);
    CHECK(b.permutation() == ref_permutation(5, 3, 10));
    CHECK_FALSE(a.permutation() == b.permutation());
}

TEST_CASE("client state machine: the documented lifecycle") {
    ClientPhase s = ClientPhase::Idle;
    s = client_state_step(1, s, ClientEvent::begin_training());
    CHECK(s == ClientPhase::Training);
    s = client_state_step(1, s, ClientEvent::train_epoch());
    CHECK(s == ClientPhase::Training);
    s = client_state_step(1, s, ClientEvent::freeze());
    CHECK(s == ClientPhase::Frozen);

    // Frozen clients accept no training events.
    CHECK_THROWS_AS(client_state_step(1, s, ClientEvent::train_epoch()), ProtocolError);

    // BeginUnlearn for someone else: unchanged, silent.
    CHECK(client_state_step(1, s, ClientEvent::begin_unlearn(0)) == ClientPhase::Frozen);

    // Own unlearn: Frozen -> Unlearning -> Frozen.
    s = client_state_step(1, s, ClientEvent::begin_unlearn(1));
    CHECK(s == ClientPhase::Unlearning);
    s = client_state_step(1, s, ClientEvent::train_epoch());
    CHECK(s == ClientPhase::Unlearning);
    s = client_state_step(1, s, ClientEvent::freeze());
    CHECK(s == ClientPhase::Frozen);

    // Strategy-2 service leaves the state alone.
    CHECK(client_state_step(1, s, ClientEvent::serve_gradient_exchange()) == ClientPhase::Frozen);
}

TEST_CASE("client state machine names state and event in errors") {
    try {
        client_state_step(3, ClientPhase::Frozen, ClientEvent::train_epoch());
        FAIL("expected ProtocolError");
    } catch (const ProtocolError& e) {
        const std::string what = e.what();
        CHECK(what.find("TrainEpoch") != std::string::npos);
        CHECK(what.find("Frozen") != std::string::npos);
    }
    CHECK_THROWS_AS(client_state_step(0, ClientPhase::Idle, ClientEvent::freeze()),
                    ProtocolError);
    CHECK_THROWS_AS(client_state_step(0, ClientPhase::Idle, ClientEvent::begin_unlearn(0)),
                    ProtocolError);
}

TEST_CASE("server cache: put, replace, version bump") {
    ServerCache cache;
    cache.put(1, filled(2, 3, 1.0), LabelSet::raw({0, 1}));
    const CacheEntry* e = cache.find(1);
    REQUIRE(e != nullptr);
    CHECK(e->version == 1);
    CHECK(e->activations.rows() == 2);

    cache.put(1, filled(4, 3, 2.0), LabelSet::raw({0, 1, 1, 0}));
    e = cache.find(1);
    CHECK(e->version == 2);
    CHECK(e->activations.rows() == 4);
    CHECK(cache.find(0) == nullptr);
    CHECK(cache.total_rows() == 4);

    CHECK_THROWS_AS(cache.put(2, filled(3, 3, 0.0), LabelSet::raw({0})), ShapeError);
}
