#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <vector>

#include <doctest.h>

#include "splitwiper/dataset.hpp"
#include "splitwiper/errors.hpp"
#include "splitwiper/partition.hpp"

using namespace splitwiper;

namespace {

// Nearest-centroid oracle: class centroids computed from the data itself.
double nearest_centroid_accuracy(const Dataset& ds) {
    std::vector<std::vector<double>> centroids(ds.class_count,
                                               std::vector<double>(ds.dim(), 0.0));
    std::vector<std::size_t> counts(ds.class_count, 0);
    for (std::size_t i = 0; i < ds.size(); ++i) {
        counts[ds.labels[i]] += 1;
        for (std::size_t d = 0; d < ds.dim(); ++d) {
            centroids[ds.labels[i]][d] += ds.features.at(i, d);
        }
    }
    for (std::uint32_t c = 0; c < ds.class_count; ++c) {
        for (double& v : centroids[c]) v /= double(counts[c]);
    }
    std::size_t hits = 0;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        std::uint32_t best = 0;
        double best_d2 = 1e300;
        for (std::uint32_t c = 0; c < ds.class_count; ++c) {
            double d2 = 0.0;
            for (std::size_t d = 0; d < ds.dim(); ++d) {
                const double diff = ds.features.at(i, d) - centroids[c][d];
                d2 += diff * diff;
            }
            if (d2 < best_d2) {
                best_d2 = d2;
                best = c;
            }
        }
        if (best == ds.labels[i]) ++hits;
    }
    return double(hits) / double(ds.size());
}

// Max over clients of the total-variation distance between the client's
// label distribution and the global one.
double max_label_tv(const Dataset& ds, const std::vector<Shard>& shards) {
    std::vector<double> global(ds.class_count, 0.0);
    for (std::uint32_t y : ds.labels) global[y] += 1.0;
    for (double& v : global) v /= double(ds.size());
    double worst = 0.0;
    for (const Shard& s : shards) {
        std::vector<double> local(ds.class_count, 0.0);
        for (std::uint32_t y : s.dataset.labels) local[y] += 1.0;
        for (double& v : local) v /= double(s.size());
        double tv = 0.0;
        for (std::uint32_t c = 0; c < ds.class_count; ++c) {
            tv += std::abs(local[c] - global[c]);
        }
        worst = std::max(worst, 0.5 * tv);
    }
    return worst;
}

void check_partition_sound(const Dataset& ds, const std::vector<Shard>& shards) {
    std::set<std::size_t> seen;
    std::size_t total = 0;
    for (const Shard& s : shards) {
        CHECK(s.size() >= 1);
        CHECK(std::is_sorted(s.origin_indices.begin(), s.origin_indices.end()));
        for (std::size_t idx : s.origin_indices) {
            CHECK(seen.insert(idx).second);  // disjoint
            CHECK(idx < ds.size());
        }
        for (std::size_t p = 0; p < s.size(); ++p) {
            CHECK(s.dataset.labels[p] == ds.labels[s.origin_indices[p]]);
        }
        total += s.size();
    }
    CHECK(total == ds.size());  // cover
}

}  // namespace

TEST_CASE("gen_blobs: spread 0 collapses each class onto its mean") {
    const Dataset ds = gen_blobs(3, 4, 5, 0.0, 11);
    REQUIRE(ds.size() == 15);
    for (std::uint32_t c = 0; c < 3; ++c) {
        const std::size_t base = c * 5;
        for (std::size_t s = 1; s < 5; ++s) {
            for (std::size_t d = 0; d < 4; ++d) {
                CHECK(ds.features.at(base + s, d) == ds.features.at(base, d));
            }
        }
        // Means sit on the radius-4 hypersphere.
        double norm2 = 0.0;
        for (std::size_t d = 0; d < 4; ++d) norm2 += ds.features.at(base, d) * ds.features.at(base, d);
        CHECK(std::sqrt(norm2) == doctest::Approx(4.0).epsilon(1e-12));
    }
}

TEST_CASE("gen_blobs is deterministic under the seed") {
    const Dataset a = gen_blobs(4, 8, 20, 0.3, 42);
    const Dataset b = gen_blobs(4, 8, 20, 0.3, 42);
    CHECK(a.features == b.features);
    CHECK(a.labels == b.labels);
    const Dataset c = gen_blobs(4, 8, 20, 0.3, 43);
    CHECK_FALSE(a.features == c.features);
}

TEST_CASE("gen_blobs clusters are separable for a nearest-centroid oracle") {
    const Dataset ds = gen_blobs(3, 2, 200, 0.3, 7);
    CHECK(nearest_centroid_accuracy(ds) >= 0.95);
}

TEST_CASE("gen_blobs rejects zero counts") {
    CHECK_THROWS_AS(gen_blobs(0, 2, 5, 0.1, 1), InvalidDimension);
    CHECK_THROWS_AS(gen_blobs(2, 0, 5, 0.1, 1), InvalidDimension);
}

TEST_CASE("load_csv parses a small labeled file") {
    const auto path = std::filesystem::temp_directory_path() / "swpr_small.csv";
    {
        std::ofstream os(path);
        os << "f0,f1,label\n1.0,2.0,0\n3.5,-1.25,1\n0.0,0.5,1\n2.25,2.5,0\n";
    }
    const Dataset ds = load_csv(path, "label");
    CHECK(ds.size() == 4);
    CHECK(ds.class_count == 2);
    CHECK(ds.dim() == 2);
    CHECK(ds.features.at(1, 1) == -1.25);
    CHECK(ds.labels == std::vector<std::uint32_t>{0, 1, 1, 0});
    std::filesystem::remove(path);
}

TEST_CASE("load_csv reports the offending row") {
    const auto path = std::filesystem::temp_directory_path() / "swpr_bad.csv";
    {
        std::ofstream os(path);
        os << "f0,f1,label\n1.0,2.0,0\nnope,1.0,1\n";
    }
    try {
        load_csv(path, "label");
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.row == 3);  // physical line: header is line 1
    }
    std::filesystem::remove(path);

    const auto ragged = std::filesystem::temp_directory_path() / "swpr_ragged.csv";
    {
        std::ofstream os(ragged);
        os << "f0,f1,label\n1.0,2.0,0\n1.0,0\n";
    }
    CHECK_THROWS_AS(load_csv(ragged, "label"), ParseError);
    std::filesystem::remove(ragged);

    const auto no_col = std::filesystem::temp_directory_path() / "swpr_nocol.csv";
    {
        std::ofstream os(no_col);
        os << "f0,f1,y\n1.0,2.0,0\n";
    }
    CHECK_THROWS_AS(load_csv(no_col, "label"), ParseError);
    std::filesystem::remove(no_col);
}

TEST_CASE("csv round-trip preserves a generated dataset") {
    const Dataset ds = gen_blobs(3, 5, 10, 0.4, 9);
    const auto path = std::filesystem::temp_directory_path() / "swpr_roundtrip.csv";
    save_csv(ds, path);
    const Dataset back = load_csv(path, "label");
    REQUIRE(back.size() == ds.size());
    CHECK(back.labels == ds.labels);
    CHECK(back.class_count == ds.class_count);
    for (std::size_t i = 0; i < ds.features.size(); ++i) {
        CHECK(std::abs(back.features.raw()[i] - ds.features.raw()[i]) < 1e-12);
    }
    std::filesystem::remove(path);
}

TEST_CASE("partition_noniid: K=1 returns the whole dataset") {
    const Dataset ds = gen_blobs(3, 2, 10, 0.2, 5);
    const auto shards = partition_noniid(ds, 1, 0.5, 77);
    REQUIRE(shards.size() == 1);
    CHECK(shards[0].size() == ds.size());
    CHECK(shards[0].dataset.features == ds.features);
    CHECK(shards[0].dataset.labels == ds.labels);
}

TEST_CASE("partition_noniid is sound across a (K, alpha, seed) grid") {
    const Dataset ds = gen_blobs(4, 3, 30, 0.5, 3);
    for (std::uint32_t k : {2u, 3u, 5u}) {
        for (double alpha : {0.1, 0.5, 10.0}) {
            for (std::uint64_t seed : {1ull, 2ull, 99ull}) {
                const auto shards = partition_noniid(ds, k, alpha, seed);
                REQUIRE(shards.size() == k);
                check_partition_sound(ds, shards);
            }
        }
    }
}

TEST_CASE("partition_noniid: small alpha skews harder than large alpha") {
    const Dataset ds = gen_blobs(4, 2, 100, 0.3, 11);
    const auto skewed = partition_noniid(ds, 4, 0.1, 11);
    const auto flat = partition_noniid(ds, 4, 100.0, 11);
    CHECK(max_label_tv(ds, skewed) > max_label_tv(ds, flat));
}

TEST_CASE("partition_noniid rejects impossible inputs") {
    const Dataset ds = gen_blobs(2, 2, 2, 0.1, 1);  // 4 samples
    CHECK_THROWS_AS(partition_noniid(ds, 5, 0.5, 1), PartitionError);
    CHECK_THROWS_AS(partition_noniid(ds, 2, 0.0, 1), PartitionError);
    CHECK_THROWS_AS(partition_noniid(ds, 0, 0.5, 1), PartitionError);
}

TEST_CASE("partition_equal gives exactly equal shards when K divides n") {
    const Dataset ds = gen_blobs(4, 2, 25, 0.3, 8);  // n = 100
    const auto shards = partition_equal(ds, 4);
    check_partition_sound(ds, shards);
    for (const Shard& s : shards) CHECK(s.size() == 25);
}

TEST_CASE("apply_unlearn_request: empty selector is the identity") {
    const Dataset ds = gen_blobs(3, 2, 10, 0.2, 4);
    const auto shards = partition_noniid(ds, 2, 0.5, 6);
    const Shard out = apply_unlearn_request(shards[0], UnlearnRequest::none(0));
    CHECK(out.origin_indices == shards[0].origin_indices);
    CHECK(out.dataset.features == shards[0].dataset.features);
}

TEST_CASE("apply_unlearn_request: ByClass removes every sample of the class") {
    const Dataset ds = gen_blobs(3, 2, 12, 0.2, 9);
    const auto shards = partition_noniid(ds, 2, 0.5, 13);
    const Shard out = apply_unlearn_request(shards[1], UnlearnRequest::by_class(1, 2));
    for (std::uint32_t y : out.dataset.labels) CHECK(y != 2);
    // Pure set difference on sizes.
    std::size_t class2 = 0;
    for (std::uint32_t y : shards[1].dataset.labels) class2 += y == 2 ? 1 : 0;
    CHECK(out.size() + class2 == shards[1].size());
    // And the input shard is untouched.
    check_partition_sound(ds, shards);
}

TEST_CASE("apply_unlearn_request: ByIndices keeps survivors' origins") {
    const Dataset ds = gen_blobs(2, 2, 10, 0.2, 2);
    const auto shards = partition_equal(ds, 2);
    REQUIRE(shards[0].size() == 10);
    const std::vector<std::size_t> victims{shards[0].origin_indices[1],
                                           shards[0].origin_indices[4],
                                           shards[0].origin_indices[7]};
    const Shard out =
        apply_unlearn_request(shards[0], UnlearnRequest::by_indices(0, victims));
    CHECK(out.size() == 7);
    for (std::size_t idx : out.origin_indices) {
        CHECK(std::find(victims.begin(), victims.end(), idx) == victims.end());
        CHECK(std::find(shards[0].origin_indices.begin(), shards[0].origin_indices.end(), idx) !=
              shards[0].origin_indices.end());
    }
    // |kept| + |selected| == |shard|
    const Dataset forgotten = selected_dataset(shards[0], UnlearnRequest::by_indices(0, victims));
    CHECK(out.size() + forgotten.size() == shards[0].size());
}

TEST_CASE("apply_unlearn_request rejects foreign indices and clients") {
    const Dataset ds = gen_blobs(2, 2, 10, 0.2, 3);
    const auto shards = partition_equal(ds, 2);
    // Index owned by the other shard.
    CHECK_THROWS_AS(
        apply_unlearn_request(shards[0], UnlearnRequest::by_indices(0, {shards[1].origin_indices[0]})),
        SelectorError);
    // Request addressed to the wrong client.
    CHECK_THROWS_AS(apply_unlearn_request(shards[0], UnlearnRequest::none(1)), SelectorError);
}
