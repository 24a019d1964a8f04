#include "splitwiper/partition.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "splitwiper/errors.hpp"
#include "splitwiper/rng.hpp"

namespace splitwiper {

namespace {

void fisher_yates(std::vector<std::size_t>& v, SplitMix64& rng) {
    for (std::size_t i = v.size(); i > 1; --i) {
        const std::size_t j = rng.next_below(i);
        std::swap(v[i - 1], v[j]);
    }
}

// Marsaglia-Tsang; alpha < 1 boosted via gamma(alpha+1) * U^(1/alpha).
double sample_gamma(double alpha, SplitMix64& rng) {
    if (alpha < 1.0) {
        const double u = rng.next_open_double();
        return sample_gamma(alpha + 1.0, rng) * std::pow(u, 1.0 / alpha);
    }
    const double d = alpha - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
        const double x = rng.next_normal();
        const double t = 1.0 + c * x;
        if (t <= 0.0) continue;
        const double v = t * t * t;
        const double u = rng.next_open_double();
        if (std::log(u) < 0.5 * x * x + d - d * v + d * std::log(v)) return d * v;
    }
}

Shard build_shard(const Dataset& parent, std::uint32_t client_id,
                  std::vector<std::size_t> origin) {
    std::sort(origin.begin(), origin.end());
    Shard shard;
    shard.client_id = client_id;
    shard.origin_indices = origin;
    shard.dataset.class_count = parent.class_count;
    shard.dataset.features = parent.features.gather_rows(origin);
    shard.dataset.labels.reserve(origin.size());
    for (std::size_t idx : origin) shard.dataset.labels.push_back(parent.labels[idx]);
    return shard;
}

}  // namespace

std::vector<Shard> partition_noniid(const Dataset& ds, std::uint32_t clients,
                                    double alpha, std::uint64_t seed) {
    if (clients < 1) throw PartitionError("client count must be >= 1");
    if (clients > ds.size()) {
        throw PartitionError("more clients (" + std::to_string(clients) +
                             ") than samples (" + std::to_string(ds.size()) + ")");
    }
    if (!(alpha > 0.0)) throw PartitionError("alpha must be > 0");

    SplitMix64 rng(seed);
    std::vector<std::vector<std::size_t>> assigned(clients);
    for (std::uint32_t c = 0; c < ds.class_count; ++c) {
        std::vector<std::size_t> idx;
        for (std::size_t i = 0; i < ds.size(); ++i) {
            if (ds.labels[i] == c) idx.push_back(i);
        }
        if (idx.empty()) continue;

        std::vector<double> props(clients);
        double total = 0.0;
        for (double& p : props) {
            p = sample_gamma(alpha, rng);
            total += p;
        }
        for (double& p : props) p /= total;

        fisher_yates(idx, rng);

        // Integer counts: floor, then hand the remainder to the largest
        // fractional parts (ties broken by lower client id).
        const std::size_t n_c = idx.size();
        std::vector<std::size_t> counts(clients);
        std::vector<std::pair<double, std::uint32_t>> fracs(clients);
        std::size_t used = 0;
        for (std::uint32_t k = 0; k < clients; ++k) {
            const double exact = props[k] * static_cast<double>(n_c);
            counts[k] = static_cast<std::size_t>(std::floor(exact));
            used += counts[k];
            fracs[k] = {exact - std::floor(exact), k};
        }
        std::stable_sort(fracs.begin(), fracs.end(), [](const auto& a, const auto& b) {
            return a.first > b.first;
        });
        for (std::size_t r = 0; r < n_c - used; ++r) counts[fracs[r % clients].second] += 1;

        std::size_t cursor = 0;
        for (std::uint32_t k = 0; k < clients; ++k) {
            for (std::size_t i = 0; i < counts[k] && cursor < n_c; ++i, ++cursor) {
                assigned[k].push_back(idx[cursor]);
            }
        }
        // Rounding overflow protection: leftover rows go to the last client.
        for (; cursor < n_c; ++cursor) assigned[clients - 1].push_back(idx[cursor]);
    }

    // No shard may come out empty: move one sample from the largest shard.
    for (;;) {
        std::uint32_t empty = clients;
        for (std::uint32_t k = 0; k < clients; ++k) {
            if (assigned[k].empty()) {
                empty = k;
                break;
            }
        }
        if (empty == clients) break;
        std::uint32_t largest = 0;
        for (std::uint32_t k = 1; k < clients; ++k) {
            if (assigned[k].size() > assigned[largest].size()) largest = k;
        }
        assigned[empty].push_back(assigned[largest].back());
        assigned[largest].pop_back();
    }

    std::vector<Shard> shards;
    shards.reserve(clients);
    for (std::uint32_t k = 0; k < clients; ++k) {
        shards.push_back(build_shard(ds, k, std::move(assigned[k])));
    }
    return shards;
}

std::vector<Shard> partition_equal(const Dataset& ds, std::uint32_t clients) {
    if (clients < 1) throw PartitionError("client count must be >= 1");
    if (clients > ds.size()) {
        throw PartitionError("more clients than samples");
    }
    std::vector<Shard> shards;
    shards.reserve(clients);
    for (std::uint32_t k = 0; k < clients; ++k) {
        std::vector<std::size_t> origin;
        for (std::size_t i = k; i < ds.size(); i += clients) origin.push_back(i);
        shards.push_back(build_shard(ds, k, std::move(origin)));
    }
    return shards;
}

UnlearnRequest UnlearnRequest::by_indices(std::uint32_t client, std::vector<std::size_t> idx) {
    UnlearnRequest req;
    req.client_id = client;
    req.kind = SelectorKind::ByIndices;
    req.indices = std::move(idx);
    return req;
}

UnlearnRequest UnlearnRequest::by_class(std::uint32_t client, std::uint32_t cls) {
    UnlearnRequest req;
    req.client_id = client;
    req.kind = SelectorKind::ByClass;
    req.class_id = cls;
    return req;
}

UnlearnRequest UnlearnRequest::none(std::uint32_t client) {
    return by_indices(client, {});
}

std::vector<std::size_t> selected_positions(const Shard& shard, const UnlearnRequest& req) {
    if (req.client_id != shard.client_id) {
        throw SelectorError("request for client " + std::to_string(req.client_id) +
                            " applied to shard of client " + std::to_string(shard.client_id));
    }
    std::vector<std::size_t> positions;
    if (req.kind == SelectorKind::ByClass) {
        for (std::size_t p = 0; p < shard.size(); ++p) {
            if (shard.dataset.labels[p] == req.class_id) positions.push_back(p);
        }
        return positions;
    }
    for (std::size_t origin : req.indices) {
        const auto it = std::lower_bound(shard.origin_indices.begin(),
                                         shard.origin_indices.end(), origin);
        if (it == shard.origin_indices.end() || *it != origin) {
            throw SelectorError("index " + std::to_string(origin) +
                                " is not in client " + std::to_string(shard.client_id) +
                                "'s shard");
        }
        positions.push_back(static_cast<std::size_t>(it - shard.origin_indices.begin()));
    }
    std::sort(positions.begin(), positions.end());
    positions.erase(std::unique(positions.begin(), positions.end()), positions.end());
    return positions;
}

Shard apply_unlearn_request(const Shard& shard, const UnlearnRequest& req) {
    const auto drop = selected_positions(shard, req);
    std::vector<std::size_t> keep;
    keep.reserve(shard.size() - drop.size());
    std::size_t di = 0;
    for (std::size_t p = 0; p < shard.size(); ++p) {
        if (di < drop.size() && drop[di] == p) {
            ++di;
            continue;
        }
        keep.push_back(p);
    }
    Shard out;
    out.client_id = shard.client_id;
    out.dataset.class_count = shard.dataset.class_count;
    out.dataset.features = shard.dataset.features.gather_rows(keep);
    out.dataset.labels.reserve(keep.size());
    out.origin_indices.reserve(keep.size());
    for (std::size_t p : keep) {
        out.dataset.labels.push_back(shard.dataset.labels[p]);
        out.origin_indices.push_back(shard.origin_indices[p]);
    }
    return out;
}

Dataset selected_dataset(const Shard& shard, const UnlearnRequest& req) {
    const auto drop = selected_positions(shard, req);
    Dataset out;
    out.class_count = shard.dataset.class_count;
    out.features = shard.dataset.features.gather_rows(drop);
    out.labels.reserve(drop.size());
    for (std::size_t p : drop) out.labels.push_back(shard.dataset.labels[p]);
    return out;
}

std::vector<Shard> shards_after_unlearn(const std::vector<Shard>& shards,
                                        const UnlearnRequest& req) {
    std::vector<Shard> out = shards;
    if (req.client_id >= shards.size()) {
        throw SelectorError("request names client " + std::to_string(req.client_id) +
                            " but only " + std::to_string(shards.size()) + " shards exist");
    }
    out[req.client_id] = apply_unlearn_request(shards[req.client_id], req);
    return out;
}

}  // namespace splitwiper
