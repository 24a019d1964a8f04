#pragma once

#include <cstdint>
#include <vector>

#include "splitwiper/dataset.hpp"

namespace splitwiper {

/// One client's private slice of a parent dataset. origin_indices point back
/// into the parent and stay ascending; shards of one partition are pairwise
/// disjoint and cover the parent exactly.
struct Shard {
    std::uint32_t client_id = 0;
    Dataset dataset;
    std::vector<std::size_t> origin_indices;

    std::size_t size() const { return dataset.size(); }
};

/// Dirichlet label-skew partition: per class, Dirichlet(alpha) proportions
/// over the K clients decide how many of that class's (shuffled) samples
/// each client receives. Empty shards are repaired by moving one sample from
/// the largest shard. alpha -> 0 concentrates classes, alpha -> inf
/// approaches uniform.
std::vector<Shard> partition_noniid(const Dataset& ds, std::uint32_t clients,
                                    double alpha, std::uint64_t seed);

/// Round-robin by index: shard i gets rows i, i+K, i+2K, ... Shard sizes are
/// exactly equal whenever K divides n; used by the cost-scaling runs that
/// need equal shards.
std::vector<Shard> partition_equal(const Dataset& ds, std::uint32_t clients);

enum class SelectorKind { ByIndices, ByClass };

/// Which of client k's samples to forget. ByIndices lists origin indices
/// into the parent dataset; ByClass names a class id. The selected set must
/// be a subset of the client's shard (an empty selection is fine).
struct UnlearnRequest {
    std::uint32_t client_id = 0;
    SelectorKind kind = SelectorKind::ByIndices;
    std::vector<std::size_t> indices;
    std::uint32_t class_id = 0;

    static UnlearnRequest by_indices(std::uint32_t client, std::vector<std::size_t> idx);
    static UnlearnRequest by_class(std::uint32_t client, std::uint32_t cls);
    static UnlearnRequest none(std::uint32_t client);
};

/// Positions (within the shard, ascending) of the selected samples.
/// ByIndices entries that fall outside the shard raise SelectorError.
std::vector<std::size_t> selected_positions(const Shard& shard, const UnlearnRequest& req);

/// Returns the kept shard (the shard minus the selected samples); the input
/// shard is untouched and survivors keep their origin indices.
Shard apply_unlearn_request(const Shard& shard, const UnlearnRequest& req);

/// The selected samples themselves, as a dataset (the forgotten set).
Dataset selected_dataset(const Shard& shard, const UnlearnRequest& req);

/// Copy of the shard list with the request applied to its client's shard.
std::vector<Shard> shards_after_unlearn(const std::vector<Shard>& shards,
                                        const UnlearnRequest& req);

}  // namespace splitwiper
