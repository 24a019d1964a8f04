#include "splitwiper/cache.hpp"

#include "splitwiper/errors.hpp"

namespace splitwiper {

void ServerCache::put(std::uint32_t client_id, Tensor activations, LabelSet labels) {
    if (labels.tag != LabelTag::Absent && labels.values.size() != activations.rows()) {
        throw ShapeError("cache entry label count does not match activation rows");
    }
    auto& entry = entries_[client_id];
    entry.activations = std::move(activations);
    entry.labels = std::move(labels);
    entry.version += 1;
}

const CacheEntry* ServerCache::find(std::uint32_t client_id) const {
    const auto it = entries_.find(client_id);
    return it == entries_.end() ? nullptr : &it->second;
}

std::size_t ServerCache::total_rows() const {
    std::size_t rows = 0;
    for (const auto& [id, entry] : entries_) rows += entry.activations.rows();
    return rows;
}

}  // namespace splitwiper
