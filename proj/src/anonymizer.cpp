#include "splitwiper/anonymizer.hpp"

#include <numeric>

#include "splitwiper/errors.hpp"
#include "splitwiper/rng.hpp"

namespace splitwiper {

Anonymizer Anonymizer::make(std::uint64_t seed, std::uint32_t client_id,
                            std::uint32_t class_count) {
    if (class_count < 1) throw InvalidDimension("class_count must be >= 1");
    Anonymizer a;
    a.client_id_ = client_id;
    a.perm_.resize(class_count);
    std::iota(a.perm_.begin(), a.perm_.end(), 0u);
    SplitMix64 rng(derive_seed(seed, client_id));
    for (std::uint32_t i = class_count; i > 1; --i) {
        const auto j = static_cast<std::uint32_t>(rng.next_below(i));
        std::swap(a.perm_[i - 1], a.perm_[j]);
    }
    a.inverse_.resize(class_count);
    for (std::uint32_t i = 0; i < class_count; ++i) a.inverse_[a.perm_[i]] = i;
    return a;
}

std::uint32_t Anonymizer::apply(std::uint32_t label) const {
    if (label >= perm_.size()) throw LabelError("label out of range for anonymizer");
    return perm_[label];
}

std::uint32_t Anonymizer::invert(std::uint32_t label) const {
    if (label >= inverse_.size()) throw LabelError("label out of range for anonymizer");
    return inverse_[label];
}

std::vector<std::uint32_t> Anonymizer::apply_all(
    const std::vector<std::uint32_t>& labels) const {
    std::vector<std::uint32_t> out;
    out.reserve(labels.size());
    for (std::uint32_t y : labels) out.push_back(apply(y));
    return out;
}

}  // namespace splitwiper
