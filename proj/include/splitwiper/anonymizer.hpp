#pragma once

#include <cstdint>
#include <vector>

namespace splitwiper {

/// Client-held bijective relabeling pi over [0, class_count). Built by a
/// Fisher-Yates shuffle driven by a SplitMix64 keyed with
/// derive_seed(anonymizer_seed, client_id): pi starts as the identity and
/// for i = L-1 .. 1 swaps pi[i] with pi[rng.next_below(i+1)]. The server
/// only ever sees pi(y); pi itself never crosses the transport.
class Anonymizer {
public:
    static Anonymizer make(std::uint64_t seed, std::uint32_t client_id,
                           std::uint32_t class_count);

    std::uint32_t client_id() const { return client_id_; }
    std::uint32_t class_count() const { return static_cast<std::uint32_t>(perm_.size()); }

    std::uint32_t apply(std::uint32_t label) const;
    std::uint32_t invert(std::uint32_t label) const;
    std::vector<std::uint32_t> apply_all(const std::vector<std::uint32_t>& labels) const;

    const std::vector<std::uint32_t>& permutation() const { return perm_; }

private:
    std::uint32_t client_id_ = 0;
    std::vector<std::uint32_t> perm_;
    std::vector<std::uint32_t> inverse_;
};

}  // namespace splitwiper
