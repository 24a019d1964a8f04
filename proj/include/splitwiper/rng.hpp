#pragma once

#include <cmath>
#include <cstdint>

namespace splitwiper {

/// splitmix64 finalizer. Stateless bit mix used for seed derivation.
constexpr std::uint64_t mix64(std::uint64_t z) {
    z ^= z >> 30;
    z *= 0xBF58476D1CE4E5B9ULL;
    z ^= z >> 27;
    z *= 0x94D049BB133111EBULL;
    z ^= z >> 31;
    return z;
}

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

/// Derives an independent seed for a numbered stream. Every stream a run
/// consumes (per-client model init, server model init, shuffles, dropout
/// masks, anonymizer keys, ...) gets its own derived seed so streams never
/// alias and replays stay exact.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
    return mix64(seed + kGolden * (stream + 1));
}

// Stream tags. Client streams use the raw client id, which stays far below
// kServerModel for any realistic K.
namespace streams {
constexpr std::uint64_t kServerModel = 1ULL << 32;
constexpr std::uint64_t kServerShuffle = (1ULL << 32) + 1;
constexpr std::uint64_t kDropout = (1ULL << 32) + 2;
constexpr std::uint64_t kBlobMeans = 0;
constexpr std::uint64_t kBlobNoise = 1;
constexpr std::uint64_t kPartition = 2;
}  // namespace streams

/// splitmix64 sequence generator. All randomness in the engine flows through
/// this one generator type; it is fully specified here so independent
/// reimplementations produce identical streams:
///   state += 0x9E3779B97F4A7C15
///   output = mix64(state)
///   next_double = (output >> 11) * 2^-53            in [0, 1)
///   next_open_double = ((output >> 11) + 1) * 2^-53 in (0, 1]
///   next_below(n) = output % n
///   next_normal: Box-Muller, u1 = next_open_double, u2 = next_double,
///                returns sqrt(-2 ln u1) * cos(2 pi u2)
class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next() {
        state_ += kGolden;
        return mix64(state_);
    }

    double next_double() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    double next_open_double() {
        return static_cast<double>((next() >> 11) + 1) * 0x1.0p-53;
    }

    std::uint64_t next_below(std::uint64_t n) { return next() % n; }

    double next_uniform(double lo, double hi) {
        return lo + (hi - lo) * next_double();
    }

    double next_normal() {
        const double u1 = next_open_double();
        const double u2 = next_double();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
    }

    std::uint64_t state() const { return state_; }

private:
    std::uint64_t state_;
};

}  // namespace splitwiper
