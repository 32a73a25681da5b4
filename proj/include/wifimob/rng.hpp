#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace wifimob {

/// Deterministic pseudo-random generator (SplitMix64) with fixed-algorithm
/// distributions. The standard <random> distributions are implementation
/// defined, which would make seeded outputs differ across toolchains; every
/// draw here is fully specified so corpora and models are byte-identical
/// for a given seed on any platform.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    /// Uniform double in [0, 1), 53-bit resolution.
    double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform double in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    /// Uniform integer in [0, n). n must be > 0.
    std::uint64_t bounded(std::uint64_t n) {
        return static_cast<std::uint64_t>(
            (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
    }

    /// Standard normal via the Box-Muller transform. Consumes exactly two
    /// uniform draws per call.
    double normal() {
        double u1 = 1.0 - uniform01();  // (0, 1], keeps log finite
        double u2 = uniform01();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    /// Exponential with the given mean (inverse CDF).
    double exponential(double mean) { return -mean * std::log(1.0 - uniform01()); }

    /// In-place Fisher-Yates shuffle.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(bounded(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    static constexpr double kPi = 3.14159265358979323846;
    std::uint64_t state_;
};

/// Derives an independent substream seed from (seed, index), e.g. one per
/// forest tree.
inline std::uint64_t substream_seed(std::uint64_t seed, std::uint64_t index) {
    Rng r(seed + 0x9E3779B97F4A7C15ULL * (index + 1));
    return r.next_u64();
}

}  // namespace wifimob
