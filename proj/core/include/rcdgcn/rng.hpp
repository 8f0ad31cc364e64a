#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>
#include <vector>

namespace rcdgcn {

/**
 * SplitMix64 generator (Steele/Lea/Flood finalizer).
 *
 * The exact recurrence is part of the artifact contract so that datasets,
 * initializations and shuffles are reproducible bit-for-bit:
 *
 *   state += 0x9E3779B97F4A7C15
 *   z = state
 *   z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
 *   z = (z ^ (z >> 27)) * 0x94D049BB133111EB
 *   return z ^ (z >> 31)
 *
 * Derived draws:
 *   uniform01()        = (next() >> 11) * 2^-53              in [0, 1)
 *   uniform01_open()   = ((next() >> 11) + 1) * 2^-53        in (0, 1]
 *   gaussian()         = sqrt(-2 ln u1) * cos(2 pi u2), u1 = uniform01_open(),
 *                        u2 = uniform01(); one draw consumes two outputs
 *   bounded(k)         = next() % k
 */
class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next() {
        state_ += 0x9E3779B97F4A7C15ULL;
        std::uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    /// Uniform double in [0, 1).
    double uniform01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    /// Uniform double in (0, 1]; safe as a log() argument.
    double uniform01_open() {
        return static_cast<double>((next() >> 11) + 1) * 0x1.0p-53;
    }

    /// Uniform double in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    /// Standard normal via Box-Muller (cosine branch only).
    double gaussian() {
        const double u1 = uniform01_open();
        const double u2 = uniform01();
        const double two_pi = 6.283185307179586476925286766559;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(two_pi * u2);
    }

    /// Uniform integer in [0, k); k must be positive.
    std::uint64_t bounded(std::uint64_t k) { return next() % k; }

private:
    std::uint64_t state_;
};

/// FNV-1a over the name, mixed with the master seed through one SplitMix64
/// round. Gives each component (data, init, shuffle, ...) an independent
/// stream from a single run seed.
inline std::uint64_t derive_seed(std::uint64_t master, std::string_view name) {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (char c : name) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001B3ULL;
    }
    return SplitMix64(master ^ h).next();
}

/// In-place Fisher-Yates shuffle driven by the given generator.
template <typename T>
void shuffle(std::vector<T>& v, SplitMix64& rng) {
    for (std::size_t i = v.size(); i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(rng.bounded(i));
        std::swap(v[i - 1], v[j]);
    }
}

}  // namespace rcdgcn
