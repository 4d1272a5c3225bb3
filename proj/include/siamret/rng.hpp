#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace siamret {

// Deterministic sampling helpers. std::mt19937_64 produces the same stream on
// every platform, but the <random> distributions do not, so the few draws we
// need are spelled out here. All outputs are reproducible bit-for-bit given
// the engine state.

/// Uniform double in [0, 1) with 53 bits of precision.
inline double uniform_double(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Standard normal via Box-Muller (no cached second value).
inline double normal_double(std::mt19937_64& rng) {
    const double u1 = 1.0 - uniform_double(rng);  // (0, 1], keeps log finite
    const double u2 = uniform_double(rng);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

/// Unbiased uniform integer in [0, n). n must be positive.
inline std::uint64_t uniform_index(std::mt19937_64& rng, std::uint64_t n) {
    const std::uint64_t threshold = (0 - n) % n;  // 2^64 mod n
    std::uint64_t r = rng();
    while (r < threshold) r = rng();
    return r % n;
}

/// Fisher-Yates shuffle driven by uniform_index.
template <typename T>
void shuffle_deterministic(std::vector<T>& v, std::mt19937_64& rng) {
    for (std::size_t i = v.size(); i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(uniform_index(rng, i));
        std::swap(v[i - 1], v[j]);
    }
}

/// Derive an independent stream seed from a base seed (splitmix64 finalizer).
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

}  // namespace siamret
