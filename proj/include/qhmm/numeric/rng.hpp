#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace qhmm::numeric {

using Rng = std::mt19937_64;

/// splitmix64 finalizer; a bijective 64-bit mixer.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

/// Derive an independent stream seed from a root seed and a path of indices,
/// e.g. derive_seed(seed, {path}) or derive_seed(seed, {eps_idx, lambda_idx, path}).
/// Each index is folded in with a fresh splitmix round, so (seed, {1, 2}) and
/// (seed, {2, 1}) land on unrelated streams.
inline std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> path) {
    std::uint64_t h = splitmix64(seed);
    for (std::uint64_t idx : path) h = splitmix64(h ^ splitmix64(idx + 0x632BE59BD9B4E019ULL));
    return h;
}

inline Rng make_stream(std::uint64_t seed, std::initializer_list<std::uint64_t> path) {
    return Rng(derive_seed(seed, path));
}

/// Uniform double in [0, 1) from the top 53 bits.
inline double uniform01(Rng& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

} // namespace qhmm::numeric
