#pragma once

#include <cstdint>
#include <random>

namespace kseg {

/// splitmix64; used to derive independent seeds for sub-streams.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

using Rng = std::mt19937_64;

inline double normal(Rng& rng, double mean = 0.0, double std = 1.0) {
    std::normal_distribution<double> d(mean, std);
    return d(rng);
}

inline double uniform(Rng& rng, double lo = 0.0, double hi = 1.0) {
    std::uniform_real_distribution<double> d(lo, hi);
    return d(rng);
}

inline int uniform_int(Rng& rng, int lo, int hi) {  // inclusive bounds
    std::uniform_int_distribution<int> d(lo, hi);
    return d(rng);
}

}  // namespace kseg
