#pragma once

#include <cstdint>
#include <random>

#include "mxd/types.hpp"

namespace mxd {

/// Independent child seed for a named stream of a parent seed (splitmix64).
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Circularly-symmetric complex Gaussian with E|z|^2 = variance.
inline complex complex_gaussian(std::mt19937_64& rng, double variance) {
    std::normal_distribution<double> normal(0.0, std::sqrt(0.5 * variance));
    const double re = normal(rng);
    const double im = normal(rng);
    return {re, im};
}

} // namespace mxd
