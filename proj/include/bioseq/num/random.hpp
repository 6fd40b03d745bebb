#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <random>

namespace bioseq::num {

using Rng = std::mt19937_64;

// SplitMix64 finalizer; mixes a base seed with stream tags so every
// (seed, step, item, ...) tuple gets an independent, reproducible stream.
inline std::uint64_t mix_seed(std::uint64_t base, std::initializer_list<std::uint64_t> tags) {
    auto mix = [](std::uint64_t z) {
        z += 0x9e3779b97f4a7c15ULL;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    };
    std::uint64_t h = mix(base);
    for (auto t : tags) h = mix(h ^ mix(t));
    return h;
}

inline Rng make_rng(std::uint64_t base, std::initializer_list<std::uint64_t> tags = {}) {
    return Rng(mix_seed(base, tags));
}

// Uniform double in [0, 1) built from the top 53 bits; stable across
// standard-library implementations.
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

// Standard normal via Box-Muller on uniform01.
inline double normal01(Rng& rng) {
    const double u1 = 1.0 - uniform01(rng);
    const double u2 = uniform01(rng);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
}

}  // namespace bioseq::num
