#pragma once

#include <cstdint>

namespace mml::rng {

/// Stream tags keep independent consumers of the same seed decorrelated.
enum class Stream : std::uint64_t {
    PairNoise = 0x9a1f,
    Discrete = 0x51c3,
    BodyRandom = 0x7e27,
    Velocity = 0x3d05,
};

std::uint64_t mix(std::uint64_t x);

/// Counter-based hash of a key tuple; identical inputs give identical bits on every platform.
std::uint64_t hash(std::uint64_t seed, Stream stream, std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0);

/// Uniform double in [0, 1) from the top 53 bits.
double to_unit(std::uint64_t bits);

/// Standard normal from two hashed uniforms (Box-Muller).
double normal(std::uint64_t key);

} // namespace mml::rng
