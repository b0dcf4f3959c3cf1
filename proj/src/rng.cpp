#include "mml/rng.hpp"

#include <cmath>
#include <numbers>

namespace mml::rng {

std::uint64_t mix(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t hash(std::uint64_t seed, Stream stream, std::uint64_t a, std::uint64_t b, std::uint64_t c)
{
    std::uint64_t h = mix(seed ^ static_cast<std::uint64_t>(stream));
    h = mix(h ^ a);
    h = mix(h ^ b);
    return mix(h ^ c);
}

double to_unit(std::uint64_t bits) { return static_cast<double>(bits >> 11) * 0x1.0p-53; }

double normal(std::uint64_t key)
{
    double u1 = to_unit(mix(key ^ 0x1234567ULL));
    const double u2 = to_unit(mix(key ^ 0x89abcdefULL));
    if (u1 <= 0.0) {
        u1 = 0x1.0p-53;
    }
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

} // namespace mml::rng
