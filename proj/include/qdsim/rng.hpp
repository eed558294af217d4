#pragma once

#include <cmath>
#include <cstdint>

namespace qdsim {

// Counter-based deterministic generator (splitmix64 output function over a
// keyed counter). Streams are reproducible from (seed, counter) alone and
// independent of call order across streams, which is what the per-shot
// seeding contract requires.
struct Rng {
    std::uint64_t key = 0;
    std::uint64_t counter = 0;

    explicit Rng(std::uint64_t seed) : key(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = key + (++counter) * 0x9E3779B97F4A7C15ull;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    // uniform in [0, 1)
    double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

    // standard normal via Box-Muller (two uniforms per draw, no caching)
    double normal() {
        const double u1 = (double(next_u64() >> 11) + 0.5) * 0x1.0p-53;
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }
};

// Derives independent substream seeds, e.g. per (master, shot) or
// (master, shot, cell).
inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
    std::uint64_t z = a ^ (b + 0x9E3779B97F4A7C15ull + (a << 6) + (a >> 2));
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b, std::uint64_t c) {
    return mix_seed(mix_seed(a, b), c);
}

}  // namespace qdsim
