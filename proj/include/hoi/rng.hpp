#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace hoi {

// Deterministic RNG built on splitmix64. Distributions are hand-rolled so
// streams are reproducible independent of the standard library vendor.
class Rng {
public:
    explicit Rng(uint64_t seed) : state_(seed) {}

    uint64_t next_u64() {
        state_ += 0x9e3779b97f4a7c15ULL;
        uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1).
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Box-Muller; one sample per call (the pair's second half is discarded
    // to keep the stream position independent of call parity).
    double normal(double mean = 0.0, double stddev = 1.0) {
        double u1 = uniform();
        double u2 = uniform();
        if (u1 < 1e-300) u1 = 1e-300;
        double r = std::sqrt(-2.0 * std::log(u1));
        return mean + stddev * r * std::cos(2.0 * std::numbers::pi * u2);
    }

    // Uniform integer in [0, n).
    uint64_t below(uint64_t n) { return n == 0 ? 0 : next_u64() % n; }

    bool bernoulli(double p) { return uniform() < p; }

private:
    uint64_t state_;
};

// Stateless key mixing for derived seeds: hash_key(seed, id_a, id_b, ...).
inline uint64_t mix_u64(uint64_t h, uint64_t v) {
    h ^= v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    return h;
}

template <typename... Ts>
uint64_t hash_key(uint64_t seed, Ts... parts) {
    uint64_t h = seed ^ 0x51f9a1c2b3d4e5f6ULL;
    ((h = mix_u64(h, static_cast<uint64_t>(parts))), ...);
    // Final avalanche so related keys diverge.
    h = (h ^ (h >> 30)) * 0xbf58476d1ce4e5b9ULL;
    h = (h ^ (h >> 27)) * 0x94d049bb133111ebULL;
    return h ^ (h >> 31);
}

}  // namespace hoi
