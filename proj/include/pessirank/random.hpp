#pragma once

#include <cstdint>
#include <random>

namespace pessirank {

// Deterministic RNG wrapper. std::mt19937_64 output is fully specified by the
// standard, and the double conversion below avoids the implementation-defined
// std::uniform_real_distribution, so a seed produces the same stream on every
// platform and toolchain.
class RandomEngine {
public:
    explicit RandomEngine(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t next_u64() { return gen_(); }

    // Uniform on [0, 1), 53-bit resolution.
    double next_double() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    // Uniform on (0, 1); never returns an endpoint.
    double next_open_double() {
        const double u = next_double();
        return u > 0.0 ? u : 0x1.0p-54;
    }

    bool bernoulli(double p) { return next_double() < p; }

    // Uniform integer in [0, n), unbiased (rejection sampling).
    std::uint64_t uniform_below(std::uint64_t n) {
        const std::uint64_t rem = (0 - n) % n;  // 2^64 mod n
        const std::uint64_t limit = 0 - rem;
        std::uint64_t x = gen_();
        while (limit != 0 && x >= limit) x = gen_();
        return x % n;
    }

private:
    std::mt19937_64 gen_;
};

// SplitMix64 finalizer.
inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Seed for stream i under a base seed. Stateless in i, so adding streams never
// perturbs earlier ones.
inline std::uint64_t derive_stream_seed(std::uint64_t base, std::uint64_t i) {
    return mix64(base + 0x9e3779b97f4a7c15ULL * (i + 1));
}

}  // namespace pessirank
