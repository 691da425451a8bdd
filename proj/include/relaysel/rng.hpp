#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>

namespace relaysel {

// Seeded random source with hand-written distributions.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

    // Uniform in [0, 1) with 53 random bits.
    double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    // Unit-mean exponential.
    double exponential() { return -std::log1p(-uniform01()); }

    // Uniform integer in [0, n). n must be > 0.
    std::size_t uniform_index(std::size_t n) {
        const std::uint64_t bound = n;
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
        std::uint64_t x = engine_();
        while (x >= limit)
            x = engine_();
        return static_cast<std::size_t>(x % bound);
    }

    // Derives an independent stream, e.g. for a held-out evaluation environment.
    Rng fork(std::uint64_t salt) {
        std::seed_seq seq{static_cast<std::uint32_t>(engine_()), static_cast<std::uint32_t>(salt),
                          static_cast<std::uint32_t>(salt >> 32)};
        std::mt19937_64 e(seq);
        return Rng(e());
    }

    std::mt19937_64& engine() { return engine_; }

private:
    std::mt19937_64 engine_;
};

} // namespace relaysel
