#pragma once

#include <cstdint>

namespace uxmc {

/// Counter-based, splittable generator (SplitMix64 finalizer over
/// seed + counter). Identical seeds and call sequences produce identical
/// streams on every platform; split() derives independent child streams
/// so parallel work can be seeded per item instead of per thread.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) noexcept : seed_(seed) {}

    std::uint64_t seed() const noexcept { return seed_; }
    std::uint64_t counter() const noexcept { return counter_; }

    std::uint64_t next_u64() noexcept;

    /// Uniform in [0, 1) with 53 random bits.
    double uniform() noexcept;
    /// Uniform in [lo, hi).
    double uniform(double lo, double hi) noexcept;
    /// Unbiased integer in [0, n). n must be > 0.
    std::uint64_t below(std::uint64_t n) noexcept;
    /// Standard normal via Box-Muller (one draw per call, no caching).
    double normal() noexcept;
    bool bernoulli(double p) noexcept { return uniform() < p; }

    /// Child stream keyed by `key`; does not advance this generator.
    Rng split(std::uint64_t key) const noexcept;

private:
    std::uint64_t seed_;
    std::uint64_t counter_ = 0;
};

std::uint64_t mix64(std::uint64_t x) noexcept;

}  // namespace uxmc
