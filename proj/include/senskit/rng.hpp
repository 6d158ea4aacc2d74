#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace senskit {

/// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t hash_key(std::uint64_t seed, std::uint64_t a, std::uint64_t b, std::uint64_t c) {
    return mix64(mix64(mix64(mix64(seed) ^ a) ^ b) ^ c);
}

/// Uniform in (0, 1), never exactly 0.
inline double to_open_unit(std::uint64_t bits) {
    return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
}

/// Stateless generator: every draw is a pure function of (seed, a, b), so
/// any schedule over the keys reproduces the same values.
class CounterRng {
public:
    explicit CounterRng(std::uint64_t seed) : seed_(seed) {}

    double uniform(std::uint64_t a, std::uint64_t b, std::uint64_t lane = 0) const {
        return to_open_unit(hash_key(seed_, a, b, lane));
    }

    /// Standard normal by Box-Muller on two keyed uniforms.
    double normal(std::uint64_t a, std::uint64_t b) const {
        const double u1 = uniform(a, b, 0);
        const double u2 = uniform(a, b, 1);
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    std::uint64_t seed() const { return seed_; }

private:
    std::uint64_t seed_;
};

/// Sequential stream over a CounterRng substream.
class RngStream {
public:
    RngStream(std::uint64_t seed, std::uint64_t stream) : rng_(seed), stream_(stream) {}

    double uniform() { return rng_.uniform(stream_, counter_++); }
    double normal() { return rng_.normal(stream_, counter_++); }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n) {
        return static_cast<std::uint64_t>(uniform() * static_cast<double>(n)) % n;
    }

private:
    CounterRng rng_;
    std::uint64_t stream_;
    std::uint64_t counter_ = 0;
};

}  // namespace senskit
