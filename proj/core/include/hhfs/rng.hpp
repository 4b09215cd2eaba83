#pragma once

#include <cstdint>

namespace hhfs::rng {

/// SplitMix64 finalizer: a bijective 64-bit mixing function.
std::uint64_t mix64(std::uint64_t z);

/// Key for the independent stream identified by (seed, a, b). Distinct tuples
/// give decorrelated streams, so each (unit-of-work, replicate) pair can own
/// one regardless of which thread consumes it.
std::uint64_t stream_key(std::uint64_t seed, std::uint64_t a, std::uint64_t b);

/// Counter-based uniform generator with the distribution draws the simulator
/// needs. The draw sequence is a pure function of the key: scheduling cannot
/// change it.
class Stream {
public:
    explicit Stream(std::uint64_t key) : state_(key) {}

    std::uint64_t next_u64();
    double uniform01();    // [0, 1)
    double uniform_pos();  // (0, 1]
    double exponential();  // mean 1
    double normal();       // standard normal
    /// Gamma(shape, scale), shape > 0 (Marsaglia-Tsang squeeze, boosted below shape 1).
    double gamma(double shape, double scale);
    /// Uniform integer in {0, ..., bound-1}; returns 0 for bound == 0.
    std::uint32_t below(std::uint32_t bound);

private:
    std::uint64_t state_;
    double cached_normal_ = 0.0;
    bool has_cached_ = false;
};

}  // namespace hhfs::rng
