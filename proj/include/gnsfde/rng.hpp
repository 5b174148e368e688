#pragma once

#include <cmath>
#include <cstdint>

namespace gnsfde {

/// SplitMix64 finalizer. Bijective on 64-bit words; the basis of every
/// random stream in this project.
inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Stream tags keep draws made for different purposes on disjoint keys even
/// when the (seed, sample) pair coincides.
enum class StreamTag : std::uint64_t {
    driver_noise = 1,
    bang_bang = 2,
    sampler_segments = 3,
    oracle_candidates = 4,
    test_generic = 5,
};

/// Counter-based random stream: every draw is a pure function of
/// (master_seed, sample_index, tag, counter). Draws can therefore be
/// evaluated in any order, on any thread, with bit-identical results.
class CounterRng {
  public:
    CounterRng(std::uint64_t master_seed, std::uint64_t sample_index, StreamTag tag)
        : base_(mix64(mix64(mix64(master_seed) ^ sample_index) ^
                      static_cast<std::uint64_t>(tag))) {}

    std::uint64_t bits(std::uint64_t counter) const {
        // splitmix64 evaluated at state base_ + counter * golden ratio
        return mix64(base_ + counter * 0x9e3779b97f4a7c15ULL);
    }

    /// Uniform in the open interval (0, 1); never returns 0 or 1, so it is
    /// safe under log().
    double uniform(std::uint64_t counter) const {
        return (static_cast<double>(bits(counter) >> 11) + 0.5) * 0x1.0p-53;
    }

    double uniform(std::uint64_t counter, double lo, double hi) const {
        return lo + (hi - lo) * uniform(counter);
    }

    /// Standard normal via Box-Muller. Consumes counters 2c and 2c+1, so
    /// normal counters live in their own halved index space.
    double normal(std::uint64_t counter) const {
        const double u1 = uniform(2 * counter);
        const double u2 = uniform(2 * counter + 1);
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
    }

  private:
    std::uint64_t base_;
};

} // namespace gnsfde
