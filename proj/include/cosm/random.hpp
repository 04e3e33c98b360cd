#pragma once

#include <cstdint>
#include <optional>
#include <random>

namespace cosm {

/// SplitMix64 finaliser. Used to derive independent substream seeds.
std::uint64_t splitmix64(std::uint64_t x);

/// Seed of substream `index` under `master`. Distinct indices give unrelated streams.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index);

/// Seedable generator with platform-independent output.
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the C++
/// standard. The distribution transforms below are written out here because
/// the std:: distributions are implementation-defined:
///   uniform01  = (u64 >> 11) * 2^-53
///   normal     = Box-Muller on (1 - uniform01, uniform01), second variate cached
///   below(n)   = rejection sampling on the top of the 64-bit range
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }
    /// Uniform in [0, 1).
    double uniform01();
    /// Uniform in [lo, hi).
    double uniform(double lo, double hi);
    /// Standard normal variate.
    double normal();
    double normal(double mean, double stddev) { return mean + stddev * normal(); }
    /// Uniform integer in [0, n). n must be positive.
    std::uint64_t below(std::uint64_t n);

private:
    std::mt19937_64 engine_;
    std::optional<double> spare_;
};

}  // namespace cosm
