#pragma once

#include <cstdint>
#include <vector>

namespace lsc {

/// Small portable generator: the same seed yields the same stream on every
/// platform and standard library, which std distributions do not promise.
class SplitMix64 {
public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) { return n == 0 ? 0 : next() % n; }
  /// Standard normal via Box-Muller.
  double normal();

private:
  std::uint64_t state_;
};

/// Fisher-Yates permutation of [0, n).
std::vector<std::size_t> permutation(std::size_t n, SplitMix64& rng);

}  // namespace lsc
