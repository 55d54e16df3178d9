#pragma once

#include <cstdint>
#include <random>

namespace wz {

/// Purpose tags separate the random streams consumed for one path, so that
/// e.g. the Brownian increments do not shift when the jump law changes.
enum class StreamTag : std::uint32_t {
  kBrownian = 1,
  kJumpTimes = 2,
  kJumpSizes = 3,
  kLatticeProbe = 4,
  kLemmaSamples = 5,
  kMomentLemma = 6,
};

/// A generator keyed by (master_seed, index, tag). Two streams with
/// different keys are independent for all practical purposes; the same key
/// always reproduces the same sequence, regardless of which thread or in
/// which order the stream is created.
class RngStream {
 public:
  RngStream(std::uint64_t master_seed, std::uint64_t index, StreamTag tag) {
    std::seed_seq seq{static_cast<std::uint32_t>(master_seed),
                      static_cast<std::uint32_t>(master_seed >> 32),
                      static_cast<std::uint32_t>(index),
                      static_cast<std::uint32_t>(index >> 32),
                      static_cast<std::uint32_t>(tag),
                      0x57a11d5eU};
    engine_.seed(seq);
  }

  /// Uniform on (0, 1].
  double uniform() {
    return static_cast<double>((engine_() >> 11) + 1) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  double normal() { return normal_(engine_); }

  std::uint64_t poisson(double mean) {
    if (mean <= 0.0) return 0;
    std::poisson_distribution<std::uint64_t> dist(mean);
    return dist(engine_);
  }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace wz
