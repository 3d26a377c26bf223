#pragma once

#include <cstdint>

namespace qnis {

/// Counter-based SplitMix64 stream. Cheap to construct, so every replication
/// gets its own stream derived from (seed, replication index) and is
/// reproducible in isolation regardless of scheduling.
class SplitMix64 {
public:
  explicit SplitMix64(std::uint64_t state) : state_(state) {}

  static std::uint64_t mix(std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  std::uint64_t next() {
    state_ += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  /// Uniform in [0, 1) with 53-bit resolution.
  double next_double() {
    return static_cast<double>(next() >> 11) * 0x1.0p-53;
  }

private:
  std::uint64_t state_;
};

/// Stream for one replication: starting counters are scattered pseudorandomly,
/// so distinct replications (and distinct seeds) do not share draws.
inline SplitMix64 replication_stream(std::uint64_t seed, std::uint64_t replication) {
  return SplitMix64(SplitMix64::mix(seed ^ SplitMix64::mix(replication + 0x51A2B3C4D5E6F708ULL)));
}

}  // namespace qnis
