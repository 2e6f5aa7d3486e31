#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace utopia {

/// SplitMix64 stream. The output sequence is fixed for a given seed on every
/// platform, which is what makes simulated experiments reproducible.
class RngState {
 public:
  explicit constexpr RngState(std::uint64_t seed = 0) noexcept : state_(seed) {}

  constexpr std::uint64_t next_raw() noexcept {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  // Top 53 bits of the raw output scaled by 2^-53; always in [0, 1).
  constexpr double next_uniform() noexcept {
    return static_cast<double>(next_raw() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * next_uniform(); }

  // Box-Muller, one variate per call (the sine branch is discarded so that
  // the stream position never depends on call history).
  double next_gaussian() noexcept {
    double u1 = next_uniform();
    const double u2 = next_uniform();
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  /// Independent child stream; used to give each replication its own seed.
  constexpr RngState split() noexcept { return RngState(next_raw()); }

  constexpr std::uint64_t state() const noexcept { return state_; }

  friend constexpr bool operator==(const RngState&, const RngState&) = default;

 private:
  std::uint64_t state_;
};

}  // namespace utopia
