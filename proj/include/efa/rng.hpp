#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>

namespace efa {

/// Counter-based 64-bit generator built on the splitmix64 finalizer. The
/// n-th output is a pure function of (seed, stream, n), so sequences are
/// identical on every platform and independent streams can be split off a
/// single seed without coordination. Streams used by the simulation layer:
///   0 loading entries, 1 noise-covariance entries,
///   2 source snapshots,  3 noise snapshots.
class CounterRng {
 public:
  CounterRng(std::uint64_t seed, std::uint64_t stream)
      : base_(mix(mix(seed + kGolden) ^ mix(stream + kStreamSalt))) {}

  std::uint64_t next_u64() { return mix(base_ + (++counter_) * kGolden); }

  /// Uniform on the open interval (0, 1); never returns an endpoint, so
  /// logarithms of draws are always finite.
  double next_double() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

  /// Standard real normal via Box-Muller; consumes two uniforms per draw.
  double normal() {
    const double u1 = next_double();
    const double u2 = next_double();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  /// Circular complex normal with unit total variance: real and imaginary
  /// parts are each N(0, 1/2).
  std::complex<double> complex_normal() {
    const double u1 = next_double();
    const double u2 = next_double();
    const double r = std::sqrt(-std::log(u1));
    return {r * std::cos(2.0 * std::numbers::pi * u2),
            r * std::sin(2.0 * std::numbers::pi * u2)};
  }

 private:
  static constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ull;
  static constexpr std::uint64_t kStreamSalt = 0xD2B74407B1CE6E93ull;

  static std::uint64_t mix(std::uint64_t z) {
    z ^= z >> 30;
    z *= 0xBF58476D1CE4E5B9ull;
    z ^= z >> 27;
    z *= 0x94D049BB133111EBull;
    z ^= z >> 31;
    return z;
  }

  std::uint64_t base_;
  std::uint64_t counter_ = 0;
};

}  // namespace efa
