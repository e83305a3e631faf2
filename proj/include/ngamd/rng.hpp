#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <stdexcept>

namespace ngamd {

/// Counter-based 64-bit generator (splitmix64 output function over an
/// incrementing counter). Identical (seed, stream_id) reproduces the same
/// sequence; distinct stream ids are decorrelated through the seed mix.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream_id = 0)
      : state_(mix(mix(seed + 0x9e3779b97f4a7c15ull) ^
                   mix(stream_id + 0xbf58476d1ce4e5b9ull))) {}

  /// Independent substream derived from this stream's identity.
  RngStream substream(std::uint64_t id) const {
    return RngStream(state_, id + 1);
  }

  std::uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ull;
    return mix(state_);
  }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  /// Uniform on (0, 1], safe as a log() argument.
  double uniform_pos() {
    return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
  }

  /// Standard real normal, Box-Muller (one of the pair is discarded so the
  /// draw count per call is fixed).
  double normal() {
    const double radius = std::sqrt(-2.0 * std::log(uniform_pos()));
    const double angle = 2.0 * std::numbers::pi * uniform();
    return radius * std::cos(angle);
  }

  /// Circularly-symmetric standard complex normal, E|z|^2 = 1.
  std::complex<double> complex_normal() {
    const double radius = std::sqrt(-std::log(uniform_pos()));
    const double angle = 2.0 * std::numbers::pi * uniform();
    return {radius * std::cos(angle), radius * std::sin(angle)};
  }

  /// Gamma(shape, scale=1) via Marsaglia-Tsang, with the power boost for
  /// shape < 1.
  double gamma(double shape) {
    if (!(shape > 0.0)) throw std::domain_error("gamma: shape must be > 0");
    if (shape < 1.0) {
      const double u = uniform_pos();
      return gamma(shape + 1.0) * std::pow(u, 1.0 / shape);
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
      double x, v;
      do {
        x = normal();
        v = 1.0 + c * x;
      } while (v <= 0.0);
      v = v * v * v;
      const double u = uniform_pos();
      if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
      if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
    }
  }

 private:
  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  std::uint64_t state_;
};

}  // namespace ngamd
