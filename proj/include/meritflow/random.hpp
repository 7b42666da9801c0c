#pragma once

#include <cstdint>
#include <random>

namespace meritflow {

/// Standard-normal stream with a fixed, versioned algorithm.
///
/// std::normal_distribution is implementation-defined, so instances generated
/// with it would not be reproducible across standard libraries. This sampler
/// pins the whole pipeline: mt19937_64 -> 53-bit uniforms -> Box-Muller.
class GaussianSampler {
 public:
  static constexpr const char* kAlgorithm = "mt19937_64/box-muller-v1";

  explicit GaussianSampler(std::uint64_t seed) : rng_(seed) {}

  double next();

  /// Uniform draw in (0, 1], 53-bit resolution.
  double uniform_open_closed() {
    return static_cast<double>((rng_() >> 11) + 1) * 0x1.0p-53;
  }

  /// Uniform draw in [0, 1), 53-bit resolution.
  double uniform_closed_open() {
    return static_cast<double>(rng_() >> 11) * 0x1.0p-53;
  }

 private:
  std::mt19937_64 rng_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

/// Decorrelated child seed for a named stream (splitmix64 mixing).
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);

}  // namespace meritflow
