#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "qproc/errors.hpp"

namespace qproc {

// Counter-seedable random stream: (seed, stream) pairs give independent,
// reproducible substreams. The generator is pinned to mt19937_64 and all
// variate transforms are implemented here, so output is bit-identical for a
// given (seed, stream) on any conforming platform.
//
// Generator id: "mt19937_64/box-muller/v1".
class RngStream {
 public:
  static constexpr const char* kGeneratorId = "mt19937_64/box-muller/v1";

  explicit RngStream(std::uint64_t seed, std::uint64_t stream = 0)
      : engine_(mix(seed, stream)) {}

  // Uniform on [0, 1) with 53 random bits.
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  // Uniform on (0, 1]; safe as a log() argument.
  double uniform_pos() { return 1.0 - uniform(); }

  // Uniform integer in [0, bound) by rejection; unbiased.
  std::uint64_t uniform_below(std::uint64_t bound) {
    if (bound == 0) throw parameter_error("uniform_below: bound must be positive");
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
    std::uint64_t x;
    do {
      x = engine_();
    } while (x >= limit);
    return x % bound;
  }

  // Standard normal via Box-Muller (polar form, cached pair).
  double normal() {
    if (have_cached_) {
      have_cached_ = false;
      return cached_;
    }
    double v1, v2, s;
    do {
      v1 = 2.0 * uniform() - 1.0;
      v2 = 2.0 * uniform() - 1.0;
      s = v1 * v1 + v2 * v2;
    } while (s >= 1.0 || s == 0.0);
    const double f = std::sqrt(-2.0 * std::log(s) / s);
    cached_ = v2 * f;
    have_cached_ = true;
    return v1 * f;
  }

  // Exponential with the given mean.
  double exponential(double mean) { return -mean * std::log(uniform_pos()); }

  // Poisson count by Knuth's product method, splitting large means so the
  // running product never underflows.
  std::uint64_t poisson(double mean) {
    if (mean < 0.0) throw parameter_error("poisson: mean must be >= 0");
    std::uint64_t total = 0;
    while (mean > 30.0) {
      total += poisson_small(30.0);
      mean -= 30.0;
    }
    return total + poisson_small(mean);
  }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::uint64_t poisson_small(double mean) {
    if (mean == 0.0) return 0;
    const double threshold = std::exp(-mean);
    std::uint64_t k = 0;
    double p = 1.0;
    do {
      ++k;
      p *= uniform_pos();
    } while (p > threshold);
    return k - 1;
  }

  // splitmix64-style mixing of (seed, stream) into one engine seed.
  static std::uint64_t mix(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::mt19937_64 engine_;
  double cached_ = 0.0;
  bool have_cached_ = false;
};

}  // namespace qproc
