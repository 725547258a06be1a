#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "qproc/errors.hpp"
#include "qproc/rng.hpp"

namespace qproc {

// ---------------------------------------------------------------------------
// Jump-size laws (finite-activity only, closed enumeration)
// ---------------------------------------------------------------------------

struct ExponentialJump {
  double mean = 1.0;  // > 0
};

struct ConstantJump {
  double size = 1.0;
};

struct TwoPointJump {
  double low = 0.0;
  double high = 1.0;
  double p_high = 0.5;  // in [0,1]
};

using JumpSizeLaw = std::variant<ExponentialJump, ConstantJump, TwoPointJump>;

inline void validate(const JumpSizeLaw& law) {
  if (const auto* e = std::get_if<ExponentialJump>(&law)) {
    if (!(e->mean > 0.0)) throw parameter_error("exponential jump mean must be > 0");
  } else if (const auto* t = std::get_if<TwoPointJump>(&law)) {
    if (t->p_high < 0.0 || t->p_high > 1.0)
      throw parameter_error("two-point jump probability must be in [0,1]");
  }
}

inline double jump_mean(const JumpSizeLaw& law) {
  if (const auto* e = std::get_if<ExponentialJump>(&law)) return e->mean;
  if (const auto* c = std::get_if<ConstantJump>(&law)) return c->size;
  const auto& t = std::get<TwoPointJump>(law);
  return t.low + (t.high - t.low) * t.p_high;
}

inline double jump_second_moment(const JumpSizeLaw& law) {
  if (const auto* e = std::get_if<ExponentialJump>(&law)) return 2.0 * e->mean * e->mean;
  if (const auto* c = std::get_if<ConstantJump>(&law)) return c->size * c->size;
  const auto& t = std::get<TwoPointJump>(law);
  return t.low * t.low * (1.0 - t.p_high) + t.high * t.high * t.p_high;
}

inline double sample_jump(const JumpSizeLaw& law, RngStream& rng) {
  if (const auto* e = std::get_if<ExponentialJump>(&law)) return rng.exponential(e->mean);
  if (const auto* c = std::get_if<ConstantJump>(&law)) return c->size;
  const auto& t = std::get<TwoPointJump>(law);
  return rng.uniform() < t.p_high ? t.high : t.low;
}

// ---------------------------------------------------------------------------
// Process laws
// ---------------------------------------------------------------------------

// Characteristic triplet of a finite-activity Levy process: drift, Gaussian
// volatility and a compound-Poisson part (intensity + jump-size law).
struct LevyTriplet {
  double drift = 0.0;
  double gaussian_sigma = 0.0;  // >= 0
  double intensity = 0.0;       // >= 0
  JumpSizeLaw jump_law = ExponentialJump{1.0};

  void validate_or_throw() const {
    if (!(gaussian_sigma >= 0.0)) throw parameter_error("gaussian_sigma must be >= 0");
    if (!(intensity >= 0.0)) throw parameter_error("intensity must be >= 0");
    validate(jump_law);
  }
};

// The jump-diffusion used in the experiments:
//   X_t = u + mu*t + sigma*W_t + jump_sign * sum_{i<=N_t} xi_i,
// with N Poisson(lambda) and xi_i exponential with mean m.
struct JumpDiffusionModel {
  double u0 = 0.0;
  double mu = 0.0;
  double sigma = 0.0;      // >= 0
  double lambda = 0.0;     // >= 0
  double jump_mean = 1.0;  // > 0
  int jump_sign = -1;      // +1 or -1

  void validate_or_throw() const {
    if (!(sigma >= 0.0)) throw parameter_error("sigma must be >= 0");
    if (!(lambda >= 0.0)) throw parameter_error("lambda must be >= 0");
    if (!(jump_mean > 0.0)) throw parameter_error("jump_mean must be > 0");
    if (jump_sign != 1 && jump_sign != -1) throw parameter_error("jump_sign must be +1 or -1");
  }

  LevyTriplet triplet() const {
    LevyTriplet t;
    t.drift = mu;
    t.gaussian_sigma = sigma;
    t.intensity = lambda;
    t.jump_law = ExponentialJump{jump_mean};
    return t;
  }
};

// Uniform observation grid t_k = k*h, k = 0..n.
struct SamplingScheme {
  std::size_t n = 1;
  double h = 1.0;

  double horizon() const { return static_cast<double>(n) * h; }

  void validate_or_throw() const {
    if (n == 0) throw parameter_error("sampling scheme: n must be >= 1");
    if (!(h > 0.0)) throw parameter_error("sampling scheme: h must be > 0");
  }

  // High-frequency-long-term family: h = n^{-beta}, beta in (0,1).
  static SamplingScheme hflt(std::size_t n, double beta) {
    if (!(beta > 0.0 && beta < 1.0)) throw parameter_error("hflt: beta must be in (0,1)");
    return SamplingScheme{n, std::pow(static_cast<double>(n), -beta)};
  }
};

using IncrementVector = std::vector<double>;

// ---------------------------------------------------------------------------
// Simulation
// ---------------------------------------------------------------------------

// One iid draw of the increment law over a window of length h.
inline double simulate_one_increment(const JumpDiffusionModel& model, double h, RngStream& rng) {
  double x = model.mu * h + model.sigma * std::sqrt(h) * rng.normal();
  const std::uint64_t k = rng.poisson(model.lambda * h);
  double jumps = 0.0;
  for (std::uint64_t j = 0; j < k; ++j) jumps += rng.exponential(model.jump_mean);
  return x + static_cast<double>(model.jump_sign) * jumps;
}

inline IncrementVector simulate_increments(const JumpDiffusionModel& model,
                                           const SamplingScheme& scheme, RngStream& rng) {
  model.validate_or_throw();
  scheme.validate_or_throw();
  IncrementVector out(scheme.n);
  for (std::size_t k = 0; k < scheme.n; ++k) out[k] = simulate_one_increment(model, scheme.h, rng);
  return out;
}

inline IncrementVector simulate_increments(const JumpDiffusionModel& model,
                                           const SamplingScheme& scheme, std::uint64_t seed,
                                           std::uint64_t stream = 0) {
  RngStream rng(seed, stream);
  return simulate_increments(model, scheme, rng);
}

// Closed-form marginal mean and variance of X_t (exponential jumps).
struct MarginalMoments {
  double mean = 0.0;
  double variance = 0.0;
};

inline MarginalMoments exact_marginal_moments(const JumpDiffusionModel& model, double t) {
  if (!(t >= 0.0)) throw parameter_error("exact_marginal_moments: t must be >= 0");
  const double m = model.jump_mean;
  MarginalMoments out;
  out.mean = model.u0 + (model.mu + model.jump_sign * model.lambda * m) * t;
  out.variance = (model.sigma * model.sigma + 2.0 * model.lambda * m * m) * t;
  return out;
}

}  // namespace qproc
