#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "qproc/errors.hpp"
#include "qproc/levy.hpp"
#include "qproc/numerics.hpp"
#include "qproc/path.hpp"
#include "qproc/quasi.hpp"
#include "qproc/rng.hpp"

namespace qproc {

// Sorted sample with basic summaries and an ECDF handle.
class SampleSummary {
 public:
  explicit SampleSummary(std::vector<double> samples) : samples_(std::move(samples)) {
    if (samples_.empty()) throw parameter_error("SampleSummary: empty sample");
    std::sort(samples_.begin(), samples_.end());
    const SampleStats s = sample_stats(samples_);
    mean_ = s.mean;
    variance_ = s.variance;
  }

  const std::vector<double>& samples() const { return samples_; }
  double mean() const { return mean_; }
  double variance() const { return variance_; }

  // F_hat(x) = #{s <= x} / n (right-continuous).
  double ecdf(double x) const {
    const auto it = std::upper_bound(samples_.begin(), samples_.end(), x);
    return static_cast<double>(it - samples_.begin()) / static_cast<double>(samples_.size());
  }

 private:
  std::vector<double> samples_;
  double mean_;
  double variance_;
};

// Two-sample Kolmogorov-Smirnov statistic sup_x |F_a(x) - F_b(x)| by a merge
// scan over both sorted samples.
inline double ks_statistic(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw parameter_error("ks_statistic: empty sample");
  std::vector<double> sa(a.begin(), a.end()), sb(b.begin(), b.end());
  std::sort(sa.begin(), sa.end());
  std::sort(sb.begin(), sb.end());
  const double na = static_cast<double>(sa.size()), nb = static_cast<double>(sb.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < sa.size() && j < sb.size()) {
    const double x = std::min(sa[i], sb[j]);
    while (i < sa.size() && sa[i] <= x) ++i;
    while (j < sb.size() && sb[j] <= x) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  return d;
}

// ---------------------------------------------------------------------------
// Gaussian kernel density estimate
// ---------------------------------------------------------------------------

struct KdeOptions {
  std::size_t grid_points = 401;
  double bandwidth = 0.0;  // <= 0: Silverman's rule
  double pad_bandwidths = 5.0;
};

struct KdeResult {
  std::vector<double> grid;
  std::vector<double> density;
  double bandwidth = 0.0;

  // Trapezoid integral over the grid.
  double integral() const {
    double s = 0.0;
    for (std::size_t i = 1; i < grid.size(); ++i)
      s += 0.5 * (density[i - 1] + density[i]) * (grid[i] - grid[i - 1]);
    return s;
  }
};

inline double silverman_bandwidth(std::span<const double> samples) {
  if (samples.size() < 2) throw parameter_error("silverman_bandwidth: need >= 2 samples");
  std::vector<double> s(samples.begin(), samples.end());
  std::sort(s.begin(), s.end());
  const double sd = std::sqrt(sample_stats(s).variance);
  auto quantile = [&](double q) {
    const double pos = q * static_cast<double>(s.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const double frac = pos - static_cast<double>(lo);
    return lo + 1 < s.size() ? s[lo] * (1.0 - frac) + s[lo + 1] * frac : s[lo];
  };
  const double iqr = quantile(0.75) - quantile(0.25);
  double spread = std::min(sd, iqr / 1.34);
  if (spread <= 0.0) spread = std::max(sd, 1e-12);  // degenerate IQR fallback
  return 0.9 * spread * std::pow(static_cast<double>(s.size()), -0.2);
}

inline KdeResult kde(std::span<const double> samples, const KdeOptions& opts = {}) {
  if (samples.size() < 2) throw parameter_error("kde: need >= 2 samples");
  if (opts.grid_points < 2) throw parameter_error("kde: need >= 2 grid points");
  KdeResult out;
  out.bandwidth = opts.bandwidth > 0.0 ? opts.bandwidth : silverman_bandwidth(samples);
  const auto [mn_it, mx_it] = std::minmax_element(samples.begin(), samples.end());
  const double lo = *mn_it - opts.pad_bandwidths * out.bandwidth;
  const double hi = *mx_it + opts.pad_bandwidths * out.bandwidth;
  out.grid.resize(opts.grid_points);
  out.density.resize(opts.grid_points);
  const double inv_nh = 1.0 / (static_cast<double>(samples.size()) * out.bandwidth);
  constexpr double inv_sqrt_2pi = 0.3989422804014327;
  for (std::size_t g = 0; g < opts.grid_points; ++g) {
    const double x = lo + (hi - lo) * static_cast<double>(g) /
                              static_cast<double>(opts.grid_points - 1);
    double acc = 0.0;
    for (double s : samples) {
      const double z = (x - s) / out.bandwidth;
      acc += std::exp(-0.5 * z * z);
    }
    out.grid[g] = x;
    out.density[g] = inv_sqrt_2pi * inv_nh * acc;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Quasi-process vs true-law diagnostics
// ---------------------------------------------------------------------------

// KS distance at fixed time t between the quasi ensemble marginal (alpha
// permuted paths of one observed sample) and the exact marginal law of the
// model, sampled oracle_B times.
inline double quasi_marginal_distance(const JumpDiffusionModel& model,
                                      const SamplingScheme& scheme, double t, std::size_t alpha,
                                      std::size_t oracle_B, std::uint64_t quasi_seed,
                                      std::uint64_t oracle_seed) {
  model.validate_or_throw();
  scheme.validate_or_throw();
  if (t < 0.0 || t > scheme.horizon())
    throw parameter_error("quasi_marginal_distance: t outside [0, T]");
  if (alpha == 0 || oracle_B == 0)
    throw parameter_error("quasi_marginal_distance: alpha, oracle_B must be >= 1");

  RngStream rng(quasi_seed, 0);
  const IncrementVector inc = simulate_increments(model, scheme, rng);
  RngStream perm_rng(quasi_seed, 1);
  const auto perms = sample_permutation_set(scheme.n, alpha, perm_rng);

  // value at t needs only the first floor(t/h) permuted increments
  auto steps = static_cast<std::size_t>(std::floor(t / scheme.h));
  steps = std::min(steps, scheme.n);
  std::vector<double> quasi_vals(alpha);
  for (std::size_t a = 0; a < alpha; ++a) {
    double v = model.u0;
    for (std::size_t k = 0; k < steps; ++k) v += inc[perms[a].mapping[k]];
    quasi_vals[a] = v;
  }

  // X_t has an exactly simulable marginal (one increment of length t)
  std::vector<double> oracle_vals(oracle_B);
  for (std::size_t b = 0; b < oracle_B; ++b) {
    RngStream orng(oracle_seed, b);
    oracle_vals[b] = model.u0 + (t > 0.0 ? simulate_one_increment(model, t, orng) : 0.0);
  }
  return ks_statistic(quasi_vals, oracle_vals);
}

// Secondary functional-level marginal: KS over ruin times of quasi paths vs
// ruin times of independently simulated paths on the same grid.
inline double quasi_ruin_distance(const JumpDiffusionModel& model, const SamplingScheme& scheme,
                                  double xi, std::size_t alpha, std::size_t oracle_B,
                                  std::uint64_t quasi_seed, std::uint64_t oracle_seed) {
  model.validate_or_throw();
  scheme.validate_or_throw();
  if (alpha == 0 || oracle_B == 0)
    throw parameter_error("quasi_ruin_distance: alpha, oracle_B must be >= 1");

  RngStream rng(quasi_seed, 0);
  const IncrementVector inc = simulate_increments(model, scheme, rng);
  RngStream perm_rng(quasi_seed, 1);
  QuasiEnsemble ens(inc, model.u0, scheme.h,
                    sample_permutation_set(scheme.n, alpha, perm_rng));
  std::vector<double> quasi_taus(alpha);
  for (std::size_t a = 0; a < alpha; ++a) quasi_taus[a] = ruin_time(ens.quasi_path(a), xi);

  std::vector<double> oracle_taus(oracle_B);
  for (std::size_t b = 0; b < oracle_B; ++b) {
    RngStream orng(oracle_seed, b);
    const SteppedPath p =
        from_increments(model.u0, scheme.h, simulate_increments(model, scheme, orng));
    oracle_taus[b] = ruin_time(p, xi);
  }
  return ks_statistic(quasi_taus, oracle_taus);
}

// Monte-Carlo E[|X_hat_{t_k} - X_{t_k}|^p]^{1/p} over R replications; each
// replication shares the increments between the observed path and one fresh
// uniformly permuted quasi path.
inline double lp_increment_distance(const JumpDiffusionModel& model,
                                    const SamplingScheme& scheme, std::size_t k, double p,
                                    std::size_t R, std::uint64_t seed) {
  model.validate_or_throw();
  scheme.validate_or_throw();
  if (k > scheme.n) throw parameter_error("lp_increment_distance: k must be <= n");
  if (p < 1.0) throw parameter_error("lp_increment_distance: p must be >= 1");
  if (R == 0) throw parameter_error("lp_increment_distance: R must be >= 1");

  std::vector<double> moments(R);
  for (std::size_t r = 0; r < R; ++r) {
    RngStream inc_rng(seed, 2 * r);
    const IncrementVector inc = simulate_increments(model, scheme, inc_rng);
    RngStream perm_rng(seed, 2 * r + 1);
    const auto perm = sample_permutation_set(scheme.n, 1, perm_rng).front();
    // k == n sums the same multiset; pin the difference to 0 (as quasi-path
    // terminals are pinned) rather than expose summation-order rounding.
    if (k == scheme.n) {
      moments[r] = 0.0;
      continue;
    }
    double observed = 0.0, quasi = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      observed += inc[j];
      quasi += inc[perm.mapping[j]];
    }
    moments[r] = std::pow(std::abs(quasi - observed), p);
  }
  return std::pow(pairwise_sum(moments) / static_cast<double>(R), 1.0 / p);
}

}  // namespace qproc
