#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "qproc/diagnostics.hpp"
#include "qproc/estimator.hpp"
#include "qproc/functional.hpp"
#include "qproc/levy.hpp"
#include "qproc/numerics.hpp"
#include "qproc/path.hpp"
#include "qproc/quasi.hpp"
#include "qproc/rng.hpp"

namespace qproc {

struct CriterionResult {
  int index = 0;
  std::string name;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
};

namespace acceptance_detail {

inline const JumpDiffusionModel kModel{0.0, 20.0, 10.0, 5.0, 3.0, -1};
inline const double kBeta = 0.5;

inline std::shared_ptr<const PathFunctional> dividend_contrast() {
  // negated mollified dividend: the dividend value is maximized in theta, so
  // the contrast to minimize is its negative
  return std::make_shared<NegatedFunctional>(
      std::make_shared<DividendFunctional>(1.0, 0.1, 1.0, 0.5, -20.0, 0.0, 10.0));
}

inline const ThetaBox kThetaBox{{0.0}, {10.0}};

// tau^x ^ T as a (theta-free) path functional, for the exhaustive oracle.
class RuinTimeFunctional : public PathFunctional {
 public:
  explicit RuinTimeFunctional(double xi) : xi_(xi) {}
  std::size_t theta_dim() const override { return 1; }
  double evaluate(const SteppedPath& p, std::span<const double>) const override {
    return ruin_time(p, xi_);
  }

 private:
  double xi_;
};

template <class F>
double adaptive_simpson(F&& f, double a, double b, double tol, int depth = 40) {
  auto simpson = [&](double lo, double hi) {
    return (hi - lo) / 6.0 * (f(lo) + 4.0 * f(0.5 * (lo + hi)) + f(hi));
  };
  std::function<double(double, double, double, double, int)> rec =
      [&](double lo, double hi, double whole, double eps, int d) -> double {
    const double mid = 0.5 * (lo + hi);
    const double left = simpson(lo, mid), right = simpson(mid, hi);
    if (d <= 0 || std::abs(left + right - whole) <= 15.0 * eps)
      return left + right + (left + right - whole) / 15.0;
    return rec(lo, mid, left, 0.5 * eps, d - 1) + rec(mid, hi, right, 0.5 * eps, d - 1);
  };
  return rec(a, b, simpson(a, b), tol, depth);
}

// High-precision reference for the discounted dividend on a step path.
inline double dividend_reference(const SteppedPath& path, const DividendKernel& kernel, double r,
                                 double xi, double theta) {
  const double cutoff = kernel.time_cutoff(std::span<const double>(&theta, 1));
  const double stop = std::min({ruin_time(path, xi), cutoff, path.horizon()});
  double acc = 0.0;
  for (std::size_t k = 1; k <= path.n_increments(); ++k) {
    const double t0 = static_cast<double>(k - 1) * path.h();
    const double t1 = std::min(static_cast<double>(k) * path.h(), stop);
    if (t1 <= t0) break;
    const double x = path[k - 1];
    acc += adaptive_simpson(
        [&](double t) {
          return std::exp(-r * t) * kernel.value(t, x, std::span<const double>(&theta, 1));
        },
        t0, t1, 1e-13);
  }
  return acc;
}

inline double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  const double ma = pairwise_sum(a) / static_cast<double>(a.size());
  const double mb = pairwise_sum(b) / static_cast<double>(b.size());
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

inline double skewness(const std::vector<double>& x) {
  const double m = pairwise_sum(x) / static_cast<double>(x.size());
  double m2 = 0.0, m3 = 0.0;
  for (double v : x) {
    m2 += (v - m) * (v - m);
    m3 += (v - m) * (v - m) * (v - m);
  }
  m2 /= static_cast<double>(x.size());
  m3 /= static_cast<double>(x.size());
  return m3 / std::pow(m2, 1.5);
}

// One quasi-estimation replication: increments from (seed, 0), permutations
// from (seed, 1).
inline EstimatorResult fit_once(const SamplingScheme& cell, std::size_t alpha,
                                std::uint64_t seed, const PathFunctional& f, const ThetaBox& box,
                                const OptimizerOptions& opts) {
  RngStream rng(seed, 0);
  const IncrementVector inc = simulate_increments(kModel, cell, rng);
  RngStream perm_rng(seed, 1);
  QuasiEnsemble ens(inc, kModel.u0, cell.h, sample_permutation_set(cell.n, alpha, perm_rng));
  ContrastProblem prob{&ens, &f, box};
  return minimize_contrast(prob, opts);
}

inline std::size_t default_alpha(std::size_t n, double p = 1.5) {
  const double rn = std::pow(static_cast<double>(n), kBeta / p);
  return static_cast<std::size_t>(std::floor(rn * rn / std::log(rn)));
}

// --------------------------------------------------------------------------

inline CriterionResult criterion_exactness() {
  CriterionResult res{1, "quasi-path exactness (identity + terminal, bit-exact)"};
  RngStream rng(20260824, 0);
  std::size_t bad = 0;
  for (std::size_t trial = 0; trial < 10000; ++trial) {
    const std::size_t n = 1 + static_cast<std::size_t>(rng.uniform_below(32));
    IncrementVector inc(n);
    for (double& d : inc) d = rng.normal() * 3.0 + rng.exponential(1.0);
    std::vector<Permutation> perms{Permutation::identity(n)};
    auto random_perms = sample_permutation_set(n, 2, rng);
    perms.insert(perms.end(), random_perms.begin(), random_perms.end());
    QuasiEnsemble ens(inc, 0.5, 0.25, perms);
    const SteppedPath observed = ens.observed_path();
    const SteppedPath identity = ens.quasi_path(0);
    for (std::size_t k = 0; k < observed.values().size(); ++k)
      if (identity[k] != observed[k]) ++bad;
    for (std::size_t i = 0; i < ens.size(); ++i)
      if (ens.quasi_path(i).terminal() != observed.terminal()) ++bad;
  }
  res.passed = bad == 0;
  res.detail = "mismatches=" + std::to_string(bad) + " over 10^4 trials";
  return res;
}

inline CriterionResult criterion_increment_moments() {
  CriterionResult res{2, "increment-law moments within 3 SE at 10^6 draws"};
  std::ostringstream detail;
  bool ok = true;
  const std::size_t N = 1000000;
  for (double h : {1.0, 0.01}) {
    RngStream rng(90210, h == 1.0 ? 0 : 1);
    std::vector<double> draws(N);
    for (double& d : draws) d = simulate_one_increment(kModel, h, rng);
    const SampleStats s = sample_stats(draws);
    const double mean_true = (kModel.mu - kModel.lambda * kModel.jump_mean) * h;
    const double var_true =
        (kModel.sigma * kModel.sigma + 2.0 * kModel.lambda * kModel.jump_mean * kModel.jump_mean) *
        h;
    double m4 = 0.0;
    for (double d : draws) {
      const double c = d - s.mean;
      m4 += c * c * c * c;
    }
    m4 /= static_cast<double>(N);
    const double se_mean = std::sqrt(s.variance / static_cast<double>(N));
    const double se_var = std::sqrt((m4 - s.variance * s.variance) / static_cast<double>(N));
    const double zm = std::abs(s.mean - mean_true) / se_mean;
    const double zv = std::abs(s.variance - var_true) / se_var;
    ok = ok && zm <= 3.0 && zv <= 3.0;
    detail << "h=" << h << ": z_mean=" << zm << " z_var=" << zv << "  ";
  }
  res.passed = ok;
  res.detail = detail.str();
  return res;
}

inline CriterionResult criterion_exhaustive_oracle() {
  CriterionResult res{3, "exhaustive-permutation oracle equivalence (n=6, 1e-12)"};
  const std::size_t n = 6;
  const double h = 0.5, u = 0.0;
  RngStream rng(31337, 0);
  double worst = 0.0;
  for (std::size_t trial = 0; trial < 5; ++trial) {
    IncrementVector inc(n);
    for (double& d : inc) d = simulate_one_increment(kModel, h, rng);
    QuasiEnsemble ens(inc, u, h, enumerate_all_permutations(n));

    const RuinTimeFunctional tau(-1.0);
    const DividendFunctional div(1.0, 0.1, 1.0, 0.5, -1.0, 0.0, 10.0);
    const double theta = 2.0;
    for (const PathFunctional* f : {static_cast<const PathFunctional*>(&tau),
                                    static_cast<const PathFunctional*>(&div)}) {
      const double lib = empirical_expectation(ens, *f, std::span<const double>(&theta, 1));
      // independent brute force: rebuild each permuted path by hand
      double acc = 0.0;
      const double terminal = ens.observed_path().terminal();
      for (const auto& p : ens.permutations()) {
        std::vector<double> vals(n + 1, u);
        for (std::size_t k = 0; k < n; ++k) vals[k + 1] = vals[k] + inc[p.mapping[k]];
        vals[n] = terminal;  // quasi paths pin the terminal (exact invariance)
        acc += f->evaluate(SteppedPath(u, h, vals), std::span<const double>(&theta, 1));
      }
      worst = std::max(worst, std::abs(lib - acc / static_cast<double>(ens.size())));
    }
  }
  res.passed = worst <= 1e-12;
  std::ostringstream d;
  d << "max |library - brute force| = " << worst;
  res.detail = d.str();
  return res;
}

inline CriterionResult criterion_functional_exactness() {
  CriterionResult res{4, "discounted-loss vs adaptive quadrature (1e-10) and boundedness"};
  const DividendFunctional f(1.0, 0.1, 1.0, 0.5, -20.0, 0.0, 10.0);
  const auto& kernel = static_cast<const DividendKernel&>(f.kernel());
  RngStream rng(5150, 0);
  double worst = 0.0;
  bool bounded = true;
  for (std::size_t trial = 0; trial < 100; ++trial) {
    const std::size_t n = 20 + static_cast<std::size_t>(rng.uniform_below(61));
    const double h = 0.01 + 0.19 * rng.uniform();
    IncrementVector inc(n);
    for (double& d : inc) d = simulate_one_increment(kModel, h, rng);
    const SteppedPath path = from_increments(-5.0 + 10.0 * rng.uniform(), h, inc);
    const double theta = 0.5 + 9.0 * rng.uniform();
    const double lib = f.evaluate(path, std::span<const double>(&theta, 1));
    const double ref =
        dividend_reference(path, kernel, f.discount_rate(), f.ruin_level(), theta);
    worst = std::max(worst, std::abs(lib - ref));
    bounded = bounded && std::abs(lib) <= kernel.sup_abs() / f.discount_rate() * (1.0 + 1e-12);
  }
  res.passed = worst <= 1e-10 && bounded;
  std::ostringstream d;
  d << "max |eval - quadrature| = " << worst << ", bounded=" << (bounded ? "yes" : "no");
  res.detail = d.str();
  return res;
}

inline CriterionResult criterion_derivatives() {
  CriterionResult res{5, "analytic gradient/Hessian vs central differences (1e-5)"};
  const DividendFunctional f(1.0, 0.1, 1.0, 0.5, -20.0, 0.0, 10.0);
  RngStream rng(8086, 0);
  double worst_g = 0.0, worst_h = 0.0;
  for (std::size_t trial = 0; trial < 100; ++trial) {
    const std::size_t n = 20 + static_cast<std::size_t>(rng.uniform_below(41));
    const double h = 0.02 + 0.1 * rng.uniform();
    IncrementVector inc(n);
    for (double& d : inc) d = simulate_one_increment(kModel, h, rng);
    const SteppedPath path = from_increments(-3.0 + 6.0 * rng.uniform(), h, inc);
    const double theta = 0.3 + 9.4 * rng.uniform();

    auto value_at = [&](double th) { return f.evaluate(path, std::span<const double>(&th, 1)); };
    auto grad_at = [&](double th) {
      double g = 0.0;
      f.gradient(path, std::span<const double>(&th, 1), std::span<double>(&g, 1));
      return g;
    };
    double g = grad_at(theta), hess = 0.0;
    f.hessian(path, std::span<const double>(&theta, 1), std::span<double>(&hess, 1));
    const double sg = 1e-5, sh = 3e-5;
    const double g_fd = (value_at(theta + sg) - value_at(theta - sg)) / (2.0 * sg);
    const double h_fd = (grad_at(theta + sh) - grad_at(theta - sh)) / (2.0 * sh);
    worst_g = std::max(worst_g, std::abs(g - g_fd) / std::max(1.0, std::abs(g)));
    worst_h = std::max(worst_h, std::abs(hess - h_fd) / std::max(1.0, std::abs(hess)));
  }
  res.passed = worst_g <= 1e-5 && worst_h <= 1e-5;
  std::ostringstream d;
  d << "max rel err: gradient=" << worst_g << " hessian=" << worst_h;
  res.detail = d.str();
  return res;
}

inline CriterionResult criterion_weak_convergence() {
  CriterionResult res{6, "weak-convergence trend of the quasi marginal at t=1"};
  auto median_over_seeds = [&](const SamplingScheme& cell) {
    std::vector<double> ds;
    for (std::uint64_t seed = 1; seed <= 10; ++seed)
      ds.push_back(quasi_marginal_distance(kModel, cell, 1.0, 1000, 1000, seed, seed + 1000));
    return median(ds);
  };
  const double coarse = median_over_seeds(SamplingScheme{10, 1.0});
  const double fine = median_over_seeds(SamplingScheme{20000, 0.005});
  res.passed = fine < coarse && fine <= 0.08;
  std::ostringstream d;
  d << "median KS: (h=1,T=10)=" << coarse << ", (h=0.005,T=100)=" << fine;
  res.detail = d.str();
  return res;
}

inline CriterionResult criterion_lp_trend() {
  CriterionResult res{7, "Lp increment-distance trend in n (p=2, t~1) + terminal zero"};
  auto cell = [&](std::size_t n) { return SamplingScheme::hflt(n, kBeta); };
  auto k_near_t1 = [&](const SamplingScheme& s) {
    return static_cast<std::size_t>(std::llround(1.0 / s.h));
  };
  const double d_small = lp_increment_distance(kModel, cell(100), k_near_t1(cell(100)), 2.0, 200, 17);
  const double d_large =
      lp_increment_distance(kModel, cell(10000), k_near_t1(cell(10000)), 2.0, 200, 18);
  const double terminal = lp_increment_distance(kModel, cell(100), 100, 2.0, 200, 19);
  res.passed = d_large < d_small && terminal == 0.0;
  std::ostringstream d;
  d << "distance: n=10^2 -> " << d_small << ", n=10^4 -> " << d_large
    << ", terminal=" << terminal;
  res.detail = d.str();
  return res;
}

inline CriterionResult criterion_consistency() {
  CriterionResult res{8, "consistency: median |theta_hat - theta0| non-increasing in n"};
  const auto contrast = dividend_contrast();
  OptimizerOptions oracle_opts;
  oracle_opts.grid_points = 10000;
  oracle_opts.keep_trace = false;
  const SamplingScheme oracle_scheme{202, 0.05};
  const EstimatorResult oracle =
      oracle_estimate(kModel, oracle_scheme, *contrast, kThetaBox, 100000, 271828, oracle_opts);
  const double theta0 = oracle.theta_hat[0];
  const double grid_res = (kThetaBox.hi[0] - kThetaBox.lo[0]) / 9999.0;

  OptimizerOptions opts;
  opts.keep_trace = false;
  std::vector<double> medians;
  std::ostringstream d;
  d << "theta0=" << theta0;
  for (std::size_t n : {std::size_t{1000}, std::size_t{10000}, std::size_t{100000}}) {
    const SamplingScheme cell = SamplingScheme::hflt(n, kBeta);
    const std::size_t alpha = default_alpha(n);
    std::vector<double> errs;
    for (std::uint64_t seed = 1; seed <= 20; ++seed)
      errs.push_back(
          std::abs(fit_once(cell, alpha, seed, *contrast, kThetaBox, opts).theta_hat[0] - theta0));
    medians.push_back(median(errs));
    d << ", med(n=" << n << ")=" << medians.back();
  }
  const bool nonincreasing = medians[0] >= medians[1] && medians[1] >= medians[2];
  const bool tight = medians.back() <= 2.0 * grid_res;
  res.passed = nonincreasing && tight;
  d << "; bound 2*grid=" << 2.0 * grid_res << " -> " << (tight ? "met" : "NOT met");
  res.detail = d.str();
  return res;
}

inline CriterionResult criterion_normality() {
  CriterionResult res{9, "normality shape at n=10^4 (QQ, skewness, sandwich factor)"};
  const auto contrast = dividend_contrast();
  const std::size_t n = 10000, R = 200;
  const SamplingScheme cell = SamplingScheme::hflt(n, kBeta);
  const std::size_t alpha = default_alpha(n);
  OptimizerOptions opts;
  opts.keep_trace = false;

  std::vector<double> estimates(R), sandwiches;
  for (std::size_t r = 0; r < R; ++r) {
    const std::uint64_t seed = 1001 + r;
    RngStream rng(seed, 0);
    const IncrementVector inc = simulate_increments(kModel, cell, rng);
    RngStream perm_rng(seed, 1);
    QuasiEnsemble ens(inc, kModel.u0, cell.h, sample_permutation_set(cell.n, alpha, perm_rng));
    ContrastProblem prob{&ens, contrast.get(), kThetaBox};
    const EstimatorResult fit = minimize_contrast(prob, opts);
    estimates[r] = fit.theta_hat[0];
    try {
      sandwiches.push_back(sandwich_covariance(prob, fit.theta_hat)[0]);
    } catch (const degeneracy_error&) {
    }
  }

  const double med = median(estimates);
  std::vector<double> dev;
  for (double e : estimates) dev.push_back(std::abs(e - med));
  const double mad = 1.4826 * median(dev);
  std::vector<double> standardized(estimates);
  std::sort(standardized.begin(), standardized.end());
  std::vector<double> quantiles(R);
  for (std::size_t i = 0; i < R; ++i) {
    standardized[i] = (standardized[i] - med) / mad;
    quantiles[i] = normal_quantile((static_cast<double>(i) + 0.5) / static_cast<double>(R));
  }
  const double qq = pearson(standardized, quantiles);
  const double skew = skewness(estimates);

  // Sigma_hat estimates avar of r_n (theta_hat - theta0) with r_n = n^{beta/p},
  // p = d + 1/2; compare against the replication variance on that scale.
  const double rn2 = std::pow(static_cast<double>(n), 2.0 * kBeta / 1.5);
  const double var_rep = sample_stats(estimates).variance;
  const double ratio = median(sandwiches) / (rn2 * var_rep);
  const bool sandwich_ok = ratio >= 0.5 && ratio <= 2.0;

  res.passed = qq >= 0.97 && std::abs(skew) <= 0.3 && sandwich_ok;
  std::ostringstream d;
  d << "qq_corr=" << qq << ", skewness=" << skew << ", sandwich/replication=" << ratio;
  res.detail = d.str();
  return res;
}

inline CriterionResult criterion_variance_decay() {
  CriterionResult res{10, "contrast variance decay in alpha_n (400 vs 100)"};
  const auto contrast = dividend_contrast();
  const std::size_t n = 10000;
  const SamplingScheme cell = SamplingScheme::hflt(n, kBeta);
  RngStream rng(777, 0);
  const IncrementVector inc = simulate_increments(kModel, cell, rng);
  const double theta = 5.0;

  auto variance_at = [&](std::size_t alpha) {
    std::vector<double> vals;
    for (std::uint64_t seed = 1; seed <= 100; ++seed) {
      RngStream perm_rng(seed, 42);
      QuasiEnsemble ens(inc, kModel.u0, cell.h, sample_permutation_set(cell.n, alpha, perm_rng));
      vals.push_back(empirical_expectation(ens, *contrast, std::span<const double>(&theta, 1)));
    }
    return sample_stats(vals).variance;
  };
  const double v100 = variance_at(100);
  const double v400 = variance_at(400);
  const double ratio = v400 / v100;
  res.passed = ratio >= 0.15 && ratio <= 0.5;
  std::ostringstream d;
  d << "var(alpha=100)=" << v100 << ", var(alpha=400)=" << v400 << ", ratio=" << ratio;
  res.detail = d.str();
  return res;
}

}  // namespace acceptance_detail

// Runs the ten acceptance criteria, printing one pass/fail line each.
inline std::vector<CriterionResult> run_acceptance(std::ostream& os) {
  namespace ad = acceptance_detail;
  using Check = CriterionResult (*)();
  const Check checks[] = {
      ad::criterion_exactness,     ad::criterion_increment_moments,
      ad::criterion_exhaustive_oracle, ad::criterion_functional_exactness,
      ad::criterion_derivatives,   ad::criterion_weak_convergence,
      ad::criterion_lp_trend,      ad::criterion_consistency,
      ad::criterion_normality,     ad::criterion_variance_decay};
  std::vector<CriterionResult> results;
  for (Check check : checks) {
    const auto start = std::chrono::steady_clock::now();
    CriterionResult r = check();
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    os << (r.passed ? "[PASS]" : "[FAIL]") << " criterion " << r.index << ": " << r.name << " ("
       << r.detail << ") [" << r.seconds << "s]\n";
    os.flush();
    results.push_back(std::move(r));
  }
  return results;
}

}  // namespace qproc
