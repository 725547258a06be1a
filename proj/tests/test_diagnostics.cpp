#include <cmath>
#include <vector>

#include "catch2/catch_amalgamated.hpp"
#include "qproc/diagnostics.hpp"
#include "qproc/levy.hpp"
#include "qproc/rng.hpp"

using namespace qproc;

namespace {
const JumpDiffusionModel kModel{0.0, 20.0, 10.0, 5.0, 3.0, -1};
}

TEST_CASE("sample summary and ecdf") {
  SampleSummary s({3.0, 1.0, 2.0});
  CHECK(s.samples() == std::vector<double>{1.0, 2.0, 3.0});
  CHECK(s.mean() == Catch::Approx(2.0));
  CHECK(s.ecdf(0.5) == 0.0);
  CHECK(s.ecdf(1.0) == Catch::Approx(1.0 / 3.0));
  CHECK(s.ecdf(2.5) == Catch::Approx(2.0 / 3.0));
  CHECK(s.ecdf(10.0) == 1.0);
  CHECK_THROWS_AS(SampleSummary({}), parameter_error);
}

TEST_CASE("KS statistic: trivial and null-distribution cases") {
  const std::vector<double> a{1.0, 2.0, 3.0};
  CHECK(ks_statistic(a, a) == 0.0);
  const std::vector<double> zeros(10, 0.0), ones(10, 1.0);
  CHECK(ks_statistic(zeros, ones) == 1.0);
  CHECK(ks_statistic(ones, zeros) == 1.0);  // symmetry
  CHECK_THROWS_AS(ks_statistic({}, a), parameter_error);

  // two-sample null at N=10^4: c(0.05) sqrt(2/N) ~ 0.0192
  RngStream rng(2, 0);
  std::vector<double> x(10000), y(10000);
  for (double& v : x) v = rng.normal();
  for (double& v : y) v = rng.normal();
  const double d = ks_statistic(x, y);
  CHECK(d < 0.03);
  CHECK(d > 0.0);
  CHECK(d == ks_statistic(y, x));
}

TEST_CASE("KDE: symmetry, normalization, normal-pdf recovery") {
  const auto two_point = kde(std::vector<double>{-1.0, 1.0});
  const std::size_t G = two_point.grid.size();
  for (std::size_t g = 0; g < G; ++g) {
    CHECK(two_point.grid[g] == Catch::Approx(-two_point.grid[G - 1 - g]).margin(1e-12));
    CHECK(two_point.density[g] == Catch::Approx(two_point.density[G - 1 - g]).margin(1e-12));
  }
  CHECK(two_point.integral() == Catch::Approx(1.0).margin(1e-3));

  RngStream rng(8, 0);
  std::vector<double> x(100000);
  for (double& v : x) v = rng.normal();
  const auto est = kde(x);
  CHECK(est.integral() == Catch::Approx(1.0).margin(1e-3));
  double worst = 0.0;
  for (std::size_t g = 0; g < est.grid.size(); ++g) {
    const double z = est.grid[g];
    const double pdf = std::exp(-0.5 * z * z) / std::sqrt(2.0 * M_PI);
    worst = std::max(worst, std::abs(est.density[g] - pdf));
  }
  CHECK(worst <= 0.02);
  CHECK_THROWS_AS(kde(std::vector<double>{1.0}), parameter_error);
}

TEST_CASE("KDE bandwidth override is honored") {
  const std::vector<double> x{0.0, 1.0, 2.0, 3.0};
  KdeOptions opts;
  opts.bandwidth = 0.7;
  CHECK(kde(x, opts).bandwidth == 0.7);
  CHECK(kde(x).bandwidth == Catch::Approx(silverman_bandwidth(x)));
}

TEST_CASE("quasi_marginal_distance: degenerate model and trend cell") {
  // sigma = 0, lambda = 0: every path (and the exact marginal) deterministic
  const JumpDiffusionModel det{0.0, 2.0, 0.0, 0.0, 1.0, -1};
  CHECK(quasi_marginal_distance(det, SamplingScheme{10, 0.5}, 1.0, 50, 50, 1, 2) == 0.0);

  // finer sampling brings the quasi marginal closer to the true law
  const double coarse = quasi_marginal_distance(kModel, SamplingScheme{10, 1.0}, 1.0, 400, 400, 3, 4);
  const double fine =
      quasi_marginal_distance(kModel, SamplingScheme{4000, 0.01}, 1.0, 400, 400, 3, 4);
  CHECK(fine < coarse);

  CHECK_THROWS_AS(quasi_marginal_distance(kModel, SamplingScheme{10, 1.0}, 11.0, 5, 5, 1, 2),
                  parameter_error);
  CHECK_THROWS_AS(quasi_marginal_distance(kModel, SamplingScheme{10, 1.0}, 1.0, 0, 5, 1, 2),
                  parameter_error);
}

TEST_CASE("quasi_ruin_distance runs and is small for a degenerate model") {
  const JumpDiffusionModel det{5.0, -1.0, 0.0, 0.0, 1.0, -1};
  CHECK(quasi_ruin_distance(det, SamplingScheme{20, 0.5}, 0.0, 30, 30, 1, 2) == 0.0);
  const double d = quasi_ruin_distance(kModel, SamplingScheme{50, 0.2}, -5.0, 100, 100, 1, 2);
  CHECK(d >= 0.0);
  CHECK(d <= 1.0);
}

TEST_CASE("lp_increment_distance: terminal invariance and trivial cases") {
  const SamplingScheme s{50, 0.1};
  CHECK(lp_increment_distance(kModel, s, 50, 2.0, 30, 9) == 0.0);  // k = n
  CHECK(lp_increment_distance(kModel, SamplingScheme{1, 0.1}, 1, 2.0, 10, 9) == 0.0);  // n = 1
  const double d = lp_increment_distance(kModel, s, 10, 2.0, 50, 9);
  CHECK(d > 0.0);
  CHECK_THROWS_AS(lp_increment_distance(kModel, s, 51, 2.0, 10, 9), parameter_error);
  CHECK_THROWS_AS(lp_increment_distance(kModel, s, 10, 0.5, 10, 9), parameter_error);
  CHECK_THROWS_AS(lp_increment_distance(kModel, s, 10, 2.0, 0, 9), parameter_error);
}

TEST_CASE("lp_increment_distance matches the closed-form second moment") {
  // With shared increments and a uniform permutation,
  // E|X_hat_{t_k} - X_{t_k}|^2 = 2 k (n-k)/n * Var(increment).
  const JumpDiffusionModel bm{0.0, 0.0, 1.0, 0.0, 1.0, -1};  // pure BM, Var = h
  const SamplingScheme s{20, 0.5};
  const std::size_t k = 5;
  const double expected = std::sqrt(2.0 * 5.0 * 15.0 / 20.0 * 0.5);
  std::vector<double> reps;
  for (std::uint64_t seed = 0; seed < 40; ++seed)
    reps.push_back(lp_increment_distance(bm, s, k, 2.0, 50, seed));
  double mean2 = 0.0;
  for (double r : reps) mean2 += r * r;
  mean2 /= static_cast<double>(reps.size());
  CHECK(std::sqrt(mean2) == Catch::Approx(expected).epsilon(0.1));
}
