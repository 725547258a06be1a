#include <cmath>
#include <functional>
#include <memory>
#include <vector>

#include "catch2/catch_amalgamated.hpp"
#include "qproc/functional.hpp"
#include "qproc/levy.hpp"
#include "qproc/path.hpp"
#include "qproc/rng.hpp"

using namespace qproc;

namespace {

const JumpDiffusionModel kModel{0.0, 20.0, 10.0, 5.0, 3.0, -1};

double simpson_rec(const std::function<double(double)>& f, double a, double b, double whole,
                   double eps, int depth) {
  const double m = 0.5 * (a + b);
  auto s = [&](double lo, double hi) {
    return (hi - lo) / 6.0 * (f(lo) + 4.0 * f(0.5 * (lo + hi)) + f(hi));
  };
  const double left = s(a, m), right = s(m, b);
  if (depth <= 0 || std::abs(left + right - whole) <= 15.0 * eps)
    return left + right + (left + right - whole) / 15.0;
  return simpson_rec(f, a, m, left, 0.5 * eps, depth - 1) +
         simpson_rec(f, m, b, right, 0.5 * eps, depth - 1);
}

double adaptive_simpson(const std::function<double(double)>& f, double a, double b, double eps) {
  auto s = [&](double lo, double hi) {
    return (hi - lo) / 6.0 * (f(lo) + 4.0 * f(0.5 * (lo + hi)) + f(hi));
  };
  return simpson_rec(f, a, b, s(a, b), eps, 40);
}

// U == 1, theta-free; closed-form discounted integral for checks.
class UnitKernel : public PayoffKernel {
 public:
  std::size_t theta_dim() const override { return 1; }
  bool time_dependent() const override { return false; }
  double sup_abs() const override { return 1.0; }
  double value(double, double, std::span<const double>) const override { return 1.0; }
  bool differentiable() const override { return true; }
  void grad(double, double, std::span<const double>, std::span<double> out) const override {
    out[0] = 0.0;
  }
  void hess(double, double, std::span<const double>, std::span<double> out) const override {
    out[0] = 0.0;
  }
};

// d=2 kernel with an intentionally asymmetric raw Hessian fill; the
// functional must symmetrize the integrated matrix.
class TwoParamKernel : public PayoffKernel {
 public:
  std::size_t theta_dim() const override { return 2; }
  bool time_dependent() const override { return false; }
  double sup_abs() const override { return 100.0; }
  double value(double, double x, std::span<const double> th) const override {
    return th[0] * th[1] * x;
  }
  bool differentiable() const override { return true; }
  void grad(double, double x, std::span<const double> th, std::span<double> out) const override {
    out[0] = th[1] * x;
    out[1] = th[0] * x;
  }
  void hess(double, double x, std::span<const double>, std::span<double> out) const override {
    out[0] = 0.0;
    out[1] = x + 1e-13;  // asymmetric perturbation
    out[2] = x;
    out[3] = 0.0;
  }
};

}  // namespace

TEST_CASE("mollifier boundary, midpoint and monotonicity") {
  const Mollifier phi(0.1);
  CHECK(phi(1.1, 1.0) == 1.0);
  CHECK(phi(0.9, 1.0) == Catch::Approx(0.0).margin(1e-12));  // 0.9-1.0+0.1 != 0 in FP
  CHECK(phi(1.0, 1.0) == Catch::Approx(0.5));
  CHECK(phi(5.0, 1.0) == 1.0);
  CHECK(phi(-5.0, 1.0) == 0.0);
  double prev = -1.0;
  for (double u = 0.85; u <= 1.15; u += 0.001) {
    const double v = phi(u, 1.0);
    CHECK(v >= prev);
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
    prev = v;
  }
  CHECK_THROWS_AS(Mollifier(0.0), parameter_error);
}

TEST_CASE("mollifier sandwich: indicator bounds") {
  const Mollifier phi(0.25);
  RngStream rng(4, 0);
  for (int i = 0; i < 1000; ++i) {
    const double u = 4.0 * rng.uniform() - 2.0, z = 4.0 * rng.uniform() - 2.0;
    const double v = phi(u, z);
    if (u >= z + 0.25) CHECK(v == 1.0);
    if (u <= z - 0.25) CHECK(v == 0.0);
    CHECK(v <= (u > z - 0.25 ? 1.0 : 0.0));
    CHECK(v >= (u >= z + 0.25 ? 1.0 : 0.0));
  }
}

TEST_CASE("mollifier partial derivatives match finite differences") {
  RngStream rng(9, 0);
  for (int i = 0; i < 200; ++i) {
    const double eps = 0.05 + 0.3 * rng.uniform();
    const Mollifier phi(eps);
    const double u = 2.0 * rng.uniform() - 1.0, z = 2.0 * rng.uniform() - 1.0;
    const double s = 1e-6 * eps;
    const double du_fd = (phi(u + s, z) - phi(u - s, z)) / (2.0 * s);
    const double dz_fd = (phi(u, z + s) - phi(u, z - s)) / (2.0 * s);
    CHECK(phi.du(u, z) == Catch::Approx(du_fd).margin(1e-6 / eps));
    CHECK(phi.dz(u, z) == Catch::Approx(dz_fd).margin(1e-6 / eps));
    const double duu_fd = (phi.du(u + s, z) - phi.du(u - s, z)) / (2.0 * s);
    CHECK(phi.duu(u, z) == Catch::Approx(duu_fd).margin(1e-5 / (eps * eps)));
    CHECK(phi.duz(u, z) == -phi.duu(u, z));
    CHECK(phi.dzz(u, z) == phi.duu(u, z));
  }
}

TEST_CASE("unit kernel: closed form (1 - e^{-rT})/r without ruin") {
  const double r = 0.5;
  DiscountedLossFunctional f(std::make_shared<UnitKernel>(), r, -100.0);
  const SteppedPath p(0.0, 0.5, {0.0, 1.0, 2.0, 1.0, 3.0});
  const double theta = 0.0;
  const double T = p.horizon();
  CHECK(f.evaluate(p, std::span<const double>(&theta, 1)) ==
        Catch::Approx((1.0 - std::exp(-r * T)) / r).epsilon(1e-12));
  // zero gradient for a theta-free kernel
  double g = 1.0;
  f.gradient(p, std::span<const double>(&theta, 1), std::span<double>(&g, 1));
  CHECK(g == 0.0);
}

TEST_CASE("ruin at t=0 gives an empty integral") {
  DiscountedLossFunctional f(std::make_shared<UnitKernel>(), 0.5, 0.0);
  const SteppedPath p(-1.0, 1.0, {-1.0, 5.0, 5.0});
  const double theta = 0.0;
  CHECK(f.evaluate(p, std::span<const double>(&theta, 1)) == 0.0);
}

TEST_CASE("integration stops at the ruin time") {
  const double r = 0.5;
  DiscountedLossFunctional f(std::make_shared<UnitKernel>(), r, 0.0);
  const SteppedPath p(1.0, 1.0, {1.0, 2.0, -1.0, 3.0});  // ruins at t=2
  const double theta = 0.0;
  CHECK(f.evaluate(p, std::span<const double>(&theta, 1)) ==
        Catch::Approx((1.0 - std::exp(-r * 2.0)) / r).epsilon(1e-12));
}

TEST_CASE("dividend on a hand-built 4-step path matches adaptive quadrature") {
  const DividendFunctional f(1.0, 0.1, 1.0, 0.5, -20.0, 0.0, 10.0);
  const auto& kernel = f.kernel();
  const SteppedPath p(0.0, 0.7, {0.0, 2.5, 2.45, 2.55, 1.0});
  for (double theta : {0.5, 2.5, 2.52, 9.0}) {
    const double lib = f.evaluate(p, std::span<const double>(&theta, 1));
    double ref = 0.0;
    const double stop = std::min(ruin_time(p, -20.0), p.horizon());
    for (std::size_t k = 1; k <= p.n_increments(); ++k) {
      const double t0 = (k - 1) * p.h(), t1 = std::min(k * p.h(), stop);
      if (t1 <= t0) break;
      const double x = p[k - 1];
      ref += adaptive_simpson(
          [&](double t) {
            return std::exp(-0.5 * t) * kernel.value(t, x, std::span<const double>(&theta, 1));
          },
          t0, t1, 1e-12);
    }
    CHECK(lib == Catch::Approx(ref).margin(1e-10));
  }
}

TEST_CASE("dividend gradient and Hessian match finite differences") {
  const DividendFunctional f(1.0, 0.1, 1.0, 0.5, -20.0, 0.0, 10.0);
  RngStream rng(14, 0);
  double worst_g = 0.0, worst_h = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    IncrementVector inc(30);
    for (double& d : inc) d = simulate_one_increment(kModel, 0.1, rng);
    const SteppedPath p = from_increments(-2.0 + 4.0 * rng.uniform(), 0.1, inc);
    const double theta = 0.3 + 9.4 * rng.uniform();
    auto value = [&](double th) { return f.evaluate(p, std::span<const double>(&th, 1)); };
    auto grad = [&](double th) {
      double g = 0.0;
      f.gradient(p, std::span<const double>(&th, 1), std::span<double>(&g, 1));
      return g;
    };
    double hess = 0.0;
    f.hessian(p, std::span<const double>(&theta, 1), std::span<double>(&hess, 1));
    const double sg = 1e-5, sh = 3e-5;
    const double gfd = (value(theta + sg) - value(theta - sg)) / (2.0 * sg);
    const double hfd = (grad(theta + sh) - grad(theta - sh)) / (2.0 * sh);
    worst_g = std::max(worst_g, std::abs(grad(theta) - gfd) / std::max(1.0, std::abs(gfd)));
    worst_h = std::max(worst_h, std::abs(hess - hfd) / std::max(1.0, std::abs(hfd)));
  }
  CHECK(worst_g <= 1e-5);
  CHECK(worst_h <= 1e-5);
}

TEST_CASE("integrated Hessian is exactly symmetric for a d=2 kernel") {
  DiscountedLossFunctional f(std::make_shared<TwoParamKernel>(), 1.0, -100.0);
  const SteppedPath p(0.0, 0.5, {0.0, 1.0, 2.0, 0.5});
  const std::vector<double> theta{1.0, 2.0};
  std::vector<double> h(4);
  f.hessian(p, theta, h);
  CHECK(h[1] == h[2]);
}

TEST_CASE("boundedness: |h| <= sup|U|/r") {
  const DividendFunctional f(1.0, 0.1, 1.0, 0.5, -20.0, 0.0, 10.0);
  RngStream rng(15, 0);
  for (int trial = 0; trial < 30; ++trial) {
    IncrementVector inc(40);
    for (double& d : inc) d = simulate_one_increment(kModel, 0.2, rng);
    const SteppedPath p = from_increments(0.0, 0.2, inc);
    const double theta = 10.0 * rng.uniform();
    CHECK(std::abs(f.evaluate(p, std::span<const double>(&theta, 1))) <= 1.0 / 0.5 + 1e-12);
  }
  CHECK(f.tail_bound(10.0) == Catch::Approx(std::exp(-5.0) / 0.5));
}

TEST_CASE("epsilon-consistency with the indicator dividend") {
  const double eps = 0.1, r = 0.5, c = 1.0, alpha = 1.0, xi = -20.0;
  const DividendFunctional f(alpha, eps, c, r, xi, 0.0, 10.0);

  auto indicator_dividend = [&](const SteppedPath& p, double theta) {
    const double stop = std::min({ruin_time(p, xi), c * theta, p.horizon()});
    double acc = 0.0;
    for (std::size_t k = 1; k <= p.n_increments(); ++k) {
      const double t0 = (k - 1) * p.h(), t1 = std::min(k * p.h(), stop);
      if (t1 <= t0) break;
      if (p[k - 1] >= theta) acc += alpha * (std::exp(-r * t0) - std::exp(-r * t1)) / r;
    }
    return acc;
  };

  // values and maturity away from both mollifier bands: exact agreement
  {
    const SteppedPath p(0.0, 0.5, {0.0, 5.0, 6.0, 5.5, 7.0});  // T = 2
    const double theta = 3.0;  // c(theta - eps) = 2.9 > T; values >= theta + eps or start
    CHECK(f.evaluate(p, std::span<const double>(&theta, 1)) ==
          Catch::Approx(indicator_dividend(p, theta)).margin(1e-14));
  }
  // in general the gap is bounded by alpha/r times the time in the bands
  {
    RngStream rng(16, 0);
    for (int trial = 0; trial < 20; ++trial) {
      IncrementVector inc(30);
      for (double& d : inc) d = simulate_one_increment(kModel, 0.1, rng);
      const SteppedPath p = from_increments(0.0, 0.1, inc);
      const double theta = 0.5 + 2.0 * rng.uniform();
      double band_time = 0.0;
      const std::size_t kstop =
          std::min<std::size_t>(p.n_increments(),
                                static_cast<std::size_t>(std::ceil(ruin_time(p, xi) / p.h())));
      for (std::size_t k = 1; k <= kstop; ++k)
        if (std::abs(p[k - 1] - theta) < eps) band_time += p.h();
      band_time += 2.0 * eps * c;  // maturity mollifier band
      const double gap = std::abs(f.evaluate(p, std::span<const double>(&theta, 1)) -
                                  indicator_dividend(p, theta));
      CHECK(gap <= alpha * band_time + 1e-12);
    }
  }
}

TEST_CASE("dividend theta domain and dimension errors") {
  const DividendFunctional f(1.0, 0.1, 1.0, 0.5, -20.0, 0.0, 10.0);
  const SteppedPath p(0.0, 1.0, {0.0, 1.0});
  const double bad = 11.0;
  CHECK_THROWS_AS(f.evaluate(p, std::span<const double>(&bad, 1)), domain_error);
  const std::vector<double> wrong{1.0, 2.0};
  CHECK_THROWS_AS(f.evaluate(p, wrong), parameter_error);
  CHECK_THROWS_AS(DividendFunctional(0.0, 0.1, 1.0, 0.5, -20.0, 0.0, 10.0), parameter_error);
  CHECK_THROWS_AS(DividendFunctional(1.0, 0.1, 1.0, 0.5, -20.0, 5.0, 5.0), parameter_error);
}

TEST_CASE("max_relevant_time reflects the maturity cutoff") {
  const DividendFunctional f(1.0, 0.1, 2.0, 0.5, -20.0, 0.0, 10.0);
  const std::vector<double> lo{1.0}, hi{4.0};
  CHECK(f.max_relevant_time(lo, hi) == Catch::Approx(2.0 * 4.1));
}

TEST_CASE("perpetual put payoff cases") {
  const PerpetualPutFunctional put(0.5, 3.0);
  const double theta = 0.0;
  const std::span<const double> th(&theta, 1);
  // ruin at t=2, value there -1: payoff e^{-1} * (3 - (-1))
  const SteppedPath p(1.0, 1.0, {1.0, 2.0, -1.0, 5.0});
  CHECK(put.evaluate(p, th) == Catch::Approx(std::exp(-1.0) * 4.0));
  // no ruin: 1_{tau < T} kills the payoff
  const SteppedPath safe(1.0, 1.0, {1.0, 2.0, 3.0});
  CHECK(put.evaluate(safe, th) == 0.0);
  // ruined at start: pays (K - x_0)+ undiscounted
  const SteppedPath sunk(-1.0, 1.0, {-1.0, 4.0});
  CHECK(put.evaluate(sunk, th) == 4.0);
  CHECK(!put.has_derivatives());
  double g = 0.0;
  CHECK_THROWS_AS(put.gradient(p, th, std::span<double>(&g, 1)), unsupported_operation);
  CHECK(put.tail_bound(10.0) == Catch::Approx(3.0 * std::exp(-5.0)));
}

TEST_CASE("negated functional flips value and derivatives, keeps structure") {
  auto inner = std::make_shared<DividendFunctional>(1.0, 0.1, 1.0, 0.5, -20.0, 0.0, 10.0);
  const NegatedFunctional neg(inner);
  const SteppedPath p(0.0, 0.5, {0.0, 3.0, 2.0, 4.0});
  const double theta = 2.0;
  const std::span<const double> th(&theta, 1);
  CHECK(neg.evaluate(p, th) == -inner->evaluate(p, th));
  double g1 = 0.0, g2 = 0.0;
  inner->gradient(p, th, std::span<double>(&g1, 1));
  neg.gradient(p, th, std::span<double>(&g2, 1));
  CHECK(g2 == -g1);
  REQUIRE(neg.dividend_structure() != nullptr);
  CHECK(neg.dividend_structure()->sign == -1.0);
  CHECK(inner->dividend_structure()->sign == 1.0);
}

TEST_CASE("Lipschitz bound in (ruin time, sup distance), calibrated then tested") {
  const DividendFunctional f(1.0, 0.1, 1.0, 0.5, -2.0, 0.0, 10.0);
  const double theta = 2.0;
  const std::span<const double> th(&theta, 1);
  RngStream rng(23, 0);
  auto random_pair = [&](double& dh, double& bound) {
    IncrementVector inc(40);
    for (double& d : inc) d = simulate_one_increment(kModel, 0.1, rng);
    IncrementVector inc2(inc);
    for (double& d : inc2) d += 0.05 * rng.normal();
    const SteppedPath a = from_increments(0.0, 0.1, inc);
    const SteppedPath b = from_increments(0.0, 0.1, inc2);
    dh = std::abs(f.evaluate(a, th) - f.evaluate(b, th));
    bound = std::abs(ruin_time(a, -2.0) - ruin_time(b, -2.0)) + sup_distance(a, b);
  };
  double C = 0.0;
  for (int i = 0; i < 100; ++i) {
    double dh, bound;
    random_pair(dh, bound);
    if (bound > 0.0) C = std::max(C, dh / bound);
  }
  for (int i = 0; i < 100; ++i) {
    double dh, bound;
    random_pair(dh, bound);
    CHECK(dh <= 2.0 * C * bound + 1e-12);
  }
}
