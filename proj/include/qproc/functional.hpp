#pragma once

#include <algorithm>
#include <cassert>
#include <cmath>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "qproc/errors.hpp"
#include "qproc/numerics.hpp"
#include "qproc/path.hpp"

namespace qproc {

// ---------------------------------------------------------------------------
// Mollifier: C^2 surrogate for the indicator 1_{u >= z}
// ---------------------------------------------------------------------------

// Quintic smoothstep in s = clamp((u - z + eps)/(2 eps), 0, 1):
//   phi = 6 s^5 - 15 s^4 + 10 s^3,
// exactly 1 for u >= z + eps, exactly 0 for u <= z - eps, and C^2 across the
// clamp boundaries (phi' and phi'' vanish at s = 0, 1).
struct Mollifier {
  double epsilon;

  explicit Mollifier(double eps) : epsilon(eps) {
    if (!(eps > 0.0)) throw parameter_error("Mollifier: epsilon must be > 0");
  }

  double operator()(double u, double z) const {
    const double s = clamped_s(u, z);
    return s * s * s * (10.0 + s * (-15.0 + 6.0 * s));
  }

  double du(double u, double z) const {
    const double s = clamped_s(u, z);
    const double sm = s * (1.0 - s);
    return 30.0 * sm * sm / (2.0 * epsilon);
  }
  double dz(double u, double z) const { return -du(u, z); }

  double duu(double u, double z) const {
    const double s = clamped_s(u, z);
    return 60.0 * s * (1.0 + s * (-3.0 + 2.0 * s)) / (4.0 * epsilon * epsilon);
  }
  double dzz(double u, double z) const { return duu(u, z); }
  double duz(double u, double z) const { return -duu(u, z); }

 private:
  double clamped_s(double u, double z) const {
    return std::clamp((u - z + epsilon) / (2.0 * epsilon), 0.0, 1.0);
  }
};

// Integral of e^{-rt} phi_eps(theta, t/c) over [t0, t1], split at the
// mollifier's C^2 joins t = c(theta -+ eps) so each GL8 piece is smooth.
// Pieces where the mollifier vanishes contribute exactly zero and are skipped.
inline double discounted_time_mollifier_integral(const Mollifier& phi, double r, double c,
                                                 double theta, double t0, double t1) {
  const double b0 = c * (theta - phi.epsilon);
  const double b1 = c * (theta + phi.epsilon);
  const double cuts[4] = {t0, std::clamp(b0, t0, t1), std::clamp(b1, t0, t1), t1};
  double out = 0.0;
  for (int i = 0; i < 3; ++i) {
    const double a = cuts[i], b = cuts[i + 1];
    if (b <= a || a >= b1) continue;
    out += GaussLegendre8::integrate(
        [&](double t) { return std::exp(-r * t) * phi(theta, t / c); }, a, b);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Path functionals h_theta
// ---------------------------------------------------------------------------

// Parameters of a (possibly sign-flipped) mollified dividend functional,
// exposed so that bulk evaluators can exploit its product structure.
struct DividendStructure {
  double sign = 1.0;   // functional value = sign * alpha * integral(...)
  double alpha = 1.0;  // dividend rate
  double r = 1.0;      // discount rate
  double xi = 0.0;     // ruin level
  double epsilon = 0.1;
  double maturity_scale = 1.0;  // c in g(theta) = c*theta
  double theta_min = 0.0;
  double theta_max = 1.0;
};

class PathFunctional {
 public:
  virtual ~PathFunctional() = default;

  virtual std::size_t theta_dim() const = 0;
  virtual double evaluate(const SteppedPath& path, std::span<const double> theta) const = 0;

  virtual bool has_derivatives() const { return false; }
  virtual void gradient(const SteppedPath&, std::span<const double>, std::span<double>) const {
    throw unsupported_operation("functional has no theta-gradient");
  }
  // Row-major d x d; symmetric.
  virtual void hessian(const SteppedPath&, std::span<const double>, std::span<double>) const {
    throw unsupported_operation("functional has no theta-Hessian");
  }

  // Largest time the functional can depend on, over the given theta box.
  // Evaluators may materialize path prefixes up to this time only.
  virtual double max_relevant_time(std::span<const double>, std::span<const double>) const {
    return std::numeric_limits<double>::infinity();
  }

  // Non-null when the functional is (a sign multiple of) the mollified
  // dividend; enables the transposed bulk evaluation in the oracle.
  virtual const DividendStructure* dividend_structure() const { return nullptr; }

 protected:
  void check_theta(std::span<const double> theta) const {
    if (theta.size() != theta_dim()) throw parameter_error("theta has wrong dimension");
    for (double v : theta)
      if (!std::isfinite(v)) throw domain_error("theta is not finite");
  }
};

// ---------------------------------------------------------------------------
// Discounted loss up to ruin: h_theta(x) = int_0^tau e^{-rt} U_theta(t, x_t) dt
// ---------------------------------------------------------------------------

// Payoff kernel U_theta(t, x) with theta-derivatives up to order 2 where
// defined. |U| must be uniformly bounded by sup_abs().
class PayoffKernel {
 public:
  virtual ~PayoffKernel() = default;
  virtual std::size_t theta_dim() const = 0;
  virtual bool time_dependent() const = 0;
  virtual double sup_abs() const = 0;
  virtual double value(double t, double x, std::span<const double> theta) const = 0;

  virtual bool differentiable() const { return false; }
  virtual void grad(double, double, std::span<const double>, std::span<double>) const {
    throw unsupported_operation("kernel has no theta-gradient");
  }
  virtual void hess(double, double, std::span<const double>, std::span<double>) const {
    throw unsupported_operation("kernel has no theta-Hessian");
  }

  // U_theta(t, .) == 0 for all t >= cutoff; +inf when no such time is known.
  virtual double time_cutoff(std::span<const double>) const {
    return std::numeric_limits<double>::infinity();
  }

  // Times where t -> U_theta(t, .) loses smoothness; segment quadrature is
  // split there so each piece is smooth.
  virtual void time_breakpoints(std::span<const double>, std::vector<double>&) const {}
};

class DiscountedLossFunctional : public PathFunctional {
 public:
  DiscountedLossFunctional(std::shared_ptr<const PayoffKernel> kernel, double r, double xi)
      : kernel_(std::move(kernel)), r_(r), xi_(xi) {
    if (!(r_ > 0.0)) throw parameter_error("discounted loss: r must be > 0");
  }

  std::size_t theta_dim() const override { return kernel_->theta_dim(); }
  double discount_rate() const { return r_; }
  double ruin_level() const { return xi_; }
  const PayoffKernel& kernel() const { return *kernel_; }

  // Truncation error of cutting the horizon at T (infinite-horizon tail).
  double tail_bound(double T) const { return kernel_->sup_abs() * std::exp(-r_ * T) / r_; }

  double evaluate(const SteppedPath& path, std::span<const double> theta) const override {
    check_theta(theta);
    const double value = integrate(path, theta, [&](double t, double x, std::span<double>) {
      return kernel_->value(t, x, theta);
    });
    assert(std::abs(value) <= kernel_->sup_abs() / r_ * (1.0 + 1e-12));
    return value;
  }

  bool has_derivatives() const override { return kernel_->differentiable(); }

  void gradient(const SteppedPath& path, std::span<const double> theta,
                std::span<double> out) const override {
    check_theta(theta);
    if (!kernel_->differentiable())
      throw unsupported_operation("kernel has no theta-gradient");
    integrate_vector(path, theta, out,
                     [&](double t, double x, std::span<double> buf) { kernel_->grad(t, x, theta, buf); });
  }

  void hessian(const SteppedPath& path, std::span<const double> theta,
               std::span<double> out) const override {
    check_theta(theta);
    if (!kernel_->differentiable())
      throw unsupported_operation("kernel has no theta-Hessian");
    integrate_vector(path, theta, out,
                     [&](double t, double x, std::span<double> buf) { kernel_->hess(t, x, theta, buf); });
    // enforce exact symmetry of the integrated Hessian
    const std::size_t d = theta_dim();
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = i + 1; j < d; ++j) {
        const double s = 0.5 * (out[i * d + j] + out[j * d + i]);
        out[i * d + j] = out[j * d + i] = s;
      }
  }

  double max_relevant_time(std::span<const double> lo,
                           std::span<const double> hi) const override {
    double cut = std::max(kernel_->time_cutoff(lo), kernel_->time_cutoff(hi));
    return cut;
  }

 private:
  // Piecewise integration of e^{-rt} f(t, x_t) over [0, tau ^ cutoff): the
  // path is constant on each segment, so time-independent kernels integrate
  // in closed form and time-dependent ones use fixed-order Gauss-Legendre.
  template <class ScalarF>
  double integrate(const SteppedPath& path, std::span<const double> theta, ScalarF&& f) const {
    double out = 0.0;
    integrate_impl(path, theta, std::span<double>(&out, 1),
                   [&](double t, double x, std::span<double> buf) { buf[0] = f(t, x, buf); });
    return out;
  }

  template <class VecF>
  void integrate_vector(const SteppedPath& path, std::span<const double> theta,
                        std::span<double> out, VecF&& f) const {
    integrate_impl(path, theta, out, std::forward<VecF>(f));
  }

  template <class VecF>
  void integrate_impl(const SteppedPath& path, std::span<const double> theta,
                      std::span<double> out, VecF&& fill) const {
    std::fill(out.begin(), out.end(), 0.0);
    const std::size_t ridx = ruin_index(path, xi_);
    if (ridx == 0) return;  // ruined at t = 0: empty integral
    const double h = path.h();
    const double cutoff = kernel_->time_cutoff(theta);
    const std::size_t n = path.n_increments();
    std::vector<double> buf(out.size());
    const bool tdep = kernel_->time_dependent();
    std::vector<double> brk;
    if (tdep) {
      kernel_->time_breakpoints(theta, brk);
      std::sort(brk.begin(), brk.end());
    }
    for (std::size_t k = 1; k <= n && k <= ridx; ++k) {
      const double t0 = static_cast<double>(k - 1) * h;
      if (t0 >= cutoff) break;
      const double t1 = static_cast<double>(k) * h;
      const double x = path[k - 1];
      if (!tdep) {
        const double w = (std::exp(-r_ * t0) - std::exp(-r_ * t1)) / r_;
        fill(t0, x, buf);
        for (std::size_t i = 0; i < out.size(); ++i) out[i] += w * buf[i];
      } else {
        // GL8 on each smooth piece: split at kernel breakpoints inside the segment
        auto gl8_piece = [&](double a, double b) {
          const double mid = 0.5 * (a + b);
          const double half = 0.5 * (b - a);
          for (std::size_t q = 0; q < 8; ++q) {
            const double t = mid + half * GaussLegendre8::nodes[q];
            const double w = GaussLegendre8::weights[q] * half * std::exp(-r_ * t);
            fill(t, x, buf);
            for (std::size_t i = 0; i < out.size(); ++i) out[i] += w * buf[i];
          }
        };
        double a = t0;
        for (double b : brk)
          if (b > a && b < t1) {
            gl8_piece(a, b);
            a = b;
          }
        gl8_piece(a, t1);
      }
    }
  }

  std::shared_ptr<const PayoffKernel> kernel_;
  double r_;
  double xi_;
};

// ---------------------------------------------------------------------------
// Mollified dividend kernel: U_theta(t,x) = alpha phi_eps(x,theta) phi_eps(theta, t/c)
// ---------------------------------------------------------------------------

class DividendKernel : public PayoffKernel {
 public:
  DividendKernel(double alpha, double epsilon, double maturity_scale, double theta_min,
                 double theta_max)
      : alpha_(alpha),
        phi_(epsilon),
        c_(maturity_scale),
        theta_min_(theta_min),
        theta_max_(theta_max) {
    if (!(alpha > 0.0)) throw parameter_error("dividend: alpha must be > 0");
    if (!(c_ > 0.0)) throw parameter_error("dividend: maturity scale must be > 0");
    if (!(theta_min_ < theta_max_)) throw parameter_error("dividend: empty theta interval");
  }

  std::size_t theta_dim() const override { return 1; }
  bool time_dependent() const override { return true; }
  double sup_abs() const override { return alpha_; }
  bool differentiable() const override { return true; }

  double alpha() const { return alpha_; }
  double epsilon() const { return phi_.epsilon; }
  double maturity_scale() const { return c_; }
  double theta_min() const { return theta_min_; }
  double theta_max() const { return theta_max_; }

  double value(double t, double x, std::span<const double> theta) const override {
    const double th = check(theta);
    return alpha_ * phi_(x, th) * phi_(th, t / c_);
  }

  void grad(double t, double x, std::span<const double> theta,
            std::span<double> out) const override {
    const double th = check(theta);
    const double g = t / c_;
    out[0] = alpha_ * (phi_.dz(x, th) * phi_(th, g) + phi_(x, th) * phi_.du(th, g));
  }

  void hess(double t, double x, std::span<const double> theta,
            std::span<double> out) const override {
    const double th = check(theta);
    const double g = t / c_;
    out[0] = alpha_ * (phi_.dzz(x, th) * phi_(th, g) + 2.0 * phi_.dz(x, th) * phi_.du(th, g) +
                       phi_(x, th) * phi_.duu(th, g));
  }

  // phi_eps(theta, t/c) == 0 once t/c >= theta + eps.
  double time_cutoff(std::span<const double> theta) const override {
    return c_ * (theta[0] + phi_.epsilon);
  }

  // C^2 joins of the time mollifier at t/c = theta -+ eps.
  void time_breakpoints(std::span<const double> theta, std::vector<double>& out) const override {
    out.push_back(c_ * (theta[0] - phi_.epsilon));
    out.push_back(c_ * (theta[0] + phi_.epsilon));
  }

 private:
  double check(std::span<const double> theta) const {
    const double th = theta[0];
    if (th < theta_min_ || th > theta_max_)
      throw domain_error("dividend: theta outside [theta_min, theta_max]");
    return th;
  }

  double alpha_;
  Mollifier phi_;
  double c_;
  double theta_min_;
  double theta_max_;
};

class DividendFunctional : public DiscountedLossFunctional {
 public:
  DividendFunctional(double alpha, double epsilon, double maturity_scale, double r, double xi,
                     double theta_min, double theta_max)
      : DiscountedLossFunctional(
            std::make_shared<DividendKernel>(alpha, epsilon, maturity_scale, theta_min, theta_max),
            r, xi) {
    structure_.sign = 1.0;
    structure_.alpha = alpha;
    structure_.r = r;
    structure_.xi = xi;
    structure_.epsilon = epsilon;
    structure_.maturity_scale = maturity_scale;
    structure_.theta_min = theta_min;
    structure_.theta_max = theta_max;
  }

  const DividendStructure* dividend_structure() const override { return &structure_; }

 private:
  DividendStructure structure_;
};

// ---------------------------------------------------------------------------
// Truncated perpetual American put: e^{-r tau}(K - x_tau)_+ 1_{tau < T}
// ---------------------------------------------------------------------------

class PerpetualPutFunctional : public PathFunctional {
 public:
  PerpetualPutFunctional(double r, double strike) : r_(r), strike_(strike) {
    if (!(r > 0.0)) throw parameter_error("perpetual put: r must be > 0");
    if (!(strike > 0.0)) throw parameter_error("perpetual put: strike must be > 0");
  }

  std::size_t theta_dim() const override { return 1; }

  double evaluate(const SteppedPath& path, std::span<const double> theta) const override {
    check_theta(theta);
    const double tau = ruin_time(path, theta[0]);
    if (tau >= path.horizon()) return 0.0;  // 1_{tau < T}
    const double payoff = std::max(strike_ - path.value_at(tau), 0.0);
    return std::exp(-r_ * tau) * payoff;
  }

  double tail_bound(double T) const { return strike_ * std::exp(-r_ * T); }

 private:
  double r_;
  double strike_;
};

// ---------------------------------------------------------------------------
// Sign flip (turns a maximization target into a contrast to minimize)
// ---------------------------------------------------------------------------

class NegatedFunctional : public PathFunctional {
 public:
  explicit NegatedFunctional(std::shared_ptr<const PathFunctional> inner)
      : inner_(std::move(inner)) {
    if (const auto* s = inner_->dividend_structure()) {
      structure_ = *s;
      structure_->sign = -structure_->sign;
    }
  }

  std::size_t theta_dim() const override { return inner_->theta_dim(); }
  double evaluate(const SteppedPath& p, std::span<const double> th) const override {
    return -inner_->evaluate(p, th);
  }
  bool has_derivatives() const override { return inner_->has_derivatives(); }
  void gradient(const SteppedPath& p, std::span<const double> th,
                std::span<double> out) const override {
    inner_->gradient(p, th, out);
    for (double& v : out) v = -v;
  }
  void hessian(const SteppedPath& p, std::span<const double> th,
               std::span<double> out) const override {
    inner_->hessian(p, th, out);
    for (double& v : out) v = -v;
  }
  double max_relevant_time(std::span<const double> lo,
                           std::span<const double> hi) const override {
    return inner_->max_relevant_time(lo, hi);
  }
  const DividendStructure* dividend_structure() const override {
    return structure_ ? &*structure_ : nullptr;
  }

 private:
  std::shared_ptr<const PathFunctional> inner_;
  std::optional<DividendStructure> structure_;
};

}  // namespace qproc
