#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "qproc/errors.hpp"

namespace qproc {

// Pairwise (tree) reduction; fixed summation order independent of threading,
// so reproducibility survives parallel evaluation of the terms.
inline double pairwise_sum(std::span<const double> x) {
  const std::size_t n = x.size();
  if (n == 0) return 0.0;
  if (n <= 8) {
    double s = 0.0;
    for (double v : x) s += v;
    return s;
  }
  const std::size_t half = n / 2;
  return pairwise_sum(x.subspan(0, half)) + pairwise_sum(x.subspan(half));
}

// 8-point Gauss-Legendre rule on [-1, 1].
struct GaussLegendre8 {
  static constexpr std::array<double, 8> nodes = {
      -0.96028985649753623, -0.79666647741362674, -0.52553240991632899, -0.18343464249564980,
      0.18343464249564980,  0.52553240991632899,  0.79666647741362674,  0.96028985649753623};
  static constexpr std::array<double, 8> weights = {
      0.10122853629037626, 0.22238103445337447, 0.31370664587788729, 0.36268378337836198,
      0.36268378337836198, 0.31370664587788729, 0.22238103445337447, 0.10122853629037626};

  template <class F>
  static double integrate(F&& f, double a, double b) {
    const double mid = 0.5 * (a + b);
    const double half = 0.5 * (b - a);
    double s = 0.0;
    for (std::size_t i = 0; i < 8; ++i) s += weights[i] * f(mid + half * nodes[i]);
    return s * half;
  }
};

struct SampleStats {
  double mean = 0.0;
  double variance = 0.0;  // unbiased (n-1)
};

inline SampleStats sample_stats(std::span<const double> x) {
  if (x.empty()) throw parameter_error("sample_stats: empty sample");
  SampleStats s;
  s.mean = pairwise_sum(x) / static_cast<double>(x.size());
  if (x.size() > 1) {
    double acc = 0.0;
    for (double v : x) acc += (v - s.mean) * (v - s.mean);
    s.variance = acc / static_cast<double>(x.size() - 1);
  }
  return s;
}

inline double median(std::vector<double> x) {
  if (x.empty()) throw parameter_error("median: empty sample");
  std::sort(x.begin(), x.end());
  const std::size_t n = x.size();
  return n % 2 == 1 ? x[n / 2] : 0.5 * (x[n / 2 - 1] + x[n / 2]);
}

// Acklam's rational approximation to the standard normal quantile,
// |rel err| < 1.15e-9 on (0,1).
inline double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw domain_error("normal_quantile: p must be in (0,1)");
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                 -2.759285104469687e+02, 1.383577518672690e+02,
                                 -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                 -1.556989798598866e+02, 6.680131188771972e+01,
                                 -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                 -2.400758277161838e+00, -2.549732539343734e+00,
                                 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                                 2.445134137142996e+00, 3.754408661907416e+00};
  constexpr double plow = 0.02425;
  double q, r;
  if (p < plow) {
    q = std::sqrt(-2.0 * std::log(p));
    return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  if (p > 1.0 - plow) {
    q = std::sqrt(-2.0 * std::log(1.0 - p));
    return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  q = p - 0.5;
  r = q * q;
  return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
         (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
}

}  // namespace qproc
