#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <ostream>
#include <span>
#include <vector>

#include "qproc/errors.hpp"
#include "qproc/levy.hpp"

namespace qproc {

// Right-continuous step path on the uniform grid t_k = k*h:
//   x(t) = values[k] for t in [t_k, t_{k+1}),
// i.e. the jump at t_k is already applied at t = t_k. Immutable after
// construction.
class SteppedPath {
 public:
  SteppedPath(double start, double h, std::vector<double> values)
      : h_(h), values_(std::move(values)) {
    if (!(h > 0.0)) throw parameter_error("SteppedPath: h must be > 0");
    if (values_.empty() || values_.front() != start)
      throw parameter_error("SteppedPath: values must begin with the start value");
  }

  std::size_t n_increments() const { return values_.size() - 1; }
  double h() const { return h_; }
  double start() const { return values_.front(); }
  double horizon() const { return static_cast<double>(n_increments()) * h_; }
  double terminal() const { return values_.back(); }
  const std::vector<double>& values() const { return values_; }
  double operator[](std::size_t k) const { return values_[k]; }

  double value_at(double t) const {
    if (t < 0.0 || t > horizon()) throw domain_error("value_at: t outside [0, T]");
    auto k = static_cast<std::size_t>(std::floor(t / h_));
    if (k > n_increments()) k = n_increments();
    return values_[k];
  }

 private:
  double h_;
  std::vector<double> values_;
};

inline SteppedPath from_increments(double u, double h, std::span<const double> increments) {
  std::vector<double> values(increments.size() + 1);
  values[0] = u;
  for (std::size_t k = 0; k < increments.size(); ++k) values[k + 1] = values[k] + increments[k];
  return SteppedPath(u, h, std::move(values));
}

// Grid index of the first value strictly below xi, or n_increments()+1 if none.
// First passage of a step path happens exactly at a grid time.
inline std::size_t ruin_index(const SteppedPath& path, double xi) {
  const auto& v = path.values();
  for (std::size_t k = 0; k < v.size(); ++k)
    if (v[k] < xi) return k;
  return v.size();
}

// tau^x = inf{ t : x(t) < xi } ^ T.
inline double ruin_time(const SteppedPath& path, double xi) {
  const std::size_t k = ruin_index(path, xi);
  if (k >= path.values().size()) return path.horizon();
  return static_cast<double>(k) * path.h();
}

// Uniform distance sup_t |a(t) - b(t)| on a common grid.
inline double sup_distance(const SteppedPath& a, const SteppedPath& b) {
  if (a.n_increments() != b.n_increments() || a.h() != b.h())
    throw parameter_error("sup_distance: paths must share the same grid");
  double d = 0.0;
  for (std::size_t k = 0; k < a.values().size(); ++k)
    d = std::max(d, std::abs(a[k] - b[k]));
  return d;
}

// CSV with columns t,value (one row per grid point).
inline void write_csv(const SteppedPath& path, std::ostream& os) {
  os << "t,value\n";
  for (std::size_t k = 0; k < path.values().size(); ++k)
    os << static_cast<double>(k) * path.h() << ',' << path[k] << '\n';
}

}  // namespace qproc
