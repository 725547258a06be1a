#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

#include "qproc/errors.hpp"
#include "qproc/functional.hpp"
#include "qproc/numerics.hpp"
#include "qproc/path.hpp"
#include "qproc/rng.hpp"

namespace qproc {

// Bijection on {0..n-1} (0-based internally).
struct Permutation {
  std::vector<std::uint32_t> mapping;

  std::size_t size() const { return mapping.size(); }

  static Permutation identity(std::size_t n) {
    Permutation p;
    p.mapping.resize(n);
    std::iota(p.mapping.begin(), p.mapping.end(), 0u);
    return p;
  }

  bool is_valid() const {
    std::vector<bool> seen(mapping.size(), false);
    for (auto i : mapping) {
      if (i >= mapping.size() || seen[i]) return false;
      seen[i] = true;
    }
    return true;
  }
};

// alpha independent uniform permutations (Fisher-Yates); repetitions possible.
inline std::vector<Permutation> sample_permutation_set(std::size_t n, std::size_t alpha,
                                                       RngStream& rng) {
  if (n == 0) throw parameter_error("sample_permutation_set: n must be >= 1");
  if (alpha == 0) throw parameter_error("sample_permutation_set: alpha must be >= 1");
  std::vector<Permutation> out;
  out.reserve(alpha);
  for (std::size_t a = 0; a < alpha; ++a) {
    Permutation p = Permutation::identity(n);
    for (std::size_t k = n - 1; k > 0; --k) {
      const auto j = static_cast<std::size_t>(rng.uniform_below(k + 1));
      std::swap(p.mapping[k], p.mapping[j]);
    }
    out.push_back(std::move(p));
  }
  return out;
}

inline std::vector<Permutation> sample_permutation_set(std::size_t n, std::size_t alpha,
                                                       std::uint64_t seed,
                                                       std::uint64_t stream = 0) {
  RngStream rng(seed, stream);
  return sample_permutation_set(n, alpha, rng);
}

// All n! permutations in lexicographic order; exhaustive oracle for small n.
inline std::vector<Permutation> enumerate_all_permutations(std::size_t n) {
  if (n == 0 || n > 8)
    throw parameter_error("enumerate_all_permutations: n must be in 1..8");
  std::vector<Permutation> out;
  Permutation p = Permutation::identity(n);
  do {
    out.push_back(p);
  } while (std::next_permutation(p.mapping.begin(), p.mapping.end()));
  return out;
}

// One observed increment vector plus a permutation set A_n; realizes the
// empirical measure P_n = (1/alpha) sum_i delta_{quasi path i}. Quasi paths
// are materialized on demand from (increments, permutation).
class QuasiEnsemble {
 public:
  QuasiEnsemble(IncrementVector increments, double u, double h, std::vector<Permutation> perms)
      : increments_(std::move(increments)), u_(u), h_(h), perms_(std::move(perms)) {
    if (!(h_ > 0.0)) throw parameter_error("QuasiEnsemble: h must be > 0");
    if (perms_.empty()) throw parameter_error("QuasiEnsemble: need at least one permutation");
    for (const auto& p : perms_)
      if (p.size() != increments_.size())
        throw parameter_error("QuasiEnsemble: permutation size mismatch");
    terminal_ = u_;
    for (double d : increments_) terminal_ += d;
  }

  std::size_t size() const { return perms_.size(); }            // alpha_n
  std::size_t n_increments() const { return increments_.size(); }
  double u() const { return u_; }
  double h() const { return h_; }
  double horizon() const { return static_cast<double>(increments_.size()) * h_; }
  const IncrementVector& increments() const { return increments_; }
  const std::vector<Permutation>& permutations() const { return perms_; }

  SteppedPath quasi_path(std::size_t index) const {
    return quasi_path_prefix(index, n_increments());
  }

  // First `len` steps only; enough when the functional cannot see past
  // len * h. The prefix of a uniform permutation is a uniform ordered subset.
  SteppedPath quasi_path_prefix(std::size_t index, std::size_t len) const {
    if (index >= perms_.size()) throw parameter_error("quasi_path: index out of range");
    len = std::min(len, n_increments());
    std::vector<double> values(len + 1);
    values[0] = u_;
    const auto& map = perms_[index].mapping;
    for (std::size_t k = 0; k < len; ++k) values[k + 1] = values[k] + increments_[map[k]];
    // The terminal value is permutation invariant in exact arithmetic (same
    // multiset of summands); pin it to the observed terminal so the
    // invariance also holds bit-exactly in floating point.
    if (len == n_increments()) values[len] = terminal_;
    return SteppedPath(u_, h_, std::move(values));
  }

  SteppedPath observed_path() const {
    return from_increments(u_, h_, increments_);
  }

 private:
  IncrementVector increments_;
  double u_;
  double h_;
  double terminal_ = 0.0;  // observed terminal, sequential summation order
  std::vector<Permutation> perms_;
};

// P_n h_theta = (1/alpha) sum over ensemble members, pairwise-reduced.
inline double empirical_expectation(const QuasiEnsemble& ensemble, const PathFunctional& f,
                                    std::span<const double> theta) {
  std::vector<double> vals(ensemble.size());
  const double T = ensemble.horizon();
  const double cut = f.max_relevant_time(theta, theta);
  const std::size_t len =
      cut >= T ? ensemble.n_increments()
               : std::min<std::size_t>(ensemble.n_increments(),
                                       static_cast<std::size_t>(std::ceil(cut / ensemble.h())));
  for (std::size_t i = 0; i < ensemble.size(); ++i)
    vals[i] = f.evaluate(ensemble.quasi_path_prefix(i, len), theta);
  return pairwise_sum(vals) / static_cast<double>(ensemble.size());
}

// Same empirical mean over paths already materialized (used by the optimizer
// to avoid rebuilding quasi paths at every theta).
inline double empirical_expectation(std::span<const SteppedPath> paths, const PathFunctional& f,
                                    std::span<const double> theta) {
  if (paths.empty()) throw parameter_error("empirical_expectation: no paths");
  std::vector<double> vals(paths.size());
  for (std::size_t i = 0; i < paths.size(); ++i) vals[i] = f.evaluate(paths[i], theta);
  return pairwise_sum(vals) / static_cast<double>(paths.size());
}

}  // namespace qproc
