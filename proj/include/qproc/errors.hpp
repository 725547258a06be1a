#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace qproc {

// Bad argument to an operation (invalid scheme, grid mismatch, empty domain, ...).
class parameter_error : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Input outside the mathematical domain of an operation (t outside [0,T], theta outside Theta).
class domain_error : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Malformed or inconsistent experiment configuration (unknown key, bad type,
// missing field). Distinguished from parameter_error so the CLI can map it to
// its own exit code.
class config_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// NaN/Inf encountered where a finite value is required.
class numeric_error : public std::runtime_error {
 public:
  explicit numeric_error(const std::string& what, double offending = 0.0)
      : std::runtime_error(what), offending_value(offending) {}
  double offending_value;
};

// Requested derivative of a non-differentiable kernel, or similar.
class unsupported_operation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Singular or near-singular Hessian in the sandwich estimate; carries the matrix.
class degeneracy_error : public std::runtime_error {
 public:
  degeneracy_error(const std::string& what, std::vector<double> hessian_row_major)
      : std::runtime_error(what), hessian(std::move(hessian_row_major)) {}
  std::vector<double> hessian;
};

}  // namespace qproc
