#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace ngdconv {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class ErrorKind {
  format,
  degenerate_input,
  shape,
  rank_deficiency,
  non_convergence,
  singular,
  contract,
  divergence,
  io,
  usage,
};

const char* to_string(ErrorKind kind);

/// Every failure raised by the library carries a kind so the CLI can map it to
/// an exit code.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Raised when the Forster iteration runs out of budget.
class NonConvergenceError : public Error {
 public:
  NonConvergenceError(const std::string& what, double final_error)
      : Error(ErrorKind::non_convergence, what), final_error_(final_error) {}

  double final_error() const noexcept { return final_error_; }

 private:
  double final_error_;
};

/// Raised when a Gram-type system is singular beyond the damping floor.
class SingularError : public Error {
 public:
  SingularError(const std::string& what, double lambda_min)
      : Error(ErrorKind::singular, what), lambda_min_(lambda_min) {}

  double lambda_min() const noexcept { return lambda_min_; }

 private:
  double lambda_min_;
};

/// Raised by the training loop when outputs stop being finite.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, std::int64_t step)
      : Error(ErrorKind::divergence, what), step_(step) {}

  std::int64_t step() const noexcept { return step_; }

 private:
  std::int64_t step_;
};

inline void require_shape(bool ok, const std::string& what) {
  if (!ok) throw Error(ErrorKind::shape, what);
}

}  // namespace ngdconv
