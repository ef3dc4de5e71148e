#pragma once

#include <vector>

#include "ngdconv/common.hpp"

namespace ngdconv {

/// Output of the Forster whitening iteration: normalize-rows(X A) = Z and
/// Z^T Z = (n/d) I up to `final_error`.
struct ForsterResult {
  Matrix A;
  Matrix Z;
  int iterations = 0;
  /// ||Z^T Z - (n/d) I||_F at exit.
  double final_error = 0.0;
  /// Error after each completed iteration (entry 0 is the input error).
  std::vector<double> error_history;
  /// Iterations at which A[0,0] was too small to rescale by.
  std::vector<int> skipped_rescales;
};

struct ForsterOptions {
  double tol = 1e-8;
  int max_iter = 10000;
};

/// ||Z^T Z - (n/d) I||_F
double forster_error(const Matrix& Z);

/// One whitening + normalization pass: normalize-rows(Z (Z^T Z)^{-1/2}).
/// Throws rank_deficiency when Z^T Z has an eigenvalue below the floor.
Matrix forster_step(const Matrix& Z);

/// Iterates Z <- normalize-rows(Z T), A <- A T / (A T)[0,0] with
/// T = (Z^T Z)^{-1/2} until the error is within tolerance.
/// Errors: rank_deficiency (singular Z^T Z), NonConvergenceError.
ForsterResult forster_transform(const Matrix& X, const ForsterOptions& options = {});

}  // namespace ngdconv
