#pragma once

#include "ngdconv/common.hpp"

namespace ngdconv::linalg {

/// Largest absolute asymmetry max |M - M^T|.
double asymmetry(const Matrix& m);

/// Throws a contract error when `m` is not square or not symmetric within `tol`.
void require_symmetric(const Matrix& m, double tol, const std::string& what);

/// Eigenvalues in ascending order of a symmetric matrix (lower triangle read).
Vector symmetric_eigenvalues(const Matrix& m);

double lambda_min(const Matrix& m);
double lambda_max(const Matrix& m);

/// Rows scaled to unit Euclidean norm. A zero row raises degenerate_input.
Matrix normalize_rows(const Matrix& x);

/// (M + shift*I)^{-1} b for symmetric M, via LDL^T.
Vector symmetric_solve(const Matrix& m, const Vector& b, double shift = 0.0);
Matrix symmetric_solve(const Matrix& m, const Matrix& b, double shift = 0.0);

}  // namespace ngdconv::linalg
