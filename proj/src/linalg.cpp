#include "ngdconv/linalg.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace ngdconv {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::format: return "format";
    case ErrorKind::degenerate_input: return "degenerate_input";
    case ErrorKind::shape: return "shape";
    case ErrorKind::rank_deficiency: return "rank_deficiency";
    case ErrorKind::non_convergence: return "non_convergence";
    case ErrorKind::singular: return "singular";
    case ErrorKind::contract: return "contract";
    case ErrorKind::divergence: return "divergence";
    case ErrorKind::io: return "io";
    case ErrorKind::usage: return "usage";
  }
  return "unknown";
}

namespace linalg {

double asymmetry(const Matrix& m) {
  if (m.rows() != m.cols()) return std::numeric_limits<double>::infinity();
  if (m.size() == 0) return 0.0;
  return (m - m.transpose()).cwiseAbs().maxCoeff();
}

void require_symmetric(const Matrix& m, double tol, const std::string& what) {
  if (m.rows() != m.cols()) {
    throw Error(ErrorKind::contract, what + ": matrix is not square");
  }
  const double gap = asymmetry(m);
  if (!(gap <= tol)) {
    std::ostringstream os;
    os << what << ": matrix is not symmetric (max |M - M^T| = " << gap << ")";
    throw Error(ErrorKind::contract, os.str());
  }
}

Vector symmetric_eigenvalues(const Matrix& m) {
  Eigen::SelfAdjointEigenSolver<Matrix> solver(m, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) {
    throw Error(ErrorKind::contract, "symmetric eigensolver failed");
  }
  return solver.eigenvalues();
}

double lambda_min(const Matrix& m) { return symmetric_eigenvalues(m)(0); }

double lambda_max(const Matrix& m) {
  const Vector ev = symmetric_eigenvalues(m);
  return ev(ev.size() - 1);
}

Matrix normalize_rows(const Matrix& x) {
  Matrix out = x;
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    const double norm = out.row(i).norm();
    if (!(norm > 0.0) || !std::isfinite(norm)) {
      std::ostringstream os;
      os << "row " << i << " has zero or non-finite norm and cannot be normalized";
      throw Error(ErrorKind::degenerate_input, os.str());
    }
    out.row(i) /= norm;
  }
  return out;
}

Matrix symmetric_solve(const Matrix& m, const Matrix& b, double shift) {
  Matrix a = m;
  a.diagonal().array() += shift;
  Eigen::LDLT<Matrix> ldlt(a);
  if (ldlt.info() != Eigen::Success) {
    throw Error(ErrorKind::singular, "LDL^T factorization failed");
  }
  return ldlt.solve(b);
}

Vector symmetric_solve(const Matrix& m, const Vector& b, double shift) {
  return symmetric_solve(m, Matrix(b), shift).col(0);
}

}  // namespace linalg
}  // namespace ngdconv
