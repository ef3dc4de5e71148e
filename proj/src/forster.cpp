#include "ngdconv/forster.hpp"

#include <cmath>
#include <sstream>

#include "ngdconv/linalg.hpp"

namespace ngdconv {

namespace {

constexpr double kEigenFloor = 1e-14;
constexpr double kRescaleFloor = 1e-14;

// (Z^T Z)^{-1/2} by symmetric eigendecomposition.
Matrix inverse_sqrt_second_moment(const Matrix& Z) {
  const Matrix zz = Z.transpose() * Z;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(zz);
  if (eig.info() != Eigen::Success) {
    throw Error(ErrorKind::rank_deficiency, "eigendecomposition of Z^T Z failed");
  }
  const Vector& ev = eig.eigenvalues();
  const double floor = kEigenFloor * std::max(1.0, ev(ev.size() - 1));
  if (!(ev(0) > floor)) {
    std::ostringstream os;
    os << "Z^T Z is singular (smallest eigenvalue " << ev(0)
       << "); some d rows of the input are linearly dependent";
    throw Error(ErrorKind::rank_deficiency, os.str());
  }
  const Vector inv_sqrt = ev.array().rsqrt();
  return eig.eigenvectors() * inv_sqrt.asDiagonal() * eig.eigenvectors().transpose();
}

}  // namespace

double forster_error(const Matrix& Z) {
  const double target = static_cast<double>(Z.rows()) / static_cast<double>(Z.cols());
  Matrix diff = Z.transpose() * Z;
  diff.diagonal().array() -= target;
  return diff.norm();
}

Matrix forster_step(const Matrix& Z) {
  return linalg::normalize_rows(Z * inverse_sqrt_second_moment(Z));
}

ForsterResult forster_transform(const Matrix& X, const ForsterOptions& options) {
  if (X.rows() < X.cols()) {
    throw Error(ErrorKind::rank_deficiency, "Forster transform needs n >= d");
  }
  if (!(options.tol > 0.0) || options.max_iter < 0) {
    throw Error(ErrorKind::contract, "Forster transform needs tol > 0 and max_iter >= 0");
  }
  ForsterResult res;
  res.A = Matrix::Identity(X.cols(), X.cols());
  res.Z = X;
  res.final_error = forster_error(res.Z);
  res.error_history.push_back(res.final_error);

  while (res.final_error > options.tol) {
    if (res.iterations >= options.max_iter) {
      std::ostringstream os;
      os << "Forster transform did not reach tol " << options.tol << " in " << options.max_iter
         << " iterations (error " << res.final_error << ")";
      throw NonConvergenceError(os.str(), res.final_error);
    }
    const Matrix T = inverse_sqrt_second_moment(res.Z);
    res.Z = linalg::normalize_rows(res.Z * T);
    res.A = res.A * T;
    ++res.iterations;
    const double pivot = res.A(0, 0);
    if (std::abs(pivot) < kRescaleFloor) {
      res.skipped_rescales.push_back(res.iterations);
    } else {
      res.A /= pivot;
      // A negative pivot flips every row of X A; flip Z with it so that
      // normalize-rows(X A) = Z keeps holding. Z^T Z is unchanged.
      if (pivot < 0.0) res.Z = -res.Z;
    }
    res.final_error = forster_error(res.Z);
    res.error_history.push_back(res.final_error);
  }
  return res;
}

}  // namespace ngdconv
