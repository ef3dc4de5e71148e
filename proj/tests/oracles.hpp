#pragma once

// Independent reference computations used to check the library. Nothing here
// calls into ngdconv numerics; everything is loops or a different Eigen
// decomposition than the one the library uses.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace oracle {

using Eigen::MatrixXd;
using Eigen::VectorXd;

inline double relu(double z) { return z > 0.0 ? z : 0.0; }

// f(x_i) = (1/sqrt(m)) sum_r a_r relu(w_r . x_i), plain loops.
inline VectorXd forward(const MatrixXd& w, const VectorXd& a, const MatrixXd& X) {
  VectorXd u(X.rows());
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    double s = 0.0;
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      double z = 0.0;
      for (Eigen::Index k = 0; k < X.cols(); ++k) z += w(r, k) * X(i, k);
      s += a(r) * relu(z);
    }
    u(i) = s / std::sqrt(static_cast<double>(w.rows()));
  }
  return u;
}

// Central-difference Jacobian in the unit-major layout (column r*d + k).
inline MatrixXd fd_jacobian(const MatrixXd& w, const VectorXd& a, const MatrixXd& X, double h = 1e-6) {
  const Eigen::Index m = w.rows(), d = w.cols();
  MatrixXd J(X.rows(), m * d);
  for (Eigen::Index r = 0; r < m; ++r) {
    for (Eigen::Index k = 0; k < d; ++k) {
      MatrixXd wp = w, wm = w;
      wp(r, k) += h;
      wm(r, k) -= h;
      J.col(r * d + k) = (forward(wp, a, X) - forward(wm, a, X)) / (2.0 * h);
    }
  }
  return J;
}

// Smallest |w_r . x_i| over all pairs: distance to the nearest activation kink.
inline double kink_margin(const MatrixXd& w, const MatrixXd& X) {
  return (X * w.transpose()).cwiseAbs().minCoeff();
}

// Number of eigenvalues of symmetric A below sigma, from the signs of the
// pivots of an unpivoted LDL^T of A - sigma I (Sylvester inertia).
inline int count_below(const MatrixXd& A, double sigma) {
  const Eigen::Index n = A.rows();
  MatrixXd M = A;
  for (Eigen::Index i = 0; i < n; ++i) M(i, i) -= sigma;
  int negatives = 0;
  for (Eigen::Index k = 0; k < n; ++k) {
    double piv = M(k, k);
    if (piv == 0.0) piv = -1e-300;
    if (piv < 0.0) ++negatives;
    for (Eigen::Index i = k + 1; i < n; ++i) {
      const double f = M(i, k) / piv;
      for (Eigen::Index j = k + 1; j < n; ++j) M(i, j) -= f * M(k, j);
    }
  }
  return negatives;
}

// k-th smallest eigenvalue (0-based) by bisection on the inertia count.
inline double eigenvalue(const MatrixXd& A, int k, double tol = 1e-13) {
  double bound = 0.0;
  for (Eigen::Index i = 0; i < A.rows(); ++i) bound = std::max(bound, A.row(i).cwiseAbs().sum());
  double lo = -bound - 1.0, hi = bound + 1.0;
  while (hi - lo > tol * std::max(1.0, std::abs(lo) + std::abs(hi))) {
    const double mid = 0.5 * (lo + hi);
    (count_below(A, mid) > k ? hi : lo) = mid;
  }
  return 0.5 * (lo + hi);
}
inline double min_eig(const MatrixXd& A) { return eigenvalue(A, 0); }
inline double max_eig(const MatrixXd& A) { return eigenvalue(A, static_cast<int>(A.rows()) - 1); }

// Moore-Penrose pseudo-inverse through the SVD.
inline MatrixXd pinv(const MatrixXd& A) {
  Eigen::JacobiSVD<MatrixXd> svd(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const VectorXd& s = svd.singularValues();
  const double cut = 1e-12 * std::max(A.rows(), A.cols()) * (s.size() ? s(0) : 0.0);
  VectorXd inv = VectorXd::Zero(s.size());
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (s(i) > cut) inv(i) = 1.0 / s(i);
  }
  return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

inline MatrixXd kron(const MatrixXd& A, const MatrixXd& B) {
  MatrixXd K(A.rows() * B.rows(), A.cols() * B.cols());
  for (Eigen::Index i = 0; i < A.rows(); ++i) {
    for (Eigen::Index j = 0; j < A.cols(); ++j) K.block(i * B.rows(), j * B.cols(), B.rows(), B.cols()) = A(i, j) * B;
  }
  return K;
}

// Closed-form limiting Gram entry for unit vectors.
inline double limiting_entry(const VectorXd& xi, const VectorXd& xj) {
  const double c = std::clamp(xi.dot(xj), -1.0, 1.0);
  return c * (std::numbers::pi - std::acos(c)) / (2.0 * std::numbers::pi);
}

inline MatrixXd random_unit_rows(Eigen::Index n, Eigen::Index d, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  MatrixXd X(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index k = 0; k < d; ++k) X(i, k) = g(rng);
    X.row(i).normalize();
  }
  return X;
}

inline MatrixXd random_spd(Eigen::Index n, std::mt19937_64& rng, double ridge = 0.1) {
  std::normal_distribution<double> g;
  MatrixXd B(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) B(i, j) = g(rng);
  }
  return B * B.transpose() + ridge * MatrixXd::Identity(n, n);
}

inline double rel_err(const MatrixXd& got, const MatrixXd& want) {
  const double denom = want.norm();
  return denom == 0.0 ? got.norm() : (got - want).norm() / denom;
}

}  // namespace oracle
