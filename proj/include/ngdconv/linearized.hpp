#pragma once

#include <functional>
#include <vector>

#include "ngdconv/common.hpp"
#include "ngdconv/network.hpp"
#include "ngdconv/optim.hpp"

namespace ngdconv {

/// Frozen-Jacobian model u(w) = u0 + J (w - w0).
class LinearizedModel {
 public:
  /// Throws SingularError unless J J^T is positive definite (lambda_min > 1e-12).
  LinearizedModel(Matrix J, Vector w0, Vector u0, Vector y);

  const Matrix& J() const { return J_; }
  const Vector& w0() const { return w0_; }
  const Vector& u0() const { return u0_; }
  const Vector& y() const { return y_; }
  const Matrix& G() const { return G_; }
  double lambda_min() const { return eig_.eigenvalues()(0); }

  Vector outputs(const Vector& w) const;

  /// J^T G^{-1} (y - u0): the min-norm displacement that fits y.
  Vector limit_displacement() const;

  /// ln(1e12) / min(lambda_min(G), 1), long enough for every mode of both
  /// flows to decay below 1e-12.
  double infinite_time() const;

  /// J^T (Q f(Lambda) Q^T) v for a spectral function f of G.
  Vector apply_spectral(const Vector& v, const std::function<double(double)>& f) const;

 private:
  Matrix J_;
  Vector w0_;
  Vector u0_;
  Vector y_;
  Matrix G_;
  Eigen::SelfAdjointEigenSolver<Matrix> eig_;
};

/// Linearization of the ReLU network at its initialization: J = J(w0).
LinearizedModel linearize(const NetworkParams& p, const Dataset& ds);

/// w_GD(t) = J^T G^{-1} (I - exp(-G t)) (y - u0) + w0
Vector gd_trajectory(const LinearizedModel& lm, double t);

/// w_NGD(t) = (1 - exp(-t)) J^T G^{-1} (y - u0) + w0
Vector ngd_trajectory(const LinearizedModel& lm, double t);

struct DiscreteRun {
  Vector w;
  Vector u;
  /// ||u(k) - y|| for k = 0..steps.
  std::vector<double> residual_norms;
};

/// Discrete NGD recursion w <- w - eta J^T G^{-1} (u - y).
DiscreteRun ngd_discrete(const LinearizedModel& lm, double eta, int steps);

/// Discrete NGD with a general loss: w <- w - eta J^T G^{-1} grad_u L(u).
DiscreteRun ngd_discrete(const LinearizedModel& lm, double eta, const LossSpec& loss, int steps);

}  // namespace ngdconv
