#include "ngdconv/linearized.hpp"

#include <cmath>
#include <sstream>

namespace ngdconv {

LinearizedModel::LinearizedModel(Matrix J, Vector w0, Vector u0, Vector y)
    : J_(std::move(J)), w0_(std::move(w0)), u0_(std::move(u0)), y_(std::move(y)) {
  require_shape(w0_.size() == J_.cols(), "LinearizedModel: w0 length must equal columns of J");
  require_shape(u0_.size() == J_.rows() && y_.size() == J_.rows(),
                "LinearizedModel: u0 and y length must equal rows of J");
  G_ = J_ * J_.transpose();
  eig_.compute(G_);
  if (eig_.info() != Eigen::Success || !(lambda_min() > 1e-12)) {
    std::ostringstream os;
    os << "linearized model needs J J^T positive definite (lambda_min = "
       << (eig_.info() == Eigen::Success ? lambda_min() : std::nan("")) << ")";
    throw SingularError(os.str(), eig_.info() == Eigen::Success ? lambda_min() : 0.0);
  }
}

Vector LinearizedModel::outputs(const Vector& w) const { return u0_ + J_ * (w - w0_); }

Vector LinearizedModel::apply_spectral(const Vector& v, const std::function<double(double)>& f) const {
  const Matrix& Q = eig_.eigenvectors();
  Vector coeff = Q.transpose() * v;
  for (Eigen::Index i = 0; i < coeff.size(); ++i) coeff(i) *= f(eig_.eigenvalues()(i));
  return J_.transpose() * (Q * coeff);
}

Vector LinearizedModel::limit_displacement() const {
  return apply_spectral(y_ - u0_, [](double lam) { return 1.0 / lam; });
}

double LinearizedModel::infinite_time() const {
  return std::log(1e12) / std::min(lambda_min(), 1.0);
}

LinearizedModel linearize(const NetworkParams& p, const Dataset& ds) {
  const NetworkParams at_init = p.with_weights(p.w0());
  return LinearizedModel(jacobian(at_init, ds.X).dense(), flatten_weights(p.w0()), forward(at_init, ds.X), ds.y);
}

Vector gd_trajectory(const LinearizedModel& lm, double t) {
  if (!(t >= 0.0)) throw Error(ErrorKind::contract, "trajectory time must be >= 0");
  // (1 - e^{-lam t}) / lam, written with expm1 for small lam t.
  return lm.w0() + lm.apply_spectral(lm.y() - lm.u0(), [t](double lam) { return -std::expm1(-lam * t) / lam; });
}

Vector ngd_trajectory(const LinearizedModel& lm, double t) {
  if (!(t >= 0.0)) throw Error(ErrorKind::contract, "trajectory time must be >= 0");
  return lm.w0() - std::expm1(-t) * lm.limit_displacement();
}

DiscreteRun ngd_discrete(const LinearizedModel& lm, double eta, const LossSpec& loss, int steps) {
  if (steps < 0) throw Error(ErrorKind::contract, "steps must be >= 0");
  DiscreteRun run{lm.w0(), lm.u0(), {}};
  run.residual_norms.push_back((run.u - lm.y()).norm());
  for (int k = 0; k < steps; ++k) {
    const Vector g = output_gradient(loss, run.u, lm.y());
    run.w -= eta * lm.apply_spectral(g, [](double lam) { return 1.0 / lam; });
    run.u = lm.outputs(run.w);
    run.residual_norms.push_back((run.u - lm.y()).norm());
  }
  return run;
}

DiscreteRun ngd_discrete(const LinearizedModel& lm, double eta, int steps) {
  return ngd_discrete(lm, eta, squared_loss(), steps);
}

}  // namespace ngdconv
