#include "ngdconv/optim.hpp"

#include <cmath>
#include <sstream>

#include "ngdconv/gram.hpp"
#include "ngdconv/io.hpp"
#include "ngdconv/linalg.hpp"

namespace ngdconv {

namespace {

constexpr double kSolveFloor = 1e-12;

double resolve_damping(std::optional<double> damping, const Matrix& gram) {
  const double value = damping ? *damping : default_damping(gram);
  if (!(value >= 0.0)) throw Error(ErrorKind::contract, "damping must be >= 0");
  return value;
}

// (G + damping I)^{-1} rhs after checking the smallest eigenvalue.
Vector damped_gram_solve(const Matrix& gram, const Vector& rhs, double damping, const char* what) {
  Matrix a = gram;
  a.diagonal().array() += damping;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(a);
  const double lam = eig.eigenvalues()(0);
  if (!(lam > kSolveFloor)) {
    std::ostringstream os;
    os << what << ": Gram matrix plus damping is singular (lambda_min = " << lam << ")";
    throw SingularError(os.str(), lam);
  }
  const Vector& ev = eig.eigenvalues();
  return eig.eigenvectors() * (eig.eigenvectors().transpose() * rhs).cwiseQuotient(ev);
}

void check_step_inputs(const NetworkParams& p, const Dataset& ds, double eta) {
  require_shape(ds.X.cols() == p.d(), "dataset dimension does not match network");
  require_shape(ds.y.size() == ds.n(), "dataset X and y row counts differ");
  if (!(eta >= 0.0)) throw Error(ErrorKind::contract, "step size eta must be >= 0");
}

NetworkParams gd_step_with_loss(const NetworkParams& p, const Dataset& ds, double eta, const LossSpec& loss) {
  check_step_inputs(p, ds, eta);
  const Vector g = output_gradient(loss, forward(p, ds.X), ds.y);
  const JacobianView jv = jacobian(p, ds.X);
  const double scale = eta / static_cast<double>(ds.n());
  return p.with_weights(p.w() - scale * jv.apply_transpose(g));
}

NetworkParams ngd_cg_with_loss(const NetworkParams& p, const Dataset& ds, double eta,
                               std::optional<double> damping, int cg_iters, double cg_tol,
                               const LossSpec& loss, CgResult* stats) {
  check_step_inputs(p, ds, eta);
  const JacobianView jv = jacobian(p, ds.X);
  Matrix gram = jv.gram();
  const double damp = resolve_damping(damping, gram);
  gram.diagonal().array() += damp;
  const Vector g = output_gradient(loss, forward(p, ds.X), ds.y);
  CgResult cg = conjugate_gradient(gram, g, cg_iters, cg_tol);
  NetworkParams out = p.with_weights(p.w() - eta * jv.apply_transpose(cg.x));
  if (stats) *stats = std::move(cg);
  return out;
}

}  // namespace

LossSpec squared_loss() {
  LossSpec s;
  s.kind = LossKind::squared;
  s.mu = 1.0;
  s.L = 1.0;
  s.value = [](double u, double y) { return 0.5 * (u - y) * (u - y); };
  s.grad = [](double u, double y) { return u - y; };
  return s;
}

LossSpec reference_strongly_convex_loss(double mu) {
  if (!(mu > 0.0)) throw Error(ErrorKind::contract, "strong convexity mu must be > 0");
  LossSpec s;
  s.kind = LossKind::strongly_convex_smooth;
  s.mu = mu;
  s.L = mu + 1.0;
  s.value = [mu](double u, double y) {
    const double r = u - y;
    // log cosh(r) = |r| + log1p(exp(-2|r|)) - log 2, stable for large |r|.
    const double a = std::abs(r);
    return 0.5 * mu * r * r + a + std::log1p(std::exp(-2.0 * a)) - std::log(2.0);
  };
  s.grad = [mu](double u, double y) {
    const double r = u - y;
    return mu * r + std::tanh(r);
  };
  return s;
}

double mean_loss(const LossSpec& loss, const Vector& u, const Vector& y) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < u.size(); ++i) total += loss.value(u(i), y(i));
  return total / static_cast<double>(u.size());
}

Vector output_gradient(const LossSpec& loss, const Vector& u, const Vector& y) {
  Vector g(u.size());
  for (Eigen::Index i = 0; i < u.size(); ++i) g(i) = loss.grad(u(i), y(i));
  return g;
}

double default_damping(const Matrix& gram) {
  return 1e-8 * gram.trace() / static_cast<double>(gram.rows());
}

CgResult conjugate_gradient(const Matrix& A, const Vector& b, int max_iters, double tol) {
  require_shape(A.rows() == A.cols() && A.rows() == b.size(), "conjugate_gradient: shape mismatch");
  CgResult res;
  res.x = Vector::Zero(b.size());
  const double bnorm = b.norm();
  if (bnorm == 0.0) {
    res.converged = true;
    return res;
  }
  Vector r = b;
  Vector p = r;
  double rr = r.squaredNorm();
  res.relative_residual = 1.0;
  while (res.iterations < max_iters) {
    const Vector Ap = A * p;
    const double pAp = p.dot(Ap);
    if (!(pAp > 0.0)) break;
    const double alpha = rr / pAp;
    res.x += alpha * p;
    r -= alpha * Ap;
    ++res.iterations;
    const double rr_next = r.squaredNorm();
    res.relative_residual = std::sqrt(rr_next) / bnorm;
    if (res.relative_residual <= tol) break;
    p = r + (rr_next / rr) * p;
    rr = rr_next;
  }
  res.converged = res.relative_residual <= tol;
  return res;
}

NetworkParams gd_step(const NetworkParams& p, const Dataset& ds, double eta) {
  return gd_step_with_loss(p, ds, eta, squared_loss());
}

NetworkParams ngd_general_loss_step(const NetworkParams& p, const Dataset& ds, double eta,
                                    const LossSpec& loss, std::optional<double> damping) {
  check_step_inputs(p, ds, eta);
  const JacobianView jv = jacobian(p, ds.X);
  const Matrix gram = jv.gram();
  const Vector g = output_gradient(loss, forward(p, ds.X), ds.y);
  const Vector z = damped_gram_solve(gram, g, resolve_damping(damping, gram), "ngd step");
  return p.with_weights(p.w() - eta * jv.apply_transpose(z));
}

NetworkParams ngd_exact_step(const NetworkParams& p, const Dataset& ds, double eta,
                             std::optional<double> damping) {
  return ngd_general_loss_step(p, ds, eta, squared_loss(), damping);
}

NetworkParams ngd_cg_step(const NetworkParams& p, const Dataset& ds, double eta,
                          std::optional<double> damping, int cg_iters, double cg_tol, CgResult* stats) {
  return ngd_cg_with_loss(p, ds, eta, damping, cg_iters, cg_tol, squared_loss(), stats);
}

Matrix kfac_direction(const NetworkParams& p, const Dataset& ds, std::optional<double> damping) {
  check_step_inputs(p, ds, 0.0);
  const Matrix& X = ds.X;
  const Matrix xtx = X.transpose() * X;
  Eigen::SelfAdjointEigenSolver<Matrix> xeig(xtx);
  const Vector& xev = xeig.eigenvalues();
  if (!(xev(0) > 1e-12 * std::max(1.0, xev(xev.size() - 1)))) {
    throw Error(ErrorKind::rank_deficiency, "K-FAC needs rank(X) = d (X^T X is singular)");
  }
  const Matrix xtx_inv = xeig.eigenvectors() * xev.cwiseInverse().asDiagonal() * xeig.eigenvectors().transpose();

  const ActivationPattern ap = activation_pattern(p, X);
  const Matrix ss = ap.Stilde * ap.Stilde.transpose();
  const double damp = resolve_damping(damping, ss);
  const Vector r = forward(p, X) - ds.y;

  // pinv(S~^T S~) S~^T = S~^T (S~ S~^T)^{-1}, so the m x m factor is never formed.
  Matrix a = ss;
  a.diagonal().array() += damp;
  Eigen::SelfAdjointEigenSolver<Matrix> seig(a);
  const Vector& sev = seig.eigenvalues();
  if (!(sev(0) > kSolveFloor)) {
    std::ostringstream os;
    os << "K-FAC: S~ S~^T plus damping is singular (lambda_min = " << sev(0) << ")";
    throw SingularError(os.str(), sev(0));
  }
  const Matrix rhs = r.asDiagonal() * X * xtx_inv;  // n x d
  const Matrix solved = seig.eigenvectors() * sev.cwiseInverse().asDiagonal() *
                        (seig.eigenvectors().transpose() * rhs);
  return ap.Stilde.transpose() * solved;
}

NetworkParams kfac_step(const NetworkParams& p, const Dataset& ds, double eta, std::optional<double> damping) {
  check_step_inputs(p, ds, eta);
  return p.with_weights(p.w() - eta * kfac_direction(p, ds, damping));
}

std::string trace_to_csv(const ConvergenceTrace& trace) {
  std::string out = kTraceCsvHeader;
  out += '\n';
  auto opt = [](const std::optional<double>& v) { return v ? io::format_double(*v) : std::string(); };
  for (const auto& rec : trace.records) {
    out += std::to_string(rec.k) + ',' + io::format_double(rec.residual_norm) + ',' +
           io::format_double(rec.loss) + ',' + io::format_double(rec.weight_drift) + ',' +
           io::format_double(rec.per_unit_max_drift) + ',' + io::format_double(rec.predicted_bound) + ',' +
           opt(rec.lambda_min_G) + ',' + opt(rec.jacobian_drift) + '\n';
  }
  return out;
}

TrainResult train(const NetworkParams& p, const Dataset& ds, const OptimizerConfig& cfg) {
  require_valid(ds);
  require_shape(ds.X.cols() == p.d(), "dataset dimension does not match network");
  if (!(cfg.eta >= 0.0)) throw Error(ErrorKind::contract, "eta must be >= 0");
  if (cfg.damping && !(*cfg.damping >= 0.0)) throw Error(ErrorKind::contract, "damping must be >= 0");
  if (cfg.max_steps < 0) throw Error(ErrorKind::contract, "max_steps must be >= 0");
  if (!cfg.loss.grad || !cfg.loss.value) throw Error(ErrorKind::contract, "loss functions are not set");
  const bool squared = cfg.loss.kind == LossKind::squared;
  if (!squared && cfg.method == Method::kfac) {
    throw Error(ErrorKind::contract, "K-FAC is defined here for the squared loss only");
  }

  ConvergenceTrace trace;
  trace.method = to_string(cfg.method);
  trace.eta = cfg.eta;

  const Matrix& X = ds.X;
  Vector u = forward(p, X);
  trace.initial_residual_norm = (u - ds.y).norm();
  trace.initial_loss = mean_loss(cfg.loss, u, ds.y);
  trace.lambda_min_G0 = linalg::lambda_min(jacobian(p.with_weights(p.w0()), X).gram());

  RateInputs in;
  in.n = ds.n();
  in.lambda_min_G0 = trace.lambda_min_G0;
  in.mu = cfg.loss.mu;
  in.L = cfg.loss.L;
  if (cfg.method == Method::kfac) {
    const Vector ev = linalg::symmetric_eigenvalues(X.transpose() * X);
    in.lambda_min_xtx = ev(0);
    in.lambda_max_xtx = ev(ev.size() - 1);
  }
  const RatePrediction rate = rate_predictor(cfg.method, cfg.eta, in);
  trace.predicted_factor = rate.factor;
  trace.eta_warning = rate.eta_warning;
  if (rate.eta_warning) trace.warnings.push_back("eta exceeds the admissible step for " + trace.method);

  const double r0_sq = trace.initial_residual_norm * trace.initial_residual_norm;
  NetworkParams cur = p;
  for (int k = 1; k <= cfg.max_steps; ++k) {
    if (trace.records.empty() ? trace.initial_residual_norm <= kEarlyStopResidual
                              : trace.records.back().residual_norm <= kEarlyStopResidual) {
      break;
    }
    switch (cfg.method) {
      case Method::gd:
        cur = gd_step_with_loss(cur, ds, cfg.eta, cfg.loss);
        break;
      case Method::ngd_exact:
        cur = ngd_general_loss_step(cur, ds, cfg.eta, cfg.loss, cfg.damping);
        break;
      case Method::ngd_cg: {
        CgResult stats;
        cur = ngd_cg_with_loss(cur, ds, cfg.eta, cfg.damping, cfg.cg_iters, cfg.cg_tol, cfg.loss, &stats);
        if (!stats.converged) {
          trace.warnings.push_back("CG did not reach tolerance at step " + std::to_string(k) +
                                   " (relative residual " + io::format_double(stats.relative_residual) + ")");
        }
        break;
      }
      case Method::kfac:
        cur = kfac_step(cur, ds, cfg.eta, cfg.damping);
        break;
    }
    u = forward(cur, X);
    if (!u.allFinite()) {
      throw DivergenceError("non-finite network outputs after step " + std::to_string(k), k);
    }
    TraceRecord rec;
    rec.k = k;
    rec.residual_norm = (u - ds.y).norm();
    rec.loss = mean_loss(cfg.loss, u, ds.y);
    rec.weight_drift = cur.weight_drift();
    rec.per_unit_max_drift = cur.per_unit_max_drift();
    rec.predicted_bound = std::pow(trace.predicted_factor, k) * r0_sq;
    if (cfg.diagnostics.track_lambda_min) rec.lambda_min_G = linalg::lambda_min(jacobian(cur, X).gram());
    if (cfg.diagnostics.track_jacobian_drift) rec.jacobian_drift = jacobian_drift_spectral(cur, X);
    trace.records.push_back(rec);
  }
  return {std::move(cur), std::move(trace)};
}

}  // namespace ngdconv
