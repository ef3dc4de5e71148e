#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "ngdconv/common.hpp"
#include "ngdconv/data.hpp"
#include "ngdconv/network.hpp"
#include "ngdconv/theory.hpp"

namespace ngdconv {

enum class LossKind { squared, strongly_convex_smooth };

/// Per-example loss l(u, y), mu-strongly convex with L-Lipschitz derivative in u.
struct LossSpec {
  LossKind kind = LossKind::squared;
  double mu = 1.0;
  double L = 1.0;
  std::function<double(double, double)> value;
  /// dl/du
  std::function<double(double, double)> grad;
};

/// l = (u - y)^2 / 2
LossSpec squared_loss();

/// l = (mu/2)(u - y)^2 + log cosh(u - y); L = mu + 1.
LossSpec reference_strongly_convex_loss(double mu = 0.5);

/// Mean loss (1/n) sum_i l(u_i, y_i).
double mean_loss(const LossSpec& loss, const Vector& u, const Vector& y);
Vector output_gradient(const LossSpec& loss, const Vector& u, const Vector& y);

struct Diagnostics {
  bool track_lambda_min = false;
  bool track_jacobian_drift = false;
};

struct OptimizerConfig {
  Method method = Method::ngd_exact;
  double eta = 1.0;
  /// Added to Gram diagonals before solves. Unset means 1e-8 * trace(G) / n,
  /// recomputed every step.
  std::optional<double> damping;
  int cg_iters = 100;
  double cg_tol = 1e-10;
  int max_steps = 100;
  LossSpec loss = squared_loss();
  Diagnostics diagnostics;
};

/// 1e-8 * trace(G) / n
double default_damping(const Matrix& gram);

struct CgResult {
  Vector x;
  int iterations = 0;
  double relative_residual = 0.0;
  bool converged = false;
};

/// Conjugate gradient for SPD A x = b from x = 0, stopping at
/// ||b - A x|| <= tol ||b|| or after max_iters iterations.
CgResult conjugate_gradient(const Matrix& A, const Vector& b, int max_iters, double tol);

/// w <- w - eta (1/n) J^T (u - y)
NetworkParams gd_step(const NetworkParams& p, const Dataset& ds, double eta);

/// w <- w - eta J^T (G + damping I)^{-1} (u - y). Throws SingularError when
/// lambda_min(G + damping I) <= 1e-12.
NetworkParams ngd_exact_step(const NetworkParams& p, const Dataset& ds, double eta,
                             std::optional<double> damping = std::nullopt);

/// As ngd_exact_step with the Gram solve replaced by CG. `stats`, when given,
/// receives the CG outcome; stagnation does not stop the step.
NetworkParams ngd_cg_step(const NetworkParams& p, const Dataset& ds, double eta,
                          std::optional<double> damping, int cg_iters, double cg_tol,
                          CgResult* stats = nullptr);

/// K-FAC with the Kronecker preconditioner (X^T X)^{-1} (x) pinv(S~^T S~):
///   dW = -eta S~^T (S~ S~^T + damping I)^{-1} diag(u - y) X (X^T X)^{-1}
/// Throws rank_deficiency when rank(X) < d and SingularError when
/// S~ S~^T + damping I is singular.
NetworkParams kfac_step(const NetworkParams& p, const Dataset& ds, double eta,
                        std::optional<double> damping = std::nullopt);

/// The m x d K-FAC direction before scaling by -eta.
Matrix kfac_direction(const NetworkParams& p, const Dataset& ds, std::optional<double> damping);

/// w <- w - eta J^T (G + damping I)^{-1} grad_u L(u)
NetworkParams ngd_general_loss_step(const NetworkParams& p, const Dataset& ds, double eta,
                                    const LossSpec& loss, std::optional<double> damping = std::nullopt);

struct TraceRecord {
  std::int64_t k = 0;
  double residual_norm = 0.0;
  double loss = 0.0;
  double weight_drift = 0.0;
  double per_unit_max_drift = 0.0;
  /// Predicted bound on ||u(k) - y||^2.
  double predicted_bound = 0.0;
  std::optional<double> lambda_min_G;
  std::optional<double> jacobian_drift;
};

struct ConvergenceTrace {
  std::string method;
  double eta = 0.0;
  double initial_residual_norm = 0.0;
  double initial_loss = 0.0;
  double lambda_min_G0 = 0.0;
  /// Per-step factor on the squared residual used for predicted_bound.
  double predicted_factor = 1.0;
  bool eta_warning = false;
  /// Rows for k = 1..steps taken, one per completed step.
  std::vector<TraceRecord> records;
  std::vector<std::string> warnings;
};

/// Column order of the CSV trace.
inline constexpr const char* kTraceCsvHeader =
    "k,residual_norm,loss,weight_drift,per_unit_max_drift,predicted_bound,lambda_min_G,jacobian_drift";

std::string trace_to_csv(const ConvergenceTrace& trace);

struct TrainResult {
  NetworkParams params;
  ConvergenceTrace trace;
};

inline constexpr double kEarlyStopResidual = 1e-12;

/// Runs cfg.max_steps steps of cfg.method on validated data, stopping early
/// once ||u - y|| <= 1e-12. Throws DivergenceError on non-finite outputs.
/// Non-squared losses are supported by ngd_exact (general-loss step) and gd.
TrainResult train(const NetworkParams& p, const Dataset& ds, const OptimizerConfig& cfg);

}  // namespace ngdconv
