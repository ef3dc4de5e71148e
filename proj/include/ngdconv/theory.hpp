#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ngdconv/common.hpp"
#include "ngdconv/data.hpp"
#include "ngdconv/network.hpp"

namespace ngdconv {

/// Per-iterate monitor of the full-rank and stable-Jacobian conditions.
/// The stability condition is only evaluated at the given iterate, not over
/// the whole ball around the initialization.
struct ConditionReport {
  double lambda_min_G0 = 0.0;
  /// 3 ||y - u(0)|| / sqrt(lambda_min(G(0)))
  double radius = 0.0;
  /// ||w - w(0)||_F at the evaluated iterate.
  double distance = 0.0;
  /// ||J(w) - J(0)||_2
  double jacobian_drift = 0.0;
  /// 3 ||J(w) - J(0)||_2 / sqrt(lambda_min(G(0)))
  double C_estimate = 0.0;
  bool condition1_holds = false;
  bool condition2_holds = false;
  /// (1 - 2C) / (1 + C)^2
  double max_eta_ngd = 0.0;
  /// 3 (1 + kappa) ||y - u(0)|| / (2 sqrt(lambda_min(G(0))))
  double general_loss_radius = 0.0;
  double kappa = 1.0;
  /// C_estimate < 1/(1 + kappa) and distance within general_loss_radius.
  bool condition3_holds = false;
};

inline constexpr double kConditionOneFloor = 1e-12;

/// Evaluates the conditions at `current` relative to the initialization stored
/// in `initial` (its w0). Both must share (m, d, a). When lambda_min(G(0)) is
/// at or below 1e-12, condition1_holds is false and the radius/C fields are NaN.
ConditionReport check_conditions(const NetworkParams& initial, const NetworkParams& current,
                                 const Dataset& ds, double kappa = 1.0);

/// ||J(w) - J(0)||_2 and ||J(w) - J(0)||_F through (XX^T) .* (dS dS^T).
double jacobian_drift_spectral(const NetworkParams& p, const Matrix& X);
double jacobian_drift_frobenius(const NetworkParams& p, const Matrix& X);

/// (1 - 2C)/(1 + C)^2, the step-size ceiling of the exact-NGD rate.
double max_eta_for_C(double C);

enum class Method { gd, ngd_exact, ngd_cg, kfac };

std::string to_string(Method method);
Method parse_method(const std::string& name);

struct RateInputs {
  /// Needed for kfac.
  double lambda_max_xtx = 0.0;
  double lambda_min_xtx = 0.0;
  /// Needed for gd: lambda_min(G(0)) and n.
  double lambda_min_G0 = 0.0;
  Eigen::Index n = 0;
  /// Loss curvature; squared loss when mu = L = 1.
  double mu = 1.0;
  double L = 1.0;
  /// Stability constant used for the ngd admissible step, 0 when unknown.
  double C = 0.0;
};

struct RatePrediction {
  /// Per-step factor on ||u - y||^2, clamped to [0, 1].
  double factor = 1.0;
  /// Step exceeds the method's admissible bound (unit constants).
  bool eta_warning = false;
  std::string note;
};

/// ngd (squared): 1 - eta. kfac: 1 - eta / lambda_max(X^T X).
/// ngd with (mu, L) loss: 1 - 2 eta mu L / (mu + L).
/// gd: 1 - eta lambda_min(G(0)) / n, a heuristic for the (1/n)-scaled loss.
RatePrediction rate_predictor(Method method, double eta, const RateInputs& in);

struct Lambda0FloorResult {
  double pass_rate = 0.0;
  double floor = 0.0;
  /// n exp(-n^beta / 4)
  double failure_probability_bound = 0.0;
  std::vector<double> lambda_min;
};

/// Fraction of uniform-sphere draws with lambda_min(G_inf) >= n^beta / 2.
/// Trial t uses data seed derived from (seed, t).
Lambda0FloorResult lambda0_floor_check(Eigen::Index d, Eigen::Index n, double beta, int trials,
                                       std::uint64_t seed);

/// The same floor test on one fixed input matrix.
bool lambda0_floor_holds(const Matrix& X, double beta);

struct GenBoundReport {
  /// sqrt(2 y^T G_inf^{-1} y / n)
  double quad_term = 0.0;
  /// 3 sqrt(log(6/delta) / (2n))
  double conf_term = 0.0;
  double epsilon = 0.0;
  double total = 0.0;
  double delta = 0.0;
};

/// Expected-loss bound of a wide NGD-trained network. Throws SingularError
/// when lambda_min(G_inf) <= 1e-12.
GenBoundReport generalization_bound(const Dataset& ds, double delta, double epsilon);

/// Rademacher complexity bound of the class {||w_r - w_r(0)|| <= A, ||w - w(0)|| <= B}:
///   B/sqrt(2n) (1 + (2 log(2/delta)/m)^{1/4}) + 2 A^2 sqrt(m) + A sqrt(2 log(2/delta))
double restricted_class_rademacher(double A, double B, double m, double n, double delta);

/// n^4 / (nu^2 lambda0^4 delta^3) with every hidden constant set to 1.
/// An order-of-magnitude heuristic only.
double overparam_requirement(double n, double lambda0_hat, double nu, double delta);

/// Seed for trial `t` of a sweep rooted at `master`.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t t);

}  // namespace ngdconv
