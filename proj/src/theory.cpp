#include "ngdconv/theory.hpp"

#include <cmath>
#include <limits>

#include "ngdconv/gram.hpp"
#include "ngdconv/linalg.hpp"

namespace ngdconv {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

Matrix jacobian_difference_gram(const NetworkParams& p, const Matrix& X) {
  const Matrix dS = activation_pattern(p, X).Stilde - initial_activation_pattern(p, X).Stilde;
  return (X * X.transpose()).cwiseProduct(dS * dS.transpose());
}

}  // namespace

double jacobian_drift_spectral(const NetworkParams& p, const Matrix& X) {
  return std::sqrt(std::max(0.0, linalg::lambda_max(jacobian_difference_gram(p, X))));
}

double jacobian_drift_frobenius(const NetworkParams& p, const Matrix& X) {
  return std::sqrt(std::max(0.0, jacobian_difference_gram(p, X).trace()));
}

double max_eta_for_C(double C) { return (1.0 - 2.0 * C) / ((1.0 + C) * (1.0 + C)); }

ConditionReport check_conditions(const NetworkParams& initial, const NetworkParams& current,
                                 const Dataset& ds, double kappa) {
  if (!initial.same_architecture(current) || initial.w0() != current.w0()) {
    throw Error(ErrorKind::contract, "check_conditions: parameters do not share (m, d, a, w0)");
  }
  const NetworkParams at_init = initial.with_weights(initial.w0());
  const JacobianView j0 = jacobian(at_init, ds.X);
  const Vector u0 = forward(at_init, ds.X);
  const double r0 = (ds.y - u0).norm();

  ConditionReport rep;
  rep.kappa = kappa;
  rep.lambda_min_G0 = linalg::lambda_min(j0.gram());
  rep.distance = current.weight_drift();
  rep.jacobian_drift = jacobian_drift_spectral(current, ds.X);
  rep.condition1_holds = rep.lambda_min_G0 > kConditionOneFloor;
  if (!rep.condition1_holds) {
    rep.radius = kNaN;
    rep.C_estimate = kNaN;
    rep.max_eta_ngd = kNaN;
    rep.general_loss_radius = kNaN;
    return rep;
  }
  const double root = std::sqrt(rep.lambda_min_G0);
  rep.radius = 3.0 * r0 / root;
  rep.general_loss_radius = 3.0 * (1.0 + kappa) * r0 / (2.0 * root);
  rep.C_estimate = 3.0 * rep.jacobian_drift / root;
  rep.condition2_holds = rep.C_estimate < 0.5 && rep.distance <= rep.radius;
  rep.condition3_holds = rep.C_estimate < 1.0 / (1.0 + kappa) && rep.distance <= rep.general_loss_radius;
  rep.max_eta_ngd = std::max(0.0, max_eta_for_C(rep.C_estimate));
  return rep;
}

std::string to_string(Method method) {
  switch (method) {
    case Method::gd: return "gd";
    case Method::ngd_exact: return "ngd_exact";
    case Method::ngd_cg: return "ngd_cg";
    case Method::kfac: return "kfac";
  }
  return "unknown";
}

Method parse_method(const std::string& name) {
  if (name == "gd") return Method::gd;
  if (name == "ngd_exact" || name == "ngd") return Method::ngd_exact;
  if (name == "ngd_cg") return Method::ngd_cg;
  if (name == "kfac") return Method::kfac;
  throw Error(ErrorKind::usage, "unknown method '" + name + "'");
}

RatePrediction rate_predictor(Method method, double eta, const RateInputs& in) {
  RatePrediction out;
  double factor = 1.0;
  switch (method) {
    case Method::ngd_exact:
    case Method::ngd_cg: {
      if (!(in.mu > 0.0) || in.L < in.mu) {
        throw Error(ErrorKind::contract, "rate_predictor: need 0 < mu <= L");
      }
      if (in.mu == 1.0 && in.L == 1.0) {
        factor = 1.0 - eta;
        out.eta_warning = eta > max_eta_for_C(in.C);
        out.note = "exact NGD, squared loss";
      } else {
        const double kappa = in.L / in.mu;
        factor = 1.0 - 2.0 * eta * in.mu * in.L / (in.mu + in.L);
        const double ceiling = 2.0 / (in.mu + in.L) * (1.0 - (1.0 + kappa) * in.C) /
                               ((1.0 + in.C) * (1.0 + in.C));
        out.eta_warning = eta > ceiling;
        out.note = "exact NGD, strongly convex smooth loss";
      }
      break;
    }
    case Method::kfac: {
      if (!(in.lambda_max_xtx > 0.0)) {
        throw Error(ErrorKind::contract, "rate_predictor: kfac needs lambda_max(X^T X) > 0");
      }
      factor = 1.0 - eta / in.lambda_max_xtx;
      // Admissible step is O(lambda_min(X^T X)); the constant is taken as 1.
      out.eta_warning = in.lambda_min_xtx > 0.0 && eta > in.lambda_min_xtx;
      out.note = "K-FAC";
      break;
    }
    case Method::gd: {
      if (in.n < 1) throw Error(ErrorKind::contract, "rate_predictor: gd needs n");
      const double scaled = eta * in.lambda_min_G0 / static_cast<double>(in.n);
      factor = 1.0 - scaled;
      out.eta_warning = scaled > 1.0;
      out.note = "GD heuristic, unit constant";
      break;
    }
  }
  out.factor = std::clamp(factor, 0.0, 1.0);
  return out;
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t t) {
  // splitmix64 finalizer over the pair.
  std::uint64_t z = master + 0x9E3779B97F4A7C15ULL * (t + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

bool lambda0_floor_holds(const Matrix& X, double beta) {
  const double floor = std::pow(static_cast<double>(X.rows()), beta) / 2.0;
  return min_eig(limiting_gram(X)) >= floor;
}

Lambda0FloorResult lambda0_floor_check(Eigen::Index d, Eigen::Index n, double beta, int trials,
                                       std::uint64_t seed) {
  if (!(beta > 0.0 && beta < 0.5)) throw Error(ErrorKind::contract, "beta must lie in (0, 0.5)");
  if (trials < 1) throw Error(ErrorKind::contract, "need at least one trial");
  Lambda0FloorResult res;
  const double nn = static_cast<double>(n);
  res.floor = std::pow(nn, beta) / 2.0;
  res.failure_probability_bound = nn * std::exp(-std::pow(nn, beta) / 4.0);
  int passed = 0;
  for (int t = 0; t < trials; ++t) {
    const Dataset ds = synth_sphere(n, d, derive_seed(seed, static_cast<std::uint64_t>(t)));
    const double lam = min_eig(limiting_gram(ds));
    res.lambda_min.push_back(lam);
    if (lam >= res.floor) ++passed;
  }
  res.pass_rate = static_cast<double>(passed) / trials;
  return res;
}

GenBoundReport generalization_bound(const Dataset& ds, double delta, double epsilon) {
  if (!(delta > 0.0 && delta < 1.0)) throw Error(ErrorKind::contract, "delta must lie in (0, 1)");
  if (!(epsilon >= 0.0)) throw Error(ErrorKind::contract, "epsilon must be >= 0");
  const GramMatrix g = limiting_gram(ds);
  const double lam = min_eig(g);
  if (!(lam > 1e-12)) {
    throw SingularError("limiting Gram matrix is singular (lambda_min = " + std::to_string(lam) + ")", lam);
  }
  const double n = static_cast<double>(ds.n());
  const Vector z = linalg::symmetric_solve(g.M, ds.y);
  GenBoundReport r;
  r.delta = delta;
  r.epsilon = epsilon;
  r.quad_term = std::sqrt(std::max(0.0, 2.0 * ds.y.dot(z) / n));
  r.conf_term = 3.0 * std::sqrt(std::log(6.0 / delta) / (2.0 * n));
  r.total = r.quad_term + r.conf_term + r.epsilon;
  return r;
}

double restricted_class_rademacher(double A, double B, double m, double n, double delta) {
  const double lg = std::log(2.0 / delta);
  return B / std::sqrt(2.0 * n) * (1.0 + std::pow(2.0 * lg / m, 0.25)) + 2.0 * A * A * std::sqrt(m) +
         A * std::sqrt(2.0 * lg);
}

double overparam_requirement(double n, double lambda0_hat, double nu, double delta) {
  if (!(n > 0 && lambda0_hat > 0 && nu > 0 && delta > 0)) {
    throw Error(ErrorKind::contract, "overparam_requirement needs positive inputs");
  }
  return std::pow(n, 4) / (nu * nu * std::pow(lambda0_hat, 4) * std::pow(delta, 3));
}

}  // namespace ngdconv
