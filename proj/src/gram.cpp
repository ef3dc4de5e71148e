#include "ngdconv/gram.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "ngdconv/io.hpp"
#include "ngdconv/linalg.hpp"

namespace ngdconv {

namespace {
constexpr double kSymmetryTolerance = 1e-9;
}

std::string to_string(GramKind kind) {
  switch (kind) {
    case GramKind::limiting: return "limiting";
    case GramKind::finite: return "finite";
    case GramKind::pre_activation: return "pre_activation";
  }
  return "unknown";
}

GramKind parse_gram_kind(const std::string& name) {
  if (name == "limiting") return GramKind::limiting;
  if (name == "finite") return GramKind::finite;
  if (name == "pre_activation") return GramKind::pre_activation;
  throw Error(ErrorKind::usage, "unknown Gram kind '" + name + "'");
}

GramMatrix limiting_gram(const Matrix& X) {
  const Eigen::Index n = X.rows();
  const Matrix inner = X * X.transpose();
  Matrix M(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    // Self-angle is exactly zero; unit rows get exactly 1/2.
    const double sq = inner(i, i);
    M(i, i) = std::abs(sq - 1.0) <= kNormTolerance ? 0.5 : 0.5 * sq;
    for (Eigen::Index j = 0; j < i; ++j) {
      const double c = std::clamp(inner(i, j), -1.0, 1.0);
      const double v = inner(i, j) * (std::numbers::pi - std::acos(c)) / (2.0 * std::numbers::pi);
      M(i, j) = v;
      M(j, i) = v;
    }
  }
  return {std::move(M), GramKind::limiting};
}

GramMatrix limiting_gram(const Dataset& ds) { return limiting_gram(ds.X); }

GramMatrix finite_gram(const JacobianView& jv) { return {jv.gram(), GramKind::finite}; }

MonteCarloGram mc_limiting_gram(const Matrix& X, double nu, std::int64_t samples, std::uint64_t seed) {
  if (samples < 1) throw Error(ErrorKind::contract, "mc_limiting_gram needs samples >= 1");
  if (!(nu > 0.0)) throw Error(ErrorKind::contract, "mc_limiting_gram needs nu > 0");
  const Eigen::Index n = X.rows();
  const Eigen::Index d = X.cols();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, nu);

  // Count joint activations; the integrand is <x_i,x_j> times a Bernoulli.
  Matrix counts = Matrix::Zero(n, n);
  Vector w(d);
  Vector fired(n);
  for (std::int64_t s = 0; s < samples; ++s) {
    for (Eigen::Index c = 0; c < d; ++c) w(c) = normal(rng);
    fired = ((X * w).array() >= 0.0).cast<double>();
    counts.selfadjointView<Eigen::Lower>().rankUpdate(fired);
  }
  counts = counts.selfadjointView<Eigen::Lower>();

  const double total = static_cast<double>(samples);
  const Matrix inner = X * X.transpose();
  MonteCarloGram out{{Matrix(n, n), GramKind::limiting}, Matrix(n, n)};
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      const double p = counts(i, j) / total;
      out.mean.M(i, j) = inner(i, j) * p;
      out.standard_error(i, j) = std::abs(inner(i, j)) * std::sqrt(p * (1.0 - p) / total);
    }
  }
  return out;
}

GramMatrix pre_activation_gram(const ActivationPattern& ap) {
  const double m = static_cast<double>(ap.S.cols());
  return {ap.S * ap.S.transpose() / m, GramKind::pre_activation};
}

double min_eig(const Matrix& m) {
  linalg::require_symmetric(m, kSymmetryTolerance, "min_eig");
  return linalg::lambda_min(m);
}

double max_eig(const Matrix& m) {
  linalg::require_symmetric(m, kSymmetryTolerance, "max_eig");
  return linalg::lambda_max(m);
}

double min_eig(const GramMatrix& g) { return min_eig(g.M); }
double max_eig(const GramMatrix& g) { return max_eig(g.M); }

SpectrumSummary spectrum(const GramMatrix& g) {
  linalg::require_symmetric(g.M, kSymmetryTolerance, "spectrum");
  const Vector ev = linalg::symmetric_eigenvalues(g.M);
  SpectrumSummary s;
  s.lambda_min_raw = ev(0);
  s.lambda_min = std::max(ev(0), 0.0);
  s.lambda_max = ev(ev.size() - 1);
  s.condition_number = s.lambda_min > 0.0 ? s.lambda_max / s.lambda_min
                                          : std::numeric_limits<double>::infinity();
  return s;
}

HadamardBounds hadamard_bounds(const Matrix& A, const Matrix& B) {
  require_shape(A.rows() == B.rows() && A.cols() == B.cols(), "hadamard_bounds: shape mismatch");
  linalg::require_symmetric(A, kSymmetryTolerance, "hadamard_bounds(A)");
  linalg::require_symmetric(B, kSymmetryTolerance, "hadamard_bounds(B)");
  if (!(linalg::lambda_min(A) > 0.0) || !(linalg::lambda_min(B) > 0.0)) {
    throw Error(ErrorKind::contract, "hadamard_bounds requires positive definite inputs");
  }
  const Vector evB = linalg::symmetric_eigenvalues(B);
  return {A.diagonal().minCoeff() * evB(0), A.diagonal().maxCoeff() * evB(evB.size() - 1)};
}

void save_gram_csv(const GramMatrix& g, const std::filesystem::path& path) {
  std::string out;
  for (Eigen::Index i = 0; i < g.M.rows(); ++i) {
    for (Eigen::Index j = 0; j < g.M.cols(); ++j) {
      if (j) out += ',';
      out += io::format_double(g.M(i, j));
    }
    out += '\n';
  }
  io::write_file_atomic(path, out);
}

}  // namespace ngdconv
