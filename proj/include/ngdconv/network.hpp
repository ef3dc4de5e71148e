#pragma once

#include <cstdint>
#include <filesystem>

#include "ngdconv/common.hpp"

namespace ngdconv {

/// First-layer weights of the two-layer ReLU network
///   f(x) = (1/sqrt(m)) * sum_r a_r * relu(w_r^T x)
/// The output signs `a` and the initial snapshot `w0` are fixed at
/// construction; only `w` is trained.
class NetworkParams {
 public:
  /// Throws contract errors when m < 1, nu <= 0, or an entry of `a` is not +-1.
  NetworkParams(Matrix w, Vector a, double nu, std::uint64_t seed = 0);

  /// Same (a, w0, nu, seed) with new trainable weights.
  NetworkParams with_weights(Matrix w) const;

  const Matrix& w() const { return w_; }
  const Vector& a() const { return a_; }
  const Matrix& w0() const { return w0_; }
  double nu() const { return nu_; }
  std::uint64_t seed() const { return seed_; }
  Eigen::Index m() const { return w_.rows(); }
  Eigen::Index d() const { return w_.cols(); }

  /// ||w - w0||_F
  double weight_drift() const;
  /// max_r ||w_r - w0_r||_2
  double per_unit_max_drift() const;

  bool same_architecture(const NetworkParams& other) const;

 private:
  NetworkParams(Matrix w, Vector a, Matrix w0, double nu, std::uint64_t seed);

  Matrix w_;
  Vector a_;
  Matrix w0_;
  double nu_;
  std::uint64_t seed_;

  friend NetworkParams load_params(const std::filesystem::path&);
};

/// w ~ N(0, nu^2) entrywise, a ~ unif{-1, +1}; deterministic in `seed`.
NetworkParams init(Eigen::Index m, Eigen::Index d, double nu, std::uint64_t seed);

/// u_i = (1/sqrt(m)) sum_r a_r max(w_r^T x_i, 0)
Vector forward(const NetworkParams& p, const Matrix& X);

struct ActivationPattern {
  /// S(i, r) = 1{w_r^T x_i >= 0}
  Matrix S;
  /// Stilde(i, r) = a_r S(i, r) / sqrt(m)
  Matrix Stilde;
};

ActivationPattern activation_pattern(const NetworkParams& p, const Matrix& X);
/// Pattern evaluated at the frozen initial weights.
ActivationPattern initial_activation_pattern(const NetworkParams& p, const Matrix& X);

/// Jacobian of the outputs with respect to w, held in factored form.
/// Row i of the dense form is the unit-major concatenation of
/// Stilde(i, r) * x_i^T over r = 0..m-1.
class JacobianView {
 public:
  JacobianView(Matrix X, Matrix Stilde);

  const Matrix& X() const { return X_; }
  const Matrix& Stilde() const { return Stilde_; }
  Eigen::Index n() const { return X_.rows(); }
  Eigen::Index d() const { return X_.cols(); }
  Eigen::Index m() const { return Stilde_.cols(); }

  /// n x (m*d), block r occupies columns [r*d, r*d + d).
  Matrix dense() const;

  /// J vec(V) for an m x d direction V.
  Vector apply(const Matrix& V) const;

  /// J^T z reshaped to m x d: Stilde^T diag(z) X.
  Matrix apply_transpose(const Vector& z) const;

  /// J J^T = (X X^T) .* (Stilde Stilde^T)
  Matrix gram() const;

 private:
  Matrix X_;
  Matrix Stilde_;
};

JacobianView jacobian(const NetworkParams& p, const Matrix& X);

/// Row-major m x d matrix from a unit-major flat vector of length m*d.
Matrix unflatten_weights(const Vector& flat, Eigen::Index m, Eigen::Index d);
Vector flatten_weights(const Matrix& w);

/// Text checkpoint:
///   line 1: ngdconv-params,1,<m>,<d>,<nu>,<seed>
///   lines 2..m+1: a_r,w_r[0..d-1],w0_r[0..d-1]
void save_params(const NetworkParams& p, const std::filesystem::path& path);
NetworkParams load_params(const std::filesystem::path& path);

}  // namespace ngdconv
