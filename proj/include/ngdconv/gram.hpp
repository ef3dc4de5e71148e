#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "ngdconv/common.hpp"
#include "ngdconv/data.hpp"
#include "ngdconv/network.hpp"

namespace ngdconv {

enum class GramKind { limiting, finite, pre_activation };

std::string to_string(GramKind kind);
GramKind parse_gram_kind(const std::string& name);

struct GramMatrix {
  Matrix M;
  GramKind kind;
};

/// G_inf(i,j) = <x_i,x_j> (pi - arccos <x_i,x_j>) / (2 pi), the arccos
/// argument clamped to [-1, 1]. Diagonals of unit rows are exactly 1/2.
GramMatrix limiting_gram(const Matrix& X);
GramMatrix limiting_gram(const Dataset& ds);

/// J J^T through the factored form (1/m)(X X^T .* S S^T).
GramMatrix finite_gram(const JacobianView& jv);

struct MonteCarloGram {
  GramMatrix mean;
  /// Per-entry standard error of the mean.
  Matrix standard_error;
};

/// Sample mean of <x_i,x_j> 1{w^T x_i >= 0, w^T x_j >= 0} with w ~ N(0, nu^2 I).
MonteCarloGram mc_limiting_gram(const Matrix& X, double nu, std::int64_t samples, std::uint64_t seed);

/// (1/m) S S^T with the unsigned 0/1 pattern, so finite = (X X^T) .* this.
GramMatrix pre_activation_gram(const ActivationPattern& ap);

/// Symmetric-solver eigenvalue extremes. Contract error if asymmetric beyond 1e-9.
double min_eig(const GramMatrix& g);
double max_eig(const GramMatrix& g);
double min_eig(const Matrix& m);
double max_eig(const Matrix& m);

struct SpectrumSummary {
  double lambda_min_raw = 0.0;
  /// lambda_min_raw clipped at zero.
  double lambda_min = 0.0;
  double lambda_max = 0.0;
  /// lambda_max / lambda_min, infinite when lambda_min is clipped to zero.
  double condition_number = 0.0;
};

SpectrumSummary spectrum(const GramMatrix& g);

struct HadamardBounds {
  double lower;
  double upper;
};

/// Schur bounds for PD A, B: min_i A_ii lambda_min(B) <= lambda_min(A .* B) and
/// lambda_max(A .* B) <= max_i A_ii lambda_max(B).
HadamardBounds hadamard_bounds(const Matrix& A, const Matrix& B);

void save_gram_csv(const GramMatrix& g, const std::filesystem::path& path);

}  // namespace ngdconv
