#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <variant>

#include "ngdconv/common.hpp"

namespace ngdconv {

/// Training inputs (one example per row of X) and scalar targets.
struct Dataset {
  Matrix X;
  Vector y;

  Eigen::Index n() const { return X.rows(); }
  Eigen::Index d() const { return X.cols(); }
};

struct DataValidationReport {
  double max_norm_deviation = 0.0;
  /// min over i != j of 1 - |x_i^T x_j|.
  double min_pairwise_angle_gap = 0.0;
  double max_abs_target = 0.0;
  bool shape_ok = false;
  bool norms_ok = false;
  bool non_parallel_ok = false;
  /// Set when some |y_i| > 10. Not a failure.
  bool target_range_warning = false;
  bool passed = false;
};

inline constexpr double kNormTolerance = 1e-9;
inline constexpr double kParallelTolerance = 1e-12;
inline constexpr double kTargetWarnThreshold = 10.0;

/// Label column selector: a header name or a zero-based index.
using LabelColumn = std::variant<std::string, std::size_t>;

struct CsvOptions {
  LabelColumn label = std::string("y");
  bool normalize = false;
};

/// Reads a numeric CSV. The first line is treated as a header when any of its
/// fields is not a number. A string label requires a header.
Dataset load_csv(const std::filesystem::path& path, const CsvOptions& options = {});

/// Writes `x0,...,x{d-1},y` with a header, using shortest round-trip decimals.
void save_csv(const Dataset& ds, const std::filesystem::path& path);

DataValidationReport validate(const Dataset& ds);

/// Throws degenerate_input with a description of the first failed check.
void require_valid(const Dataset& ds);

enum class TargetModel { signed_linear, random_pm1 };

TargetModel parse_target_model(const std::string& name);
std::string to_string(TargetModel model);

/// Rows i.i.d. uniform on the unit sphere (Gaussian draw, then normalized).
/// signed_linear: y_i = sign(v^T x_i) for a random unit teacher v.
/// random_pm1: y_i uniform on {-1, +1}.
Dataset synth_sphere(Eigen::Index n, Eigen::Index d, std::uint64_t seed,
                     TargetModel target_model = TargetModel::signed_linear);

}  // namespace ngdconv
