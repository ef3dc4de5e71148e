#include "ngdconv/data.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>
#include <vector>

#include "ngdconv/io.hpp"
#include "ngdconv/linalg.hpp"

namespace ngdconv {

namespace {

[[noreturn]] void format_error(std::size_t line, std::size_t column, const std::string& msg) {
  std::ostringstream os;
  os << "CSV format error at line " << line << ", column " << column << ": " << msg;
  throw Error(ErrorKind::format, os.str());
}

}  // namespace

Dataset load_csv(const std::filesystem::path& path, const CsvOptions& options) {
  const std::string text = io::read_file(path);

  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> line_numbers;
  {
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.find_first_not_of(" \t") == std::string::npos) continue;
      rows.push_back(io::split_csv_line(line));
      line_numbers.push_back(line_no);
    }
  }
  if (rows.empty()) throw Error(ErrorKind::format, "CSV file is empty: " + path.string());

  std::vector<std::string> header;
  const bool has_header = std::any_of(rows.front().begin(), rows.front().end(),
                                      [](const std::string& f) { return !io::parse_double(f); });
  if (has_header) {
    header = rows.front();
    rows.erase(rows.begin());
    line_numbers.erase(line_numbers.begin());
  }
  if (rows.size() < 2) throw Error(ErrorKind::format, "CSV needs at least 2 data rows");

  const std::size_t cols = rows.front().size();
  if (cols < 3) throw Error(ErrorKind::format, "CSV needs at least d+1 >= 3 columns");
  if (has_header && header.size() != cols) {
    format_error(line_numbers.front() - 1, header.size(), "header width differs from data width");
  }

  std::size_t label = 0;
  if (const auto* idx = std::get_if<std::size_t>(&options.label)) {
    label = *idx;
  } else {
    const auto& name = std::get<std::string>(options.label);
    if (!has_header) {
      throw Error(ErrorKind::format, "label column '" + name + "' given by name but CSV has no header");
    }
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) {
      throw Error(ErrorKind::format, "label column '" + name + "' not found in header");
    }
    label = static_cast<std::size_t>(it - header.begin());
  }
  if (label >= cols) throw Error(ErrorKind::format, "label column index out of range");

  const auto n = static_cast<Eigen::Index>(rows.size());
  const auto d = static_cast<Eigen::Index>(cols - 1);
  Dataset ds{Matrix(n, d), Vector(n)};
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& fields = rows[static_cast<std::size_t>(i)];
    const std::size_t line_no = line_numbers[static_cast<std::size_t>(i)];
    if (fields.size() != cols) {
      format_error(line_no, std::min(fields.size(), cols) + 1, "expected " + std::to_string(cols) + " fields");
    }
    Eigen::Index feature = 0;
    for (std::size_t c = 0; c < cols; ++c) {
      const auto value = io::parse_double(fields[c]);
      if (!value) format_error(line_no, c + 1, "not a number: '" + fields[c] + "'");
      if (c == label) {
        ds.y(i) = *value;
      } else {
        ds.X(i, feature++) = *value;
      }
    }
  }
  if (options.normalize) ds.X = linalg::normalize_rows(ds.X);
  return ds;
}

void save_csv(const Dataset& ds, const std::filesystem::path& path) {
  require_shape(ds.y.size() == ds.n(), "save_csv: X and y row counts differ");
  std::string out;
  for (Eigen::Index c = 0; c < ds.d(); ++c) out += "x" + std::to_string(c) + ",";
  out += "y\n";
  for (Eigen::Index i = 0; i < ds.n(); ++i) {
    for (Eigen::Index c = 0; c < ds.d(); ++c) {
      out += io::format_double(ds.X(i, c));
      out += ',';
    }
    out += io::format_double(ds.y(i));
    out += '\n';
  }
  io::write_file_atomic(path, out);
}

DataValidationReport validate(const Dataset& ds) {
  DataValidationReport r;
  const Eigen::Index n = ds.n();
  r.shape_ok = n >= 2 && ds.d() >= 2 && ds.y.size() == n;

  for (Eigen::Index i = 0; i < n; ++i) {
    r.max_norm_deviation = std::max(r.max_norm_deviation, std::abs(ds.X.row(i).norm() - 1.0));
  }
  r.min_pairwise_angle_gap = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double gap = 1.0 - std::abs(ds.X.row(i).dot(ds.X.row(j)));
      r.min_pairwise_angle_gap = std::min(r.min_pairwise_angle_gap, gap);
    }
  }
  if (n < 2) r.min_pairwise_angle_gap = 0.0;
  r.max_abs_target = ds.y.size() > 0 ? ds.y.cwiseAbs().maxCoeff() : 0.0;

  r.norms_ok = r.max_norm_deviation <= kNormTolerance;
  r.non_parallel_ok = r.min_pairwise_angle_gap > kParallelTolerance;
  r.target_range_warning = r.max_abs_target > kTargetWarnThreshold;
  r.passed = r.shape_ok && r.norms_ok && r.non_parallel_ok;
  return r;
}

void require_valid(const Dataset& ds) {
  const auto r = validate(ds);
  if (r.passed) return;
  std::ostringstream os;
  os << "dataset fails input assumptions:";
  if (!r.shape_ok) os << " need n >= 2, d >= 2 and one target per row;";
  if (!r.norms_ok) os << " row norms deviate from 1 by " << r.max_norm_deviation << ";";
  if (!r.non_parallel_ok) os << " parallel rows (angle gap " << r.min_pairwise_angle_gap << ");";
  throw Error(ErrorKind::degenerate_input, os.str());
}

TargetModel parse_target_model(const std::string& name) {
  if (name == "signed_linear") return TargetModel::signed_linear;
  if (name == "random_pm1") return TargetModel::random_pm1;
  throw Error(ErrorKind::usage, "unknown target model '" + name + "'");
}

std::string to_string(TargetModel model) {
  return model == TargetModel::signed_linear ? "signed_linear" : "random_pm1";
}

Dataset synth_sphere(Eigen::Index n, Eigen::Index d, std::uint64_t seed, TargetModel target_model) {
  if (n < 2 || d < 2) throw Error(ErrorKind::contract, "synth_sphere needs n >= 2 and d >= 2");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  Matrix x(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index c = 0; c < d; ++c) x(i, c) = normal(rng);
  }
  Dataset ds{linalg::normalize_rows(x), Vector(n)};

  if (target_model == TargetModel::signed_linear) {
    Vector teacher(d);
    for (Eigen::Index c = 0; c < d; ++c) teacher(c) = normal(rng);
    teacher.normalize();
    for (Eigen::Index i = 0; i < n; ++i) {
      ds.y(i) = ds.X.row(i).dot(teacher) >= 0.0 ? 1.0 : -1.0;
    }
  } else {
    std::bernoulli_distribution coin(0.5);
    for (Eigen::Index i = 0; i < n; ++i) ds.y(i) = coin(rng) ? 1.0 : -1.0;
  }
  return ds;
}

}  // namespace ngdconv
