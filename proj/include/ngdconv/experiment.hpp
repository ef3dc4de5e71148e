#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "ngdconv/data.hpp"
#include "ngdconv/forster.hpp"
#include "ngdconv/gram.hpp"
#include "ngdconv/linearized.hpp"
#include "ngdconv/optim.hpp"
#include "ngdconv/theory.hpp"

namespace ngdconv {

using nlohmann::json;

inline constexpr const char* kVersion = "0.1.0";

struct SynthSpec {
  Eigen::Index n = 16;
  Eigen::Index d = 8;
  std::uint64_t seed = 0;
  TargetModel target_model = TargetModel::signed_linear;
};

struct DataSpec {
  std::optional<std::filesystem::path> path;
  LabelColumn label = std::string("y");
  std::optional<SynthSpec> synth;
};

struct PreprocessSpec {
  bool normalize = false;
  bool forster = false;
  ForsterOptions forster_options;
};

struct ModelSpec {
  Eigen::Index m = 1024;
  double nu = 1.0;
  std::uint64_t seed = 0;
};

struct OutputSpec {
  std::filesystem::path dir = "out";
  bool csv = true;
  bool json = true;
};

struct SweepSpec {
  std::vector<double> eta;
  std::vector<Eigen::Index> m;
  std::vector<std::uint64_t> seed;
};

struct VerifySpec {
  double delta = 0.1;
  double epsilon = 0.0;
  double beta = 0.3;
};

/// One experiment file. `document` is the JSON after CLI overrides and is
/// what gets hashed and echoed into the manifest.
struct ExperimentConfig {
  json document;
  DataSpec data;
  PreprocessSpec preprocess;
  ModelSpec model;
  OptimizerConfig optimizer;
  OutputSpec output;
  SweepSpec sweeps;
  VerifySpec verify;
  /// "path=value" strings for every CLI override applied.
  std::vector<std::string> overrides;
};

/// Parses the documented schema. Relative data paths resolve against
/// `base_dir`. Schema violations raise usage errors naming the field path.
ExperimentConfig parse_config(const json& document, const std::filesystem::path& base_dir = {});
ExperimentConfig load_config(const std::filesystem::path& path);

/// Sets a dotted field (e.g. "optimizer.eta") and re-parses.
void apply_override(ExperimentConfig& cfg, const std::string& dotted_path, const json& value);

/// FNV-1a 64 of the canonical JSON dump, as 16 hex digits.
std::string config_hash(const json& document);

/// Loads or synthesizes the data, applies normalization and Forster whitening
/// as configured, then validates. `forster` receives the transform if run.
Dataset prepare_dataset(const ExperimentConfig& cfg, ForsterResult* forster = nullptr);

struct RunCell {
  double eta = 0.0;
  Eigen::Index m = 0;
  std::uint64_t seed = 0;
  std::string tag;
};

/// Cartesian product of the sweep lists, falling back to scalar fields.
std::vector<RunCell> expand_cells(const ExperimentConfig& cfg);

struct CellOutcome {
  RunCell cell;
  TrainResult result;
  ConditionReport conditions;
};

/// Trains one cell in memory.
CellOutcome run_cell(const ExperimentConfig& cfg, const Dataset& ds, const RunCell& cell);

struct RunOptions {
  unsigned jobs = 1;
  bool quiet = true;
};

struct RunSummary {
  std::filesystem::path manifest;
  std::vector<std::filesystem::path> files;
  std::vector<CellOutcome> outcomes;
};

/// preprocess -> init -> train -> verify for every cell, writing traces,
/// per-cell reports and manifest.json into cfg.output.dir. Cells run on up to
/// `jobs` threads; each cell is single-threaded and seeded independently.
RunSummary run(const ExperimentConfig& cfg, const RunOptions& options = {});

struct CompareRow {
  std::string label;
  std::string method;
  double eta = 0.0;
  /// First k with ||u(k) - y|| <= 1e-3, or -1 if never reached.
  std::int64_t steps_to_threshold = -1;
  double final_residual = 0.0;
  /// Per-step factor from the rate predictor.
  double predicted_factor = 1.0;
  /// (||u(K) - y|| / ||u(0) - y||)^{1/K} over the K steps taken.
  double observed_factor = 1.0;
};

inline constexpr double kCompareThreshold = 1e-3;

/// Runs the first cell of each config on a shared dataset. Throws a contract
/// error unless all configs share data, preprocessing and model seed.
std::vector<CompareRow> compare(const std::vector<ExperimentConfig>& configs);
std::string compare_table(const std::vector<CompareRow>& rows);
json to_json(const std::vector<CompareRow>& rows);

/// Merges manifest, traces and reports of an output directory. Experiments
/// are sorted by (eta, m, seed). Throws io error when manifest.json is absent.
json report(const std::filesystem::path& output_dir);

/// Consolidated condition and bound report for the configured data and model.
json verify(const ExperimentConfig& cfg);

/// CSV with columns t,gd_residual,ngd_residual,weight_gap on `points` times
/// spread evenly over [0, infinite_time()].
std::string linearized_trajectory_csv(const LinearizedModel& lm, int points);

json to_json(const DataValidationReport& r);
json to_json(const ConditionReport& r);
json to_json(const GenBoundReport& r);
json to_json(const ConvergenceTrace& t);
json to_json(const ForsterResult& r);
json to_json(const SpectrumSummary& s, GramKind kind);

}  // namespace ngdconv
