#include "ngdconv/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <ctime>
#include <exception>
#include <iomanip>
#include <mutex>
#include <sstream>
#include <thread>

#include "ngdconv/io.hpp"
#include "ngdconv/linalg.hpp"

namespace ngdconv {

namespace {

[[noreturn]] void schema_error(const std::string& path, const std::string& msg) {
  throw Error(ErrorKind::usage, "config field '" + path + "': " + msg);
}

const json* find(const json& obj, const char* key) {
  const auto it = obj.find(key);
  return it == obj.end() || it->is_null() ? nullptr : &*it;
}

const json& require_object(const json& j, const std::string& path) {
  if (!j.is_object()) schema_error(path, "expected an object");
  return j;
}

double get_number(const json& obj, const std::string& parent, const char* key, double fallback) {
  const json* v = find(obj, key);
  if (!v) return fallback;
  if (!v->is_number()) schema_error(parent + "." + key, "expected a number");
  return v->get<double>();
}

std::int64_t get_int(const json& obj, const std::string& parent, const char* key, std::int64_t fallback) {
  const json* v = find(obj, key);
  if (!v) return fallback;
  if (!v->is_number_integer()) schema_error(parent + "." + key, "expected an integer");
  return v->get<std::int64_t>();
}

std::uint64_t get_seed(const json& obj, const std::string& parent, const char* key, std::uint64_t fallback) {
  const std::int64_t v = get_int(obj, parent, key, static_cast<std::int64_t>(fallback));
  if (v < 0) schema_error(parent + "." + key, "expected a non-negative integer");
  return static_cast<std::uint64_t>(v);
}

bool get_bool(const json& obj, const std::string& parent, const char* key, bool fallback) {
  const json* v = find(obj, key);
  if (!v) return fallback;
  if (!v->is_boolean()) schema_error(parent + "." + key, "expected true or false");
  return v->get<bool>();
}

std::string get_string(const json& obj, const std::string& parent, const char* key, const std::string& fallback) {
  const json* v = find(obj, key);
  if (!v) return fallback;
  if (!v->is_string()) schema_error(parent + "." + key, "expected a string");
  return v->get<std::string>();
}

template <class T, class Convert>
std::vector<T> get_list(const json& obj, const std::string& parent, const char* key, Convert convert) {
  const json* v = find(obj, key);
  if (!v) return {};
  const std::string path = parent + "." + key;
  if (!v->is_array() || v->empty()) schema_error(path, "expected a non-empty list");
  std::vector<T> out;
  for (std::size_t i = 0; i < v->size(); ++i) out.push_back(convert((*v)[i], path + "[" + std::to_string(i) + "]"));
  return out;
}

LossSpec parse_loss(const json& j, const std::string& path) {
  require_object(j, path);
  const std::string kind = get_string(j, path, "kind", "squared");
  if (kind == "squared") return squared_loss();
  if (kind == "strongly_convex_smooth") {
    const double mu = get_number(j, path, "mu", 0.5);
    if (!(mu > 0.0)) schema_error(path + ".mu", "must be > 0");
    return reference_strongly_convex_loss(mu);
  }
  schema_error(path + ".kind", "expected 'squared' or 'strongly_convex_smooth'");
}

std::string cell_tag(double eta, Eigen::Index m, std::uint64_t seed) {
  return "eta" + io::format_double(eta) + "_m" + std::to_string(m) + "_seed" + std::to_string(seed);
}

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

json optional_number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

}  // namespace

ExperimentConfig parse_config(const json& document, const std::filesystem::path& base_dir) {
  ExperimentConfig cfg;
  cfg.document = document;
  require_object(document, "<root>");

  // data
  {
    const json* data = find(document, "data");
    if (!data) schema_error("data", "missing");
    require_object(*data, "data");
    const json* path = find(*data, "path");
    const json* synth = find(*data, "synth");
    if ((path != nullptr) == (synth != nullptr)) schema_error("data", "give exactly one of 'path' or 'synth'");
    if (path) {
      if (!path->is_string()) schema_error("data.path", "expected a string");
      std::filesystem::path p = path->get<std::string>();
      if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
      cfg.data.path = p;
      if (const json* label = find(*data, "label_column")) {
        if (label->is_string()) {
          cfg.data.label = label->get<std::string>();
        } else if (label->is_number_unsigned() || (label->is_number_integer() && label->get<std::int64_t>() >= 0)) {
          cfg.data.label = label->get<std::size_t>();
        } else {
          schema_error("data.label_column", "expected a name or a zero-based index");
        }
      }
    } else {
      require_object(*synth, "data.synth");
      SynthSpec s;
      s.n = get_int(*synth, "data.synth", "n", s.n);
      s.d = get_int(*synth, "data.synth", "d", s.d);
      s.seed = get_seed(*synth, "data.synth", "seed", s.seed);
      const std::string tm = get_string(*synth, "data.synth", "target_model", "signed_linear");
      if (tm != "signed_linear" && tm != "random_pm1") {
        schema_error("data.synth.target_model", "expected 'signed_linear' or 'random_pm1'");
      }
      s.target_model = parse_target_model(tm);
      if (s.n < 2 || s.d < 2) schema_error("data.synth", "need n >= 2 and d >= 2");
      cfg.data.synth = s;
    }
  }

  if (const json* pre = find(document, "preprocess")) {
    require_object(*pre, "preprocess");
    cfg.preprocess.normalize = get_bool(*pre, "preprocess", "normalize", false);
    cfg.preprocess.forster = get_bool(*pre, "preprocess", "forster", false);
    cfg.preprocess.forster_options.tol = get_number(*pre, "preprocess", "forster_tol", 1e-8);
    cfg.preprocess.forster_options.max_iter =
        static_cast<int>(get_int(*pre, "preprocess", "forster_max_iter", 10000));
  }

  if (const json* model = find(document, "model")) {
    require_object(*model, "model");
    cfg.model.m = get_int(*model, "model", "m", cfg.model.m);
    cfg.model.nu = get_number(*model, "model", "nu", cfg.model.nu);
    cfg.model.seed = get_seed(*model, "model", "seed", cfg.model.seed);
    if (cfg.model.m < 1) schema_error("model.m", "must be >= 1");
    if (!(cfg.model.nu > 0.0)) schema_error("model.nu", "must be > 0");
  }

  if (const json* opt = find(document, "optimizer")) {
    require_object(*opt, "optimizer");
    OptimizerConfig& o = cfg.optimizer;
    const std::string method = get_string(*opt, "optimizer", "method", "ngd_exact");
    try {
      o.method = parse_method(method);
    } catch (const Error&) {
      schema_error("optimizer.method", "expected one of gd, ngd_exact, ngd_cg, kfac");
    }
    o.eta = get_number(*opt, "optimizer", "eta", o.eta);
    if (!(o.eta > 0.0)) schema_error("optimizer.eta", "must be > 0");
    if (const json* damping = find(*opt, "damping")) {
      if (!damping->is_number() || damping->get<double>() < 0.0) {
        schema_error("optimizer.damping", "expected a number >= 0 or null");
      }
      o.damping = damping->get<double>();
    }
    o.cg_iters = static_cast<int>(get_int(*opt, "optimizer", "cg_iters", o.cg_iters));
    o.cg_tol = get_number(*opt, "optimizer", "cg_tol", o.cg_tol);
    o.max_steps = static_cast<int>(get_int(*opt, "optimizer", "max_steps", o.max_steps));
    if (o.max_steps < 0) schema_error("optimizer.max_steps", "must be >= 0");
    if (o.cg_iters < 0) schema_error("optimizer.cg_iters", "must be >= 0");
    if (const json* loss = find(*opt, "loss")) o.loss = parse_loss(*loss, "optimizer.loss");
    if (o.method == Method::kfac && o.loss.kind != LossKind::squared) {
      schema_error("optimizer.loss", "kfac supports the squared loss only");
    }
    if (const json* diag = find(*opt, "diagnostics")) {
      require_object(*diag, "optimizer.diagnostics");
      o.diagnostics.track_lambda_min = get_bool(*diag, "optimizer.diagnostics", "track_lambda_min", false);
      o.diagnostics.track_jacobian_drift = get_bool(*diag, "optimizer.diagnostics", "track_jacobian_drift", false);
    }
  }

  if (const json* out = find(document, "output")) {
    require_object(*out, "output");
    cfg.output.dir = get_string(*out, "output", "dir", cfg.output.dir.string());
    if (const json* formats = find(*out, "formats")) {
      if (!formats->is_array() || formats->empty()) schema_error("output.formats", "expected a non-empty list");
      cfg.output.csv = cfg.output.json = false;
      for (const auto& f : *formats) {
        if (f == "csv") {
          cfg.output.csv = true;
        } else if (f == "json") {
          cfg.output.json = true;
        } else {
          schema_error("output.formats", "entries must be 'csv' or 'json'");
        }
      }
    }
  }

  if (const json* sweeps = find(document, "sweeps")) {
    require_object(*sweeps, "sweeps");
    cfg.sweeps.eta = get_list<double>(*sweeps, "sweeps", "eta", [](const json& v, const std::string& p) {
      if (!v.is_number() || !(v.get<double>() > 0.0)) schema_error(p, "expected a number > 0");
      return v.get<double>();
    });
    cfg.sweeps.m = get_list<Eigen::Index>(*sweeps, "sweeps", "m", [](const json& v, const std::string& p) {
      if (!v.is_number_integer() || v.get<std::int64_t>() < 1) schema_error(p, "expected an integer >= 1");
      return static_cast<Eigen::Index>(v.get<std::int64_t>());
    });
    cfg.sweeps.seed = get_list<std::uint64_t>(*sweeps, "sweeps", "seed", [](const json& v, const std::string& p) {
      if (!v.is_number_integer() || v.get<std::int64_t>() < 0) schema_error(p, "expected an integer >= 0");
      return static_cast<std::uint64_t>(v.get<std::int64_t>());
    });
  }

  if (const json* ver = find(document, "verify")) {
    require_object(*ver, "verify");
    cfg.verify.delta = get_number(*ver, "verify", "delta", cfg.verify.delta);
    cfg.verify.epsilon = get_number(*ver, "verify", "epsilon", cfg.verify.epsilon);
    cfg.verify.beta = get_number(*ver, "verify", "beta", cfg.verify.beta);
  }
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  json doc;
  try {
    doc = json::parse(io::read_file(path));
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::usage, "config " + path.string() + " is not valid JSON: " + e.what());
  }
  return parse_config(doc, path.parent_path());
}

void apply_override(ExperimentConfig& cfg, const std::string& dotted_path, const json& value) {
  json doc = cfg.document;
  json* node = &doc;
  std::size_t start = 0;
  while (true) {
    const std::size_t dot = dotted_path.find('.', start);
    const std::string key = dotted_path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (key.empty()) throw Error(ErrorKind::usage, "bad override path '" + dotted_path + "'");
    if (!node->is_object()) *node = json::object();
    node = &(*node)[key];
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  *node = value;
  // Keep the original base dir semantics: data paths were resolved already.
  ExperimentConfig updated = parse_config(doc);
  updated.data.path = cfg.data.path;
  if (dotted_path == "data.path") {
    if (!value.is_string()) schema_error("data.path", "expected a string");
    updated.data.path = value.get<std::string>();
  }
  updated.overrides = cfg.overrides;
  updated.overrides.push_back(dotted_path + "=" + value.dump());
  cfg = std::move(updated);
}

std::string config_hash(const json& document) {
  const std::string canonical = document.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : canonical) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

Dataset prepare_dataset(const ExperimentConfig& cfg, ForsterResult* forster) {
  Dataset ds;
  if (cfg.data.path) {
    if (!std::filesystem::exists(*cfg.data.path)) {
      throw Error(ErrorKind::io, "data file does not exist: " + cfg.data.path->string());
    }
    ds = load_csv(*cfg.data.path, {cfg.data.label, cfg.preprocess.normalize});
  } else {
    const SynthSpec& s = *cfg.data.synth;
    ds = synth_sphere(s.n, s.d, s.seed, s.target_model);
  }
  if (cfg.preprocess.forster) {
    ForsterResult fr = forster_transform(ds.X, cfg.preprocess.forster_options);
    ds.X = fr.Z;
    if (forster) *forster = std::move(fr);
  }
  require_valid(ds);
  return ds;
}

std::vector<RunCell> expand_cells(const ExperimentConfig& cfg) {
  const std::vector<double> etas = cfg.sweeps.eta.empty() ? std::vector<double>{cfg.optimizer.eta} : cfg.sweeps.eta;
  const std::vector<Eigen::Index> ms = cfg.sweeps.m.empty() ? std::vector<Eigen::Index>{cfg.model.m} : cfg.sweeps.m;
  const std::vector<std::uint64_t> seeds =
      cfg.sweeps.seed.empty() ? std::vector<std::uint64_t>{cfg.model.seed} : cfg.sweeps.seed;
  std::vector<RunCell> cells;
  for (double eta : etas) {
    for (Eigen::Index m : ms) {
      for (std::uint64_t seed : seeds) cells.push_back({eta, m, seed, cell_tag(eta, m, seed)});
    }
  }
  return cells;
}

CellOutcome run_cell(const ExperimentConfig& cfg, const Dataset& ds, const RunCell& cell) {
  const NetworkParams p0 = init(cell.m, ds.d(), cfg.model.nu, cell.seed);
  OptimizerConfig opt = cfg.optimizer;
  opt.eta = cell.eta;
  TrainResult result = train(p0, ds, opt);
  const double kappa = opt.loss.L / opt.loss.mu;
  ConditionReport cond = check_conditions(p0, result.params, ds, kappa);
  return {cell, std::move(result), cond};
}

RunSummary run(const ExperimentConfig& cfg, const RunOptions& options) {
  ForsterResult fr;
  const Dataset ds = prepare_dataset(cfg, &fr);
  const std::vector<RunCell> cells = expand_cells(cfg);
  const std::filesystem::path& dir = cfg.output.dir;
  std::filesystem::create_directories(dir);

  std::vector<std::optional<CellOutcome>> outcomes(cells.size());
  std::vector<std::vector<std::string>> cell_files(cells.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;

  auto worker = [&] {
    while (true) {
      const std::size_t idx = next.fetch_add(1);
      if (idx >= cells.size()) return;
      try {
        CellOutcome out = run_cell(cfg, ds, cells[idx]);
        const std::string& tag = cells[idx].tag;
        if (cfg.output.csv) {
          io::write_file_atomic(dir / ("trace_" + tag + ".csv"), trace_to_csv(out.result.trace));
          cell_files[idx].push_back("trace_" + tag + ".csv");
        }
        if (cfg.output.json) {
          io::write_file_atomic(dir / ("trace_" + tag + ".json"), to_json(out.result.trace).dump(2));
          cell_files[idx].push_back("trace_" + tag + ".json");
        }
        json rep;
        rep["tag"] = tag;
        rep["conditions_final"] = to_json(out.conditions);
        rep["conditions_scope"] = "evaluated at the final iterate only";
        io::write_file_atomic(dir / ("report_" + tag + ".json"), rep.dump(2));
        cell_files[idx].push_back("report_" + tag + ".json");
        outcomes[idx] = std::move(out);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next.store(cells.size());
        return;
      }
    }
  };
  const unsigned jobs = std::max(1u, std::min<unsigned>(options.jobs, static_cast<unsigned>(cells.size())));
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < jobs; ++t) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);

  RunSummary summary;
  std::vector<std::string> all_files;

  json pre;
  pre["validation"] = to_json(validate(ds));
  pre["n"] = ds.n();
  pre["d"] = ds.d();
  if (cfg.preprocess.forster) pre["forster"] = to_json(fr);
  io::write_file_atomic(dir / "preprocess.json", pre.dump(2));
  all_files.push_back("preprocess.json");

  json bounds;
  const SpectrumSummary g_inf = spectrum(limiting_gram(ds));
  bounds["limiting_gram"] = to_json(g_inf, GramKind::limiting);
  try {
    bounds["generalization"] = to_json(generalization_bound(ds, cfg.verify.delta, cfg.verify.epsilon));
  } catch (const Error& e) {
    bounds["generalization"] = {{"error", e.what()}};
  }
  if (g_inf.lambda_min > 0.0) {
    bounds["overparam_requirement"] = {
        {"m", overparam_requirement(static_cast<double>(ds.n()), g_inf.lambda_min, cfg.model.nu, cfg.verify.delta)},
        {"note", "order-of-magnitude heuristic with unit constants"}};
  }
  io::write_file_atomic(dir / "bounds.json", bounds.dump(2));
  all_files.push_back("bounds.json");

  json manifest;
  manifest["version"] = kVersion;
  manifest["config"] = cfg.document;
  manifest["config_hash"] = config_hash(cfg.document);
  manifest["overrides"] = cfg.overrides;
  manifest["timestamp"] = utc_timestamp();
  manifest["data_seed"] = cfg.data.synth ? json(cfg.data.synth->seed) : json(nullptr);
  json cells_json = json::array();
  for (std::size_t i = 0; i < cells.size(); ++i) {
    cells_json.push_back({{"tag", cells[i].tag},
                          {"eta", cells[i].eta},
                          {"m", cells[i].m},
                          {"seed", cells[i].seed},
                          {"files", cell_files[i]}});
    all_files.insert(all_files.end(), cell_files[i].begin(), cell_files[i].end());
    summary.outcomes.push_back(std::move(*outcomes[i]));
  }
  manifest["cells"] = cells_json;
  manifest["files"] = all_files;
  io::write_file_atomic(dir / "manifest.json", manifest.dump(2));

  summary.manifest = dir / "manifest.json";
  for (const auto& f : all_files) summary.files.push_back(dir / f);
  return summary;
}

std::vector<CompareRow> compare(const std::vector<ExperimentConfig>& configs) {
  if (configs.size() < 2) throw Error(ErrorKind::contract, "compare needs at least two configs");
  const ExperimentConfig& first = configs.front();
  auto same_inputs = [](const ExperimentConfig& a, const ExperimentConfig& b) {
    const bool same_data =
        a.data.path ? (b.data.path && *a.data.path == *b.data.path && a.data.label == b.data.label)
                    : (b.data.synth && a.data.synth->n == b.data.synth->n && a.data.synth->d == b.data.synth->d &&
                       a.data.synth->seed == b.data.synth->seed &&
                       a.data.synth->target_model == b.data.synth->target_model);
    const PreprocessSpec& pa = a.preprocess;
    const PreprocessSpec& pb = b.preprocess;
    return same_data && pa.normalize == pb.normalize && pa.forster == pb.forster &&
           pa.forster_options.tol == pb.forster_options.tol &&
           pa.forster_options.max_iter == pb.forster_options.max_iter && a.model.seed == b.model.seed;
  };
  for (const auto& c : configs) {
    if (!same_inputs(first, c)) {
      throw Error(ErrorKind::contract, "compare: configs must share data, preprocessing and model seed");
    }
  }
  const Dataset ds = prepare_dataset(first);
  std::vector<CompareRow> rows;
  for (const auto& c : configs) {
    const RunCell cell = expand_cells(c).front();
    const CellOutcome out = run_cell(c, ds, cell);
    const ConvergenceTrace& t = out.result.trace;
    CompareRow row;
    row.method = t.method;
    row.eta = cell.eta;
    const auto label = c.document.find("label");
    row.label = label != c.document.end() && label->is_string() ? label->get<std::string>()
                                                                : t.method + " eta=" + io::format_double(cell.eta);
    row.predicted_factor = t.predicted_factor;
    row.final_residual = t.records.empty() ? t.initial_residual_norm : t.records.back().residual_norm;
    if (t.initial_residual_norm <= kCompareThreshold) {
      row.steps_to_threshold = 0;
    } else {
      for (const auto& rec : t.records) {
        if (rec.residual_norm <= kCompareThreshold) {
          row.steps_to_threshold = rec.k;
          break;
        }
      }
    }
    if (!t.records.empty() && t.initial_residual_norm > 0.0) {
      const double K = static_cast<double>(t.records.size());
      row.observed_factor = std::pow(row.final_residual / t.initial_residual_norm, 1.0 / K);
    }
    rows.push_back(row);
  }
  return rows;
}

std::string compare_table(const std::vector<CompareRow>& rows) {
  std::ostringstream os;
  os << std::left << std::setw(24) << "label" << std::setw(11) << "method" << std::setw(8) << "eta"
     << std::setw(10) << "steps" << std::setw(14) << "final_resid" << std::setw(12) << "predicted"
     << "observed\n";
  for (const auto& r : rows) {
    os << std::left << std::setw(24) << r.label << std::setw(11) << r.method << std::setw(8)
       << io::format_double(r.eta) << std::setw(10)
       << (r.steps_to_threshold < 0 ? std::string("-") : std::to_string(r.steps_to_threshold)) << std::setw(14)
       << std::setprecision(4) << std::scientific << r.final_residual << std::setw(12) << std::fixed
       << std::setprecision(4) << r.predicted_factor << r.observed_factor << "\n";
    os.unsetf(std::ios::floatfield);
  }
  return os.str();
}

json to_json(const std::vector<CompareRow>& rows) {
  json out = json::array();
  for (const auto& r : rows) {
    out.push_back({{"label", r.label},
                   {"method", r.method},
                   {"eta", r.eta},
                   {"steps_to_threshold", r.steps_to_threshold < 0 ? json(nullptr) : json(r.steps_to_threshold)},
                   {"threshold", kCompareThreshold},
                   {"final_residual", r.final_residual},
                   {"predicted_factor", r.predicted_factor},
                   {"observed_factor", r.observed_factor}});
  }
  return out;
}

json report(const std::filesystem::path& output_dir) {
  const auto manifest_path = output_dir / "manifest.json";
  if (!std::filesystem::exists(manifest_path)) {
    throw Error(ErrorKind::io, "no manifest.json in " + output_dir.string());
  }
  const json manifest = json::parse(io::read_file(manifest_path));
  auto read_json = [&](const std::string& name) -> json {
    const auto p = output_dir / name;
    return std::filesystem::exists(p) ? json::parse(io::read_file(p)) : json(nullptr);
  };

  std::vector<json> experiments;
  for (const auto& cell : manifest.at("cells")) {
    const std::string tag = cell.at("tag").get<std::string>();
    json entry = {{"tag", tag}, {"eta", cell.at("eta")}, {"m", cell.at("m")}, {"seed", cell.at("seed")}};
    entry["trace"] = read_json("trace_" + tag + ".json");
    entry["report"] = read_json("report_" + tag + ".json");
    experiments.push_back(std::move(entry));
  }
  std::stable_sort(experiments.begin(), experiments.end(), [](const json& a, const json& b) {
    const auto key = [](const json& e) {
      return std::make_tuple(e["eta"].get<double>(), e["m"].get<std::int64_t>(), e["seed"].get<std::uint64_t>());
    };
    return key(a) < key(b);
  });

  json out;
  out["manifest"] = manifest;
  out["preprocess"] = read_json("preprocess.json");
  out["bounds"] = read_json("bounds.json");
  out["experiments"] = experiments;
  return out;
}

json verify(const ExperimentConfig& cfg) {
  ForsterResult fr;
  const Dataset ds = prepare_dataset(cfg, &fr);
  json out;
  out["validation"] = to_json(validate(ds));
  if (cfg.preprocess.forster) out["forster"] = to_json(fr);

  const GramMatrix g_inf = limiting_gram(ds);
  const SpectrumSummary s_inf = spectrum(g_inf);
  out["limiting_gram"] = to_json(s_inf, GramKind::limiting);

  const NetworkParams p0 = init(cfg.model.m, ds.d(), cfg.model.nu, cfg.model.seed);
  const ActivationPattern ap0 = activation_pattern(p0, ds.X);
  const SpectrumSummary s_fin = spectrum(finite_gram(jacobian(p0, ds.X)));
  const SpectrumSummary s_pre = spectrum(pre_activation_gram(ap0));
  out["finite_gram_init"] = to_json(s_fin, GramKind::finite);
  out["pre_activation_gram_init"] = to_json(s_pre, GramKind::pre_activation);
  // Unit-norm rows give diag(XX^T) = 1, so lambda_min(G) >= lambda_min(pre-activation Gram).
  out["hadamard_lower_bound_holds"] = s_fin.lambda_min_raw >= s_pre.lambda_min_raw - 1e-12;

  const double kappa = cfg.optimizer.loss.L / cfg.optimizer.loss.mu;
  out["conditions_init"] = to_json(check_conditions(p0, p0, ds, kappa));
  if (cfg.optimizer.max_steps > 0) {
    const TrainResult tr = train(p0, ds, cfg.optimizer);
    out["conditions_final"] = to_json(check_conditions(p0, tr.params, ds, kappa));
    out["steps_taken"] = tr.trace.records.size();
    out["final_residual"] =
        tr.trace.records.empty() ? tr.trace.initial_residual_norm : tr.trace.records.back().residual_norm;
  }
  out["conditions_scope"] = "stability is checked at the initial and final iterates only, not over the whole ball";

  RateInputs in;
  in.n = ds.n();
  in.lambda_min_G0 = s_fin.lambda_min_raw;
  in.mu = cfg.optimizer.loss.mu;
  in.L = cfg.optimizer.loss.L;
  const Vector xev = linalg::symmetric_eigenvalues(ds.X.transpose() * ds.X);
  in.lambda_min_xtx = xev(0);
  in.lambda_max_xtx = xev(xev.size() - 1);
  const RatePrediction rate = rate_predictor(cfg.optimizer.method, cfg.optimizer.eta, in);
  out["rate"] = {{"method", to_string(cfg.optimizer.method)},
                 {"eta", cfg.optimizer.eta},
                 {"factor", rate.factor},
                 {"eta_warning", rate.eta_warning},
                 {"note", rate.note}};

  try {
    out["generalization"] = to_json(generalization_bound(ds, cfg.verify.delta, cfg.verify.epsilon));
  } catch (const Error& e) {
    out["generalization"] = {{"error", e.what()}};
  }
  if (s_inf.lambda_min > 0.0) {
    out["overparam_requirement"] = {
        {"m", overparam_requirement(static_cast<double>(ds.n()), s_inf.lambda_min, cfg.model.nu, cfg.verify.delta)},
        {"configured_m", cfg.model.m},
        {"note",
         "order-of-magnitude heuristic with unit constants; desk-scale runs use far smaller m and rely on the "
         "per-iterate condition checks above"}};
  }
  out["lambda0_floor"] = {{"beta", cfg.verify.beta},
                          {"floor", std::pow(static_cast<double>(ds.n()), cfg.verify.beta) / 2.0},
                          {"lambda0", s_inf.lambda_min_raw},
                          {"holds", lambda0_floor_holds(ds.X, cfg.verify.beta)}};
  return out;
}

std::string linearized_trajectory_csv(const LinearizedModel& lm, int points) {
  if (points < 2) throw Error(ErrorKind::contract, "need at least two trajectory points");
  const double horizon = lm.infinite_time();
  std::string out = "t,gd_residual,ngd_residual,weight_gap\n";
  for (int i = 0; i < points; ++i) {
    const double t = horizon * static_cast<double>(i) / static_cast<double>(points - 1);
    const Vector wg = gd_trajectory(lm, t);
    const Vector wn = ngd_trajectory(lm, t);
    out += io::format_double(t) + ',' + io::format_double((lm.outputs(wg) - lm.y()).norm()) + ',' +
           io::format_double((lm.outputs(wn) - lm.y()).norm()) + ',' + io::format_double((wg - wn).norm()) + '\n';
  }
  return out;
}

json to_json(const DataValidationReport& r) {
  return {{"max_norm_deviation", r.max_norm_deviation},
          {"min_pairwise_angle_gap", optional_number(r.min_pairwise_angle_gap)},
          {"max_abs_target", r.max_abs_target},
          {"target_range_warning", r.target_range_warning},
          {"passed", r.passed}};
}

json to_json(const ConditionReport& r) {
  return {{"lambda_min_G0", r.lambda_min_G0},
          {"radius", optional_number(r.radius)},
          {"distance", r.distance},
          {"jacobian_drift", r.jacobian_drift},
          {"C_estimate", optional_number(r.C_estimate)},
          {"condition1_holds", r.condition1_holds},
          {"condition2_holds", r.condition2_holds},
          {"condition3_holds", r.condition3_holds},
          {"max_eta_ngd", optional_number(r.max_eta_ngd)},
          {"general_loss_radius", optional_number(r.general_loss_radius)},
          {"kappa", r.kappa}};
}

json to_json(const GenBoundReport& r) {
  return {{"quad_term", r.quad_term},
          {"conf_term", r.conf_term},
          {"epsilon", r.epsilon},
          {"total", r.total},
          {"delta", r.delta}};
}

json to_json(const ConvergenceTrace& t) {
  json records = json::array();
  for (const auto& r : t.records) {
    records.push_back({{"k", r.k},
                       {"residual_norm", r.residual_norm},
                       {"loss", r.loss},
                       {"weight_drift", r.weight_drift},
                       {"per_unit_max_drift", r.per_unit_max_drift},
                       {"predicted_bound", r.predicted_bound},
                       {"lambda_min_G", r.lambda_min_G ? json(*r.lambda_min_G) : json(nullptr)},
                       {"jacobian_drift", r.jacobian_drift ? json(*r.jacobian_drift) : json(nullptr)}});
  }
  return {{"method", t.method},
          {"eta", t.eta},
          {"initial_residual_norm", t.initial_residual_norm},
          {"initial_loss", t.initial_loss},
          {"lambda_min_G0", t.lambda_min_G0},
          {"predicted_factor", t.predicted_factor},
          {"eta_warning", t.eta_warning},
          {"warnings", t.warnings},
          {"records", records}};
}

json to_json(const ForsterResult& r) {
  json a = json::array();
  for (Eigen::Index i = 0; i < r.A.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < r.A.cols(); ++j) row.push_back(r.A(i, j));
    a.push_back(row);
  }
  return {{"iterations", r.iterations},
          {"final_error", r.final_error},
          {"A", a},
          {"skipped_rescales", r.skipped_rescales}};
}

json to_json(const SpectrumSummary& s, GramKind kind) {
  return {{"kind", to_string(kind)},
          {"lambda_min", s.lambda_min},
          {"lambda_min_raw", s.lambda_min_raw},
          {"lambda_max", s.lambda_max},
          {"condition_number", optional_number(s.condition_number)}};
}

}  // namespace ngdconv
