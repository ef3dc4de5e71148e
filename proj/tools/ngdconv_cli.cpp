#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "ngdconv/experiment.hpp"
#include "ngdconv/io.hpp"
#include "ngdconv/linalg.hpp"

using namespace ngdconv;

namespace {

struct Globals {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  bool quiet = false;
};

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::usage:
    case ErrorKind::contract:
    case ErrorKind::shape:
      return 1;
    case ErrorKind::io:
    case ErrorKind::format:
      return 3;
    default:
      return 2;
  }
}

json parse_scalar(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error&) {
    return text;
  }
}

ExperimentConfig load_with_overrides(const Globals& g, const std::vector<std::string>& sets) {
  if (g.config.empty()) throw Error(ErrorKind::usage, "--config is required");
  ExperimentConfig cfg = load_config(g.config);
  for (const auto& s : sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw Error(ErrorKind::usage, "--set expects key=value, got '" + s + "'");
    apply_override(cfg, s.substr(0, eq), parse_scalar(s.substr(eq + 1)));
  }
  if (g.seed) apply_override(cfg, "model.seed", *g.seed);
  if (!g.out.empty()) apply_override(cfg, "output.dir", g.out);
  return cfg;
}

Dataset dataset_from(const Globals& g, const std::string& input, const std::string& label, bool normalize,
                     const std::vector<std::string>& sets) {
  if (!input.empty()) {
    LabelColumn col = label;
    if (!label.empty() && label.find_first_not_of("0123456789") == std::string::npos) col = std::stoul(label);
    Dataset ds = load_csv(input, {col, normalize});
    require_valid(ds);
    return ds;
  }
  return prepare_dataset(load_with_overrides(g, sets));
}

void emit(const std::string& text, const std::string& path) {
  if (path.empty()) {
    std::cout << text;
  } else {
    io::write_file_atomic(path, text);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Natural gradient and K-FAC convergence experiments for two-layer ReLU networks"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  Globals g;
  app.add_option("--config", g.config, "Experiment config (JSON)");
  app.add_option("--out", g.out, "Output directory or file");
  app.add_option("--seed", g.seed, "Seed override");
  app.add_flag("--quiet", g.quiet, "Suppress progress output");
  std::vector<std::string> sets;
  app.add_option("--set", sets, "Override a config field, e.g. optimizer.eta=0.25");

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "Sample unit-sphere inputs with targets");
  Eigen::Index gen_n = 16, gen_d = 8;
  std::string gen_model = "signed_linear";
  gen->add_option("--n", gen_n, "Samples")->check(CLI::PositiveNumber);
  gen->add_option("--d", gen_d, "Input dimension")->check(CLI::PositiveNumber);
  gen->add_option("--target-model", gen_model, "signed_linear or random_pm1")
      ->check(CLI::IsMember({"signed_linear", "random_pm1"}));

  // forster
  auto* fst = app.add_subcommand("forster", "Whiten inputs into radial isotropic position");
  std::string fst_input, fst_label = "y";
  ForsterOptions fst_opts;
  fst->add_option("--input", fst_input, "CSV dataset")->required();
  fst->add_option("--label", fst_label, "Label column name or index");
  fst->add_option("--tol", fst_opts.tol, "Stopping tolerance");
  fst->add_option("--max-iter", fst_opts.max_iter, "Iteration cap");

  // gram
  auto* gram = app.add_subcommand("gram", "Gram spectrum of a dataset");
  std::string gram_input, gram_label = "y", gram_kind = "limiting", gram_export;
  bool gram_normalize = false;
  Eigen::Index gram_m = 1024;
  double gram_nu = 1.0;
  gram->add_option("--input", gram_input, "CSV dataset (otherwise taken from --config)");
  gram->add_option("--label", gram_label, "Label column name or index");
  gram->add_flag("--normalize", gram_normalize, "Normalize rows on load");
  gram->add_option("--kind", gram_kind, "limiting, finite or pre_activation")
      ->check(CLI::IsMember({"limiting", "finite", "pre_activation"}));
  gram->add_option("--m", gram_m, "Width for finite and pre_activation kinds")->check(CLI::PositiveNumber);
  gram->add_option("--nu", gram_nu, "Init scale")->check(CLI::PositiveNumber);
  gram->add_option("--export", gram_export, "Write the matrix as CSV");

  // train
  auto* trn = app.add_subcommand("train", "Run the configured experiment and sweeps");
  unsigned jobs = 1;
  std::optional<double> trn_eta;
  std::optional<std::string> trn_method;
  std::optional<int> trn_steps;
  std::optional<Eigen::Index> trn_m;
  trn->add_option("--jobs", jobs, "Concurrent sweep cells")->check(CLI::PositiveNumber);
  trn->add_option("--eta", trn_eta, "Step size override");
  trn->add_option("--method", trn_method, "Optimizer override")
      ->check(CLI::IsMember({"gd", "ngd", "ngd_exact", "ngd_cg", "kfac"}));
  trn->add_option("--steps", trn_steps, "max_steps override");
  trn->add_option("--m", trn_m, "Width override");

  // compare
  auto* cmp = app.add_subcommand("compare", "Run several configs on shared data and tabulate rates");
  std::vector<std::string> cmp_configs;
  std::string cmp_format = "table";
  cmp->add_option("configs", cmp_configs, "Config files (two or more)")->required()->expected(2, -1);
  cmp->add_option("--format", cmp_format, "table or json")->check(CLI::IsMember({"table", "json"}));

  // verify
  auto* ver = app.add_subcommand("verify", "Condition checks and bounds for the configured setup");

  // linearized
  auto* lin = app.add_subcommand("linearized", "GD and NGD flows of the linearized model");
  int lin_points = 50;
  lin->add_option("--points", lin_points, "Time samples")->check(CLI::Range(2, 1000000));

  // report
  auto* rep = app.add_subcommand("report", "Merge a run directory into one JSON document");
  std::string rep_dir;
  rep->add_option("dir", rep_dir, "Run directory (defaults to --out)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    if (*gen) {
      const std::uint64_t seed = g.seed.value_or(0);
      const Dataset ds = synth_sphere(gen_n, gen_d, seed, parse_target_model(gen_model));
      const std::string path = g.out.empty() ? "data.csv" : g.out;
      save_csv(ds, path);
      if (!g.quiet) std::cerr << "wrote " << ds.n() << "x" << ds.d() << " dataset to " << path << "\n";
    } else if (*fst) {
      const Dataset in = dataset_from(g, fst_input, fst_label, false, sets);
      const ForsterResult fr = forster_transform(in.X, fst_opts);
      const std::string path = g.out.empty() ? "forster.csv" : g.out;
      save_csv(Dataset{fr.Z, in.y}, path);
      io::write_file_atomic(path + ".json", to_json(fr).dump(2) + "\n");
      if (!g.quiet) {
        std::cerr << "converged in " << fr.iterations << " iterations, error " << fr.final_error << "\n";
      }
    } else if (*gram) {
      const Dataset ds = dataset_from(g, gram_input, gram_label, gram_normalize, sets);
      const GramKind kind = parse_gram_kind(gram_kind);
      GramMatrix gm;
      if (kind == GramKind::limiting) {
        gm = limiting_gram(ds);
      } else {
        const NetworkParams p = init(gram_m, ds.d(), gram_nu, g.seed.value_or(0));
        gm = kind == GramKind::finite ? finite_gram(jacobian(p, ds.X)) : pre_activation_gram(activation_pattern(p, ds.X));
      }
      if (!gram_export.empty()) save_gram_csv(gm, gram_export);
      std::cout << to_json(spectrum(gm), kind).dump(2) << "\n";
    } else if (*trn) {
      ExperimentConfig cfg = load_with_overrides(g, sets);
      if (trn_eta) apply_override(cfg, "optimizer.eta", *trn_eta);
      if (trn_method) apply_override(cfg, "optimizer.method", *trn_method);
      if (trn_steps) apply_override(cfg, "optimizer.max_steps", *trn_steps);
      if (trn_m) apply_override(cfg, "model.m", *trn_m);
      const RunSummary s = run(cfg, {jobs, g.quiet});
      if (!g.quiet) {
        for (const auto& o : s.outcomes) {
          const auto& t = o.result.trace;
          const double last = t.records.empty() ? t.initial_residual_norm : t.records.back().residual_norm;
          std::cerr << o.cell.tag << ": " << t.records.size() << " steps, residual " << t.initial_residual_norm
                    << " -> " << last << "\n";
          for (const auto& w : t.warnings) std::cerr << "  warning: " << w << "\n";
        }
        std::cerr << "manifest: " << s.manifest.string() << "\n";
      }
    } else if (*cmp) {
      std::vector<ExperimentConfig> cfgs;
      for (const auto& path : cmp_configs) {
        Globals each = g;
        each.config = path;
        each.out.clear();
        cfgs.push_back(load_with_overrides(each, sets));
      }
      const auto rows = compare(cfgs);
      const std::string text = cmp_format == "json" ? to_json(rows).dump(2) + "\n" : compare_table(rows);
      emit(text, g.out);
    } else if (*ver) {
      const ExperimentConfig cfg = load_with_overrides(g, sets);
      std::cout << verify(cfg).dump(2) << "\n";
    } else if (*lin) {
      Globals no_out = g;
      no_out.out.clear();
      const ExperimentConfig cfg = load_with_overrides(no_out, sets);
      const Dataset ds = prepare_dataset(cfg);
      const NetworkParams p = init(cfg.model.m, ds.d(), cfg.model.nu, cfg.model.seed);
      const LinearizedModel lm = linearize(p, ds);
      emit(linearized_trajectory_csv(lm, lin_points), g.out);
    } else if (*rep) {
      const std::string dir = rep_dir.empty() ? g.out : rep_dir;
      if (dir.empty()) throw Error(ErrorKind::usage, "report needs a directory");
      std::cout << report(dir).dump(2) << "\n";
    }
  } catch (const Error& e) {
    std::cerr << "error (" << to_string(e.kind()) << "): " << e.what() << "\n";
    return exit_code(e.kind());
  } catch (const json::exception& e) {
    std::cerr << "error (format): " << e.what() << "\n";
    return 3;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error (io): " << e.what() << "\n";
    return 3;
  }
  return 0;
}
