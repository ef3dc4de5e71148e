// Acceptance suite. Each criterion prints one line:
//   [PASS] C01 <name>: <measured values>
// Run with no arguments for all criteria, or with ids (C01 ... C16) to select.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <sstream>
#include <string>

#include "ngdconv/experiment.hpp"
#include "ngdconv/io.hpp"
#include "ngdconv/linalg.hpp"
#include "oracles.hpp"

using namespace ngdconv;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

// Shared by C01 and C11.
struct NgdRateRun {
  double max_sq_ratio = 0.0;
  bool drift_ok = true;
  double worst_drift_frac = 0.0;
  double worst_unit_frac = 0.0;
};

const std::vector<NgdRateRun>& ngd_rate_runs(double* seconds = nullptr) {
  static std::vector<NgdRateRun> runs;
  static double elapsed = 0.0;
  if (runs.empty()) {
    const auto t0 = std::chrono::steady_clock::now();
    for (std::uint64_t s = 0; s < 10; ++s) {
      const Dataset ds = synth_sphere(16, 8, 100 + s);
      const NetworkParams p = init(4096, 8, 1.0, s);
      OptimizerConfig cfg;
      cfg.method = Method::ngd_exact;
      cfg.eta = 0.5;
      cfg.max_steps = 80;
      const TrainResult tr = train(p, ds, cfg);
      const auto& t = tr.trace;
      NgdRateRun run;
      const double r0 = t.initial_residual_norm;
      const double lam = t.lambda_min_G0;
      const double drift_cap = 3.0 * r0 / std::sqrt(lam);
      const double unit_cap = 4.0 * std::sqrt(16.0) * r0 / (std::sqrt(4096.0) * lam);
      double prev = r0;
      for (const auto& rec : t.records) {
        if (prev >= 1e-10) run.max_sq_ratio = std::max(run.max_sq_ratio, std::pow(rec.residual_norm / prev, 2));
        prev = rec.residual_norm;
        run.worst_drift_frac = std::max(run.worst_drift_frac, rec.weight_drift / drift_cap);
        run.worst_unit_frac = std::max(run.worst_unit_frac, rec.per_unit_max_drift / unit_cap);
      }
      run.drift_ok = run.worst_drift_frac <= 1.0 && run.worst_unit_frac <= 1.0;
      runs.push_back(run);
    }
    elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }
  if (seconds) *seconds = elapsed;
  return runs;
}

Outcome c01() {
  double secs = 0.0;
  const auto& runs = ngd_rate_runs(&secs);
  int good = 0;
  double worst = 0.0;
  for (const auto& r : runs) {
    good += r.max_sq_ratio <= 0.55;
    worst = std::max(worst, r.max_sq_ratio);
  }
  return {good >= 9 && secs < 30.0, std::to_string(good) + "/10 seeds with every squared ratio <= 0.55 (worst " +
                                        fmt(worst) + "), " + fmt(secs) + " s"};
}

Outcome c02() {
  const Dataset ds = synth_sphere(16, 8, 1);
  const LinearizedModel lm = linearize(init(1024, 8, 1.0, 1), ds);
  const DiscreteRun lin = ngd_discrete(lm, 1.0, 1);
  const double lin_ratio = lin.residual_norms[1] / lin.residual_norms[0];

  OptimizerConfig cfg;
  cfg.method = Method::ngd_exact;
  cfg.eta = 1.0;
  cfg.max_steps = 2;
  const TrainResult tr = train(init(1 << 14, 8, 1.0, 2), ds, cfg);
  const double relu_ratio = tr.trace.records.back().residual_norm / tr.trace.initial_residual_norm;
  return {lin_ratio <= 1e-10 && relu_ratio <= 1e-2 && tr.trace.records.size() <= 2,
          "linearized 1-step ratio " + fmt(lin_ratio) + ", relu m=16384 2-step ratio " + fmt(relu_ratio)};
}

Outcome c03() {
  const std::vector<std::array<int, 3>> shapes = {{4, 2, 32}, {5, 3, 21}, {6, 4, 16}, {8, 8, 8}, {3, 2, 16}};
  int done = 0, redraws = 0;
  double worst = 0.0;
  for (std::uint64_t seed = 0; done < 20 && seed < 1000; ++seed) {
    const auto [n, d, m] = shapes[seed % shapes.size()];
    const Dataset ds = synth_sphere(n, d, 500 + seed);
    const NetworkParams p = init(m, d, 1.0, seed);
    Matrix got;
    try {
      got = kfac_direction(p, ds, 0.0);
    } catch (const SingularError&) {
      ++redraws;  // S~ lost row rank; draw another instance
      continue;
    }
    const Matrix St = activation_pattern(p, ds.X).Stilde;
    const Vector r = forward(p, ds.X) - ds.y;
    const Matrix M = unflatten_weights(jacobian(p, ds.X).dense().transpose() * r, m, d);
    const Matrix K = oracle::kron((ds.X.transpose() * ds.X).inverse(), oracle::pinv(St.transpose() * St));
    const Vector v = K * M.reshaped();
    worst = std::max(worst, oracle::rel_err(got, v.reshaped(m, d)));
    ++done;
  }
  return {done == 20 && worst <= 1e-10,
          std::to_string(done) + " instances, max relative error " + fmt(worst) + " (" + std::to_string(redraws) +
              " redraws)"};
}

Outcome c04() {
  const Dataset ds = synth_sphere(16, 8, 4);
  const NetworkParams p = init(8192, 8, 1.0, 4);
  const double eta = 0.5;
  const Vector u0 = forward(p, ds.X);
  const Vector u1 = forward(kfac_step(p, ds, eta), ds.X);
  const Matrix P = ds.X * (ds.X.transpose() * ds.X).inverse() * ds.X.transpose();
  const Vector predicted = eta * P.diagonal().cwiseProduct(ds.y - u0);
  const double err = (u1 - u0 - predicted).norm() / predicted.norm();
  return {err <= 0.1, "relative error " + fmt(err)};
}

Outcome c05() {
  const Dataset raw = synth_sphere(16, 8, 5);
  const ForsterResult fr = forster_transform(raw.X);
  const Dataset ds{fr.Z, raw.y};
  const double eta = 0.5;
  OptimizerConfig cfg;
  cfg.method = Method::kfac;
  cfg.eta = eta;
  cfg.max_steps = 10;
  const TrainResult tr = train(init(8192, 8, 1.0, 5), ds, cfg);
  const auto& t = tr.trace;
  const double K = static_cast<double>(t.records.size());
  const double observed = std::pow(t.records.back().residual_norm / t.initial_residual_norm, 1.0 / K);
  const double target = 1.0 - eta * 8.0 / 16.0;
  return {t.records.size() == 10 && std::abs(observed - target) <= 0.05,
          "observed " + fmt(observed) + " vs 1 - eta d/n = " + fmt(target)};
}

Outcome c06() {
  std::mt19937_64 rng(6);
  std::normal_distribution<double> g;
  Matrix X(64, 8);
  for (auto& v : X.reshaped()) v = g(rng);
  const ForsterResult r = forster_transform(X, {1e-8, 10000});
  const double iso = (r.Z.transpose() * r.Z - 8.0 * Matrix::Identity(8, 8)).norm();
  const double unit = (r.Z.rowwise().norm().array() - 1.0).abs().maxCoeff();
  const double recon = (linalg::normalize_rows(X * r.A) - r.Z).cwiseAbs().maxCoeff();
  return {r.iterations <= 10000 && iso <= 1e-8 && unit <= 1e-10 && recon <= 1e-9,
          std::to_string(r.iterations) + " iterations, isotropy " + fmt(iso) + ", unit-norm " + fmt(unit) +
              ", reconstruction " + fmt(recon)};
}

Outcome c07() {
  std::mt19937_64 rng(7);
  int done = 0;
  double worst = 0.0;
  for (std::uint64_t s = 0; done < 25 && s < 500; ++s) {
    const Matrix X = oracle::random_unit_rows(5, 4, rng);
    const NetworkParams p = init(6, 4, 1.0, s);
    if (oracle::kink_margin(p.w(), X) < 1e-3) continue;
    worst = std::max(worst, oracle::rel_err(jacobian(p, X).dense(), oracle::fd_jacobian(p.w(), p.a(), X)));
    ++done;
  }
  return {done >= 20 && worst <= 1e-6, std::to_string(done) + " instances, max relative error " + fmt(worst)};
}

Outcome c08() {
  std::mt19937_64 rng(8);
  const Matrix X = oracle::random_unit_rows(8, 5, rng);
  const Matrix G = limiting_gram(X).M;
  const MonteCarloGram mc = mc_limiting_gram(X, 1.0, 100000, 8);
  double worst_z = 0.0;
  for (Eigen::Index i = 0; i < 8; ++i) {
    for (Eigen::Index j = 0; j < 8; ++j) {
      worst_z = std::max(worst_z, std::abs(mc.mean.M(i, j) - G(i, j)) / mc.standard_error(i, j));
    }
  }
  const NetworkParams p = init(256, 5, 1.0, 8);
  const JacobianView jv = jacobian(p, X);
  const Matrix J = jv.dense();
  const double fact = (finite_gram(jv).M - J * J.transpose()).cwiseAbs().maxCoeff();
  const bool diag = (G.diagonal().array() == 0.5).all();
  return {worst_z <= 4.0 && fact <= 1e-12 && diag,
          "max |z| " + fmt(worst_z) + ", factored vs dense " + fmt(fact) + ", diagonal exactly 1/2: " +
              (diag ? "yes" : "no")};
}

Outcome c09() {
  std::mt19937_64 rng(9);
  std::uniform_int_distribution<int> size(2, 10);
  int violations = 0;
  for (int t = 0; t < 200; ++t) {
    const int n = size(rng);
    const Matrix A = oracle::random_spd(n, rng, 0.01), B = oracle::random_spd(n, rng, 0.01);
    const HadamardBounds hb = hadamard_bounds(A, B);
    const Matrix H = A.cwiseProduct(B);
    const double lo = oracle::min_eig(H), hi = oracle::max_eig(H);
    const double slack = 1e-10 * hi;
    violations += (hb.lower > lo + slack) || (hb.upper < hi - slack);
  }
  return {violations == 0, std::to_string(violations) + " violations in 200 pairs"};
}

Outcome c10() {
  const Dataset ds = synth_sphere(16, 8, 10);
  const double lam_inf = min_eig(limiting_gram(ds));
  const auto m = static_cast<Eigen::Index>(std::ceil(50.0 * 16.0 * std::log(16.0) / lam_inf));
  int good = 0;
  double worst = 1e300;
  for (std::uint64_t s = 0; s < 20; ++s) {
    const double lam = min_eig(finite_gram(jacobian(init(m, 8, 1.0, s), ds.X)));
    good += lam >= 0.75 * lam_inf;
    worst = std::min(worst, lam / lam_inf);
  }
  return {good >= 18, std::to_string(good) + "/20 seeds at m=" + std::to_string(m) +
                          ", worst lambda_min(G0)/lambda_min(Ginf) " + fmt(worst)};
}

Outcome c11() {
  const auto& runs = ngd_rate_runs();
  bool ok = true;
  double drift = 0.0, unit = 0.0;
  for (const auto& r : runs) {
    ok = ok && r.drift_ok;
    drift = std::max(drift, r.worst_drift_frac);
    unit = std::max(unit, r.worst_unit_frac);
  }
  return {ok, "max drift / bound " + fmt(drift) + ", max per-unit drift / bound " + fmt(unit)};
}

Outcome c12() {
  const double mu = 0.5, L = 1.5, eta = 2.0 / (mu + L);
  const LossSpec loss = reference_strongly_convex_loss(mu);
  const LinearizedModel lm = linearize(init(1024, 8, 1.0, 12), synth_sphere(16, 8, 12));
  const DiscreteRun run = ngd_discrete(lm, eta, loss, 20);
  const double cap = 1.0 - 2.0 * eta * mu * L / (mu + L) + 0.05;
  double worst = 0.0;
  for (std::size_t k = 1; k < run.residual_norms.size(); ++k) {
    if (run.residual_norms[k - 1] < 1e-12) break;
    worst = std::max(worst, std::pow(run.residual_norms[k] / run.residual_norms[k - 1], 2));
  }
  return {worst <= cap, "max squared factor " + fmt(worst) + " vs cap " + fmt(cap)};
}

Outcome c13() {
  const Lambda0FloorResult r = lambda0_floor_check(16, 64, 0.3, 20, 13);
  const double best = *std::max_element(r.lambda_min.begin(), r.lambda_min.end());
  return {r.pass_rate >= 0.95, "pass rate " + fmt(r.pass_rate) + ", floor n^beta/2 = " + fmt(r.floor) +
                                   ", largest lambda_min(Ginf) " + fmt(best) +
                                   " (unit-norm rows cap lambda_min at 1/2)"};
}

Outcome c14() {
  double gap = 0.0, oracle_gap = 0.0;
  for (std::uint64_t s = 0; s < 20; ++s) {
    const Dataset ds = synth_sphere(8, 4, 1400 + s);
    const LinearizedModel lm = linearize(init(64, 4, 1.0, s), ds);
    const double T = lm.infinite_time();
    const Vector gd = gd_trajectory(lm, T), ngd = ngd_trajectory(lm, T);
    const Vector want = lm.w0() + oracle::pinv(lm.J()) * (lm.y() - lm.u0());
    gap = std::max(gap, oracle::rel_err(gd, ngd));
    oracle_gap = std::max({oracle_gap, oracle::rel_err(gd, want), oracle::rel_err(ngd, want)});
  }
  return {gap <= 1e-9 && oracle_gap <= 1e-9,
          "max GD/NGD limit gap " + fmt(gap) + ", max gap to pseudo-inverse solution " + fmt(oracle_gap)};
}

Outcome c15() {
  Dataset ds{Matrix::Identity(2, 2), Vector::Ones(2)};
  const double ones = generalization_bound(ds, 0.1, 0.0).quad_term;
  ds.y.setZero();
  const double zeros = generalization_bound(ds, 0.1, 0.0).quad_term;
  return {ones == 2.0 && zeros == 0.0, "quad_term " + io::format_double(ones) + " for y=(1,1), " +
                                           io::format_double(zeros) + " for y=0"};
}

Outcome c16() {
  const fs::path root = fs::temp_directory_path() / "ngdconv_acceptance_determinism";
  fs::remove_all(root);
  const std::vector<json> docs = {
      json::parse(R"({"data":{"synth":{"n":16,"d":8,"seed":3}},"model":{"m":512,"seed":1},
                      "optimizer":{"method":"ngd_exact","eta":0.5,"max_steps":15,
                                   "diagnostics":{"track_lambda_min":true,"track_jacobian_drift":true}},
                      "sweeps":{"eta":[0.25,0.5],"seed":[1,2]}})"),
      json::parse(R"({"data":{"synth":{"n":12,"d":6,"seed":4}},"preprocess":{"forster":true},
                      "model":{"m":256,"seed":2},"optimizer":{"method":"kfac","eta":0.5,"max_steps":10}})"),
      json::parse(R"({"data":{"synth":{"n":12,"d":6,"seed":5}},"model":{"m":256,"seed":3},
                      "optimizer":{"method":"ngd_cg","eta":0.7,"max_steps":10,
                                   "loss":{"kind":"strongly_convex_smooth","mu":0.5}}})"),
      json::parse(R"({"data":{"synth":{"n":12,"d":6,"seed":6}},"model":{"m":256,"seed":4},
                      "optimizer":{"method":"gd","eta":1.0,"max_steps":10}})")};
  int compared = 0, mismatched = 0;
  for (std::size_t c = 0; c < docs.size(); ++c) {
    std::vector<fs::path> dirs;
    for (unsigned jobs : {1u, 1u, 3u}) {
      json doc = docs[c];
      dirs.push_back(root / ("cfg" + std::to_string(c) + "_run" + std::to_string(dirs.size())));
      doc["output"] = {{"dir", dirs.back().string()}};
      run(parse_config(doc), {jobs, true});
    }
    for (const auto& e : fs::directory_iterator(dirs[0])) {
      if (e.path().extension() != ".csv") continue;
      const std::string first = io::read_file(e.path());
      for (std::size_t k = 1; k < dirs.size(); ++k) {
        ++compared;
        mismatched += io::read_file(dirs[k] / e.path().filename()) != first;
      }
    }
  }
  fs::remove_all(root);
  return {compared > 0 && mismatched == 0,
          std::to_string(compared) + " trace comparisons, " + std::to_string(mismatched) + " differ"};
}

const std::map<std::string, std::pair<std::string, std::function<Outcome()>>>& criteria() {
  static const std::map<std::string, std::pair<std::string, std::function<Outcome()>>> table = {
      {"C01", {"NGD linear rate", c01}},
      {"C02", {"one-step convergence at unit step", c02}},
      {"C03", {"K-FAC equals Kronecker oracle", c03}},
      {"C04", {"K-FAC output-space step", c04}},
      {"C05", {"K-FAC rate after Forster", c05}},
      {"C06", {"Forster transform", c06}},
      {"C07", {"Jacobian vs finite differences", c07}},
      {"C08", {"Gram correctness", c08}},
      {"C09", {"Hadamard eigenvalue bounds", c09}},
      {"C10", {"Gram concentration at init", c10}},
      {"C11", {"weight drift bounds", c11}},
      {"C12", {"general-loss NGD rate", c12}},
      {"C13", {"lambda_min(Ginf) floor n^beta/2", c13}},
      {"C14", {"GD and NGD share the min-norm limit", c14}},
      {"C15", {"generalization quad_term arithmetic", c15}},
      {"C16", {"deterministic traces", c16}},
  };
  return table;
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<std::string> ids;
  for (int i = 1; i < argc; ++i) ids.emplace_back(argv[i]);
  if (ids.empty()) {
    for (const auto& [id, _] : criteria()) ids.push_back(id);
  }
  int failed = 0;
  for (const auto& id : ids) {
    const auto it = criteria().find(id);
    if (it == criteria().end()) {
      std::printf("[FAIL] %s unknown criterion\n", id.c_str());
      ++failed;
      continue;
    }
    Outcome o;
    try {
      o = it->second.second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::printf("[%s] %s %s: %s\n", o.pass ? "PASS" : "FAIL", id.c_str(), it->second.first.c_str(), o.detail.c_str());
    std::fflush(stdout);
    failed += !o.pass;
  }
  return failed == 0 ? 0 : 1;
}
