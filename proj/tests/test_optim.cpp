#include <gtest/gtest.h>

#include "ngdconv/optim.hpp"
#include "oracles.hpp"

using namespace ngdconv;

namespace {

Dataset sphere(Eigen::Index n, Eigen::Index d, std::uint64_t seed) { return synth_sphere(n, d, seed); }

// Gradient of the mean squared loss by central differences on the oracle forward.
Matrix fd_loss_gradient(const NetworkParams& p, const Dataset& ds, double h = 1e-6) {
  auto loss = [&](const Matrix& w) {
    return 0.5 * (oracle::forward(w, p.a(), ds.X) - ds.y).squaredNorm() / double(ds.n());
  };
  Matrix g(p.m(), p.d());
  for (Eigen::Index r = 0; r < p.m(); ++r) {
    for (Eigen::Index k = 0; k < p.d(); ++k) {
      Matrix wp = p.w(), wm = p.w();
      wp(r, k) += h;
      wm(r, k) -= h;
      g(r, k) = (loss(wp) - loss(wm)) / (2 * h);
    }
  }
  return g;
}

}  // namespace

TEST(Loss, ReferenceLossGradientAndConstants) {
  const LossSpec l = reference_strongly_convex_loss(0.5);
  EXPECT_EQ(l.mu, 0.5);
  EXPECT_EQ(l.L, 1.5);
  for (double r : {-30.0, -1.0, 0.0, 0.3, 2.0, 800.0}) {
    const double h = 1e-5;
    const double fd = (l.value(r + h, 0.0) - l.value(r - h, 0.0)) / (2 * h);
    EXPECT_NEAR(l.grad(r, 0.0), fd, 1e-6 * std::max(1.0, std::abs(fd)));
    EXPECT_TRUE(std::isfinite(l.value(r, 0.0)));
  }
  // Curvature stays within [mu, L].
  for (double r = -5; r <= 5; r += 0.25) {
    const double c = (l.grad(r + 1e-4, 0) - l.grad(r - 1e-4, 0)) / 2e-4;
    EXPECT_GE(c, 0.5 - 1e-6);
    EXPECT_LE(c, 1.5 + 1e-6);
  }
  const LossSpec sq = squared_loss();
  EXPECT_EQ(sq.grad(3.0, 1.0), 2.0);
  EXPECT_EQ(mean_loss(sq, Vector::Constant(2, 1.0), Vector::Zero(2)), 0.5);
}

TEST(Cg, MatchesPseudoInverseSolve) {
  std::mt19937_64 rng(1);
  for (int t = 0; t < 5; ++t) {
    const Matrix A = oracle::random_spd(12, rng, 1.0);
    Vector b = Vector::Ones(12);
    const CgResult r = conjugate_gradient(A, b, 100, 1e-12);
    EXPECT_TRUE(r.converged);
    EXPECT_LE(r.iterations, 40);
    EXPECT_LT((r.x - oracle::pinv(A) * b).norm(), 1e-9 * (oracle::pinv(A) * b).norm());
  }
  const Matrix A = oracle::random_spd(12, rng, 0.01);
  const CgResult stalled = conjugate_gradient(A, Vector::Ones(12), 1, 1e-14);
  EXPECT_FALSE(stalled.converged);
  EXPECT_EQ(stalled.iterations, 1);
  EXPECT_GT(stalled.relative_residual, 0.0);
}

TEST(Step, GdMatchesFiniteDifferenceGradient) {
  const Dataset ds = sphere(5, 3, 2);
  const NetworkParams p = init(8, 3, 1.0, 3);
  ASSERT_GT(oracle::kink_margin(p.w(), ds.X), 1e-4);
  const NetworkParams q = gd_step(p, ds, 0.1);
  EXPECT_LT(oracle::rel_err((p.w() - q.w()) / 0.1, fd_loss_gradient(p, ds)), 1e-7);
}

TEST(Step, NgdExactMatchesPseudoInverse) {
  const Dataset ds = sphere(6, 4, 5);
  const NetworkParams p = init(20, 4, 1.0, 1);
  const Matrix J = jacobian(p, ds.X).dense();
  const Vector r = forward(p, ds.X) - ds.y;
  const Vector want = flatten_weights(p.w()) - 0.7 * oracle::pinv(J) * r;
  const NetworkParams q = ngd_exact_step(p, ds, 0.7, 0.0);
  EXPECT_LT(oracle::rel_err(flatten_weights(q.w()), want), 1e-12);
  // The step makes the linearized residual contract by exactly (1 - eta).
  const Vector lin = r + J * (flatten_weights(q.w()) - flatten_weights(p.w()));
  EXPECT_LT((lin - 0.3 * r).norm(), 1e-10 * r.norm());
}

TEST(Step, GeneralLossMatchesPseudoInverse) {
  const Dataset ds = sphere(6, 4, 6);
  const NetworkParams p = init(20, 4, 1.0, 2);
  const LossSpec loss = reference_strongly_convex_loss(0.5);
  const Matrix J = jacobian(p, ds.X).dense();
  const Vector g = output_gradient(loss, forward(p, ds.X), ds.y);
  const Vector want = flatten_weights(p.w()) - 0.5 * oracle::pinv(J) * g;
  const NetworkParams q = ngd_general_loss_step(p, ds, 0.5, loss, 0.0);
  EXPECT_LT(oracle::rel_err(flatten_weights(q.w()), want), 1e-12);
}

TEST(Step, CgAgreesWithExact) {
  const Dataset ds = sphere(8, 4, 7);
  const NetworkParams p = init(64, 4, 1.0, 3);
  CgResult stats;
  const NetworkParams a = ngd_exact_step(p, ds, 0.5, 0.0);
  const NetworkParams b = ngd_cg_step(p, ds, 0.5, 0.0, 200, 1e-14, &stats);
  EXPECT_TRUE(stats.converged);
  EXPECT_LT(oracle::rel_err(b.w() - p.w(), a.w() - p.w()), 1e-8);
}

TEST(Step, SingularGramRaises) {
  // Three inputs, one unit, two weights: rank(J) <= 2 < n.
  const Dataset ds = sphere(3, 2, 1);
  const NetworkParams p = init(1, 2, 1.0, 0);
  try {
    ngd_exact_step(p, ds, 1.0, 0.0);
    FAIL();
  } catch (const SingularError& e) {
    EXPECT_LE(e.lambda_min(), 1e-12);
  }
}

TEST(Step, KfacMatchesKroneckerOracle) {
  int checked = 0;
  for (std::uint64_t seed = 0; checked < 5 && seed < 50; ++seed) {
    const Dataset ds = sphere(6, 3, 10 + seed);
    const NetworkParams p = init(12, 3, 1.0, seed);
    Matrix got;
    try {
      got = kfac_direction(p, ds, 0.0);
    } catch (const SingularError&) {
      continue;  // some example activates no unit
    }
    ++checked;
    const ActivationPattern ap = activation_pattern(p, ds.X);
    const Matrix& St = ap.Stilde;
    const Vector r = forward(p, ds.X) - ds.y;
    const Vector JtR = jacobian(p, ds.X).dense().transpose() * r;
    // Unit-major J^T r is the row-major flattening of M (m x d); vec_col(M) is its column stack.
    const Matrix M = unflatten_weights(JtR, p.m(), p.d());
    const Matrix K = oracle::kron((ds.X.transpose() * ds.X).inverse(), oracle::pinv(St.transpose() * St));
    const Vector vec = K * M.reshaped();
    const Matrix want = vec.reshaped(p.m(), p.d());
    EXPECT_LT(oracle::rel_err(got, want), 1e-10) << "seed " << seed;
  }
  EXPECT_EQ(checked, 5);
}

TEST(Step, KfacRankDeficientInputs) {
  const Dataset ds = sphere(3, 5, 1);
  const NetworkParams p = init(10, 5, 1.0, 0);
  try {
    kfac_step(p, ds, 0.5);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::rank_deficiency);
  }
}

TEST(Train, TraceShapeAndEarlyStop) {
  const Dataset ds = sphere(8, 4, 3);
  const NetworkParams p = init(512, 4, 1.0, 1);
  OptimizerConfig cfg;
  cfg.method = Method::ngd_exact;
  cfg.eta = 0.5;
  cfg.max_steps = 5;
  cfg.diagnostics.track_lambda_min = true;
  const TrainResult r = train(p, ds, cfg);
  ASSERT_EQ(r.trace.records.size(), 5u);
  EXPECT_EQ(r.trace.records.front().k, 1);
  EXPECT_TRUE(r.trace.records.front().lambda_min_G.has_value());
  EXPECT_FALSE(r.trace.records.front().jacobian_drift.has_value());
  const std::string csv = trace_to_csv(r.trace);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), kTraceCsvHeader);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 6);

  cfg.eta = 1.0;
  cfg.max_steps = 50;
  const TrainResult fast = train(p, ds, cfg);
  EXPECT_LT(fast.trace.records.size(), 50u);
  EXPECT_LE(fast.trace.records.back().residual_norm, kEarlyStopResidual);
}

TEST(Train, DivergenceIsReported) {
  const Dataset ds = sphere(8, 4, 3);
  const NetworkParams p = init(16, 4, 1.0, 1);
  OptimizerConfig cfg;
  cfg.method = Method::gd;
  cfg.eta = 1e300;
  cfg.max_steps = 10;
  EXPECT_THROW(train(p, ds, cfg), DivergenceError);
}

TEST(Train, KfacRejectsGeneralLoss) {
  const Dataset ds = sphere(8, 4, 3);
  OptimizerConfig cfg;
  cfg.method = Method::kfac;
  cfg.loss = reference_strongly_convex_loss();
  EXPECT_THROW(train(init(16, 4, 1.0, 1), ds, cfg), Error);
}

TEST(Train, ResidualDecreasesForEveryMethod) {
  const Dataset ds = sphere(8, 4, 9);
  for (Method m : {Method::gd, Method::ngd_exact, Method::ngd_cg, Method::kfac}) {
    OptimizerConfig cfg;
    cfg.method = m;
    cfg.eta = m == Method::gd ? 1.0 : 0.3;
    cfg.max_steps = 5;
    const TrainResult r = train(init(1024, 4, 1.0, 2), ds, cfg);
    EXPECT_LT(r.trace.records.back().residual_norm, r.trace.initial_residual_norm) << to_string(m);
  }
}
