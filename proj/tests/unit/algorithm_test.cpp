#include <gtest/gtest.h>

#include "compofed/algorithm.hpp"
#include "compofed/analysis.hpp"
#include "compofed/datagen.hpp"
#include "compofed/vectorized.hpp"
#include "support/oracles.hpp"

using namespace compofed;
using namespace compofed::testing;

namespace {

double max_abs_diff(const RoundTrace& a, const RoundTrace& b) {
  double worst = 0.0;
  EXPECT_EQ(a.records.size(), b.records.size());
  for (std::size_t r = 0; r < a.records.size(); ++r) {
    worst = std::max(worst, (a.records[r].x_bar - b.records[r].x_bar).cwiseAbs().maxCoeff());
    worst = std::max(worst, (a.records[r].x_bar_prox - b.records[r].x_bar_prox).cwiseAbs().maxCoeff());
    for (std::size_t i = 0; i < a.records[r].grad_sums.size(); ++i) {
      worst = std::max(worst, (a.records[r].grad_sums[i] - b.records[r].grad_sums[i]).cwiseAbs().maxCoeff());
    }
  }
  return worst;
}

bool identical(const RoundTrace& a, const RoundTrace& b) {
  if (a.records.size() != b.records.size()) return false;
  for (std::size_t r = 0; r < a.records.size(); ++r) {
    if (a.records[r].x_bar != b.records[r].x_bar || a.records[r].x_bar_prox != b.records[r].x_bar_prox) return false;
    if (a.records[r].grad_sums.size() != b.records[r].grad_sums.size()) return false;
    for (std::size_t i = 0; i < a.records[r].grad_sums.size(); ++i) {
      if (a.records[r].grad_sums[i] != b.records[r].grad_sums[i]) return false;
    }
  }
  return true;
}

struct FixedPointSetup {
  Problem problem;
  Regularizer g;
  Vector x_star;
  HyperParams hyper;
};

/// n = 1, tau = 2, full gradients, started at x* - eta_tilde grad f(x*).
FixedPointSetup fixed_point_setup() {
  FixedPointSetup s;
  s.problem.workers = generate(GenSpec{1.0, 1.0, 1, 100, 10, 5, true});
  s.problem.smooth.l2_weight = 0.01;
  s.g = make_l1(0.01);
  s.x_star = solve_reference(s.problem, s.g).x_star;
  const auto k = constants(s.problem);
  s.hyper = HyperParams{50, 2, 1.0 / k.L, 1.0, std::nullopt, 3};
  return s;
}

}  // namespace

TEST(Init, CorrectionsStartAtZero) {
  const Vector x1 = Vector::Constant(3, 2.0);
  auto [server, workers] = init(x1, 4, HyperParams{}, make_l1(0.5));
  ASSERT_EQ(workers.size(), 4u);
  for (const auto& w : workers) {
    EXPECT_TRUE(w.c.isZero(0.0));
    EXPECT_TRUE(w.grad_sum.isZero(0.0));
    EXPECT_EQ(w.z, server.x_bar_prox);
    EXPECT_EQ(w.z_hat, server.x_bar_prox);
  }
  EXPECT_EQ(server.x_bar, x1);
}

TEST(Init, ProxOfStartingModel) {
  auto [s0, w0] = init(Vector::Zero(3), 1, HyperParams{}, Zero{});
  EXPECT_TRUE(s0.x_bar_prox.isZero(0.0));
  Vector outside(2);
  outside << 3.0, 4.0;
  auto [s1, w1] = init(outside, 1, HyperParams{}, make_ball(1.0, Vector::Zero(2)));
  EXPECT_NEAR(s1.x_bar_prox.norm(), 1.0, 1e-15);
}

TEST(LocalRound, SingleStepUnrolls) {
  const Problem p = random_problem(1, 1, 12, 4, 0.1);
  HyperParams h{1, 1, 0.3, 1.0, 4, 8};
  const Vector x_bar = Vector::Constant(4, 0.2);
  const auto res = local_round(0, 1, x_bar, Vector::Zero(4), p.workers[0], p.smooth, Zero{}, h);
  CounterStream stream = CounterStream::for_step(8, 0, 1, 0);
  const auto batch = sample_batch(stream, 12, 4);
  const Vector expected = x_bar - 0.3 * minibatch_gradient(x_bar, p.workers[0], p.smooth, batch);
  EXPECT_TRUE(res.z_hat.isApprox(expected, 1e-15));
}

TEST(LocalRound, FullBatchGradSumIsSumOfFullGradients) {
  const Problem p = random_problem(2, 1, 10, 3, 0.1);
  HyperParams h{1, 4, 0.2, 1.0, std::nullopt, 1};
  std::vector<Vector> path;
  const Vector c = Vector::Constant(3, 0.05);
  const auto res = local_round(0, 1, Vector::Constant(3, 0.4), c, p.workers[0], p.smooth, make_l1(0.1), h,
                               LocalProxSchedule::Growing, &path);
  ASSERT_EQ(path.size(), 5u);
  Vector expected = Vector::Zero(3);
  for (std::size_t t = 0; t < 4; ++t) expected += full_gradient(path[t], p.workers[0], p.smooth);
  EXPECT_TRUE(res.grad_sum.isApprox(expected, 1e-14));
}

TEST(LocalRound, StopsAtOptimumForSingleWorker) {
  const auto s = fixed_point_setup();
  const Vector grad = full_gradient(s.x_star, s.problem.workers[0], s.problem.smooth);
  const Vector x_bar = s.x_star - s.hyper.eta_tilde() * grad;
  std::vector<Vector> path;
  const auto res = local_round(0, 1, x_bar, Vector::Zero(10), s.problem.workers[0], s.problem.smooth, s.g, s.hyper,
                               LocalProxSchedule::Growing, &path);
  const double scale = s.x_star.norm();
  EXPECT_LE((path[1] - s.x_star).norm(), 1e-10 * scale);
  EXPECT_LE((path[2] - s.x_star).norm(), 1e-10 * scale);
  EXPECT_LE((res.z_hat - (s.x_star - 2.0 * s.hyper.eta * grad)).norm(), 1e-10 * scale);
}

TEST(ServerAggregate, ZeroDisplacementKeepsProx) {
  ServerState s{Vector::Constant(3, 1.0), Vector::Constant(3, 0.5)};
  std::vector<Vector> z(3, s.x_bar_prox);
  const auto next = server_aggregate(s, z, 3, HyperParams{1, 2, 0.1, 2.0, std::nullopt, 0}, Zero{});
  EXPECT_TRUE(next.x_bar.isApprox(s.x_bar_prox, 1e-15));
}

TEST(ServerAggregate, SingleWorkerUnitStepTakesLocalModel) {
  ServerState s{Vector::Constant(2, 1.0), Vector::Constant(2, 0.5)};
  Vector z(2);
  z << 0.3, -0.7;
  std::vector<Vector> zs{z};
  const auto next = server_aggregate(s, zs, 1, HyperParams{}, make_l1(0.1));
  EXPECT_EQ(next.x_bar, z);
  EXPECT_EQ(next.x_bar_prox, prox(make_l1(0.1), HyperParams{}.eta_tilde(), z));
}

TEST(ServerAggregate, CountMismatchThrows) {
  ServerState s{Vector::Zero(2), Vector::Zero(2)};
  std::vector<Vector> zs(2, Vector::Zero(2));
  EXPECT_THROW(server_aggregate(s, zs, 3, HyperParams{}, Zero{}), Error);
}

TEST(UpdateCorrection, SingleWorkerCorrectionVanishes) {
  const Problem p = random_problem(3, 1, 15, 4, 0.1);
  HyperParams h{6, 3, 0.2, 1.5, 5, 2};
  const auto trace = run(p, h, make_l1(0.05));
  for (const auto& rec : trace.records) EXPECT_LE(rec.correction_max_norm, 1e-12 * (1.0 + rec.x_bar.norm()));
}

TEST(UpdateCorrection, LiteralFormulaMatchesGradientForm) {
  const Problem p = random_problem(4, 3, 15, 4, 0.1);
  HyperParams h{10, 3, 0.2, 1.5, 5, 2};
  const Regularizer g = make_l1(0.05);
  const auto trace = run(p, h, g);
  for (std::size_t r = 0; r + 1 < trace.records.size(); ++r) {
    const auto& prev = trace.records[r];
    const auto& next = trace.records[r + 1];
    Vector mean = Vector::Zero(4);
    for (const auto& s : next.grad_sums) mean += s;
    mean /= 3.0;
    for (std::size_t i = 0; i < 3; ++i) {
      const Vector c = update_correction(prev.x_bar_prox, next.x_bar, next.grad_sums[i], h);
      EXPECT_LE((c - (mean - next.grad_sums[i]) / 3.0).norm(), 1e-12) << "round " << next.round;
    }
  }
}

TEST(Run, CorrectionsSumToZeroEveryRound) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const Problem p = random_problem(seed, 5, 20, 6, 0.05);
    for (const Regularizer& g : {Regularizer{make_l1(0.02)}, Regularizer{Zero{}},
                                 Regularizer{make_ball(0.5, Vector::Zero(6))}}) {
      HyperParams h{15, 3, 0.1, 1.7, 4, seed};
      const auto trace = run(p, h, g);
      for (const auto& rec : trace.records) {
        EXPECT_LE(rec.correction_sum_norm, 5.0 * 1e-12 * (1.0 + rec.correction_max_norm));
      }
    }
  }
}

TEST(Run, DecouplingIdentity) {
  const Problem p = random_problem(5, 4, 20, 5, 0.05);
  HyperParams h{10, 3, 0.15, 1.3, 5, 9};
  const auto trace = run(p, h, make_l1(0.03));
  for (std::size_t r = 0; r + 1 < trace.records.size(); ++r) {
    const auto& next = trace.records[r + 1];
    Vector mean = Vector::Zero(5);
    for (const auto& s : next.grad_sums) mean += s;
    mean /= 4.0;
    const Vector compact = trace.records[r].x_bar_prox - h.eta_g * h.eta * mean;
    EXPECT_LE((next.x_bar - compact).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Run, DeterministicAcrossRunsAndThreadCounts) {
  const Problem p = random_problem(6, 6, 30, 5, 0.05);
  HyperParams h{8, 3, 0.2, 1.0, 7, 21};
  RunOptions serial;
  RunOptions parallel;
  parallel.threads = 4;
  const auto a = run(p, h, make_l1(0.01), serial);
  const auto b = run(p, h, make_l1(0.01), serial);
  const auto c = run(p, h, make_l1(0.01), parallel);
  EXPECT_TRUE(identical(a, b));
  EXPECT_TRUE(identical(a, c));
  EXPECT_EQ(a.records.size(), 9u);
}

TEST(Run, WorkerStartMatchesServerProxCache) {
  const Problem p = random_problem(7, 2, 10, 3, 0.05);
  HyperParams h{3, 2, 0.2, 1.0, std::nullopt, 1};
  const Regularizer g = make_l1(0.05);
  const auto trace = run(p, h, g);
  for (const auto& rec : trace.records) {
    std::vector<Vector> path;
    local_round(0, rec.round, rec.x_bar, Vector::Zero(3), p.workers[0], p.smooth, g, h, LocalProxSchedule::Growing,
                &path);
    EXPECT_EQ(path.front(), rec.x_bar_prox);
  }
}

TEST(Run, RejectsBatchLargerThanLocalData) {
  const Problem p = random_problem(8, 2, 10, 3, 0.05);
  HyperParams h{3, 2, 0.2, 1.0, 11, 1};
  EXPECT_THROW(run(p, h, Zero{}), Error);
  EXPECT_THROW(run_vectorized(p, h, Zero{}), Error);
}

TEST(RunVectorized, MatchesPerWorkerRun) {
  const Problem p = random_problem(9, 4, 20, 8, 0.05);
  HyperParams h{10, 3, 0.2, 1.2, 5, 4};
  for (const Regularizer& g : {Regularizer{make_l1(0.02)}, Regularizer{make_ball(0.4, Vector::Zero(8))},
                               Regularizer{make_box(-0.1 * Vector::Ones(8), 0.2 * Vector::Ones(8))}}) {
    const auto a = run(p, h, g);
    const auto b = run_vectorized(p, h, g);
    EXPECT_LE(max_abs_diff(a, b), 1e-12) << describe(g);
  }
}

TEST(RunVectorized, CorrectionBlockZeroInFirstRoundAndZeroMean) {
  const Problem p = random_problem(10, 3, 15, 4, 0.05);
  HyperParams h{6, 2, 0.2, 1.0, 3, 4};
  const auto trace = run_vectorized(p, h, make_l1(0.01));
  EXPECT_EQ(trace.records.front().correction_max_norm, 0.0);
  for (const auto& rec : trace.records) {
    EXPECT_LE(rec.correction_sum_norm, 3.0 * 1e-12 * (1.0 + rec.correction_max_norm));
  }
  EXPECT_GT(trace.records.back().correction_max_norm, 0.0);
}

TEST(FixedPoint, GrowingProxParameterStaysAtOptimum) {
  const auto s = fixed_point_setup();
  RunOptions o;
  o.x_bar_1 = s.x_star - s.hyper.eta_tilde() * full_gradient(s.x_star, s.problem);
  const auto trace = run(s.problem, s.hyper, s.g, o);
  for (const auto& rec : trace.records) {
    EXPECT_LE(optimality_of_model(rec.x_bar_prox, s.x_star), 1e-10) << "round " << rec.round;
  }
}

TEST(FixedPoint, ConstantProxParameterDrifts) {
  const auto s = fixed_point_setup();
  RunOptions o;
  o.x_bar_1 = s.x_star - s.hyper.eta_tilde() * full_gradient(s.x_star, s.problem);
  o.schedule = LocalProxSchedule::Constant;
  const auto trace = run(s.problem, s.hyper, s.g, o);
  double worst = 0.0;
  for (const auto& rec : trace.records) worst = std::max(worst, optimality_of_model(rec.x_bar_prox, s.x_star));
  EXPECT_GT(worst, 1e-6);
}

TEST(TheoreticalStepsize, PlugIn) {
  const auto s = theoretical_stepsize(1.0, 1.0, 4, 5);
  EXPECT_DOUBLE_EQ(s.eta_tilde, 1.0 / 150.0);
  EXPECT_DOUBLE_EQ(s.eta_g, 2.0);
  EXPECT_DOUBLE_EQ(s.eta, 1.0 / 1500.0);
  const auto t = theoretical_stepsize(0.3, 2.0, 9, 3);
  EXPECT_DOUBLE_EQ(t.eta_tilde, 0.3 / (150.0 * 4.0));
  EXPECT_NEAR(t.eta * t.eta_g * 3.0, t.eta_tilde, 1e-18);
  const double factor = 1.0 - 0.3 * t.eta_tilde / 3.0;
  EXPECT_GT(factor, 0.0);
  EXPECT_LT(factor, 1.0);
  EXPECT_THROW(theoretical_stepsize(0.0, 1.0, 1, 1), Error);
}
