#include <gtest/gtest.h>

#include <limits>
#include <random>

#include "compofed/prox.hpp"
#include "compofed/reference_prox.hpp"
#include "support/oracles.hpp"

using namespace compofed;
using compofed::testing::random_regularizer;
using compofed::testing::random_vector;

namespace {

Vector vec(std::initializer_list<double> values) {
  Vector v(static_cast<Eigen::Index>(values.size()));
  Eigen::Index j = 0;
  for (double x : values) v(j++) = x;
  return v;
}

double prox_objective(const Regularizer& g, double theta, const Vector& omega, const Vector& u) {
  return theta * value(g, u) + 0.5 * (omega - u).squaredNorm();
}

}  // namespace

TEST(Prox, ZeroIsIdentity) {
  const Vector out = prox(Zero{}, 0.7, vec({1.5, -2.0}));
  EXPECT_EQ(out, vec({1.5, -2.0}));
}

TEST(Prox, SoftThresholdMatchesGoldenSection) {
  const Vector omega = vec({1.0, -0.3, 0.0});
  const Vector out = prox(make_l1(1.0), 0.5, omega);
  EXPECT_NEAR(out(0), 0.5, 1e-15);
  EXPECT_EQ(out(1), 0.0);
  EXPECT_EQ(out(2), 0.0);
  for (Eigen::Index j = 0; j < omega.size(); ++j) {
    const double w = omega(j);
    const double oracle = compofed::testing::golden_section(
        [&](double u) { return 0.5 * std::abs(u) + 0.5 * (w - u) * (w - u); }, -3.0, 3.0, 1e-12);
    EXPECT_NEAR(out(j), oracle, 1e-8);
  }
}

TEST(Prox, BallProjectsRadially) {
  const Vector out = prox(make_ball(1.0, Vector::Zero(2)), 1.0, vec({3.0, 4.0}));
  EXPECT_NEAR(out(0), 0.6, 1e-15);
  EXPECT_NEAR(out(1), 0.8, 1e-15);
}

TEST(Prox, IndicatorProjectsEvenAtThetaZero) {
  const Regularizer ball = make_ball(1.0, Vector::Zero(2));
  const Vector out = prox(ball, 0.0, vec({3.0, 4.0}));
  EXPECT_NEAR(out.norm(), 1.0, 1e-15);
  // l1 with theta = 0 is the identity
  EXPECT_EQ(prox(make_l1(3.0), 0.0, vec({0.2, -0.1})), vec({0.2, -0.1}));
}

TEST(Prox, RejectsBadArguments) {
  EXPECT_THROW(prox(make_l1(1.0), -0.1, vec({1.0})), Error);
  EXPECT_THROW(prox(make_l1(1.0), 0.1, vec({std::numeric_limits<double>::quiet_NaN()})), Error);
  EXPECT_THROW(prox(Zero{}, 0.1, vec({std::numeric_limits<double>::infinity()})), Error);
  EXPECT_THROW(make_l1(-1.0), Error);
  EXPECT_THROW(make_ball(0.0, Vector::Zero(2)), Error);
  EXPECT_THROW(make_box(vec({1.0}), vec({0.0})), Error);
  EXPECT_THROW(reference_prox(make_l1(1.0), -1.0, vec({1.0})), Error);
}

TEST(ReferenceProx, ZeroWeightIsIdentity) {
  const Vector v = vec({0.3, -7.0, 2.5});
  EXPECT_TRUE(reference_prox(make_l1(0.0), 5.0, v).isApprox(v, 1e-14));
}

TEST(ReferenceProx, BoxClamps) {
  const Regularizer box = make_box(Vector::Constant(3, -1.0), Vector::Constant(3, 1.0));
  const Vector out = reference_prox(box, 2.0, vec({2.0, -3.0, 0.5}));
  EXPECT_NEAR(out(0), 1.0, 1e-14);
  EXPECT_NEAR(out(1), -1.0, 1e-14);
  EXPECT_NEAR(out(2), 0.5, 1e-12);
}

TEST(ReferenceProx, AgreesWithProxOnRandomCases) {
  std::mt19937_64 rng(20240601);
  std::uniform_real_distribution<double> theta_dist(0.0, 3.0);
  std::uniform_int_distribution<int> dim_dist(1, 12);
  double worst = 0.0;
  for (int k = 0; k < 1000; ++k) {
    const Eigen::Index d = dim_dist(rng);
    const Regularizer g = random_regularizer(rng, d);
    const double theta = theta_dist(rng);
    const Vector omega = random_vector(rng, d, 2.0);
    worst = std::max(worst, (prox(g, theta, omega) - reference_prox(g, theta, omega)).cwiseAbs().maxCoeff());
  }
  EXPECT_LE(worst, 1e-6);
}

TEST(ProxProperties, Nonexpansive) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> theta_dist(0.0, 3.0);
  for (int k = 0; k < 500; ++k) {
    const Eigen::Index d = 6;
    const Regularizer g = random_regularizer(rng, d);
    const double theta = theta_dist(rng);
    const Vector a = random_vector(rng, d, 2.0);
    const Vector b = random_vector(rng, d, 2.0);
    const double lhs = (prox(g, theta, a) - prox(g, theta, b)).norm();
    EXPECT_LE(lhs, (a - b).norm() * (1.0 + 1e-12));
  }
}

TEST(ProxProperties, OutputMinimizesProxObjective) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> theta_dist(0.01, 3.0);
  for (int k = 0; k < 200; ++k) {
    const Eigen::Index d = 5;
    const Regularizer g = random_regularizer(rng, d);
    const double theta = theta_dist(rng);
    const Vector omega = random_vector(rng, d, 2.0);
    const Vector best = prox(g, theta, omega);
    const double f_best = prox_objective(g, theta, omega, best);
    for (int p = 0; p < 20; ++p) {
      // perturbations projected back for indicators so they stay comparable
      Vector v = best + random_vector(rng, d, 0.1);
      if (is_indicator(g)) v = prox(g, 1.0, v);
      EXPECT_LE(f_best, prox_objective(g, theta, omega, v) + 1e-12);
    }
  }
}

TEST(ProxProperties, IndicatorOutputIsFeasibleFixedPoint) {
  std::mt19937_64 rng(13);
  for (int k = 0; k < 200; ++k) {
    const Eigen::Index d = 4;
    Regularizer g = (k % 2 == 0) ? make_ball(0.5, random_vector(rng, d))
                                 : make_box(-Vector::Ones(d), Vector::Ones(d) * 0.5);
    const Vector out = prox(g, 0.3, random_vector(rng, d, 3.0));
    EXPECT_EQ(value(g, out), 0.0);
    EXPECT_LE((prox(g, 0.3, out) - out).norm(), 1e-14);
  }
}

TEST(SubgradientBound, PerVariant) {
  EXPECT_EQ(subgradient_bound(Zero{}, 4), 0.0);
  EXPECT_DOUBLE_EQ(subgradient_bound(make_l1(0.5), 9), 1.5);
  EXPECT_TRUE(std::isinf(subgradient_bound(make_ball(1.0, Vector::Zero(3)), 3)));
  EXPECT_TRUE(std::isinf(subgradient_bound(make_box(-Vector::Ones(2), Vector::Ones(2)), 2)));
}
