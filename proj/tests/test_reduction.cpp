#include <gtest/gtest.h>

#include <random>

#include "common.hpp"
#include "oracles.hpp"

using namespace neumannlab;
using testing_support::ref5_f;
using testing_support::ref5_space;

namespace {

const ReductionContext& ctx() {
  static const ReductionContext c(EnergyFunctional(ref5_space(16), ref5_f()));
  return c;
}

Eigen::VectorXd random_part(std::mt19937_64& rng, const std::vector<Eigen::Index>& idx, int n, double scale) {
  std::normal_distribution<double> nd(0.0, 1.0);
  Eigen::VectorXd v = Eigen::VectorXd::Zero(n);
  for (Eigen::Index i : idx) v[i] = scale * nd(rng) / (1.0 + double(i));
  return v;
}

}  // namespace

TEST(Reduction, SplitAndModulus) {
  EXPECT_EQ(ctx().k(), 2);
  EXPECT_DOUBLE_EQ(ctx().lambda_min_y(), 4.0);
  EXPECT_NEAR(ctx().modulus(), (4.0 - 2.5) / 5.0, 1e-12);
}

TEST(Reduction, MonotonicityOnY) {
  const EnergyFunctional& j = ctx().functional();
  const Eigen::VectorXd& w = j.weights();
  std::mt19937_64 rng(21);
  for (int i = 0; i < 200; ++i) {
    const Eigen::VectorXd x = random_part(rng, ctx().x_indices(), 16, 3.0);
    const Eigen::VectorXd y1 = random_part(rng, ctx().y_indices(), 16, 2.0);
    const Eigen::VectorXd y2 = random_part(rng, ctx().y_indices(), 16, 2.0);
    const Eigen::VectorXd dg = ctx().project_y(j.gradient(x + y1) - j.gradient(x + y2));
    const double lhs = metric_dot(w, dg, y1 - y2);
    EXPECT_GE(lhs, ctx().modulus() * metric_dot(w, y1 - y2, y1 - y2) - 1e-10);
  }
}

TEST(Reduction, PsiBeatsRandomCompetitors) {
  const EnergyFunctional& j = ctx().functional();
  std::mt19937_64 rng(8);
  for (int i = 0; i < 20; ++i) {
    const Eigen::VectorXd x = random_part(rng, ctx().x_indices(), 16, 3.0);
    const Eigen::VectorXd y = psi(ctx(), x);
    const double best = j.value(x + y);
    for (int c = 0; c < 100; ++c) {
      const double scale = c < 50 ? 0.05 : 1.5;
      const Eigen::VectorXd comp = y + random_part(rng, ctx().y_indices(), 16, scale);
      EXPECT_LE(best, j.value(x + comp) + 1e-12);
    }
  }
}

TEST(Reduction, ReducedValueMatchesIndependentMinimization) {
  const oracle::Galerkin og(oracle::ref5(), std::numbers::pi, 16, 256);
  std::vector<int> free;
  for (Eigen::Index i : ctx().y_indices()) free.push_back(int(i));
  for (double a : {-2.0, 0.5, 3.0}) {
    for (double b : {-1.5, 0.0, 2.0}) {
      Eigen::VectorXd x = Eigen::VectorXd::Zero(16);
      x[0] = a;
      x[1] = b;
      EXPECT_NEAR(reduced_value(ctx(), x), oracle::reduced_energy(og, x, free), 1e-6) << a << "," << b;
    }
  }
}

TEST(Reduction, ReducedGradientMatchesFiniteDifferences) {
  Eigen::VectorXd x = Eigen::VectorXd::Zero(16);
  x[0] = 0.7;
  x[1] = -1.1;
  const Eigen::VectorXd g = reduced_gradient(ctx(), x);
  const Eigen::VectorXd& w = ctx().functional().weights();
  const double h = 1e-5;
  for (Eigen::Index i : ctx().x_indices()) {
    Eigen::VectorXd e = Eigen::VectorXd::Zero(16);
    e[i] = h;
    const double fd = (reduced_value(ctx(), x + e) - reduced_value(ctx(), x - e)) / (2 * h);
    EXPECT_NEAR(fd, w[i] * g[i], 1e-6);
  }
}

TEST(Reduction, LocalMaxMinAtConstants) {
  for (double alpha : {-1.0, 1.0}) {
    const MaxMinReport r = local_max_min_at_constant(ctx(), alpha);
    EXPECT_EQ(r.ell, 0);
    EXPECT_TRUE(r.pass);
    for (const DirectionCheck& d : r.directions) {
      EXPECT_FALSE(d.low_block);
      EXPECT_NEAR(d.second_difference, d.expected, 1e-2);
    }
  }
}

TEST(Reduction, MaximizerIsCriticalWithIndexK) {
  const ReductionResult r = maximize_reduced(ctx(), SolverConfig{}, 14.0);
  EXPECT_LT(r.record.residual, 1e-9);
  EXPECT_EQ(r.record.morse_index, 2);
  EXPECT_EQ(r.record.classification, Classification::reduction_max);
  EXPECT_GE(r.reduced_max, r.grid_max - 1e-9);
  const Eigen::VectorXd y = psi(ctx(), r.x);
  EXPECT_LT(metric_norm(ctx().functional().weights(), y - ctx().project_y(r.record.u.coeffs())), 1e-8);
}

TEST(Reduction, InapplicableWhenGammaTooLarge) {
  const Nonlinearity steep = Nonlinearity::build({{-1, -3}, {0, 5}, {1, -3}}, 2.5, 2.5);
  try {
    ReductionContext c(EnergyFunctional(ref5_space(16), steep));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ReductionInapplicable);
  }
}
