/*
 * Copyright 2026 The lamp-audit Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */


#include <gtest/gtest.h>

#include <random>

#include "lamp/error.hpp"
#include "lamp/linalg.hpp"
#include "oracles.hpp"

namespace lamp {
namespace {

struct Instance {
  Eigen::MatrixXd X;
  Eigen::VectorXd y;
  testing::Matrix Xr;
  std::vector<double> yr;
};

Instance random_instance(std::mt19937_64& rng, Eigen::Index n, Eigen::Index d, double noise) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Instance inst{Eigen::MatrixXd(n, d), Eigen::VectorXd(n), {}, {}};
  Eigen::VectorXd beta(d);
  for (Eigen::Index j = 0; j < d; ++j) beta(j) = normal(rng);
  const double intercept = normal(rng);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) inst.X(i, j) = normal(rng);
    inst.y(i) = intercept + inst.X.row(i).dot(beta) + noise * normal(rng);
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    inst.Xr.emplace_back();
    for (Eigen::Index j = 0; j < d; ++j) inst.Xr.back().push_back(inst.X(i, j));
    inst.yr.push_back(inst.y(i));
  }
  return inst;
}

TEST(LeastSquares, MatchesNormalEquationsOracle) {
  std::mt19937_64 rng(101);
  std::uniform_int_distribution<int> dim(1, 8);
  for (int trial = 0; trial < 100; ++trial) {
    const Eigen::Index d = dim(rng);
    const Eigen::Index n = d + 5 + trial % 40;
    const auto inst = random_instance(rng, n, d, 0.1);
    const auto fit = fit_least_squares(inst.X, inst.y);
    const auto ref = testing::normal_equations_fit(inst.Xr, inst.yr);
    EXPECT_NEAR(fit.intercept, ref[0], 1e-8);
    for (Eigen::Index j = 0; j < d; ++j) EXPECT_NEAR(fit.coef(j), ref[j + 1], 1e-8);
  }
}

TEST(LeastSquares, RidgeMatchesPenalizedNormalEquations) {
  std::mt19937_64 rng(7);
  for (double lambda : {0.01, 1.0, 25.0}) {
    const auto inst = random_instance(rng, 30, 4, 0.2);
    const auto fit = fit_least_squares(inst.X, inst.y, lambda);
    const auto ref = testing::normal_equations_fit(inst.Xr, inst.yr, lambda);
    EXPECT_NEAR(fit.intercept, ref[0], 1e-8);
    for (Eigen::Index j = 0; j < 4; ++j) EXPECT_NEAR(fit.coef(j), ref[j + 1], 1e-8);
  }
}

TEST(LeastSquares, NoiselessAffineDataHasUnitRSquared) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const auto inst = random_instance(rng, 25, 3, 0.0);
    EXPECT_NEAR(fit_least_squares(inst.X, inst.y).r_squared(), 1.0, 1e-9);
  }
}

TEST(LeastSquares, ResidualsAndSumsAreConsistent) {
  std::mt19937_64 rng(11);
  const auto inst = random_instance(rng, 40, 3, 0.5);
  const auto fit = fit_least_squares(inst.X, inst.y);
  const Eigen::VectorXd resid =
      inst.y - inst.X * fit.coef - Eigen::VectorXd::Constant(40, fit.intercept);
  EXPECT_NEAR((resid - fit.residuals).norm(), 0.0, 1e-10);
  EXPECT_NEAR(fit.rss, resid.squaredNorm(), 1e-10);
  EXPECT_NEAR(fit.tss, (inst.y.array() - inst.y.mean()).square().sum(), 1e-10);
  EXPECT_FALSE(fit.rank_deficient);
  EXPECT_EQ(fit.rank, 3);
}

TEST(LeastSquares, CollinearDesignThrowsNamingColumns) {
  Eigen::MatrixXd X(6, 3);
  X << 1, 2, 0, 2, 4, 1, 3, 6, 0, 4, 8, 1, 5, 10, 0, 6, 12, 1;
  const Eigen::VectorXd y = Eigen::VectorXd::LinSpaced(6, 0.0, 1.0);
  try {
    fit_least_squares(X, y);
    FAIL() << "expected SingularFitError";
  } catch (const SingularFitError& e) {
    EXPECT_FALSE(e.collinear_columns().empty());
    for (auto c : e.collinear_columns()) EXPECT_LT(c, 3u);
  }
}

TEST(LeastSquares, MinimumNormFlagsDeficientDesign) {
  Eigen::MatrixXd X(4, 6);
  X.setRandom();
  const Eigen::VectorXd y = Eigen::VectorXd::LinSpaced(4, 0.0, 1.0);
  const auto fit = fit_least_squares(X, y, 0.0, RankPolicy::kMinimumNorm);
  EXPECT_TRUE(fit.rank_deficient);
  EXPECT_NEAR(fit.rss, 0.0, 1e-12);
}

TEST(LeastSquares, ZeroColumnDesignIsTheMeanModel) {
  const Eigen::MatrixXd X(5, 0);
  Eigen::VectorXd y(5);
  y << 1, 2, 3, 4, 5;
  const auto fit = fit_least_squares(X, y);
  EXPECT_DOUBLE_EQ(fit.intercept, 3.0);
  EXPECT_EQ(fit.coef.size(), 0);
  EXPECT_DOUBLE_EQ(fit.r_squared(), 0.0);
}

TEST(LeastSquares, ConstantResponseReportsZeroRSquared) {
  Eigen::MatrixXd X(5, 1);
  X << 0, 1, 2, 3, 4;
  const Eigen::VectorXd y = Eigen::VectorXd::Constant(5, 0.7);
  EXPECT_DOUBLE_EQ(fit_least_squares(X, y).r_squared(), 0.0);
}

}  // namespace
}  // namespace lamp
