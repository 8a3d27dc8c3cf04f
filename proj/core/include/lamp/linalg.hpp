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

#pragma once

#include <cstddef>

#include <Eigen/Dense>

namespace lamp {

enum class RankPolicy {
  kThrow,          // SingularFitError naming the collinear columns
  kMinimumNorm,    // minimum-norm solution, flagged as rank deficient
};

// Result of an intercept-plus-slopes least-squares fit.
struct LeastSquaresFit {
  double intercept = 0.0;
  Eigen::VectorXd coef;
  Eigen::VectorXd residuals;
  double rss = 0.0;
  double tss = 0.0;  // around the mean of y
  Eigen::Index rank = 0;
  bool rank_deficient = false;

  // 1 - RSS/TSS; zero when y is constant.
  double r_squared() const noexcept;
};

// Minimizes ||y - intercept - X b||^2 + lambda ||b||^2. The intercept is never
// penalized. Columns and response are centered internally, so the intercept
// is recovered as mean(y) - mean(X) b.
//
// With lambda == 0 and kThrow, a design whose centered columns are linearly
// dependent raises SingularFitError. A zero-column X is allowed and yields
// the mean model.
LeastSquaresFit fit_least_squares(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                  double lambda = 0.0,
                                  RankPolicy policy = RankPolicy::kThrow);

// Relative pivot threshold used for rank decisions.
inline constexpr double kRankTolerance = 1e-10;

}  // namespace lamp
