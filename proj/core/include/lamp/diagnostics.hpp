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

// Surrogate quality diagnostics: centered R^2, BIC, the Harvey-Collier
// linearity test, best-subset search and tail-surface profiling.

#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace lamp {

struct CenteredR2 {
  double value = 0.0;
  // False when y'y == 0; value is then reported as 0.
  bool defined = true;
};

// beta' X'X beta / y'y for column-centered X and centered y.
CenteredR2 r_squared_centered(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                              const Eigen::VectorXd& beta);

// Gaussian BIC: n ln(RSS / n) + k ln(n). Returns -infinity when RSS == 0.
double bic_from_rss(double rss, std::size_t n, std::size_t k);

// Fits y on X with an intercept and scores it with k parameters.
double bic(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, std::size_t k);

struct LinearityTestResult {
  double statistic = 0.0;  // t statistic of the recursive residual mean
  double p_value = 1.0;
  bool rejected = false;   // p_value < alpha
  double alpha = 0.05;
  std::size_t n_residuals = 0;

  bool operator==(const LinearityTestResult&) const = default;
};

// Harvey-Collier test on an intercept-plus-X regression, in row order.
// Observations 0..k-1 (k = cols + 1) seed the expanding-window recursion.
// Returns nullopt when the seeding window is singular. Requires
// n >= cols + 3.
std::optional<LinearityTestResult> harvey_collier(const Eigen::MatrixXd& X,
                                                  const Eigen::VectorXd& y,
                                                  double alpha = 0.05);

// Standardized recursive residuals for t = k..n-1, or nullopt when the
// seeding window is singular.
std::optional<Eigen::VectorXd> recursive_residuals(const Eigen::MatrixXd& X,
                                                   const Eigen::VectorXd& y);

enum class SubsetSearch { kAuto, kExhaustive, kGreedy };

struct SubsetResult {
  std::vector<std::size_t> columns;  // ascending
  double r_squared = 0.0;
  double adjusted_r_squared = 0.0;
  bool exhaustive = true;
};

// Largest number of candidate subsets searched exhaustively under kAuto.
inline constexpr double kExhaustiveSubsetLimit = 1e6;

// k columns of X maximizing R^2 (intercept always included). Ties go to the
// lexicographically smallest index set.
SubsetResult best_subset(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, std::size_t k,
                         SubsetSearch search = SubsetSearch::kAuto);

enum class ProbabilityBin { kLowTail = 0, kMiddle = 1, kHighTail = 2 };

// [0, 0.2) low tail, [0.2, 0.8] middle, (0.8, 1] high tail.
ProbabilityBin probability_bin(double p);

struct TailPoint {
  double seed_probability = 0.0;
  double beta_norm = 0.0;
  double r_squared = 0.0;
};

struct TailBin {
  double lower = 0.0;
  double upper = 0.0;
  std::size_t count = 0;
  // nullopt for an empty bin.
  std::optional<double> mean_beta_norm;
  std::optional<double> mean_r_squared;
};

struct TailProfile {
  std::array<TailBin, 3> bins;  // indexed by ProbabilityBin

  const TailBin& bin(ProbabilityBin b) const { return bins[static_cast<std::size_t>(b)]; }
};

TailProfile tail_profile(std::span<const TailPoint> points);

}  // namespace lamp
