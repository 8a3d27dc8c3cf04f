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

// Local curvature of the decision surface and the perturbation radius that
// balances curvature bias against sampling variance.
//
// A second-order regression in the displacement u = w - w0,
//
//   y = c + g'u + (1/2) u'Hu + noise,
//
// estimates the gradient g and the Hessian H. The bias/variance trade-off of
// the linear surrogate under U(-delta, delta) jitter is
//
//   MSE(delta) = ||H||_F^2 delta^4 / 36 + sigma^2 / (n delta^d),
//
// minimized at delta* = (9 d sigma^2 / (n ||H||_F^2))^(1 / (4 + d)).

#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "lamp/probe.hpp"

namespace lamp {

struct CurvatureEstimate {
  std::size_t dim = 0;
  double intercept = 0.0;
  std::vector<double> gradient;
  // Upper triangle of the symmetric Hessian, row-major: (0,0), (0,1), ...,
  // (0,d-1), (1,1), ... Only one triangle is stored so H_ab == H_ba exactly.
  std::vector<double> hessian_upper;
  double hessian_frobenius = 0.0;
  double residual_variance = 0.0;
  std::size_t n_samples = 0;

  double hessian(std::size_t a, std::size_t b) const;
  Eigen::MatrixXd hessian_matrix() const;
  // The matrix Q of the fitted quadratic form u'Qu, i.e. H / 2.
  Eigen::MatrixXd quadratic_form() const;

  bool operator==(const CurvatureEstimate&) const = default;
};

// Smallest sample count accepted by fit_quadratic for dimension d: one more
// than the number of regression parameters 1 + d + d(d+1)/2.
std::size_t min_quadratic_samples(std::size_t d);

// Second-order least-squares fit in the displacement from `center`.
// Residual variance uses the n - p denominator, p the parameter count.
CurvatureEstimate fit_quadratic(std::span<const ProbeSample> samples, const WeightVector& center);

double mse_curve(double delta, double hessian_frobenius, double sigma2, std::size_t n,
                 std::size_t d);

enum class RadiusStatus {
  kFinite,
  kFlatSurface,  // ||H||_F == 0: MSE decreases without bound in delta
  kNoiseless,    // sigma^2 == 0: the minimizer collapses to zero
};

struct OptimalRadius {
  RadiusStatus status = RadiusStatus::kFinite;
  double value = 0.0;  // meaningful only for kFinite (0 for kNoiseless)

  bool finite() const noexcept { return status == RadiusStatus::kFinite; }
  bool operator==(const OptimalRadius&) const = default;
};

OptimalRadius optimal_radius(std::size_t d, std::size_t n, double sigma2,
                             double hessian_frobenius);

enum class TruncationNorm { kSup, kEuclidean };

struct TruncationReport {
  std::size_t kept = 0;
  std::size_t discarded = 0;
  double inflation_factor = 1.0;  // n / (n - k)
  double delta_star = 0.0;
  double delta_used = 0.0;
  TruncationNorm norm = TruncationNorm::kSup;

  bool operator==(const TruncationReport&) const = default;
};

struct TruncationResult {
  std::vector<ProbeSample> samples;
  TruncationReport report;
};

// Keeps the seed sample and every sample whose jitter norm is <= delta_star.
// Throws InsufficientDataError when fewer than d + 2 samples survive.
TruncationResult truncate_samples(std::span<const ProbeSample> samples, double delta_star,
                                  TruncationNorm norm = TruncationNorm::kSup);

// Variance inflation from dropping k of n samples.
double inflation_factor(std::size_t n, std::size_t k);

}  // namespace lamp
