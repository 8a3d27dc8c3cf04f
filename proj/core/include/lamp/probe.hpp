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

// Weight-space probing: multiplicative uniform jitter around the model's
// self-reported importance weights, and the local affine surrogate fitted to
// the probabilities the model reports at the jittered points.

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace lamp {

// Importance weights, one per factor. Entries are finite; they are not
// required to sum to one.
struct WeightVector {
  std::vector<double> values;

  std::size_t dim() const noexcept { return values.size(); }
  bool operator==(const WeightVector&) const = default;
};

// Relative noise drawn from U(-scale, scale) per coordinate.
struct JitterVector {
  std::vector<double> epsilon;
  double scale = 0.0;

  // max_i |epsilon_i|
  double sup_norm() const noexcept;
  double euclidean_norm() const noexcept;
  bool operator==(const JitterVector&) const = default;
};

// One row of the probe design. Index 0 is the unperturbed seed observation
// and carries no jitter.
struct ProbeSample {
  WeightVector weights;
  double probability = 0.0;
  std::optional<JitterVector> jitter;
  std::size_t index = 0;

  bool is_seed() const noexcept { return !jitter.has_value(); }
  bool operator==(const ProbeSample&) const = default;
};

struct SurrogateModel {
  double intercept = 0.0;
  std::vector<double> beta;
  double r_squared = 0.0;
  double residual_variance = 0.0;
  double mean_response = 0.0;  // mean observed probability of the fit
  std::size_t n_samples = 0;
  double ridge_lambda = 0.0;
  // Set only by minimum-norm fits of under-determined designs.
  bool rank_deficient = false;

  std::size_t dim() const noexcept { return beta.size(); }
  double beta_norm() const noexcept;
  // The least-squares fit restricted to an intercept: beta = 0 and the
  // intercept equal to the mean response.
  SurrogateModel intercept_only() const;
  bool operator==(const SurrogateModel&) const = default;
};

struct JitteredWeights {
  WeightVector weights;
  // True when some coordinate went negative and was clamped to zero. Only
  // possible when the jitter scale is at least one.
  bool clamped = false;
};

struct Prediction {
  double probability = 0.0;  // clamped to [0, 1]
  double raw = 0.0;          // intercept + beta . w
  bool clamped = false;
};

inline constexpr std::size_t kDefaultPerturbations = 50;

// Sample indices at or above this value belong to counterfactual rewrites.
inline constexpr std::size_t kRewriteIndexBase = 1'000'000;
// Token-deletion queries for the token surrogate.
inline constexpr std::size_t kTokenIndexBase = 2'000'000;

// m vectors of d independent U(-delta, delta) draws. Same seed, same output.
std::vector<JitterVector> sample_jitters(std::size_t d, double delta, std::size_t m,
                                         std::uint64_t seed);

// w * (1 + eps), elementwise, clamped at zero.
JitteredWeights apply_jitter(const WeightVector& w0, const JitterVector& eps);

// Least squares with an explicit intercept column. A positive lambda adds a
// ridge penalty on the slope coefficients only. Requires at least d + 2
// samples; throws SingularFitError on a rank-deficient design when
// lambda == 0.
SurrogateModel fit_surrogate(std::span<const ProbeSample> samples, double lambda = 0.0);

double predict_raw(const SurrogateModel& model, const WeightVector& w);
Prediction predict(const SurrogateModel& model, const WeightVector& w);

}  // namespace lamp
