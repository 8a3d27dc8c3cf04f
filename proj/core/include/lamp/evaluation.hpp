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

// Out-of-sample checks for a fitted surrogate: rewrite the input to encode
// perturbed weights, then score surrogate predictions against the model's own
// probabilities alongside naive and token-level baselines.

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lamp/factors.hpp"
#include "lamp/gateway.hpp"
#include "lamp/probe.hpp"

namespace lamp {

inline constexpr std::size_t kDefaultRewriteCount = 20;
inline constexpr double kMinDeletionProbability = 0.10;
inline constexpr double kMaxDeletionProbability = 0.30;

struct RewriteCase {
  std::string original_text;
  std::vector<double> deltas;  // relative emphasis change per factor
  std::string rewritten_text;
  WeightVector w_rewritten;    // re-extracted from the rewrite
  double p_model = 0.0;
  double p_surrogate = 0.0;
  std::size_t sample_index = 0;

  bool operator==(const RewriteCase&) const = default;
};

struct MethodScore {
  std::string method;
  double mean = 0.0;
  double sd = 0.0;  // sample standard deviation; 0 for a single case
  std::size_t n = 0;

  bool operator==(const MethodScore&) const = default;
};

inline constexpr std::string_view kSurrogateMethod = "surrogate";
inline constexpr std::string_view kMeanBaseline = "mean_baseline";
inline constexpr std::string_view kUniformBaseline = "uniform_baseline";
inline constexpr std::string_view kRandomBaseline = "random_baseline";
inline constexpr std::string_view kTokenSurrogate = "token_surrogate";

struct EvalReport {
  std::vector<MethodScore> methods;
  // Empty when fewer than two cases or either side has zero variance.
  std::optional<double> pearson_r;
  std::size_t n_cases = 0;
  std::size_t factor_distance_violations = 0;
  double distance_bound = 0.0;
  std::size_t failed_cases = 0;

  const MethodScore* find(std::string_view method) const;
  bool operator==(const EvalReport&) const = default;
};

// (p_model - p_surrogate)^2. Both arguments must lie in [0, 1].
double brier(double p_model, double p_surrogate);

// Product-moment correlation. Throws ParameterError on a length mismatch;
// empty for fewer than two points or a constant argument.
std::optional<double> pearson(std::span<const double> xs, std::span<const double> ys);

struct DistanceCheck {
  double distance = 0.0;
  double bound = 0.0;  // delta * sqrt(d)
  bool within = true;
};

DistanceCheck factor_distance_check(const WeightVector& w0, const WeightVector& w_rewritten,
                                    double delta);

struct TokenSurrogate {
  std::vector<std::string> tokens;  // whitespace-delimited, in text order
  SurrogateModel model;             // over binary presence columns
  std::vector<double> deletion_probabilities;
  std::size_t failed_queries = 0;

  bool operator==(const TokenSurrogate&) const = default;
};

// Presence column j is 1 when the text contains at least k occurrences of
// tokens[j], where tokens[j] is its k-th occurrence in the original.
std::vector<double> token_presence(std::span<const std::string> tokens, std::string_view text);
Prediction predict_tokens(const TokenSurrogate& surrogate, std::string_view text);

// m masked variants of `text`, each deleting every token independently with
// a per-variant probability drawn from U[0.10, 0.30]. Under-determined designs
// use the minimum-norm solution and set model.rank_deficient.
TokenSurrogate token_surrogate(Gateway& gateway, const std::string& text, std::size_t m,
                               std::uint64_t seed);

// Rewrite request for one case.
std::string rewrite_text(Gateway& gateway, const std::string& text, const FactorSet& factors,
                         const WeightVector& w0, std::span<const double> deltas,
                         std::size_t sample_index = kRewriteIndexBase);

struct RewriteBatch {
  std::vector<RewriteCase> cases;
  std::vector<std::string> failures;
};

// `count` rewrites with deltas drawn from U(-delta, delta); weights and
// probability of each rewrite come from a fixed-factor explain query.
RewriteBatch generate_rewrites(Gateway& gateway, const std::string& text,
                               const FactorSet& factors, const SeedObservation& seed_obs,
                               const SurrogateModel& surrogate, double delta, std::size_t count,
                               std::uint64_t seed);

// Scores the cases. `delta` sets the factor-distance bound; `seed` drives
// the random baseline.
EvalReport evaluate(const SurrogateModel& surrogate, std::span<const RewriteCase> cases,
                    const WeightVector& w0, double delta, std::uint64_t seed,
                    const TokenSurrogate* token = nullptr);

}  // namespace lamp
