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
#include <span>
#include <string>
#include <vector>

#include "lamp/gateway.hpp"
#include "lamp/probe.hpp"

namespace lamp {

enum class FactorSource { kRaw, kAggregated };

struct FactorSet {
  std::vector<std::string> factors;
  FactorSource source = FactorSource::kRaw;
  std::size_t pool_size = 0;  // raw factors consumed, before dedup

  std::size_t size() const noexcept { return factors.size(); }
  // Non-empty texts, pairwise distinct after normalize_factor.
  void validate() const;
  bool operator==(const FactorSet&) const = default;
};

struct SeedObservation {
  WeightVector w0;
  double p0 = 0.0;

  bool operator==(const SeedObservation&) const = default;
};

struct FactorPool {
  std::vector<std::string> factors;  // deduplicated, first occurrence kept
  std::size_t pool_size = 0;         // before dedup
  std::size_t failed_queries = 0;
};

inline constexpr std::size_t kDefaultExplainRepeats = 10;
inline constexpr std::size_t kDefaultFactorTarget = 5;

// `repeats` free explain queries; factor lists concatenated in query order.
FactorPool elicit_factor_pool(Gateway& gateway, const std::string& text, std::size_t repeats);

// Drops entries whose normal form was already seen.
std::vector<std::string> dedup_factors(std::span<const std::string> factors);

// Consolidates the pool into at most n_target factors. A shorter answer is
// accepted and a warning appended to `warnings` (when given).
FactorSet meta_aggregate(Gateway& gateway, const std::string& text, const FactorPool& pool,
                         std::size_t n_target, std::vector<std::string>* warnings = nullptr);

// Reorders the answer's weights into `factors` order by normalized name.
// Throws AlignmentError listing requested factors missing from the answer.
WeightVector align_weights(const FactorSet& factors, const ExplainResponse& answer);

// Fixed-factor explain giving w0 and p0, aligned to `factors`.
SeedObservation seed_weights(Gateway& gateway, const std::string& text, const FactorSet& factors,
                             std::size_t sample_index = 0);

}  // namespace lamp
