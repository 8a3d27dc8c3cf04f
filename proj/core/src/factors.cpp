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

#include "lamp/factors.hpp"

#include <unordered_map>
#include <unordered_set>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "lamp/error.hpp"
#include "lamp/text.hpp"

namespace lamp {

void FactorSet::validate() const {
  if (factors.empty()) throw ParameterError("factor set is empty");
  std::unordered_set<std::string> seen;
  for (const auto& f : factors) {
    const auto key = normalize_factor(f);
    if (key.empty()) throw ParameterError("factor text is empty");
    if (!seen.insert(key).second) {
      throw ParameterError(fmt::format("duplicate factor '{}'", f));
    }
  }
}

std::vector<std::string> dedup_factors(std::span<const std::string> factors) {
  std::vector<std::string> out;
  std::unordered_set<std::string> seen;
  for (const auto& f : factors) {
    const auto key = normalize_factor(f);
    if (key.empty()) continue;
    if (seen.insert(key).second) out.push_back(f);
  }
  return out;
}

FactorPool elicit_factor_pool(Gateway& gateway, const std::string& text, std::size_t repeats) {
  if (repeats == 0) throw ParameterError("explain repeats must be >= 1");
  const auto answers = gateway.batch_explain(text, repeats);
  FactorPool pool;
  std::vector<std::string> raw;
  for (const auto& a : answers) {
    if (!a.ok()) {
      ++pool.failed_queries;
      continue;
    }
    for (const auto& [f, w] : a.value->factors) raw.push_back(f);
  }
  if (pool.failed_queries == repeats) {
    throw EndpointError(fmt::format("factor elicitation failed: all {} explain queries failed",
                                    repeats));
  }
  pool.pool_size = raw.size();
  pool.factors = dedup_factors(raw);
  return pool;
}

FactorSet meta_aggregate(Gateway& gateway, const std::string& text, const FactorPool& pool,
                         std::size_t n_target, std::vector<std::string>* warnings) {
  if (pool.factors.empty()) throw ParameterError("cannot aggregate an empty factor pool");
  if (n_target == 0) throw ParameterError("aggregation target must be >= 1");

  auto answer = dedup_factors(gateway.aggregate(text, pool.factors, n_target));
  if (answer.size() > n_target) answer.resize(n_target);
  if (answer.size() < n_target && warnings) {
    warnings->push_back(fmt::format("aggregation returned {} factors, fewer than the target {}",
                                    answer.size(), n_target));
  }
  FactorSet set;
  set.factors = std::move(answer);
  set.source = FactorSource::kAggregated;
  set.pool_size = pool.pool_size;
  set.validate();
  return set;
}

WeightVector align_weights(const FactorSet& factors, const ExplainResponse& answer) {
  std::unordered_map<std::string, double> by_name;
  for (const auto& [f, w] : answer.factors) by_name.emplace(normalize_factor(f), w);
  WeightVector w;
  std::vector<std::string> missing;
  for (const auto& f : factors.factors) {
    const auto it = by_name.find(normalize_factor(f));
    if (it == by_name.end()) {
      missing.push_back(f);
    } else {
      w.values.push_back(it->second);
    }
  }
  if (!missing.empty()) {
    auto message =
        fmt::format("model answer does not report weights for: {}", fmt::join(missing, ", "));
    throw AlignmentError(message, std::move(missing));
  }
  return w;
}

SeedObservation seed_weights(Gateway& gateway, const std::string& text, const FactorSet& factors,
                             std::size_t sample_index) {
  factors.validate();
  // Alignment failures are retried like parse failures: the model is asked
  // again with the same fixed list.
  const int attempts = gateway.config().max_retries + 1;
  for (int attempt = 0;; ++attempt) {
    const auto answer = gateway.explain_fixed(text, factors.factors, sample_index);
    try {
      return {align_weights(factors, answer), answer.probability};
    } catch (const AlignmentError&) {
      if (attempt + 1 >= attempts) throw;
    }
  }
}

}  // namespace lamp
