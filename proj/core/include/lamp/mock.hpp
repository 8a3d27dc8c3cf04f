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

// A deterministic stand-in for the audited model. It reads the same rendered
// prompts a remote model would receive and answers from a synthetic decision
// surface with known gradient and Hessian.

#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "lamp/probe.hpp"
#include "lamp/transport.hpp"

namespace lamp {

enum class SurfaceFamily { kLinear, kQuadratic, kSigmoid };

std::string_view family_name(SurfaceFamily f);
SurfaceFamily family_from_name(std::string_view name);

// linear:    a'w + b
// quadratic: b + a'u + u'Hu / 2, u = w - center
// sigmoid:   1 / (1 + exp(-(a'w + b)))
// Noise is N(0, noise_sd^2) truncated at three standard deviations, keyed by
// (seed, sample_index); the result is clamped to [0, 1].
struct MockSurface {
  SurfaceFamily family = SurfaceFamily::kSigmoid;
  std::vector<double> a;
  double b = 0.0;
  std::vector<double> hessian;  // d*d row-major; quadratic family only
  std::vector<double> center;   // quadratic family only; empty means zero
  double noise_sd = 0.0;
  std::uint64_t seed = 0;

  std::size_t dim() const noexcept { return a.size(); }
  // Noise-free, unclamped value.
  double mean(const WeightVector& w) const;
  // Analytic derivatives of mean() at w. The Hessian is d*d row-major.
  std::vector<double> gradient_at(const WeightVector& w) const;
  std::vector<double> hessian_at(const WeightVector& w) const;

  bool operator==(const MockSurface&) const = default;
};

double mock_predict(const MockSurface& surface, const WeightVector& w, std::size_t sample_index);

struct MockModelConfig {
  MockSurface surface;
  std::vector<std::string> factors;  // canonical names, aligned with surface.a
  std::vector<double> w0;            // self-reported seed weights

  // Factor lists returned by successive free explain queries (cycled by
  // sample index). Empty means every query returns `factors`.
  std::vector<std::vector<std::string>> explain_rounds;
  double unknown_factor_weight = 0.1;

  // Relabel sample indices that fail at the transport on every attempt.
  std::set<std::size_t> fail_indices;
  // Sample indices whose first attempt returns unparseable prose.
  std::set<std::size_t> malformed_first_attempt;
  bool omit_probability = false;
  bool wrap_in_prose = false;
  bool permute_seed_factors = false;
  // (canonical name, replacement) applied to fixed-factor explain answers.
  std::optional<std::pair<std::string, std::string>> rename_factor;
  // Reporting noise on weights re-extracted from rewritten text.
  double rewrite_noise_sd = 0.0;

  // When non-empty, explain probabilities come from token presence instead
  // of the surface: clamp(token_base + sum of effects of present tokens).
  std::map<std::string, double> token_effects;
  double token_base = 0.5;

  std::chrono::milliseconds latency{0};

  // Sigmoid surface a = (1, ..., 1), b = -d/2 with w0 = 0.5 everywhere.
  static MockModelConfig sigmoid_default(std::size_t d = 5, double noise_sd = 0.0,
                                         std::uint64_t seed = 0);

  static MockModelConfig from_json(std::string_view json_text);
  std::string to_json() const;
};

class MockModel final : public ChatTransport {
 public:
  explicit MockModel(MockModelConfig config);

  std::string complete(const ChatRequest& request) override;

  const MockModelConfig& config() const noexcept { return config_; }
  std::size_t calls() const noexcept { return calls_.load(); }

  // The marker the mock rewriter appends to encode requested deltas.
  static std::string rewrite_marker(const std::vector<double>& deltas);

 private:
  std::string answer(const ChatRequest& request) const;
  std::string explain_answer(const ChatRequest& request, bool fixed) const;
  std::string aggregate_answer(const ChatRequest& request) const;
  std::string relabel_answer(const ChatRequest& request) const;
  std::string rewrite_answer(const ChatRequest& request) const;
  std::optional<std::size_t> factor_index(std::string_view name) const;
  std::string wrap(std::string json) const;

  MockModelConfig config_;
  std::atomic<std::size_t> calls_{0};
};

}  // namespace lamp
