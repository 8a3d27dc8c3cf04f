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

// The audited model behind a narrow interface: prompt rendering, strict JSON
// parsing with repair retries, and bounded-concurrency batches.

#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "lamp/probe.hpp"
#include "lamp/prompts.hpp"
#include "lamp/transport.hpp"

namespace lamp {

enum class EndpointKind { kRemote, kMock };

struct EndpointConfig {
  EndpointKind kind = EndpointKind::kMock;
  std::string base_url;
  std::string model_name = "mock";
  double explain_temperature = 0.7;
  double relabel_temperature = 0.0;
  int max_retries = 2;
  int max_in_flight = 8;

  void validate() const;
  bool operator==(const EndpointConfig&) const = default;
};

struct ExplainResponse {
  double probability = 0.0;
  std::vector<std::pair<std::string, double>> factors;  // (text, importance)
};

template <typename T>
struct BatchResult {
  std::size_t sample_index = 0;
  std::optional<T> value;  // empty on failure
  std::string error;

  bool ok() const noexcept { return value.has_value(); }
};

using BatchItem = BatchResult<double>;

// Runs job(i) for i in [0, n) on at most `max_in_flight` threads.
void for_each_bounded(std::size_t n, int max_in_flight,
                      const std::function<void(std::size_t)>& job);

struct TranscriptEntry {
  std::string template_id;
  std::string prompt_hash;
  std::size_t sample_index = 0;
  int retries = 0;
  bool ok = true;
  // Filled only when transcript embedding is enabled.
  std::optional<std::string> prompt;
  std::optional<std::string> response;

  bool operator==(const TranscriptEntry&) const = default;
};

// Parsers for the model's JSON answers. Each throws ParseError on malformed
// or incomplete JSON and ValidationError on out-of-domain values.
ExplainResponse parse_explain_response(std::string_view raw);
double parse_probability_response(std::string_view raw);
std::vector<std::string> parse_factor_list_response(std::string_view raw);
std::string parse_rewrite_response(std::string_view raw);

class Gateway {
 public:
  Gateway(EndpointConfig config, std::shared_ptr<ChatTransport> transport, TaskTemplate task,
          TemplateSet templates = TemplateSet::builtin());

  const EndpointConfig& config() const noexcept { return config_; }
  const TaskTemplate& task() const noexcept { return task_; }

  // Free explain: probability plus self-chosen factors and weights.
  ExplainResponse classify_explain(const std::string& text, std::size_t sample_index = 0);
  // Explain with the factor list fixed by the caller.
  ExplainResponse explain_fixed(const std::string& text, std::span<const std::string> factors,
                                std::size_t sample_index = 0);
  double relabel(const std::string& text, std::span<const std::string> factors,
                 const WeightVector& weights, std::size_t sample_index);
  // Results are in input order; item i carries sample index first_index + i.
  // Throws EndpointError only when every request fails.
  std::vector<BatchItem> batch_relabel(const std::string& text,
                                       std::span<const std::string> factors,
                                       std::span<const WeightVector> weight_list,
                                       std::size_t first_index = 1);
  // `count` free explain queries on the same text, sample indices
  // 0..count-1.
  std::vector<BatchResult<ExplainResponse>> batch_explain(const std::string& text,
                                                          std::size_t count);
  // One free explain query per text, sample indices first_index + i.
  std::vector<BatchResult<ExplainResponse>> batch_explain_texts(std::span<const std::string> texts,
                                                                std::size_t first_index);
  // Fixed-factor explain on each text.
  std::vector<BatchResult<ExplainResponse>> batch_explain_fixed(
      std::span<const std::string> texts, std::span<const std::string> factors,
      std::size_t first_index);
  // One rewrite per delta vector.
  std::vector<BatchResult<std::string>> batch_rewrite(
      const std::string& text, std::span<const std::string> factors, const WeightVector& weights,
      std::span<const std::vector<double>> deltas, std::size_t first_index);
  std::vector<std::string> aggregate(const std::string& text,
                                     std::span<const std::string> pool, std::size_t n_target);
  std::string rewrite(const std::string& text, std::span<const std::string> factors,
                      const WeightVector& weights, std::span<const double> deltas,
                      std::size_t sample_index);

  void set_embed_transcript(bool embed) { embed_transcript_ = embed; }
  std::vector<TranscriptEntry> transcript() const;

 private:
  template <typename Parsed, typename Parser>
  Parsed query(TemplateId id, const RenderedPrompt& prompt, double temperature,
               std::size_t sample_index, Parser parse, TranscriptEntry& entry);
  // Runs n queries on at most max_in_flight threads. Transcript entries are
  // appended in index order once all have finished.
  template <typename Parsed, typename Parser>
  std::vector<BatchResult<Parsed>> run_batch(TemplateId id, std::vector<RenderedPrompt> prompts,
                                             double temperature, std::size_t first_index,
                                             Parser parse);
  void record(TranscriptEntry entry);

  EndpointConfig config_;
  std::shared_ptr<ChatTransport> transport_;
  TaskTemplate task_;
  TemplateSet templates_;
  bool embed_transcript_ = false;

  mutable std::mutex transcript_mutex_;
  std::vector<TranscriptEntry> transcript_;
};

}  // namespace lamp
