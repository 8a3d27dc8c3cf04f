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

#include "lamp/gateway.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <thread>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "lamp/error.hpp"
#include "lamp/text.hpp"

namespace lamp {

using nlohmann::json;

void EndpointConfig::validate() const {
  if (max_retries < 0) throw ParameterError("max_retries must be >= 0");
  if (max_in_flight < 1) throw ParameterError("max_in_flight must be >= 1");
  if (kind == EndpointKind::kRemote && base_url.empty()) {
    throw ParameterError("remote endpoint needs a base URL (LAMP_BASE_URL)");
  }
  if (kind == EndpointKind::kRemote && model_name.empty()) {
    throw ParameterError("remote endpoint needs a model name (--model or LAMP_MODEL)");
  }
}

namespace {

json parse_object(std::string_view raw) {
  const auto obj = extract_json_object(raw);
  if (!obj) throw ParseError("no JSON object found in the answer", std::string(raw));
  auto j = json::parse(*obj, nullptr, false);
  if (j.is_discarded()) throw ParseError("answer contains malformed JSON", std::string(raw));
  return j;
}

double number_field(const json& j, const char* key, std::string_view raw) {
  if (!j.contains(key)) {
    throw ParseError(fmt::format("answer is missing the \"{}\" key", key), std::string(raw));
  }
  const auto& v = j.at(key);
  if (v.is_number()) return v.get<double>();
  if (v.is_string()) {
    try {
      std::size_t used = 0;
      const auto s = v.get<std::string>();
      const double d = std::stod(s, &used);
      if (used == s.size()) return d;
    } catch (const std::exception&) {
    }
  }
  throw ParseError(fmt::format("\"{}\" is not a number", key), std::string(raw));
}

double checked_probability(double p) {
  if (!std::isfinite(p) || p < 0.0 || p > 1.0) {
    throw ValidationError(fmt::format("probability {} outside [0, 1]", p));
  }
  return p;
}

}  // namespace

ExplainResponse parse_explain_response(std::string_view raw) {
  const json j = parse_object(raw);
  ExplainResponse r;
  r.probability = checked_probability(number_field(j, "probability", raw));
  if (!j.contains("factors") || !j.at("factors").is_array()) {
    throw ParseError("answer has no \"factors\" array", std::string(raw));
  }
  for (const auto& f : j.at("factors")) {
    if (!f.is_object() || !f.contains("factor") || !f.at("factor").is_string()) {
      throw ParseError("factor entry lacks a \"factor\" string", std::string(raw));
    }
    const double w = number_field(f, "importance", raw);
    if (!std::isfinite(w) || w < 0.0) {
      throw ValidationError(fmt::format("importance {} must be finite and >= 0", w));
    }
    const auto text = trim(f.at("factor").get<std::string>());
    if (text.empty()) throw ParseError("empty factor text", std::string(raw));
    r.factors.emplace_back(text, w);
  }
  if (r.factors.empty()) throw ParseError("answer lists no factors", std::string(raw));
  return r;
}

double parse_probability_response(std::string_view raw) {
  return checked_probability(number_field(parse_object(raw), "probability", raw));
}

std::vector<std::string> parse_factor_list_response(std::string_view raw) {
  const json j = parse_object(raw);
  if (!j.contains("factors") || !j.at("factors").is_array()) {
    throw ParseError("answer has no \"factors\" array", std::string(raw));
  }
  std::vector<std::string> out;
  for (const auto& f : j.at("factors")) {
    std::string text;
    if (f.is_string()) {
      text = f.get<std::string>();
    } else if (f.is_object() && f.contains("factor") && f.at("factor").is_string()) {
      text = f.at("factor").get<std::string>();
    } else {
      throw ParseError("factor list entry is neither a string nor a factor object",
                       std::string(raw));
    }
    text = trim(text);
    if (!text.empty()) out.push_back(std::move(text));
  }
  if (out.empty()) throw ParseError("answer lists no factors", std::string(raw));
  return out;
}

std::string parse_rewrite_response(std::string_view raw) {
  const json j = parse_object(raw);
  if (!j.contains("rewritten_prompt") || !j.at("rewritten_prompt").is_string()) {
    throw ParseError("answer lacks a \"rewritten_prompt\" string", std::string(raw));
  }
  auto text = j.at("rewritten_prompt").get<std::string>();
  if (trim(text).empty()) throw ParseError("rewritten prompt is empty", std::string(raw));
  return text;
}

Gateway::Gateway(EndpointConfig config, std::shared_ptr<ChatTransport> transport,
                 TaskTemplate task, TemplateSet templates)
    : config_(std::move(config)),
      transport_(std::move(transport)),
      task_(std::move(task)),
      templates_(std::move(templates)) {
  config_.validate();
  if (!transport_) throw ParameterError("gateway needs a transport");
}

template <typename Parsed, typename Parser>
Parsed Gateway::query(TemplateId id, const RenderedPrompt& prompt, double temperature,
                      std::size_t sample_index, Parser parse, TranscriptEntry& entry) {
  entry.template_id = std::string(template_name(id));
  entry.prompt_hash = prompt.hash();
  entry.sample_index = sample_index;
  if (embed_transcript_) entry.prompt = prompt.system + "\n\n" + prompt.user;

  ChatRequest req;
  req.model = config_.model_name;
  req.temperature = temperature;
  req.template_id = id;
  req.sample_index = sample_index;
  req.messages = {{"system", prompt.system}, {"user", prompt.user}};

  enum class Failure { kNone, kTransport, kParse, kValidation } last = Failure::kNone;
  std::string last_message;
  std::string last_raw;

  for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
    req.attempt = attempt;
    entry.retries = attempt;
    std::string raw;
    try {
      raw = transport_->complete(req);
    } catch (const EndpointError& e) {
      last = Failure::kTransport;
      last_message = e.what();
      continue;
    }
    if (embed_transcript_) entry.response = raw;
    try {
      Parsed parsed = parse(raw);
      entry.ok = true;
      return parsed;
    } catch (const ParseError& e) {
      last = Failure::kParse;
      last_message = e.what();
    } catch (const ValidationError& e) {
      last = Failure::kValidation;
      last_message = e.what();
    }
    last_raw = raw;
    req.messages.push_back({"assistant", raw});
    req.messages.push_back({"user", repair_instruction(last_message)});
  }

  entry.ok = false;
  const auto attempts = config_.max_retries + 1;
  switch (last) {
    case Failure::kTransport:
      throw EndpointError(fmt::format("{} request {} failed after {} attempt(s): {}",
                                      template_name(id), sample_index, attempts, last_message));
    case Failure::kValidation:
      throw ValidationError(fmt::format("{} request {}: {} (after {} attempt(s))",
                                        template_name(id), sample_index, last_message, attempts));
    default:
      throw ParseError(fmt::format("{} request {}: {} (after {} attempt(s))", template_name(id),
                                   sample_index, last_message, attempts),
                       last_raw);
  }
}

void Gateway::record(TranscriptEntry entry) {
  std::lock_guard lock(transcript_mutex_);
  transcript_.push_back(std::move(entry));
}

std::vector<TranscriptEntry> Gateway::transcript() const {
  std::lock_guard lock(transcript_mutex_);
  return transcript_;
}

void for_each_bounded(std::size_t n, int max_in_flight,
                      const std::function<void(std::size_t)>& job) {
  const auto threads =
      std::min<std::size_t>(n, static_cast<std::size_t>(std::max(max_in_flight, 1)));
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) job(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::jthread> pool;
  pool.reserve(threads);
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) job(i);
    });
  }
}

template <typename Parsed, typename Parser>
std::vector<BatchResult<Parsed>> Gateway::run_batch(TemplateId id,
                                                    std::vector<RenderedPrompt> prompts,
                                                    double temperature, std::size_t first_index,
                                                    Parser parse) {
  const std::size_t n = prompts.size();
  std::vector<BatchResult<Parsed>> items(n);
  std::vector<TranscriptEntry> entries(n);
  for_each_bounded(n, config_.max_in_flight, [&](std::size_t i) {
    items[i].sample_index = first_index + i;
    try {
      items[i].value =
          query<Parsed>(id, prompts[i], temperature, first_index + i, parse, entries[i]);
    } catch (const Error& e) {
      items[i].error = e.what();
    }
  });
  std::lock_guard lock(transcript_mutex_);
  for (auto& e : entries) transcript_.push_back(std::move(e));
  return items;
}

ExplainResponse Gateway::classify_explain(const std::string& text, std::size_t sample_index) {
  TranscriptEntry entry;
  try {
    auto r = query<ExplainResponse>(TemplateId::kExplain, render_explain(templates_, task_, text),
                                    config_.explain_temperature, sample_index,
                                    parse_explain_response, entry);
    record(std::move(entry));
    return r;
  } catch (...) {
    record(std::move(entry));
    throw;
  }
}

ExplainResponse Gateway::explain_fixed(const std::string& text,
                                       std::span<const std::string> factors,
                                       std::size_t sample_index) {
  TranscriptEntry entry;
  try {
    auto r = query<ExplainResponse>(
        TemplateId::kExplainFixed, render_explain_fixed(templates_, task_, text, factors),
        config_.relabel_temperature, sample_index, parse_explain_response, entry);
    record(std::move(entry));
    return r;
  } catch (...) {
    record(std::move(entry));
    throw;
  }
}

double Gateway::relabel(const std::string& text, std::span<const std::string> factors,
                        const WeightVector& weights, std::size_t sample_index) {
  TranscriptEntry entry;
  try {
    const double p = query<double>(TemplateId::kRelabel,
                                   render_relabel(templates_, task_, text, factors, weights),
                                   config_.relabel_temperature, sample_index,
                                   parse_probability_response, entry);
    record(std::move(entry));
    return p;
  } catch (...) {
    record(std::move(entry));
    throw;
  }
}

std::vector<BatchItem> Gateway::batch_relabel(const std::string& text,
                                              std::span<const std::string> factors,
                                              std::span<const WeightVector> weight_list,
                                              std::size_t first_index) {
  if (weight_list.empty()) throw ParameterError("batch needs at least one weight vector");
  // Render up front so malformed inputs fail before any request is sent.
  std::vector<RenderedPrompt> prompts;
  prompts.reserve(weight_list.size());
  for (const auto& w : weight_list) {
    prompts.push_back(render_relabel(templates_, task_, text, factors, w));
  }
  auto items = run_batch<double>(TemplateId::kRelabel, std::move(prompts),
                                 config_.relabel_temperature, first_index,
                                 parse_probability_response);
  const bool any_ok =
      std::any_of(items.begin(), items.end(), [](const BatchItem& b) { return b.ok(); });
  if (!any_ok) {
    throw EndpointError(fmt::format("all {} relabel requests failed; first error: {}",
                                    items.size(), items.front().error));
  }
  return items;
}

std::vector<BatchResult<ExplainResponse>> Gateway::batch_explain(const std::string& text,
                                                                 std::size_t count) {
  if (count == 0) throw ParameterError("explain batch needs a positive count");
  std::vector<RenderedPrompt> prompts(count, render_explain(templates_, task_, text));
  return run_batch<ExplainResponse>(TemplateId::kExplain, std::move(prompts),
                                    config_.explain_temperature, 0, parse_explain_response);
}

std::vector<BatchResult<ExplainResponse>> Gateway::batch_explain_texts(
    std::span<const std::string> texts, std::size_t first_index) {
  std::vector<RenderedPrompt> prompts;
  prompts.reserve(texts.size());
  for (const auto& t : texts) prompts.push_back(render_explain(templates_, task_, t));
  return run_batch<ExplainResponse>(TemplateId::kExplain, std::move(prompts),
                                    config_.relabel_temperature, first_index,
                                    parse_explain_response);
}

std::vector<BatchResult<ExplainResponse>> Gateway::batch_explain_fixed(
    std::span<const std::string> texts, std::span<const std::string> factors,
    std::size_t first_index) {
  std::vector<RenderedPrompt> prompts;
  prompts.reserve(texts.size());
  for (const auto& t : texts) {
    prompts.push_back(render_explain_fixed(templates_, task_, t, factors));
  }
  return run_batch<ExplainResponse>(TemplateId::kExplainFixed, std::move(prompts),
                                    config_.relabel_temperature, first_index,
                                    parse_explain_response);
}

std::vector<BatchResult<std::string>> Gateway::batch_rewrite(
    const std::string& text, std::span<const std::string> factors, const WeightVector& weights,
    std::span<const std::vector<double>> deltas, std::size_t first_index) {
  std::vector<RenderedPrompt> prompts;
  prompts.reserve(deltas.size());
  for (const auto& d : deltas) {
    prompts.push_back(render_rewrite(templates_, task_, text, factors, weights, d));
  }
  return run_batch<std::string>(TemplateId::kRewrite, std::move(prompts),
                                config_.explain_temperature, first_index,
                                parse_rewrite_response);
}

std::vector<std::string> Gateway::aggregate(const std::string& text,
                                            std::span<const std::string> pool,
                                            std::size_t n_target) {
  TranscriptEntry entry;
  try {
    auto r = query<std::vector<std::string>>(
        TemplateId::kAggregate, render_aggregate(templates_, task_, text, pool, n_target),
        config_.relabel_temperature, 0, parse_factor_list_response, entry);
    record(std::move(entry));
    return r;
  } catch (...) {
    record(std::move(entry));
    throw;
  }
}

std::string Gateway::rewrite(const std::string& text, std::span<const std::string> factors,
                             const WeightVector& weights, std::span<const double> deltas,
                             std::size_t sample_index) {
  TranscriptEntry entry;
  try {
    auto r = query<std::string>(TemplateId::kRewrite,
                                render_rewrite(templates_, task_, text, factors, weights, deltas),
                                config_.explain_temperature, sample_index,
                                parse_rewrite_response, entry);
    record(std::move(entry));
    return r;
  } catch (...) {
    record(std::move(entry));
    throw;
  }
}

}  // namespace lamp
