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

#include "lamp/mock.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <thread>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "lamp/error.hpp"
#include "lamp/text.hpp"

namespace lamp {

using nlohmann::json;

std::string_view family_name(SurfaceFamily f) {
  switch (f) {
    case SurfaceFamily::kLinear:
      return "linear";
    case SurfaceFamily::kQuadratic:
      return "quadratic";
    case SurfaceFamily::kSigmoid:
      return "sigmoid";
  }
  return "unknown";
}

SurfaceFamily family_from_name(std::string_view name) {
  if (name == "linear") return SurfaceFamily::kLinear;
  if (name == "quadratic") return SurfaceFamily::kQuadratic;
  if (name == "sigmoid") return SurfaceFamily::kSigmoid;
  throw ParameterError(fmt::format("unknown surface family '{}'", name));
}

double MockSurface::mean(const WeightVector& w) const {
  const std::size_t d = dim();
  if (w.dim() != d) {
    throw ParameterError(fmt::format("surface has dimension {}, weights have {}", d, w.dim()));
  }
  switch (family) {
    case SurfaceFamily::kLinear: {
      double z = b;
      for (std::size_t i = 0; i < d; ++i) z += a[i] * w.values[i];
      return z;
    }
    case SurfaceFamily::kSigmoid: {
      double z = b;
      for (std::size_t i = 0; i < d; ++i) z += a[i] * w.values[i];
      return 1.0 / (1.0 + std::exp(-z));
    }
    case SurfaceFamily::kQuadratic: {
      if (hessian.size() != d * d) {
        throw ParameterError(fmt::format("quadratic surface needs a {}x{} Hessian", d, d));
      }
      std::vector<double> u(d);
      for (std::size_t i = 0; i < d; ++i) u[i] = w.values[i] - (center.empty() ? 0.0 : center[i]);
      double v = b;
      for (std::size_t i = 0; i < d; ++i) {
        v += a[i] * u[i];
        for (std::size_t j = 0; j < d; ++j) v += 0.5 * u[i] * hessian[i * d + j] * u[j];
      }
      return v;
    }
  }
  return 0.0;
}

std::vector<double> MockSurface::gradient_at(const WeightVector& w) const {
  const std::size_t d = dim();
  const double v = mean(w);
  std::vector<double> g(d);
  for (std::size_t i = 0; i < d; ++i) {
    switch (family) {
      case SurfaceFamily::kLinear:
        g[i] = a[i];
        break;
      case SurfaceFamily::kSigmoid:
        g[i] = v * (1.0 - v) * a[i];
        break;
      case SurfaceFamily::kQuadratic: {
        g[i] = a[i];
        for (std::size_t j = 0; j < d; ++j) {
          g[i] += hessian[i * d + j] * (w.values[j] - (center.empty() ? 0.0 : center[j]));
        }
        break;
      }
    }
  }
  return g;
}

std::vector<double> MockSurface::hessian_at(const WeightVector& w) const {
  const std::size_t d = dim();
  const double v = mean(w);
  switch (family) {
    case SurfaceFamily::kLinear:
      return std::vector<double>(d * d, 0.0);
    case SurfaceFamily::kQuadratic:
      return hessian;
    case SurfaceFamily::kSigmoid: {
      const double c = v * (1.0 - v) * (1.0 - 2.0 * v);
      std::vector<double> h(d * d);
      for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t j = 0; j < d; ++j) h[i * d + j] = c * a[i] * a[j];
      }
      return h;
    }
  }
  return {};
}

double mock_predict(const MockSurface& surface, const WeightVector& w, std::size_t sample_index) {
  double v = surface.mean(w);
  if (surface.noise_sd > 0.0) {
    std::mt19937_64 rng(derive_seed(surface.seed, sample_index));
    std::normal_distribution<double> normal(0.0, 1.0);
    double z = normal(rng);
    while (std::abs(z) > 3.0) z = normal(rng);
    v += surface.noise_sd * z;
  }
  return std::clamp(v, 0.0, 1.0);
}

MockModelConfig MockModelConfig::sigmoid_default(std::size_t d, double noise_sd,
                                                 std::uint64_t seed) {
  MockModelConfig c;
  c.surface.family = SurfaceFamily::kSigmoid;
  c.surface.a.assign(d, 1.0);
  c.surface.b = -0.5 * static_cast<double>(d);
  c.surface.noise_sd = noise_sd;
  c.surface.seed = seed;
  for (std::size_t i = 0; i < d; ++i) c.factors.push_back(fmt::format("factor {}", i + 1));
  c.w0.assign(d, 0.5);
  return c;
}

MockModelConfig MockModelConfig::from_json(std::string_view json_text) {
  const auto j = json::parse(json_text, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw ParameterError("mock config is not a JSON object");
  MockModelConfig c;
  try {
    const auto& s = j.at("surface");
    c.surface.family = family_from_name(s.at("family").get<std::string>());
    c.surface.a = s.at("a").get<std::vector<double>>();
    c.surface.b = s.value("b", 0.0);
    c.surface.hessian = s.value("hessian", std::vector<double>{});
    c.surface.center = s.value("center", std::vector<double>{});
    c.surface.noise_sd = s.value("noise_sd", 0.0);
    c.surface.seed = s.value("seed", std::uint64_t{0});
    c.factors = j.at("factors").get<std::vector<std::string>>();
    c.w0 = j.at("w0").get<std::vector<double>>();
    c.explain_rounds = j.value("explain_rounds", std::vector<std::vector<std::string>>{});
    c.unknown_factor_weight = j.value("unknown_factor_weight", 0.1);
    c.fail_indices = j.value("fail_indices", std::set<std::size_t>{});
    c.malformed_first_attempt = j.value("malformed_first_attempt", std::set<std::size_t>{});
    c.omit_probability = j.value("omit_probability", false);
    c.wrap_in_prose = j.value("wrap_in_prose", false);
    c.permute_seed_factors = j.value("permute_seed_factors", false);
    if (j.contains("rename_factor")) {
      c.rename_factor = j.at("rename_factor").get<std::pair<std::string, std::string>>();
    }
    c.rewrite_noise_sd = j.value("rewrite_noise_sd", 0.0);
    c.token_effects = j.value("token_effects", std::map<std::string, double>{});
    c.token_base = j.value("token_base", 0.5);
    c.latency = std::chrono::milliseconds(j.value("latency_ms", 0));
  } catch (const json::exception& e) {
    throw ParameterError(fmt::format("invalid mock config: {}", e.what()));
  }
  if (c.factors.size() != c.surface.dim() || c.w0.size() != c.surface.dim()) {
    throw ParameterError(fmt::format("mock config: {} factors, {} weights, surface dimension {}",
                                     c.factors.size(), c.w0.size(), c.surface.dim()));
  }
  return c;
}

std::string MockModelConfig::to_json() const {
  json s = {{"family", family_name(surface.family)}, {"a", surface.a},
            {"b", surface.b},   {"noise_sd", surface.noise_sd},
            {"seed", surface.seed}};
  if (!surface.hessian.empty()) s["hessian"] = surface.hessian;
  if (!surface.center.empty()) s["center"] = surface.center;
  json j = {{"surface", s}, {"factors", factors}, {"w0", w0}};
  if (!explain_rounds.empty()) j["explain_rounds"] = explain_rounds;
  if (!token_effects.empty()) {
    j["token_effects"] = token_effects;
    j["token_base"] = token_base;
  }
  if (rewrite_noise_sd > 0.0) j["rewrite_noise_sd"] = rewrite_noise_sd;
  return j.dump(2);
}

MockModel::MockModel(MockModelConfig config) : config_(std::move(config)) {
  const std::size_t d = config_.surface.dim();
  if (d == 0) throw ParameterError("mock surface needs at least one dimension");
  if (config_.factors.size() != d || config_.w0.size() != d) {
    throw ParameterError("mock factors and seed weights must match the surface dimension");
  }
}

namespace {

constexpr std::string_view kMarkerOpen = " [[mock-rewrite:";
constexpr std::string_view kMarkerClose = "]]";

std::string_view between(std::string_view s, std::string_view open, std::string_view close) {
  const auto b = s.find(open);
  if (b == std::string_view::npos) return {};
  const auto start = b + open.size();
  const auto e = s.find(close, start);
  if (e == std::string_view::npos) return {};
  return s.substr(start, e - start);
}

// Drops a leading "<Label>: " prefix.
std::string_view strip_label(std::string_view s) {
  const auto c = s.find(": ");
  return c == std::string_view::npos ? s : s.substr(c + 2);
}

std::string_view question_text(std::string_view user) {
  return strip_label(between(user, "<Begin Question>\n", "\n<End Question>"));
}

std::pair<std::string, std::optional<std::vector<double>>> split_marker(std::string_view text) {
  const auto m = text.find(kMarkerOpen);
  if (m == std::string_view::npos) return {std::string(text), std::nullopt};
  const auto body = between(text.substr(m), kMarkerOpen, kMarkerClose);
  std::vector<double> deltas;
  std::size_t i = 0;
  while (i <= body.size()) {
    auto comma = body.find(',', i);
    if (comma == std::string_view::npos) comma = body.size();
    const std::string item(body.substr(i, comma - i));
    if (!item.empty()) deltas.push_back(std::stod(item));
    i = comma + 1;
  }
  return {std::string(text.substr(0, m)), deltas};
}

}  // namespace

std::string MockModel::rewrite_marker(const std::vector<double>& deltas) {
  std::string out(kMarkerOpen);
  for (std::size_t i = 0; i < deltas.size(); ++i) {
    if (i > 0) out += ',';
    out += fmt::format("{}", deltas[i]);
  }
  out += kMarkerClose;
  return out;
}

std::optional<std::size_t> MockModel::factor_index(std::string_view name) const {
  const auto key = normalize_factor(name);
  for (std::size_t i = 0; i < config_.factors.size(); ++i) {
    if (normalize_factor(config_.factors[i]) == key) return i;
  }
  return std::nullopt;
}

std::string MockModel::wrap(std::string body) const {
  if (!config_.wrap_in_prose) return body;
  return "Sure! Here is my answer:\n```json\n" + body + "\n```\nLet me know if you need more.";
}

std::string MockModel::complete(const ChatRequest& request) {
  calls_.fetch_add(1);
  if (config_.latency.count() > 0) std::this_thread::sleep_for(config_.latency);
  if (request.messages.size() < 2) throw EndpointError("mock expects a system and a user message");
  if (request.template_id == TemplateId::kRelabel &&
      config_.fail_indices.count(request.sample_index) > 0) {
    throw EndpointError(fmt::format("mock: injected failure for sample {}", request.sample_index));
  }
  if (request.attempt == 0 && config_.malformed_first_attempt.count(request.sample_index) > 0) {
    return "I believe the probability is fairly high, but I cannot format it right now.";
  }
  return answer(request);
}

std::string MockModel::answer(const ChatRequest& request) const {
  switch (request.template_id) {
    case TemplateId::kExplain:
      return explain_answer(request, false);
    case TemplateId::kExplainFixed:
      return explain_answer(request, true);
    case TemplateId::kAggregate:
      return aggregate_answer(request);
    case TemplateId::kRelabel:
      return relabel_answer(request);
    case TemplateId::kRewrite:
      return rewrite_answer(request);
  }
  return "{}";
}

std::string MockModel::explain_answer(const ChatRequest& request, bool fixed) const {
  const std::string_view user = request.messages[1].content;
  const auto [text, marker] = split_marker(strip_label(user));
  const std::size_t d = config_.surface.dim();

  // Weights the model "holds" for this text: w0, shifted by a rewrite marker.
  WeightVector held{config_.w0};
  if (marker) {
    for (std::size_t i = 0; i < std::min(d, marker->size()); ++i) {
      held.values[i] = std::max(0.0, config_.w0[i] * (1.0 + (*marker)[i]));
    }
  }

  double probability;
  if (!config_.token_effects.empty()) {
    double v = config_.token_base;
    for (const auto& tok : split_whitespace(text)) {
      const auto it = config_.token_effects.find(tok);
      if (it != config_.token_effects.end()) v += it->second;
    }
    MockSurface flat;
    flat.family = SurfaceFamily::kLinear;
    flat.a = {0.0};
    flat.b = v;
    flat.noise_sd = config_.surface.noise_sd;
    flat.seed = config_.surface.seed;
    probability = mock_predict(flat, WeightVector{{0.0}}, request.sample_index);
  } else {
    probability = mock_predict(config_.surface, held, request.sample_index);
  }

  std::vector<std::string> names;
  if (fixed) {
    const auto block = between(request.messages[0].content, "<Begin Factors>\n", "\n<End Factors>");
    std::size_t i = 0;
    while (i < block.size()) {
      auto nl = block.find('\n', i);
      if (nl == std::string_view::npos) nl = block.size();
      names.emplace_back(strip_label(block.substr(i, nl - i)));
      i = nl + 1;
    }
  } else if (config_.explain_rounds.empty()) {
    names = config_.factors;
  } else {
    names = config_.explain_rounds[request.sample_index % config_.explain_rounds.size()];
  }

  std::mt19937_64 rng(derive_seed(config_.surface.seed ^ 0x5eedULL, request.sample_index));
  std::normal_distribution<double> normal(0.0, 1.0);

  json factors = json::array();
  for (const auto& name : names) {
    double w = config_.unknown_factor_weight;
    std::string reported = name;
    if (const auto idx = factor_index(name)) {
      w = held.values[*idx];
      if (marker && config_.rewrite_noise_sd > 0.0) {
        w = std::max(0.0, w + config_.rewrite_noise_sd * normal(rng));
      }
      if (fixed && config_.rename_factor &&
          normalize_factor(config_.rename_factor->first) == normalize_factor(name)) {
        reported = config_.rename_factor->second;
      }
    }
    factors.push_back({{"factor", reported}, {"importance", w}});
  }
  if (fixed && config_.permute_seed_factors) {
    std::reverse(factors.begin(), factors.end());
  }
  return wrap(json{{"probability", probability}, {"factors", factors}}.dump());
}

std::string MockModel::aggregate_answer(const ChatRequest& request) const {
  const std::string_view system = request.messages[0].content;
  const auto n_text = between(system, "identify the top ", " themes");
  const std::size_t n_target = n_text.empty() ? 5 : std::stoul(std::string(n_text));
  const auto block = between(system, "<Begin Factors>\n", "\n<End Factors>");

  std::vector<std::string> chosen;
  std::vector<std::string> seen;
  std::size_t i = 0;
  while (i < block.size() && chosen.size() < n_target) {
    auto nl = block.find('\n', i);
    if (nl == std::string_view::npos) nl = block.size();
    const std::string name(strip_label(block.substr(i, nl - i)));
    const auto key = normalize_factor(name);
    if (std::find(seen.begin(), seen.end(), key) == seen.end()) {
      seen.push_back(key);
      chosen.push_back(name);
    }
    i = nl + 1;
  }
  return wrap(json{{"factors", chosen}}.dump());
}

std::string MockModel::relabel_answer(const ChatRequest& request) const {
  const std::string_view user = request.messages[1].content;
  const auto block = between(user, "<Begin Factors>\n", "\n<End Factors>");
  WeightVector w{config_.w0};
  std::size_t i = 0;
  while (i < block.size()) {
    auto nl = block.find('\n', i);
    if (nl == std::string_view::npos) nl = block.size();
    std::string_view line = block.substr(i, nl - i);
    i = nl + 1;
    if (!line.empty() && line.back() == ',') line.remove_suffix(1);
    const auto imp = line.rfind(", importance: ");
    if (line.substr(0, 8) != "factor: " || imp == std::string_view::npos) continue;
    const auto name = line.substr(8, imp - 8);
    const auto idx = factor_index(name);
    if (!idx) return wrap(json{{"error", fmt::format("unknown factor '{}'", name)}}.dump());
    w.values[*idx] = std::stod(std::string(line.substr(imp + 14)));
  }
  const double p = mock_predict(config_.surface, w, request.sample_index);
  json out = {{"classification", p >= 0.5 ? "positive" : "negative"}};
  if (!config_.omit_probability) out["probability"] = p;
  return wrap(out.dump());
}

std::string MockModel::rewrite_answer(const ChatRequest& request) const {
  const std::string_view system = request.messages[0].content;
  std::vector<double> deltas(config_.surface.dim(), 0.0);
  for (std::string_view header : {std::string_view("Increase emphasis"),
                                  std::string_view("Decrease emphasis")}) {
    const auto h = system.find(header);
    if (h == std::string_view::npos) continue;
    auto i = system.find('\n', h) + 1;
    while (i < system.size() && system[i] != '\n') {
      auto nl = system.find('\n', i);
      if (nl == std::string_view::npos) nl = system.size();
      const auto line = system.substr(i, nl - i);
      i = nl + 1;
      const auto c = line.rfind(": ");
      if (c == std::string_view::npos) continue;
      if (const auto idx = factor_index(line.substr(0, c))) {
        deltas[*idx] = std::stod(std::string(line.substr(c + 2)));
      }
    }
  }
  const auto [base, old_marker] = split_marker(question_text(request.messages[1].content));
  return wrap(json{{"rewritten_prompt", base + rewrite_marker(deltas)}}.dump());
}

}  // namespace lamp
