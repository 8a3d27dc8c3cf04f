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

#include "lamp/prompts.hpp"

#include <fstream>
#include <sstream>
#include <utility>

#include <fmt/format.h>

#include "lamp/error.hpp"
#include "lamp/text.hpp"

namespace lamp {

namespace detail {
const std::vector<std::pair<std::string_view, std::string_view>>& builtin_template_text();
}  // namespace detail

std::string_view template_name(TemplateId id) {
  switch (id) {
    case TemplateId::kExplain:
      return "explain";
    case TemplateId::kExplainFixed:
      return "explain_fixed";
    case TemplateId::kAggregate:
      return "aggregate";
    case TemplateId::kRelabel:
      return "relabel";
    case TemplateId::kRewrite:
      return "rewrite";
  }
  return "unknown";
}

TemplateId template_from_name(std::string_view name) {
  for (TemplateId id : kAllTemplates) {
    if (template_name(id) == name) return id;
  }
  throw ParameterError(fmt::format("unknown template '{}'", name));
}

std::string RenderedPrompt::hash() const {
  std::string joined = system;
  joined.push_back('\0');
  joined += user;
  return sha256_hex(joined);
}

PromptTemplate TemplateSet::parse(std::string_view text) {
  constexpr std::string_view kSystem = "[system]\n";
  constexpr std::string_view kUser = "\n[user]\n";
  const auto s = text.find(kSystem);
  const auto u = text.find(kUser);
  if (s != 0 || u == std::string_view::npos) {
    throw ParameterError("template must start with [system] and contain a [user] section");
  }
  PromptTemplate tpl;
  tpl.system = std::string(text.substr(kSystem.size(), u - kSystem.size()));
  std::string_view user = text.substr(u + kUser.size());
  while (!user.empty() && user.back() == '\n') user.remove_suffix(1);
  tpl.user = std::string(user);
  return tpl;
}

TemplateSet TemplateSet::builtin() {
  TemplateSet set;
  for (const auto& [name, text] : detail::builtin_template_text()) {
    set.templates_[template_from_name(name)] = parse(text);
  }
  return set;
}

TemplateSet TemplateSet::load_directory(const std::filesystem::path& dir) {
  TemplateSet set = builtin();
  for (TemplateId id : kAllTemplates) {
    const auto path = dir / (std::string(template_name(id)) + ".txt");
    if (!std::filesystem::exists(path)) continue;
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError(fmt::format("cannot read template {}", path.string()));
    std::ostringstream ss;
    ss << in.rdbuf();
    set.templates_[id] = parse(ss.str());
  }
  return set;
}

const PromptTemplate& TemplateSet::get(TemplateId id) const {
  const auto it = templates_.find(id);
  if (it == templates_.end()) {
    throw ParameterError(fmt::format("template '{}' not loaded", template_name(id)));
  }
  return it->second;
}

void TemplateSet::set(TemplateId id, PromptTemplate tpl) { templates_[id] = std::move(tpl); }

TaskTemplate TaskTemplate::preset(std::string_view id) {
  if (id == "sentiment") {
    return {"sentiment", "movie review", "review", "Review", "the review being positive",
            "sentiment", "positive", "negative"};
  }
  if (id == "harmfulness") {
    return {"harmfulness", "prompt", "prompt", "Prompt", "the prompt being controversial",
            "harmfulness", "controversial", "harmless"};
  }
  if (id == "hatefulness") {
    return {"hatefulness", "text", "text", "Text", "the text being hateful",
            "hatefulness", "hateful", "non-hateful"};
  }
  throw ParameterError(fmt::format(
      "unknown task template '{}' (expected sentiment, harmfulness or hatefulness)", id));
}

std::string render_template(std::string_view tpl, const std::map<std::string, std::string>& vars) {
  std::string out;
  out.reserve(tpl.size() + 256);
  std::size_t i = 0;
  while (i < tpl.size()) {
    if (tpl[i] == '$' && i + 1 < tpl.size() && tpl[i + 1] == '{') {
      const auto close = tpl.find('}', i + 2);
      if (close == std::string_view::npos) {
        throw ParameterError("unterminated ${ placeholder in template");
      }
      const std::string name(tpl.substr(i + 2, close - i - 2));
      const auto it = vars.find(name);
      if (it == vars.end()) {
        throw ParameterError(fmt::format("template placeholder '${{{}}}' has no value", name));
      }
      out += it->second;
      i = close + 1;
    } else {
      out.push_back(tpl[i++]);
    }
  }
  return out;
}

std::string format_weight(double w) { return fmt::format("{:.4f}", w); }

namespace {

std::map<std::string, std::string> task_vars(const TaskTemplate& task, std::string_view text) {
  return {
      {"document", task.document},
      {"document_short", task.document_short},
      {"input_label", task.input_label},
      {"outcome", task.outcome},
      {"attribute", task.attribute},
      {"positive_label", task.positive_label},
      {"negative_label", task.negative_label},
      {"input", std::string(text)},
  };
}

RenderedPrompt render(const PromptTemplate& tpl, const std::map<std::string, std::string>& vars) {
  return {render_template(tpl.system, vars), render_template(tpl.user, vars)};
}

std::string numbered_factors(std::span<const std::string> factors) {
  std::string out;
  for (std::size_t i = 0; i < factors.size(); ++i) {
    if (i > 0) out += '\n';
    out += fmt::format("Factor {}: {}", i + 1, factors[i]);
  }
  return out;
}

std::string weighted_factor_lines(std::span<const std::string> factors, const WeightVector& w) {
  if (factors.size() != w.dim()) {
    throw ParameterError(fmt::format("{} factors but {} weights", factors.size(), w.dim()));
  }
  std::string out;
  for (std::size_t i = 0; i < factors.size(); ++i) {
    if (i > 0) out += ",\n";
    out += fmt::format("factor: {}, importance: {}", factors[i], format_weight(w.values[i]));
  }
  return out;
}

}  // namespace

RenderedPrompt render_explain(const TemplateSet& set, const TaskTemplate& task,
                              std::string_view text) {
  return render(set.get(TemplateId::kExplain), task_vars(task, text));
}

RenderedPrompt render_explain_fixed(const TemplateSet& set, const TaskTemplate& task,
                                    std::string_view text, std::span<const std::string> factors) {
  if (factors.empty()) throw ParameterError("fixed-factor explain needs at least one factor");
  auto vars = task_vars(task, text);
  vars["factor_list"] = numbered_factors(factors);
  std::string schema;
  for (std::size_t i = 0; i < factors.size(); ++i) {
    if (i > 0) schema += ",\n";
    schema += fmt::format("        {{\"factor\": \"{}\", \"importance\": <importance{}>}}",
                          factors[i], i + 1);
  }
  vars["factor_schema"] = schema;
  return render(set.get(TemplateId::kExplainFixed), vars);
}

RenderedPrompt render_aggregate(const TemplateSet& set, const TaskTemplate& task,
                                std::string_view text, std::span<const std::string> pool,
                                std::size_t n_target) {
  if (pool.empty()) throw ParameterError("aggregation needs a non-empty factor pool");
  if (n_target == 0) throw ParameterError("aggregation target must be positive");
  auto vars = task_vars(task, text);
  vars["n_target"] = std::to_string(n_target);
  vars["factor_list"] = numbered_factors(pool);
  std::string placeholders;
  for (std::size_t i = 0; i < n_target; ++i) {
    if (i > 0) placeholders += ", ";
    placeholders += fmt::format("factor{}", i + 1);
  }
  vars["factor_placeholders"] = placeholders;
  return render(set.get(TemplateId::kAggregate), vars);
}

RenderedPrompt render_relabel(const TemplateSet& set, const TaskTemplate& task,
                              std::string_view text, std::span<const std::string> factors,
                              const WeightVector& weights) {
  auto vars = task_vars(task, text);
  vars["weighted_factors"] = weighted_factor_lines(factors, weights);
  return render(set.get(TemplateId::kRelabel), vars);
}

RenderedPrompt render_rewrite(const TemplateSet& set, const TaskTemplate& task,
                              std::string_view text, std::span<const std::string> factors,
                              const WeightVector& weights, std::span<const double> deltas) {
  if (deltas.size() != factors.size()) {
    throw ParameterError(fmt::format("{} factors but {} deltas", factors.size(), deltas.size()));
  }
  std::string increase;
  std::string decrease;
  for (std::size_t i = 0; i < factors.size(); ++i) {
    if (deltas[i] > 0.0) {
      increase += fmt::format("{}: {}\n", factors[i], deltas[i]);
    } else if (deltas[i] < 0.0) {
      decrease += fmt::format("{}: {}\n", factors[i], deltas[i]);
    }
  }
  if (increase.empty() && decrease.empty()) {
    throw ParameterError("rewrite needs at least one nonzero delta");
  }
  std::string sections;
  if (!increase.empty()) {
    sections += "\nIncrease emphasis on the following terms by the following amount:\n" + increase;
  }
  if (!decrease.empty()) {
    sections += "\nDecrease emphasis on the following terms by the following amount:\n" + decrease;
  }
  auto vars = task_vars(task, text);
  vars["emphasis_sections"] = sections;
  vars["weighted_factors"] = weighted_factor_lines(factors, weights);
  return render(set.get(TemplateId::kRewrite), vars);
}

std::string repair_instruction(std::string_view problem) {
  return fmt::format(
      "Your previous answer could not be used: {}. Reply again with only the JSON object in "
      "the requested format and nothing else.",
      problem);
}

}  // namespace lamp
