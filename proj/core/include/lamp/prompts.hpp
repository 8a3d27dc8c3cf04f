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

// Prompt templates. A template file has a `[system]` section followed by a
// `[user]` section; `${name}` is a placeholder. Everything else, including
// bare braces, is literal text.

#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lamp/probe.hpp"

namespace lamp {

enum class TemplateId { kExplain, kExplainFixed, kAggregate, kRelabel, kRewrite };

inline constexpr std::array<TemplateId, 5> kAllTemplates = {
    TemplateId::kExplain, TemplateId::kExplainFixed, TemplateId::kAggregate,
    TemplateId::kRelabel, TemplateId::kRewrite};

// "explain", "explain_fixed", "aggregate", "relabel", "rewrite"; also the
// template file stem.
std::string_view template_name(TemplateId id);
TemplateId template_from_name(std::string_view name);

struct PromptTemplate {
  std::string system;
  std::string user;
};

struct RenderedPrompt {
  std::string system;
  std::string user;

  // SHA-256 over system, a NUL separator and user.
  std::string hash() const;
};

class TemplateSet {
 public:
  // The shipped templates compiled into the library.
  static TemplateSet builtin();
  // Reads <dir>/<template_name>.txt for every template; missing files fall
  // back to the builtin text.
  static TemplateSet load_directory(const std::filesystem::path& dir);
  static PromptTemplate parse(std::string_view text);

  const PromptTemplate& get(TemplateId id) const;
  void set(TemplateId id, PromptTemplate tpl);

 private:
  std::map<TemplateId, PromptTemplate> templates_;
};

// Wording that adapts the templates to a classification task.
struct TaskTemplate {
  std::string id;              // sentiment | harmfulness | hatefulness | custom
  std::string document;        // "movie review"
  std::string document_short;  // "review"
  std::string input_label;     // "Review"
  std::string outcome;         // "the review being positive"
  std::string attribute;       // "sentiment"
  std::string positive_label;  // "positive"
  std::string negative_label;  // "negative"

  // Throws ParameterError for an unknown preset id. "custom" has to be built
  // field by field.
  static TaskTemplate preset(std::string_view id);

  bool operator==(const TaskTemplate&) const = default;
};

// Single-pass `${name}` substitution. Unknown names throw ParameterError.
std::string render_template(std::string_view tpl, const std::map<std::string, std::string>& vars);

// Relabel prompts show weights to four decimals.
std::string format_weight(double w);

RenderedPrompt render_explain(const TemplateSet& set, const TaskTemplate& task,
                              std::string_view text);
RenderedPrompt render_explain_fixed(const TemplateSet& set, const TaskTemplate& task,
                                    std::string_view text, std::span<const std::string> factors);
RenderedPrompt render_aggregate(const TemplateSet& set, const TaskTemplate& task,
                                std::string_view text, std::span<const std::string> pool,
                                std::size_t n_target);
RenderedPrompt render_relabel(const TemplateSet& set, const TaskTemplate& task,
                              std::string_view text, std::span<const std::string> factors,
                              const WeightVector& weights);
// Positive deltas go under "Increase emphasis", negative under "Decrease
// emphasis", printed at full precision. Zero deltas are omitted.
RenderedPrompt render_rewrite(const TemplateSet& set, const TaskTemplate& task,
                              std::string_view text, std::span<const std::string> factors,
                              const WeightVector& weights, std::span<const double> deltas);

// Instruction appended after an unparseable answer.
std::string repair_instruction(std::string_view problem);

}  // namespace lamp
