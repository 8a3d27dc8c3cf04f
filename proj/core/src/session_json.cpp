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


#include <cmath>
#include <limits>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "canonical_json.hpp"
#include "lamp/error.hpp"
#include "lamp/session.hpp"

namespace lamp {
namespace {

using nlohmann::json;

// ---- writing ---------------------------------------------------------------

json opt(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

json to_json(const WeightVector& w) { return w.values; }

json to_json(const SurrogateModel& s) {
  return {{"intercept", s.intercept},
          {"beta", s.beta},
          {"r_squared", s.r_squared},
          {"residual_variance", s.residual_variance},
          {"mean_response", s.mean_response},
          {"n_samples", s.n_samples},
          {"ridge_lambda", s.ridge_lambda},
          {"rank_deficient", s.rank_deficient}};
}

json to_json(const ProbeSample& s) {
  json j = {{"index", s.index},
            {"weights", to_json(s.weights)},
            {"probability", s.probability},
            {"jitter", nullptr}};
  if (s.jitter) j["jitter"] = {{"epsilon", s.jitter->epsilon}, {"scale", s.jitter->scale}};
  return j;
}

std::string_view norm_name(TruncationNorm n) {
  return n == TruncationNorm::kSup ? "sup" : "euclidean";
}

std::string_view radius_name(RadiusStatus s) {
  switch (s) {
    case RadiusStatus::kFinite:
      return "finite";
    case RadiusStatus::kFlatSurface:
      return "flat_surface";
    case RadiusStatus::kNoiseless:
      return "noiseless";
  }
  return "finite";
}

json to_json(const EndpointConfig& e) {
  return {{"kind", e.kind == EndpointKind::kRemote ? "remote" : "mock"},
          {"base_url", e.base_url},
          {"model_name", e.model_name},
          {"explain_temperature", e.explain_temperature},
          {"relabel_temperature", e.relabel_temperature},
          {"max_retries", e.max_retries},
          {"max_in_flight", e.max_in_flight}};
}

json to_json(const TaskTemplate& t) {
  return {{"id", t.id},
          {"document", t.document},
          {"document_short", t.document_short},
          {"input_label", t.input_label},
          {"outcome", t.outcome},
          {"attribute", t.attribute},
          {"positive_label", t.positive_label},
          {"negative_label", t.negative_label}};
}

json to_json(const ProbeParameters& p) {
  return {{"delta", p.delta},       {"m", p.m},
          {"lambda", p.lambda},     {"seed", p.seed},
          {"repeats", p.repeats},   {"n_target", p.n_target},
          {"norm", norm_name(p.norm)}};
}

json to_json(const FactorSet& f) {
  return {{"factors", f.factors},
          {"source", f.source == FactorSource::kAggregated ? "aggregated" : "raw"},
          {"pool_size", f.pool_size}};
}

json to_json(const CurvatureEstimate& c) {
  return {{"dim", c.dim},
          {"intercept", c.intercept},
          {"gradient", c.gradient},
          {"hessian_upper", c.hessian_upper},
          {"hessian_frobenius", c.hessian_frobenius},
          {"residual_variance", c.residual_variance},
          {"n_samples", c.n_samples}};
}

json to_json(const TruncationReport& t) {
  return {{"kept", t.kept},
          {"discarded", t.discarded},
          {"inflation_factor", t.inflation_factor},
          {"delta_star", t.delta_star},
          {"delta_used", t.delta_used},
          {"norm", norm_name(t.norm)}};
}

json to_json(const LinearityTestResult& r) {
  return {{"statistic", r.statistic},
          {"p_value", r.p_value},
          {"rejected", r.rejected},
          {"alpha", r.alpha},
          {"n_residuals", r.n_residuals}};
}

json to_json(const SessionDiagnostics& d) {
  return {{"bic", opt(d.bic)},
          {"linearity", d.linearity ? to_json(*d.linearity) : json(nullptr)},
          {"centered_r2", d.centered_r2},
          {"centered_r2_defined", d.centered_r2_defined}};
}

json to_json(const RewriteCase& c) {
  return {{"deltas", c.deltas},
          {"rewritten_text", c.rewritten_text},
          {"w_rewritten", to_json(c.w_rewritten)},
          {"p_model", c.p_model},
          {"p_surrogate", c.p_surrogate},
          {"sample_index", c.sample_index}};
}

json to_json(const EvalReport& r) {
  json methods = json::array();
  for (const auto& m : r.methods) {
    methods.push_back({{"method", m.method}, {"mean", m.mean}, {"sd", m.sd}, {"n", m.n}});
  }
  return {{"methods", methods},
          {"pearson_r", opt(r.pearson_r)},
          {"n_cases", r.n_cases},
          {"factor_distance_violations", r.factor_distance_violations},
          {"distance_bound", r.distance_bound},
          {"failed_cases", r.failed_cases}};
}

json to_json(const TranscriptEntry& t) {
  json j = {{"template_id", t.template_id},
            {"prompt_hash", t.prompt_hash},
            {"sample_index", t.sample_index},
            {"retries", t.retries},
            {"ok", t.ok}};
  if (t.prompt) j["prompt"] = *t.prompt;
  if (t.response) j["response"] = *t.response;
  return j;
}

template <typename T>
json opt_obj(const std::optional<T>& v) {
  return v ? to_json(*v) : json(nullptr);
}

template <typename T>
json list(const std::vector<T>& v) {
  json a = json::array();
  for (const auto& x : v) a.push_back(to_json(x));
  return a;
}

json to_json(const AuditSession& s) {
  json j;
  j["schema_version"] = s.schema_version;
  j["id"] = s.id;
  j["created_at"] = s.created_at;
  j["status"] = s.finalized() ? "final" : "draft";
  j["failed_stage"] = s.failed_stage;
  j["error"] = s.error;
  j["endpoint"] = to_json(s.endpoint);
  j["task"] = to_json(s.task);
  j["text"] = s.text;
  j["probe"] = to_json(s.probe);
  j["factors"] = opt_obj(s.factors);
  j["seed"] = s.seed ? json{{"w0", to_json(s.seed->w0)}, {"p0", s.seed->p0}} : json(nullptr);
  j["samples"] = list(s.samples);
  j["dropped_samples"] = s.dropped_samples;
  j["surrogate_full"] = opt_obj(s.surrogate_full);
  j["surrogate"] = opt_obj(s.surrogate);
  j["repeat_surrogates"] = list(s.repeat_surrogates);
  j["curvature"] = opt_obj(s.curvature);
  j["delta_star"] = s.delta_star ? json{{"status", radius_name(s.delta_star->status)},
                                        {"value", s.delta_star->value}}
                                 : json(nullptr);
  j["truncation"] = opt_obj(s.truncation);
  j["diagnostics"] = to_json(s.diagnostics);
  j["rewrites"] = list(s.rewrites);
  j["evaluation"] = opt_obj(s.evaluation);
  j["warnings"] = s.warnings;
  j["transcript"] = list(s.transcript);
  return j;
}

// ---- reading ---------------------------------------------------------------

std::string join_path(const std::string& path, std::string_view key) {
  return path.empty() ? std::string(key) : fmt::format("{}.{}", path, key);
}

std::string index_path(const std::string& path, std::size_t i) {
  return fmt::format("{}[{}]", path, i);
}

class Reader {
 public:
  Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw CorruptSessionError(path_.empty() ? "<root>" : path_, "not an object");
  }

  const std::string& path() const { return path_; }

  const json& raw(std::string_view key) const {
    const auto it = j_.find(std::string(key));
    if (it == j_.end()) throw CorruptSessionError(join_path(path_, key), "missing");
    return *it;
  }

  bool is_null(std::string_view key) const {
    const auto it = j_.find(std::string(key));
    return it == j_.end() || it->is_null();
  }

  Reader object(std::string_view key) const { return Reader(raw(key), join_path(path_, key)); }

  double number(std::string_view key) const {
    const auto& v = raw(key);
    if (!v.is_number()) throw CorruptSessionError(join_path(path_, key), "not a number");
    return v.get<double>();
  }

  double finite(std::string_view key) const {
    const double v = number(key);
    if (!std::isfinite(v)) throw CorruptSessionError(join_path(path_, key), "not finite");
    return v;
  }

  double probability(std::string_view key) const {
    const double v = number(key);
    if (!(v >= 0.0 && v <= 1.0)) {
      throw CorruptSessionError(join_path(path_, key),
                                fmt::format("probability {} outside [0, 1]", v));
    }
    return v;
  }

  std::optional<double> optional_number(std::string_view key) const {
    if (is_null(key)) return std::nullopt;
    return number(key);
  }

  std::uint64_t unsigned_int(std::string_view key) const {
    const auto& v = raw(key);
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0)) {
      throw CorruptSessionError(join_path(path_, key), "not a non-negative integer");
    }
    return v.get<std::uint64_t>();
  }

  std::size_t size(std::string_view key) const {
    return static_cast<std::size_t>(unsigned_int(key));
  }

  int integer(std::string_view key) const {
    const auto& v = raw(key);
    if (!v.is_number_integer()) throw CorruptSessionError(join_path(path_, key), "not an integer");
    return v.get<int>();
  }

  bool boolean(std::string_view key) const {
    const auto& v = raw(key);
    if (!v.is_boolean()) throw CorruptSessionError(join_path(path_, key), "not a boolean");
    return v.get<bool>();
  }

  std::string string(std::string_view key) const {
    const auto& v = raw(key);
    if (!v.is_string()) throw CorruptSessionError(join_path(path_, key), "not a string");
    return v.get<std::string>();
  }

  const json& array(std::string_view key) const {
    const auto& v = raw(key);
    if (!v.is_array()) throw CorruptSessionError(join_path(path_, key), "not an array");
    return v;
  }

  std::vector<double> numbers(std::string_view key) const {
    std::vector<double> out;
    const auto& a = array(key);
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (!a[i].is_number() || !std::isfinite(a[i].get<double>())) {
        throw CorruptSessionError(index_path(join_path(path_, key), i), "not a finite number");
      }
      out.push_back(a[i].get<double>());
    }
    return out;
  }

  std::vector<std::string> strings(std::string_view key) const {
    std::vector<std::string> out;
    const auto& a = array(key);
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (!a[i].is_string()) {
        throw CorruptSessionError(index_path(join_path(path_, key), i), "not a string");
      }
      out.push_back(a[i].get<std::string>());
    }
    return out;
  }

  std::vector<std::size_t> sizes(std::string_view key) const {
    std::vector<std::size_t> out;
    const auto& a = array(key);
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (!a[i].is_number_unsigned()) {
        throw CorruptSessionError(index_path(join_path(path_, key), i),
                                  "not a non-negative integer");
      }
      out.push_back(a[i].get<std::size_t>());
    }
    return out;
  }

  template <typename T, typename F>
  std::vector<T> objects(std::string_view key, F read) const {
    std::vector<T> out;
    const auto& a = array(key);
    for (std::size_t i = 0; i < a.size(); ++i) {
      out.push_back(read(Reader(a[i], index_path(join_path(path_, key), i))));
    }
    return out;
  }

  template <typename F>
  auto optional_object(std::string_view key, F read) const
      -> std::optional<decltype(read(std::declval<Reader>()))> {
    if (is_null(key)) return std::nullopt;
    return read(object(key));
  }

  [[noreturn]] void fail(std::string_view key, const std::string& what) const {
    throw CorruptSessionError(join_path(path_, key), what);
  }

 private:
  const json& j_;
  std::string path_;
};

TruncationNorm read_norm(const Reader& r, std::string_view key) {
  const auto s = r.string(key);
  if (s == "sup") return TruncationNorm::kSup;
  if (s == "euclidean") return TruncationNorm::kEuclidean;
  r.fail(key, fmt::format("unknown norm '{}'", s));
}

SurrogateModel read_surrogate(const Reader& r) {
  SurrogateModel s;
  s.intercept = r.finite("intercept");
  s.beta = r.numbers("beta");
  s.r_squared = r.finite("r_squared");
  s.residual_variance = r.finite("residual_variance");
  if (s.residual_variance < 0.0) r.fail("residual_variance", "negative");
  s.mean_response = r.probability("mean_response");
  s.n_samples = r.size("n_samples");
  s.ridge_lambda = r.finite("ridge_lambda");
  s.rank_deficient = r.boolean("rank_deficient");
  return s;
}

ProbeSample read_sample(const Reader& r) {
  ProbeSample s;
  s.index = r.size("index");
  s.weights.values = r.numbers("weights");
  s.probability = r.probability("probability");
  s.jitter = r.optional_object("jitter", [](const Reader& j) {
    JitterVector v;
    v.epsilon = j.numbers("epsilon");
    v.scale = j.finite("scale");
    return v;
  });
  return s;
}

EndpointConfig read_endpoint(const Reader& r) {
  EndpointConfig e;
  const auto kind = r.string("kind");
  if (kind == "remote") {
    e.kind = EndpointKind::kRemote;
  } else if (kind == "mock") {
    e.kind = EndpointKind::kMock;
  } else {
    r.fail("kind", fmt::format("unknown endpoint kind '{}'", kind));
  }
  e.base_url = r.string("base_url");
  e.model_name = r.string("model_name");
  e.explain_temperature = r.finite("explain_temperature");
  e.relabel_temperature = r.finite("relabel_temperature");
  e.max_retries = r.integer("max_retries");
  e.max_in_flight = r.integer("max_in_flight");
  return e;
}

TaskTemplate read_task(const Reader& r) {
  TaskTemplate t;
  t.id = r.string("id");
  t.document = r.string("document");
  t.document_short = r.string("document_short");
  t.input_label = r.string("input_label");
  t.outcome = r.string("outcome");
  t.attribute = r.string("attribute");
  t.positive_label = r.string("positive_label");
  t.negative_label = r.string("negative_label");
  return t;
}

ProbeParameters read_probe(const Reader& r) {
  ProbeParameters p;
  p.delta = r.finite("delta");
  p.m = r.size("m");
  p.lambda = r.finite("lambda");
  p.seed = r.unsigned_int("seed");
  p.repeats = r.size("repeats");
  p.n_target = r.size("n_target");
  p.norm = read_norm(r, "norm");
  return p;
}

FactorSet read_factors(const Reader& r) {
  FactorSet f;
  f.factors = r.strings("factors");
  const auto source = r.string("source");
  if (source == "aggregated") {
    f.source = FactorSource::kAggregated;
  } else if (source == "raw") {
    f.source = FactorSource::kRaw;
  } else {
    r.fail("source", fmt::format("unknown factor source '{}'", source));
  }
  f.pool_size = r.size("pool_size");
  try {
    f.validate();
  } catch (const ParameterError& e) {
    r.fail("factors", e.what());
  }
  return f;
}

CurvatureEstimate read_curvature(const Reader& r) {
  CurvatureEstimate c;
  c.dim = r.size("dim");
  c.intercept = r.finite("intercept");
  c.gradient = r.numbers("gradient");
  c.hessian_upper = r.numbers("hessian_upper");
  c.hessian_frobenius = r.finite("hessian_frobenius");
  c.residual_variance = r.finite("residual_variance");
  c.n_samples = r.size("n_samples");
  if (c.gradient.size() != c.dim) r.fail("gradient", "length differs from dim");
  if (c.hessian_upper.size() != c.dim * (c.dim + 1) / 2) {
    r.fail("hessian_upper", "length differs from dim (dim + 1) / 2");
  }
  return c;
}

OptimalRadius read_radius(const Reader& r) {
  OptimalRadius o;
  const auto s = r.string("status");
  if (s == "finite") {
    o.status = RadiusStatus::kFinite;
  } else if (s == "flat_surface") {
    o.status = RadiusStatus::kFlatSurface;
  } else if (s == "noiseless") {
    o.status = RadiusStatus::kNoiseless;
  } else {
    r.fail("status", fmt::format("unknown radius status '{}'", s));
  }
  o.value = r.finite("value");
  return o;
}

TruncationReport read_truncation(const Reader& r) {
  TruncationReport t;
  t.kept = r.size("kept");
  t.discarded = r.size("discarded");
  t.inflation_factor = r.finite("inflation_factor");
  t.delta_star = r.finite("delta_star");
  t.delta_used = r.finite("delta_used");
  t.norm = read_norm(r, "norm");
  return t;
}

LinearityTestResult read_linearity(const Reader& r) {
  LinearityTestResult l;
  l.statistic = r.finite("statistic");
  l.p_value = r.probability("p_value");
  l.rejected = r.boolean("rejected");
  l.alpha = r.probability("alpha");
  l.n_residuals = r.size("n_residuals");
  return l;
}

SessionDiagnostics read_diagnostics(const Reader& r) {
  SessionDiagnostics d;
  d.bic = r.optional_number("bic");
  d.linearity = r.optional_object("linearity", read_linearity);
  d.centered_r2 = r.finite("centered_r2");
  d.centered_r2_defined = r.boolean("centered_r2_defined");
  return d;
}

RewriteCase read_rewrite(const Reader& r) {
  RewriteCase c;
  c.deltas = r.numbers("deltas");
  c.rewritten_text = r.string("rewritten_text");
  c.w_rewritten.values = r.numbers("w_rewritten");
  c.p_model = r.probability("p_model");
  c.p_surrogate = r.probability("p_surrogate");
  c.sample_index = r.size("sample_index");
  return c;
}

EvalReport read_evaluation(const Reader& r) {
  EvalReport e;
  e.methods = r.objects<MethodScore>("methods", [](const Reader& m) {
    MethodScore s;
    s.method = m.string("method");
    s.mean = m.probability("mean");
    s.sd = m.finite("sd");
    s.n = m.size("n");
    return s;
  });
  e.pearson_r = r.optional_number("pearson_r");
  if (e.pearson_r && !(*e.pearson_r >= -1.0 && *e.pearson_r <= 1.0)) {
    r.fail("pearson_r", "outside [-1, 1]");
  }
  e.n_cases = r.size("n_cases");
  e.factor_distance_violations = r.size("factor_distance_violations");
  e.distance_bound = r.finite("distance_bound");
  e.failed_cases = r.size("failed_cases");
  return e;
}

TranscriptEntry read_transcript(const Reader& r) {
  TranscriptEntry t;
  t.template_id = r.string("template_id");
  t.prompt_hash = r.string("prompt_hash");
  t.sample_index = r.size("sample_index");
  t.retries = r.integer("retries");
  t.ok = r.boolean("ok");
  if (!r.is_null("prompt")) t.prompt = r.string("prompt");
  if (!r.is_null("response")) t.response = r.string("response");
  return t;
}

void check_dims(const Reader& root, const AuditSession& s) {
  if (!s.factors) {
    if (s.finalized()) root.fail("factors", "finalized session has no factor set");
    return;
  }
  const std::size_t d = s.factors->size();
  if (s.seed && s.seed->w0.dim() != d) root.fail("seed.w0", "length differs from factor count");
  for (std::size_t i = 0; i < s.samples.size(); ++i) {
    if (s.samples[i].weights.dim() != d) {
      root.fail(index_path("samples", i) + ".weights", "length differs from factor count");
    }
    if (s.samples[i].jitter && s.samples[i].jitter->epsilon.size() != d) {
      root.fail(index_path("samples", i) + ".jitter.epsilon", "length differs from factor count");
    }
  }
  auto check_model = [&](const std::optional<SurrogateModel>& m, std::string_view name) {
    if (m && m->dim() != d) root.fail(std::string(name) + ".beta", "length differs from factor count");
  };
  check_model(s.surrogate_full, "surrogate_full");
  check_model(s.surrogate, "surrogate");
  for (std::size_t i = 0; i < s.repeat_surrogates.size(); ++i) {
    if (s.repeat_surrogates[i].dim() != d) {
      root.fail(index_path("repeat_surrogates", i) + ".beta", "length differs from factor count");
    }
  }
  if (s.curvature && s.curvature->dim != d) root.fail("curvature.dim", "differs from factor count");
  for (std::size_t i = 0; i < s.rewrites.size(); ++i) {
    if (s.rewrites[i].deltas.size() != d) {
      root.fail(index_path("rewrites", i) + ".deltas", "length differs from factor count");
    }
    if (s.rewrites[i].w_rewritten.dim() != d) {
      root.fail(index_path("rewrites", i) + ".w_rewritten", "length differs from factor count");
    }
  }
  if (s.finalized()) {
    if (!s.seed) root.fail("seed", "finalized session has no seed observation");
    if (!s.surrogate) root.fail("surrogate", "finalized session has no surrogate");
  }
}

}  // namespace

std::string serialize_session(const AuditSession& session) {
  return detail::canonical_dump(to_json(session));
}

AuditSession parse_session(std::string_view json_text) {
  const json j = json::parse(json_text, nullptr, false);
  if (j.is_discarded()) throw CorruptSessionError("<root>", "not valid JSON");
  if (!j.is_object()) throw CorruptSessionError("<root>", "not an object");
  if (!j.contains("schema_version")) throw MigrationError("session has no schema_version");
  if (!j.at("schema_version").is_string() || j.at("schema_version").get<std::string>() != kSchemaVersion) {
    throw MigrationError(fmt::format("unsupported session schema_version {} (expected \"{}\")",
                                     j.at("schema_version").dump(), kSchemaVersion));
  }

  const Reader r(j, "");
  AuditSession s;
  s.schema_version = r.string("schema_version");
  s.id = r.string("id");
  if (!valid_session_id(s.id)) r.fail("id", "invalid identifier");
  s.created_at = r.string("created_at");
  const auto status = r.string("status");
  if (status == "final") {
    s.status = SessionStatus::kFinal;
  } else if (status == "draft") {
    s.status = SessionStatus::kDraft;
  } else {
    r.fail("status", fmt::format("unknown status '{}'", status));
  }
  s.failed_stage = r.string("failed_stage");
  s.error = r.string("error");
  s.endpoint = read_endpoint(r.object("endpoint"));
  s.task = read_task(r.object("task"));
  s.text = r.string("text");
  s.probe = read_probe(r.object("probe"));
  s.factors = r.optional_object("factors", read_factors);
  s.seed = r.optional_object("seed", [](const Reader& o) {
    SeedObservation obs;
    obs.w0.values = o.numbers("w0");
    obs.p0 = o.probability("p0");
    return obs;
  });
  s.samples = r.objects<ProbeSample>("samples", read_sample);
  s.dropped_samples = r.sizes("dropped_samples");
  s.surrogate_full = r.optional_object("surrogate_full", read_surrogate);
  s.surrogate = r.optional_object("surrogate", read_surrogate);
  s.repeat_surrogates = r.objects<SurrogateModel>("repeat_surrogates", read_surrogate);
  s.curvature = r.optional_object("curvature", read_curvature);
  s.delta_star = r.optional_object("delta_star", read_radius);
  s.truncation = r.optional_object("truncation", read_truncation);
  s.diagnostics = read_diagnostics(r.object("diagnostics"));
  s.rewrites = r.objects<RewriteCase>("rewrites", read_rewrite);
  for (auto& c : s.rewrites) c.original_text = s.text;
  s.evaluation = r.optional_object("evaluation", read_evaluation);
  s.warnings = r.strings("warnings");
  s.transcript = r.objects<TranscriptEntry>("transcript", read_transcript);
  check_dims(r, s);
  return s;
}

}  // namespace lamp
