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


#include "lamp/audit.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <numeric>

#include <Eigen/Dense>
#include <fmt/chrono.h>
#include <fmt/format.h>

#include "lamp/diagnostics.hpp"
#include "lamp/evaluation.hpp"
#include "lamp/factors.hpp"
#include "lamp/text.hpp"

namespace lamp {
namespace {

constexpr std::uint64_t kProbeStream = 0x70726f6265000000ULL;

std::string session_id_for(const AuditConfig& c, const std::string& text) {
  const auto key = fmt::format(
      "{}\n{}\n{}\n{}\n{}\n{}\n{}\n{}\n{}\n{}\n{}\n{}\n{}", c.task.id, c.endpoint.model_name,
      c.endpoint.base_url, c.delta, c.m, c.repeats, c.n_target, c.lambda, c.seed,
      static_cast<int>(c.norm), c.evaluate ? c.rewrite_count : 0, c.surrogate_repeats, text);
  return fmt::format("{}-{}", c.task.id, sha256_hex(key).substr(0, 16));
}

std::vector<ProbeSample> probe_round(Gateway& gw, const std::string& text, const FactorSet& factors,
                                     const SeedObservation& seed_obs, double delta, std::size_t m,
                                     std::uint64_t seed, std::size_t first_index,
                                     std::vector<std::size_t>& dropped) {
  const auto jitters = sample_jitters(factors.size(), delta, m, seed);
  std::vector<WeightVector> weights;
  weights.reserve(m);
  for (const auto& j : jitters) weights.push_back(apply_jitter(seed_obs.w0, j).weights);

  const auto items = gw.batch_relabel(text, factors.factors, weights, first_index);
  std::vector<ProbeSample> samples;
  samples.push_back({seed_obs.w0, seed_obs.p0, std::nullopt, 0});
  for (std::size_t i = 0; i < m; ++i) {
    if (!items[i].ok()) {
      dropped.push_back(items[i].sample_index);
      continue;
    }
    samples.push_back({weights[i], *items[i].value, jitters[i], items[i].sample_index});
  }
  return samples;
}

void run_diagnostics(AuditSession& s, const std::vector<ProbeSample>& samples, double alpha) {
  const auto n = static_cast<Eigen::Index>(samples.size());
  const auto d = static_cast<Eigen::Index>(s.factors->size());
  const auto& w0 = s.seed->w0.values;

  // Rows ordered by distance from the seed point for the recursive residuals.
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto dist = [&](std::size_t r) {
    double ss = 0.0;
    for (Eigen::Index j = 0; j < d; ++j) {
      const double u = samples[r].weights.values[j] - w0[j];
      ss += u * u;
    }
    return ss;
  };
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return dist(a) < dist(b); });

  Eigen::MatrixXd X(n, d);
  Eigen::VectorXd y(n);
  for (Eigen::Index r = 0; r < n; ++r) {
    const auto& smp = samples[order[r]];
    for (Eigen::Index j = 0; j < d; ++j) X(r, j) = smp.weights.values[j];
    y(r) = smp.probability;
  }

  const double b = bic(X, y, static_cast<std::size_t>(d) + 1);
  if (std::isfinite(b)) s.diagnostics.bic = b;

  Eigen::VectorXd beta = Eigen::Map<const Eigen::VectorXd>(s.surrogate->beta.data(), d);
  const Eigen::MatrixXd Xc = X.rowwise() - X.colwise().mean();
  const Eigen::VectorXd yc = y.array() - y.mean();
  const auto c = r_squared_centered(Xc, yc, beta);
  s.diagnostics.centered_r2 = c.value;
  s.diagnostics.centered_r2_defined = c.defined;

  if (samples.size() >= static_cast<std::size_t>(d) + 3) {
    s.diagnostics.linearity = harvey_collier(X, y, alpha);
    if (!s.diagnostics.linearity) {
      s.warnings.push_back("linearity test skipped: singular seeding window");
    }
  } else {
    s.warnings.push_back("linearity test skipped: too few samples");
  }
}

// Rewrites are drawn from the region the surrogate was fitted on.
double validity_radius(const AuditSession& s) {
  if (s.truncation && s.delta_star && s.delta_star->finite() && s.delta_star->value > 0.0) {
    return std::min(s.probe.delta, s.delta_star->value);
  }
  return s.probe.delta;
}

ErrorKind kind_of(const std::exception& e) {
  if (const auto* le = dynamic_cast<const Error*>(&e)) return le->kind();
  return ErrorKind::kIo;
}

}  // namespace

void AuditConfig::validate() const {
  endpoint.validate();
  if (!(delta > 0.0 && delta < 1.0)) {
    throw ParameterError(fmt::format("delta must lie in (0, 1), got {}", delta));
  }
  if (m < 1) throw ParameterError("m must be >= 1");
  if (repeats < 1) throw ParameterError("repeats must be >= 1");
  if (n_target < 1) throw ParameterError("n_target must be >= 1");
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ParameterError("lambda must be >= 0");
  if (!(alpha > 0.0 && alpha < 1.0)) throw ParameterError("alpha must lie in (0, 1)");
  if (surrogate_repeats < 1) throw ParameterError("surrogate_repeats must be >= 1");
  if (evaluate && rewrite_count < 1) throw ParameterError("rewrite_count must be >= 1");
  if (token_baseline && token_perturbations < 2) {
    throw ParameterError("token_perturbations must be >= 2");
  }
  if (session_id && !valid_session_id(*session_id)) {
    throw ParameterError(fmt::format("invalid session id '{}'", *session_id));
  }
}

std::string current_timestamp() {
  std::time_t t = 0;
  if (const char* env = std::getenv("SOURCE_DATE_EPOCH"); env && *env) {
    char* end = nullptr;
    const long long v = std::strtoll(env, &end, 10);
    if (end && *end == '\0' && v >= 0) {
      t = static_cast<std::time_t>(v);
    } else {
      throw ParameterError("SOURCE_DATE_EPOCH is not a non-negative integer");
    }
  } else {
    t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  }
  return fmt::format("{:%Y-%m-%dT%H:%M:%SZ}", fmt::gmtime(t));
}

AuditSession run_audit(const AuditConfig& config, const std::string& text,
                       std::shared_ptr<ChatTransport> transport, const AuditHooks& hooks) {
  config.validate();
  if (trim(text).empty()) throw ParameterError("input text is empty");

  AuditSession s;
  s.id = config.session_id.value_or(session_id_for(config, text));
  s.created_at = config.created_at.value_or(current_timestamp());
  s.endpoint = config.endpoint;
  s.task = config.task;
  s.text = text;
  s.probe = {config.delta, config.m,       config.lambda, config.seed,
             config.repeats, config.n_target, config.norm};

  Gateway gw(config.endpoint, std::move(transport), config.task);
  gw.set_embed_transcript(config.embed_transcript);

  std::string stage;
  auto enter = [&](std::string name) {
    stage = std::move(name);
    if (hooks.on_stage) hooks.on_stage(stage);
  };

  try {
    enter("elicit");
    const auto pool = elicit_factor_pool(gw, text, config.repeats);
    if (pool.failed_queries > 0) {
      s.warnings.push_back(fmt::format("{} of {} explain queries failed", pool.failed_queries,
                                       config.repeats));
    }

    enter("aggregate");
    s.factors = meta_aggregate(gw, text, pool, config.n_target, &s.warnings);
    const std::size_t d = s.factors->size();
    if (config.m < d + 2) {
      throw ParameterError(fmt::format("m = {} is too small for {} factors (need m >= {})",
                                       config.m, d, d + 2));
    }

    enter("seed");
    s.seed = seed_weights(gw, text, *s.factors, 0);

    enter("probe");
    s.samples = probe_round(gw, text, *s.factors, *s.seed, config.delta, config.m,
                            derive_seed(config.seed, kProbeStream), 1, s.dropped_samples);
    if (!s.dropped_samples.empty()) {
      s.warnings.push_back(fmt::format("{} relabel samples dropped after retries",
                                       s.dropped_samples.size()));
    }

    enter("fit");
    s.surrogate_full = fit_surrogate(s.samples, config.lambda);
    s.surrogate = s.surrogate_full;
    for (std::size_t r = 1; r < config.surrogate_repeats; ++r) {
      std::vector<std::size_t> dropped;
      const auto extra =
          probe_round(gw, text, *s.factors, *s.seed, config.delta, config.m,
                      derive_seed(config.seed, kProbeStream + r), 1 + r * config.m, dropped);
      s.repeat_surrogates.push_back(fit_surrogate(extra, config.lambda));
    }

    enter("curvature");
    std::vector<ProbeSample> final_samples = s.samples;
    if (s.samples.size() >= min_quadratic_samples(d)) {
      try {
        s.curvature = fit_quadratic(s.samples, s.seed->w0);
        s.delta_star = optimal_radius(d, s.samples.size(), s.curvature->residual_variance,
                                      s.curvature->hessian_frobenius);
      } catch (const SingularFitError& e) {
        s.warnings.push_back(fmt::format("curvature fit skipped: {}", e.what()));
      }
    } else {
      s.warnings.push_back(fmt::format("curvature fit skipped: {} samples, {} needed",
                                       s.samples.size(), min_quadratic_samples(d)));
    }

    enter("truncate");
    if (s.delta_star && s.delta_star->status != RadiusStatus::kFlatSurface) {
      try {
        auto t = truncate_samples(s.samples, s.delta_star->value, config.norm);
        if (t.report.discarded > 0) {
          s.surrogate = fit_surrogate(t.samples, config.lambda);
          final_samples = std::move(t.samples);
        }
        s.truncation = t.report;
      } catch (const InsufficientDataError& e) {
        s.warnings.push_back(fmt::format("truncation skipped: {}", e.what()));
      } catch (const SingularFitError& e) {
        s.warnings.push_back(fmt::format("truncation skipped: refit is singular: {}", e.what()));
      }
    }

    enter("diagnostics");
    run_diagnostics(s, final_samples, config.alpha);

    if (config.evaluate) {
      enter("evaluate");
      const double radius = validity_radius(s);
      auto batch = generate_rewrites(gw, text, *s.factors, *s.seed, *s.surrogate, radius,
                                     config.rewrite_count, config.seed);
      for (const auto& f : batch.failures) s.warnings.push_back("rewrite case dropped: " + f);
      std::optional<TokenSurrogate> token;
      if (config.token_baseline) {
        token = token_surrogate(gw, text, config.token_perturbations, config.seed);
      }
      if (batch.cases.empty()) {
        s.warnings.push_back("evaluation skipped: every rewrite case failed");
      } else {
        s.evaluation = evaluate(*s.surrogate, batch.cases, s.seed->w0, radius, config.seed,
                                token ? &*token : nullptr);
        s.evaluation->failed_cases = batch.failures.size();
      }
      s.rewrites = std::move(batch.cases);
    }
  } catch (const std::exception& e) {
    s.status = SessionStatus::kDraft;
    s.failed_stage = stage;
    s.error = e.what();
    s.transcript = gw.transcript();
    if (hooks.store) {
      try {
        hooks.store->save(s);
      } catch (const Error&) {
      }
    }
    throw StageError(kind_of(e), stage, e.what(), std::move(s));
  }

  s.transcript = gw.transcript();
  if (hooks.store) hooks.store->save(s);
  return s;
}

AuditSession evaluate_session(const AuditSession& session, std::shared_ptr<ChatTransport> transport,
                              std::size_t rewrite_count, bool token_baseline,
                              std::size_t token_perturbations) {
  if (!session.finalized() || !session.surrogate || !session.seed || !session.factors) {
    throw ParameterError(fmt::format("session '{}' has no fitted surrogate", session.id));
  }
  if (rewrite_count < 1) throw ParameterError("rewrite_count must be >= 1");
  Gateway gw(session.endpoint, std::move(transport), session.task);

  AuditSession out = session;
  out.id = session.id + "-eval";
  const double radius = validity_radius(session);
  auto batch = generate_rewrites(gw, session.text, *session.factors, *session.seed,
                                 *session.surrogate, radius, rewrite_count, session.probe.seed);
  for (const auto& f : batch.failures) out.warnings.push_back("rewrite case dropped: " + f);
  if (batch.cases.empty()) throw EndpointError("every rewrite case failed");
  std::optional<TokenSurrogate> token;
  if (token_baseline) {
    token = token_surrogate(gw, session.text, token_perturbations, session.probe.seed);
  }
  out.evaluation = evaluate(*session.surrogate, batch.cases, session.seed->w0, radius,
                            session.probe.seed, token ? &*token : nullptr);
  out.evaluation->failed_cases = batch.failures.size();
  out.rewrites = std::move(batch.cases);
  const auto extra = gw.transcript();
  out.transcript.insert(out.transcript.end(), extra.begin(), extra.end());
  return out;
}

std::shared_ptr<ChatTransport> make_transport(const EndpointConfig& endpoint,
                                              const std::optional<MockModelConfig>& mock) {
  endpoint.validate();
  if (endpoint.kind == EndpointKind::kMock) {
    return std::make_shared<MockModel>(mock.value_or(MockModelConfig::sigmoid_default()));
  }
  RemoteTransport::Options opts;
  opts.base_url = endpoint.base_url;
  if (const char* key = std::getenv("LAMP_API_KEY")) opts.api_key = key;
  return std::make_shared<RemoteTransport>(std::move(opts));
}

}  // namespace lamp
