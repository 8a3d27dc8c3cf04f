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


#include "lamp/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <unordered_map>

#include <Eigen/Dense>
#include <fmt/format.h>

#include "lamp/error.hpp"
#include "lamp/linalg.hpp"
#include "lamp/text.hpp"

namespace lamp {
namespace {

constexpr std::uint64_t kRewriteStream = 0x7265777269746500ULL;
constexpr std::uint64_t kRandomStream = 0x72616e646f6d0000ULL;
constexpr std::uint64_t kTokenStream = 0x746f6b656e000000ULL;

double unit(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1p-53; }

MethodScore score(std::string_view method, const std::vector<double>& values) {
  MethodScore s;
  s.method = std::string(method);
  s.n = values.size();
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / static_cast<double>(s.n);
  if (s.n > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.sd = std::sqrt(ss / static_cast<double>(s.n - 1));
  }
  return s;
}

}  // namespace

const MethodScore* EvalReport::find(std::string_view method) const {
  for (const auto& m : methods) {
    if (m.method == method) return &m;
  }
  return nullptr;
}

double brier(double p_model, double p_surrogate) {
  for (double p : {p_model, p_surrogate}) {
    if (!(p >= 0.0 && p <= 1.0)) {
      throw ParameterError(fmt::format("brier: probability {} outside [0, 1]", p));
    }
  }
  const double diff = p_model - p_surrogate;
  return diff * diff;
}

std::optional<double> pearson(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) {
    throw ParameterError(
        fmt::format("pearson: length mismatch ({} vs {})", xs.size(), ys.size()));
  }
  const std::size_t n = xs.size();
  if (n < 2) return std::nullopt;
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = xs[i] - mx;
    const double dy = ys[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx <= 0.0 || syy <= 0.0) return std::nullopt;
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

DistanceCheck factor_distance_check(const WeightVector& w0, const WeightVector& w_rewritten,
                                    double delta) {
  if (w0.dim() != w_rewritten.dim()) {
    throw ParameterError(fmt::format("factor distance: dimension mismatch ({} vs {})", w0.dim(),
                                     w_rewritten.dim()));
  }
  if (!(delta >= 0.0)) throw ParameterError("factor distance: delta must be >= 0");
  double ss = 0.0;
  for (std::size_t i = 0; i < w0.dim(); ++i) {
    const double diff = w_rewritten.values[i] - w0.values[i];
    ss += diff * diff;
  }
  DistanceCheck c;
  c.distance = std::sqrt(ss);
  c.bound = delta * std::sqrt(static_cast<double>(w0.dim()));
  c.within = c.distance <= c.bound;
  return c;
}

std::vector<double> token_presence(std::span<const std::string> tokens, std::string_view text) {
  std::unordered_map<std::string, std::size_t> available;
  for (auto& t : split_whitespace(text)) ++available[t];
  std::unordered_map<std::string, std::size_t> rank;
  std::vector<double> x(tokens.size(), 0.0);
  for (std::size_t j = 0; j < tokens.size(); ++j) {
    const std::size_t k = ++rank[tokens[j]];
    const auto it = available.find(tokens[j]);
    x[j] = (it != available.end() && it->second >= k) ? 1.0 : 0.0;
  }
  return x;
}

Prediction predict_tokens(const TokenSurrogate& surrogate, std::string_view text) {
  return predict(surrogate.model, WeightVector{token_presence(surrogate.tokens, text)});
}

TokenSurrogate token_surrogate(Gateway& gateway, const std::string& text, std::size_t m,
                               std::uint64_t seed) {
  TokenSurrogate out;
  out.tokens = split_whitespace(text);
  if (out.tokens.size() < 2) {
    throw ParameterError("token surrogate needs at least two whitespace-delimited tokens");
  }
  if (m < 2) throw ParameterError("token surrogate needs at least two perturbations");

  std::mt19937_64 rng(derive_seed(seed, kTokenStream));
  const std::size_t p = out.tokens.size();
  std::vector<std::vector<double>> masks(m, std::vector<double>(p, 1.0));
  std::vector<std::string> variants(m);
  out.deletion_probabilities.resize(m);
  for (std::size_t i = 0; i < m; ++i) {
    const double q = kMinDeletionProbability +
                     (kMaxDeletionProbability - kMinDeletionProbability) * unit(rng);
    out.deletion_probabilities[i] = q;
    std::string masked;
    for (std::size_t j = 0; j < p; ++j) {
      if (unit(rng) < q) {
        masks[i][j] = 0.0;
        continue;
      }
      if (!masked.empty()) masked += ' ';
      masked += out.tokens[j];
    }
    variants[i] = std::move(masked);
  }

  const auto answers = gateway.batch_explain_texts(variants, kTokenIndexBase);
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < m; ++i) {
    if (answers[i].ok()) {
      rows.push_back(i);
    } else {
      ++out.failed_queries;
    }
  }
  if (rows.size() < 2) {
    throw InsufficientDataError(
        fmt::format("token surrogate: only {} of {} queries succeeded", rows.size(), m));
  }

  Eigen::MatrixXd X(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(p));
  Eigen::VectorXd y(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t j = 0; j < p; ++j) {
      X(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)) = masks[rows[r]][j];
    }
    y(static_cast<Eigen::Index>(r)) = answers[rows[r]].value->probability;
  }
  const auto fit = fit_least_squares(X, y, 0.0, RankPolicy::kMinimumNorm);
  out.model.intercept = fit.intercept;
  out.model.beta.assign(fit.coef.data(), fit.coef.data() + fit.coef.size());
  out.model.r_squared = fit.r_squared();
  const auto dof = static_cast<std::ptrdiff_t>(rows.size()) -
                   static_cast<std::ptrdiff_t>(fit.rank) - 1;
  out.model.residual_variance = dof > 0 ? fit.rss / static_cast<double>(dof) : 0.0;
  out.model.mean_response = y.mean();
  out.model.n_samples = rows.size();
  out.model.rank_deficient = fit.rank_deficient || rows.size() < p + 1;
  return out;
}

std::string rewrite_text(Gateway& gateway, const std::string& text, const FactorSet& factors,
                         const WeightVector& w0, std::span<const double> deltas,
                         std::size_t sample_index) {
  if (deltas.size() != factors.size()) {
    throw ParameterError(fmt::format("rewrite: {} deltas for {} factors", deltas.size(),
                                     factors.size()));
  }
  return gateway.rewrite(text, factors.factors, w0, deltas, sample_index);
}

RewriteBatch generate_rewrites(Gateway& gateway, const std::string& text,
                               const FactorSet& factors, const SeedObservation& seed_obs,
                               const SurrogateModel& surrogate, double delta, std::size_t count,
                               std::uint64_t seed) {
  factors.validate();
  if (!(delta > 0.0)) throw ParameterError("rewrite radius must be positive");
  if (count == 0) throw ParameterError("rewrite count must be >= 1");
  const std::size_t d = factors.size();
  if (seed_obs.w0.dim() != d || surrogate.dim() != d) {
    throw ParameterError("rewrite: factor, seed and surrogate dimensions differ");
  }

  std::vector<std::vector<double>> deltas;
  for (auto& j : sample_jitters(d, delta, count, derive_seed(seed, kRewriteStream))) {
    deltas.push_back(std::move(j.epsilon));
  }

  RewriteBatch out;
  const auto rewrites =
      gateway.batch_rewrite(text, factors.factors, seed_obs.w0, deltas, kRewriteIndexBase);
  std::vector<std::size_t> ok;
  std::vector<std::string> texts;
  for (std::size_t i = 0; i < count; ++i) {
    if (rewrites[i].ok()) {
      ok.push_back(i);
      texts.push_back(*rewrites[i].value);
    } else {
      out.failures.push_back(rewrites[i].error);
    }
  }
  if (ok.empty()) return out;

  const auto answers = gateway.batch_explain_fixed(texts, factors.factors, kRewriteIndexBase);
  for (std::size_t r = 0; r < ok.size(); ++r) {
    if (!answers[r].ok()) {
      out.failures.push_back(answers[r].error);
      continue;
    }
    RewriteCase c;
    try {
      c.w_rewritten = align_weights(factors, *answers[r].value);
    } catch (const AlignmentError& e) {
      out.failures.push_back(e.what());
      continue;
    }
    c.original_text = text;
    c.deltas = deltas[ok[r]];
    c.rewritten_text = texts[r];
    c.p_model = answers[r].value->probability;
    c.p_surrogate = predict(surrogate, c.w_rewritten).probability;
    c.sample_index = kRewriteIndexBase + ok[r];
    out.cases.push_back(std::move(c));
  }
  return out;
}

EvalReport evaluate(const SurrogateModel& surrogate, std::span<const RewriteCase> cases,
                    const WeightVector& w0, double delta, std::uint64_t seed,
                    const TokenSurrogate* token) {
  if (cases.empty()) throw InsufficientDataError("evaluation needs at least one rewrite case");
  const double mean_prediction = predict(surrogate.intercept_only(), w0).probability;

  std::mt19937_64 coin(derive_seed(seed, kRandomStream));
  std::vector<double> s_sur, s_mean, s_uni, s_rand, s_tok;
  std::vector<double> p_sur, p_mod;
  EvalReport report;
  report.n_cases = cases.size();
  for (const auto& c : cases) {
    if (c.w_rewritten.dim() != surrogate.dim()) {
      throw ParameterError("evaluation: rewrite weights do not match the surrogate dimension");
    }
    const double ps = predict(surrogate, c.w_rewritten).probability;
    s_sur.push_back(brier(c.p_model, ps));
    s_mean.push_back(brier(c.p_model, mean_prediction));
    s_uni.push_back(brier(c.p_model, 0.5));
    s_rand.push_back(brier(c.p_model, static_cast<double>(coin() >> 63)));
    if (token) s_tok.push_back(brier(c.p_model, predict_tokens(*token, c.rewritten_text).probability));
    p_sur.push_back(ps);
    p_mod.push_back(c.p_model);
    const auto check = factor_distance_check(w0, c.w_rewritten, delta);
    report.distance_bound = check.bound;
    if (!check.within) ++report.factor_distance_violations;
  }
  report.methods.push_back(score(kSurrogateMethod, s_sur));
  report.methods.push_back(score(kMeanBaseline, s_mean));
  report.methods.push_back(score(kUniformBaseline, s_uni));
  report.methods.push_back(score(kRandomBaseline, s_rand));
  if (token) report.methods.push_back(score(kTokenSurrogate, s_tok));
  report.pearson_r = pearson(p_sur, p_mod);
  return report;
}

}  // namespace lamp
