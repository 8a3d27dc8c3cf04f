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

#include "lamp/probe.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <fmt/format.h>

#include "lamp/error.hpp"
#include "lamp/linalg.hpp"

namespace lamp {

double JitterVector::sup_norm() const noexcept {
  double m = 0.0;
  for (double e : epsilon) m = std::max(m, std::abs(e));
  return m;
}

double JitterVector::euclidean_norm() const noexcept {
  double s = 0.0;
  for (double e : epsilon) s += e * e;
  return std::sqrt(s);
}

double SurrogateModel::beta_norm() const noexcept {
  double s = 0.0;
  for (double b : beta) s += b * b;
  return std::sqrt(s);
}

SurrogateModel SurrogateModel::intercept_only() const {
  SurrogateModel m = *this;
  std::fill(m.beta.begin(), m.beta.end(), 0.0);
  m.intercept = mean_response;
  m.r_squared = 0.0;
  return m;
}

std::vector<JitterVector> sample_jitters(std::size_t d, double delta, std::size_t m,
                                         std::uint64_t seed) {
  if (d == 0) throw ParameterError("jitter dimension must be positive");
  if (m == 0) throw ParameterError("jitter count must be positive");
  if (!(delta > 0.0) || !std::isfinite(delta)) {
    throw ParameterError(fmt::format("jitter radius must be positive and finite, got {}", delta));
  }
  std::mt19937_64 rng(seed);
  // 53 random mantissa bits mapped to [-delta, delta).
  constexpr double kUnit = 1.0 / 9007199254740992.0;
  std::vector<JitterVector> out(m);
  for (auto& j : out) {
    j.scale = delta;
    j.epsilon.resize(d);
    for (auto& e : j.epsilon) {
      const double u = static_cast<double>(rng() >> 11) * kUnit;
      e = delta * (2.0 * u - 1.0);
    }
  }
  return out;
}

JitteredWeights apply_jitter(const WeightVector& w0, const JitterVector& eps) {
  if (w0.dim() != eps.epsilon.size()) {
    throw ParameterError(fmt::format("weight vector has {} entries but jitter has {}", w0.dim(),
                                     eps.epsilon.size()));
  }
  JitteredWeights out;
  out.weights.values.resize(w0.dim());
  for (std::size_t i = 0; i < w0.dim(); ++i) {
    double v = w0.values[i] * (1.0 + eps.epsilon[i]);
    if (v < 0.0) {
      v = 0.0;
      out.clamped = true;
    }
    out.weights.values[i] = v;
  }
  return out;
}

SurrogateModel fit_surrogate(std::span<const ProbeSample> samples, double lambda) {
  if (samples.empty()) throw ParameterError("no probe samples to fit");
  const std::size_t d = samples.front().weights.dim();
  if (d == 0) throw ParameterError("probe samples have zero factors");
  if (samples.size() < d + 2) {
    throw ParameterError(fmt::format("surrogate fit needs at least d + 2 = {} samples, got {}",
                                     d + 2, samples.size()));
  }

  const auto n = static_cast<Eigen::Index>(samples.size());
  Eigen::MatrixXd X(n, static_cast<Eigen::Index>(d));
  Eigen::VectorXd y(n);
  for (Eigen::Index r = 0; r < n; ++r) {
    const auto& s = samples[static_cast<std::size_t>(r)];
    if (s.weights.dim() != d) {
      throw ParameterError(fmt::format("sample {} has {} weights, expected {}", s.index,
                                       s.weights.dim(), d));
    }
    for (std::size_t c = 0; c < d; ++c) X(r, static_cast<Eigen::Index>(c)) = s.weights.values[c];
    y(r) = s.probability;
  }

  const LeastSquaresFit fit = fit_least_squares(X, y, lambda, RankPolicy::kThrow);

  SurrogateModel model;
  model.intercept = fit.intercept;
  model.beta.assign(fit.coef.data(), fit.coef.data() + fit.coef.size());
  model.r_squared = fit.r_squared();
  model.residual_variance = fit.rss / static_cast<double>(samples.size() - d - 1);
  model.mean_response = y.mean();
  model.n_samples = samples.size();
  model.ridge_lambda = lambda;
  return model;
}

double predict_raw(const SurrogateModel& model, const WeightVector& w) {
  if (w.dim() != model.dim()) {
    throw ParameterError(
        fmt::format("weight vector has {} entries, surrogate expects {}", w.dim(), model.dim()));
  }
  double v = model.intercept;
  for (std::size_t i = 0; i < w.dim(); ++i) v += model.beta[i] * w.values[i];
  return v;
}

Prediction predict(const SurrogateModel& model, const WeightVector& w) {
  Prediction p;
  p.raw = predict_raw(model, w);
  p.probability = std::clamp(p.raw, 0.0, 1.0);
  p.clamped = p.probability != p.raw;
  return p;
}

}  // namespace lamp
