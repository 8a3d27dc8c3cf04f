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

#include "lamp/curvature.hpp"

#include <cmath>

#include <fmt/format.h>

#include "lamp/error.hpp"
#include "lamp/linalg.hpp"

namespace lamp {

namespace {

std::size_t upper_index(std::size_t d, std::size_t a, std::size_t b) {
  if (a > b) std::swap(a, b);
  // Rows 0..a-1 contribute d, d-1, ..., d-a+1 entries.
  return a * d - a * (a - 1) / 2 + (b - a);
}

}  // namespace

double CurvatureEstimate::hessian(std::size_t a, std::size_t b) const {
  if (a >= dim || b >= dim) {
    throw ParameterError(fmt::format("Hessian index ({}, {}) out of range for d = {}", a, b, dim));
  }
  return hessian_upper[upper_index(dim, a, b)];
}

Eigen::MatrixXd CurvatureEstimate::hessian_matrix() const {
  const auto d = static_cast<Eigen::Index>(dim);
  Eigen::MatrixXd h(d, d);
  for (std::size_t a = 0; a < dim; ++a) {
    for (std::size_t b = 0; b < dim; ++b) {
      h(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = hessian(a, b);
    }
  }
  return h;
}

Eigen::MatrixXd CurvatureEstimate::quadratic_form() const { return 0.5 * hessian_matrix(); }

std::size_t min_quadratic_samples(std::size_t d) { return 1 + d + d * (d + 1) / 2 + 1; }

CurvatureEstimate fit_quadratic(std::span<const ProbeSample> samples, const WeightVector& center) {
  const std::size_t d = center.dim();
  if (d == 0) throw ParameterError("quadratic fit needs at least one dimension");
  const std::size_t n_min = min_quadratic_samples(d);
  if (samples.size() < n_min) {
    throw ParameterError(fmt::format(
        "quadratic fit in d = {} needs at least {} samples (1 + d + d(d+1)/2 + 1), got {}", d,
        n_min, samples.size()));
  }

  const std::size_t n_pairs = d * (d + 1) / 2;
  const auto n = static_cast<Eigen::Index>(samples.size());
  Eigen::MatrixXd X(n, static_cast<Eigen::Index>(d + n_pairs));
  Eigen::VectorXd y(n);
  std::vector<double> u(d);
  for (Eigen::Index r = 0; r < n; ++r) {
    const auto& s = samples[static_cast<std::size_t>(r)];
    if (s.weights.dim() != d) {
      throw ParameterError(
          fmt::format("sample {} has {} weights, center has {}", s.index, s.weights.dim(), d));
    }
    for (std::size_t a = 0; a < d; ++a) {
      u[a] = s.weights.values[a] - center.values[a];
      X(r, static_cast<Eigen::Index>(a)) = u[a];
    }
    Eigen::Index col = static_cast<Eigen::Index>(d);
    for (std::size_t a = 0; a < d; ++a) {
      for (std::size_t b = a; b < d; ++b) X(r, col++) = u[a] * u[b];
    }
    y(r) = s.probability;
  }

  const LeastSquaresFit fit = fit_least_squares(X, y, 0.0, RankPolicy::kThrow);

  CurvatureEstimate est;
  est.dim = d;
  est.intercept = fit.intercept;
  est.gradient.assign(fit.coef.data(), fit.coef.data() + d);
  est.hessian_upper.resize(n_pairs);
  double frob2 = 0.0;
  std::size_t k = 0;
  for (std::size_t a = 0; a < d; ++a) {
    for (std::size_t b = a; b < d; ++b, ++k) {
      const double c = fit.coef(static_cast<Eigen::Index>(d + k));
      // u_a^2 carries H_aa / 2; u_a u_b (a < b) carries H_ab.
      const double h = (a == b) ? 2.0 * c : c;
      est.hessian_upper[k] = h;
      frob2 += (a == b) ? h * h : 2.0 * h * h;
    }
  }
  est.hessian_frobenius = std::sqrt(frob2);
  const double dof = static_cast<double>(samples.size() - (1 + d + n_pairs));
  est.residual_variance = fit.rss / dof;
  est.n_samples = samples.size();
  return est;
}

double mse_curve(double delta, double hessian_frobenius, double sigma2, std::size_t n,
                 std::size_t d) {
  if (!(delta > 0.0)) throw ParameterError(fmt::format("radius must be positive, got {}", delta));
  if (n == 0 || d == 0) throw ParameterError("MSE curve needs n >= 1 and d >= 1");
  const double bias2 = hessian_frobenius * hessian_frobenius * std::pow(delta, 4) / 36.0;
  const double variance = sigma2 / (static_cast<double>(n) * std::pow(delta, static_cast<double>(d)));
  return bias2 + variance;
}

OptimalRadius optimal_radius(std::size_t d, std::size_t n, double sigma2,
                             double hessian_frobenius) {
  if (n == 0 || d == 0) throw ParameterError("optimal radius needs n >= 1 and d >= 1");
  if (!(sigma2 >= 0.0) || !std::isfinite(sigma2)) {
    throw ParameterError(fmt::format("residual variance must be finite and >= 0, got {}", sigma2));
  }
  if (!(hessian_frobenius >= 0.0) || !std::isfinite(hessian_frobenius)) {
    throw ParameterError(
        fmt::format("Hessian norm must be finite and >= 0, got {}", hessian_frobenius));
  }
  if (hessian_frobenius == 0.0) return {RadiusStatus::kFlatSurface, 0.0};
  if (sigma2 == 0.0) return {RadiusStatus::kNoiseless, 0.0};
  const double ratio = 9.0 * static_cast<double>(d) * sigma2 /
                       (static_cast<double>(n) * hessian_frobenius * hessian_frobenius);
  return {RadiusStatus::kFinite, std::pow(ratio, 1.0 / (4.0 + static_cast<double>(d)))};
}

double inflation_factor(std::size_t n, std::size_t k) {
  if (k >= n) throw ParameterError(fmt::format("cannot discard {} of {} samples", k, n));
  return static_cast<double>(n) / static_cast<double>(n - k);
}

TruncationResult truncate_samples(std::span<const ProbeSample> samples, double delta_star,
                                  TruncationNorm norm) {
  if (samples.empty()) throw ParameterError("no samples to truncate");
  if (!(delta_star >= 0.0)) {
    throw ParameterError(fmt::format("truncation radius must be >= 0, got {}", delta_star));
  }
  TruncationResult out;
  out.report.delta_star = delta_star;
  out.report.norm = norm;
  for (const auto& s : samples) {
    if (s.is_seed()) {
      out.samples.push_back(s);
      continue;
    }
    out.report.delta_used = std::max(out.report.delta_used, s.jitter->scale);
    const double r =
        norm == TruncationNorm::kSup ? s.jitter->sup_norm() : s.jitter->euclidean_norm();
    if (r <= delta_star) out.samples.push_back(s);
  }
  out.report.kept = out.samples.size();
  out.report.discarded = samples.size() - out.samples.size();

  const std::size_t d = samples.front().weights.dim();
  if (out.report.kept < d + 2) {
    throw InsufficientDataError(fmt::format(
        "truncation at radius {:.6g} keeps {} of {} samples, fewer than d + 2 = {}; "
        "re-probe with a smaller radius",
        delta_star, out.report.kept, samples.size(), d + 2));
  }
  out.report.inflation_factor = inflation_factor(samples.size(), out.report.discarded);
  return out;
}

}  // namespace lamp
