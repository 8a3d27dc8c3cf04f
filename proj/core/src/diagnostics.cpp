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

#include "lamp/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <boost/math/distributions/students_t.hpp>
#include <fmt/format.h>

#include "lamp/error.hpp"
#include "lamp/linalg.hpp"

namespace lamp {

CenteredR2 r_squared_centered(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                              const Eigen::VectorXd& beta) {
  if (X.rows() != y.size() || X.cols() != beta.size()) {
    throw ParameterError(fmt::format("shape mismatch: X is {}x{}, y has {}, beta has {}", X.rows(),
                                     X.cols(), y.size(), beta.size()));
  }
  const double yy = y.squaredNorm();
  if (yy == 0.0) return {0.0, false};
  const Eigen::VectorXd xb = X * beta;
  return {xb.squaredNorm() / yy, true};
}

double bic_from_rss(double rss, std::size_t n, std::size_t k) {
  if (n <= k) throw ParameterError(fmt::format("BIC needs n > k, got n = {}, k = {}", n, k));
  if (!(rss >= 0.0)) throw ParameterError("residual sum of squares must be >= 0");
  if (rss == 0.0) return -std::numeric_limits<double>::infinity();
  const double nd = static_cast<double>(n);
  return nd * std::log(rss / nd) + static_cast<double>(k) * std::log(nd);
}

double bic(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, std::size_t k) {
  const auto fit = fit_least_squares(X, y, 0.0, RankPolicy::kMinimumNorm);
  return bic_from_rss(fit.rss, static_cast<std::size_t>(y.size()), k);
}

std::optional<Eigen::VectorXd> recursive_residuals(const Eigen::MatrixXd& X,
                                                   const Eigen::VectorXd& y) {
  const Eigen::Index n = X.rows();
  const Eigen::Index k = X.cols() + 1;
  if (y.size() != n) throw ParameterError("design and response lengths differ");
  if (n <= k) {
    throw ParameterError(fmt::format("recursive residuals need n > {} observations, got {}", k, n));
  }

  Eigen::MatrixXd Z(n, k);
  Z.col(0).setOnes();
  Z.rightCols(X.cols()) = X;

  const Eigen::MatrixXd z0 = Z.topRows(k);
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(z0);
  qr.setThreshold(kRankTolerance);
  if (qr.rank() < k) return std::nullopt;

  // P = (Z_t' Z_t)^{-1}, b = OLS on the first t rows; both updated by
  // Sherman-Morrison as the window grows.
  const Eigen::MatrixXd z0_inv = qr.inverse();
  Eigen::MatrixXd P = z0_inv * z0_inv.transpose();
  Eigen::VectorXd b = z0_inv * y.head(k);

  Eigen::VectorXd w(n - k);
  for (Eigen::Index t = k; t < n; ++t) {
    const Eigen::VectorXd x = Z.row(t).transpose();
    const Eigen::VectorXd px = P * x;
    const double f = 1.0 + x.dot(px);
    const double e = y(t) - x.dot(b);
    w(t - k) = e / std::sqrt(f);
    b += px * (e / f);
    P -= (px * px.transpose()) / f;
  }
  return w;
}

std::optional<LinearityTestResult> harvey_collier(const Eigen::MatrixXd& X,
                                                  const Eigen::VectorXd& y, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw ParameterError(fmt::format("alpha must lie in (0, 1), got {}", alpha));
  }
  if (X.rows() < X.cols() + 3) {
    throw ParameterError(fmt::format("Harvey-Collier needs n >= d + 3 = {}, got {}",
                                     X.cols() + 3, X.rows()));
  }
  const auto w = recursive_residuals(X, y);
  if (!w) return std::nullopt;

  LinearityTestResult res;
  res.alpha = alpha;
  res.n_residuals = static_cast<std::size_t>(w->size());
  const double m = static_cast<double>(w->size());
  const double mean = w->mean();
  const double ss = (w->array() - mean).square().sum();
  const double sd = std::sqrt(ss / (m - 1.0));

  // Residuals at rounding level mean the data are exactly linear.
  const double y_scale = std::max(1.0, std::sqrt(y.squaredNorm() / static_cast<double>(y.size())));
  const double w_rms = std::sqrt(w->squaredNorm() / m);
  if (w_rms <= 1e-10 * y_scale || sd == 0.0) {
    res.statistic = 0.0;
    res.p_value = 1.0;
    res.rejected = false;
    return res;
  }

  res.statistic = std::sqrt(m) * mean / sd;
  const boost::math::students_t dist(m - 1.0);
  res.p_value = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(res.statistic)));
  res.p_value = std::clamp(res.p_value, 0.0, 1.0);
  res.rejected = res.p_value < alpha;
  return res;
}

namespace {

double subset_r2(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                 const std::vector<std::size_t>& cols) {
  Eigen::MatrixXd sub(X.rows(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t j = 0; j < cols.size(); ++j) {
    sub.col(static_cast<Eigen::Index>(j)) = X.col(static_cast<Eigen::Index>(cols[j]));
  }
  return fit_least_squares(sub, y, 0.0, RankPolicy::kMinimumNorm).r_squared();
}

bool improves(double candidate, double best) {
  if (std::isinf(best)) return candidate > best;
  return candidate > best + 1e-12 * std::max(1.0, std::abs(best));
}

double n_choose_k(std::size_t n, std::size_t k) {
  double c = 1.0;
  for (std::size_t i = 1; i <= k; ++i) {
    c = c * static_cast<double>(n - k + i) / static_cast<double>(i);
  }
  return c;
}

}  // namespace

SubsetResult best_subset(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, std::size_t k,
                         SubsetSearch search) {
  const auto p = static_cast<std::size_t>(X.cols());
  const auto n = static_cast<std::size_t>(X.rows());
  if (k == 0 || k > p) {
    throw ParameterError(fmt::format("subset size {} infeasible for {} columns", k, p));
  }
  if (n <= k + 1) {
    throw ParameterError(fmt::format("best subset of size {} needs n > {}, got {}", k, k + 1, n));
  }
  if (y.size() != X.rows()) throw ParameterError("design and response lengths differ");

  const bool exhaustive =
      search == SubsetSearch::kExhaustive ||
      (search == SubsetSearch::kAuto && n_choose_k(p, k) <= kExhaustiveSubsetLimit);

  SubsetResult res;
  res.exhaustive = exhaustive;
  double best = -std::numeric_limits<double>::infinity();

  if (exhaustive) {
    // Lexicographic enumeration; strict improvement keeps the first optimum.
    std::vector<std::size_t> cols(k);
    std::iota(cols.begin(), cols.end(), std::size_t{0});
    while (true) {
      const double r2 = subset_r2(X, y, cols);
      if (improves(r2, best)) {
        best = r2;
        res.columns = cols;
      }
      std::size_t i = k;
      while (i > 0 && cols[i - 1] == p - k + (i - 1)) --i;
      if (i == 0) break;
      ++cols[i - 1];
      for (std::size_t j = i; j < k; ++j) cols[j] = cols[j - 1] + 1;
    }
  } else {
    std::vector<std::size_t> chosen;
    std::vector<bool> used(p, false);
    for (std::size_t step = 0; step < k; ++step) {
      double step_best = -std::numeric_limits<double>::infinity();
      std::size_t pick = p;
      for (std::size_t c = 0; c < p; ++c) {
        if (used[c]) continue;
        auto trial = chosen;
        trial.push_back(c);
        const double r2 = subset_r2(X, y, trial);
        if (improves(r2, step_best)) {
          step_best = r2;
          pick = c;
        }
      }
      used[pick] = true;
      chosen.push_back(pick);
      best = step_best;
    }
    std::sort(chosen.begin(), chosen.end());
    res.columns = std::move(chosen);
  }

  res.r_squared = best;
  const double nd = static_cast<double>(n);
  res.adjusted_r_squared =
      1.0 - (1.0 - best) * (nd - 1.0) / (nd - static_cast<double>(k) - 1.0);
  return res;
}

ProbabilityBin probability_bin(double p) {
  if (!(p >= 0.0 && p <= 1.0)) {
    throw ParameterError(fmt::format("probability {} outside [0, 1]", p));
  }
  if (p < 0.2) return ProbabilityBin::kLowTail;
  if (p <= 0.8) return ProbabilityBin::kMiddle;
  return ProbabilityBin::kHighTail;
}

TailProfile tail_profile(std::span<const TailPoint> points) {
  TailProfile prof;
  prof.bins[0].lower = 0.0;
  prof.bins[0].upper = 0.2;
  prof.bins[1].lower = 0.2;
  prof.bins[1].upper = 0.8;
  prof.bins[2].lower = 0.8;
  prof.bins[2].upper = 1.0;

  std::array<double, 3> beta_sum{};
  std::array<double, 3> r2_sum{};
  for (const auto& pt : points) {
    const auto b = static_cast<std::size_t>(probability_bin(pt.seed_probability));
    ++prof.bins[b].count;
    beta_sum[b] += pt.beta_norm;
    r2_sum[b] += pt.r_squared;
  }
  for (std::size_t b = 0; b < 3; ++b) {
    if (prof.bins[b].count == 0) continue;
    const double c = static_cast<double>(prof.bins[b].count);
    prof.bins[b].mean_beta_norm = beta_sum[b] / c;
    prof.bins[b].mean_r_squared = r2_sum[b] / c;
  }
  return prof;
}

}  // namespace lamp
