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

#include "lamp/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "lamp/error.hpp"

namespace lamp {

double LeastSquaresFit::r_squared() const noexcept {
  if (!(tss > 0.0)) return 0.0;
  return 1.0 - rss / tss;
}

LeastSquaresFit fit_least_squares(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                  double lambda, RankPolicy policy) {
  const Eigen::Index n = X.rows();
  const Eigen::Index p = X.cols();
  if (y.size() != n) {
    throw ParameterError(fmt::format("design has {} rows but response has {}", n, y.size()));
  }
  if (n < 1) throw ParameterError("least squares needs at least one observation");
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
    throw ParameterError(fmt::format("ridge lambda must be finite and >= 0, got {}", lambda));
  }
  if (!X.allFinite() || !y.allFinite()) {
    throw ParameterError("design matrix or response contains non-finite entries");
  }

  const Eigen::RowVectorXd x_mean = X.colwise().mean();
  const double y_mean = y.mean();
  const Eigen::MatrixXd xc = X.rowwise() - x_mean;
  const Eigen::VectorXd yc = y.array() - y_mean;

  LeastSquaresFit fit;
  fit.coef = Eigen::VectorXd::Zero(p);

  if (p > 0) {
    if (lambda > 0.0) {
      Eigen::MatrixXd aug(n + p, p);
      aug << xc, std::sqrt(lambda) * Eigen::MatrixXd::Identity(p, p);
      Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n + p);
      rhs.head(n) = yc;
      fit.coef = aug.colPivHouseholderQr().solve(rhs);
      fit.rank = p;
    } else {
      Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(xc);
      qr.setThreshold(kRankTolerance);
      fit.rank = qr.rank();
      if (fit.rank < p) {
        if (policy == RankPolicy::kThrow) {
          std::vector<std::size_t> dropped;
          const auto& perm = qr.colsPermutation().indices();
          for (Eigen::Index k = fit.rank; k < p; ++k) {
            dropped.push_back(static_cast<std::size_t>(perm(k)));
          }
          std::sort(dropped.begin(), dropped.end());
          throw SingularFitError(
              fmt::format("design is rank deficient (rank {} of {}); collinear columns: {}",
                          fit.rank, p, dropped),
              std::move(dropped));
        }
        Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(xc);
        cod.setThreshold(kRankTolerance);
        fit.coef = cod.solve(yc);
        fit.rank_deficient = true;
      } else {
        fit.coef = qr.solve(yc);
      }
    }
  }

  fit.intercept = y_mean - x_mean.dot(fit.coef);
  fit.residuals = yc - xc * fit.coef;
  fit.rss = fit.residuals.squaredNorm();
  fit.tss = yc.squaredNorm();
  return fit;
}

}  // namespace lamp
