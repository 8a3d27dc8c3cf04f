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


#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "lamp/curvature.hpp"
#include "lamp/error.hpp"
#include "lamp/mock.hpp"
#include "oracles.hpp"

namespace lamp {
namespace {

// Samples at center + u with u drawn from U(-r, r)^d; y = f(u).
template <typename F>
std::vector<ProbeSample> quadratic_design(const std::vector<double>& center, double r,
                                          std::size_t n, std::uint64_t seed, F f) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-r, r);
  std::vector<ProbeSample> out;
  for (std::size_t i = 0; i < n; ++i) {
    ProbeSample s;
    std::vector<double> disp(center.size());
    s.weights.values = center;
    for (std::size_t j = 0; j < center.size(); ++j) {
      disp[j] = u(rng);
      s.weights.values[j] += disp[j];
    }
    s.probability = f(disp);
    s.index = i + 1;
    s.jitter = JitterVector{disp, r};
    out.push_back(s);
  }
  return out;
}

TEST(FitQuadratic, RecoversExactQuadraticForm) {
  const auto samples = quadratic_design({0.5, 0.5}, 0.3, 30, 1, [](const std::vector<double>& u) {
    return u[0] * u[0] + 2.0 * u[0] * u[1] + 3.0 * u[1] * u[1];
  });
  const auto est = fit_quadratic(samples, WeightVector{{0.5, 0.5}});
  const Eigen::MatrixXd Q = est.quadratic_form();
  EXPECT_NEAR(Q(0, 0), 1.0, 1e-9);
  EXPECT_NEAR(Q(0, 1), 1.0, 1e-9);
  EXPECT_NEAR(Q(1, 0), 1.0, 1e-9);
  EXPECT_NEAR(Q(1, 1), 3.0, 1e-9);
  const Eigen::MatrixXd H = est.hessian_matrix();
  EXPECT_NEAR(H(0, 0), 2.0, 1e-9);
  EXPECT_NEAR(H(0, 1), 2.0, 1e-9);
  EXPECT_NEAR(H(1, 1), 6.0, 1e-9);
  EXPECT_NEAR(est.gradient[0], 0.0, 1e-9);
  EXPECT_NEAR(est.gradient[1], 0.0, 1e-9);
  EXPECT_NEAR(est.residual_variance, 0.0, 1e-15);
  EXPECT_NEAR(est.hessian_frobenius, std::sqrt(4.0 + 4.0 + 4.0 + 36.0), 1e-9);
}

TEST(FitQuadratic, HessianIsExactlySymmetric) {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> noise(0.0, 0.1);
  const auto samples = quadratic_design({1.0, 1.0, 1.0}, 0.5, 60, 2,
                                        [&](const std::vector<double>& u) {
                                          return u[0] * u[2] + noise(rng);
                                        });
  const auto est = fit_quadratic(samples, WeightVector{{1.0, 1.0, 1.0}});
  const Eigen::MatrixXd H = est.hessian_matrix();
  EXPECT_EQ(H, H.transpose());
  EXPECT_EQ(est.hessian(0, 2), est.hessian(2, 0));
  EXPECT_THROW(est.hessian(0, 3), ParameterError);
}

TEST(FitQuadratic, AffineDataHasZeroCurvature) {
  const auto samples = quadratic_design({0.2, 0.4, 0.6}, 0.2, 40, 3,
                                        [](const std::vector<double>& u) {
                                          return 0.3 + u[0] - 2.0 * u[1] + 0.5 * u[2];
                                        });
  const auto est = fit_quadratic(samples, WeightVector{{0.2, 0.4, 0.6}});
  EXPECT_LT(est.hessian_frobenius, 1e-8);
  EXPECT_NEAR(est.gradient[1], -2.0, 1e-9);
  EXPECT_NEAR(est.intercept, 0.3, 1e-9);
}

TEST(FitQuadratic, ExactSurfacesAcrossDimensions) {
  for (std::size_t d = 2; d <= 5; ++d) {
    std::mt19937_64 rng(100 + d);
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::MatrixXd H(d, d);
    for (std::size_t a = 0; a < d; ++a) {
      for (std::size_t b = a; b < d; ++b) H(a, b) = H(b, a) = normal(rng);
    }
    Eigen::VectorXd g(d);
    for (std::size_t a = 0; a < d; ++a) g(a) = normal(rng);
    const std::vector<double> center(d, 0.5);
    const auto samples = quadratic_design(
        center, 0.4, 4 * min_quadratic_samples(d), 7 + d, [&](const std::vector<double>& u) {
          const Eigen::Map<const Eigen::VectorXd> v(u.data(), static_cast<Eigen::Index>(d));
          return 0.1 + g.dot(v) + 0.5 * v.dot(H * v);
        });
    const auto est = fit_quadratic(samples, WeightVector{center});
    EXPECT_LT((est.hessian_matrix() - H).norm(), 1e-7) << "d = " << d;
  }
}

TEST(FitQuadratic, PlantedMockHessianRoundTrip) {
  MockSurface s;
  s.family = SurfaceFamily::kQuadratic;
  s.a = {0.1, -0.2};
  s.b = 0.5;
  s.hessian = {0.8, 0.3, 0.3, -0.6};
  s.center = {0.5, 0.5};
  s.noise_sd = 0.002;
  s.seed = 4;
  const auto samples = quadratic_design({0.5, 0.5}, 0.3, 200, 5, [&](const std::vector<double>& u) {
    return mock_predict(s, WeightVector{{0.5 + u[0], 0.5 + u[1]}}, 0);
  });
  const auto est = fit_quadratic(samples, WeightVector{{0.5, 0.5}});
  const Eigen::Map<const Eigen::Matrix2d> H(s.hessian.data());
  EXPECT_LT((est.hessian_matrix() - Eigen::MatrixXd(H)).norm() / H.norm(), 0.10);
}

TEST(FitQuadratic, RejectsTooFewSamples) {
  EXPECT_EQ(min_quadratic_samples(2), 7u);
  const auto samples = quadratic_design({0.5, 0.5}, 0.3, 6, 1,
                                        [](const std::vector<double>& u) { return u[0]; });
  EXPECT_THROW(fit_quadratic(samples, WeightVector{{0.5, 0.5}}), ParameterError);
}

TEST(MseCurve, FlatSurfaceIsPureVariance) {
  EXPECT_DOUBLE_EQ(mse_curve(0.5, 0.0, 0.2, 10, 2), 0.2 / (10.0 * 0.25));
}

TEST(MseCurve, Arithmetic) { EXPECT_DOUBLE_EQ(mse_curve(1.0, 6.0, 1.0, 1, 1), 2.0); }

TEST(MseCurve, RejectsNonPositiveRadius) {
  EXPECT_THROW(mse_curve(0.0, 1.0, 1.0, 1, 1), ParameterError);
}

TEST(OptimalRadius, ClosedFormValue) {
  const auto r = optimal_radius(5, 50, 0.01, 1.0);
  ASSERT_TRUE(r.finite());
  EXPECT_NEAR(r.value, std::pow(0.009, 1.0 / 9.0), 1e-15);
  EXPECT_NEAR(r.value, 0.59251, 5e-6);
}

TEST(OptimalRadius, MatchesGoldenSectionAndIsStationary) {
  const std::size_t d = 5;
  const std::size_t n = 50;
  const double sigma2 = 0.01;
  const double h = 1.0;
  const double closed = optimal_radius(d, n, sigma2, h).value;
  const auto f = [&](double t) { return mse_curve(std::exp(t), h, sigma2, n, d); };
  const double numeric = std::exp(testing::golden_section_min(f, std::log(1e-4), std::log(1e4)));
  EXPECT_NEAR(numeric / closed, 1.0, 1e-6);
  const double step = 1e-5 * closed;
  const double slope = (mse_curve(closed + step, h, sigma2, n, d) -
                        mse_curve(closed - step, h, sigma2, n, d)) /
                       (2.0 * step);
  EXPECT_LT(std::abs(slope * closed / mse_curve(closed, h, sigma2, n, d)), 1e-6);
}

TEST(OptimalRadius, DoublingNScalesByPowerLaw) {
  for (std::size_t d = 1; d <= 6; ++d) {
    const double a = optimal_radius(d, 40, 0.05, 2.0).value;
    const double b = optimal_radius(d, 80, 0.05, 2.0).value;
    EXPECT_NEAR(b / a, std::pow(2.0, -1.0 / (4.0 + static_cast<double>(d))), 1e-14);
  }
}

TEST(OptimalRadius, DegenerateInputs) {
  EXPECT_EQ(optimal_radius(3, 50, 0.01, 0.0).status, RadiusStatus::kFlatSurface);
  EXPECT_EQ(optimal_radius(3, 50, 0.0, 1.0).status, RadiusStatus::kNoiseless);
  EXPECT_THROW(optimal_radius(0, 50, 0.01, 1.0), ParameterError);
  EXPECT_THROW(optimal_radius(3, 50, -1.0, 1.0), ParameterError);
  EXPECT_THROW(optimal_radius(3, 50, 0.01, -1.0), ParameterError);
}

std::vector<ProbeSample> jittered(const std::vector<double>& sup_norms, double scale) {
  std::vector<ProbeSample> out;
  ProbeSample seed;
  seed.weights.values = {0.5, 0.5};
  seed.probability = 0.5;
  out.push_back(seed);
  for (std::size_t i = 0; i < sup_norms.size(); ++i) {
    ProbeSample s;
    s.weights.values = {0.5, 0.5};
    s.probability = 0.5;
    s.index = i + 1;
    s.jitter = JitterVector{{sup_norms[i], -0.5 * sup_norms[i]}, scale};
    out.push_back(s);
  }
  return out;
}

TEST(Truncation, InflationFactorFromTable) {
  EXPECT_NEAR(inflation_factor(50, 3), 1.0638, 1e-4);
  EXPECT_DOUBLE_EQ(inflation_factor(50, 0), 1.0);
  EXPECT_THROW(inflation_factor(5, 5), ParameterError);
}

TEST(Truncation, KeepsSeedAndSamplesInsideRadius) {
  const auto samples = jittered({0.1, 0.25, 0.3, 0.05, 0.29, 0.2}, 0.3);
  const auto out = truncate_samples(samples, 0.2);
  EXPECT_EQ(out.report.kept, 4u);
  EXPECT_EQ(out.report.discarded, 3u);
  EXPECT_DOUBLE_EQ(out.report.inflation_factor, 7.0 / 4.0);
  EXPECT_DOUBLE_EQ(out.report.delta_used, 0.3);
  EXPECT_TRUE(out.samples.front().is_seed());
  for (const auto& s : out.samples) {
    if (!s.is_seed()) EXPECT_LE(s.jitter->sup_norm(), 0.2);
  }
}

TEST(Truncation, RadiusAboveSamplingScaleKeepsEverything) {
  const auto samples = jittered({0.1, 0.25, 0.3, 0.05}, 0.3);
  const auto out = truncate_samples(samples, 0.3);
  EXPECT_EQ(out.report.discarded, 0u);
  EXPECT_DOUBLE_EQ(out.report.inflation_factor, 1.0);
}

TEST(Truncation, EuclideanNormIsStricter) {
  const auto samples = jittered({0.1, 0.18, 0.05, 0.19, 0.15}, 0.3);
  const auto sup = truncate_samples(samples, 0.2, TruncationNorm::kSup);
  const auto l2 = truncate_samples(samples, 0.2, TruncationNorm::kEuclidean);
  EXPECT_EQ(sup.report.discarded, 0u);
  EXPECT_EQ(l2.report.discarded, 2u);
}

TEST(Truncation, TooFewSurvivorsThrows) {
  const auto samples = jittered({0.3, 0.3, 0.3, 0.05}, 0.3);
  EXPECT_THROW(truncate_samples(samples, 0.1), InsufficientDataError);
}

}  // namespace
}  // namespace lamp
