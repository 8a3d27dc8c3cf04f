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

#include "lamp/error.hpp"
#include "lamp/evaluation.hpp"
#include "lamp/mock.hpp"
#include "oracles.hpp"

namespace lamp {
namespace {

Gateway gateway_for(MockModelConfig cfg) {
  return Gateway(EndpointConfig{}, std::make_shared<MockModel>(std::move(cfg)),
                 TaskTemplate::preset("sentiment"));
}

RewriteCase make_case(std::vector<double> w, double p_model) {
  RewriteCase c;
  c.w_rewritten.values = std::move(w);
  c.p_model = p_model;
  c.rewritten_text = "x";
  return c;
}

TEST(Brier, Examples) {
  EXPECT_DOUBLE_EQ(brier(0.8, 0.8), 0.0);
  EXPECT_DOUBLE_EQ(brier(1.0, 0.0), 1.0);
  EXPECT_NEAR(brier(0.96, 0.5), 0.2116, 1e-15);
  EXPECT_THROW(brier(1.2, 0.5), ParameterError);
  EXPECT_THROW(brier(0.5, std::nan("")), ParameterError);
}

TEST(Pearson, IdentityAndReflection) {
  const std::vector<double> x = {0.1, 0.4, 0.35, 0.9, 0.2};
  std::vector<double> neg;
  for (double v : x) neg.push_back(1.0 - v);
  EXPECT_NEAR(*pearson(x, x), 1.0, 1e-15);
  EXPECT_NEAR(*pearson(x, neg), -1.0, 1e-15);
}

TEST(Pearson, MatchesCovarianceOracle) {
  std::mt19937_64 rng(77);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> x(20 + trial % 30);
    std::vector<double> y(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
      x[i] = normal(rng);
      y[i] = 0.5 * x[i] + normal(rng);
    }
    EXPECT_NEAR(*pearson(x, y), testing::pearson_oracle(x, y), 1e-12);
  }
}

TEST(Pearson, AffineInvariance) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> x(30);
  std::vector<double> y(30);
  std::vector<double> y2(30);
  for (std::size_t i = 0; i < 30; ++i) {
    x[i] = u(rng);
    y[i] = x[i] * x[i] + 0.1 * u(rng);
    y2[i] = 3.0 * y[i] - 7.0;
  }
  EXPECT_NEAR(*pearson(x, y), *pearson(x, y2), 1e-12);
}

TEST(Pearson, DegenerateInputs) {
  const std::vector<double> x = {0.1, 0.2, 0.3};
  const std::vector<double> c = {0.5, 0.5, 0.5};
  EXPECT_FALSE(pearson(x, c).has_value());
  EXPECT_FALSE(pearson(std::vector<double>{1.0}, std::vector<double>{2.0}).has_value());
  EXPECT_THROW(pearson(x, std::vector<double>{1.0, 2.0}), ParameterError);
}

TEST(FactorDistance, Examples) {
  const WeightVector w0{{0.5, 0.5, 0.5, 0.5, 0.5}};
  const WeightVector w_near{{0.8, 0.5, 0.5, 0.5, 0.5}};
  const WeightVector w_far{{1.1, 0.5, 0.5, 0.5, 0.5}};
  const auto a = factor_distance_check(w0, w_near, 0.2);
  EXPECT_NEAR(a.bound, 0.4472, 1e-4);
  EXPECT_NEAR(a.distance, 0.30, 1e-12);
  EXPECT_TRUE(a.within);
  const auto b = factor_distance_check(w0, w0, 0.2);
  EXPECT_DOUBLE_EQ(b.distance, 0.0);
  EXPECT_TRUE(b.within);
  const auto c = factor_distance_check(w0, w_far, 0.2);
  EXPECT_NEAR(c.distance, 0.60, 1e-12);
  EXPECT_FALSE(c.within);
  EXPECT_THROW(factor_distance_check(w0, WeightVector{{0.1}}, 0.2), ParameterError);
}

TEST(Evaluate, ScoresEveryMethod) {
  SurrogateModel s;
  s.beta = {1.0, 0.0};
  s.intercept = 0.0;
  s.mean_response = 0.6;
  const std::vector<RewriteCase> cases = {make_case({0.5, 0.5}, 0.5), make_case({0.7, 0.5}, 0.8),
                                          make_case({0.6, 0.5}, 0.6)};
  const WeightVector w0{{0.5, 0.5}};
  const auto r = evaluate(s, cases, w0, 0.1, 9);
  ASSERT_NE(r.find(kSurrogateMethod), nullptr);
  EXPECT_NEAR(r.find(kSurrogateMethod)->mean, (0.0 + 0.01 + 0.0) / 3.0, 1e-15);
  EXPECT_NEAR(r.find(kMeanBaseline)->mean, (0.01 + 0.04 + 0.0) / 3.0, 1e-15);
  EXPECT_NEAR(r.find(kUniformBaseline)->mean, (0.0 + 0.09 + 0.01) / 3.0, 1e-15);
  EXPECT_NE(r.find(kRandomBaseline), nullptr);
  EXPECT_EQ(r.find(kTokenSurrogate), nullptr);
  EXPECT_EQ(r.n_cases, 3u);
  ASSERT_TRUE(r.pearson_r.has_value());
  EXPECT_NEAR(*r.pearson_r, testing::pearson_oracle({0.5, 0.7, 0.6}, {0.5, 0.8, 0.6}), 1e-12);
  // Distances 0, 0.2, 0.1 against the bound 0.1 * sqrt(2).
  EXPECT_EQ(r.factor_distance_violations, 1u);
  const double sd = std::sqrt(((0.0 - 0.01 / 3) * (0.0 - 0.01 / 3) * 2 +
                               (0.01 - 0.01 / 3) * (0.01 - 0.01 / 3)) / 2.0);
  EXPECT_NEAR(r.find(kSurrogateMethod)->sd, sd, 1e-12);
}

TEST(Evaluate, ConstantModelProbabilityLeavesCorrelationUndefined) {
  SurrogateModel s;
  s.beta = {1.0};
  const std::vector<RewriteCase> cases = {make_case({0.2}, 0.7), make_case({0.4}, 0.7)};
  const auto r = evaluate(s, cases, WeightVector{{0.3}}, 0.5, 1);
  EXPECT_FALSE(r.pearson_r.has_value());
  EXPECT_EQ(r.methods.size(), 4u);
}

TEST(Evaluate, RandomBaselineIsSeeded) {
  SurrogateModel s;
  s.beta = {0.0};
  std::vector<RewriteCase> cases;
  for (int i = 0; i < 20; ++i) cases.push_back(make_case({0.1}, 0.05 * i));
  const auto a = evaluate(s, cases, WeightVector{{0.1}}, 0.3, 5);
  const auto b = evaluate(s, cases, WeightVector{{0.1}}, 0.3, 5);
  EXPECT_EQ(a.find(kRandomBaseline)->mean, b.find(kRandomBaseline)->mean);
  EXPECT_THROW(evaluate(s, std::vector<RewriteCase>{}, WeightVector{{0.1}}, 0.3, 5),
               InsufficientDataError);
}

TEST(TokenPresence, CountsRepeatedTokens) {
  const std::vector<std::string> tokens = {"a", "b", "a", "c"};
  EXPECT_EQ(token_presence(tokens, "a b a c"), (std::vector<double>{1, 1, 1, 1}));
  EXPECT_EQ(token_presence(tokens, "c a"), (std::vector<double>{1, 0, 0, 1}));
  EXPECT_EQ(token_presence(tokens, ""), (std::vector<double>{0, 0, 0, 0}));
}

TEST(TokenSurrogate, PlantedTokenDominates) {
  auto cfg = MockModelConfig::sigmoid_default(2);
  cfg.token_effects = {{"dreadful", -0.4}, {"long", -0.05}};
  cfg.token_base = 0.8;
  auto gw = gateway_for(cfg);
  const std::string text = "the film was dreadful and far too long";
  const auto ts = token_surrogate(gw, text, 50, 3);
  EXPECT_EQ(ts.model.n_samples, 50u);
  EXPECT_EQ(ts.tokens.size(), 8u);
  std::size_t best = 0;
  for (std::size_t j = 1; j < ts.tokens.size(); ++j) {
    if (std::abs(ts.model.beta[j]) > std::abs(ts.model.beta[best])) best = j;
  }
  EXPECT_EQ(ts.tokens[best], "dreadful");
  EXPECT_NEAR(ts.model.beta[best], -0.4, 1e-9);
  EXPECT_NEAR(predict_tokens(ts, text).probability, 0.35, 1e-9);
  EXPECT_EQ(ts, token_surrogate(gw, text, 50, 3));
}

TEST(TokenSurrogate, DeletionProbabilitiesStayInRange) {
  auto cfg = MockModelConfig::sigmoid_default(2);
  cfg.token_effects = {{"b", 0.1}};
  auto gw = gateway_for(cfg);
  const auto ts = token_surrogate(gw, "a b c", 10000, 11);
  ASSERT_EQ(ts.deletion_probabilities.size(), 10000u);
  for (double q : ts.deletion_probabilities) {
    EXPECT_GE(q, kMinDeletionProbability);
    EXPECT_LE(q, kMaxDeletionProbability);
  }
}

TEST(TokenSurrogate, ArgumentChecks) {
  auto gw = gateway_for(MockModelConfig::sigmoid_default(2));
  EXPECT_THROW(token_surrogate(gw, "single", 50, 1), ParameterError);
  EXPECT_THROW(token_surrogate(gw, "two tokens", 1, 1), ParameterError);
}

TEST(Rewrites, MockRoundTrip) {
  auto cfg = MockModelConfig::sigmoid_default(3);
  auto gw = gateway_for(cfg);
  const FactorSet set{cfg.factors, FactorSource::kAggregated, 3};
  const std::vector<double> deltas = {0.1, -0.2, 0.0};
  const auto out = rewrite_text(gw, "plain text", set, WeightVector{cfg.w0}, deltas);
  EXPECT_EQ(out, "plain text" + MockModel::rewrite_marker(deltas));
  EXPECT_EQ(out, rewrite_text(gw, "plain text", set, WeightVector{cfg.w0}, deltas));
  const std::vector<double> zeros = {0.0, 0.0, 0.0};
  EXPECT_THROW(rewrite_text(gw, "plain text", set, WeightVector{cfg.w0}, zeros), ParameterError);
}

TEST(Rewrites, GeneratedCasesCarryModelAndSurrogateProbabilities) {
  auto cfg = MockModelConfig::sigmoid_default(3);
  cfg.surface.a = {2.0, -1.0, 0.5};
  cfg.surface.b = 0.0;
  auto gw = gateway_for(cfg);
  const FactorSet set{cfg.factors, FactorSource::kAggregated, 3};
  const SeedObservation obs{WeightVector{cfg.w0}, 0.5};
  SurrogateModel s;
  s.beta = {0.5, -0.25, 0.125};
  s.intercept = 0.3;
  const auto batch = generate_rewrites(gw, "some text", set, obs, s, 0.2, 20, 4);
  ASSERT_EQ(batch.cases.size(), 20u);
  EXPECT_TRUE(batch.failures.empty());
  for (std::size_t i = 0; i < batch.cases.size(); ++i) {
    const auto& c = batch.cases[i];
    EXPECT_EQ(c.sample_index, kRewriteIndexBase + i);
    for (std::size_t j = 0; j < 3; ++j) {
      EXPECT_LE(std::abs(c.deltas[j]), 0.2);
      EXPECT_NEAR(c.w_rewritten.values[j], cfg.w0[j] * (1.0 + c.deltas[j]), 1e-12);
    }
    EXPECT_NEAR(c.p_model, cfg.surface.mean(c.w_rewritten), 1e-12);
    EXPECT_DOUBLE_EQ(c.p_surrogate, predict(s, c.w_rewritten).probability);
  }
  EXPECT_EQ(batch.cases, generate_rewrites(gw, "some text", set, obs, s, 0.2, 20, 4).cases);
}

}  // namespace
}  // namespace lamp
