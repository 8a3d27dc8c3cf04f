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

#include <cstdlib>
#include <filesystem>

#include <unistd.h>

#include "lamp/audit.hpp"
#include "lamp/error.hpp"

namespace lamp {
namespace {

namespace fs = std::filesystem;

const std::string kText = "An uneven thriller carried by two strong lead performances.";

AuditConfig base_config(std::uint64_t seed = 42) {
  AuditConfig cfg;
  cfg.seed = seed;
  cfg.created_at = "2026-03-04T05:06:07Z";
  return cfg;
}

TEST(RunAudit, BitReproducible) {
  const auto mock = MockModelConfig::sigmoid_default(5, 0.01, 42);
  auto cfg = base_config();
  cfg.evaluate = true;
  const auto a = run_audit(cfg, kText, std::make_shared<MockModel>(mock));
  const auto b = run_audit(cfg, kText, std::make_shared<MockModel>(mock));
  EXPECT_EQ(serialize_session(a), serialize_session(b));
  EXPECT_TRUE(a.finalized());
  EXPECT_EQ(a.id.rfind("sentiment-", 0), 0u);
  cfg.seed = 43;
  const auto c = run_audit(cfg, kText, std::make_shared<MockModel>(mock));
  EXPECT_NE(serialize_session(a), serialize_session(c));
}

TEST(RunAudit, LinearSurfaceFitsAlmostPerfectly) {
  auto mock = MockModelConfig::sigmoid_default(5, 0.01, 7);
  mock.surface.family = SurfaceFamily::kLinear;
  mock.surface.a.assign(5, 0.6);
  mock.surface.b = 0.5 - 0.6 * 2.5;
  const auto s = run_audit(base_config(), kText, std::make_shared<MockModel>(mock));
  ASSERT_TRUE(s.surrogate.has_value());
  EXPECT_GE(s.surrogate->r_squared, 0.99);
  for (double b : s.surrogate->beta) EXPECT_NEAR(b, 0.6, 0.05);
}

TEST(RunAudit, PipelineShape) {
  const auto mock = MockModelConfig::sigmoid_default(5, 0.01, 1);
  std::vector<std::string> stages;
  AuditHooks hooks;
  hooks.on_stage = [&](std::string_view st) { stages.emplace_back(st); };
  auto cfg = base_config();
  cfg.evaluate = true;
  const auto s = run_audit(cfg, kText, std::make_shared<MockModel>(mock), hooks);
  EXPECT_EQ(stages, (std::vector<std::string>{"elicit", "aggregate", "seed", "probe", "fit",
                                              "curvature", "truncate", "diagnostics",
                                              "evaluate"}));
  ASSERT_TRUE(s.factors.has_value());
  EXPECT_EQ(s.factors->size(), 5u);
  EXPECT_EQ(s.samples.size(), 51u);
  EXPECT_TRUE(s.samples.front().is_seed());
  EXPECT_EQ(s.samples.front().index, 0u);
  EXPECT_DOUBLE_EQ(s.samples.front().probability, s.seed->p0);
  EXPECT_TRUE(s.curvature.has_value());
  EXPECT_TRUE(s.delta_star.has_value());
  ASSERT_TRUE(s.evaluation.has_value());
  EXPECT_EQ(s.evaluation->n_cases, kDefaultRewriteCount);
  EXPECT_EQ(s.rewrites.size(), kDefaultRewriteCount);
  EXPECT_TRUE(s.transcript.size() > 60u);
}

TEST(RunAudit, ZeroRadiusFailsBeforeAnyCall) {
  auto model = std::make_shared<MockModel>(MockModelConfig::sigmoid_default(5));
  auto cfg = base_config();
  cfg.delta = 0.0;
  EXPECT_THROW(run_audit(cfg, kText, model), ParameterError);
  EXPECT_EQ(model->calls(), 0u);
  cfg.delta = 0.3;
  EXPECT_THROW(run_audit(cfg, "   ", model), ParameterError);
  EXPECT_EQ(model->calls(), 0u);
}

TEST(RunAudit, TooFewPerturbationsForTheFactorCount) {
  auto cfg = base_config();
  cfg.m = 5;
  try {
    run_audit(cfg, kText, std::make_shared<MockModel>(MockModelConfig::sigmoid_default(5)));
    FAIL() << "expected StageError";
  } catch (const StageError& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kParameter);
    EXPECT_EQ(e.stage(), "aggregate");
  }
}

TEST(RunAudit, DroppedSampleIsRecordedAndFitProceeds) {
  auto mock = MockModelConfig::sigmoid_default(5, 0.01, 3);
  mock.fail_indices = {17};
  const auto s = run_audit(base_config(), kText, std::make_shared<MockModel>(mock));
  EXPECT_EQ(s.dropped_samples, std::vector<std::size_t>{17});
  EXPECT_EQ(s.samples.size(), 50u);
  EXPECT_EQ(s.surrogate_full->n_samples, 50u);
  for (const auto& smp : s.samples) EXPECT_NE(smp.index, 17u);
}

TEST(RunAudit, FailureSavesADraft) {
  const auto dir = fs::temp_directory_path() / ("lamp_draft_" + std::to_string(::getpid()));
  fs::remove_all(dir);
  const SessionStore store(dir);
  auto mock = MockModelConfig::sigmoid_default(3);
  for (std::size_t i = 1; i <= 50; ++i) mock.fail_indices.insert(i);
  AuditHooks hooks;
  hooks.store = &store;
  try {
    run_audit(base_config(), kText, std::make_shared<MockModel>(mock), hooks);
    FAIL() << "expected StageError";
  } catch (const StageError& e) {
    EXPECT_EQ(e.stage(), "probe");
    EXPECT_EQ(e.kind(), ErrorKind::kEndpoint);
    EXPECT_FALSE(e.draft().finalized());
    const auto saved = store.load(e.draft().id);
    EXPECT_EQ(saved, e.draft());
    EXPECT_EQ(saved.failed_stage, "probe");
    EXPECT_TRUE(saved.factors.has_value());
    ASSERT_EQ(store.list().size(), 1u);
    EXPECT_EQ(store.list()[0].status, "draft");
  }
  fs::remove_all(dir);
}

TEST(RunAudit, SurrogateRepeatsAreIndependent) {
  auto cfg = base_config();
  cfg.surrogate_repeats = 3;
  const auto s = run_audit(cfg, kText,
                           std::make_shared<MockModel>(MockModelConfig::sigmoid_default(5, 0.02, 5)));
  ASSERT_EQ(s.repeat_surrogates.size(), 2u);
  EXPECT_NE(s.repeat_surrogates[0].beta, s.surrogate_full->beta);
  EXPECT_NE(s.repeat_surrogates[0].beta, s.repeat_surrogates[1].beta);
}

TEST(EvaluateSession, AddsEvaluationUnderANewId) {
  const auto mock = MockModelConfig::sigmoid_default(5, 0.01, 8);
  const auto s = run_audit(base_config(), kText, std::make_shared<MockModel>(mock));
  ASSERT_FALSE(s.evaluation.has_value());
  const auto e = evaluate_session(s, std::make_shared<MockModel>(mock), 10, true, 30);
  EXPECT_EQ(e.id, s.id + "-eval");
  ASSERT_TRUE(e.evaluation.has_value());
  EXPECT_EQ(e.evaluation->n_cases, 10u);
  EXPECT_NE(e.evaluation->find(kTokenSurrogate), nullptr);
  EXPECT_EQ(e.surrogate, s.surrogate);
}

TEST(AuditConfig, Validation) {
  AuditConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  cfg.alpha = 1.5;
  EXPECT_THROW(cfg.validate(), ParameterError);
  cfg = AuditConfig{};
  cfg.lambda = -1.0;
  EXPECT_THROW(cfg.validate(), ParameterError);
  cfg = AuditConfig{};
  cfg.repeats = 0;
  EXPECT_THROW(cfg.validate(), ParameterError);
}

TEST(Timestamps, SourceDateEpochOverridesTheClock) {
  ::setenv("SOURCE_DATE_EPOCH", "86400", 1);
  EXPECT_EQ(current_timestamp(), "1970-01-02T00:00:00Z");
  ::setenv("SOURCE_DATE_EPOCH", "yesterday", 1);
  EXPECT_THROW(current_timestamp(), ParameterError);
  ::unsetenv("SOURCE_DATE_EPOCH");
  EXPECT_EQ(current_timestamp().size(), 20u);
}

TEST(MakeTransport, MockNeedsNoCredentials) {
  EndpointConfig ep;
  const auto t = make_transport(ep, MockModelConfig::sigmoid_default(2));
  EXPECT_NE(dynamic_cast<MockModel*>(t.get()), nullptr);
}

}  // namespace
}  // namespace lamp
