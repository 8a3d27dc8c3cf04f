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

// The end-to-end audit: factor elicitation, probing, surrogate and curvature
// fits, truncation, diagnostics and optional counterfactual evaluation.

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <string_view>

#include "lamp/curvature.hpp"
#include "lamp/error.hpp"
#include "lamp/gateway.hpp"
#include "lamp/mock.hpp"
#include "lamp/prompts.hpp"
#include "lamp/session.hpp"

namespace lamp {

struct AuditConfig {
  EndpointConfig endpoint;
  TaskTemplate task = TaskTemplate::preset("sentiment");
  double delta = 0.3;
  std::size_t m = kDefaultPerturbations;
  std::size_t repeats = kDefaultExplainRepeats;
  std::size_t n_target = kDefaultFactorTarget;
  double lambda = 0.0;
  std::uint64_t seed = 0;
  TruncationNorm norm = TruncationNorm::kSup;
  double alpha = 0.05;
  // Extra independent probe rounds, each fitted and stored separately.
  std::size_t surrogate_repeats = 1;

  bool evaluate = false;
  std::size_t rewrite_count = kDefaultRewriteCount;
  bool token_baseline = false;
  std::size_t token_perturbations = kDefaultPerturbations;

  bool embed_transcript = false;
  // Overrides the clock. Otherwise SOURCE_DATE_EPOCH, then the current time.
  std::optional<std::string> created_at;
  std::optional<std::string> session_id;

  // Checks everything that does not depend on the factor count.
  void validate() const;
};

// A stage of run_audit failed. Carries the kind of the underlying error and
// the draft session written for it, if any.
class StageError : public Error {
 public:
  StageError(ErrorKind kind, std::string stage, const std::string& what, AuditSession draft)
      : Error(kind, "audit stage '" + stage + "' failed: " + what),
        stage_(std::move(stage)),
        draft_(std::move(draft)) {}

  const std::string& stage() const noexcept { return stage_; }
  const AuditSession& draft() const noexcept { return draft_; }

 private:
  std::string stage_;
  AuditSession draft_;
};

struct AuditHooks {
  std::function<void(std::string_view stage)> on_stage;
  // When set, the finalized session or the failure draft is saved here.
  const SessionStore* store = nullptr;
};

AuditSession run_audit(const AuditConfig& config, const std::string& text,
                       std::shared_ptr<ChatTransport> transport, const AuditHooks& hooks = {});

// Counterfactual evaluation of an existing finalized session. Returns a new
// session with id `<id>-eval`; the input is left untouched.
AuditSession evaluate_session(const AuditSession& session, std::shared_ptr<ChatTransport> transport,
                              std::size_t rewrite_count, bool token_baseline,
                              std::size_t token_perturbations = kDefaultPerturbations);

// A mock transport for EndpointKind::kMock, or an HTTP transport using
// LAMP_API_KEY from the environment.
std::shared_ptr<ChatTransport> make_transport(const EndpointConfig& endpoint,
                                              const std::optional<MockModelConfig>& mock);

// ISO-8601 UTC timestamp from SOURCE_DATE_EPOCH when set, else now.
std::string current_timestamp();

}  // namespace lamp
