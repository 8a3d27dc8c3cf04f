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

// Audit sessions on disk: one canonical JSON file per session plus a
// JSON-lines index for listing.

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "lamp/curvature.hpp"
#include "lamp/diagnostics.hpp"
#include "lamp/evaluation.hpp"
#include "lamp/factors.hpp"
#include "lamp/gateway.hpp"
#include "lamp/probe.hpp"
#include "lamp/prompts.hpp"

namespace lamp {

inline constexpr std::string_view kSchemaVersion = "1";

enum class SessionStatus { kFinal, kDraft };

struct ProbeParameters {
  double delta = 0.3;
  std::size_t m = kDefaultPerturbations;
  double lambda = 0.0;
  std::uint64_t seed = 0;
  std::size_t repeats = kDefaultExplainRepeats;
  std::size_t n_target = kDefaultFactorTarget;
  TruncationNorm norm = TruncationNorm::kSup;

  bool operator==(const ProbeParameters&) const = default;
};

struct SessionDiagnostics {
  // Empty when the fit is exact (BIC is minus infinity).
  std::optional<double> bic;
  std::optional<LinearityTestResult> linearity;
  double centered_r2 = 0.0;
  bool centered_r2_defined = false;

  bool operator==(const SessionDiagnostics&) const = default;
};

struct AuditSession {
  std::string schema_version{kSchemaVersion};
  std::string id;
  std::string created_at;  // ISO-8601, UTC
  SessionStatus status = SessionStatus::kFinal;
  std::string failed_stage;  // drafts only
  std::string error;         // drafts only

  EndpointConfig endpoint;
  TaskTemplate task;
  std::string text;
  ProbeParameters probe;

  std::optional<FactorSet> factors;
  std::optional<SeedObservation> seed;
  std::vector<ProbeSample> samples;
  std::vector<std::size_t> dropped_samples;  // failed relabel indices
  std::optional<SurrogateModel> surrogate_full;  // before truncation
  std::optional<SurrogateModel> surrogate;       // reported surrogate
  std::vector<SurrogateModel> repeat_surrogates;
  std::optional<CurvatureEstimate> curvature;
  std::optional<OptimalRadius> delta_star;
  std::optional<TruncationReport> truncation;
  SessionDiagnostics diagnostics;
  std::vector<RewriteCase> rewrites;
  std::optional<EvalReport> evaluation;
  std::vector<std::string> warnings;
  std::vector<TranscriptEntry> transcript;

  bool finalized() const noexcept { return status == SessionStatus::kFinal; }
  bool operator==(const AuditSession&) const = default;
};

// Canonical JSON: sorted keys, shortest round-trip floats, two-space indent,
// non-finite numbers as null.
std::string serialize_session(const AuditSession& session);
// Throws MigrationError on a missing or unknown schema_version and
// CorruptSessionError naming the first invalid field.
AuditSession parse_session(std::string_view json_text);

// Atomic: writes a sibling temporary file and renames it over `path`.
void save_session(const AuditSession& session, const std::filesystem::path& path);
AuditSession load_session(const std::filesystem::path& path);

// Identifiers are non-empty and use only [A-Za-z0-9_-].
bool valid_session_id(std::string_view id);

struct IndexEntry {
  std::string id;
  std::string created_at;
  std::string task;
  std::string status;
  std::string excerpt;
  std::optional<double> r_squared;
  std::optional<double> delta_star;
  std::optional<double> seed_probability;
  std::size_t factor_count = 0;

  bool operator==(const IndexEntry&) const = default;
};

IndexEntry index_entry(const AuditSession& session);

// A directory of `<id>.json` files plus `index.jsonl`. Index appends hold an
// exclusive advisory lock.
class SessionStore {
 public:
  explicit SessionStore(std::filesystem::path dir);

  const std::filesystem::path& dir() const noexcept { return dir_; }
  std::filesystem::path path_for(std::string_view id) const;

  std::filesystem::path save(const AuditSession& session) const;
  AuditSession load(std::string_view id) const;
  bool contains(std::string_view id) const;
  // Latest index line per id, in first-seen order.
  std::vector<IndexEntry> list() const;

 private:
  void append_index(const IndexEntry& entry) const;

  std::filesystem::path dir_;
};

enum class ReportFormat { kMarkdown, kJson };

ReportFormat report_format_from_name(std::string_view name);
std::string emit_report(const AuditSession& session, ReportFormat format);

// Tail-bin profile over finalized sessions with a surrogate.
TailProfile session_tail_profile(std::span<const AuditSession> sessions);

}  // namespace lamp
