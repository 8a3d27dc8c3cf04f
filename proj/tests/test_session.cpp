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

#include <atomic>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include <unistd.h>

#include <nlohmann/json.hpp>

#include "lamp/audit.hpp"
#include "lamp/error.hpp"
#include "lamp/session.hpp"

namespace lamp {
namespace {

namespace fs = std::filesystem;

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class TempDir {
 public:
  explicit TempDir(const std::string& name)
      : path_(fs::temp_directory_path() / ("lamp_" + name + "_" + std::to_string(::getpid()))) {
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

const AuditSession& evaluated_session() {
  static const AuditSession s = [] {
    AuditConfig cfg;
    cfg.seed = 42;
    cfg.evaluate = true;
    cfg.token_baseline = true;
    cfg.embed_transcript = true;
    cfg.created_at = "2026-01-02T03:04:05Z";
    const auto mock = MockModelConfig::sigmoid_default(5, 0.01, 42);
    return run_audit(cfg, "A quietly moving film with a weak final act.",
                     std::make_shared<MockModel>(mock));
  }();
  return s;
}

AuditSession small_session() {
  AuditSession s;
  s.id = "report-test";
  s.created_at = "2026-01-01T00:00:00Z";
  s.task = TaskTemplate::preset("sentiment");
  s.text = "short text";
  s.factors = FactorSet{{"mild", "strong negative", "strong positive"}, FactorSource::kAggregated, 3};
  s.seed = SeedObservation{WeightVector{{0.3, 0.3, 0.4}}, 0.6};
  SurrogateModel m;
  m.beta = {0.05, -0.2, 0.3};
  m.intercept = 0.4;
  m.r_squared = 0.9;
  m.n_samples = 50;
  s.surrogate = m;
  return s;
}

TEST(SessionJson, RoundTrip) {
  const auto& s = evaluated_session();
  ASSERT_TRUE(s.evaluation.has_value());
  ASSERT_FALSE(s.transcript.empty());
  EXPECT_EQ(parse_session(serialize_session(s)), s);
}

TEST(SessionJson, SaveTwiceIsByteIdentical) {
  TempDir dir("bytes");
  const auto& s = evaluated_session();
  save_session(s, dir.path() / "a.json");
  save_session(s, dir.path() / "b.json");
  const auto a = read_file(dir.path() / "a.json");
  EXPECT_EQ(a, read_file(dir.path() / "b.json"));
  EXPECT_EQ(a, serialize_session(s));
  EXPECT_EQ(load_session(dir.path() / "a.json"), s);
  EXPECT_EQ(a.back(), '\n');
}

TEST(SessionJson, KeysAreSorted) {
  const auto j = nlohmann::json::parse(serialize_session(small_session()));
  std::string prev;
  for (const auto& [k, v] : j.items()) {
    EXPECT_LT(prev, k);
    prev = k;
  }
}

TEST(SessionJson, OutOfRangeProbabilityNamesTheField) {
  auto j = nlohmann::json::parse(serialize_session(evaluated_session()));
  j["samples"][1]["probability"] = 1.7;
  try {
    parse_session(j.dump());
    FAIL() << "expected CorruptSessionError";
  } catch (const CorruptSessionError& e) {
    EXPECT_EQ(e.field(), "samples[1].probability");
  }
}

TEST(SessionJson, WrongTypeNamesTheField) {
  auto j = nlohmann::json::parse(serialize_session(small_session()));
  j["surrogate"]["beta"] = "not an array";
  try {
    parse_session(j.dump());
    FAIL() << "expected CorruptSessionError";
  } catch (const CorruptSessionError& e) {
    EXPECT_EQ(e.field(), "surrogate.beta");
  }
}

TEST(SessionJson, DimensionMismatchIsCorrupt) {
  auto j = nlohmann::json::parse(serialize_session(small_session()));
  j["surrogate"]["beta"] = {0.1, 0.2};
  EXPECT_THROW(parse_session(j.dump()), CorruptSessionError);
}

TEST(SessionJson, SchemaVersionChecks) {
  auto j = nlohmann::json::parse(serialize_session(small_session()));
  j.erase("schema_version");
  EXPECT_THROW(parse_session(j.dump()), MigrationError);
  j["schema_version"] = "999";
  EXPECT_THROW(parse_session(j.dump()), MigrationError);
  EXPECT_THROW(parse_session("not json"), CorruptSessionError);
}

TEST(SessionFiles, ConcurrentReadersNeverSeePartialWrites) {
  TempDir dir("atomic");
  const auto path = dir.path() / "s.json";
  const auto a = evaluated_session();
  const auto b = small_session();
  save_session(a, path);
  std::atomic<bool> done{false};
  std::atomic<int> bad{0};
  std::thread reader([&] {
    while (!done.load()) {
      try {
        const auto s = load_session(path);
        if (s != a && s != b) ++bad;
      } catch (const Error&) {
        ++bad;
      }
    }
  });
  for (int i = 0; i < 200; ++i) save_session(i % 2 ? a : b, path);
  done = true;
  reader.join();
  EXPECT_EQ(bad.load(), 0);
  std::size_t files = 0;
  for (const auto& e : fs::directory_iterator(dir.path())) {
    (void)e;
    ++files;
  }
  EXPECT_EQ(files, 1u);
}

TEST(SessionFiles, FailedWriteLeavesTargetAndNoTemporaries) {
  TempDir dir("failed");
  const auto target = dir.path() / "occupied";
  fs::create_directories(target / "child");
  EXPECT_THROW(save_session(small_session(), target), IoError);
  EXPECT_TRUE(fs::is_directory(target / "child"));
  std::size_t files = 0;
  for (const auto& e : fs::directory_iterator(dir.path())) {
    (void)e;
    ++files;
  }
  EXPECT_EQ(files, 1u);
  EXPECT_THROW(load_session(dir.path() / "missing.json"), IoError);
}

TEST(SessionStore, IndexKeepsLatestEntryPerId) {
  TempDir dir("store");
  const SessionStore store(dir.path());
  auto a = small_session();
  a.id = "alpha";
  auto b = small_session();
  b.id = "beta";
  store.save(a);
  store.save(b);
  a.surrogate->r_squared = 0.5;
  store.save(a);
  const auto list = store.list();
  ASSERT_EQ(list.size(), 2u);
  EXPECT_EQ(list[0].id, "alpha");
  EXPECT_DOUBLE_EQ(*list[0].r_squared, 0.5);
  EXPECT_EQ(list[1].id, "beta");
  EXPECT_EQ(list[1].factor_count, 3u);
  EXPECT_DOUBLE_EQ(*list[1].seed_probability, 0.6);
  EXPECT_TRUE(store.contains("alpha"));
  EXPECT_FALSE(store.contains("gamma"));
  EXPECT_EQ(store.load("alpha"), a);
  EXPECT_THROW(store.load("../escape"), ParameterError);
}

TEST(SessionStore, IdValidation) {
  EXPECT_TRUE(valid_session_id("sentiment-0123abcd_eval"));
  EXPECT_FALSE(valid_session_id(""));
  EXPECT_FALSE(valid_session_id("a/b"));
  EXPECT_FALSE(valid_session_id("a.json"));
  EXPECT_FALSE(valid_session_id(std::string(129, 'a')));
}

TEST(Report, CoefficientsSortedByMagnitudeWithDirection) {
  const auto md = emit_report(small_session(), ReportFormat::kMarkdown);
  const auto p1 = md.find("| 1 | strong positive | +0.3000 | raises |");
  const auto p2 = md.find("| 2 | strong negative | -0.2000 | lowers |");
  const auto p3 = md.find("| 3 | mild | +0.0500 | raises |");
  ASSERT_NE(p1, std::string::npos);
  ASSERT_NE(p2, std::string::npos);
  ASSERT_NE(p3, std::string::npos);
  EXPECT_LT(p1, p2);
  EXPECT_LT(p2, p3);
}

TEST(Report, UnevaluatedSessionSaysSo) {
  const auto md = emit_report(small_session(), ReportFormat::kMarkdown);
  const auto section = md.find("## Counterfactual evaluation");
  ASSERT_NE(section, std::string::npos);
  EXPECT_NE(md.find("not evaluated", section), std::string::npos);
  const auto evaluated = emit_report(evaluated_session(), ReportFormat::kMarkdown);
  EXPECT_EQ(evaluated.find("not evaluated"), std::string::npos);
  EXPECT_NE(evaluated.find("| uniform_baseline |"), std::string::npos);
}

TEST(Report, JsonIsParseableAndStable) {
  const auto text = emit_report(evaluated_session(), ReportFormat::kJson);
  const auto j = nlohmann::json::parse(text);
  EXPECT_EQ(text, emit_report(evaluated_session(), ReportFormat::kJson));
  for (const char* key : {"id", "status", "coefficients", "intercept", "r_squared", "delta_star",
                          "bic", "evaluation", "warnings", "seed_probability"}) {
    EXPECT_TRUE(j.contains(key)) << key;
  }
  EXPECT_EQ(j["coefficients"].size(), 5u);
  EXPECT_TRUE(j["evaluation"]["brier"].contains("surrogate"));
  EXPECT_TRUE(nlohmann::json::parse(emit_report(small_session(), ReportFormat::kJson))["evaluation"]
                  .is_null());
  EXPECT_EQ(report_format_from_name("json"), ReportFormat::kJson);
  EXPECT_THROW(report_format_from_name("pdf"), ParameterError);
}

TEST(TailProfileOfSessions, BinsBySeedProbability) {
  std::vector<AuditSession> sessions;
  for (double p : {0.05, 0.2, 0.5, 0.9}) {
    auto s = small_session();
    s.seed->p0 = p;
    sessions.push_back(s);
  }
  auto draft = small_session();
  draft.status = SessionStatus::kDraft;
  sessions.push_back(draft);
  const auto prof = session_tail_profile(sessions);
  EXPECT_EQ(prof.bin(ProbabilityBin::kLowTail).count, 1u);
  EXPECT_EQ(prof.bin(ProbabilityBin::kMiddle).count, 2u);
  EXPECT_EQ(prof.bin(ProbabilityBin::kHighTail).count, 1u);
}

}  // namespace
}  // namespace lamp
