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


#include <Eigen/Dense>
#include <gtest/gtest.h>

#include <filesystem>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>
#include <unistd.h>

#include "lamp/service.hpp"

namespace lamp {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

class ServiceTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("lamp_service_" + std::to_string(::getpid()));
    fs::remove_all(dir_);
    const SessionStore store(dir_);
    AuditConfig cfg;
    cfg.seed = 42;
    cfg.created_at = "2026-05-06T07:08:09Z";
    cfg.session_id = "fixture";
    mock_ = MockModelConfig::sigmoid_default(5, 0.01, 42);
    AuditHooks hooks;
    hooks.store = &store;
    session_ = run_audit(cfg, "A sharp, funny and humane comedy.",
                         std::make_shared<MockModel>(mock_), hooks);

    ServiceOptions opts;
    opts.session_dir = dir_;
    opts.mock = mock_;
    opts.audit_defaults.created_at = "2026-05-06T07:08:09Z";
    service_ = std::make_unique<AuditService>(opts);
  }
  void TearDown() override {
    service_.reset();
    fs::remove_all(dir_);
  }

  std::string whatif_body(const std::vector<double>& w) const {
    return json{{"weights", w}}.dump();
  }

  fs::path dir_;
  MockModelConfig mock_;
  AuditSession session_;
  std::unique_ptr<AuditService> service_;
};

TEST_F(ServiceTest, ListsAndFetchesSessions) {
  const auto list = service_->list_sessions();
  EXPECT_EQ(list.status, 200);
  const auto j = json::parse(list.body);
  ASSERT_EQ(j.size(), 1u);
  EXPECT_EQ(j[0]["id"], "fixture");
  EXPECT_EQ(j[0]["factor_count"], 5);

  const auto got = service_->get_session("fixture");
  EXPECT_EQ(got.status, 200);
  EXPECT_EQ(got.body, serialize_session(session_));
  EXPECT_EQ(service_->get_session("missing").status, 404);
  EXPECT_EQ(service_->get_session("../etc").status, 404);
}

TEST_F(ServiceTest, WhatIfAtSeedMatchesSurrogate) {
  const auto r = service_->whatif("fixture", whatif_body(session_.seed->w0.values));
  ASSERT_EQ(r.status, 200);
  const auto j = json::parse(r.body);
  const auto expected = predict(*session_.surrogate, session_.seed->w0);
  EXPECT_DOUBLE_EQ(j["probability"].get<double>(), expected.probability);
  EXPECT_DOUBLE_EQ(j["raw"].get<double>(), expected.raw);
  EXPECT_EQ(j["clamped"].get<bool>(), expected.clamped);
}

TEST_F(ServiceTest, WhatIfValidation) {
  auto check = [&](const std::string& body, const std::string& field) {
    const auto r = service_->whatif("fixture", body);
    EXPECT_EQ(r.status, 400) << body;
    const auto j = json::parse(r.body);
    ASSERT_TRUE(j.contains("fields")) << r.body;
    EXPECT_TRUE(j["fields"].contains(field)) << r.body;
  };
  check(whatif_body({0.5, 0.5}), "weights");
  check(R"({"weights":[0.5,0.5,"x",0.5,0.5]})", "weights[2]");
  check(whatif_body({0.5, -0.1, 0.5, 0.5, 0.5}), "weights[1]");
  check(R"({})", "weights");
  check("not json", "body");
  EXPECT_EQ(service_->whatif("missing", whatif_body({0.5})).status, 404);
}

TEST_F(ServiceTest, ConcurrentWhatIfOverHttp) {
  const int port = service_->start("127.0.0.1", 0);
  ASSERT_GT(port, 0);
  const auto body = whatif_body(session_.seed->w0.values);
  std::vector<std::string> answers(8);
  std::vector<int> statuses(8, 0);
  std::vector<std::thread> threads;
  for (int i = 0; i < 8; ++i) {
    threads.emplace_back([&, i] {
      httplib::Client cli("127.0.0.1", port);
      const auto res = cli.Post("/api/sessions/fixture/whatif", body, "application/json");
      if (res) {
        statuses[i] = res->status;
        answers[i] = res->body;
      }
    });
  }
  for (auto& t : threads) t.join();
  for (int i = 0; i < 8; ++i) {
    EXPECT_EQ(statuses[i], 200);
    EXPECT_EQ(answers[i], answers[0]);
  }
  httplib::Client cli("127.0.0.1", port);
  const auto page = cli.Get("/");
  ASSERT_TRUE(page);
  EXPECT_EQ(page->status, 200);
  const auto list = cli.Get("/api/sessions");
  ASSERT_TRUE(list);
  EXPECT_EQ(json::parse(list->body).size(), 1u);
  EXPECT_EQ(cli.Get("/api/sessions/nope")->status, 404);
  service_->stop();
}

TEST_F(ServiceTest, AuditJobsRunInTheBackground) {
  const auto bad = service_->submit_audit(R"({"delta": 0.2})");
  EXPECT_EQ(bad.status, 400);
  EXPECT_TRUE(json::parse(bad.body)["fields"].contains("text"));
  EXPECT_EQ(service_->submit_audit(R"({"text": "x", "task": "poetry"})").status, 400);

  const auto ok = service_->submit_audit(R"({"text": "A tender, slow film.", "seed": 3})");
  ASSERT_EQ(ok.status, 202);
  const auto job_id = json::parse(ok.body)["job_id"].get<std::string>();
  service_->drain();
  const auto status = json::parse(service_->job_status(job_id).body);
  EXPECT_EQ(status["status"], "done");
  ASSERT_TRUE(status["session_id"].is_string());
  const auto sid = status["session_id"].get<std::string>();
  EXPECT_EQ(service_->get_session(sid).status, 200);
  EXPECT_EQ(json::parse(service_->list_sessions().body).size(), 2u);
  EXPECT_EQ(service_->job_status("job-999").status, 404);
}

TEST_F(ServiceTest, FailedJobReportsStage) {
  const auto r = service_->submit_audit(R"({"text": "Fine.", "m": 3})");
  ASSERT_EQ(r.status, 202);
  service_->drain();
  const auto status =
      json::parse(service_->job_status(json::parse(r.body)["job_id"].get<std::string>()).body);
  EXPECT_EQ(status["status"], "failed");
  EXPECT_EQ(status["stage"], "aggregate");
  EXPECT_TRUE(status["error"].is_string());
}

}  // namespace
}  // namespace lamp
