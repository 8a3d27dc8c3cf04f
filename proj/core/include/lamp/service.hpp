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

// Read and what-if HTTP API over a session directory, plus an audit job
// queue.
//
//   GET  /api/sessions               index entries
//   GET  /api/sessions/{id}          full session
//   POST /api/sessions/{id}/whatif   {"weights": [...]} -> {probability, clamped, raw}
//   POST /api/audit                  {"text": ..., ...} -> {"job_id": ...}
//   GET  /api/jobs/{id}              job status
//   GET  /                           static UI assets

#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include "lamp/audit.hpp"
#include "lamp/mock.hpp"

namespace lamp {

struct ServiceOptions {
  std::filesystem::path session_dir;
  std::optional<std::filesystem::path> static_dir;
  // Template for submitted audits; request fields override it.
  AuditConfig audit_defaults;
  std::optional<MockModelConfig> mock;
};

struct HttpResult {
  int status = 200;
  std::string body;  // JSON
};

class AuditService {
 public:
  explicit AuditService(ServiceOptions options);
  ~AuditService();
  AuditService(const AuditService&) = delete;
  AuditService& operator=(const AuditService&) = delete;

  // Binds and serves on a background thread. Port 0 picks a free port.
  // Returns the bound port.
  int start(const std::string& host, int port);
  // Blocks until stop() is called from another thread.
  void wait();
  void stop();

  // Route handlers, callable without a socket.
  HttpResult list_sessions() const;
  HttpResult get_session(const std::string& id) const;
  HttpResult whatif(const std::string& id, const std::string& body) const;
  HttpResult submit_audit(const std::string& body);
  HttpResult job_status(const std::string& id) const;
  // Blocks until the job queue is empty.
  void drain();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace lamp
