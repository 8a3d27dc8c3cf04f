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


#include "lamp/service.hpp"

#include <cmath>
#include <condition_variable>
#include <deque>
#include <map>
#include <mutex>
#include <shared_mutex>
#include <thread>

#include <fmt/format.h>
#include <httplib.h>
#include <nlohmann/json.hpp>

#include "canonical_json.hpp"
#include "lamp/error.hpp"
#include "lamp/session.hpp"

namespace lamp {

using nlohmann::json;

namespace {

constexpr const char* kJson = "application/json";

constexpr const char* kPlaceholderPage = R"(<!doctype html>
<html><head><meta charset="utf-8"><title>lamp audit</title></head>
<body><h1>lamp audit service</h1>
<p>The UI bundle is not installed. The JSON API is available under <code>/api/</code>.</p>
</body></html>
)";

HttpResult error_result(int status, const std::string& message, json fields = nullptr) {
  json j = {{"error", message}};
  if (!fields.is_null()) j["fields"] = std::move(fields);
  return {status, j.dump()};
}

json index_json(const IndexEntry& e) {
  auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  return {{"id", e.id},
          {"created_at", e.created_at},
          {"task", e.task},
          {"status", e.status},
          {"excerpt", e.excerpt},
          {"r_squared", opt(e.r_squared)},
          {"delta_star", opt(e.delta_star)},
          {"seed_probability", opt(e.seed_probability)},
          {"factor_count", e.factor_count}};
}

enum class JobState { kQueued, kRunning, kDone, kFailed };

std::string_view state_name(JobState s) {
  switch (s) {
    case JobState::kQueued:
      return "queued";
    case JobState::kRunning:
      return "running";
    case JobState::kDone:
      return "done";
    case JobState::kFailed:
      return "failed";
  }
  return "failed";
}

struct Job {
  std::string id;
  JobState state = JobState::kQueued;
  std::string stage;
  std::string session_id;
  std::string error;
  AuditConfig config;
  std::string text;
};

}  // namespace

struct AuditService::Impl {
  explicit Impl(ServiceOptions opts) : options(std::move(opts)), store(options.session_dir) {}

  ServiceOptions options;
  SessionStore store;

  mutable std::shared_mutex cache_mutex;
  mutable std::map<std::string, std::shared_ptr<const AuditSession>> cache;

  std::mutex jobs_mutex;
  std::condition_variable jobs_cv;
  std::condition_variable idle_cv;
  std::deque<std::string> queue;
  std::map<std::string, Job> jobs;
  std::size_t next_job = 1;
  bool busy = false;
  bool stopping = false;
  std::shared_ptr<ChatTransport> transport;
  std::thread worker;

  httplib::Server server;
  std::thread server_thread;

  std::shared_ptr<const AuditSession> session(const std::string& id) const {
    {
      std::shared_lock lock(cache_mutex);
      if (const auto it = cache.find(id); it != cache.end()) return it->second;
    }
    if (!store.contains(id)) return nullptr;
    auto loaded = std::make_shared<const AuditSession>(store.load(id));
    std::unique_lock lock(cache_mutex);
    return cache.try_emplace(id, std::move(loaded)).first->second;
  }

  void forget(const std::string& id) {
    std::unique_lock lock(cache_mutex);
    cache.erase(id);
  }

  void work() {
    for (;;) {
      std::string job_id;
      AuditConfig config;
      std::string text;
      {
        std::unique_lock lock(jobs_mutex);
        jobs_cv.wait(lock, [&] { return stopping || !queue.empty(); });
        if (stopping) return;
        job_id = queue.front();
        queue.pop_front();
        busy = true;
        auto& job = jobs.at(job_id);
        job.state = JobState::kRunning;
        config = job.config;
        text = job.text;
      }

      AuditHooks hooks;
      hooks.store = &store;
      hooks.on_stage = [&](std::string_view stage) {
        std::lock_guard lock(jobs_mutex);
        jobs.at(job_id).stage = std::string(stage);
      };
      JobState state = JobState::kFailed;
      std::string session_id;
      std::string error;
      try {
        if (!transport) transport = make_transport(config.endpoint, options.mock);
        const auto s = run_audit(config, text, transport, hooks);
        session_id = s.id;
        state = JobState::kDone;
      } catch (const StageError& e) {
        session_id = e.draft().id;
        error = e.what();
      } catch (const std::exception& e) {
        error = e.what();
      }
      if (!session_id.empty()) forget(session_id);

      std::lock_guard lock(jobs_mutex);
      auto& job = jobs.at(job_id);
      job.state = state;
      job.session_id = session_id;
      job.error = error;
      busy = false;
      idle_cv.notify_all();
    }
  }

  void stop_worker() {
    {
      std::lock_guard lock(jobs_mutex);
      stopping = true;
    }
    jobs_cv.notify_all();
    if (worker.joinable()) worker.join();
  }
};

AuditService::AuditService(ServiceOptions options)
    : impl_(std::make_unique<Impl>(std::move(options))) {
  impl_->worker = std::thread([this] { impl_->work(); });

  auto& srv = impl_->server;
  auto reply = [](httplib::Response& res, const HttpResult& r) {
    res.status = r.status;
    res.set_content(r.body, kJson);
  };
  srv.Get("/api/sessions", [this, reply](const httplib::Request&, httplib::Response& res) {
    reply(res, list_sessions());
  });
  srv.Get(R"(/api/sessions/([^/]+))",
          [this, reply](const httplib::Request& req, httplib::Response& res) {
            reply(res, get_session(req.matches[1]));
          });
  srv.Post(R"(/api/sessions/([^/]+)/whatif)",
           [this, reply](const httplib::Request& req, httplib::Response& res) {
             reply(res, whatif(req.matches[1], req.body));
           });
  srv.Post("/api/audit", [this, reply](const httplib::Request& req, httplib::Response& res) {
    reply(res, submit_audit(req.body));
  });
  srv.Get(R"(/api/jobs/([^/]+))",
          [this, reply](const httplib::Request& req, httplib::Response& res) {
            reply(res, job_status(req.matches[1]));
          });
  if (impl_->options.static_dir) {
    if (!srv.set_mount_point("/", impl_->options.static_dir->string())) {
      throw IoError(fmt::format("static directory '{}' is not readable",
                                impl_->options.static_dir->string()));
    }
  } else {
    srv.Get("/", [](const httplib::Request&, httplib::Response& res) {
      res.set_content(kPlaceholderPage, "text/html");
    });
  }
  srv.set_exception_handler(
      [](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
        std::string what = "internal error";
        try {
          std::rethrow_exception(ep);
        } catch (const std::exception& e) {
          what = e.what();
        } catch (...) {
        }
        res.status = 500;
        res.set_content(json{{"error", what}}.dump(), kJson);
      });
}

AuditService::~AuditService() {
  stop();
  impl_->stop_worker();
}

int AuditService::start(const std::string& host, int port) {
  auto& srv = impl_->server;
  const int bound = port == 0 ? srv.bind_to_any_port(host) : (srv.bind_to_port(host, port) ? port : -1);
  if (bound < 0) throw IoError(fmt::format("cannot bind {}:{}", host, port));
  impl_->server_thread = std::thread([&srv] { srv.listen_after_bind(); });
  srv.wait_until_ready();
  return bound;
}

void AuditService::wait() {
  if (impl_->server_thread.joinable()) impl_->server_thread.join();
}

void AuditService::stop() {
  impl_->server.stop();
  wait();
}

HttpResult AuditService::list_sessions() const {
  try {
    json out = json::array();
    for (const auto& e : impl_->store.list()) out.push_back(index_json(e));
    return {200, out.dump()};
  } catch (const Error& e) {
    return error_result(500, e.what());
  }
}

HttpResult AuditService::get_session(const std::string& id) const {
  if (!valid_session_id(id)) return error_result(404, fmt::format("unknown session '{}'", id));
  try {
    const auto s = impl_->session(id);
    if (!s) return error_result(404, fmt::format("unknown session '{}'", id));
    return {200, serialize_session(*s)};
  } catch (const CorruptSessionError& e) {
    return error_result(500, e.what());
  } catch (const MigrationError& e) {
    return error_result(500, e.what());
  }
}

HttpResult AuditService::whatif(const std::string& id, const std::string& body) const {
  if (!valid_session_id(id)) return error_result(404, fmt::format("unknown session '{}'", id));
  std::shared_ptr<const AuditSession> s;
  try {
    s = impl_->session(id);
  } catch (const Error& e) {
    return error_result(500, e.what());
  }
  if (!s) return error_result(404, fmt::format("unknown session '{}'", id));
  if (!s->surrogate) return error_result(409, "session has no fitted surrogate");

  const auto j = json::parse(body, nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    return error_result(400, "request body must be a JSON object",
                        {{"body", "not a JSON object"}});
  }
  if (!j.contains("weights")) {
    return error_result(400, "invalid weights", {{"weights", "missing"}});
  }
  const auto& wj = j.at("weights");
  if (!wj.is_array()) return error_result(400, "invalid weights", {{"weights", "not an array"}});
  const std::size_t d = s->surrogate->dim();
  if (wj.size() != d) {
    return error_result(400, "invalid weights",
                        {{"weights", fmt::format("expected {} values, got {}", d, wj.size())}});
  }
  json fields = json::object();
  WeightVector w;
  for (std::size_t i = 0; i < d; ++i) {
    const auto key = fmt::format("weights[{}]", i);
    if (!wj[i].is_number()) {
      fields[key] = "not a number";
      continue;
    }
    const double v = wj[i].get<double>();
    if (!std::isfinite(v) || v < 0.0) {
      fields[key] = "must be finite and >= 0";
      continue;
    }
    w.values.push_back(v);
  }
  if (!fields.empty()) return error_result(400, "invalid weights", std::move(fields));

  const auto p = predict(*s->surrogate, w);
  return {200, json{{"probability", p.probability}, {"clamped", p.clamped}, {"raw", p.raw}}.dump()};
}

HttpResult AuditService::submit_audit(const std::string& body) {
  const auto j = json::parse(body, nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    return error_result(400, "request body must be a JSON object", {{"body", "not a JSON object"}});
  }
  AuditConfig config = impl_->options.audit_defaults;
  config.created_at.reset();
  config.session_id.reset();
  json fields = json::object();

  std::string text;
  if (!j.contains("text") || !j.at("text").is_string() || j.at("text").get<std::string>().empty()) {
    fields["text"] = "required non-empty string";
  } else {
    text = j.at("text").get<std::string>();
  }
  auto number = [&](const char* key, auto& target) {
    if (!j.contains(key)) return;
    const auto& v = j.at(key);
    using T = std::decay_t<decltype(target)>;
    if constexpr (std::is_floating_point_v<T>) {
      if (v.is_number()) {
        target = v.get<double>();
        return;
      }
    } else {
      if (v.is_number_unsigned()) {
        target = v.get<T>();
        return;
      }
    }
    fields[key] = std::is_floating_point_v<T> ? "not a number" : "not a non-negative integer";
  };
  number("delta", config.delta);
  number("m", config.m);
  number("repeats", config.repeats);
  number("n_target", config.n_target);
  number("lambda", config.lambda);
  number("seed", config.seed);
  number("rewrite_count", config.rewrite_count);
  if (j.contains("evaluate")) {
    if (j.at("evaluate").is_boolean()) {
      config.evaluate = j.at("evaluate").get<bool>();
    } else {
      fields["evaluate"] = "not a boolean";
    }
  }
  if (j.contains("task")) {
    try {
      if (!j.at("task").is_string()) throw ParameterError("not a string");
      config.task = TaskTemplate::preset(j.at("task").get<std::string>());
    } catch (const ParameterError& e) {
      fields["task"] = e.what();
    }
  }
  if (!fields.empty()) return error_result(400, "invalid audit request", std::move(fields));
  try {
    config.validate();
  } catch (const ParameterError& e) {
    return error_result(400, e.what());
  }

  std::string id;
  {
    std::lock_guard lock(impl_->jobs_mutex);
    id = fmt::format("job-{}", impl_->next_job++);
    Job job;
    job.id = id;
    job.config = std::move(config);
    job.text = std::move(text);
    impl_->jobs.emplace(id, std::move(job));
    impl_->queue.push_back(id);
  }
  impl_->jobs_cv.notify_one();
  return {202, json{{"job_id", id}}.dump()};
}

HttpResult AuditService::job_status(const std::string& id) const {
  std::lock_guard lock(impl_->jobs_mutex);
  const auto it = impl_->jobs.find(id);
  if (it == impl_->jobs.end()) return error_result(404, fmt::format("unknown job '{}'", id));
  const auto& job = it->second;
  json out = {{"id", job.id}, {"status", state_name(job.state)}, {"stage", job.stage}};
  out["session_id"] = job.session_id.empty() ? json(nullptr) : json(job.session_id);
  out["error"] = job.error.empty() ? json(nullptr) : json(job.error);
  return {200, out.dump()};
}

void AuditService::drain() {
  std::unique_lock lock(impl_->jobs_mutex);
  impl_->idle_cv.wait(lock, [&] { return impl_->queue.empty() && !impl_->busy; });
}

}  // namespace lamp
