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


// lamp: command-line front end for local surrogate audits.

#include <pthread.h>
#include <signal.h>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "lamp/audit.hpp"
#include "lamp/error.hpp"
#include "lamp/mock.hpp"
#include "lamp/service.hpp"
#include "lamp/session.hpp"
#include "lamp/surface_bench.hpp"

namespace {

enum ExitCode : int {
  kOk = 0,
  kFailure = 1,
  kValidation = 2,
  kEndpoint = 3,
  kCorrupt = 4,
};

int exit_code_for(lamp::ErrorKind kind) {
  using lamp::ErrorKind;
  switch (kind) {
    case ErrorKind::kParameter:
    case ErrorKind::kValidation:
    case ErrorKind::kSingularFit:
    case ErrorKind::kInsufficientData:
      return kValidation;
    case ErrorKind::kEndpoint:
    case ErrorKind::kParse:
    case ErrorKind::kAlignment:
      return kEndpoint;
    case ErrorKind::kCorruptSession:
    case ErrorKind::kMigration:
      return kCorrupt;
    case ErrorKind::kIo:
      return kFailure;
  }
  return kFailure;
}

std::string env_or(const char* name, std::string fallback = {}) {
  const char* v = std::getenv(name);
  return (v && *v) ? std::string(v) : fallback;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw lamp::IoError(fmt::format("cannot open '{}'", path));
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_output(const std::string& path, const std::string& data) {
  if (path.empty() || path == "-") {
    std::cout << data;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out || !(out << data)) throw lamp::IoError(fmt::format("cannot write '{}'", path));
}

struct EndpointFlags {
  std::string kind;
  std::string base_url = env_or("LAMP_BASE_URL");
  std::string model = env_or("LAMP_MODEL");
  std::string mock_config;
  int max_retries = 2;
  int max_in_flight = 8;

  void add(CLI::App* app) {
    app->add_option("--endpoint", kind, "mock | remote (default: remote when LAMP_BASE_URL is set)")
        ->check(CLI::IsMember({"mock", "remote"}));
    app->add_option("--base-url", base_url, "chat-completions base URL [env LAMP_BASE_URL]");
    app->add_option("--model", model, "model name [env LAMP_MODEL]");
    app->add_option("--mock-config", mock_config, "JSON file describing the mock model")
        ->check(CLI::ExistingFile);
    app->add_option("--max-retries", max_retries, "retries per request")->check(CLI::NonNegativeNumber);
    app->add_option("--max-in-flight", max_in_flight, "concurrent requests")
        ->check(CLI::PositiveNumber);
  }

  lamp::EndpointConfig config() const {
    lamp::EndpointConfig e;
    const bool remote = kind.empty() ? !base_url.empty() : kind == "remote";
    e.kind = remote ? lamp::EndpointKind::kRemote : lamp::EndpointKind::kMock;
    e.base_url = remote ? base_url : "";
    e.model_name = remote ? model : (model.empty() ? "mock" : model);
    e.max_retries = max_retries;
    e.max_in_flight = max_in_flight;
    return e;
  }

  std::optional<lamp::MockModelConfig> mock() const {
    if (mock_config.empty()) return std::nullopt;
    return lamp::MockModelConfig::from_json(read_text_file(mock_config));
  }
};

struct AuditFlags {
  std::string text;
  std::string input;
  std::string task = "sentiment";
  std::string norm = "sup";
  std::string session_dir = "sessions";
  std::string created_at;
  std::string id;
  bool print_report = false;
  lamp::AuditConfig config;

  void add(CLI::App* app) {
    auto* src = app->add_option_group("input");
    src->add_option("--text", text, "text to audit");
    src->add_option("--input", input, "file holding the text to audit")->check(CLI::ExistingFile);
    src->require_option(1);
    app->add_option("--task", task, "task preset")
        ->check(CLI::IsMember({"sentiment", "harmfulness", "hatefulness"}));
    app->add_option("--delta", config.delta, "jitter scale, in (0, 1)");
    app->add_option("-m,--perturbations", config.m, "number of jittered samples");
    app->add_option("--repeats", config.repeats, "free explanation queries");
    app->add_option("--n-target", config.n_target, "factors kept by aggregation");
    app->add_option("--lambda", config.lambda, "ridge penalty");
    app->add_option("--seed", config.seed, "random seed");
    app->add_option("--norm", norm, "truncation norm")->check(CLI::IsMember({"sup", "euclidean"}));
    app->add_option("--alpha", config.alpha, "linearity test level");
    app->add_option("--surrogate-repeats", config.surrogate_repeats, "independent probe rounds");
    app->add_flag("--evaluate", config.evaluate, "run counterfactual evaluation");
    app->add_option("--rewrite-count", config.rewrite_count, "rewrite cases");
    app->add_flag("--token-baseline", config.token_baseline, "also fit the token-deletion baseline");
    app->add_flag("--embed-transcript", config.embed_transcript,
                  "store full prompts and answers in the session");
    app->add_option("--session-dir", session_dir, "where sessions are written");
    app->add_option("--created-at", created_at, "fixed timestamp for reproducible files");
    app->add_option("--id", id, "session id (default: derived from the inputs)");
    app->add_flag("--report", print_report, "print a markdown report to stdout");
  }
};

int run_audit_cmd(AuditFlags& a, const EndpointFlags& ep) {
  a.config.endpoint = ep.config();
  a.config.task = lamp::TaskTemplate::preset(a.task);
  a.config.norm = a.norm == "euclidean" ? lamp::TruncationNorm::kEuclidean : lamp::TruncationNorm::kSup;
  if (!a.created_at.empty()) a.config.created_at = a.created_at;
  if (!a.id.empty()) a.config.session_id = a.id;
  a.config.validate();
  const std::string text = a.input.empty() ? a.text : read_text_file(a.input);

  const lamp::SessionStore store(a.session_dir);
  lamp::AuditHooks hooks;
  hooks.store = &store;
  hooks.on_stage = [](std::string_view stage) { std::cerr << "[lamp] " << stage << "\n"; };
  const auto transport = lamp::make_transport(a.config.endpoint, ep.mock());
  try {
    const auto s = lamp::run_audit(a.config, text, transport, hooks);
    std::cerr << fmt::format("[lamp] R^2 = {:.4f}, session {}\n", s.surrogate->r_squared, s.id);
    for (const auto& w : s.warnings) std::cerr << "[lamp] warning: " << w << "\n";
    std::cout << store.path_for(s.id).string() << "\n";
    if (a.print_report) std::cout << lamp::emit_report(s, lamp::ReportFormat::kMarkdown);
  } catch (const lamp::StageError& e) {
    std::cerr << fmt::format("[lamp] draft saved to {}\n", store.path_for(e.draft().id).string());
    throw;
  }
  return kOk;
}

lamp::AuditSession load_by_path_or_id(const std::string& path, const std::string& id,
                                      const std::string& dir) {
  if (!path.empty()) return lamp::load_session(path);
  if (id.empty()) throw lamp::ParameterError("give --session or --id");
  return lamp::SessionStore(dir).load(id);
}

struct BenchFlags {
  std::string family = "sigmoid";
  std::size_t d = 2;
  double scale = 3.0;
  double w0 = 0.5;
  double noise = 0.01;
  double delta_min = 0.05;
  double delta_max = 0.9;
  std::size_t steps = 18;
  std::size_t m = 50;
  std::size_t trials = 200;
  std::uint64_t seed = 0;
  std::string output;
};

int run_bench_cmd(const BenchFlags& b) {
  if (b.steps < 1 || !(b.delta_min > 0.0) || b.delta_max < b.delta_min) {
    throw lamp::ParameterError("need 0 < delta-min <= delta-max and steps >= 1");
  }
  lamp::SurfaceBenchConfig cfg;
  cfg.surface.family = lamp::family_from_name(b.family);
  cfg.surface.a.assign(b.d, b.scale);
  cfg.surface.noise_sd = b.noise;
  cfg.w0.values.assign(b.d, b.w0);
  if (cfg.surface.family == lamp::SurfaceFamily::kSigmoid) {
    // Center the logit slightly above zero so the seed point sits on the
    // curved shoulder of the sigmoid.
    cfg.surface.b = 1.0 - b.scale * b.w0 * static_cast<double>(b.d);
  } else if (cfg.surface.family == lamp::SurfaceFamily::kQuadratic) {
    cfg.surface.b = 0.5;
    cfg.surface.center = cfg.w0.values;
    cfg.surface.hessian.assign(b.d * b.d, 0.0);
    for (std::size_t i = 0; i < b.d; ++i) cfg.surface.hessian[i * b.d + i] = b.scale;
    cfg.surface.a.assign(b.d, 0.1);
  }
  for (std::size_t i = 0; i < b.steps; ++i) {
    const double t = b.steps == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(b.steps - 1);
    cfg.deltas.push_back(b.delta_min + t * (b.delta_max - b.delta_min));
  }
  cfg.m = b.m;
  cfg.trials = b.trials;
  cfg.seed = b.seed;
  write_output(b.output, lamp::surface_bench_csv(lamp::run_surface_bench(cfg)));
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Local surrogate audits of language-model classifiers"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "lamp 0.1.0");

  EndpointFlags endpoint;

  AuditFlags audit;
  auto* audit_cmd = app.add_subcommand("audit", "run a full audit and save the session");
  audit.add(audit_cmd);
  endpoint.add(audit_cmd);

  std::string eval_session, eval_id, eval_dir = "sessions";
  std::size_t eval_count = lamp::kDefaultRewriteCount;
  bool eval_token = false;
  auto* eval_cmd = app.add_subcommand("evaluate", "counterfactual evaluation of a saved session");
  eval_cmd->add_option("--session", eval_session, "session file")->check(CLI::ExistingFile);
  eval_cmd->add_option("--id", eval_id, "session id in --session-dir");
  eval_cmd->add_option("--session-dir", eval_dir, "session directory");
  eval_cmd->add_option("--rewrite-count", eval_count, "rewrite cases");
  eval_cmd->add_flag("--token-baseline", eval_token, "also fit the token-deletion baseline");
  endpoint.add(eval_cmd);

  std::string report_session, report_id, report_dir = "sessions", report_format = "markdown",
                                         report_output;
  auto* report_cmd = app.add_subcommand("report", "render a saved session");
  report_cmd->add_option("--session", report_session, "session file")->check(CLI::ExistingFile);
  report_cmd->add_option("--id", report_id, "session id in --session-dir");
  report_cmd->add_option("--session-dir", report_dir, "session directory");
  report_cmd->add_option("--format", report_format, "markdown | json")
      ->check(CLI::IsMember({"markdown", "md", "json"}));
  report_cmd->add_option("-o,--output", report_output, "output file (default stdout)");

  std::string serve_host = "127.0.0.1", serve_dir = "sessions", serve_static;
  int serve_port = 8080;
  auto* serve_cmd = app.add_subcommand("serve", "serve the session API and UI");
  serve_cmd->add_option("--host", serve_host, "bind address");
  serve_cmd->add_option("--port", serve_port, "port (0 picks one)")->check(CLI::Range(0, 65535));
  serve_cmd->add_option("--session-dir", serve_dir, "session directory");
  serve_cmd->add_option("--static-dir", serve_static, "UI bundle served at /")
      ->check(CLI::ExistingDirectory);
  endpoint.add(serve_cmd);

  BenchFlags bench;
  auto* bench_cmd = app.add_subcommand("bench-surface", "radius sweep on a synthetic surface (CSV)");
  bench_cmd->add_option("--family", bench.family, "sigmoid | quadratic | linear")
      ->check(CLI::IsMember({"sigmoid", "quadratic", "linear"}));
  bench_cmd->add_option("-d,--dim", bench.d, "dimension")->check(CLI::Range(1, 16));
  bench_cmd->add_option("--scale", bench.scale, "slope (sigmoid, linear) or curvature (quadratic)");
  bench_cmd->add_option("--w0", bench.w0, "seed weight in every coordinate");
  bench_cmd->add_option("--noise", bench.noise, "response noise sd");
  bench_cmd->add_option("--delta-min", bench.delta_min, "smallest radius");
  bench_cmd->add_option("--delta-max", bench.delta_max, "largest radius");
  bench_cmd->add_option("--steps", bench.steps, "grid points");
  bench_cmd->add_option("-m,--perturbations", bench.m, "samples per fit");
  bench_cmd->add_option("--trials", bench.trials, "fits per radius");
  bench_cmd->add_option("--seed", bench.seed, "random seed");
  bench_cmd->add_option("-o,--output", bench.output, "CSV file (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kValidation;
  }

  try {
    if (*audit_cmd) return run_audit_cmd(audit, endpoint);

    if (*eval_cmd) {
      const auto s = load_by_path_or_id(eval_session, eval_id, eval_dir);
      const auto transport = lamp::make_transport(s.endpoint, endpoint.mock());
      const auto out = lamp::evaluate_session(s, transport, eval_count, eval_token);
      const auto dir = eval_session.empty() ? std::filesystem::path(eval_dir)
                                            : std::filesystem::path(eval_session).parent_path();
      const lamp::SessionStore store(dir.empty() ? std::filesystem::path(".") : dir);
      std::cout << store.save(out).string() << "\n";
      return kOk;
    }

    if (*report_cmd) {
      const auto s = load_by_path_or_id(report_session, report_id, report_dir);
      write_output(report_output, lamp::emit_report(s, lamp::report_format_from_name(report_format)));
      return kOk;
    }

    if (*serve_cmd) {
      lamp::ServiceOptions opts;
      opts.session_dir = serve_dir;
      if (!serve_static.empty()) opts.static_dir = serve_static;
      opts.audit_defaults.endpoint = endpoint.config();
      opts.mock = endpoint.mock();
      sigset_t signals;
      sigemptyset(&signals);
      sigaddset(&signals, SIGINT);
      sigaddset(&signals, SIGTERM);
      pthread_sigmask(SIG_BLOCK, &signals, nullptr);

      lamp::AuditService service(std::move(opts));
      const int port = service.start(serve_host, serve_port);
      std::cerr << fmt::format("[lamp] serving {} on http://{}:{}\n", serve_dir, serve_host, port);
      int sig = 0;
      sigwait(&signals, &sig);
      std::cerr << "[lamp] shutting down\n";
      service.stop();
      return kOk;
    }

    if (*bench_cmd) return run_bench_cmd(bench);
  } catch (const lamp::Error& e) {
    std::cerr << "lamp: " << e.what() << "\n";
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "lamp: " << e.what() << "\n";
    return kFailure;
  }
  return kOk;
}
