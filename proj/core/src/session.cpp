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


#include "lamp/session.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <sys/stat.h>
#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "canonical_json.hpp"
#include "lamp/error.hpp"

namespace lamp {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::size_t kExcerptLength = 80;

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(fmt::format("cannot open '{}'", path.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError(fmt::format("cannot read '{}'", path.string()));
  return ss.str();
}

std::string excerpt(std::string_view text) {
  std::string out;
  for (char c : text) {
    out += (c == '\n' || c == '\r' || c == '\t') ? ' ' : c;
  }
  if (out.size() <= kExcerptLength) return out;
  // Back off to a UTF-8 boundary.
  std::size_t cut = kExcerptLength;
  while (cut > 0 && (static_cast<unsigned char>(out[cut]) & 0xC0) == 0x80) --cut;
  return out.substr(0, cut) + "...";
}

class FdGuard {
 public:
  explicit FdGuard(int fd) : fd_(fd) {}
  ~FdGuard() {
    if (fd_ >= 0) ::close(fd_);
  }
  FdGuard(const FdGuard&) = delete;
  FdGuard& operator=(const FdGuard&) = delete;
  int get() const { return fd_; }
  int release() { return std::exchange(fd_, -1); }

 private:
  int fd_;
};

void write_all(int fd, std::string_view data, const fs::path& path) {
  while (!data.empty()) {
    const auto n = ::write(fd, data.data(), data.size());
    if (n < 0) {
      if (errno == EINTR) continue;
      throw IoError(fmt::format("write to '{}' failed", path.string()));
    }
    data.remove_prefix(static_cast<std::size_t>(n));
  }
}

json index_to_json(const IndexEntry& e) {
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

std::optional<IndexEntry> index_from_json(const json& j) {
  if (!j.is_object()) return std::nullopt;
  auto opt = [&](const char* key) -> std::optional<double> {
    if (!j.contains(key) || !j.at(key).is_number()) return std::nullopt;
    return j.at(key).get<double>();
  };
  auto str = [&](const char* key) {
    return j.contains(key) && j.at(key).is_string() ? j.at(key).get<std::string>() : "";
  };
  IndexEntry e;
  e.id = str("id");
  if (!valid_session_id(e.id)) return std::nullopt;
  e.created_at = str("created_at");
  e.task = str("task");
  e.status = str("status");
  e.excerpt = str("excerpt");
  e.r_squared = opt("r_squared");
  e.delta_star = opt("delta_star");
  e.seed_probability = opt("seed_probability");
  if (j.contains("factor_count") && j.at("factor_count").is_number_unsigned()) {
    e.factor_count = j.at("factor_count").get<std::size_t>();
  }
  return e;
}

}  // namespace

bool valid_session_id(std::string_view id) {
  if (id.empty() || id.size() > 128) return false;
  return std::all_of(id.begin(), id.end(), [](char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
           c == '_' || c == '-';
  });
}

void save_session(const AuditSession& session, const fs::path& path) {
  const std::string data = serialize_session(session);
  const fs::path dir = path.has_parent_path() ? path.parent_path() : fs::path(".");
  std::string tmpl = (dir / ("." + path.filename().string() + ".XXXXXX")).string();
  FdGuard fd(::mkstemp(tmpl.data()));
  if (fd.get() < 0) throw IoError(fmt::format("cannot create a temporary file in '{}'", dir.string()));
  const fs::path tmp(tmpl);
  try {
    write_all(fd.get(), data, tmp);
    if (::fsync(fd.get()) != 0) throw IoError(fmt::format("fsync of '{}' failed", tmp.string()));
    if (::fchmod(fd.get(), 0644) != 0) throw IoError("chmod of temporary session file failed");
    if (::close(fd.release()) != 0) throw IoError(fmt::format("close of '{}' failed", tmp.string()));
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) throw IoError(fmt::format("cannot move session into '{}': {}", path.string(), ec.message()));
  } catch (...) {
    std::error_code ignored;
    fs::remove(tmp, ignored);
    throw;
  }
}

AuditSession load_session(const fs::path& path) { return parse_session(read_file(path)); }

IndexEntry index_entry(const AuditSession& s) {
  IndexEntry e;
  e.id = s.id;
  e.created_at = s.created_at;
  e.task = s.task.id;
  e.status = s.finalized() ? "final" : "draft";
  e.excerpt = excerpt(s.text);
  if (s.surrogate) e.r_squared = s.surrogate->r_squared;
  if (s.delta_star && s.delta_star->finite()) e.delta_star = s.delta_star->value;
  if (s.seed) e.seed_probability = s.seed->p0;
  if (s.factors) e.factor_count = s.factors->size();
  return e;
}

SessionStore::SessionStore(fs::path dir) : dir_(std::move(dir)) {
  std::error_code ec;
  fs::create_directories(dir_, ec);
  if (ec || !fs::is_directory(dir_)) {
    throw IoError(fmt::format("session directory '{}' is not usable", dir_.string()));
  }
}

fs::path SessionStore::path_for(std::string_view id) const {
  if (!valid_session_id(id)) throw ParameterError(fmt::format("invalid session id '{}'", id));
  return dir_ / (std::string(id) + ".json");
}

fs::path SessionStore::save(const AuditSession& session) const {
  const auto path = path_for(session.id);
  save_session(session, path);
  append_index(index_entry(session));
  return path;
}

AuditSession SessionStore::load(std::string_view id) const { return load_session(path_for(id)); }

bool SessionStore::contains(std::string_view id) const {
  return valid_session_id(id) && fs::is_regular_file(path_for(id));
}

void SessionStore::append_index(const IndexEntry& entry) const {
  const auto path = dir_ / "index.jsonl";
  FdGuard fd(::open(path.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644));
  if (fd.get() < 0) throw IoError(fmt::format("cannot open index '{}'", path.string()));
  if (::flock(fd.get(), LOCK_EX) != 0) throw IoError("cannot lock the session index");
  const std::string line = index_to_json(entry).dump(-1, ' ', false, json::error_handler_t::replace) + "\n";
  write_all(fd.get(), line, path);
  ::flock(fd.get(), LOCK_UN);
}

std::vector<IndexEntry> SessionStore::list() const {
  const auto path = dir_ / "index.jsonl";
  std::vector<IndexEntry> out;
  if (!fs::exists(path)) return out;
  FdGuard fd(::open(path.c_str(), O_RDONLY | O_CLOEXEC));
  if (fd.get() < 0) throw IoError(fmt::format("cannot open index '{}'", path.string()));
  ::flock(fd.get(), LOCK_SH);
  const std::string data = read_file(path);
  ::flock(fd.get(), LOCK_UN);

  std::unordered_map<std::string, std::size_t> slot;
  std::istringstream in(data);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto j = json::parse(line, nullptr, false);
    if (j.is_discarded()) continue;  // torn or hand-edited line
    auto e = index_from_json(j);
    if (!e) continue;
    const auto it = slot.find(e->id);
    if (it == slot.end()) {
      slot.emplace(e->id, out.size());
      out.push_back(std::move(*e));
    } else {
      out[it->second] = std::move(*e);
    }
  }
  return out;
}

ReportFormat report_format_from_name(std::string_view name) {
  if (name == "markdown" || name == "md") return ReportFormat::kMarkdown;
  if (name == "json") return ReportFormat::kJson;
  throw ParameterError(fmt::format("unknown report format '{}' (markdown | json)", name));
}

namespace {

struct Coefficient {
  std::size_t rank = 0;
  std::string factor;
  double beta = 0.0;
};

std::vector<Coefficient> sorted_coefficients(const AuditSession& s) {
  std::vector<Coefficient> out;
  if (!s.factors || !s.surrogate) return out;
  for (std::size_t i = 0; i < s.surrogate->dim(); ++i) {
    out.push_back({0, s.factors->factors[i], s.surrogate->beta[i]});
  }
  std::stable_sort(out.begin(), out.end(), [](const Coefficient& a, const Coefficient& b) {
    return std::abs(a.beta) > std::abs(b.beta);
  });
  for (std::size_t i = 0; i < out.size(); ++i) out[i].rank = i + 1;
  return out;
}

std::string fmt_opt(const std::optional<double>& v, std::string_view none = "n/a") {
  return v ? fmt::format("{:.4f}", *v) : std::string(none);
}

std::string radius_text(const AuditSession& s) {
  if (!s.delta_star) return "n/a";
  switch (s.delta_star->status) {
    case RadiusStatus::kFinite:
      return fmt::format("{:.4f}", s.delta_star->value);
    case RadiusStatus::kFlatSurface:
      return "unbounded (flat surface)";
    case RadiusStatus::kNoiseless:
      return "0 (noiseless)";
  }
  return "n/a";
}

std::string markdown_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    if (c == '|') out += '\\';
    out += (c == '\n') ? ' ' : c;
  }
  return out;
}

std::string markdown_report(const AuditSession& s) {
  std::string out;
  auto line = [&](std::string_view l = {}) {
    out += l;
    out += '\n';
  };
  line(fmt::format("# Audit {}", s.id));
  line();
  line(fmt::format("- Status: {}", s.finalized() ? "final" : "draft"));
  if (!s.finalized()) line(fmt::format("- Failed stage: {} ({})", s.failed_stage, s.error));
  line(fmt::format("- Created: {}", s.created_at));
  line(fmt::format("- Task: {}", s.task.id));
  line(fmt::format("- Model: {}", s.endpoint.model_name));
  line(fmt::format("- Input: {}", markdown_escape(excerpt(s.text))));
  if (s.seed) line(fmt::format("- Seed probability: {:.4f}", s.seed->p0));
  line(fmt::format("- Probe: delta = {}, m = {}, lambda = {}, seed = {}", s.probe.delta, s.probe.m,
                   s.probe.lambda, s.probe.seed));
  line();

  line("## Factor coefficients");
  line();
  const auto coefs = sorted_coefficients(s);
  if (coefs.empty()) {
    line("No surrogate was fitted.");
  } else {
    line("| Rank | Factor | Coefficient | Direction |");
    line("|---:|---|---:|---|");
    for (const auto& c : coefs) {
      const char* dir = c.beta > 0.0 ? "raises" : (c.beta < 0.0 ? "lowers" : "none");
      line(fmt::format("| {} | {} | {:+.4f} | {} |", c.rank, markdown_escape(c.factor), c.beta, dir));
    }
    line();
    line(fmt::format("Intercept: {:.4f}", s.surrogate->intercept));
  }
  line();

  line("## Fit");
  line();
  if (s.surrogate) {
    line(fmt::format("- R^2: {:.4f} on {} samples", s.surrogate->r_squared, s.surrogate->n_samples));
  }
  if (s.surrogate_full) {
    line(fmt::format("- R^2 before truncation: {:.4f} on {} samples", s.surrogate_full->r_squared,
                     s.surrogate_full->n_samples));
  }
  line(fmt::format("- Optimal radius delta*: {}", radius_text(s)));
  if (s.curvature) line(fmt::format("- Hessian Frobenius norm: {:.4f}", s.curvature->hessian_frobenius));
  if (s.truncation) {
    line(fmt::format("- Truncation: kept {}, discarded {}, variance inflation {:.4f}",
                     s.truncation->kept, s.truncation->discarded, s.truncation->inflation_factor));
  } else {
    line("- Truncation: not applied");
  }
  if (!s.dropped_samples.empty()) {
    line(fmt::format("- Dropped relabel samples: {}", s.dropped_samples.size()));
  }
  line(fmt::format("- BIC: {}", fmt_opt(s.diagnostics.bic, "-inf (exact fit)")));
  line(fmt::format("- Centered R^2: {}", s.diagnostics.centered_r2_defined
                                             ? fmt::format("{:.4f}", s.diagnostics.centered_r2)
                                             : std::string("undefined")));
  if (s.diagnostics.linearity) {
    const auto& l = *s.diagnostics.linearity;
    line(fmt::format("- Harvey-Collier: t = {:.4f}, p = {:.4f} ({})", l.statistic, l.p_value,
                     l.rejected ? "linearity rejected" : "linearity not rejected"));
  } else {
    line("- Harvey-Collier: not available");
  }
  line();

  line("## Counterfactual evaluation");
  line();
  if (!s.evaluation) {
    line("not evaluated");
  } else {
    const auto& e = *s.evaluation;
    line("| Method | Mean Brier | SD | Cases |");
    line("|---|---:|---:|---:|");
    for (const auto& m : e.methods) {
      line(fmt::format("| {} | {:.4f} | {:.4f} | {} |", m.method, m.mean, m.sd, m.n));
    }
    line();
    line(fmt::format("- Pearson r (surrogate vs model): {}", fmt_opt(e.pearson_r, "undefined")));
    line(fmt::format("- Factor distance violations: {} of {} (bound {:.4f})",
                     e.factor_distance_violations, e.n_cases, e.distance_bound));
    if (e.failed_cases > 0) line(fmt::format("- Failed rewrite cases: {}", e.failed_cases));
  }

  if (!s.warnings.empty()) {
    line();
    line("## Warnings");
    line();
    for (const auto& w : s.warnings) line(fmt::format("- {}", w));
  }
  return out;
}

std::string json_report(const AuditSession& s) {
  json j;
  j["id"] = s.id;
  j["status"] = s.finalized() ? "final" : "draft";
  j["created_at"] = s.created_at;
  j["task"] = s.task.id;
  j["model"] = s.endpoint.model_name;
  j["seed_probability"] = s.seed ? json(s.seed->p0) : json(nullptr);
  json coefs = json::array();
  for (const auto& c : sorted_coefficients(s)) {
    coefs.push_back({{"rank", c.rank}, {"factor", c.factor}, {"coefficient", c.beta}});
  }
  j["coefficients"] = coefs;
  j["intercept"] = s.surrogate ? json(s.surrogate->intercept) : json(nullptr);
  j["r_squared"] = s.surrogate ? json(s.surrogate->r_squared) : json(nullptr);
  j["r_squared_before_truncation"] =
      s.surrogate_full ? json(s.surrogate_full->r_squared) : json(nullptr);
  j["delta_star"] = (s.delta_star && s.delta_star->finite()) ? json(s.delta_star->value) : json(nullptr);
  j["truncation"] = s.truncation ? json{{"kept", s.truncation->kept},
                                        {"discarded", s.truncation->discarded},
                                        {"inflation_factor", s.truncation->inflation_factor}}
                                 : json(nullptr);
  j["bic"] = s.diagnostics.bic ? json(*s.diagnostics.bic) : json(nullptr);
  j["harvey_collier_p"] =
      s.diagnostics.linearity ? json(s.diagnostics.linearity->p_value) : json(nullptr);
  if (s.evaluation) {
    json brier = json::object();
    for (const auto& m : s.evaluation->methods) brier[m.method] = {{"mean", m.mean}, {"sd", m.sd}};
    j["evaluation"] = {{"brier", brier},
                       {"pearson_r", s.evaluation->pearson_r ? json(*s.evaluation->pearson_r)
                                                             : json(nullptr)},
                       {"n_cases", s.evaluation->n_cases},
                       {"factor_distance_violations", s.evaluation->factor_distance_violations}};
  } else {
    j["evaluation"] = nullptr;
  }
  j["warnings"] = s.warnings;
  return detail::canonical_dump(j);
}

}  // namespace

std::string emit_report(const AuditSession& session, ReportFormat format) {
  return format == ReportFormat::kJson ? json_report(session) : markdown_report(session);
}

TailProfile session_tail_profile(std::span<const AuditSession> sessions) {
  std::vector<TailPoint> points;
  for (const auto& s : sessions) {
    if (!s.finalized() || !s.surrogate || !s.seed) continue;
    points.push_back({s.seed->p0, s.surrogate->beta_norm(), s.surrogate->r_squared});
  }
  return tail_profile(points);
}

}  // namespace lamp
