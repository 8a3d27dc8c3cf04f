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


#include "canonical_json.hpp"

#include <cmath>

#include <fmt/format.h>

namespace lamp::detail {
namespace {

using nlohmann::json;

void pad(std::string& out, int depth) { out.append(static_cast<std::size_t>(depth) * 2, ' '); }

void dump(const json& j, std::string& out, int depth) {
  switch (j.type()) {
    case json::value_t::null:
    case json::value_t::discarded:
      out += "null";
      return;
    case json::value_t::boolean:
      out += j.get<bool>() ? "true" : "false";
      return;
    case json::value_t::number_integer:
      out += std::to_string(j.get<std::int64_t>());
      return;
    case json::value_t::number_unsigned:
      out += std::to_string(j.get<std::uint64_t>());
      return;
    case json::value_t::number_float: {
      const double v = j.get<double>();
      out += std::isfinite(v) ? fmt::format("{}", v) : "null";
      return;
    }
    case json::value_t::string:
    case json::value_t::binary:
      out += j.dump(-1, ' ', false, json::error_handler_t::replace);
      return;
    case json::value_t::array: {
      if (j.empty()) {
        out += "[]";
        return;
      }
      out += "[\n";
      bool first = true;
      for (const auto& v : j) {
        if (!first) out += ",\n";
        first = false;
        pad(out, depth + 1);
        dump(v, out, depth + 1);
      }
      out += '\n';
      pad(out, depth);
      out += ']';
      return;
    }
    case json::value_t::object: {
      if (j.empty()) {
        out += "{}";
        return;
      }
      out += "{\n";
      bool first = true;
      for (const auto& [k, v] : j.items()) {
        if (!first) out += ",\n";
        first = false;
        pad(out, depth + 1);
        out += json(k).dump(-1, ' ', false, json::error_handler_t::replace);
        out += ": ";
        dump(v, out, depth + 1);
      }
      out += '\n';
      pad(out, depth);
      out += '}';
      return;
    }
  }
}

}  // namespace

std::string canonical_dump(const nlohmann::json& j) {
  std::string out;
  dump(j, out, 0);
  out += '\n';
  return out;
}

}  // namespace lamp::detail
