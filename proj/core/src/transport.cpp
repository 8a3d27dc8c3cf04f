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

#include "lamp/transport.hpp"

#include <httplib.h>
#include <nlohmann/json.hpp>

#include <fmt/format.h>

#include "lamp/error.hpp"

namespace lamp {

RemoteTransport::RemoteTransport(Options options) : options_(std::move(options)) {
  const auto& url = options_.base_url;
  const auto scheme_end = url.find("://");
  if (url.empty() || scheme_end == std::string::npos) {
    throw ParameterError(fmt::format("endpoint base URL '{}' must include a scheme", url));
  }
  const auto path_start = url.find('/', scheme_end + 3);
  scheme_host_port_ = url.substr(0, path_start);
  path_prefix_ = path_start == std::string::npos ? "" : url.substr(path_start);
  while (!path_prefix_.empty() && path_prefix_.back() == '/') path_prefix_.pop_back();
}

std::string RemoteTransport::request_body(const ChatRequest& request) {
  nlohmann::json messages = nlohmann::json::array();
  for (const auto& m : request.messages) {
    messages.push_back({{"role", m.role}, {"content", m.content}});
  }
  nlohmann::json body = {
      {"model", request.model},
      {"messages", std::move(messages)},
      {"temperature", request.temperature},
  };
  return body.dump();
}

std::string RemoteTransport::response_content(const std::string& body) {
  const auto j = nlohmann::json::parse(body, nullptr, false);
  if (j.is_discarded()) throw EndpointError("endpoint returned a non-JSON body");
  try {
    return j.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw EndpointError(fmt::format("unexpected chat-completion response shape: {}", e.what()));
  }
}

std::string RemoteTransport::complete(const ChatRequest& request) {
  httplib::Client client(scheme_host_port_);
  const auto t = static_cast<time_t>(options_.timeout.count());
  client.set_connection_timeout(t, 0);
  client.set_read_timeout(t, 0);
  client.set_write_timeout(t, 0);
  httplib::Headers headers;
  if (!options_.api_key.empty()) {
    headers.emplace("Authorization", "Bearer " + options_.api_key);
  }
  const auto res = client.Post(path_prefix_ + "/chat/completions", headers,
                               request_body(request), "application/json");
  if (!res) {
    throw EndpointError(fmt::format("request to {} failed: {}", scheme_host_port_,
                                    httplib::to_string(res.error())));
  }
  if (res->status < 200 || res->status >= 300) {
    throw EndpointError(fmt::format("endpoint returned HTTP {}: {}", res->status,
                                    res->body.substr(0, 200)));
  }
  return response_content(res->body);
}

}  // namespace lamp
