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

#pragma once

#include <chrono>
#include <cstddef>
#include <string>
#include <vector>

#include "lamp/prompts.hpp"

namespace lamp {

struct ChatMessage {
  std::string role;  // "system" | "user" | "assistant"
  std::string content;
};

struct ChatRequest {
  std::string model;
  std::vector<ChatMessage> messages;
  double temperature = 0.0;

  // Not sent over the wire. Lets deterministic transports key their
  // behaviour on the logical request.
  TemplateId template_id = TemplateId::kExplain;
  std::size_t sample_index = 0;
  int attempt = 0;
};

// One round trip to the model. Returns the assistant message content;
// throws EndpointError on transport failure.
class ChatTransport {
 public:
  virtual ~ChatTransport() = default;
  virtual std::string complete(const ChatRequest& request) = 0;
};

// Chat-completion style JSON over HTTP(S):
//   POST <base_url>/chat/completions
//   {"model": ..., "messages": [{"role", "content"}...], "temperature": ...}
// The reply's choices[0].message.content is returned.
class RemoteTransport final : public ChatTransport {
 public:
  struct Options {
    std::string base_url;  // e.g. https://api.example.com/v1
    std::string api_key;
    std::chrono::seconds timeout{60};
  };

  explicit RemoteTransport(Options options);
  std::string complete(const ChatRequest& request) override;

  // Request body as sent; exposed for tests.
  static std::string request_body(const ChatRequest& request);
  // Extracts the assistant content from a response body.
  static std::string response_content(const std::string& body);

 private:
  Options options_;
  std::string scheme_host_port_;
  std::string path_prefix_;
};

}  // namespace lamp
