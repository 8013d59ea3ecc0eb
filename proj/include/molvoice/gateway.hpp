// Copyright 2026 The molvoice Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <chrono>
#include <cstdlib>
#include <memory>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
#define CPPHTTPLIB_OPENSSL_SUPPORT
#endif
#include <httplib.h>
#include <json.hpp>

#include "molvoice/error.hpp"
#include "molvoice/prompt.hpp"

namespace molvoice {

enum class BackendKind { Mock, Remote };

inline std::optional<BackendKind> parse_backend(std::string_view s) {
  if (s == "mock") return BackendKind::Mock;
  if (s == "remote") return BackendKind::Remote;
  return std::nullopt;
}

struct GatewayConfig {
  std::string endpointUrl = "https://api.openai.com/v1/chat/completions";
  std::string modelId = "gpt-4o-mini";
  std::string apiKeyEnvVar = "OPENAI_API_KEY";
  double timeoutSeconds = 30;
  std::size_t maxTurns = 50;
  std::size_t historyTokenBudget = 4000;  // headroom on top of the fixed prompt
  BackendKind backend = BackendKind::Mock;

  void validate() const {
    if (!(timeoutSeconds >= 1 && timeoutSeconds <= 120))
      throw Error(ErrorCode::InvalidConfig, "timeout must be within [1, 120] seconds", {{"timeout", timeoutSeconds}});
    if (maxTurns == 0) throw Error(ErrorCode::InvalidConfig, "maxTurns must be positive");
    if (modelId.empty()) throw Error(ErrorCode::InvalidConfig, "modelId is empty");
    if (apiKeyEnvVar.empty()) throw Error(ErrorCode::InvalidConfig, "apiKeyEnvVar is empty");
  }
};

struct Completion {
  std::string content;
  std::string finishReason;  // "stop", "length", ...
};

class ChatBackend {
 public:
  virtual ~ChatBackend() = default;
  virtual Completion complete(const std::vector<ChatMessage>& messages, std::string_view transcript,
                              const History& history) = 0;
};

class MockBackend final : public ChatBackend {
 public:
  explicit MockBackend(std::shared_ptr<const PromptTemplate> tpl) : tpl_(std::move(tpl)) {}

  Completion complete(const std::vector<ChatMessage>&, std::string_view transcript, const History& history) override {
    return {mock_cast(*tpl_, transcript, history), "stop"};
  }

 private:
  std::shared_ptr<const PromptTemplate> tpl_;
};

struct EndpointUrl {
  std::string scheme;
  std::string host;
  int port = 0;
  std::string path;

  std::string origin() const { return scheme + "://" + host + ":" + std::to_string(port); }
};

inline EndpointUrl parse_endpoint_url(std::string_view url) {
  auto bad = [&] {
    return Error(ErrorCode::InvalidConfig, "invalid endpoint URL '" + std::string(url) + "'",
                 {{"url", std::string(url)}});
  };
  EndpointUrl out;
  auto sep = url.find("://");
  if (sep == std::string_view::npos) throw bad();
  out.scheme = text::lower(url.substr(0, sep));
  if (out.scheme != "http" && out.scheme != "https") throw bad();
  std::string_view rest = url.substr(sep + 3);
  auto slash = rest.find('/');
  std::string_view authority = rest.substr(0, slash);
  out.path = slash == std::string_view::npos ? "/" : std::string(rest.substr(slash));
  auto colon = authority.rfind(':');
  if (colon != std::string_view::npos) {
    auto port = text::parse_int(authority.substr(colon + 1));
    if (!port || *port <= 0 || *port > 65535) throw bad();
    out.port = *port;
    authority = authority.substr(0, colon);
  } else {
    out.port = out.scheme == "https" ? 443 : 80;
  }
  if (authority.empty()) throw bad();
  out.host = std::string(authority);
  return out;
}

/// Messages-based chat-completions client: POST {model, messages,
/// temperature: 0} with a bearer token and read choices[0].message.content.
class RemoteBackend final : public ChatBackend {
 public:
  explicit RemoteBackend(GatewayConfig config) : config_(std::move(config)), url_(parse_endpoint_url(config_.endpointUrl)) {
    api_key();
  }

  Completion complete(const std::vector<ChatMessage>& messages, std::string_view, const History&) override {
    const std::string key = api_key();
    nlohmann::json body = {{"model", config_.modelId}, {"temperature", 0}, {"n", 1}};
    body["messages"] = nlohmann::json::array();
    for (const auto& m : messages) body["messages"].push_back({{"role", to_string(m.role)}, {"content", m.content}});

    httplib::Client client(url_.origin());
    auto secs = std::chrono::duration<double>(config_.timeoutSeconds);
    auto timeout = std::chrono::duration_cast<std::chrono::microseconds>(secs);
    client.set_connection_timeout(timeout);
    client.set_read_timeout(timeout);
    client.set_write_timeout(timeout);
    httplib::Headers headers = {{"Authorization", "Bearer " + key}};

    auto started = std::chrono::steady_clock::now();
    auto res = client.Post(url_.path, headers, body.dump(), "application/json");
    if (!res) {
      auto elapsed = std::chrono::steady_clock::now() - started;
      auto err = res.error();
      std::string what = httplib::to_string(err);
      if (err == httplib::Error::ConnectionTimeout || elapsed >= secs * 0.95)
        throw Error(ErrorCode::Timeout, "chat endpoint timed out after " + text::format_number(config_.timeoutSeconds) + " s",
                    {{"timeout", config_.timeoutSeconds}});
      throw Error(ErrorCode::TransportError, "chat endpoint unreachable: " + what, {{"transport", what}});
    }
    if (res->status != 200)
      throw Error(ErrorCode::HttpError, "chat endpoint returned HTTP " + std::to_string(res->status),
                  {{"status", res->status}, {"body", res->body.substr(0, 512)}});

    nlohmann::json doc = nlohmann::json::parse(res->body, nullptr, false);
    if (doc.is_discarded() || !doc.contains("choices") || !doc["choices"].is_array() || doc["choices"].empty())
      throw Error(ErrorCode::BadCompletion, "chat endpoint response has no choices");
    const auto& choice = doc["choices"][0];
    Completion c;
    if (choice.contains("finish_reason") && choice["finish_reason"].is_string()) c.finishReason = choice["finish_reason"];
    if (choice.contains("message") && choice["message"].contains("content") && choice["message"]["content"].is_string())
      c.content = choice["message"]["content"];
    return c;
  }

 private:
  std::string api_key() const {
    const char* key = std::getenv(config_.apiKeyEnvVar.c_str());
    if (!key || !*key)
      throw Error(ErrorCode::MissingApiKey, "environment variable " + config_.apiKeyEnvVar + " is not set",
                  {{"env", config_.apiKeyEnvVar}});
    return key;
  }

  GatewayConfig config_;
  EndpointUrl url_;
};

/// Owns the conversation for one session: builds the request, calls the
/// backend, checks the completion and records the turn on success.
class Gateway {
 public:
  Gateway(std::shared_ptr<const PromptTemplate> tpl, GatewayConfig config,
          std::unique_ptr<ChatBackend> backend = nullptr)
      : tpl_(std::move(tpl)), config_(std::move(config)) {
    config_.validate();
    history_.maxTurns = config_.maxTurns;
    if (backend) {
      backend_ = std::move(backend);
    } else if (config_.backend == BackendKind::Remote) {
      backend_ = std::make_unique<RemoteBackend>(config_);
    } else {
      backend_ = std::make_unique<MockBackend>(tpl_);
    }
  }

  std::string cast(std::string_view transcript) {
    if (text::trim(transcript).empty()) throw Error(ErrorCode::EmptyUtterance, "utterance is empty");
    History trimmed = trim_history(*tpl_, history_, estimate_tokens(*tpl_) + config_.historyTokenBudget);
    auto messages = build_messages(*tpl_, trimmed, transcript);
    Completion c = backend_->complete(messages, transcript, trimmed);
    if (c.finishReason == "length")
      throw Error(ErrorCode::TruncatedCompletion, "completion was cut off at the length limit",
                  {{"partial", c.content}});
    if (text::trim(c.content).empty()) throw Error(ErrorCode::EmptyCompletion, "completion is empty");
    history_ = std::move(trimmed);
    history_.append({std::string(transcript), c.content});
    return c.content;
  }

  const History& history() const { return history_; }
  const PromptTemplate& prompt() const { return *tpl_; }
  const GatewayConfig& config() const { return config_; }

 private:
  std::shared_ptr<const PromptTemplate> tpl_;
  GatewayConfig config_;
  std::unique_ptr<ChatBackend> backend_;
  History history_;
};

}  // namespace molvoice
