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

#include <gtest/gtest.h>

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cstdlib>
#include <thread>

#include "molvoice/app.hpp"
#include "molvoice/gateway.hpp"

using namespace molvoice;

namespace {

std::shared_ptr<const PromptTemplate> bundled_template() {
  static auto tpl = bundled_prompt(*bundled_lexicon());
  return tpl;
}

std::size_t role_count(const std::vector<ChatMessage>& m, Role r) {
  return static_cast<std::size_t>(std::count_if(m.begin(), m.end(), [r](const ChatMessage& c) { return c.role == r; }));
}

/// Local stand-in for a chat-completions endpoint.
class FakeEndpoint {
 public:
  explicit FakeEndpoint(httplib::Server::Handler handler) {
    server_.Post("/v1/chat/completions", std::move(handler));
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~FakeEndpoint() {
    server_.stop();
    thread_.join();
  }
  std::string url() const { return "http://127.0.0.1:" + std::to_string(port_) + "/v1/chat/completions"; }

 private:
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

std::string completion_body(const std::string& content, const std::string& finish = "stop") {
  nlohmann::json j = {{"choices", {{{"index", 0}, {"message", {{"role", "assistant"}, {"content", content}}},
                                    {"finish_reason", finish}}}}};
  return j.dump();
}

GatewayConfig remote_config(const std::string& url) {
  ::setenv("MOLVOICE_TEST_KEY", "sk-test", 1);
  GatewayConfig c;
  c.backend = BackendKind::Remote;
  c.endpointUrl = url;
  c.apiKeyEnvVar = "MOLVOICE_TEST_KEY";
  c.timeoutSeconds = 1;
  return c;
}

ErrorCode cast_error(Gateway& g, std::string_view text) {
  try {
    g.cast(text);
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "cast succeeded";
  return ErrorCode::IoError;
}

}  // namespace

TEST(PromptTemplate, BundledLoadsAndEveryExampleValidates) {
  auto tpl = bundled_template();
  EXPECT_GE(tpl->examples.size(), 100u);
  for (const auto& ex : tpl->examples) EXPECT_TRUE(validate_script(parse_script(ex.assistant)).ok()) << ex.user;
  EXPECT_EQ(tpl->system.find(kMisrecognitionPlaceholder), std::string::npos);
  EXPECT_NE(tpl->system.find("'handball' might actually be 'HandMol'"), std::string::npos);
}

TEST(PromptTemplate, TokenEstimateInBand) {
  std::size_t tokens = estimate_tokens(*bundled_template());
  EXPECT_GE(tokens, 4500u);
  EXPECT_LE(tokens, 13500u);
}

TEST(PromptTemplate, RejectsInvalidExample) {
  Lexicon lex;
  EXPECT_THROW(load_prompt_template("### system\nS\n### user\nhi\n### assistant\nrm();\n", lex), Error);
  EXPECT_THROW(load_prompt_template("### user\nhi\n### assistant\nacknowledge();\n", lex), Error);
  PromptTemplate ok = load_prompt_template("#! note\n### system\nS {{MISRECOGNITIONS}}\n### user\nhi\n### assistant\nacknowledge();\n", lex);
  EXPECT_EQ(ok.examples.size(), 1u);
  EXPECT_EQ(ok.examples[0].user, "hi");
}

TEST(EstimateTokens, CeilOfCodepointsOverFour) {
  EXPECT_EQ(estimate_tokens(""), 0u);
  EXPECT_EQ(estimate_tokens("a"), 1u);
  EXPECT_EQ(estimate_tokens("abcd"), 1u);
  EXPECT_EQ(estimate_tokens("abcde"), 2u);
  EXPECT_EQ(estimate_tokens("\xc3\xa9\xc3\xa9\xc3\xa9\xc3\xa9"), 1u);  // four 2-byte code points
}

TEST(BuildMessages, OrderAndCounts) {
  auto tpl = bundled_template();
  History h;
  h.append({"Increase temperature", "changeTemperature(+30);"});
  auto m = build_messages(*tpl, h, "Again");
  ASSERT_EQ(m.size(), 1 + 2 * tpl->examples.size() + 2 + 1);
  EXPECT_EQ(m.front().role, Role::System);
  EXPECT_EQ(role_count(m, Role::System), 1u);
  EXPECT_EQ(role_count(m, Role::User), tpl->examples.size() + 2);
  EXPECT_EQ(m[m.size() - 3].content, "Increase temperature");
  EXPECT_EQ(m[m.size() - 2].content, "changeTemperature(+30);");
  EXPECT_EQ(m.back().role, Role::User);
  EXPECT_EQ(m.back().content, "Again");
  EXPECT_THROW(build_messages(*tpl, h, "  "), Error);
}

TEST(History, CapDropsOldest) {
  History h;
  h.maxTurns = 3;
  for (int i = 0; i < 5; ++i) h.append({std::to_string(i), "acknowledge();"});
  ASSERT_EQ(h.turns.size(), 3u);
  EXPECT_EQ(h.turns.front().user, "2");
}

TEST(TrimHistory, DropsOldestUntilItFits) {
  auto tpl = bundled_template();
  std::size_t fixed = estimate_tokens(*tpl);
  History h;
  h.maxTurns = 1000;
  for (int i = 0; i < 10; ++i) h.append({std::string(400, 'a' + i), std::string(0, 'x')});  // 100 tokens each
  History t = trim_history(*tpl, h, fixed + 350);
  ASSERT_EQ(t.turns.size(), 3u);
  EXPECT_EQ(t.turns.front().user[0], 'h');
  EXPECT_EQ(trim_history(*tpl, h, fixed + 1000).turns.size(), 10u);
  EXPECT_TRUE(trim_history(*tpl, h, fixed).turns.empty());
  try {
    trim_history(*tpl, h, fixed - 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::BudgetTooSmall);
  }
}

TEST(MockCast, TableLookupAndReplay) {
  auto tpl = bundled_template();
  History h;
  EXPECT_EQ(mock_cast(*tpl, "Tell me the number of atoms", h), "//Use countAtoms()\ncountAtoms();");
  EXPECT_EQ(mock_cast(*tpl, "tell me the number of atoms!", h), "//Use countAtoms()\ncountAtoms();");
  EXPECT_EQ(mock_cast(*tpl, "Again", h), "didntUnderstand();");
  EXPECT_EQ(mock_cast(*tpl, "florp the blarg", h), "didntUnderstand();");
  h.append({"Make spheres bigger", "select('all'); spacefill 3;"});
  EXPECT_EQ(mock_cast(*tpl, "again", h), "select('all'); spacefill 3;");
}

TEST(Gateway, MockRecordsHistoryOnSuccessOnly) {
  auto tpl = bundled_template();
  Gateway g(tpl, GatewayConfig{});
  std::string first = g.cast("Increase temperature");
  EXPECT_NE(first.find("changeTemperature(+30);"), std::string::npos);
  EXPECT_EQ(g.cast("Again"), g.history().turns.front().assistant);
  EXPECT_EQ(g.history().turns.size(), 2u);
  EXPECT_EQ(cast_error(g, ""), ErrorCode::EmptyUtterance);
  EXPECT_EQ(g.history().turns.size(), 2u);
}

TEST(Gateway, ConfigValidation) {
  GatewayConfig c;
  c.timeoutSeconds = 0;
  EXPECT_THROW(c.validate(), Error);
  c.timeoutSeconds = 121;
  EXPECT_THROW(c.validate(), Error);
  c.timeoutSeconds = 120;
  EXPECT_NO_THROW(c.validate());
}

TEST(RemoteBackend, MissingApiKey) {
  GatewayConfig c;
  c.backend = BackendKind::Remote;
  c.apiKeyEnvVar = "MOLVOICE_DEFINITELY_UNSET_KEY";
  ::unsetenv("MOLVOICE_DEFINITELY_UNSET_KEY");
  try {
    Gateway g(bundled_template(), c);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::MissingApiKey);
  }
}

TEST(RemoteBackend, SendsMessagesAndReadsContent) {
  nlohmann::json seen;
  std::string auth;
  FakeEndpoint fake([&](const httplib::Request& req, httplib::Response& res) {
    seen = nlohmann::json::parse(req.body);
    auth = req.get_header_value("Authorization");
    res.set_content(completion_body("select('resid 1'); color red;"), "application/json");
  });
  auto tpl = bundled_template();
  Gateway g(tpl, remote_config(fake.url()));
  EXPECT_EQ(g.cast("No wait but show it in red"), "select('resid 1'); color red;");
  EXPECT_EQ(auth, "Bearer sk-test");
  EXPECT_EQ(seen["model"], "gpt-4o-mini");
  EXPECT_EQ(seen["temperature"], 0);
  ASSERT_EQ(seen["messages"].size(), 1 + 2 * tpl->examples.size() + 1);
  EXPECT_EQ(seen["messages"][0]["role"], "system");
  EXPECT_EQ(seen["messages"].back()["content"], "No wait but show it in red");
  // second request carries the first turn as context
  g.cast("Again");
  EXPECT_EQ(seen["messages"].size(), 1 + 2 * tpl->examples.size() + 3);
}

TEST(RemoteBackend, ErrorMapping) {
  std::string mode;
  FakeEndpoint fake([&](const httplib::Request&, httplib::Response& res) {
    if (mode == "http") {
      res.status = 401;
      res.set_content("{\"error\":\"bad key\"}", "application/json");
    } else if (mode == "length") {
      res.set_content(completion_body("select('res", "length"), "application/json");
    } else if (mode == "empty") {
      res.set_content(completion_body("   "), "application/json");
    } else if (mode == "garbage") {
      res.set_content("not json", "text/plain");
    } else if (mode == "slow") {
      std::this_thread::sleep_for(std::chrono::milliseconds(1600));
      res.set_content(completion_body("acknowledge();"), "application/json");
    }
  });
  Gateway g(bundled_template(), remote_config(fake.url()));
  mode = "http";
  EXPECT_EQ(cast_error(g, "hi"), ErrorCode::HttpError);
  mode = "length";
  EXPECT_EQ(cast_error(g, "hi"), ErrorCode::TruncatedCompletion);
  mode = "empty";
  EXPECT_EQ(cast_error(g, "hi"), ErrorCode::EmptyCompletion);
  mode = "garbage";
  EXPECT_EQ(cast_error(g, "hi"), ErrorCode::BadCompletion);
  mode = "slow";
  EXPECT_EQ(cast_error(g, "hi"), ErrorCode::Timeout);
  EXPECT_TRUE(g.history().turns.empty());
}

TEST(RemoteBackend, UnreachableIsTransportError) {
  // Bind an ephemeral port and close it again so nothing listens there.
  int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  ASSERT_EQ(::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr), 0);
  socklen_t len = sizeof addr;
  ::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len);
  int port = ntohs(addr.sin_port);
  ::close(fd);
  Gateway g(bundled_template(), remote_config("http://127.0.0.1:" + std::to_string(port) + "/v1/chat/completions"));
  EXPECT_EQ(cast_error(g, "hi"), ErrorCode::TransportError);
}
