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

#include "molvoice/app.hpp"
#include "molvoice/gateway.hpp"  // httplib client
#include "molvoice/server.hpp"
#include "support.hpp"

using namespace molvoice;
namespace websocket = boost::beast::websocket;
using tcp = boost::asio::ip::tcp;

namespace {

class ServerTest : public ::testing::Test {
 protected:
  ServerTest() : sessions_(make_service_config(AppOptions{})), server_(sessions_, "127.0.0.1", 0, 2, 4) {
    server_.start();
    client_ = std::make_unique<httplib::Client>("127.0.0.1", server_.port());
    client_->set_read_timeout(10, 0);
  }

  std::string new_session() {
    auto res = client_->Post("/sessions", "", "text/plain");
    EXPECT_TRUE(res);
    EXPECT_EQ(res->status, 201);
    return nlohmann::json::parse(res->body)["id"];
  }

  httplib::Result say(const std::string& id, const std::string& text) {
    return client_->Post(("/sessions/" + id + "/utterance").c_str(), nlohmann::json{{"text", text}}.dump(),
                         "application/json");
  }

  /// Synchronous WebSocket client on the events endpoint.
  struct Events {
    boost::asio::io_context ioc;
    websocket::stream<tcp::socket> ws{ioc};

    Events(unsigned short port, const std::string& id) {
      tcp::resolver resolver(ioc);
      boost::asio::connect(ws.next_layer(), resolver.resolve("127.0.0.1", std::to_string(port)));
      ws.handshake("127.0.0.1", "/sessions/" + id + "/events");
    }
    nlohmann::json next() {
      boost::beast::flat_buffer buf;
      ws.read(buf);
      return nlohmann::json::parse(boost::beast::buffers_to_string(buf.data()));
    }
  };

  SessionManager sessions_;
  http::Server server_;
  std::unique_ptr<httplib::Client> client_;
};

}  // namespace

TEST_F(ServerTest, Health) {
  auto res = client_->Get("/health");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 200);
  EXPECT_EQ(nlohmann::json::parse(res->body)["status"], "ok");
}

TEST_F(ServerTest, CreateSessionVariants) {
  std::string pdb = molvoice::testing::fixture_text();
  auto raw = client_->Post("/sessions", pdb, "chemical/x-pdb");
  ASSERT_TRUE(raw);
  EXPECT_EQ(raw->status, 201);
  auto js = client_->Post("/sessions", nlohmann::json{{"pdb", pdb}}.dump(), "application/json");
  ASSERT_TRUE(js);
  EXPECT_EQ(js->status, 201);
  auto bad = client_->Post("/sessions", "REMARK nothing\n", "chemical/x-pdb");
  ASSERT_TRUE(bad);
  EXPECT_EQ(bad->status, 400);
  auto err = nlohmann::json::parse(bad->body);
  EXPECT_EQ(err["code"], "NoAtoms");
  EXPECT_TRUE(err.contains("message"));
  EXPECT_TRUE(err.contains("detail"));
  EXPECT_EQ(sessions_.size(), 2u);
}

TEST_F(ServerTest, UtteranceSceneAndPdb) {
  std::string id = new_session();
  auto res = say(id, "Increase temperature");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 200);
  auto body = nlohmann::json::parse(res->body);
  EXPECT_TRUE(body["error"].is_null());
  EXPECT_EQ(body["sceneDiff"]["sim.temperature"]["after"], 330.0);
  for (const char* key : {"text", "normalizedText", "rawScript", "statements", "comments", "responses", "volumeUp"})
    EXPECT_TRUE(body.contains(key)) << key;

  auto scene = client_->Get(("/sessions/" + id + "/scene").c_str());
  ASSERT_TRUE(scene);
  EXPECT_EQ(nlohmann::json::parse(scene->body)["sim"]["temperature"], 330.0);

  auto pdb = client_->Get(("/sessions/" + id + "/pdb").c_str());
  ASSERT_TRUE(pdb);
  EXPECT_EQ(pdb->status, 200);
  EXPECT_EQ(load_pdb(pdb->body).atoms.size(), 20u);

  auto info = client_->Get(("/sessions/" + id).c_str());
  ASSERT_TRUE(info);
  EXPECT_EQ(nlohmann::json::parse(info->body)["id"], id);
}

TEST_F(ServerTest, ErrorStatuses) {
  std::string id = new_session();
  auto missing = say("deadbeef", "hi");
  ASSERT_TRUE(missing);
  EXPECT_EQ(missing->status, 404);
  EXPECT_EQ(nlohmann::json::parse(missing->body)["code"], "SessionNotFound");

  auto empty = say(id, "  ");
  ASSERT_TRUE(empty);
  EXPECT_EQ(empty->status, 400);
  EXPECT_EQ(nlohmann::json::parse(empty->body)["code"], "EmptyUtterance");

  auto bad = client_->Post(("/sessions/" + id + "/utterance").c_str(), "{\"txt\":1}", "application/json");
  ASSERT_TRUE(bad);
  EXPECT_EQ(bad->status, 400);
  EXPECT_EQ(nlohmann::json::parse(bad->body)["code"], "BadRequest");

  auto route = client_->Get("/nowhere");
  ASSERT_TRUE(route);
  EXPECT_EQ(route->status, 404);
}

TEST_F(ServerTest, CorsPreflight) {
  auto res = client_->Options("/sessions");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 204);
  EXPECT_EQ(res->get_header_value("Access-Control-Allow-Origin"), "*");
  EXPECT_NE(res->get_header_value("Access-Control-Allow-Methods").find("POST"), std::string::npos);
}

TEST_F(ServerTest, EventStreamFollowsPipeline) {
  std::string id = new_session();
  Events events(server_.port(), id);
  nlohmann::json hello = events.next();
  EXPECT_EQ(hello["stage"], "subscribed");
  EXPECT_EQ(hello["payload"]["scene"]["atomCount"], 20);

  auto res = say(id, "Stop simulation");
  ASSERT_TRUE(res);
  std::vector<std::string> stages;
  std::uint64_t last_seq = 0;
  for (int i = 0; i < 4; ++i) {
    nlohmann::json e = events.next();
    stages.push_back(e["stage"]);
    EXPECT_GT(e["seq"].get<std::uint64_t>(), last_seq);
    last_seq = e["seq"];
    EXPECT_EQ(e["session"], id);
  }
  EXPECT_EQ(stages, (std::vector<std::string>{"transcript", "normalized", "script", "executed"}));
  events.ws.close(websocket::close_code::normal);
}

TEST_F(ServerTest, EventStreamUnknownSessionCloses) {
  Events events(server_.port(), "nope");
  boost::beast::flat_buffer buf;
  boost::beast::error_code ec;
  events.ws.read(buf, ec);
  EXPECT_EQ(ec, websocket::error::closed);
  EXPECT_EQ(events.ws.reason().reason, "SessionNotFound");
}

TEST_F(ServerTest, ClosedSocketUnsubscribes) {
  std::string id = new_session();
  {
    Events events(server_.port(), id);
    events.next();
    EXPECT_EQ(sessions_.find(id)->events().size(), 1u);
    events.ws.close(websocket::close_code::normal);
  }
  // the server notices on its next read or write; a few utterances flush it out
  for (int i = 0; i < 50 && sessions_.find(id)->events().size() > 0; ++i) {
    say(id, "Tell me the number of atoms");
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
  }
  EXPECT_EQ(sessions_.find(id)->events().size(), 0u);
}
