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

#include <atomic>
#include <deque>
#include <memory>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>
#include <json.hpp>

#include "molvoice/error.hpp"
#include "molvoice/service.hpp"

// HTTP/WebSocket front end for SessionManager.
//
//   POST /sessions                  optional PDB body      -> 201 {id}
//   POST /sessions/{id}/utterance   {"text": "..."}        -> 200 UtteranceResult
//   GET  /sessions/{id}/scene                              -> 200 scene snapshot
//   GET  /sessions/{id}/pdb                                -> 200 PDB text
//   WS   /sessions/{id}/events                             -> {stage, payload} stream
//
// Errors are {code, message, detail} with a matching HTTP status.
namespace molvoice::http {

namespace beast = boost::beast;
namespace bhttp = boost::beast::http;
namespace websocket = boost::beast::websocket;
namespace asio = boost::asio;
using tcp = asio::ip::tcp;

using Request = bhttp::request<bhttp::string_body>;
using Response = bhttp::response<bhttp::string_body>;

inline bhttp::status status_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::SessionNotFound:
    case ErrorCode::NotFound: return bhttp::status::not_found;
    case ErrorCode::QueueFull: return bhttp::status::too_many_requests;
    case ErrorCode::Timeout: return bhttp::status::gateway_timeout;
    case ErrorCode::HttpError:
    case ErrorCode::TransportError:
    case ErrorCode::MissingApiKey:
    case ErrorCode::EmptyCompletion:
    case ErrorCode::TruncatedCompletion:
    case ErrorCode::BadCompletion: return bhttp::status::bad_gateway;
    case ErrorCode::BadRequest:
    case ErrorCode::EmptyUtterance:
    case ErrorCode::MalformedRecord:
    case ErrorCode::NoAtoms: return bhttp::status::bad_request;
    default: return bhttp::status::internal_server_error;
  }
}

inline Response make_response(const Request& req, bhttp::status status, std::string body,
                              std::string_view content_type = "application/json") {
  Response res{status, req.version()};
  res.set(bhttp::field::server, "molvoice");
  res.set(bhttp::field::content_type, std::string(content_type));
  res.set(bhttp::field::access_control_allow_origin, "*");
  res.keep_alive(req.keep_alive());
  res.body() = std::move(body);
  res.prepare_payload();
  return res;
}

inline Response error_response(const Request& req, const Error& e) {
  return make_response(req, status_for(e.code()), e.to_json().dump());
}

/// Splits "/sessions/{id}/{leaf}" into {id, leaf}; leaf may be empty.
struct SessionPath {
  std::string id;
  std::string leaf;
};

inline std::optional<SessionPath> parse_session_path(std::string_view target) {
  target = target.substr(0, target.find('?'));
  constexpr std::string_view prefix = "/sessions/";
  if (target.substr(0, prefix.size()) != prefix) return std::nullopt;
  target.remove_prefix(prefix.size());
  auto slash = target.find('/');
  SessionPath p{std::string(target.substr(0, slash)), {}};
  if (slash != std::string_view::npos) p.leaf = std::string(target.substr(slash + 1));
  if (p.id.empty() || p.leaf.find('/') != std::string::npos) return std::nullopt;
  return p;
}

/// Pure request -> response mapping; may block while a cast is in flight.
inline Response route(SessionManager& sessions, const Request& req) {
  try {
    std::string_view target(req.target().data(), req.target().size());
    std::string_view path = target.substr(0, target.find('?'));
    const auto method = req.method();

    if (method == bhttp::verb::options) {
      Response res = make_response(req, bhttp::status::no_content, "");
      res.set(bhttp::field::access_control_allow_methods, "GET, POST, OPTIONS");
      res.set(bhttp::field::access_control_allow_headers, "Content-Type");
      return res;
    }
    if (path == "/health" && method == bhttp::verb::get)
      return make_response(req, bhttp::status::ok, nlohmann::json{{"status", "ok"}, {"sessions", sessions.size()}}.dump());
    if (path == "/sessions" || path == "/sessions/") {
      if (method != bhttp::verb::post) throw Error(ErrorCode::NotFound, "use POST /sessions");
      std::string pdb = req.body();
      if (!text::trim(pdb).empty() && text::trim(pdb).front() == '{') {
        auto doc = nlohmann::json::parse(pdb, nullptr, false);
        if (doc.is_discarded() || !doc.is_object()) throw Error(ErrorCode::BadRequest, "malformed JSON body");
        pdb = doc.contains("pdb") && doc["pdb"].is_string() ? doc["pdb"].get<std::string>() : std::string();
      }
      std::string id = sessions.create_session(text::trim(pdb).empty() ? std::nullopt : std::optional<std::string_view>(pdb));
      return make_response(req, bhttp::status::created, nlohmann::json{{"id", id}}.dump());
    }

    auto sp = parse_session_path(target);
    if (!sp) throw Error(ErrorCode::NotFound, "no route for " + std::string(path), {{"path", std::string(path)}});
    if (sp->leaf == "utterance" && method == bhttp::verb::post) {
      auto doc = nlohmann::json::parse(req.body(), nullptr, false);
      if (doc.is_discarded() || !doc.is_object() || !doc.contains("text") || !doc["text"].is_string())
        throw Error(ErrorCode::BadRequest, "body must be a JSON object with a string field 'text'");
      UtteranceResult r = sessions.submit_utterance(sp->id, doc["text"].get<std::string>());
      return make_response(req, bhttp::status::ok, r.to_json().dump());
    }
    if (sp->leaf == "scene" && method == bhttp::verb::get)
      return make_response(req, bhttp::status::ok, sessions.get_scene(sp->id).dump());
    if (sp->leaf == "pdb" && method == bhttp::verb::get)
      return make_response(req, bhttp::status::ok, sessions.get_pdb(sp->id), "chemical/x-pdb");
    if (sp->leaf.empty() && method == bhttp::verb::get) {
      auto session = sessions.find(sp->id);
      return make_response(req, bhttp::status::ok,
                           nlohmann::json{{"id", session->id()}, {"scene", scene_snapshot(session->scene())}}.dump());
    }
    throw Error(ErrorCode::NotFound, "no route for " + std::string(req.method_string()) + " " + std::string(path),
                {{"path", std::string(path)}});
  } catch (const Error& e) {
    return error_response(req, e);
  } catch (const std::exception& e) {
    return error_response(req, Error(ErrorCode::BadRequest, e.what()));
  }
}

// ---------------------------------------------------------------------------

class EventSocket : public std::enable_shared_from_this<EventSocket> {
 public:
  static constexpr std::size_t kMaxQueued = 256;

  EventSocket(tcp::socket&& socket, SessionManager& sessions, std::string session_id)
      : ws_(std::move(socket)), sessions_(sessions), session_id_(std::move(session_id)) {}

  ~EventSocket() {
    if (!subscription_) return;
    try {
      sessions_.unsubscribe(session_id_, *subscription_);
    } catch (const Error&) {
    }
  }

  void run(Request req) {
    ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
    ws_.async_accept(req, [self = shared_from_this()](beast::error_code ec) { self->on_accept(ec); });
  }

 private:
  void on_accept(beast::error_code ec) {
    if (ec) return;
    std::weak_ptr<EventSocket> weak = shared_from_this();
    try {
      auto session = sessions_.find(session_id_);
      subscription_ = session->events().subscribe([weak](const Event& e) {
        auto self = weak.lock();
        if (!self || self->closed_) return false;
        if (self->queued_.fetch_add(1) >= kMaxQueued) {
          self->closed_ = true;
          asio::post(self->ws_.get_executor(), [self] { self->close(); });
          return false;
        }
        asio::post(self->ws_.get_executor(), [self, doc = e.to_json().dump()]() mutable { self->enqueue(std::move(doc)); });
        return true;
      });
      ++queued_;
      enqueue(nlohmann::json{{"session", session_id_},
                             {"stage", "subscribed"},
                             {"payload", {{"scene", scene_snapshot(session->scene())}}}}
                  .dump());
    } catch (const Error&) {
      // unknown session: accept, then close with a reason the client can see
      closed_ = true;
      ws_.async_close(websocket::close_reason(websocket::close_code::policy_error, "SessionNotFound"),
                      [self = shared_from_this()](beast::error_code) {});
      return;
    }
    do_read();
  }

  // Inbound frames are ignored; reading keeps pings and close frames flowing.
  void do_read() {
    ws_.async_read(inbound_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
      if (ec) {
        self->closed_ = true;
        return;
      }
      self->inbound_.consume(self->inbound_.size());
      self->do_read();
    });
  }

  void enqueue(std::string doc) {
    outbox_.push_back(std::move(doc));
    if (outbox_.size() == 1) do_write();
  }

  void do_write() {
    ws_.text(true);
    ws_.async_write(asio::buffer(outbox_.front()), [self = shared_from_this()](beast::error_code ec, std::size_t) {
      --self->queued_;
      if (ec) {
        self->closed_ = true;
        return;
      }
      self->outbox_.pop_front();
      if (!self->outbox_.empty()) self->do_write();
    });
  }

  void close() {
    ws_.async_close(websocket::close_code::try_again_later, [self = shared_from_this()](beast::error_code) {});
  }

  websocket::stream<beast::tcp_stream> ws_;
  SessionManager& sessions_;
  std::string session_id_;
  std::optional<std::uint64_t> subscription_;
  beast::flat_buffer inbound_;
  std::deque<std::string> outbox_;
  std::atomic<std::size_t> queued_{0};
  std::atomic<bool> closed_{false};
};

class HttpConnection : public std::enable_shared_from_this<HttpConnection> {
 public:
  HttpConnection(tcp::socket&& socket, SessionManager& sessions, asio::thread_pool& workers)
      : stream_(std::move(socket)), sessions_(sessions), workers_(workers) {}

  void run() {
    asio::dispatch(stream_.get_executor(), [self = shared_from_this()] { self->do_read(); });
  }

 private:
  void do_read() {
    parser_.emplace();
    parser_->body_limit(8 * 1024 * 1024);
    stream_.expires_after(std::chrono::seconds(60));
    bhttp::async_read(stream_, buffer_, *parser_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
      self->on_read(ec);
    });
  }

  void on_read(beast::error_code ec) {
    if (ec == bhttp::error::end_of_stream) return shutdown();
    if (ec) return;
    Request req = parser_->release();

    if (websocket::is_upgrade(req)) {
      auto sp = parse_session_path(std::string_view(req.target().data(), req.target().size()));
      if (sp && sp->leaf == "events") {
        stream_.expires_never();
        std::make_shared<EventSocket>(stream_.release_socket(), sessions_, sp->id)->run(std::move(req));
        return;
      }
    }
    // Route off the I/O threads: a cast may wait on the language model.
    stream_.expires_never();
    asio::post(workers_, [self = shared_from_this(), req = std::move(req)]() mutable {
      auto res = std::make_shared<Response>(route(self->sessions_, req));
      asio::post(self->stream_.get_executor(), [self, res] { self->write(res); });
    });
  }

  void write(std::shared_ptr<Response> res) {
    bool close = res->need_eof();
    stream_.expires_after(std::chrono::seconds(60));
    bhttp::async_write(stream_, *res, [self = shared_from_this(), res, close](beast::error_code ec, std::size_t) {
      if (ec) return;
      if (close) return self->shutdown();
      self->do_read();
    });
  }

  void shutdown() {
    beast::error_code ec;
    stream_.socket().shutdown(tcp::socket::shutdown_send, ec);
  }

  beast::tcp_stream stream_;
  beast::flat_buffer buffer_;
  std::optional<bhttp::request_parser<bhttp::string_body>> parser_;
  SessionManager& sessions_;
  asio::thread_pool& workers_;
};

/// Listens on address:port (port 0 picks a free port) with a few I/O threads
/// and a worker pool for request handling.
class Server {
 public:
  Server(SessionManager& sessions, const std::string& address, unsigned short port, int io_threads = 2,
         int worker_threads = 8)
      : sessions_(sessions), acceptor_(ioc_), io_threads_(std::max(1, io_threads)), workers_(std::max(1, worker_threads)) {
    tcp::endpoint endpoint{asio::ip::make_address(address), port};
    acceptor_.open(endpoint.protocol());
    acceptor_.set_option(asio::socket_base::reuse_address(true));
    acceptor_.bind(endpoint);
    acceptor_.listen(asio::socket_base::max_listen_connections);
  }

  ~Server() { stop(); }

  unsigned short port() const { return acceptor_.local_endpoint().port(); }

  void start() {
    do_accept();
    for (int i = 0; i < io_threads_; ++i) threads_.emplace_back([this] { ioc_.run(); });
  }

  void stop() {
    if (stopped_.exchange(true)) return;
    asio::post(ioc_, [this] {
      beast::error_code ec;
      acceptor_.close(ec);
    });
    ioc_.stop();
    for (auto& t : threads_)
      if (t.joinable()) t.join();
    threads_.clear();
    workers_.join();
  }

 private:
  void do_accept() {
    acceptor_.async_accept(asio::make_strand(ioc_), [this](beast::error_code ec, tcp::socket socket) {
      if (ec) return;
      std::make_shared<HttpConnection>(std::move(socket), sessions_, workers_)->run();
      do_accept();
    });
  }

  SessionManager& sessions_;
  asio::io_context ioc_;
  tcp::acceptor acceptor_;
  int io_threads_;
  asio::thread_pool workers_;
  std::vector<std::thread> threads_;
  std::atomic<bool> stopped_{false};
};

}  // namespace molvoice::http
