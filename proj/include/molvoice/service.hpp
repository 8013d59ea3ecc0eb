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
#include <chrono>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "molvoice/command.hpp"
#include "molvoice/error.hpp"
#include "molvoice/gateway.hpp"
#include "molvoice/lexicon.hpp"
#include "molvoice/prompt.hpp"
#include "molvoice/scene.hpp"

namespace molvoice {

// ---------------------------------------------------------------------------
// Documents

/// Stable, machine-readable scene summary (see docs/api.md).
inline nlohmann::json scene_snapshot(const SceneState& scene) {
  using nlohmann::json;
  json groups = json::array();
  std::vector<std::pair<char, std::string>> order;
  std::map<std::pair<char, std::string>, std::vector<std::size_t>> members;
  for (std::size_t i = 0; i < scene.structure.atoms.size(); ++i) {
    const Atom& a = scene.structure.atoms[i];
    auto key = std::make_pair(a.chain, a.resname);
    auto& list = members[key];
    if (list.empty()) order.push_back(key);
    list.push_back(i);
  }
  for (const auto& key : order) {
    const auto& idx = members[key];
    double sf_min = 1e300, sf_max = -1e300, st_min = 1e300, st_max = -1e300;
    std::map<std::string, int> colors;
    for (std::size_t i : idx) {
      const AtomRep& r = scene.rep[i];
      sf_min = std::min(sf_min, r.spacefill);
      sf_max = std::max(sf_max, r.spacefill);
      st_min = std::min(st_min, r.sticks);
      st_max = std::max(st_max, r.sticks);
      colors[std::string(to_string(r.color))]++;
    }
    groups.push_back({{"chain", std::string(1, key.first)},
                      {"resname", key.second},
                      {"atomCount", idx.size()},
                      {"spacefill", {{"min", sf_min}, {"max", sf_max}}},
                      {"sticks", {{"min", st_min}, {"max", st_max}}},
                      {"colors", colors},
                      {"color", colors.size() == 1 ? colors.begin()->first : std::string("mixed")}});
  }
  return {{"atomCount", count_atoms(scene)},
          {"title", scene.structure.title},
          {"sim",
           {{"temperature", scene.sim.temperature},
            {"updateRate", scene.sim.updateRate},
            {"running", scene.sim.running}}},
          {"view", {{"zoomFactor", scene.view.zoomFactor}}},
          {"selectionSize", scene.selection.size()},
          {"repSummary", groups}};
}

/// Changed fields only; an empty object means nothing visible changed.
inline nlohmann::json scene_diff(const SceneState& before, const SceneState& after) {
  nlohmann::json diff = nlohmann::json::object();
  auto field = [&](const char* name, const nlohmann::json& b, const nlohmann::json& a) {
    if (b != a) diff[name] = {{"before", b}, {"after", a}};
  };
  field("sim.temperature", before.sim.temperature, after.sim.temperature);
  field("sim.updateRate", before.sim.updateRate, after.sim.updateRate);
  field("sim.running", before.sim.running, after.sim.running);
  field("view.zoomFactor", before.view.zoomFactor, after.view.zoomFactor);
  if (before.selection != after.selection)
    diff["selection"] = {{"before", before.selection.size()}, {"after", after.selection.size()}};
  std::size_t changed = 0, spacefill = 0, sticks = 0, color = 0;
  for (std::size_t i = 0; i < std::min(before.rep.size(), after.rep.size()); ++i) {
    const AtomRep &b = before.rep[i], &a = after.rep[i];
    if (b == a) continue;
    ++changed;
    spacefill += b.spacefill != a.spacefill;
    sticks += b.sticks != a.sticks;
    color += b.color != a.color;
  }
  if (changed)
    diff["rep"] = {{"atomsChanged", changed}, {"spacefill", spacefill}, {"sticks", sticks}, {"color", color}};
  return diff;
}

struct UtteranceResult {
  std::string text;
  std::string normalizedText;
  std::string rawScript;
  std::vector<std::string> statements;
  std::vector<std::string> comments;
  std::vector<std::string> responses;
  nlohmann::json sceneDiff = nlohmann::json::object();
  bool volumeUp = false;
  std::optional<nlohmann::json> error;  // {code, message, detail}

  nlohmann::json to_json() const {
    return {{"text", text},
            {"normalizedText", normalizedText},
            {"rawScript", rawScript},
            {"statements", statements},
            {"comments", comments},
            {"responses", responses},
            {"sceneDiff", sceneDiff},
            {"volumeUp", volumeUp},
            {"error", error ? *error : nlohmann::json(nullptr)}};
  }
};

struct Event {
  std::string sessionId;
  std::uint64_t seq = 0;        // per session, strictly increasing
  std::uint64_t utterance = 0;  // per session utterance counter
  std::string stage;            // transcript | normalized | script | executed
  nlohmann::json payload;

  nlohmann::json to_json() const {
    return {{"session", sessionId}, {"seq", seq}, {"utterance", utterance}, {"stage", stage}, {"payload", payload}};
  }
};

/// Subscribers must not block. Returning false unsubscribes (slow or closed
/// consumers are dropped rather than buffered).
using EventCallback = std::function<bool(const Event&)>;

class EventHub {
 public:
  std::uint64_t subscribe(EventCallback cb) {
    std::lock_guard lock(mu_);
    subs_.emplace(++next_id_, std::move(cb));
    return next_id_;
  }

  void unsubscribe(std::uint64_t id) {
    std::lock_guard lock(mu_);
    subs_.erase(id);
  }

  void publish(const Event& e) {
    std::lock_guard lock(mu_);
    for (auto it = subs_.begin(); it != subs_.end();) it = it->second(e) ? std::next(it) : subs_.erase(it);
  }

  std::size_t size() const {
    std::lock_guard lock(mu_);
    return subs_.size();
  }

 private:
  mutable std::mutex mu_;
  std::map<std::uint64_t, EventCallback> subs_;
  std::uint64_t next_id_ = 0;
};

// ---------------------------------------------------------------------------
// Sessions

struct ServiceConfig {
  GatewayConfig gateway;
  std::shared_ptr<const PromptTemplate> prompt;
  std::shared_ptr<const Lexicon> lexicon;
  std::string defaultPdb;
  Clock clock = system_clock();
  std::size_t maxPending = 16;
  // Overrides backend construction (tests); nullptr means "from gateway config".
  std::function<std::unique_ptr<ChatBackend>(const GatewayConfig&)> backendFactory;
};

class Session {
 public:
  Session(std::string id, SceneState scene, const ServiceConfig& config)
      : id_(std::move(id)),
        createdAt_(std::chrono::system_clock::now()),
        config_(config.gateway),
        scene_(std::move(scene)),
        gateway_(config.prompt, config.gateway, config.backendFactory ? config.backendFactory(config.gateway) : nullptr) {}

  const std::string& id() const { return id_; }
  std::chrono::system_clock::time_point createdAt() const { return createdAt_; }
  const GatewayConfig& config() const { return config_; }
  EventHub& events() { return events_; }

  SceneState scene() const {
    std::lock_guard lock(state_mu_);
    return scene_;
  }

  History history() const {
    std::lock_guard lock(state_mu_);
    return history_;
  }

 private:
  friend class SessionManager;

  std::string id_;
  std::chrono::system_clock::time_point createdAt_;
  GatewayConfig config_;

  std::mutex run_mu_;            // one pipeline run at a time
  mutable std::mutex state_mu_;  // short critical sections on scene/history
  std::atomic<std::size_t> pending_{0};
  SceneState scene_;
  Gateway gateway_;  // touched only under run_mu_
  History history_;  // copy of the gateway's history, published under state_mu_
  EventHub events_;
  std::uint64_t utterances_ = 0;
  std::uint64_t seq_ = 0;
};

/// Owns all sessions and runs the utterance pipeline:
/// transcript -> normalize -> cast -> parse -> validate -> execute.
class SessionManager {
 public:
  explicit SessionManager(ServiceConfig config) : config_(std::move(config)) {
    if (!config_.prompt) throw Error(ErrorCode::InvalidConfig, "no prompt template");
    if (!config_.lexicon) config_.lexicon = std::make_shared<const Lexicon>();
    config_.gateway.validate();
  }

  std::string create_session(std::optional<std::string_view> pdb = std::nullopt) {
    std::string_view source = pdb && !text::trim(*pdb).empty() ? *pdb : std::string_view(config_.defaultPdb);
    SceneState scene = make_scene(load_pdb(source));
    std::lock_guard lock(mu_);
    std::string id;
    do id = new_id(); while (sessions_.count(id));
    sessions_.emplace(id, std::make_shared<Session>(id, std::move(scene), config_));
    return id;
  }

  std::shared_ptr<Session> find(const std::string& id) const {
    std::lock_guard lock(mu_);
    auto it = sessions_.find(id);
    if (it == sessions_.end())
      throw Error(ErrorCode::SessionNotFound, "no session '" + id + "'", {{"session", id}});
    return it->second;
  }

  bool erase(const std::string& id) {
    std::lock_guard lock(mu_);
    return sessions_.erase(id) > 0;
  }

  std::size_t size() const {
    std::lock_guard lock(mu_);
    return sessions_.size();
  }

  nlohmann::json get_scene(const std::string& id) const { return scene_snapshot(find(id)->scene()); }
  std::string get_pdb(const std::string& id) const { return write_pdb(find(id)->scene()); }

  std::uint64_t subscribe(const std::string& id, EventCallback cb) { return find(id)->events().subscribe(std::move(cb)); }
  void unsubscribe(const std::string& id, std::uint64_t sub) { find(id)->events().unsubscribe(sub); }

  UtteranceResult submit_utterance(const std::string& id, std::string_view text) {
    std::shared_ptr<Session> session = find(id);
    if (text::trim(text).empty()) throw Error(ErrorCode::EmptyUtterance, "utterance is empty");

    struct PendingGuard {
      std::atomic<std::size_t>& n;
      ~PendingGuard() { --n; }
    };
    if (session->pending_.fetch_add(1) >= config_.maxPending) {
      --session->pending_;
      throw Error(ErrorCode::QueueFull, "session has too many pending utterances",
                  {{"session", id}, {"limit", config_.maxPending}});
    }
    PendingGuard guard{session->pending_};
    std::lock_guard run(session->run_mu_);
    return run_pipeline(*session, text);
  }

  const ServiceConfig& config() const { return config_; }

 private:
  static std::string new_id() {
    static thread_local std::mt19937_64 rng{std::random_device{}()};
    static constexpr char hex[] = "0123456789abcdef";
    std::string id;
    for (int i = 0; i < 2; ++i) {
      std::uint64_t v = rng();
      for (int j = 0; j < 16; ++j, v >>= 4) id += hex[v & 0xF];
    }
    return id;
  }

  // Caller holds session.run_mu_.
  UtteranceResult run_pipeline(Session& session, std::string_view text) {
    const std::uint64_t utterance = ++session.utterances_;
    auto emit = [&](const char* stage, nlohmann::json payload) {
      session.events_.publish({session.id_, ++session.seq_, utterance, stage, std::move(payload)});
    };
    auto didnt_understand = [](UtteranceResult& r, const Error& e) {
      r.error = e.to_json();
      r.responses.assign(1, std::string(kDidntUnderstand));
    };

    UtteranceResult result;
    result.text = std::string(text);
    emit("transcript", {{"text", result.text}});

    result.normalizedText = normalize(text, *config_.lexicon);
    emit("normalized", {{"text", result.normalizedText}});

    try {
      // Only the gateway's own history is touched here, and only on success.
      result.rawScript = session.gateway_.cast(result.normalizedText);
      std::lock_guard lock(session.state_mu_);
      session.history_ = session.gateway_.history();
    } catch (const Error& e) {
      result.error = e.to_json();
      emit("executed", result.to_json());
      return result;
    }

    std::optional<ValidatedScript> script;
    try {
      Script parsed = parse_script(result.rawScript);
      for (const auto& s : parsed.statements) result.statements.push_back(render(s));
      ValidationResult v = validate_script(parsed);
      if (v.ok()) {
        script = std::move(v.script);
      } else {
        nlohmann::json all = nlohmann::json::array();
        for (const auto& e : v.errors) all.push_back(e.to_json());
        const Error& first = v.errors.front();
        didnt_understand(result, Error(first.code(), first.what(), {{"errors", all}}));
      }
    } catch (const Error& e) {
      didnt_understand(result, e);
    }
    emit("script", {{"rawScript", result.rawScript},
                    {"statements", result.statements},
                    {"valid", script.has_value()},
                    {"error", result.error ? *result.error : nlohmann::json(nullptr)}});
    if (!script) {
      emit("executed", result.to_json());
      return result;
    }

    SceneState before = session.scene();
    SceneState working = before;
    ExecutionReport report = execute_script(*script, working, config_.clock);
    result.comments = report.comments;
    result.responses = report.responses;
    result.volumeUp = report.volumeUp;
    if (report.failedAt) {
      result.error = report.failedAt->error.to_json();
    } else {
      result.sceneDiff = scene_diff(before, working);
      working.lastUserMessage = result.text;
      std::lock_guard lock(session.state_mu_);
      session.scene_ = std::move(working);
    }
    emit("executed", result.to_json());
    return result;
  }

  ServiceConfig config_;
  mutable std::mutex mu_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
};

}  // namespace molvoice
