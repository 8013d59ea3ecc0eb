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

#include <deque>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "molvoice/command.hpp"
#include "molvoice/error.hpp"
#include "molvoice/lexicon.hpp"
#include "molvoice/text.hpp"

namespace molvoice {

enum class Role { System, User, Assistant };

constexpr std::string_view to_string(Role r) {
  switch (r) {
    case Role::System: return "system";
    case Role::User: return "user";
    case Role::Assistant: return "assistant";
  }
  return "?";
}

struct ChatMessage {
  Role role;
  std::string content;
  bool operator==(const ChatMessage&) const = default;
};

struct ExamplePair {
  std::string user;
  std::string assistant;
  bool operator==(const ExamplePair&) const = default;
};

struct PromptTemplate {
  std::string system;
  std::vector<ExamplePair> examples;
};

struct Turn {
  std::string user;
  std::string assistant;
  bool operator==(const Turn&) const = default;
};

/// Rolling conversation context, oldest turn first.
struct History {
  std::deque<Turn> turns;
  std::size_t maxTurns = 50;

  void append(Turn t) {
    turns.push_back(std::move(t));
    while (turns.size() > maxTurns) turns.pop_front();
  }
  bool operator==(const History&) const = default;
};

inline constexpr std::string_view kMisrecognitionPlaceholder = "{{MISRECOGNITIONS}}";

/// Parses the prompt data file. Sections start with a line "### system",
/// "### user" or "### assistant"; lines starting with "#!" are file comments.
/// The placeholder {{MISRECOGNITIONS}} in the system text is replaced by the
/// lexicon's hint sentence. Every assistant example must validate as a script.
inline PromptTemplate load_prompt_template(std::string_view source, const Lexicon& lexicon) {
  struct Section {
    std::string role;
    std::string body;
    std::size_t line;
  };
  std::vector<Section> sections;
  std::size_t line_no = 0;
  for (std::string_view line : text::split(source, '\n')) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.substr(0, 2) == "#!") continue;
    if (line.substr(0, 4) == "### ") {
      sections.push_back({std::string(text::trim(line.substr(4))), {}, line_no});
      continue;
    }
    if (sections.empty()) {
      if (!text::trim(line).empty())
        throw Error(ErrorCode::InvalidTemplate, "text before the first section header", {{"line", line_no}});
      continue;
    }
    sections.back().body += std::string(line) + "\n";
  }
  auto invalid = [](const Section& s, const std::string& why) {
    return Error(ErrorCode::InvalidTemplate, "prompt template line " + std::to_string(s.line) + ": " + why,
                 {{"line", s.line}});
  };
  if (sections.empty() || sections.front().role != "system")
    throw Error(ErrorCode::InvalidTemplate, "prompt template must start with a system section");

  PromptTemplate tpl;
  tpl.system = std::string(text::trim(sections.front().body));
  std::string hints = hint_sentence(lexicon);
  if (hints.empty()) hints = "misheard domain terms";
  for (std::size_t at; (at = tpl.system.find(kMisrecognitionPlaceholder)) != std::string::npos;)
    tpl.system.replace(at, kMisrecognitionPlaceholder.size(), hints);
  if (tpl.system.empty()) throw invalid(sections.front(), "empty system text");

  for (std::size_t i = 1; i < sections.size(); i += 2) {
    if (sections[i].role != "user") throw invalid(sections[i], "expected a user section");
    if (i + 1 >= sections.size() || sections[i + 1].role != "assistant")
      throw invalid(sections[i], "user section without a following assistant section");
    ExamplePair pair{std::string(text::trim(sections[i].body)), std::string(text::trim(sections[i + 1].body))};
    if (pair.user.empty() || pair.assistant.empty()) throw invalid(sections[i], "empty example");
    try {
      auto v = validate_script(parse_script(pair.assistant));
      if (!v.ok()) throw v.errors.front();
    } catch (const Error& e) {
      throw Error(ErrorCode::InvalidTemplate,
                  "prompt template line " + std::to_string(sections[i + 1].line) +
                      ": assistant example does not validate: " + e.what(),
                  {{"line", sections[i + 1].line}, {"cause", e.to_json()}});
    }
    tpl.examples.push_back(std::move(pair));
  }
  return tpl;
}

inline std::vector<ChatMessage> build_messages(const PromptTemplate& tpl, const History& history,
                                               std::string_view user_text) {
  if (text::trim(user_text).empty()) throw Error(ErrorCode::EmptyUtterance, "utterance is empty");
  std::vector<ChatMessage> messages;
  messages.reserve(2 + 2 * (tpl.examples.size() + history.turns.size()));
  messages.push_back({Role::System, tpl.system});
  for (const auto& ex : tpl.examples) {
    messages.push_back({Role::User, ex.user});
    messages.push_back({Role::Assistant, ex.assistant});
  }
  for (const auto& t : history.turns) {
    messages.push_back({Role::User, t.user});
    messages.push_back({Role::Assistant, t.assistant});
  }
  messages.push_back({Role::User, std::string(user_text)});
  return messages;
}

/// ceil(characters / 4), counting UTF-8 code points.
inline std::size_t estimate_tokens(std::string_view s) {
  std::size_t chars = 0;
  for (char c : s)
    if ((static_cast<unsigned char>(c) & 0xC0) != 0x80) ++chars;
  return (chars + 3) / 4;
}

inline std::size_t estimate_tokens(const Turn& t) { return estimate_tokens(t.user) + estimate_tokens(t.assistant); }

/// System text plus all example pairs: the fixed part of every request.
inline std::size_t estimate_tokens(const PromptTemplate& tpl) {
  std::size_t total = estimate_tokens(tpl.system);
  for (const auto& ex : tpl.examples) total += estimate_tokens(ex.user) + estimate_tokens(ex.assistant);
  return total;
}

/// Drops whole turns, oldest first, until template + history fit the budget.
inline History trim_history(const PromptTemplate& tpl, History history, std::size_t token_budget) {
  std::size_t fixed = estimate_tokens(tpl);
  if (fixed > token_budget)
    throw Error(ErrorCode::BudgetTooSmall,
                "token budget " + std::to_string(token_budget) + " is below the prompt size " + std::to_string(fixed),
                {{"budget", token_budget}, {"prompt", fixed}});
  std::size_t total = fixed;
  for (const auto& t : history.turns) total += estimate_tokens(t);
  while (total > token_budget && !history.turns.empty()) {
    total -= estimate_tokens(history.turns.front());
    history.turns.pop_front();
  }
  return history;
}

// ---------------------------------------------------------------------------
// Offline backend

inline constexpr std::string_view kDidntUnderstandScript = "didntUnderstand();";

/// Lowercase, punctuation to spaces, whitespace collapsed.
inline std::string utterance_key(std::string_view s) {
  std::string out;
  bool pending_space = false;
  for (char c : s) {
    if (text::is_alnum(c) || static_cast<unsigned char>(c) >= 0x80) {
      if (pending_space && !out.empty()) out += ' ';
      pending_space = false;
      out += text::to_lower(c);
    } else if (c != '\'') {
      pending_space = true;
    }
  }
  return out;
}

inline bool is_replay_request(std::string_view transcript) {
  std::string key = utterance_key(transcript);
  for (std::string_view phrase : {"again", "repeat", "do it again", "do that again", "repeat that", "once more",
                                  "one more time", "same again", "again please", "repeat please"})
    if (key == phrase) return true;
  return false;
}

/// Deterministic stand-in for the language model: replays the previous
/// assistant turn for "again"-style requests, otherwise looks the utterance up
/// in the template's example table (first match wins), otherwise gives up
/// with didntUnderstand().
inline std::string mock_cast(const PromptTemplate& tpl, std::string_view transcript, const History& history) {
  if (is_replay_request(transcript))
    return history.turns.empty() ? std::string(kDidntUnderstandScript) : history.turns.back().assistant;
  std::string key = utterance_key(transcript);
  if (!key.empty())
    for (const auto& ex : tpl.examples)
      if (utterance_key(ex.user) == key) return ex.assistant;
  return std::string(kDidntUnderstandScript);
}

}  // namespace molvoice
