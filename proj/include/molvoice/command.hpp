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

#include <array>
#include <chrono>
#include <ctime>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "molvoice/error.hpp"
#include "molvoice/scene.hpp"
#include "molvoice/selection.hpp"
#include "molvoice/text.hpp"

// The command script is what the language model is allowed to emit:
//
//   script    := (line-comment | statement | separator)*
//   separator := ";" | newline
//   statement := IDENT "(" [arg ("," arg)*] ")" | IDENT VALUE
//   arg       := NUMBER | 'text' | "text"
//
// Parsing only recognizes the shape. validate_script() then checks every name
// against the closed whitelist, and only a ValidatedScript can be executed.
namespace molvoice {

// ---------------------------------------------------------------------------
// Parsed form

struct Arg {
  std::variant<double, std::string> value;
  bool is_number() const { return std::holds_alternative<double>(value); }
  bool is_string() const { return std::holds_alternative<std::string>(value); }
  double number() const { return std::get<double>(value); }
  const std::string& str() const { return std::get<std::string>(value); }
  bool operator==(const Arg&) const = default;
};

namespace stmt {
struct Comment {
  std::string text;
  bool operator==(const Comment&) const = default;
};
struct Call {
  std::string name;
  std::vector<Arg> args;
  std::size_t offset = 0;
  bool operator==(const Call& o) const { return name == o.name && args == o.args; }
};
// Bare "keyword value" command such as "spacefill 3" or "color red".
struct Bare {
  std::string keyword;
  std::string value;
  std::size_t offset = 0;
  bool operator==(const Bare& o) const { return keyword == o.keyword && value == o.value; }
};
}  // namespace stmt

using Statement = std::variant<stmt::Comment, stmt::Call, stmt::Bare>;

struct Script {
  std::vector<Statement> statements;
  std::string raw;
};

namespace detail {

inline bool is_ident_start(char c) { return text::is_alpha(c) || c == '_'; }
inline bool is_ident_char(char c) { return text::is_alnum(c) || c == '_'; }

inline Error syntax_error(std::string_view fragment, std::size_t position, std::string_view why) {
  return Error(ErrorCode::SyntaxError,
               "syntax error at offset " + std::to_string(position) + " (" + std::string(why) + "): '" +
                   std::string(fragment) + "'",
               {{"fragment", std::string(fragment)}, {"position", position}, {"reason", std::string(why)}});
}

inline std::string render_string_literal(const std::string& s) {
  char q = s.find('\'') == std::string::npos ? '\'' : '"';
  return q + s + q;
}

inline std::vector<Arg> parse_args(std::string_view inner, std::string_view fragment, std::size_t position) {
  std::vector<Arg> args;
  if (text::trim(inner).empty()) return args;
  std::vector<std::string_view> pieces;
  char quote = 0;
  std::size_t start = 0;
  for (std::size_t i = 0; i < inner.size(); ++i) {
    char c = inner[i];
    if (quote) {
      if (c == quote) quote = 0;
    } else if (c == '\'' || c == '"') {
      quote = c;
    } else if (c == ',') {
      pieces.push_back(inner.substr(start, i - start));
      start = i + 1;
    }
  }
  pieces.push_back(inner.substr(start));
  for (std::string_view piece : pieces) {
    piece = text::trim(piece);
    if (piece.empty()) throw syntax_error(fragment, position, "empty argument");
    char q = piece.front();
    if (q == '\'' || q == '"') {
      if (piece.size() < 2 || piece.back() != q || piece.substr(1, piece.size() - 2).find(q) != std::string_view::npos)
        throw syntax_error(fragment, position, "malformed string argument");
      args.push_back({std::string(piece.substr(1, piece.size() - 2))});
    } else if (auto number = text::parse_double(piece)) {
      args.push_back({*number});
    } else {
      throw syntax_error(fragment, position, "arguments must be numbers or quoted strings");
    }
  }
  return args;
}

inline bool is_bare_value(std::string_view v) {
  return !v.empty() && std::all_of(v.begin(), v.end(), [](char c) {
    return text::is_alnum(c) || c == '_' || c == '.' || c == '+' || c == '-';
  });
}

inline Statement parse_statement(std::string_view fragment, std::size_t position) {
  std::size_t i = 0;
  if (!is_ident_start(fragment[0])) throw syntax_error(fragment, position, "expected a command name");
  while (i < fragment.size() && is_ident_char(fragment[i])) ++i;
  std::string name(fragment.substr(0, i));
  std::string_view rest = fragment.substr(i);
  std::string_view after = text::trim(rest);

  if (!after.empty() && after.front() == '(') {
    // The fragment scanner guarantees balanced parentheses outside quotes.
    if (after.back() != ')') throw syntax_error(fragment, position, "text after closing parenthesis");
    std::string_view inner = after.substr(1, after.size() - 2);
    int depth = 0;
    char quote = 0;
    for (char c : inner) {
      if (quote) {
        if (c == quote) quote = 0;
      } else if (c == '\'' || c == '"') {
        quote = c;
      } else if (c == '(' || c == ')') {
        ++depth;
      }
    }
    if (depth) throw syntax_error(fragment, position, "nested parentheses");
    return stmt::Call{std::move(name), parse_args(inner, fragment, position), position};
  }
  if (after.empty()) throw syntax_error(fragment, position, "missing '(' or value");
  if (!text::is_space(rest.front()) || !is_bare_value(after))
    throw syntax_error(fragment, position, "expected 'name(args)' or 'keyword value'");
  return stmt::Bare{std::move(name), std::string(after), position};
}

}  // namespace detail

/// Splits model output into statements. Throws SyntaxError, UnbalancedQuote or
/// UnbalancedParen; never executes anything.
inline Script parse_script(std::string_view source) {
  Script script;
  script.raw = std::string(source);
  const std::size_t n = source.size();
  std::size_t i = 0;
  while (i < n) {
    char c = source[i];
    if (text::is_space(c) || c == ';') {
      ++i;
      continue;
    }
    if (source.compare(i, 2, "//") == 0) {
      std::size_t end = source.find('\n', i);
      if (end == std::string_view::npos) end = n;
      script.statements.push_back(stmt::Comment{std::string(text::trim(source.substr(i + 2, end - i - 2)))});
      i = end;
      continue;
    }
    // Scan one statement up to a top-level separator or trailing comment.
    std::size_t start = i;
    int depth = 0;
    char quote = 0;
    std::size_t quote_at = 0;
    for (; i < n; ++i) {
      c = source[i];
      if (quote) {
        if (c == '\n') break;
        if (c == quote) quote = 0;
        continue;
      }
      if (c == '\'' || c == '"') {
        quote = c;
        quote_at = i;
      } else if (c == '(') {
        ++depth;
      } else if (c == ')') {
        if (--depth < 0)
          throw Error(ErrorCode::UnbalancedParen, "unexpected ')' at offset " + std::to_string(i),
                      {{"position", i}, {"fragment", std::string(source.substr(start, i - start + 1))}});
      } else if (c == '\n' || (depth == 0 && c == ';') || (depth == 0 && source.compare(i, 2, "//") == 0)) {
        break;
      }
    }
    std::string_view fragment = text::trim(source.substr(start, i - start));
    if (quote)
      throw Error(ErrorCode::UnbalancedQuote, "unterminated string starting at offset " + std::to_string(quote_at),
                  {{"position", quote_at}, {"fragment", std::string(fragment)}});
    if (depth > 0)
      throw Error(ErrorCode::UnbalancedParen, "unclosed '(' in statement at offset " + std::to_string(start),
                  {{"position", start}, {"fragment", std::string(fragment)}});
    if (!fragment.empty()) script.statements.push_back(detail::parse_statement(fragment, start));
  }
  return script;
}

// ---------------------------------------------------------------------------
// Whitelist

enum class FunctionName {
  CountAtoms,
  Acknowledge,
  SayTime,
  SayDate,
  ZoomIn,
  ZoomOut,
  ChangeTemperature,
  SetTemperature,
  ChangeUpdateRate,
  StartSimulation,
  StopSimulation,
  WritePdb,
  Select,
  SpeakUp,
  DidntUnderstand,
};

enum class ArgKind { None, Number, String };

struct FunctionSpec {
  FunctionName fn;
  std::string_view name;
  ArgKind arg;
};

inline constexpr std::array<FunctionSpec, 15> kFunctions = {{
    {FunctionName::CountAtoms, "countAtoms", ArgKind::None},
    {FunctionName::Acknowledge, "acknowledge", ArgKind::None},
    {FunctionName::SayTime, "sayTime", ArgKind::None},
    {FunctionName::SayDate, "sayDate", ArgKind::None},
    {FunctionName::ZoomIn, "zoomIn", ArgKind::None},
    {FunctionName::ZoomOut, "zoomOut", ArgKind::None},
    {FunctionName::ChangeTemperature, "changeTemperature", ArgKind::Number},
    {FunctionName::SetTemperature, "setTemperature", ArgKind::Number},
    {FunctionName::ChangeUpdateRate, "changeUpdateRate", ArgKind::Number},
    {FunctionName::StartSimulation, "startSimulation", ArgKind::None},
    {FunctionName::StopSimulation, "stopSimulation", ArgKind::None},
    {FunctionName::WritePdb, "writePDB", ArgKind::None},
    {FunctionName::Select, "select", ArgKind::String},
    {FunctionName::SpeakUp, "speakUp", ArgKind::None},
    {FunctionName::DidntUnderstand, "didntUnderstand", ArgKind::None},
}};

inline constexpr std::array<std::string_view, 3> kRepKeywords = {"spacefill", "sticks", "color"};

inline const FunctionSpec* find_function(std::string_view name) {
  for (const auto& f : kFunctions)
    if (f.name == name) return &f;
  return nullptr;
}

constexpr std::string_view to_string(FunctionName fn) {
  for (const auto& f : kFunctions)
    if (f.fn == fn) return f.name;
  return "?";
}

// ---------------------------------------------------------------------------
// Validated form

struct Invocation {
  FunctionName fn;
  double number = 0;                       // ArgKind::Number
  std::optional<SelectionExpr> selection;  // select()
  std::string selectionText;
};

struct RepCommand {
  enum class Kind { Spacefill, Sticks, Color } kind;
  double radius = 0;
  Color color = Color::White;
};

using ValidatedStatement = std::variant<stmt::Comment, Invocation, RepCommand>;

struct ValidationResult;
class ValidatedScript;
ValidationResult validate_script(const Script& script);

/// Only validate_script() can produce one of these.
class ValidatedScript {
 public:
  const std::vector<ValidatedStatement>& statements() const { return statements_; }
  const std::string& raw() const { return raw_; }

  /// Same script with every comment dropped.
  ValidatedScript without_comments() const {
    ValidatedScript out;
    out.raw_ = raw_;
    for (const auto& s : statements_)
      if (!std::holds_alternative<stmt::Comment>(s)) out.statements_.push_back(s);
    return out;
  }

 private:
  ValidatedScript() = default;
  friend ValidationResult validate_script(const Script& script);
  std::vector<ValidatedStatement> statements_;
  std::string raw_;
};

struct ValidationResult {
  std::optional<ValidatedScript> script;  // set iff errors is empty
  std::vector<Error> errors;
  bool ok() const { return script.has_value(); }
};

/// All-or-nothing: a single problem anywhere rejects the whole script.
inline ValidationResult validate_script(const Script& script) {
  ValidationResult result;
  ValidatedScript validated;
  validated.raw_ = script.raw;
  auto reject = [&](std::size_t index, Error e) {
    nlohmann::json detail = e.detail();
    detail["statement"] = index;
    result.errors.emplace_back(e.code(), e.what(), std::move(detail));
  };

  for (std::size_t index = 0; index < script.statements.size(); ++index) {
    const Statement& s = script.statements[index];
    if (auto* comment = std::get_if<stmt::Comment>(&s)) {
      validated.statements_.push_back(*comment);
    } else if (auto* call = std::get_if<stmt::Call>(&s)) {
      const FunctionSpec* spec = find_function(call->name);
      if (!spec) {
        reject(index, Error(ErrorCode::NotWhitelisted, "'" + call->name + "' is not an available function",
                            {{"name", call->name}}));
        continue;
      }
      std::size_t expected = spec->arg == ArgKind::None ? 0 : 1;
      if (call->args.size() != expected) {
        reject(index, Error(ErrorCode::ArityMismatch,
                            call->name + "() takes " + std::to_string(expected) + " argument(s), got " +
                                std::to_string(call->args.size()),
                            {{"name", call->name}, {"expected", expected}, {"got", call->args.size()}}));
        continue;
      }
      Invocation inv;
      inv.fn = spec->fn;
      if (spec->arg == ArgKind::Number) {
        if (!call->args[0].is_number()) {
          reject(index, Error(ErrorCode::BadArgType, call->name + "() expects a number",
                              {{"name", call->name}, {"position", 0}}));
          continue;
        }
        inv.number = call->args[0].number();
      } else if (spec->arg == ArgKind::String) {
        if (!call->args[0].is_string()) {
          reject(index, Error(ErrorCode::BadArgType, call->name + "() expects a quoted selection",
                              {{"name", call->name}, {"position", 0}}));
          continue;
        }
        try {
          inv.selection = parse_selection(call->args[0].str());
          inv.selectionText = call->args[0].str();
        } catch (const Error& inner) {
          reject(index, Error(ErrorCode::BadSelection, std::string("bad selection: ") + inner.what(),
                              {{"selection", call->args[0].str()}, {"cause", inner.to_json()}}));
          continue;
        }
      }
      validated.statements_.push_back(std::move(inv));
    } else {
      const auto& bare = std::get<stmt::Bare>(s);
      std::string keyword = text::lower(bare.keyword);
      if (keyword == "color") {
        auto color = parse_color(bare.value);
        if (!color) {
          reject(index, Error(ErrorCode::UnknownColor, "unknown color '" + bare.value + "'", {{"color", bare.value}}));
          continue;
        }
        validated.statements_.push_back(RepCommand{RepCommand::Kind::Color, 0, *color});
      } else if (keyword == "spacefill" || keyword == "sticks") {
        auto radius = text::parse_double(bare.value);
        if (!radius || *radius < 0) {
          reject(index, Error(ErrorCode::BadArgType, keyword + " expects a non-negative radius",
                              {{"name", keyword}, {"position", 0}, {"value", bare.value}}));
          continue;
        }
        validated.statements_.push_back(
            RepCommand{keyword == "spacefill" ? RepCommand::Kind::Spacefill : RepCommand::Kind::Sticks, *radius});
      } else {
        reject(index, Error(ErrorCode::NotWhitelisted, "'" + bare.keyword + "' is not an available command",
                            {{"name", bare.keyword}}));
      }
    }
  }
  if (result.errors.empty()) result.script = std::move(validated);
  return result;
}

// ---------------------------------------------------------------------------
// Rendering

inline std::string render(const Statement& s) {
  if (auto* c = std::get_if<stmt::Comment>(&s)) return "//" + c->text;
  if (auto* b = std::get_if<stmt::Bare>(&s)) return b->keyword + " " + b->value;
  const auto& call = std::get<stmt::Call>(s);
  std::string out = call.name + "(";
  for (std::size_t i = 0; i < call.args.size(); ++i) {
    if (i) out += ", ";
    out += call.args[i].is_number() ? text::format_number(call.args[i].number())
                                    : detail::render_string_literal(call.args[i].str());
  }
  return out + ")";
}

inline std::string render(const ValidatedStatement& s) {
  if (auto* c = std::get_if<stmt::Comment>(&s)) return "//" + c->text;
  if (auto* r = std::get_if<RepCommand>(&s)) {
    switch (r->kind) {
      case RepCommand::Kind::Spacefill: return "spacefill " + text::format_number(r->radius);
      case RepCommand::Kind::Sticks: return "sticks " + text::format_number(r->radius);
      case RepCommand::Kind::Color: return "color " + std::string(to_string(r->color));
    }
  }
  const auto& inv = std::get<Invocation>(s);
  std::string name(to_string(inv.fn));
  const FunctionSpec* spec = find_function(name);
  if (spec->arg == ArgKind::Number) return name + "(" + text::format_number(inv.number) + ")";
  if (spec->arg == ArgKind::String) return name + "(" + detail::render_string_literal(inv.selectionText) + ")";
  return name + "()";
}

// ---------------------------------------------------------------------------
// Execution

using Clock = std::function<std::chrono::system_clock::time_point()>;

inline Clock system_clock() {
  return [] { return std::chrono::system_clock::now(); };
}

struct ExecutionReport {
  struct Fault {
    std::size_t index;
    Error error;
  };
  std::vector<std::string> responses;  // comments first-class, then function output, in order
  std::vector<std::string> comments;
  bool mutated = false;
  bool volumeUp = false;  // speakUp()
  std::optional<std::string> pdb;
  std::optional<Fault> failedAt;
};

inline constexpr std::string_view kDidntUnderstand = "Sorry, I didn't understand";

namespace detail {

inline std::string format_utc(std::chrono::system_clock::time_point t, const char* fmt) {
  std::time_t tt = std::chrono::system_clock::to_time_t(t);
  std::tm tm{};
  gmtime_r(&tt, &tm);
  char buf[64];
  std::size_t n = std::strftime(buf, sizeof buf, fmt, &tm);
  return std::string(buf, n);
}

}  // namespace detail

/// Runs statements in order against the scene and stops at the first runtime
/// fault; statements before the fault have already been applied.
inline ExecutionReport execute_script(const ValidatedScript& script, SceneState& scene,
                                      const Clock& clock = system_clock()) {
  ExecutionReport report;
  const SceneState before = scene;
  const auto& statements = script.statements();
  for (std::size_t index = 0; index < statements.size(); ++index) {
    const ValidatedStatement& s = statements[index];
    try {
      if (auto* c = std::get_if<stmt::Comment>(&s)) {
        report.comments.push_back(c->text);
        report.responses.push_back(c->text);
      } else if (auto* r = std::get_if<RepCommand>(&s)) {
        switch (r->kind) {
          case RepCommand::Kind::Spacefill: apply_rep(scene, RepKind::Spacefill, r->radius); break;
          case RepCommand::Kind::Sticks: apply_rep(scene, RepKind::Sticks, r->radius); break;
          case RepCommand::Kind::Color: apply_color(scene, r->color); break;
        }
      } else {
        const auto& inv = std::get<Invocation>(s);
        switch (inv.fn) {
          case FunctionName::CountAtoms: {
            std::size_t n = count_atoms(scene);
            report.responses.push_back(std::to_string(n) + (n == 1 ? " atom" : " atoms"));
            break;
          }
          case FunctionName::Acknowledge: report.responses.push_back("OK"); break;
          case FunctionName::SayTime:
            report.responses.push_back("It is " + detail::format_utc(clock(), "%H:%M") + " UTC");
            break;
          case FunctionName::SayDate:
            report.responses.push_back("Today is " + detail::format_utc(clock(), "%A, %d %B %Y"));
            break;
          case FunctionName::ZoomIn: zoom(scene, ZoomDirection::In); break;
          case FunctionName::ZoomOut: zoom(scene, ZoomDirection::Out); break;
          case FunctionName::ChangeTemperature:
            adjust_sim(scene, SimField::Temperature, AdjustMode::Delta, inv.number);
            break;
          case FunctionName::SetTemperature: adjust_sim(scene, SimField::Temperature, AdjustMode::Set, inv.number); break;
          case FunctionName::ChangeUpdateRate:
            adjust_sim(scene, SimField::UpdateRate, AdjustMode::Delta, inv.number);
            break;
          case FunctionName::StartSimulation: set_running(scene, true); break;
          case FunctionName::StopSimulation: set_running(scene, false); break;
          case FunctionName::WritePdb: {
            std::string pdb = write_pdb(scene);
            report.responses.push_back(pdb);
            report.pdb = std::move(pdb);
            break;
          }
          case FunctionName::Select: scene.selection = eval_selection(*inv.selection, scene.structure); break;
          case FunctionName::SpeakUp: report.volumeUp = true; break;
          case FunctionName::DidntUnderstand: report.responses.emplace_back(kDidntUnderstand); break;
        }
      }
    } catch (const Error& cause) {
      report.failedAt = ExecutionReport::Fault{
          index, Error(ErrorCode::RuntimeFault,
                       "statement " + std::to_string(index) + " (" + render(s) + ") failed: " + cause.what(),
                       {{"index", index}, {"statement", render(s)}, {"cause", cause.to_json()}})};
      break;
    }
  }
  report.mutated = !(scene == before);
  return report;
}

}  // namespace molvoice
