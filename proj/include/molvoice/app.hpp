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

#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>

#include "molvoice/bundled.hpp"
#include "molvoice/error.hpp"
#include "molvoice/gateway.hpp"
#include "molvoice/lexicon.hpp"
#include "molvoice/prompt.hpp"
#include "molvoice/service.hpp"

namespace molvoice {

/// Command-line level settings shared by the REPL and the server.
struct AppOptions {
  std::string backend = "mock";
  std::string pdbPath;
  std::string lexiconPath;
  std::string promptPath;
  GatewayConfig gateway;
};

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot read '" + path + "'", {{"path", path}});
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::shared_ptr<const Lexicon> bundled_lexicon() {
  return std::make_shared<const Lexicon>(load_lexicon(bundled::kLexicon, "<bundled lexicon.tsv>"));
}

inline std::shared_ptr<const PromptTemplate> bundled_prompt(const Lexicon& lexicon) {
  return std::make_shared<const PromptTemplate>(load_prompt_template(bundled::kPrompt, lexicon));
}

/// Resolves files (bundled defaults when a path is empty) and validates them
/// up front so startup problems surface before the first utterance.
inline ServiceConfig make_service_config(const AppOptions& options) {
  ServiceConfig config;
  config.gateway = options.gateway;
  auto backend = parse_backend(options.backend);
  if (!backend)
    throw Error(ErrorCode::InvalidConfig, "backend must be 'mock' or 'remote'", {{"backend", options.backend}});
  config.gateway.backend = *backend;
  config.gateway.validate();

  config.lexicon = options.lexiconPath.empty()
                       ? bundled_lexicon()
                       : std::make_shared<const Lexicon>(load_lexicon(read_file(options.lexiconPath), options.lexiconPath));
  config.prompt = options.promptPath.empty()
                      ? bundled_prompt(*config.lexicon)
                      : std::make_shared<const PromptTemplate>(load_prompt_template(read_file(options.promptPath), *config.lexicon));
  config.defaultPdb = options.pdbPath.empty() ? std::string(bundled::kFixturePdb) : read_file(options.pdbPath);
  load_pdb(config.defaultPdb);
  return config;
}

namespace detail {

inline std::string render_value(const nlohmann::json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number()) return text::format_number(v.get<double>());
  return v.dump();
}

inline void print_result(const UtteranceResult& r, std::ostream& out) {
  if (r.normalizedText != r.text) out << "  (heard as: " << r.normalizedText << ")\n";
  for (const auto& c : r.comments) out << "  // " << c << "\n";
  // responses repeat the comments in order; print only the rest
  std::vector<std::string> remaining_comments = r.comments;
  for (const auto& line : r.responses) {
    auto it = std::find(remaining_comments.begin(), remaining_comments.end(), line);
    if (it != remaining_comments.end()) {
      remaining_comments.erase(it);
      continue;
    }
    out << "  " << line << (line.empty() || line.back() != '\n' ? "\n" : "");
  }
  if (r.volumeUp) out << "  (volume up)\n";
  if (r.error) {
    out << "  error: " << render_value((*r.error)["code"]) << ": " << render_value((*r.error)["message"]) << "\n";
    return;
  }
  for (auto it = r.sceneDiff.begin(); it != r.sceneDiff.end(); ++it) {
    const auto& v = it.value();
    if (v.contains("before"))
      out << "  changed " << it.key() << ": " << render_value(v["before"]) << " -> " << render_value(v["after"]) << "\n";
    else
      out << "  changed " << it.key() << ": " << v.dump() << "\n";
  }
}

}  // namespace detail

/// Line-oriented front end over one local session. ":quit" exits 0;
/// ":scene", ":pdb" and ":help" are local commands that never reach the model.
inline int run_repl(SessionManager& sessions, std::istream& in, std::ostream& out, std::ostream& err,
                    bool prompt_marker = false) {
  std::string id;
  try {
    id = sessions.create_session();
  } catch (const Error& e) {
    err << "molvoice: " << e.what() << "\n";
    return 2;
  }
  std::string line;
  while (true) {
    if (prompt_marker) out << "> " << std::flush;
    if (!std::getline(in, line)) break;
    std::string_view cmd = text::trim(line);
    if (cmd.empty()) continue;
    if (cmd == ":quit" || cmd == ":q") return 0;
    if (cmd == ":help") {
      out << "  Type a request in plain language, e.g. \"Tell me the number of atoms\".\n"
             "  :scene  show the scene summary\n  :pdb    print the current coordinates\n  :quit   exit\n";
      continue;
    }
    if (cmd == ":scene") {
      out << sessions.get_scene(id).dump(2) << "\n";
      continue;
    }
    if (cmd == ":pdb") {
      out << sessions.get_pdb(id);
      continue;
    }
    try {
      detail::print_result(sessions.submit_utterance(id, cmd), out);
    } catch (const Error& e) {
      out << "  error: " << to_string(e.code()) << ": " << e.what() << "\n";
    }
  }
  return 0;
}

}  // namespace molvoice
