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

#include <pthread.h>
#include <signal.h>
#include <unistd.h>

#include <csignal>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "molvoice/app.hpp"
#include "molvoice/server.hpp"

namespace {

void add_common_options(CLI::App& cmd, molvoice::AppOptions& o) {
  cmd.add_option("--backend", o.backend, "Language model backend")->check(CLI::IsMember({"mock", "remote"}));
  cmd.add_option("--pdb", o.pdbPath, "PDB file loaded into new sessions (default: bundled fixture)");
  cmd.add_option("--lexicon", o.lexiconPath, "Misrecognition lexicon (TSV)");
  cmd.add_option("--prompt", o.promptPath, "Prompt template file");
  cmd.add_option("--endpoint", o.gateway.endpointUrl, "Chat-completions endpoint URL");
  cmd.add_option("--model", o.gateway.modelId, "Model id sent to the endpoint");
  cmd.add_option("--api-key-env", o.gateway.apiKeyEnvVar, "Environment variable holding the API key");
  cmd.add_option("--timeout", o.gateway.timeoutSeconds, "Request timeout in seconds [1, 120]");
  cmd.add_option("--max-turns", o.gateway.maxTurns, "Conversation turns kept as context");
  cmd.add_option("--history-tokens", o.gateway.historyTokenBudget, "Token headroom for conversation history");
}

int serve(const molvoice::AppOptions& options, const std::string& address, unsigned short port) {
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  molvoice::SessionManager sessions(molvoice::make_service_config(options));
  molvoice::http::Server server(sessions, address, port);
  server.start();
  std::cout << "molvoice listening on http://" << address << ":" << server.port() << std::endl;
  int sig = 0;
  sigwait(&signals, &sig);
  std::cout << "shutting down" << std::endl;
  server.stop();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"molvoice: natural-language commands for a molecular scene"};
  app.require_subcommand(1);

  molvoice::AppOptions options;

  auto* repl = app.add_subcommand("repl", "Interactive session reading requests from stdin");
  add_common_options(*repl, options);

  auto* srv = app.add_subcommand("serve", "HTTP/WebSocket session service");
  add_common_options(*srv, options);
  std::string address = "127.0.0.1";
  unsigned short port = 8080;
  srv->add_option("--host", address, "Listen address");
  srv->add_option("--port", port, "Listen port (0 picks a free port)");

  auto* prompt = app.add_subcommand("prompt", "Print the assembled prompt and its token estimate");
  prompt->add_option("--lexicon", options.lexiconPath, "Misrecognition lexicon (TSV)");
  prompt->add_option("--prompt", options.promptPath, "Prompt template file");
  bool summary_only = false;
  prompt->add_flag("--summary", summary_only, "Only print counts");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*repl) {
      molvoice::SessionManager sessions(molvoice::make_service_config(options));
      return molvoice::run_repl(sessions, std::cin, std::cout, std::cerr, isatty(0));
    }
    if (*srv) return serve(options, address, port);
    if (*prompt) {
      auto config = molvoice::make_service_config(options);
      if (!summary_only) {
        std::cout << "[system]\n" << config.prompt->system << "\n";
        for (const auto& ex : config.prompt->examples)
          std::cout << "[user]\n" << ex.user << "\n[assistant]\n" << ex.assistant << "\n";
      }
      std::cout << "examples: " << config.prompt->examples.size()
                << "\nestimated tokens: " << molvoice::estimate_tokens(*config.prompt) << "\n";
      return 0;
    }
  } catch (const molvoice::Error& e) {
    std::cerr << "molvoice: " << molvoice::to_string(e.code()) << ": " << e.what() << "\n";
    return 2;
  }
  return 0;
}
