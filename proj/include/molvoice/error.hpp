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

#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>

#include <json.hpp>

namespace molvoice {

enum class ErrorCode {
  // scene
  NoAtoms,
  MalformedRecord,
  NegativeRadius,
  UnknownColor,
  NonNumeric,
  // selection
  EmptySelection,
  UnknownKeyword,
  MissingValues,
  TrailingTokens,
  SelectionTooDeep,
  // command script
  SyntaxError,
  UnbalancedQuote,
  UnbalancedParen,
  NotWhitelisted,
  ArityMismatch,
  BadArgType,
  BadSelection,
  RuntimeFault,
  // gateway
  EmptyUtterance,
  Timeout,
  HttpError,
  TransportError,
  MissingApiKey,
  EmptyCompletion,
  TruncatedCompletion,
  BadCompletion,
  BudgetTooSmall,
  InvalidConfig,
  InvalidTemplate,
  // lexicon
  MalformedLine,
  // service
  SessionNotFound,
  QueueFull,
  BadRequest,
  NotFound,
  IoError,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::NoAtoms: return "NoAtoms";
    case ErrorCode::MalformedRecord: return "MalformedRecord";
    case ErrorCode::NegativeRadius: return "NegativeRadius";
    case ErrorCode::UnknownColor: return "UnknownColor";
    case ErrorCode::NonNumeric: return "NonNumeric";
    case ErrorCode::EmptySelection: return "EmptySelection";
    case ErrorCode::UnknownKeyword: return "UnknownKeyword";
    case ErrorCode::MissingValues: return "MissingValues";
    case ErrorCode::TrailingTokens: return "TrailingTokens";
    case ErrorCode::SelectionTooDeep: return "SelectionTooDeep";
    case ErrorCode::SyntaxError: return "SyntaxError";
    case ErrorCode::UnbalancedQuote: return "UnbalancedQuote";
    case ErrorCode::UnbalancedParen: return "UnbalancedParen";
    case ErrorCode::NotWhitelisted: return "NotWhitelisted";
    case ErrorCode::ArityMismatch: return "ArityMismatch";
    case ErrorCode::BadArgType: return "BadArgType";
    case ErrorCode::BadSelection: return "BadSelection";
    case ErrorCode::RuntimeFault: return "RuntimeFault";
    case ErrorCode::EmptyUtterance: return "EmptyUtterance";
    case ErrorCode::Timeout: return "Timeout";
    case ErrorCode::HttpError: return "HttpError";
    case ErrorCode::TransportError: return "TransportError";
    case ErrorCode::MissingApiKey: return "MissingApiKey";
    case ErrorCode::EmptyCompletion: return "EmptyCompletion";
    case ErrorCode::TruncatedCompletion: return "TruncatedCompletion";
    case ErrorCode::BadCompletion: return "BadCompletion";
    case ErrorCode::BudgetTooSmall: return "BudgetTooSmall";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::InvalidTemplate: return "InvalidTemplate";
    case ErrorCode::MalformedLine: return "MalformedLine";
    case ErrorCode::SessionNotFound: return "SessionNotFound";
    case ErrorCode::QueueFull: return "QueueFull";
    case ErrorCode::BadRequest: return "BadRequest";
    case ErrorCode::NotFound: return "NotFound";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

/// Every failure in the library is reported as an Error carrying a stable
/// code plus a structured detail object (line numbers, offending fragments,
/// HTTP status, ...). The service layer serializes it as {code, message, detail}.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, std::string message, nlohmann::json detail = nlohmann::json::object())
      : std::runtime_error(std::move(message)), code_(code), detail_(std::move(detail)) {}

  ErrorCode code() const noexcept { return code_; }
  const nlohmann::json& detail() const noexcept { return detail_; }

  nlohmann::json to_json() const {
    return {{"code", std::string(to_string(code_))}, {"message", what()}, {"detail", detail_}};
  }

 private:
  ErrorCode code_;
  nlohmann::json detail_;
};

}  // namespace molvoice
