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

#include <algorithm>
#include <string>
#include <string_view>
#include <vector>

#include "molvoice/error.hpp"
#include "molvoice/text.hpp"

namespace molvoice {

enum class Confidence { Exact, Hint };

struct LexiconEntry {
  std::vector<std::string> pattern;  // lowercase words
  std::string replacement;
  Confidence confidence = Confidence::Hint;

  std::string pattern_text() const {
    std::string s;
    for (const auto& w : pattern) s += (s.empty() ? "" : " ") + w;
    return s;
  }
  bool operator==(const LexiconEntry&) const = default;
};

/// Misrecognition table for domain jargon. Exact entries are rewritten
/// mechanically by normalize(); hint entries are only ever shown to the model
/// (see hint_sentence()).
struct Lexicon {
  std::vector<LexiconEntry> entries;
  std::string source;
};

/// Line format: pattern<TAB>replacement<TAB>exact|hint. Blank lines and lines
/// starting with '#' are skipped.
inline Lexicon load_lexicon(std::string_view tsv, std::string source = {}) {
  Lexicon lex;
  lex.source = std::move(source);
  std::size_t line_no = 0;
  for (std::string_view line : text::split(tsv, '\n')) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (text::trim(line).empty() || text::trim(line).front() == '#') continue;
    auto malformed = [&](const std::string& why) {
      return Error(ErrorCode::MalformedLine, "lexicon line " + std::to_string(line_no) + ": " + why,
                   {{"line", line_no}, {"source", lex.source}});
    };
    auto fields = text::split(line, '\t');
    if (fields.size() != 3) throw malformed("expected 3 tab-separated fields, got " + std::to_string(fields.size()));
    LexiconEntry e;
    for (auto w : text::split_ws(fields[0])) e.pattern.push_back(text::lower(w));
    e.replacement = std::string(text::trim(fields[1]));
    std::string tier = text::lower(text::trim(fields[2]));
    if (e.pattern.empty()) throw malformed("empty pattern");
    if (e.replacement.empty()) throw malformed("empty replacement");
    if (tier == "exact")
      e.confidence = Confidence::Exact;
    else if (tier == "hint")
      e.confidence = Confidence::Hint;
    else
      throw malformed("confidence must be 'exact' or 'hint'");
    lex.entries.push_back(std::move(e));
  }
  return lex;
}

namespace detail {

// Word bytes: ASCII alphanumerics, apostrophe, and any non-ASCII byte so that
// UTF-8 words are never split.
inline bool is_word_byte(char c) {
  return text::is_alnum(c) || c == '\'' || c == '_' || static_cast<unsigned char>(c) >= 0x80;
}

}  // namespace detail

/// Single left-to-right pass replacing exact entries at word boundaries,
/// case-insensitively, preferring the longest pattern at each position.
inline std::string normalize(std::string_view input, const Lexicon& lexicon) {
  std::vector<const LexiconEntry*> exact;
  for (const auto& e : lexicon.entries)
    if (e.confidence == Confidence::Exact) exact.push_back(&e);
  std::stable_sort(exact.begin(), exact.end(), [](const LexiconEntry* a, const LexiconEntry* b) {
    if (a->pattern.size() != b->pattern.size()) return a->pattern.size() > b->pattern.size();
    return a->pattern_text().size() > b->pattern_text().size();
  });
  if (exact.empty()) return std::string(input);

  // Returns the end offset of a match of `pattern` starting at `pos`, or npos.
  auto match_at = [&](const LexiconEntry& e, std::size_t pos) -> std::size_t {
    std::size_t i = pos;
    for (std::size_t w = 0; w < e.pattern.size(); ++w) {
      if (w > 0) {
        std::size_t gap = i;
        while (i < input.size() && text::is_space(input[i])) ++i;
        if (i == gap) return std::string_view::npos;
      }
      const std::string& word = e.pattern[w];
      if (input.size() - i < word.size() || !text::iequals(input.substr(i, word.size()), word))
        return std::string_view::npos;
      i += word.size();
    }
    if (i < input.size() && detail::is_word_byte(input[i])) return std::string_view::npos;
    return i;
  };

  std::string out;
  out.reserve(input.size());
  std::size_t i = 0;
  while (i < input.size()) {
    bool at_word_start = detail::is_word_byte(input[i]) && (i == 0 || !detail::is_word_byte(input[i - 1]));
    if (at_word_start) {
      bool replaced = false;
      for (const LexiconEntry* e : exact) {
        std::size_t end = match_at(*e, i);
        if (end != std::string_view::npos) {
          out += e->replacement;
          i = end;
          replaced = true;
          break;
        }
      }
      if (replaced) continue;
    }
    out += input[i++];
  }
  return out;
}

/// Renders the lexicon as the misrecognition sentence embedded in the system
/// prompt, grouping alternatives for the same pattern:
/// "'change' might actually be 'chain' or 'chains'".
inline std::string hint_sentence(const Lexicon& lexicon) {
  std::vector<std::pair<std::string, std::vector<std::string>>> grouped;
  for (const auto& e : lexicon.entries) {
    std::string p = e.pattern_text();
    auto it = std::find_if(grouped.begin(), grouped.end(), [&](const auto& g) { return g.first == p; });
    if (it == grouped.end()) {
      grouped.push_back({p, {e.replacement}});
    } else {
      it->second.push_back(e.replacement);
    }
  }
  std::string out;
  for (std::size_t i = 0; i < grouped.size(); ++i) {
    if (i) out += ", ";
    out += "'" + grouped[i].first + "' might actually be ";
    for (std::size_t j = 0; j < grouped[i].second.size(); ++j) {
      if (j) out += " or ";
      out += "'" + grouped[i].second[j] + "'";
    }
  }
  return out;
}

}  // namespace molvoice
