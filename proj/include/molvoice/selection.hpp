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
#include <iterator>
#include <memory>
#include <set>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "molvoice/error.hpp"
#include "molvoice/scene.hpp"
#include "molvoice/text.hpp"

// Selection mini-language used inside select('...'):
//
//   expr := term ("and" term)*
//   term := "all" | "backbone" | "resname" CODE+ | "resid" INT+ | "chain" CHAR+
//
// Keywords are case-insensitive, values are normalized to uppercase. Several
// values after one keyword select the union; "and" intersects.
namespace molvoice {

inline constexpr int kMaxSelectionDepth = 32;

struct SelectionExpr;

namespace sel {
struct All {
  bool operator==(const All&) const = default;
};
struct Backbone {
  bool operator==(const Backbone&) const = default;
};
struct Resname {
  std::set<std::string> codes;
  bool operator==(const Resname&) const = default;
};
struct Resid {
  std::set<int> ids;
  bool operator==(const Resid&) const = default;
};
struct Chain {
  std::set<char> ids;
  bool operator==(const Chain&) const = default;
};
struct And {
  std::shared_ptr<const SelectionExpr> left;
  std::shared_ptr<const SelectionExpr> right;
  bool operator==(const And& other) const;
};
}  // namespace sel

/// Immutable AST node. Children are shared, so copies are cheap.
struct SelectionExpr {
  std::variant<sel::All, sel::Backbone, sel::Resname, sel::Resid, sel::Chain, sel::And> node;
  bool operator==(const SelectionExpr&) const = default;
};

inline bool sel::And::operator==(const And& other) const { return *left == *other.left && *right == *other.right; }

inline SelectionExpr make_and(SelectionExpr left, SelectionExpr right) {
  return {sel::And{std::make_shared<const SelectionExpr>(std::move(left)),
                   std::make_shared<const SelectionExpr>(std::move(right))}};
}

inline int depth(const SelectionExpr& e) {
  if (auto* a = std::get_if<sel::And>(&e.node)) return 1 + std::max(depth(*a->left), depth(*a->right));
  return 1;
}

inline constexpr std::array<std::string_view, 4> kBackboneNames = {"N", "C", "CA", "P"};

namespace detail {

inline bool is_selection_keyword(std::string_view tok) {
  for (std::string_view kw : {"all", "backbone", "resname", "resid", "chain", "and"})
    if (text::iequals(tok, kw)) return true;
  return false;
}

inline bool is_resname_code(std::string_view tok) {
  return !tok.empty() && tok.size() <= 4 && std::all_of(tok.begin(), tok.end(), text::is_alnum);
}

}  // namespace detail

inline SelectionExpr parse_selection(std::string_view source) {
  std::vector<std::string_view> tokens = text::split_ws(source);
  if (tokens.empty()) throw Error(ErrorCode::EmptySelection, "selection is empty");

  std::size_t pos = 0;
  auto parse_term = [&]() -> SelectionExpr {
    if (pos >= tokens.size())
      throw Error(ErrorCode::MissingValues, "expected a selection term after 'and'", {{"keyword", "and"}});
    std::string_view kw = tokens[pos++];
    if (text::iequals(kw, "all")) return {sel::All{}};
    if (text::iequals(kw, "backbone")) return {sel::Backbone{}};

    // Values run until the next keyword or the first token that does not fit
    // the value class; whatever is left is diagnosed by the caller.
    auto take_values = [&](auto accept) {
      std::size_t n = 0;
      while (pos < tokens.size() && !detail::is_selection_keyword(tokens[pos]) && accept(tokens[pos])) {
        ++pos;
        ++n;
      }
      if (n == 0)
        throw Error(ErrorCode::MissingValues, "'" + text::lower(kw) + "' needs at least one value",
                    {{"keyword", text::lower(kw)}});
    };
    if (text::iequals(kw, "resname")) {
      sel::Resname r;
      take_values([&](std::string_view t) {
        if (!detail::is_resname_code(t)) return false;
        r.codes.insert(text::upper(t));
        return true;
      });
      return {std::move(r)};
    }
    if (text::iequals(kw, "resid")) {
      sel::Resid r;
      take_values([&](std::string_view t) {
        auto v = text::parse_int(t);
        if (!v) return false;
        r.ids.insert(*v);
        return true;
      });
      return {std::move(r)};
    }
    if (text::iequals(kw, "chain")) {
      sel::Chain c;
      take_values([&](std::string_view t) {
        if (t.size() != 1 || !text::is_alnum(t[0])) return false;
        c.ids.insert(text::to_upper(t[0]));
        return true;
      });
      return {std::move(c)};
    }
    throw Error(ErrorCode::UnknownKeyword, "unknown selection keyword '" + std::string(kw) + "'",
                {{"token", std::string(kw)}});
  };

  SelectionExpr expr = parse_term();
  int terms = 1;
  while (pos < tokens.size()) {
    if (!text::iequals(tokens[pos], "and")) {
      std::string rest;
      for (std::size_t i = pos; i < tokens.size(); ++i) rest += (i > pos ? " " : "") + std::string(tokens[i]);
      throw Error(ErrorCode::TrailingTokens, "unexpected trailing tokens: '" + rest + "'", {{"tokens", rest}});
    }
    ++pos;
    if (++terms > kMaxSelectionDepth)
      throw Error(ErrorCode::SelectionTooDeep, "selection has more than " + std::to_string(kMaxSelectionDepth) + " terms");
    expr = make_and(std::move(expr), parse_term());
  }
  return expr;
}

/// Canonical lowercase rendering; parse_selection(to_string(e)) == e for any
/// left-associated expression.
inline std::string to_string(const SelectionExpr& e) {
  struct Printer {
    std::string operator()(const sel::All&) const { return "all"; }
    std::string operator()(const sel::Backbone&) const { return "backbone"; }
    std::string operator()(const sel::Resname& r) const {
      std::string s = "resname";
      for (const auto& c : r.codes) s += " " + text::lower(c);
      return s;
    }
    std::string operator()(const sel::Resid& r) const {
      std::string s = "resid";
      for (int id : r.ids) s += " " + std::to_string(id);
      return s;
    }
    std::string operator()(const sel::Chain& c) const {
      std::string s = "chain";
      for (char id : c.ids) s += std::string(" ") + text::to_lower(id);
      return s;
    }
    std::string operator()(const sel::And& a) const { return to_string(*a.left) + " and " + to_string(*a.right); }
  };
  return std::visit(Printer{}, e.node);
}

/// Indices (ascending) of the atoms matched by the expression.
inline AtomSelection eval_selection(const SelectionExpr& e, const Structure& s) {
  if (auto* a = std::get_if<sel::And>(&e.node)) {
    AtomSelection l = eval_selection(*a->left, s);
    AtomSelection r = eval_selection(*a->right, s);
    AtomSelection out;
    std::set_intersection(l.begin(), l.end(), r.begin(), r.end(), std::back_inserter(out));
    return out;
  }
  auto matches = [&e](const Atom& atom) {
    struct Match {
      const Atom& atom;
      bool operator()(const sel::All&) const { return true; }
      bool operator()(const sel::Backbone&) const {
        return std::find(kBackboneNames.begin(), kBackboneNames.end(), atom.name) != kBackboneNames.end();
      }
      bool operator()(const sel::Resname& r) const { return r.codes.count(atom.resname) > 0; }
      bool operator()(const sel::Resid& r) const { return r.ids.count(atom.resid) > 0; }
      bool operator()(const sel::Chain& c) const { return c.ids.count(text::to_upper(atom.chain)) > 0; }
      bool operator()(const sel::And&) const { return false; }
    };
    return std::visit(Match{atom}, e.node);
  };
  AtomSelection out;
  for (std::size_t i = 0; i < s.atoms.size(); ++i)
    if (matches(s.atoms[i])) out.push_back(i);
  return out;
}

}  // namespace molvoice
