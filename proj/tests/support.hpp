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
#include <random>
#include <set>
#include <string>
#include <vector>

#include "molvoice/bundled.hpp"
#include "molvoice/scene.hpp"

namespace molvoice::testing {

inline std::string fixture_text() { return std::string(bundled::kFixturePdb); }

/// Independent record count: lines whose first six columns are ATOM/HETATM.
inline std::size_t count_atom_records(const std::string& pdb) {
  std::size_t n = 0, pos = 0;
  while (pos < pdb.size()) {
    std::size_t end = pdb.find('\n', pos);
    if (end == std::string::npos) end = pdb.size();
    std::string line = pdb.substr(pos, end - pos);
    if (line.rfind("ATOM  ", 0) == 0 || line.rfind("HETATM", 0) == 0) ++n;
    pos = end + 1;
  }
  return n;
}

/// ATOM/HETATM lines with trailing whitespace removed.
inline std::vector<std::string> normalized_atom_records(const std::string& pdb) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (pos < pdb.size()) {
    std::size_t end = pdb.find('\n', pos);
    if (end == std::string::npos) end = pdb.size();
    std::string line = pdb.substr(pos, end - pos);
    if (line.rfind("ATOM  ", 0) == 0 || line.rfind("HETATM", 0) == 0) {
      while (!line.empty() && (line.back() == ' ' || line.back() == '\r')) line.pop_back();
      out.push_back(line);
    }
    pos = end + 1;
  }
  return out;
}

inline const std::vector<std::string>& name_pool() {
  static const std::vector<std::string> pool = {"N", "CA", "C", "O", "CB", "P", "OG", "NZ", "CD1", "SG", "HA", "FE"};
  return pool;
}
inline const std::vector<std::string>& resname_pool() {
  static const std::vector<std::string> pool = {"ARG", "LYS", "ASP", "GLU", "ALA", "GLY", "HOH", "DA", "HEME"};
  return pool;
}
inline const std::vector<char>& chain_pool() {
  static const std::vector<char> pool = {'A', 'B', 'C', 'D'};
  return pool;
}

/// Random structure with PDB-representable fields (3-decimal coordinates).
inline Structure random_structure(std::mt19937_64& rng, std::size_t max_atoms = 500) {
  std::uniform_int_distribution<std::size_t> count(1, max_atoms);
  std::uniform_int_distribution<int> coord(-999999, 999999);
  std::uniform_int_distribution<int> resid(-5, 60);
  Structure s;
  std::size_t n = count(rng);
  for (std::size_t i = 0; i < n; ++i) {
    Atom a;
    a.serial = static_cast<int>(i + 1);
    a.name = name_pool()[rng() % name_pool().size()];
    a.resname = resname_pool()[rng() % resname_pool().size()];
    a.chain = chain_pool()[rng() % chain_pool().size()];
    a.resid = resid(rng);
    a.position = {coord(rng) / 1000.0, coord(rng) / 1000.0, coord(rng) / 1000.0};
    a.element = a.name == "FE" ? "FE" : a.name.substr(0, 1);
    s.atoms.push_back(a);
  }
  return s;
}

/// A selection term as the generator sees it, with its own predicate.
struct TermSpec {
  enum Kind { All, Backbone, Resname, Resid, Chain } kind;
  std::vector<std::string> values;

  std::string text(std::mt19937_64& rng) const {
    static const char* names[] = {"all", "backbone", "resname", "resid", "chain"};
    std::string kw = names[kind];
    if (rng() % 2) kw[0] = static_cast<char>(std::toupper(kw[0]));  // keyword case must not matter
    std::string s = kw;
    for (const auto& v : values) {
      std::string shown = v;
      if (rng() % 3 == 0) std::transform(shown.begin(), shown.end(), shown.begin(), ::tolower);
      s += " " + shown;
    }
    return s;
  }

  bool accepts(const Atom& a) const {
    switch (kind) {
      case All: return true;
      case Backbone: return a.name == "N" || a.name == "C" || a.name == "CA" || a.name == "P";
      case Resname: return std::find(values.begin(), values.end(), a.resname) != values.end();
      case Resid: return std::find(values.begin(), values.end(), std::to_string(a.resid)) != values.end();
      case Chain: return std::find(values.begin(), values.end(), std::string(1, a.chain)) != values.end();
    }
    return false;
  }
};

inline TermSpec random_term(std::mt19937_64& rng) {
  TermSpec t{static_cast<TermSpec::Kind>(rng() % 5), {}};
  std::size_t n = 1 + rng() % 3;
  for (std::size_t i = 0; i < n; ++i) {
    switch (t.kind) {
      case TermSpec::Resname: t.values.push_back(i == 2 ? "TRP" : resname_pool()[rng() % resname_pool().size()]); break;
      case TermSpec::Resid: t.values.push_back(std::to_string(static_cast<int>(rng() % 70) - 5)); break;
      case TermSpec::Chain: t.values.push_back(std::string(1, "ABCDE"[rng() % 5])); break;
      default: break;
    }
  }
  return t;
}

/// Brute force: an atom is selected iff every term accepts it.
inline std::vector<std::size_t> oracle_select(const std::vector<TermSpec>& terms, const Structure& s) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < s.atoms.size(); ++i)
    if (std::all_of(terms.begin(), terms.end(), [&](const TermSpec& t) { return t.accepts(s.atoms[i]); }))
      out.push_back(i);
  return out;
}

inline std::string join_terms(const std::vector<TermSpec>& terms, std::mt19937_64& rng) {
  std::string s;
  for (std::size_t i = 0; i < terms.size(); ++i) s += (i ? (rng() % 2 ? " and " : "  AND ") : "") + terms[i].text(rng);
  return s;
}

}  // namespace molvoice::testing
