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
#include <array>
#include <cmath>
#include <cstdio>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "molvoice/error.hpp"
#include "molvoice/text.hpp"

namespace molvoice {

struct Vec3 {
  double x = 0;
  double y = 0;
  double z = 0;
  bool operator==(const Vec3&) const = default;
};

struct Atom {
  int serial = 0;
  std::string name;     // uppercase, trimmed ("CA")
  std::string resname;  // uppercase, trimmed, 1-4 chars ("ARG")
  char chain = ' ';
  int resid = 0;
  Vec3 position;
  std::string element;  // uppercase symbol ("C", "FE")
  bool operator==(const Atom&) const = default;
};

struct Structure {
  std::vector<Atom> atoms;  // PDB record order
  std::string title;
  bool operator==(const Structure&) const = default;
};

// Closed palette. ByAtom is a directive, never a stored per-atom color: it is
// expanded through element_color() when applied.
enum class Color { Red, Blue, White, Green, Yellow, Orange, Grey, Cyan, Magenta, ByAtom };

inline constexpr std::array<Color, 10> kPalette = {Color::Red,    Color::Blue, Color::White,   Color::Green,
                                                   Color::Yellow, Color::Orange, Color::Grey, Color::Cyan,
                                                   Color::Magenta, Color::ByAtom};

constexpr std::string_view to_string(Color c) {
  switch (c) {
    case Color::Red: return "red";
    case Color::Blue: return "blue";
    case Color::White: return "white";
    case Color::Green: return "green";
    case Color::Yellow: return "yellow";
    case Color::Orange: return "orange";
    case Color::Grey: return "grey";
    case Color::Cyan: return "cyan";
    case Color::Magenta: return "magenta";
    case Color::ByAtom: return "byatom";
  }
  return "?";
}

/// Case-insensitive palette lookup; nullopt for anything outside the palette.
inline std::optional<Color> parse_color(std::string_view name) {
  for (Color c : kPalette)
    if (text::iequals(name, to_string(c))) return c;
  return std::nullopt;
}

/// CPK-style element table used by "color byatom".
inline Color element_color(std::string_view element) {
  std::string e = text::upper(text::trim(element));
  if (e == "C") return Color::Grey;
  if (e == "N") return Color::Blue;
  if (e == "O") return Color::Red;
  if (e == "S") return Color::Yellow;
  if (e == "P") return Color::Orange;
  if (e == "H") return Color::White;
  return Color::Magenta;
}

struct AtomRep {
  double spacefill = 1.0;  // sphere radius in Angstrom, 0 = hidden
  double sticks = 1.0;     // stick radius in Angstrom, 0 = hidden
  Color color = Color::Magenta;
  bool operator==(const AtomRep&) const = default;
};

inline constexpr double kMinTemperature = 0.0;
inline constexpr double kMaxTemperature = 10000.0;
inline constexpr double kMinUpdateRate = 0.1;
inline constexpr double kMaxUpdateRate = 1000.0;
inline constexpr double kMinZoom = 0.01;
inline constexpr double kMaxZoom = 100.0;
inline constexpr double kZoomStep = 1.25;

struct SimState {
  double temperature = 300.0;  // unit-agnostic "degrees"
  double updateRate = 1.0;     // simulation steps per render tick
  bool running = false;
  bool operator==(const SimState&) const = default;
};

struct ViewState {
  double zoomFactor = 1.0;
  bool operator==(const ViewState&) const = default;
};

/// Sorted, duplicate-free atom indices into Structure::atoms.
using AtomSelection = std::vector<std::size_t>;

struct SceneState {
  Structure structure;
  std::vector<AtomRep> rep;  // one record per atom
  SimState sim;
  ViewState view;
  AtomSelection selection;
  std::string lastUserMessage;
  bool operator==(const SceneState&) const = default;
};

enum class RepKind { Spacefill, Sticks };
enum class SimField { Temperature, UpdateRate };
enum class AdjustMode { Set, Delta };
enum class ZoomDirection { In, Out };

constexpr std::string_view to_string(RepKind k) { return k == RepKind::Spacefill ? "spacefill" : "sticks"; }

namespace detail {

// 1-based inclusive PDB column range, clipped to the line.
inline std::string_view columns(std::string_view line, std::size_t first, std::size_t last) {
  if (line.size() < first) return {};
  return line.substr(first - 1, std::min(last, line.size()) - first + 1);
}

inline std::string infer_element(std::string_view name_field) {
  // Columns 13-14 hold the element right-justified; a blank or digit in
  // column 13 means a one-letter element in column 14.
  if (name_field.size() < 2) return text::upper(text::trim(name_field)).substr(0, 1);
  if (text::is_space(name_field[0]) || text::is_digit(name_field[0]))
    return std::string(1, text::to_upper(name_field[1]));
  return text::upper(name_field.substr(0, 2));
}

inline std::string pdb_name_field(const Atom& atom) {
  std::string name = atom.name.substr(0, 4);
  if (name.size() < 4 && atom.element.size() <= 1) name.insert(name.begin(), ' ');
  name.resize(4, ' ');
  return name;
}

}  // namespace detail

/// Parses fixed-column ATOM/HETATM records. Every other record type is
/// ignored except TITLE, which is collected into Structure::title.
inline Structure load_pdb(std::string_view pdb_text) {
  Structure s;
  std::set<int> serials;
  std::size_t line_no = 0;
  for (std::string_view line : text::split(pdb_text, '\n')) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    std::string_view record = detail::columns(line, 1, 6);
    if (record.substr(0, 5) == "TITLE") {
      auto t = text::trim(detail::columns(line, 11, 80));
      if (!t.empty()) s.title += (s.title.empty() ? "" : " ") + std::string(t);
      continue;
    }
    if (record != "ATOM  " && record != "HETATM" && text::trim(record) != "ATOM") continue;

    auto fail = [&](const char* what) {
      return Error(ErrorCode::MalformedRecord, "malformed PDB record at line " + std::to_string(line_no) + ": " + what,
                   {{"line", line_no}, {"field", what}});
    };
    Atom a;
    auto serial = text::parse_int(text::trim(detail::columns(line, 7, 11)));
    if (!serial) throw fail("serial");
    a.serial = *serial;
    if (!serials.insert(a.serial).second) throw fail("duplicate serial");
    std::string_view name_field = detail::columns(line, 13, 16);
    a.name = text::upper(text::trim(name_field));
    a.resname = text::upper(text::trim(detail::columns(line, 18, 21)));
    if (a.name.empty()) throw fail("name");
    auto chain = detail::columns(line, 22, 22);
    a.chain = chain.empty() ? ' ' : chain[0];
    auto resid = text::parse_int(text::trim(detail::columns(line, 23, 26)));
    if (!resid) throw fail("resid");
    a.resid = *resid;
    auto x = text::parse_double(text::trim(detail::columns(line, 31, 38)));
    auto y = text::parse_double(text::trim(detail::columns(line, 39, 46)));
    auto z = text::parse_double(text::trim(detail::columns(line, 47, 54)));
    if (!x || !y || !z) throw fail("coordinates");
    a.position = {*x, *y, *z};
    auto element = text::trim(detail::columns(line, 77, 78));
    a.element = element.empty() ? detail::infer_element(name_field) : text::upper(element);
    s.atoms.push_back(std::move(a));
  }
  if (s.atoms.empty()) throw Error(ErrorCode::NoAtoms, "no ATOM/HETATM records found");
  return s;
}

inline std::string write_pdb(const Structure& s) {
  if (s.atoms.empty()) throw Error(ErrorCode::NoAtoms, "structure has no atoms to write");
  std::string out;
  if (!s.title.empty()) out += "TITLE     " + s.title + "\n";
  char buf[128];
  for (const Atom& a : s.atoms) {
    std::snprintf(buf, sizeof buf, "ATOM  %5d %s %-4s%c%4d    %8.3f%8.3f%8.3f%6.2f%6.2f          %2s\n", a.serial,
                  detail::pdb_name_field(a).c_str(), a.resname.c_str(), a.chain, a.resid, a.position.x, a.position.y,
                  a.position.z, 1.0, 0.0, a.element.c_str());
    out += buf;
  }
  out += "END\n";
  return out;
}

inline std::string write_pdb(const SceneState& scene) { return write_pdb(scene.structure); }

/// Fresh scene with the documented baseline: spacefill 1, sticks 1, colored
/// by element, everything selected, simulation stopped at 300 degrees.
inline SceneState make_scene(Structure structure) {
  SceneState scene;
  scene.structure = std::move(structure);
  scene.rep.reserve(scene.structure.atoms.size());
  for (const Atom& a : scene.structure.atoms) scene.rep.push_back({1.0, 1.0, element_color(a.element)});
  scene.selection.resize(scene.structure.atoms.size());
  for (std::size_t i = 0; i < scene.selection.size(); ++i) scene.selection[i] = i;
  return scene;
}

inline std::size_t count_atoms(const SceneState& scene) { return scene.structure.atoms.size(); }

inline void apply_rep(SceneState& scene, RepKind kind, double radius) {
  if (!(radius >= 0.0) || !std::isfinite(radius))
    throw Error(ErrorCode::NegativeRadius, "radius must be a finite value >= 0", {{"radius", radius}});
  for (std::size_t i : scene.selection) {
    AtomRep& r = scene.rep.at(i);
    (kind == RepKind::Spacefill ? r.spacefill : r.sticks) = radius;
  }
}

inline void apply_color(SceneState& scene, Color color) {
  for (std::size_t i : scene.selection)
    scene.rep.at(i).color = color == Color::ByAtom ? element_color(scene.structure.atoms.at(i).element) : color;
}

/// Name-based overload; rejects anything outside the palette ("byref").
inline void apply_color(SceneState& scene, std::string_view color_name) {
  auto color = parse_color(color_name);
  if (!color)
    throw Error(ErrorCode::UnknownColor, "unknown color '" + std::string(color_name) + "'",
                {{"color", std::string(color_name)}});
  apply_color(scene, *color);
}

inline void adjust_sim(SceneState& scene, SimField field, AdjustMode mode, double value) {
  if (!std::isfinite(value)) throw Error(ErrorCode::NonNumeric, "simulation parameter must be a finite number");
  double& target = field == SimField::Temperature ? scene.sim.temperature : scene.sim.updateRate;
  double next = mode == AdjustMode::Set ? value : target + value;
  target = field == SimField::Temperature ? std::clamp(next, kMinTemperature, kMaxTemperature)
                                          : std::clamp(next, kMinUpdateRate, kMaxUpdateRate);
}

inline void set_running(SceneState& scene, bool running) { scene.sim.running = running; }

inline void zoom(SceneState& scene, ZoomDirection direction) {
  double next = direction == ZoomDirection::In ? scene.view.zoomFactor * kZoomStep : scene.view.zoomFactor / kZoomStep;
  scene.view.zoomFactor = std::clamp(next, kMinZoom, kMaxZoom);
}

}  // namespace molvoice
