// Copyright 2026 The OTCD Authors
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Scenario container (JSON lines) and MOTChallenge text files.
//
// Container layout, one JSON object per line:
//   1. header:     {"format":"otcd-scenario","version":1,"width":..,"height":..,
//                   "block":..,"gop":..,"fps":..,"channels":..,"bins":..,"frames":N}
//   2. identities: {"identities":[[id,seed],...]}
//   3. N frames:   {"index":i,"kind":"P","gt":[[id,x,y,w,h,visible],...],
//                   "mv_x":[...],"mv_y":[...],"residual":[...]}
// Grids are row-major (cy * grid_w + cx). I-frames omit the motion arrays.

#pragma once

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "otcd/model.hpp"
#include "otcd/stream.hpp"

namespace otcd {

inline constexpr const char* kScenarioFormat = "otcd-scenario";
inline constexpr int kScenarioVersion = 1;

inline void write_scenario(const Scenario& sc, std::ostream& out) {
  using nlohmann::ordered_json;
  const auto& h = sc.header;
  ordered_json head;
  head["format"] = kScenarioFormat;
  head["version"] = kScenarioVersion;
  head["width"] = h.width;
  head["height"] = h.height;
  head["block"] = h.block;
  head["gop"] = h.gop;
  head["fps"] = h.fps;
  head["channels"] = h.feature_channels;
  head["bins"] = h.feature_bins;
  head["frames"] = sc.frames.size();
  out << head.dump() << '\n';

  ordered_json ids = ordered_json::array();
  for (const auto& [id, seed] : sc.identity_seeds) ids.push_back({id, seed});
  ordered_json rec;
  rec["identities"] = std::move(ids);
  out << rec.dump() << '\n';

  std::size_t g = 0;
  for (const auto& f : sc.frames) {
    ordered_json fr;
    fr["index"] = f.index;
    fr["kind"] = f.kind == FrameKind::I ? "I" : "P";
    ordered_json gt = ordered_json::array();
    for (; g < sc.gt.size() && sc.gt[g].frame == f.index; ++g) {
      const auto& e = sc.gt[g];
      gt.push_back({e.id, e.bbox.x, e.bbox.y, e.bbox.w, e.bbox.h, e.visible ? 1 : 0});
    }
    fr["gt"] = std::move(gt);
    if (f.kind == FrameKind::P) {
      fr["mv_x"] = f.mv_x;
      fr["mv_y"] = f.mv_y;
      fr["residual"] = f.residual;
    }
    out << fr.dump() << '\n';
  }
}

inline void write_scenario(const Scenario& sc, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  write_scenario(sc, out);
  if (!out) throw std::runtime_error("write failed: " + path);
}

inline Scenario read_scenario(std::istream& in) {
  using nlohmann::json;
  Scenario sc;
  std::string line;
  auto parse_line = [&](const std::string& what) {
    try {
      return json::parse(line);
    } catch (const json::exception& e) {
      throw FormatError(what + ": " + e.what());
    }
  };

  if (!std::getline(in, line)) throw FormatError("scenario: empty file");
  std::size_t declared = 0;
  {
    json head = parse_line("malformed header");
    try {
      if (head.at("format").get<std::string>() != kScenarioFormat)
        throw FormatError("malformed header: not an otcd scenario");
      if (head.at("version").get<int>() != kScenarioVersion)
        throw FormatError("malformed header: unsupported version");
      auto& h = sc.header;
      h.width = head.at("width").get<int>();
      h.height = head.at("height").get<int>();
      h.block = head.at("block").get<int>();
      h.gop = head.at("gop").get<int>();
      h.fps = head.at("fps").get<double>();
      h.feature_channels = head.at("channels").get<int>();
      h.feature_bins = head.at("bins").get<int>();
      declared = head.at("frames").get<std::size_t>();
    } catch (const json::exception& e) {
      throw FormatError(std::string("malformed header: ") + e.what());
    }
    try {
      sc.header.validate();
    } catch (const FormatError& e) {
      throw FormatError(std::string("malformed header: ") + e.what());
    }
  }

  if (!std::getline(in, line)) throw FormatError("scenario: missing identity record");
  {
    json rec = parse_line("malformed identity record");
    try {
      for (const auto& pair : rec.at("identities"))
        sc.identity_seeds[pair.at(0).get<int>()] = pair.at(1).get<std::uint64_t>();
    } catch (const json::exception& e) {
      throw FormatError(std::string("malformed identity record: ") + e.what());
    }
  }

  const int gw = sc.header.grid_w();
  const int gh = sc.header.grid_h();
  const std::size_t cells = static_cast<std::size_t>(gw) * gh;
  auto truncated = [&]() {
    const std::string last =
        sc.frames.empty() ? std::string("none") : std::to_string(sc.frames.back().index);
    return FormatError("truncated scenario: last complete frame is " + last + " (expected " +
                       std::to_string(declared) + " frames)");
  };

  while (sc.frames.size() < declared) {
    if (!std::getline(in, line) || line.empty()) throw truncated();
    const int expected = static_cast<int>(sc.frames.size());
    json fr;
    try {
      fr = json::parse(line);
    } catch (const json::exception&) {
      throw truncated();
    }
    const std::string where = "frame " + std::to_string(expected);
    try {
      const int index = fr.at("index").get<int>();
      if (index != expected) {
        throw FormatError(where + ": non-monotone frame index " + std::to_string(index));
      }
      const std::string kind = fr.at("kind").get<std::string>();
      if (kind != "I" && kind != "P") throw FormatError(where + ": unknown frame kind " + kind);
      const FrameKind k = kind == "I" ? FrameKind::I : FrameKind::P;
      if (k != sc.header.kind_of(index)) {
        throw FormatError(where + ": frame kind " + kind + " violates gop " +
                          std::to_string(sc.header.gop));
      }
      MotionFrame f(index, k, gw, gh, sc.header.block);
      if (fr.contains("mv_x") || k == FrameKind::P) {
        f.mv_x = fr.at("mv_x").get<std::vector<int>>();
        f.mv_y = fr.at("mv_y").get<std::vector<int>>();
        f.residual = fr.at("residual").get<std::vector<double>>();
        if (f.mv_x.size() != cells || f.mv_y.size() != cells || f.residual.size() != cells) {
          throw FormatError(where + ": grid size mismatch (expected " + std::to_string(gw) +
                            "x" + std::to_string(gh) + ")");
        }
        for (double r : f.residual)
          if (!(r >= 0.0)) throw FormatError(where + ": negative residual");
        if (k == FrameKind::I && !f.has_zero_motion())
          throw FormatError(where + ": I-frame carries motion data");
      }
      for (const auto& g : fr.at("gt")) {
        GroundTruthEntry e;
        e.frame = index;
        e.id = g.at(0).get<int>();
        e.bbox = {g.at(1).get<double>(), g.at(2).get<double>(), g.at(3).get<double>(),
                  g.at(4).get<double>()};
        e.visible = g.at(5).get<int>() != 0;
        if (!e.bbox.valid()) throw FormatError(where + ": invalid ground-truth box");
        for (auto it = sc.gt.rbegin(); it != sc.gt.rend() && it->frame == index; ++it)
          if (it->id == e.id) throw FormatError(where + ": duplicate ground-truth id");
        sc.gt.push_back(e);
      }
      sc.frames.push_back(std::move(f));
    } catch (const json::exception& e) {
      throw FormatError(where + ": " + e.what());
    }
  }
  if (sc.frames.empty() || sc.frames.front().kind != FrameKind::I)
    throw FormatError("scenario: first frame must be an I-frame");
  return sc;
}

inline Scenario read_scenario(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  return read_scenario(in);
}

/// One MOTChallenge row; `frame` is 1-based.
struct TrackRow {
  int frame = 1;
  int id = -1;
  BBox box;
  double conf = 1.0;

  friend bool operator==(const TrackRow&, const TrackRow&) = default;
};

/// Visible ground truth as MOTChallenge rows (frame = index + 1).
inline std::vector<TrackRow> gt_rows(const Scenario& sc) {
  std::vector<TrackRow> rows;
  for (const auto& e : sc.gt)
    if (e.visible) rows.push_back({e.frame + 1, e.id, e.bbox, 1.0});
  return rows;
}

inline std::string format_motchallenge_row(const TrackRow& r) {
  char buf[192];
  std::snprintf(buf, sizeof(buf), "%d,%d,%.2f,%.2f,%.2f,%.2f,%.2f,-1,-1,-1", r.frame, r.id,
                r.box.left(), r.box.top(), r.box.w, r.box.h, r.conf);
  return buf;
}

inline void write_motchallenge(const std::vector<TrackRow>& rows, std::ostream& out) {
  for (const auto& r : rows) {
    if (r.frame < 1) throw std::invalid_argument("MOTChallenge frames are 1-based");
    out << format_motchallenge_row(r) << '\n';
  }
}

inline void write_motchallenge(const std::vector<TrackRow>& rows, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  write_motchallenge(rows, out);
}

/// Reads result, ground-truth or detection files (at least 6 fields per
/// line; a missing confidence defaults to 1).
inline std::vector<TrackRow> read_motchallenge(std::istream& in) {
  std::vector<TrackRow> rows;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    std::vector<double> f;
    std::string_view rest(line);
    while (true) {
      const auto comma = rest.find(',');
      std::string_view tok = rest.substr(0, comma);
      while (!tok.empty() && (tok.front() == ' ' || tok.front() == '\t')) tok.remove_prefix(1);
      while (!tok.empty() && (tok.back() == ' ' || tok.back() == '\t')) tok.remove_suffix(1);
      double v = 0.0;
      auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
      if (ec != std::errc() || ptr != tok.data() + tok.size() || tok.empty())
        throw FormatError("line " + std::to_string(lineno) + ": malformed field '" +
                          std::string(tok) + "'");
      f.push_back(v);
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    if (f.size() < 6)
      throw FormatError("line " + std::to_string(lineno) + ": expected at least 6 fields");
    TrackRow r;
    r.frame = static_cast<int>(f[0]);
    r.id = static_cast<int>(f[1]);
    if (r.frame != f[0] || r.id != f[1] || r.frame < 1)
      throw FormatError("line " + std::to_string(lineno) + ": bad frame or id");
    r.box = BBox::from_corner(f[2], f[3], f[4], f[5]);
    if (!r.box.valid()) throw FormatError("line " + std::to_string(lineno) + ": invalid box");
    r.conf = f.size() > 6 ? f[6] : 1.0;
    rows.push_back(r);
  }
  return rows;
}

inline std::vector<TrackRow> read_motchallenge(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  return read_motchallenge(in);
}

}  // namespace otcd
