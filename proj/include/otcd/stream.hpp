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

// Compressed-domain scenarios: stream header, motion scripts, the scenario
// generator with ground truth, the appearance surrogate and the oracle
// detector.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "otcd/model.hpp"

namespace otcd {

struct StreamHeader {
  int width = 960;
  int height = 540;
  int block = 16;
  int gop = 12;  // one I-frame followed by 11 P-frames
  double fps = 30.0;
  int feature_channels = 16;
  int feature_bins = 7;

  int grid_w() const { return (width + block - 1) / block; }
  int grid_h() const { return (height + block - 1) / block; }

  /// Container indices are 0-based; index 0 and every gop-th index is an I-frame.
  FrameKind kind_of(int index) const { return index % gop == 0 ? FrameKind::I : FrameKind::P; }

  void validate() const {
    if (width < 1 || height < 1) throw FormatError("header: frame size must be positive");
    if (block < 1) throw FormatError("header: block must be >= 1");
    if (gop < 1) throw FormatError("header: gop must be >= 1");
    if (!(fps > 0.0)) throw FormatError("header: fps must be positive");
    if (feature_channels < 1 || feature_bins < 1)
      throw FormatError("header: feature shape must be positive");
  }

  friend bool operator==(const StreamHeader&, const StreamHeader&) = default;
};

struct GroundTruthEntry {
  int frame = 0;  // container index
  int id = 0;
  BBox bbox;
  bool visible = true;

  friend bool operator==(const GroundTruthEntry&, const GroundTruthEntry&) = default;
};

struct Scenario {
  StreamHeader header;
  std::vector<MotionFrame> frames;
  std::vector<GroundTruthEntry> gt;  // sorted by frame
  std::map<int, std::uint64_t> identity_seeds;

  int frame_count() const { return static_cast<int>(frames.size()); }

  /// Ground-truth entries of one container index, in generation order.
  std::vector<GroundTruthEntry> gt_at(int index) const {
    auto lo = std::lower_bound(gt.begin(), gt.end(), index,
                               [](const GroundTruthEntry& e, int f) { return e.frame < f; });
    std::vector<GroundTruthEntry> out;
    for (; lo != gt.end() && lo->frame == index; ++lo) out.push_back(*lo);
    return out;
  }

  friend bool operator==(const Scenario&, const Scenario&) = default;
};

/// Parametric trajectory of one scripted object. The box is given at the
/// entry frame; from there the center moves by (vx, vy) per frame and both
/// sides scale by `zoom` per frame.
struct ObjectScript {
  int id = 0;
  BBox start;
  double vx = 0.0;
  double vy = 0.0;
  double zoom = 1.0;
  int enter = 0;
  int exit = -1;  // inclusive; -1 means the last frame
  std::vector<std::pair<int, int>> occlusions;  // inclusive index ranges
  double occlusion_residual = 8.0;

  BBox box_at(int index) const {
    const int dt = index - enter;
    const double s = std::pow(zoom, dt);
    return {start.x + vx * dt, start.y + vy * dt, start.w * s, start.h * s};
  }
  bool alive(int index) const { return index >= enter && index <= exit; }
  bool occluded(int index) const {
    return std::any_of(occlusions.begin(), occlusions.end(),
                       [&](const auto& r) { return index >= r.first && index <= r.second; });
  }
};

struct MotionScript {
  int frames = 0;
  double camera_dx = 0.0;
  double camera_dy = 0.0;
  std::vector<ObjectScript> objects;  // later entries are in front
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline double parse_number(const std::string& text, int line, const std::string& key) {
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used != text.size() || !std::isfinite(v)) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw FormatError("script line " + std::to_string(line) + ": bad value for '" + key +
                      "': " + text);
  }
}

inline int parse_int(const std::string& text, int line, const std::string& key) {
  const double v = parse_number(text, line, key);
  if (v != std::floor(v)) {
    throw FormatError("script line " + std::to_string(line) + ": '" + key +
                      "' must be an integer");
  }
  return static_cast<int>(v);
}

}  // namespace detail

/// Parses the line-based motion script:
///
///   frames 120
///   camera 0 0
///   object id=1 x=100 y=200 w=40 h=80 vx=2 vy=0 zoom=1 enter=0 exit=119 occlude=30-40
///
/// `#` starts a comment. Every key of `object` except x, y, w, h is optional.
inline MotionScript parse_motion_script(const std::string& text) {
  MotionScript script;
  std::istringstream in(text);
  std::string raw;
  int line = 0;
  int next_id = 1;
  bool have_frames = false;
  auto fail = [&](const std::string& msg) {
    throw FormatError("script line " + std::to_string(line) + ": " + msg);
  };
  while (std::getline(in, raw)) {
    ++line;
    if (auto hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
    std::istringstream tokens(raw);
    std::string word;
    if (!(tokens >> word)) continue;
    if (word == "frames") {
      std::string n;
      if (!(tokens >> n)) fail("missing frame count");
      script.frames = detail::parse_int(n, line, "frames");
      if (script.frames < 1) fail("frame count must be >= 1");
      have_frames = true;
    } else if (word == "camera") {
      std::string dx, dy;
      if (!(tokens >> dx >> dy)) fail("camera needs dx dy");
      script.camera_dx = detail::parse_number(dx, line, "camera");
      script.camera_dy = detail::parse_number(dy, line, "camera");
    } else if (word == "object") {
      ObjectScript obj;
      obj.id = next_id;
      bool has[4] = {false, false, false, false};
      std::string kv;
      while (tokens >> kv) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) fail("expected key=value, got '" + kv + "'");
        const std::string key = kv.substr(0, eq);
        const std::string val = kv.substr(eq + 1);
        if (key == "id") {
          obj.id = detail::parse_int(val, line, key);
        } else if (key == "x") {
          obj.start.x = detail::parse_number(val, line, key);
          has[0] = true;
        } else if (key == "y") {
          obj.start.y = detail::parse_number(val, line, key);
          has[1] = true;
        } else if (key == "w") {
          obj.start.w = detail::parse_number(val, line, key);
          has[2] = true;
        } else if (key == "h") {
          obj.start.h = detail::parse_number(val, line, key);
          has[3] = true;
        } else if (key == "vx") {
          obj.vx = detail::parse_number(val, line, key);
        } else if (key == "vy") {
          obj.vy = detail::parse_number(val, line, key);
        } else if (key == "zoom") {
          obj.zoom = detail::parse_number(val, line, key);
          if (!(obj.zoom > 0.0)) fail("zoom must be positive");
        } else if (key == "enter") {
          obj.enter = detail::parse_int(val, line, key);
        } else if (key == "exit") {
          obj.exit = detail::parse_int(val, line, key);
        } else if (key == "occlusion_residual") {
          obj.occlusion_residual = detail::parse_number(val, line, key);
          if (obj.occlusion_residual < 0.0) fail("occlusion_residual must be >= 0");
        } else if (key == "occlude") {
          std::istringstream ranges(val);
          std::string r;
          while (std::getline(ranges, r, ',')) {
            const auto dash = r.find('-');
            if (dash == std::string::npos) fail("occlusion range must be a-b");
            const int a = detail::parse_int(r.substr(0, dash), line, key);
            const int b = detail::parse_int(r.substr(dash + 1), line, key);
            if (b < a) fail("occlusion range end before start");
            obj.occlusions.emplace_back(a, b);
          }
        } else {
          fail("unknown object key '" + key + "'");
        }
      }
      if (!(has[0] && has[1] && has[2] && has[3])) fail("object needs x, y, w and h");
      if (!(obj.start.w > 0.0 && obj.start.h > 0.0)) fail("object size must be positive");
      if (obj.id < 1) fail("object id must be >= 1");
      for (const auto& other : script.objects)
        if (other.id == obj.id) fail("duplicate object id " + std::to_string(obj.id));
      next_id = std::max(next_id, obj.id) + 1;
      obj.occlusions.shrink_to_fit();
      script.objects.push_back(std::move(obj));
    } else {
      fail("unknown directive '" + word + "'");
    }
  }
  if (!have_frames) throw FormatError("script: missing 'frames' directive");
  for (auto& obj : script.objects) {
    if (obj.exit < 0) obj.exit = script.frames - 1;
    if (obj.enter < 0 || obj.enter > obj.exit || obj.exit >= script.frames) {
      throw FormatError("script: object " + std::to_string(obj.id) +
                        " has an invalid enter/exit range");
    }
  }
  return script;
}

/// Builds ground truth and block motion for a script. Each block whose
/// center lies in a visible object's previous-frame box carries that
/// object's rounded displacement at the block center (frontmost object
/// wins); other blocks carry the camera displacement. Residual energy is
/// the rounding error magnitude plus, for objects inside an occlusion
/// interval, their occlusion residual constant.
inline Scenario generate_scenario(const MotionScript& script, const StreamHeader& header,
                                  std::uint64_t seed) {
  header.validate();
  if (script.frames < 1) throw FormatError("script: no frames");
  Scenario sc;
  sc.header = header;

  for (const auto& obj : script.objects) {
    if (obj.exit >= script.frames || obj.enter < 0 || obj.enter > obj.exit)
      throw FormatError("script: object " + std::to_string(obj.id) + " has an invalid range");
    for (int i = obj.enter; i <= obj.exit; ++i) {
      const BBox b = obj.box_at(i);
      if (b.w > header.width || b.h > header.height) {
        throw FormatError("script: object " + std::to_string(obj.id) +
                          " is larger than the frame at index " + std::to_string(i));
      }
    }
    if (sc.identity_seeds.count(obj.id))
      throw FormatError("script: duplicate object id " + std::to_string(obj.id));
    sc.identity_seeds[obj.id] =
        detail::splitmix64(seed ^ detail::splitmix64(static_cast<std::uint64_t>(obj.id)));
  }

  // Front-to-back order: later entry, then later script position.
  std::vector<const ObjectScript*> front_order;
  for (const auto& obj : script.objects) front_order.push_back(&obj);
  std::stable_sort(front_order.begin(), front_order.end(),
                   [](const ObjectScript* a, const ObjectScript* b) { return a->enter > b->enter; });
  // stable_sort keeps script order among equal entries; reverse that part so
  // later script entries come first.
  for (auto it = front_order.begin(); it != front_order.end();) {
    auto end = std::find_if(it, front_order.end(),
                            [&](const ObjectScript* o) { return o->enter != (*it)->enter; });
    std::reverse(it, end);
    it = end;
  }

  const int gw = header.grid_w();
  const int gh = header.grid_h();
  const double cam_rx = std::round(script.camera_dx);
  const double cam_ry = std::round(script.camera_dy);
  const double cam_res = std::hypot(script.camera_dx - cam_rx, script.camera_dy - cam_ry);

  for (int i = 0; i < script.frames; ++i) {
    for (const auto& obj : script.objects) {
      if (obj.alive(i)) sc.gt.push_back({i, obj.id, obj.box_at(i), !obj.occluded(i)});
    }

    MotionFrame frame(i, header.kind_of(i), gw, gh, header.block);
    if (frame.kind == FrameKind::P) {
      for (int cy = 0; cy < gh; ++cy) {
        for (int cx = 0; cx < gw; ++cx) {
          const double px = (cx + 0.5) * header.block;
          const double py = (cy + 0.5) * header.block;
          const std::size_t c = frame.cell(cx, cy);
          double occlusion = 0.0;
          bool owned = false;
          for (const ObjectScript* obj : front_order) {
            if (!obj->alive(i - 1) || !obj->alive(i)) continue;
            const BBox prev = obj->box_at(i - 1);
            if (!prev.contains(px, py)) continue;
            if (obj->occluded(i)) {
              occlusion += obj->occlusion_residual;
              continue;
            }
            if (owned) continue;
            const BBox next = obj->box_at(i);
            const double dx = next.x + (next.w / prev.w) * (px - prev.x) - px;
            const double dy = next.y + (next.h / prev.h) * (py - prev.y) - py;
            const double rx = std::round(dx);
            const double ry = std::round(dy);
            frame.mv_x[c] = static_cast<int>(rx);
            frame.mv_y[c] = static_cast<int>(ry);
            frame.residual[c] = std::hypot(dx - rx, dy - ry);
            owned = true;
          }
          if (!owned) {
            frame.mv_x[c] = static_cast<int>(cam_rx);
            frame.mv_y[c] = static_cast<int>(cam_ry);
            frame.residual[c] = cam_res;
          }
          frame.residual[c] += occlusion;
        }
      }
    }
    sc.frames.push_back(std::move(frame));
  }
  return sc;
}

/// Identity pattern P(id): m x m x c standard normal entries drawn from the
/// identity's seed.
inline FeaturePatch base_pattern(std::uint64_t identity_seed, int bins, int channels) {
  FeaturePatch patch(bins, channels);
  std::mt19937_64 gen(identity_seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (double& v : patch.values()) v = normal(gen);
  return patch;
}

/// Appearance surrogate: the identity pattern plus i.i.d. noise of scale
/// `noise` drawn from `rng`.
template <class Rng>
FeaturePatch feature_of(std::uint64_t identity_seed, int bins, int channels, double noise,
                        Rng& rng) {
  FeaturePatch patch = base_pattern(identity_seed, bins, channels);
  if (noise > 0.0) {
    std::normal_distribution<double> normal(0.0, noise);
    for (double& v : patch.values()) v += normal(rng);
  }
  return patch;
}

template <class Rng>
FeaturePatch feature_of(const Scenario& sc, int id, double noise, Rng& rng) {
  auto it = sc.identity_seeds.find(id);
  if (it == sc.identity_seeds.end())
    throw std::invalid_argument("feature_of: no identity seed for id " + std::to_string(id));
  return feature_of(it->second, sc.header.feature_bins, sc.header.feature_channels, noise, rng);
}

struct DetectorConfig {
  double noise_center = 0.0;  // std dev, in units of box size
  double noise_size = 0.0;    // std dev of log size
  double miss_rate = 0.0;
  double fp_rate = 0.0;  // expected false positives per key frame
  double feature_noise = 0.1;
  double conf_low = 0.95;  // confidences are uniform in [conf_low, 1]
  std::uint64_t rng_seed = 0;

  void validate() const {
    if (!(noise_center >= 0.0 && noise_size >= 0.0 && feature_noise >= 0.0))
      throw ConfigError("detector noise must be non-negative");
    if (!(miss_rate >= 0.0 && miss_rate <= 1.0)) throw ConfigError("miss_rate must lie in [0,1]");
    if (!(fp_rate >= 0.0)) throw ConfigError("fp_rate must be non-negative");
    if (!(conf_low >= 0.0 && conf_low <= 1.0)) throw ConfigError("conf_low must lie in [0,1]");
  }
};

/// Simulated detector for one key frame. Visible objects are reported with
/// probability 1 - miss_rate; a Poisson number of false positives with
/// fresh identities is added. The stream of random draws depends only on
/// (rng_seed, index).
inline std::vector<Detection> oracle_detect(const Scenario& sc, int index,
                                            const DetectorConfig& cfg) {
  std::seed_seq seq{static_cast<std::uint32_t>(cfg.rng_seed),
                    static_cast<std::uint32_t>(cfg.rng_seed >> 32),
                    static_cast<std::uint32_t>(index), 0x0d3c7u};
  std::mt19937_64 rng(seq);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> conf(cfg.conf_low, 1.0);

  std::vector<Detection> out;
  for (const auto& e : sc.gt_at(index)) {
    if (!e.visible) continue;
    if (unit(rng) < cfg.miss_rate) continue;
    Detection d;
    d.bbox.x = e.bbox.x + cfg.noise_center * e.bbox.w * normal(rng);
    d.bbox.y = e.bbox.y + cfg.noise_center * e.bbox.h * normal(rng);
    d.bbox.w = e.bbox.w * std::exp(cfg.noise_size * normal(rng));
    d.bbox.h = e.bbox.h * std::exp(cfg.noise_size * normal(rng));
    d.confidence = conf(rng);
    d.feature = feature_of(sc, e.id, cfg.feature_noise, rng);
    out.push_back(std::move(d));
  }

  std::poisson_distribution<int> fp_count(cfg.fp_rate);
  const int n_fp = cfg.fp_rate > 0.0 ? fp_count(rng) : 0;
  const double max_w = std::max(1.0, std::min<double>(96.0, sc.header.width / 2.0));
  for (int k = 0; k < n_fp; ++k) {
    Detection d;
    d.bbox.w = std::uniform_real_distribution<double>(std::min(24.0, max_w), max_w)(rng);
    d.bbox.h = std::min<double>(2.0 * d.bbox.w, sc.header.height);
    d.bbox.x = std::uniform_real_distribution<double>(d.bbox.w / 2, sc.header.width - d.bbox.w / 2)(rng);
    d.bbox.y = std::uniform_real_distribution<double>(d.bbox.h / 2, sc.header.height - d.bbox.h / 2)(rng);
    d.confidence = conf(rng);
    d.feature = feature_of(rng(), sc.header.feature_bins, sc.header.feature_channels,
                           cfg.feature_noise, rng);
    out.push_back(std::move(d));
  }
  return out;
}

/// Features for externally supplied boxes: each box takes the appearance of
/// the visible ground-truth object it overlaps best (IoU >= 0.5), otherwise
/// a fresh pattern.
inline std::vector<Detection> attach_features(const Scenario& sc, int index,
                                              const std::vector<std::pair<BBox, double>>& boxes,
                                              double noise, std::uint64_t seed) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), 0xfea7u};
  std::mt19937_64 rng(seq);
  const auto truth = sc.gt_at(index);
  std::vector<Detection> out;
  for (const auto& [box, confidence] : boxes) {
    int best_id = -1;
    double best = 0.5;
    for (const auto& e : truth) {
      if (!e.visible) continue;
      const double iou = bbox_iou(box, e.bbox);
      if (iou >= best) {
        best = iou;
        best_id = e.id;
      }
    }
    Detection d{box, confidence, {}};
    d.feature = best_id >= 0 ? feature_of(sc, best_id, noise, rng)
                             : feature_of(rng(), sc.header.feature_bins,
                                          sc.header.feature_channels, noise, rng);
    out.push_back(std::move(d));
  }
  return out;
}

}  // namespace otcd
