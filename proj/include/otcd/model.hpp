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

// Core domain types shared by the tracker: boxes, velocities, appearance
// patches, detections, tracked objects, motion frames and tracker settings.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <deque>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace otcd {

/// Raised for invalid configuration (CLI exit code 2).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised for malformed input files and data contract violations.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Center-parameterized bounding box in continuous pixel coordinates.
struct BBox {
  double x = 0.0;  // center
  double y = 0.0;  // center
  double w = 1.0;
  double h = 1.0;

  static BBox from_corner(double left, double top, double width, double height) {
    return {left + width / 2.0, top + height / 2.0, width, height};
  }

  double left() const { return x - w / 2.0; }
  double top() const { return y - h / 2.0; }
  double right() const { return x + w / 2.0; }
  double bottom() const { return y + h / 2.0; }
  double area() const { return w * h; }
  bool valid() const { return w > 0.0 && h > 0.0 && std::isfinite(x) && std::isfinite(y); }

  bool contains(double px, double py) const {
    return px >= left() && px < right() && py >= top() && py < bottom();
  }

  friend bool operator==(const BBox&, const BBox&) = default;
};

/// Box-relative velocity: center shifts in units of the box size and
/// log size ratios.
struct Velocity {
  double vx = 0.0;
  double vy = 0.0;
  double vw = 0.0;
  double vh = 0.0;

  double operator[](int k) const {
    switch (k) {
      case 0: return vx;
      case 1: return vy;
      case 2: return vw;
      default: return vh;
    }
  }
  double& operator[](int k) {
    switch (k) {
      case 0: return vx;
      case 1: return vy;
      case 2: return vw;
      default: return vh;
    }
  }
  bool finite() const {
    return std::isfinite(vx) && std::isfinite(vy) && std::isfinite(vw) && std::isfinite(vh);
  }

  friend bool operator==(const Velocity&, const Velocity&) = default;
};

/// Appearance feature of shape m x m x c, stored position-major so that the
/// c-vector of one spatial bin is contiguous.
class FeaturePatch {
 public:
  FeaturePatch() = default;
  FeaturePatch(int bins, int channels)
      : bins_(bins), channels_(channels),
        data_(static_cast<std::size_t>(bins) * bins * channels, 0.0) {
    if (bins < 1 || channels < 1) throw std::invalid_argument("FeaturePatch: empty shape");
  }

  int bins() const { return bins_; }
  int channels() const { return channels_; }
  int positions() const { return bins_ * bins_; }
  std::size_t size() const { return data_.size(); }

  double& at(int u, int v, int ch) { return data_[index(u, v, ch)]; }
  double at(int u, int v, int ch) const { return data_[index(u, v, ch)]; }

  /// Channel vector at flattened position p = u * m + v.
  std::span<double> position(int p) {
    return {data_.data() + static_cast<std::size_t>(p) * channels_,
            static_cast<std::size_t>(channels_)};
  }
  std::span<const double> position(int p) const {
    return {data_.data() + static_cast<std::size_t>(p) * channels_,
            static_cast<std::size_t>(channels_)};
  }

  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }

  bool same_shape(const FeaturePatch& other) const {
    return bins_ == other.bins_ && channels_ == other.channels_;
  }

  friend bool operator==(const FeaturePatch&, const FeaturePatch&) = default;

 private:
  std::size_t index(int u, int v, int ch) const {
    return (static_cast<std::size_t>(u) * bins_ + v) * channels_ + ch;
  }

  int bins_ = 0;
  int channels_ = 0;
  std::vector<double> data_;
};

struct Detection {
  BBox bbox;
  double confidence = 1.0;
  FeaturePatch feature;
};

enum class LifecycleState { Tentative, Confirmed, Deleted };

inline const char* to_string(LifecycleState s) {
  switch (s) {
    case LifecycleState::Tentative: return "tentative";
    case LifecycleState::Confirmed: return "confirmed";
    case LifecycleState::Deleted: return "deleted";
  }
  return "?";
}

/// The lifecycle transition relation, self-loops included. Deleted is
/// absorbing.
inline bool is_allowed_transition(LifecycleState from, LifecycleState to) {
  using S = LifecycleState;
  if (from == to) return true;
  if (from == S::Tentative) return to == S::Confirmed || to == S::Deleted;
  if (from == S::Confirmed) return to == S::Tentative;
  return false;
}

struct TrackedObject {
  int id = 0;
  BBox bbox;
  LifecycleState state = LifecycleState::Tentative;
  std::deque<FeaturePatch> gallery;  // oldest first
  int hits = 0;
  int misses = 0;
};

enum class FrameKind { I, P };

/// Block-grid motion data of one frame. Cell (cx, cy) is stored at
/// cy * grid_w + cx; the vector is the integer displacement of the block
/// from the previous frame to this one.
struct MotionFrame {
  int index = 0;
  FrameKind kind = FrameKind::I;
  int grid_w = 0;
  int grid_h = 0;
  int block = 16;
  std::vector<int> mv_x;
  std::vector<int> mv_y;
  std::vector<double> residual;

  MotionFrame() = default;
  MotionFrame(int idx, FrameKind k, int gw, int gh, int blk)
      : index(idx), kind(k), grid_w(gw), grid_h(gh), block(blk),
        mv_x(static_cast<std::size_t>(gw) * gh, 0),
        mv_y(static_cast<std::size_t>(gw) * gh, 0),
        residual(static_cast<std::size_t>(gw) * gh, 0.0) {}

  std::size_t cells() const { return static_cast<std::size_t>(grid_w) * grid_h; }
  std::size_t cell(int cx, int cy) const { return static_cast<std::size_t>(cy) * grid_w + cx; }

  bool has_zero_motion() const {
    return std::all_of(mv_x.begin(), mv_x.end(), [](int v) { return v == 0; }) &&
           std::all_of(mv_y.begin(), mv_y.end(), [](int v) { return v == 0; }) &&
           std::all_of(residual.begin(), residual.end(), [](double r) { return r == 0.0; });
  }

  friend bool operator==(const MotionFrame&, const MotionFrame&) = default;
};

enum class AssociationMode { TwoStep, OneStep };
enum class PropagatorKind { BBoxAvg, PixelShift, Regressor };

struct TrackerConfig {
  int K = 3;
  double tau_iou = 0.3;
  double tau_app = 0.25;
  double conf_min = 0.95;
  double c_confirm = 0.99;
  int l_confirm = 3;
  int l_demote = 2;
  int l_delete = 10;
  int l_f = 24;
  int m = 7;
  AssociationMode association = AssociationMode::TwoStep;
  double alpha = 0.5;
  // Two-step only: when false, step 2 (appearance) is skipped entirely.
  bool appearance = true;
  PropagatorKind propagator = PropagatorKind::Regressor;
  // Synthetic busy-wait added to every non-key frame, in seconds; lets
  // benchmarks set the propagation/detection cost ratio.
  double propagation_delay = 0.0;
  // When positive, non-key frames also spin until the running propagation
  // ratio (mean propagation time over mean detection plus association
  // time) reaches this value. Zero disables pacing.
  double pace_ratio = 0.0;

  /// Throws ConfigError when a threshold or length is out of range or K
  /// does not divide the GOP size.
  void validate(int gop) const {
    auto unit = [](double v, const char* name) {
      if (!(v >= 0.0 && v <= 1.0))
        throw ConfigError(std::string(name) + " must lie in [0,1]");
    };
    unit(tau_iou, "tau_iou");
    unit(tau_app, "tau_app");
    unit(conf_min, "conf_min");
    unit(c_confirm, "c_confirm");
    unit(alpha, "alpha");
    if (K < 1 || l_confirm < 1 || l_demote < 1 || l_delete < 1 || l_f < 1 || m < 1)
      throw ConfigError("K and all lengths must be >= 1");
    if (!(propagation_delay >= 0.0 && std::isfinite(propagation_delay)))
      throw ConfigError("propagation_delay must be a finite value >= 0");
    if (!(pace_ratio >= 0.0 && std::isfinite(pace_ratio)))
      throw ConfigError("pace_ratio must be a finite value >= 0");
    if (gop < 1) throw ConfigError("gop must be >= 1");
    if (gop % K != 0)
      throw ConfigError("K=" + std::to_string(K) + " does not divide GOP size " +
                        std::to_string(gop));
  }
};

inline double bbox_iou(const BBox& a, const BBox& b) {
  if (a == b && a.valid()) return 1.0;  // exact, free of rounding in the overlap
  const double iw = std::min(a.right(), b.right()) - std::max(a.left(), b.left());
  const double ih = std::min(a.bottom(), b.bottom()) - std::max(a.top(), b.top());
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  const double inter = iw * ih;
  const double uni = a.area() + b.area() - inter;
  if (uni <= 0.0) return 0.0;
  return std::clamp(inter / uni, 0.0, 1.0);
}

/// Applies a box-relative velocity to the previous box.
inline BBox predict_bbox(const Velocity& v, const BBox& prev) {
  return {prev.w * v.vx + prev.x, prev.h * v.vy + prev.y, prev.w * std::exp(v.vw),
          prev.h * std::exp(v.vh)};
}

/// The velocity that maps `prev` onto `next` under predict_bbox.
inline Velocity inverse_velocity(const BBox& prev, const BBox& next) {
  if (!(prev.w > 0.0 && prev.h > 0.0 && next.w > 0.0 && next.h > 0.0))
    throw std::invalid_argument("inverse_velocity: non-positive box size");
  return {(next.x - prev.x) / prev.w, (next.y - prev.y) / prev.h, std::log(next.w / prev.w),
          std::log(next.h / prev.h)};
}

}  // namespace otcd
