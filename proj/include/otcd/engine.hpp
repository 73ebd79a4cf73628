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

// The online tracking loop. Key frames (every K-th frame, 1-based) run
// detection, association and object management; the frames in between
// propagate every active object from the block motion data. Only confirmed
// objects are reported.

#pragma once

#include <chrono>
#include <cstdio>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "otcd/affinity.hpp"
#include "otcd/association.hpp"
#include "otcd/lifecycle.hpp"
#include "otcd/model.hpp"
#include "otcd/motion.hpp"
#include "otcd/stream.hpp"
#include "otcd/stream_io.hpp"

namespace otcd {

/// Fitted parameters used by the tracker.
struct Models {
  AffinityHeadParams affinity;
  std::optional<RegressorParams> regressor;
};

inline void write_models(const Models& models, std::ostream& out) {
  out << "otcd-models 1\n";
  write_affinity(models.affinity, out);
  if (models.regressor) write_regressor(*models.regressor, out);
}

inline void write_models(const Models& models, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  write_models(models, out);
}

inline Models read_models(std::istream& in) {
  std::string tag;
  int version = 0;
  if (!(in >> tag >> version) || tag != "otcd-models" || version != 1)
    throw FormatError("models: malformed header");
  Models models;
  models.affinity = read_affinity(in);
  in >> std::ws;
  if (in.peek() != std::char_traits<char>::eof()) models.regressor = read_regressor(in);
  return models;
}

inline Models read_models(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  return read_models(in);
}

/// 1-based key-frame schedule.
inline bool is_key_frame(int t, int K) { return (t - 1) % K == 0; }

/// Per-stage wall time in seconds, summed over frames.
struct FrameTimings {
  double t_det = 0.0;
  double t_ass = 0.0;
  double t_man = 0.0;
  double t_pro = 0.0;
  int key_frames = 0;
  int nonkey_frames = 0;
  double wall = 0.0;

  double key_mean() const {
    return key_frames ? (t_det + t_ass + t_man) / key_frames : 0.0;
  }
  double det_ass_mean() const { return key_frames ? (t_det + t_ass) / key_frames : 0.0; }
  double pro_mean() const { return nonkey_frames ? t_pro / nonkey_frames : 0.0; }
  /// Mean propagation time relative to mean detection plus association time.
  double propagation_ratio() const {
    const double a = det_ass_mean();
    return a > 0.0 ? pro_mean() / a : 0.0;
  }
  double hz() const {
    const int n = key_frames + nonkey_frames;
    return wall > 0.0 ? n / wall : 0.0;
  }
};

/// Speedup over per-frame tracking for per-frame stage times.
inline double speedup_model(double t_det, double t_ass, double t_man, double t_pro, int K) {
  const double key = t_det + t_ass + t_man;
  return K * key / (key + (K - 1) * t_pro);
}

inline double speedup_model(const FrameTimings& timings, int K) {
  if (timings.key_frames == 0) throw std::invalid_argument("speedup_model: no key frames timed");
  return speedup_model(timings.t_det / timings.key_frames, timings.t_ass / timings.key_frames,
                       timings.t_man / timings.key_frames, timings.pro_mean(), K);
}

class Detector {
 public:
  virtual ~Detector() = default;
  /// Detections for container index `index`.
  virtual std::vector<Detection> detect(const Scenario& sc, int index) = 0;
};

class OracleDetector : public Detector {
 public:
  explicit OracleDetector(DetectorConfig cfg) : cfg_(cfg) { cfg_.validate(); }
  std::vector<Detection> detect(const Scenario& sc, int index) override {
    return oracle_detect(sc, index, cfg_);
  }

 private:
  DetectorConfig cfg_;
};

/// Boxes from a MOTChallenge detection file; appearance features are
/// attached from the scenario's identities.
class FileDetector : public Detector {
 public:
  FileDetector(const std::vector<TrackRow>& rows, double feature_noise, std::uint64_t seed)
      : noise_(feature_noise), seed_(seed) {
    for (const auto& r : rows) boxes_[r.frame].emplace_back(r.box, r.conf);
  }
  std::vector<Detection> detect(const Scenario& sc, int index) override {
    auto it = boxes_.find(index + 1);
    if (it == boxes_.end()) return {};
    return attach_features(sc, index, it->second, noise_, seed_);
  }

 private:
  std::map<int, std::vector<std::pair<BBox, double>>> boxes_;
  double noise_;
  std::uint64_t seed_;
};

namespace detail {

// Spins rather than sleeps: sleeping overshoots by scheduler granularity.
inline void busy_wait_until(std::chrono::steady_clock::time_point start, double seconds) {
  if (seconds <= 0.0) return;
  const auto deadline = start + std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                                    std::chrono::duration<double>(seconds));
  while (std::chrono::steady_clock::now() < deadline) {
  }
}

}  // namespace detail

/// Adds a fixed busy-wait to every call of the wrapped detector.
class DelayedDetector : public Detector {
 public:
  DelayedDetector(Detector& inner, double delay_seconds) : inner_(inner), delay_(delay_seconds) {}
  std::vector<Detection> detect(const Scenario& sc, int index) override {
    const auto start = std::chrono::steady_clock::now();
    auto out = inner_.detect(sc, index);
    detail::busy_wait_until(start, delay_);
    return out;
  }

 private:
  Detector& inner_;
  double delay_;
};

inline BBox clip_to_frame(const BBox& b, int width, int height) {
  const double l = std::clamp(b.left(), 0.0, static_cast<double>(width));
  const double r = std::clamp(b.right(), 0.0, static_cast<double>(width));
  const double t = std::clamp(b.top(), 0.0, static_cast<double>(height));
  const double btm = std::clamp(b.bottom(), 0.0, static_cast<double>(height));
  return BBox::from_corner(l, t, r - l, btm - t);
}

/// Stateful single-stream tracker.
class Tracker {
 public:
  Tracker(TrackerConfig cfg, Models models, StreamHeader header)
      : cfg_(cfg), models_(std::move(models)), header_(header) {
    cfg_.validate(header_.gop);
    if (cfg_.m != header_.feature_bins)
      throw ConfigError("tracker m=" + std::to_string(cfg_.m) +
                        " does not match the stream's feature bins " +
                        std::to_string(header_.feature_bins));
    if (cfg_.propagator == PropagatorKind::Regressor) {
      if (!models_.regressor) throw ConfigError("regressor propagator needs fitted regressor params");
      models_.regressor->check();
      if (models_.regressor->m != cfg_.m) throw ConfigError("regressor m does not match tracker m");
    }
  }

  /// Processes 1-based frame `t` and returns the confirmed objects' rows.
  std::vector<TrackRow> step(const Scenario& sc, int t, Detector& detector) {
    using clock = std::chrono::steady_clock;
    const int index = t - 1;
    if (index < 0 || index >= sc.frame_count())
      throw std::out_of_range("frame " + std::to_string(t) + " outside the scenario");
    if (t != last_frame_ + 1)
      throw std::logic_error("frames must be processed in order (expected " +
                             std::to_string(last_frame_ + 1) + ")");
    last_frame_ = t;

    if (is_key_frame(t, cfg_.K)) {
      auto t0 = clock::now();
      std::vector<Detection> dets = detector.detect(sc, index);
      std::erase_if(dets, [&](const Detection& d) { return d.confidence < cfg_.conf_min; });
      auto t1 = clock::now();
      const AssignmentResult res = associate(objects_, dets, models_.affinity, cfg_);
      auto t2 = clock::now();
      apply_matches(objects_, dets, res, cfg_.l_f);
      std::vector<Detection> unmatched;
      for (int j : res.unmatched_detections) unmatched.push_back(std::move(dets[j]));
      auto born = manage_states(objects_, unmatched, cfg_, ids_);
      for (auto& o : born) objects_.push_back(std::move(o));
      auto t3 = clock::now();
      timings_.t_det += seconds(t1 - t0);
      timings_.t_ass += seconds(t2 - t1);
      timings_.t_man += seconds(t3 - t2);
      ++timings_.key_frames;
    } else {
      auto t0 = clock::now();
      propagate(sc.frames[index]);
      detail::busy_wait_until(t0, cfg_.propagation_delay);
      if (cfg_.pace_ratio > 0.0 && timings_.key_frames > 0) {
        // Cumulative target, so early overshoot is absorbed by later frames.
        const double owed = cfg_.pace_ratio * timings_.det_ass_mean() *
                                (timings_.nonkey_frames + 1) - timings_.t_pro;
        detail::busy_wait_until(t0, owed);
      }
      timings_.t_pro += seconds(clock::now() - t0);
      ++timings_.nonkey_frames;
    }

    std::vector<TrackRow> rows;
    for (const auto& o : objects_) {
      if (o.state != LifecycleState::Confirmed) continue;
      const BBox clipped = clip_to_frame(o.bbox, header_.width, header_.height);
      if (!(clipped.w > 0.0 && clipped.h > 0.0)) continue;
      rows.push_back({t, o.id, clipped, 1.0});
    }
    return rows;
  }

  const std::vector<TrackedObject>& objects() const { return objects_; }
  const FrameTimings& timings() const { return timings_; }
  FrameTimings& timings() { return timings_; }
  const TrackerConfig& config() const { return cfg_; }

 private:
  static double seconds(std::chrono::steady_clock::duration d) {
    return std::chrono::duration<double>(d).count();
  }

  void propagate(const MotionFrame& frame) {
    switch (cfg_.propagator) {
      case PropagatorKind::BBoxAvg:
        for (auto& o : objects_) o.bbox = propagate_bbox_avg(o.bbox, frame);
        break;
      case PropagatorKind::PixelShift:
        for (auto& o : objects_) o.bbox = propagate_pixel_shift(o.bbox, frame);
        break;
      case PropagatorKind::Regressor: {
        if (frame.kind == FrameKind::I || objects_.empty()) break;
        // Pooling per box touches only the covered cells, not the whole grid.
        const MotionEncoding enc = encode_motion(frame);
        const auto& params = *models_.regressor;
        for (auto& o : objects_)
          o.bbox = predict_bbox(
              readout_pooled(params, pool_encoding(enc, o.bbox, frame.block, params.m)), o.bbox);
        break;
      }
    }
  }

  TrackerConfig cfg_;
  Models models_;
  StreamHeader header_;
  std::vector<TrackedObject> objects_;
  IdAllocator ids_;
  FrameTimings timings_;
  int last_frame_ = 0;
};

struct TrackResult {
  std::vector<TrackRow> rows;
  FrameTimings timings;
};

/// Runs the tracker over the scenario, or over its first `max_frames`
/// frames when that is non-negative.
inline TrackResult track(const Scenario& sc, Detector& detector, const TrackerConfig& cfg,
                         const Models& models, int max_frames = -1) {
  Tracker tracker(cfg, models, sc.header);
  TrackResult result;
  const int n = max_frames < 0 ? sc.frame_count() : std::min(max_frames, sc.frame_count());
  const auto start = std::chrono::steady_clock::now();
  for (int t = 1; t <= n; ++t) {
    auto rows = tracker.step(sc, t, detector);
    result.rows.insert(result.rows.end(), rows.begin(), rows.end());
  }
  result.timings = tracker.timings();
  result.timings.wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

/// Timing report as key,value lines.
inline void write_timing_report(const FrameTimings& t, int K, std::ostream& out,
                                std::optional<double> measured_speedup = std::nullopt) {
  char buf[128];
  auto line = [&](const char* key, double v) {
    std::snprintf(buf, sizeof(buf), "%s,%.9f\n", key, v);
    out << buf;
  };
  out << "key,value\n";
  out << "K," << K << '\n';
  out << "key_frames," << t.key_frames << '\n';
  out << "nonkey_frames," << t.nonkey_frames << '\n';
  line("t_det_total", t.t_det);
  line("t_ass_total", t.t_ass);
  line("t_man_total", t.t_man);
  line("t_pro_total", t.t_pro);
  line("t_det_mean", t.key_frames ? t.t_det / t.key_frames : 0.0);
  line("t_ass_mean", t.key_frames ? t.t_ass / t.key_frames : 0.0);
  line("t_man_mean", t.key_frames ? t.t_man / t.key_frames : 0.0);
  line("t_pro_mean", t.pro_mean());
  line("key_frame_mean", t.key_mean());
  line("propagation_ratio", t.propagation_ratio());
  line("wall", t.wall);
  line("hz", t.hz());
  if (t.key_frames > 0) line("modeled_speedup", speedup_model(t, K));
  if (measured_speedup) line("measured_speedup", *measured_speedup);
}

}  // namespace otcd
