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

#include <gtest/gtest.h>

#include <chrono>
#include <limits>
#include <set>
#include <sstream>

#include "otcd/engine.hpp"
#include "otcd/metrics.hpp"
#include "test_support.hpp"

namespace otcd {
namespace {

using testing::make_object;
using testing::make_script;
using testing::small_header;

TrackerConfig config(int K, PropagatorKind p = PropagatorKind::BBoxAvg) {
  TrackerConfig c;
  c.K = K;
  c.propagator = p;
  return c;
}

std::string result_text(const std::vector<TrackRow>& rows) {
  std::ostringstream out;
  write_motchallenge(rows, out);
  return out.str();
}

Scenario truncated(const Scenario& sc, int frames) {
  Scenario out = sc;
  out.frames.resize(frames);
  std::erase_if(out.gt, [&](const GroundTruthEntry& e) { return e.frame >= frames; });
  return out;
}

Scenario busy_scenario(std::uint64_t seed, int frames = 48) {
  std::vector<ObjectScript> objs;
  for (int i = 0; i < 6; ++i) {
    auto o = make_object(i + 1, {40.0 + 45 * i, 50.0 + 25 * (i % 5), 24, 40}, (i % 3) - 1.0,
                         0.5 * ((i % 2) ? 1 : -1), i == 2 ? 1.01 : 1.0);
    if (i == 4) o.occlusions = {{10, 14}};
    objs.push_back(o);
  }
  return generate_scenario(make_script(frames, objs), small_header(), seed);
}

TEST(KeyFrames, Schedule) {
  for (int t = 1; t <= 30; ++t) EXPECT_TRUE(is_key_frame(t, 1));
  std::vector<int> keys;
  for (int t = 1; t <= 13; ++t)
    if (is_key_frame(t, 3)) keys.push_back(t);
  EXPECT_EQ(keys, (std::vector<int>{1, 4, 7, 10, 13}));
  // Every I-frame is a key frame when K divides the GOP.
  for (int K : {1, 2, 3, 4, 6, 12})
    for (int index = 0; index < 100; index += 12) EXPECT_TRUE(is_key_frame(index + 1, K));
}

TEST(KeyFrames, KThatDoesNotDivideGopIsRejected) {
  const Scenario sc = generate_scenario(make_script(3, {}), small_header(), 1);
  EXPECT_THROW(Tracker(config(5), {}, sc.header), ConfigError);
  EXPECT_NO_THROW(Tracker(config(4), {}, sc.header));
}

TEST(SpeedupModel, Examples) {
  EXPECT_DOUBLE_EQ(speedup_model(0.9, 0.1, 0.02, 0.05, 1), 1.0);
  EXPECT_NEAR(speedup_model(0.9, 0.1, 0.0, 0.1, 3), 2.5, 1e-12);
  EXPECT_NEAR(speedup_model(0.9, 0.1, 0.0, 0.1, 6), 4.0, 1e-12);
  for (int K = 1; K <= 24; ++K)
    EXPECT_NEAR(speedup_model(0.7, 0.3, 0.0, 0.1, K), 10.0 * K / (K + 9.0), 1e-12);
  FrameTimings t;
  t.t_det = 2.7;
  t.t_ass = 0.3;
  t.key_frames = 3;
  t.t_pro = 0.6;
  t.nonkey_frames = 6;
  EXPECT_NEAR(speedup_model(t, 3), 2.5, 1e-12);
  EXPECT_THROW(speedup_model(FrameTimings{}, 3), std::invalid_argument);
}

TEST(Track, PerfectDetectorPerFrame) {
  const Scenario sc = generate_scenario(
      make_script(30, {make_object(1, {100, 100, 30, 50}, 1.5, 0.75, 1.0)}), small_header(), 3);
  OracleDetector det({});
  const auto res = track(sc, det, config(1), {});
  ASSERT_FALSE(res.rows.empty());
  const int first = res.rows.front().frame;
  EXPECT_LE(first, 4);  // born with one hit, confirmed after more than three
  EXPECT_EQ(static_cast<int>(res.rows.size()), 30 - first + 1);
  for (const auto& r : res.rows) {
    EXPECT_EQ(r.id, res.rows.front().id);
    EXPECT_EQ(r.box, sc.gt_at(r.frame - 1)[0].bbox) << r.frame;
  }
}

TEST(Track, UniformTranslationPropagatesExactly) {
  const Scenario sc = generate_scenario(
      make_script(36, {make_object(1, {60, 60, 32, 48}, 2, 1), make_object(2, {250, 150, 40, 40}, -1, -1)}),
      small_header(), 4);
  DetectorConfig dc;
  dc.conf_low = 0.995;  // born confirmed, so every frame is reported
  OracleDetector det(dc);
  const auto res = track(sc, det, config(3), {});
  EXPECT_EQ(res.rows.size(), 72u);
  for (const auto& r : res.rows) {
    BBox truth;
    for (const auto& e : sc.gt_at(r.frame - 1))
      if (bbox_iou(e.bbox, r.box) > 0.5) truth = e.bbox;
    EXPECT_EQ(r.box, truth) << r.frame;
  }
}

TEST(Track, OcclusionKeepsIdentityThroughAppearance) {
  // Key frames are t = 1, 4, 7, ...; container indices 8..13 hide the
  // object over key frames t = 10 and 13.
  auto o = make_object(1, {60, 120, 30, 60}, 3, 0);
  o.occlusions = {{8, 13}};
  const Scenario sc = generate_scenario(make_script(30, {o}), small_header(), 5);
  DetectorConfig dc;
  dc.conf_low = 0.995;
  OracleDetector det(dc);
  const auto res = track(sc, det, config(3), {});
  const auto m = clear_mot(gt_rows(sc), res.rows);
  std::set<int> ids;
  for (const auto& r : res.rows) ids.insert(r.id);
  EXPECT_EQ(ids.size(), 1u);
  EXPECT_EQ(m.ids, 0);
  // The returning object has left its stale box behind the IoU gate.
  const auto last_seen = sc.gt_at(7)[0].bbox;
  EXPECT_LT(bbox_iou(last_seen, sc.gt_at(15)[0].bbox), 1.0 - TrackerConfig{}.tau_iou);

  TrackerConfig iou_only = config(3);
  iou_only.appearance = false;
  OracleDetector det2(dc);
  const auto res2 = track(sc, det2, iou_only, {});
  std::set<int> ids2;
  for (const auto& r : res2.rows) ids2.insert(r.id);
  EXPECT_GT(ids2.size(), 1u);
}

TEST(Track, DeterministicOutput) {
  const Scenario sc = busy_scenario(6);
  DetectorConfig dc;
  dc.noise_center = 0.03;
  dc.miss_rate = 0.1;
  dc.fp_rate = 0.5;
  dc.rng_seed = 77;
  OracleDetector a(dc), b(dc);
  EXPECT_EQ(result_text(track(sc, a, config(3), {}).rows),
            result_text(track(sc, b, config(3), {}).rows));
}

TEST(Track, OnlineCausality) {
  const Scenario sc = busy_scenario(7);
  DetectorConfig dc;
  dc.noise_center = 0.03;
  dc.miss_rate = 0.1;
  dc.fp_rate = 0.5;
  dc.rng_seed = 78;
  OracleDetector full_det(dc);
  const auto full = track(sc, full_det, config(3), {}).rows;
  for (int t : {1, 5, 13, 29, 40}) {
    OracleDetector det(dc);
    const auto part = track(truncated(sc, t), det, config(3), {}).rows;
    std::vector<TrackRow> prefix;
    for (const auto& r : full)
      if (r.frame <= t) prefix.push_back(r);
    EXPECT_EQ(part, prefix) << t;
  }
}

TEST(Track, EmitsConfirmedObjectsOnly) {
  const Scenario sc = busy_scenario(8);
  DetectorConfig dc;
  dc.miss_rate = 0.3;
  dc.fp_rate = 1.0;
  dc.rng_seed = 5;
  OracleDetector det(dc);
  Tracker tracker(config(3), {}, sc.header);
  int tentative_seen = 0;
  for (int t = 1; t <= sc.frame_count(); ++t) {
    const auto rows = tracker.step(sc, t, det);
    std::set<int> emitted;
    for (const auto& r : rows) emitted.insert(r.id);
    for (const auto& o : tracker.objects()) {
      if (o.state != LifecycleState::Confirmed) {
        ++tentative_seen;
        EXPECT_EQ(emitted.count(o.id), 0u) << t;
      }
    }
    for (int id : emitted) {
      bool found = false;
      for (const auto& o : tracker.objects()) found |= o.id == id;
      EXPECT_TRUE(found);
    }
  }
  EXPECT_GT(tentative_seen, 0);
}

TEST(Track, StateChangesOnlyOnKeyFrames) {
  const Scenario sc = busy_scenario(9);
  DetectorConfig dc;
  dc.miss_rate = 0.3;
  dc.fp_rate = 0.5;
  dc.rng_seed = 6;
  OracleDetector det(dc);
  Tracker tracker(config(3), {}, sc.header);
  std::vector<TrackedObject> before;
  int key_changes = 0;
  for (int t = 1; t <= sc.frame_count(); ++t) {
    tracker.step(sc, t, det);
    const auto& now = tracker.objects();
    if (!is_key_frame(t, 3)) {
      ASSERT_EQ(now.size(), before.size()) << t;
      for (std::size_t i = 0; i < now.size(); ++i) {
        EXPECT_EQ(now[i].id, before[i].id);
        EXPECT_EQ(now[i].state, before[i].state);
        EXPECT_EQ(now[i].hits, before[i].hits);
        EXPECT_EQ(now[i].misses, before[i].misses);
        EXPECT_EQ(now[i].gallery, before[i].gallery);
      }
    } else {
      bool changed = now.size() != before.size();
      for (std::size_t i = 0; !changed && i < now.size(); ++i)
        changed = now[i].hits != before[i].hits || now[i].misses != before[i].misses;
      key_changes += changed;
    }
    before = now;
  }
  EXPECT_EQ(key_changes, 16);
}

TEST(Track, LowConfidenceDetectionsAreDiscarded) {
  const Scenario sc = generate_scenario(make_script(12, {make_object(1, {100, 100, 30, 30})}),
                                        small_header(), 1);
  std::vector<TrackRow> dets;
  for (int t = 1; t <= 12; ++t) dets.push_back({t, -1, {100, 100, 30, 30}, 0.94});
  FileDetector low(dets, 0.1, 1);
  Tracker tracker(config(1), {}, sc.header);
  for (int t = 1; t <= 12; ++t) EXPECT_TRUE(tracker.step(sc, t, low).empty());
  EXPECT_TRUE(tracker.objects().empty());

  for (auto& d : dets) d.conf = 0.995;
  FileDetector high(dets, 0.1, 1);
  const auto rows = track(sc, high, config(1), {}).rows;
  EXPECT_EQ(rows.size(), 12u);
}

TEST(Track, ConfigMismatchIsRejected) {
  StreamHeader h = small_header();
  TrackerConfig c = config(3, PropagatorKind::Regressor);
  EXPECT_THROW(Tracker(c, {}, h), ConfigError);  // no fitted regressor
  Models m;
  m.regressor = RegressorParams::zeros(5);
  EXPECT_THROW(Tracker(c, m, h), ConfigError);  // m mismatch
  h.feature_bins = 5;
  EXPECT_THROW(Tracker(config(3), {}, h), ConfigError);
  const Scenario sc = generate_scenario(make_script(5, {}), small_header(), 1);
  Tracker tracker(config(1), {}, sc.header);
  OracleDetector det({});
  EXPECT_THROW(tracker.step(sc, 2, det), std::logic_error);
  EXPECT_THROW(tracker.step(sc, 9, det), std::out_of_range);
}

TEST(Track, RegressorWithZeroParamsHoldsBoxes) {
  const Scenario sc = generate_scenario(
      make_script(12, {make_object(1, {100, 100, 30, 30}, 2, 0)}), small_header(), 2);
  Models m;
  m.regressor = RegressorParams::zeros(7);
  DetectorConfig dc;
  dc.conf_low = 0.995;
  OracleDetector det(dc);
  const auto rows = track(sc, det, config(3, PropagatorKind::Regressor), m).rows;
  ASSERT_EQ(rows.size(), 12u);
  EXPECT_EQ(rows[1].box, rows[0].box);
  EXPECT_EQ(rows[2].box, rows[0].box);
  EXPECT_EQ(rows[3].box, sc.gt_at(3)[0].bbox);
}

TEST(ClipToFrame, Examples) {
  EXPECT_EQ(clip_to_frame({10, 10, 4, 4}, 100, 100), (BBox{10, 10, 4, 4}));
  EXPECT_EQ(clip_to_frame({0, 0, 10, 10}, 100, 100), (BBox{2.5, 2.5, 5, 5}));
  const BBox gone = clip_to_frame({-50, 20, 10, 10}, 100, 100);
  EXPECT_EQ(gone.w, 0.0);
}

TEST(Models, RoundTrip) {
  Models m;
  m.affinity = {8.25, -4.125, AffinityMode::NoPS};
  std::stringstream a;
  write_models(m, a);
  const Models back = read_models(a);
  EXPECT_EQ(back.affinity, m.affinity);
  EXPECT_FALSE(back.regressor.has_value());

  m.regressor = RegressorParams::zeros(7);
  m.regressor->flat(3) = 0.125;
  std::stringstream b;
  write_models(m, b);
  const Models back2 = read_models(b);
  ASSERT_TRUE(back2.regressor.has_value());
  EXPECT_EQ(*back2.regressor, *m.regressor);
  std::istringstream bad("models 1\n");
  EXPECT_THROW(read_models(bad), FormatError);
}

TEST(TimingReport, ContainsStagesAndSpeedups) {
  FrameTimings t;
  t.t_det = 2.7;
  t.t_ass = 0.3;
  t.key_frames = 3;
  t.t_pro = 0.6;
  t.nonkey_frames = 6;
  t.wall = 3.6;
  std::ostringstream out;
  write_timing_report(t, 3, out, 2.4);
  const std::string s = out.str();
  EXPECT_EQ(s.rfind("key,value\n", 0), 0u);
  for (const char* key : {"t_det_mean,0.900000000", "t_pro_mean,0.100000000", "hz,2.500000000",
                          "modeled_speedup,2.500000000", "measured_speedup,2.400000000",
                          "propagation_ratio,0.100000000"})
    EXPECT_NE(s.find(key), std::string::npos) << key;
}

TEST(DelayedDetector, AddsAtLeastTheDelay) {
  const Scenario sc = generate_scenario(make_script(2, {make_object(1, {50, 50, 10, 10})}),
                                        small_header(), 1);
  OracleDetector inner({});
  DelayedDetector det(inner, 0.005);
  const auto t0 = std::chrono::steady_clock::now();
  const auto out = det.detect(sc, 0);
  const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  EXPECT_GE(dt, 0.005);
  EXPECT_EQ(out.size(), 1u);
}

TEST(Pacing, RunningRatioReachesTarget) {
  const Scenario sc = busy_scenario(12);
  OracleDetector inner({});
  DelayedDetector det(inner, 0.002);
  TrackerConfig cfg = config(3);
  cfg.pace_ratio = 0.5;
  const auto res = track(sc, det, cfg, {});
  // The last key frame precedes the last non-key frames, so the cumulative
  // target is met against the final detection mean.
  EXPECT_NEAR(res.timings.propagation_ratio(), 0.5, 0.01);
  EXPECT_NEAR(speedup_model(res.timings, 3), 3.0 / 2.0, 0.02);
}

TEST(Pacing, FixedPropagationDelayIsCounted) {
  const Scenario sc = busy_scenario(13, 12);
  OracleDetector det({});
  TrackerConfig cfg = config(3);
  cfg.propagation_delay = 0.002;
  const auto res = track(sc, det, cfg, {});
  EXPECT_GE(res.timings.pro_mean(), 0.002);
}

TEST(Pacing, NegativeOrNonFiniteSettingsAreRejected) {
  TrackerConfig cfg;
  cfg.pace_ratio = -0.1;
  EXPECT_THROW(cfg.validate(12), ConfigError);
  cfg.pace_ratio = 0.0;
  cfg.propagation_delay = std::numeric_limits<double>::infinity();
  EXPECT_THROW(cfg.validate(12), ConfigError);
}

}  // namespace
}  // namespace otcd
