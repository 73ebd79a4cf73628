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

// Shared fixtures for the test suites: brute-force oracles that stay
// independent of the library's solvers, and scenario builders.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <vector>

#include "otcd/otcd.hpp"

namespace otcd::testing {

/// Minimum total cost over all matchings of size min(rows, cols), by
/// enumerating permutations of the larger side.
inline double brute_force_assignment(const CostMatrix& cost) {
  const bool transpose = cost.rows() > cost.cols();
  const int small = transpose ? cost.cols() : cost.rows();
  const int large = transpose ? cost.rows() : cost.cols();
  auto at = [&](int s, int l) { return transpose ? cost(l, s) : cost(s, l); };
  std::vector<int> perm(large);
  std::iota(perm.begin(), perm.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  do {
    double total = 0.0;
    for (int s = 0; s < small; ++s) total += at(s, perm[s]);
    best = std::min(best, total);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return small == 0 ? 0.0 : best;
}

/// IDTP under the best partial injection of ground-truth tracks into
/// hypothesis tracks, by exhaustive search.
inline long brute_force_idtp(const std::vector<TrackRow>& gt, const std::vector<TrackRow>& hyp,
                             double iou_min = 0.5) {
  std::vector<int> gids, hids;
  for (const auto& r : gt)
    if (std::find(gids.begin(), gids.end(), r.id) == gids.end()) gids.push_back(r.id);
  for (const auto& r : hyp)
    if (std::find(hids.begin(), hids.end(), r.id) == hids.end()) hids.push_back(r.id);
  auto overlap = [&](int g, int h) {
    long n = 0;
    for (const auto& a : gt)
      for (const auto& b : hyp)
        if (a.id == g && b.id == h && a.frame == b.frame && bbox_iou(a.box, b.box) >= iou_min) ++n;
    return n;
  };
  long best = 0;
  std::vector<int> assign(gids.size(), -1);  // index into hids, -1 = unpaired
  std::function<void(std::size_t, long, std::set<int>&)> rec = [&](std::size_t k, long acc,
                                                                    std::set<int>& used) {
    if (k == gids.size()) {
      best = std::max(best, acc);
      return;
    }
    rec(k + 1, acc, used);
    for (std::size_t j = 0; j < hids.size(); ++j) {
      if (used.count(static_cast<int>(j))) continue;
      used.insert(static_cast<int>(j));
      rec(k + 1, acc + overlap(gids[k], hids[j]), used);
      used.erase(static_cast<int>(j));
    }
  };
  std::set<int> used;
  rec(0, 0, used);
  return best;
}

inline StreamHeader small_header(int width = 320, int height = 240) {
  StreamHeader h;
  h.width = width;
  h.height = height;
  h.block = 16;
  h.gop = 12;
  h.fps = 30.0;
  h.feature_channels = 16;
  h.feature_bins = 7;
  return h;
}

inline ObjectScript make_object(int id, BBox start, double vx = 0.0, double vy = 0.0,
                                double zoom = 1.0, int enter = 0, int exit = -1) {
  ObjectScript o;
  o.id = id;
  o.start = start;
  o.vx = vx;
  o.vy = vy;
  o.zoom = zoom;
  o.enter = enter;
  o.exit = exit;
  return o;
}

inline MotionScript make_script(int frames, std::vector<ObjectScript> objects) {
  MotionScript s;
  s.frames = frames;
  for (auto& o : objects)
    if (o.exit < 0) o.exit = frames - 1;
  s.objects = std::move(objects);
  return s;
}

/// Training scenarios for the velocity regressor: even-numbered scenarios
/// hold objects translating with assorted speeds, odd-numbered ones hold
/// objects zooming about their centers, over a range of sizes.
inline std::vector<Scenario> regressor_training_set(std::uint64_t seed, int scenarios = 24) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<Scenario> out;
  const StreamHeader header = small_header(960, 540);
  constexpr int kFrames = 12;
  for (int s = 0; s < scenarios; ++s) {
    std::vector<ObjectScript> objs;
    const bool zoom = s % 2 == 1;
    for (int k = 0; k < 2; ++k) {
      ObjectScript o;
      if (zoom) {
        const double rate = 0.93 + 0.14 * unit(rng);
        const double grow = std::max(1.0, std::pow(rate, kFrames - 1));
        const double w = std::min(32.0 + 128.0 * unit(rng), 230.0 / grow);
        const double h = std::min(w * (1.4 + 0.8 * unit(rng)), 500.0 / grow);
        o = make_object(k + 1, {k == 0 ? 240.0 : 720.0, 270.0, w, h}, 0.0, 0.0, rate);
      } else {
        const double w = 24.0 + 136.0 * unit(rng);
        const double h = std::min(w * (1.4 + 0.8 * unit(rng)), 300.0);
        o = make_object(k + 1, {k == 0 ? 240.0 : 720.0, 270.0, w, h}, -6.0 + 12.0 * unit(rng),
                        -3.0 + 6.0 * unit(rng));
      }
      objs.push_back(o);
    }
    out.push_back(generate_scenario(make_script(kFrames, objs), header, seed + s));
  }
  return out;
}

inline std::vector<RegressorSample> samples_of(const std::vector<Scenario>& set) {
  std::vector<RegressorSample> out;
  for (const auto& sc : set) {
    auto part = collect_regressor_samples(sc);
    out.insert(out.end(), part.begin(), part.end());
  }
  return out;
}

/// Same-identity and different-identity feature pairs for the affinity head.
inline std::vector<AffinityPair> affinity_pairs(int n, double noise, std::uint64_t seed,
                                                int bins = 7, int channels = 16) {
  std::mt19937_64 rng(seed);
  std::vector<AffinityPair> out;
  for (int i = 0; i < n; ++i) {
    const std::uint64_t a = rng();
    const std::uint64_t b = (i % 2 == 0) ? a : rng();
    out.push_back({feature_of(a, bins, channels, noise, rng),
                   feature_of(b, bins, channels, noise, rng), i % 2 == 0 ? 1 : 0});
  }
  return out;
}

}  // namespace otcd::testing
