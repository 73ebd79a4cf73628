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

// CLEAR-MOT and identity metrics against ground truth, on MOTChallenge rows.

#pragma once

#include <cstdio>
#include <map>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include "otcd/association.hpp"
#include "otcd/model.hpp"
#include "otcd/stream_io.hpp"

namespace otcd {

struct ClearMot {
  double mota = 0.0;
  double motp = 0.0;
  double moda = 0.0;
  double recall = 0.0;
  double precision = 0.0;
  long tp = 0;
  long fp = 0;
  long fn = 0;
  long ids = 0;
  long frag = 0;
  int mt = 0;
  int ml = 0;
  int gt_tracks = 0;
  long gt_total = 0;
};

struct IdMetrics {
  long idtp = 0;
  long idfp = 0;
  long idfn = 0;
  double idf1 = 0.0;
};

namespace detail {

using FrameRows = std::map<int, std::vector<const TrackRow*>>;

inline FrameRows group_by_frame(const std::vector<TrackRow>& rows, const char* what) {
  FrameRows out;
  for (const auto& r : rows) out[r.frame].push_back(&r);
  for (const auto& [frame, list] : out) {
    std::set<int> seen;
    for (const TrackRow* r : list)
      if (!seen.insert(r->id).second)
        throw FormatError(std::string(what) + ": duplicate id " + std::to_string(r->id) +
                          " in frame " + std::to_string(frame));
  }
  return out;
}

}  // namespace detail

/// Per-frame matching keeps the previous frame's pairs that still overlap
/// by at least iou_min, then solves the rest with Hungarian on 1 - IoU.
/// Frag counts resumptions: a match of a track that was matched before but
/// unmatched in its previous ground-truth frame.
inline ClearMot clear_mot(const std::vector<TrackRow>& gt, const std::vector<TrackRow>& results,
                          double iou_min = 0.5) {
  const auto gt_frames = detail::group_by_frame(gt, "ground truth");
  const auto hyp_frames = detail::group_by_frame(results, "results");
  if (gt.empty()) throw std::invalid_argument("clear_mot: empty ground truth");

  std::set<int> frames;
  for (const auto& kv : gt_frames) frames.insert(kv.first);
  for (const auto& kv : hyp_frames) frames.insert(kv.first);

  struct GtTrack {
    int present = 0;
    int matched = 0;
    bool ever_matched = false;
    bool last_matched = false;
    int last_hyp = 0;
  };
  std::map<int, GtTrack> tracks;
  std::map<int, int> prev_pairs;  // gt id -> hyp id, previous frame
  ClearMot m;
  double iou_sum = 0.0;
  const std::vector<const TrackRow*> none;

  for (int frame : frames) {
    auto git = gt_frames.find(frame);
    auto hit = hyp_frames.find(frame);
    const auto& G = git == gt_frames.end() ? none : git->second;
    const auto& H = hit == hyp_frames.end() ? none : hit->second;
    std::vector<int> g_to_h(G.size(), -1);
    std::vector<char> h_used(H.size(), 0);

    for (std::size_t a = 0; a < G.size(); ++a) {
      auto p = prev_pairs.find(G[a]->id);
      if (p == prev_pairs.end()) continue;
      for (std::size_t b = 0; b < H.size(); ++b) {
        if (H[b]->id != p->second || h_used[b]) continue;
        if (bbox_iou(G[a]->box, H[b]->box) >= iou_min) {
          g_to_h[a] = static_cast<int>(b);
          h_used[b] = 1;
        }
      }
    }
    std::vector<int> free_g, free_h;
    for (std::size_t a = 0; a < G.size(); ++a)
      if (g_to_h[a] < 0) free_g.push_back(static_cast<int>(a));
    for (std::size_t b = 0; b < H.size(); ++b)
      if (!h_used[b]) free_h.push_back(static_cast<int>(b));
    if (!free_g.empty() && !free_h.empty()) {
      CostMatrix cost(static_cast<int>(free_g.size()), static_cast<int>(free_h.size()));
      for (std::size_t a = 0; a < free_g.size(); ++a)
        for (std::size_t b = 0; b < free_h.size(); ++b)
          cost(static_cast<int>(a), static_cast<int>(b)) =
              1.0 - bbox_iou(G[free_g[a]]->box, H[free_h[b]]->box);
      for (const auto& [a, b] : gated_assign(cost, 1.0 - iou_min).matches) {
        g_to_h[free_g[a]] = free_h[b];
        h_used[free_h[b]] = 1;
      }
    }

    std::map<int, int> pairs;
    for (std::size_t a = 0; a < G.size(); ++a) {
      GtTrack& tr = tracks[G[a]->id];
      ++tr.present;
      ++m.gt_total;
      if (g_to_h[a] < 0) {
        ++m.fn;
        tr.last_matched = false;
        continue;
      }
      const TrackRow& h = *H[g_to_h[a]];
      ++m.tp;
      ++tr.matched;
      iou_sum += bbox_iou(G[a]->box, h.box);
      if (tr.ever_matched && tr.last_hyp != h.id) ++m.ids;
      if (tr.ever_matched && !tr.last_matched) ++m.frag;
      tr.ever_matched = true;
      tr.last_matched = true;
      tr.last_hyp = h.id;
      pairs[G[a]->id] = h.id;
    }
    for (std::size_t b = 0; b < H.size(); ++b)
      if (!h_used[b]) ++m.fp;
    prev_pairs = std::move(pairs);
  }

  const double n = static_cast<double>(m.gt_total);
  m.mota = 1.0 - static_cast<double>(m.fp + m.fn + m.ids) / n;
  m.moda = 1.0 - static_cast<double>(m.fp + m.fn) / n;
  m.motp = m.tp ? iou_sum / m.tp : 0.0;
  m.recall = m.tp / n;
  m.precision = (m.tp + m.fp) ? static_cast<double>(m.tp) / (m.tp + m.fp) : 0.0;
  m.gt_tracks = static_cast<int>(tracks.size());
  for (const auto& [id, tr] : tracks) {
    const double ratio = static_cast<double>(tr.matched) / tr.present;
    if (ratio >= 0.8) ++m.mt;
    if (ratio <= 0.2) ++m.ml;
  }
  return m;
}

/// Identity F1 under the trajectory pairing that maximizes the number of
/// frames where paired boxes overlap by at least iou_min.
inline IdMetrics idf1(const std::vector<TrackRow>& gt, const std::vector<TrackRow>& results,
                      double iou_min = 0.5) {
  const auto gt_frames = detail::group_by_frame(gt, "ground truth");
  const auto hyp_frames = detail::group_by_frame(results, "results");
  std::map<int, int> gt_index, hyp_index;
  for (const auto& r : gt) gt_index.emplace(r.id, static_cast<int>(gt_index.size()));
  for (const auto& r : results) hyp_index.emplace(r.id, static_cast<int>(hyp_index.size()));

  IdMetrics out;
  if (!gt_index.empty() && !hyp_index.empty()) {
    CostMatrix overlap(static_cast<int>(gt_index.size()), static_cast<int>(hyp_index.size()));
    for (const auto& [frame, G] : gt_frames) {
      auto hit = hyp_frames.find(frame);
      if (hit == hyp_frames.end()) continue;
      for (const TrackRow* g : G)
        for (const TrackRow* h : hit->second)
          if (bbox_iou(g->box, h->box) >= iou_min)
            overlap(gt_index[g->id], hyp_index[h->id]) -= 1.0;
    }
    for (const auto& [a, b] : hungarian(overlap)) out.idtp += static_cast<long>(-overlap(a, b));
  }
  out.idfn = static_cast<long>(gt.size()) - out.idtp;
  out.idfp = static_cast<long>(results.size()) - out.idtp;
  const double denom = 2.0 * out.idtp + out.idfp + out.idfn;
  out.idf1 = denom > 0.0 ? 2.0 * out.idtp / denom : 0.0;
  return out;
}

inline const char* metric_table_header() {
  return "MOTA,MOTP,IDF1,MT,ML,FP,FN,IDS,Frag,Rcll,Prcn,MODA";
}

inline std::string metric_table_row(const ClearMot& m, const IdMetrics& id) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%.3f,%.3f,%.3f,%d,%d,%ld,%ld,%ld,%ld,%.3f,%.3f,%.3f", m.mota,
                m.motp, id.idf1, m.mt, m.ml, m.fp, m.fn, m.ids, m.frag, m.recall, m.precision,
                m.moda);
  return buf;
}

}  // namespace otcd
