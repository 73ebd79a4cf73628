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

// Rectangular min-cost assignment and the object/detection association
// procedures built on it.

#pragma once

#include <algorithm>
#include <limits>
#include <utility>
#include <vector>

#include "otcd/affinity.hpp"
#include "otcd/model.hpp"

namespace otcd {

/// Dense row-major cost matrix.
class CostMatrix {
 public:
  CostMatrix() = default;
  CostMatrix(int rows, int cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(static_cast<std::size_t>(rows) * cols, fill) {}
  CostMatrix(std::initializer_list<std::initializer_list<double>> rows) {
    rows_ = static_cast<int>(rows.size());
    cols_ = rows_ ? static_cast<int>(rows.begin()->size()) : 0;
    for (const auto& r : rows) {
      if (static_cast<int>(r.size()) != cols_) throw std::invalid_argument("ragged cost matrix");
      data_.insert(data_.end(), r.begin(), r.end());
    }
  }

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  bool empty() const { return rows_ == 0 || cols_ == 0; }
  double& operator()(int r, int c) { return data_[static_cast<std::size_t>(r) * cols_ + c]; }
  double operator()(int r, int c) const { return data_[static_cast<std::size_t>(r) * cols_ + c]; }

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<double> data_;
};

/// Cost that marks a forbidden pair.
inline constexpr double kForbiddenCost = 1e9;

namespace detail {

// Shortest augmenting path with row/column potentials; requires rows <= cols.
// Rows are inserted in index order and the first column reaching the minimum
// slack wins, which fixes the tie-breaking.
inline std::vector<int> solve_rows_le_cols(const CostMatrix& cost) {
  const int n = cost.rows(), m = cost.cols();
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
  std::vector<int> p(m + 1, 0), way(m + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(m + 1, inf);
    std::vector<char> used(m + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= m; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> row_to_col(n, -1);
  for (int j = 1; j <= m; ++j)
    if (p[j] != 0) row_to_col[p[j] - 1] = j - 1;
  return row_to_col;
}

}  // namespace detail

/// Minimum-cost matching of size min(rows, cols), as (row, col) pairs
/// sorted by row.
inline std::vector<std::pair<int, int>> hungarian(const CostMatrix& cost) {
  std::vector<std::pair<int, int>> out;
  if (cost.empty()) return out;
  if (cost.rows() <= cost.cols()) {
    const auto r2c = detail::solve_rows_le_cols(cost);
    for (int r = 0; r < cost.rows(); ++r) out.emplace_back(r, r2c[r]);
  } else {
    CostMatrix t(cost.cols(), cost.rows());
    for (int r = 0; r < cost.rows(); ++r)
      for (int c = 0; c < cost.cols(); ++c) t(c, r) = cost(r, c);
    const auto c2r = detail::solve_rows_le_cols(t);
    for (int c = 0; c < t.rows(); ++c) out.emplace_back(c2r[c], c);
    std::sort(out.begin(), out.end());
  }
  return out;
}

/// Partition of object and detection indices. Lists are sorted.
struct AssignmentResult {
  std::vector<std::pair<int, int>> matches;  // (object, detection)
  std::vector<int> unmatched_objects;
  std::vector<int> unmatched_detections;
};

/// Hungarian on `cost` with entries above `threshold` forbidden; matches
/// whose cost still exceeds the threshold are dropped.
inline AssignmentResult gated_assign(const CostMatrix& cost, double threshold) {
  AssignmentResult res;
  CostMatrix gated = cost;
  for (int r = 0; r < cost.rows(); ++r)
    for (int c = 0; c < cost.cols(); ++c)
      if (cost(r, c) > threshold) gated(r, c) = kForbiddenCost;
  std::vector<char> row_used(cost.rows(), 0), col_used(cost.cols(), 0);
  for (const auto& [r, c] : hungarian(gated)) {
    if (cost(r, c) > threshold) continue;
    res.matches.emplace_back(r, c);
    row_used[r] = col_used[c] = 1;
  }
  for (int r = 0; r < cost.rows(); ++r)
    if (!row_used[r]) res.unmatched_objects.push_back(r);
  for (int c = 0; c < cost.cols(); ++c)
    if (!col_used[c]) res.unmatched_detections.push_back(c);
  return res;
}

namespace detail {

// Gated assignment between index subsets, mapped back to full indices.
template <class CostFn>
void assign_subset(const std::vector<int>& objs, const std::vector<int>& dets, double threshold,
                   CostFn&& cost_fn, std::vector<std::pair<int, int>>& matches,
                   std::vector<char>& obj_used, std::vector<char>& det_used) {
  if (objs.empty() || dets.empty()) return;
  CostMatrix cost(static_cast<int>(objs.size()), static_cast<int>(dets.size()));
  for (std::size_t a = 0; a < objs.size(); ++a)
    for (std::size_t b = 0; b < dets.size(); ++b)
      cost(static_cast<int>(a), static_cast<int>(b)) = cost_fn(objs[a], dets[b]);
  for (const auto& [a, b] : gated_assign(cost, threshold).matches) {
    matches.emplace_back(objs[a], dets[b]);
    obj_used[objs[a]] = det_used[dets[b]] = 1;
  }
}

inline AssignmentResult finish(std::vector<std::pair<int, int>> matches,
                               const std::vector<char>& obj_used,
                               const std::vector<char>& det_used) {
  AssignmentResult res;
  std::sort(matches.begin(), matches.end());
  res.matches = std::move(matches);
  for (std::size_t i = 0; i < obj_used.size(); ++i)
    if (!obj_used[i]) res.unmatched_objects.push_back(static_cast<int>(i));
  for (std::size_t j = 0; j < det_used.size(); ++j)
    if (!det_used[j]) res.unmatched_detections.push_back(static_cast<int>(j));
  return res;
}

}  // namespace detail

/// Step 1 matches confirmed objects by IoU cost (gate tau_iou). Step 2
/// matches the remaining detections to tentative objects and step-1
/// leftovers by appearance cost (gate tau_app); it is skipped when
/// cfg.appearance is false.
inline AssignmentResult associate_two_step(const std::vector<TrackedObject>& objects,
                                           const std::vector<Detection>& detections,
                                           const AffinityHeadParams& head,
                                           const TrackerConfig& cfg) {
  std::vector<std::pair<int, int>> matches;
  std::vector<char> obj_used(objects.size(), 0), det_used(detections.size(), 0);

  std::vector<int> confirmed, all_dets;
  for (std::size_t i = 0; i < objects.size(); ++i)
    if (objects[i].state == LifecycleState::Confirmed) confirmed.push_back(static_cast<int>(i));
  for (std::size_t j = 0; j < detections.size(); ++j) all_dets.push_back(static_cast<int>(j));
  detail::assign_subset(
      confirmed, all_dets, cfg.tau_iou,
      [&](int i, int j) { return iou_cost(objects[i].bbox, detections[j].bbox); }, matches,
      obj_used, det_used);

  if (cfg.appearance) {
    std::vector<int> rest_objs, rest_dets;
    for (std::size_t i = 0; i < objects.size(); ++i)
      if (!obj_used[i] && objects[i].state != LifecycleState::Deleted &&
          !objects[i].gallery.empty())
        rest_objs.push_back(static_cast<int>(i));
    for (std::size_t j = 0; j < detections.size(); ++j)
      if (!det_used[j]) rest_dets.push_back(static_cast<int>(j));
    detail::assign_subset(
        rest_objs, rest_dets, cfg.tau_app,
        [&](int i, int j) { return appearance_cost(head, objects[i].gallery, detections[j].feature); },
        matches, obj_used, det_used);
  }
  return detail::finish(std::move(matches), obj_used, det_used);
}

/// Single gated assignment on alpha * c_iou + (1 - alpha) * c_app against
/// alpha * tau_iou + (1 - alpha) * tau_app.
inline AssignmentResult associate_one_step(const std::vector<TrackedObject>& objects,
                                           const std::vector<Detection>& detections,
                                           const AffinityHeadParams& head, double alpha,
                                           const TrackerConfig& cfg) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("alpha must lie in [0,1]");
  std::vector<std::pair<int, int>> matches;
  std::vector<char> obj_used(objects.size(), 0), det_used(detections.size(), 0);
  std::vector<int> objs, dets;
  for (std::size_t i = 0; i < objects.size(); ++i)
    if (objects[i].state != LifecycleState::Deleted) objs.push_back(static_cast<int>(i));
  for (std::size_t j = 0; j < detections.size(); ++j) dets.push_back(static_cast<int>(j));
  const double gate = alpha * cfg.tau_iou + (1.0 - alpha) * cfg.tau_app;
  detail::assign_subset(
      objs, dets, gate,
      [&](int i, int j) {
        double c = 0.0;
        if (alpha > 0.0) c += alpha * iou_cost(objects[i].bbox, detections[j].bbox);
        if (alpha < 1.0)
          c += (1.0 - alpha) * appearance_cost(head, objects[i].gallery, detections[j].feature);
        return c;
      },
      matches, obj_used, det_used);
  return detail::finish(std::move(matches), obj_used, det_used);
}

inline AssignmentResult associate(const std::vector<TrackedObject>& objects,
                                  const std::vector<Detection>& detections,
                                  const AffinityHeadParams& head, const TrackerConfig& cfg) {
  if (cfg.association == AssociationMode::OneStep)
    return associate_one_step(objects, detections, head, cfg.alpha, cfg);
  return associate_two_step(objects, detections, head, cfg);
}

}  // namespace otcd
