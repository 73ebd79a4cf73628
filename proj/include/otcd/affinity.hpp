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

// Appearance affinity between two feature patches.
//
// Patches are L2-normalized per spatial position. The position-sensitive
// layer compares every bin of one patch with every bin of the other; the
// head pools each bin's best match into a scalar statistic and maps it to a
// probability with a two-parameter logistic.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <istream>
#include <limits>
#include <ostream>
#include <random>
#include <string>
#include <tuple>
#include <vector>

#include "otcd/model.hpp"

namespace otcd {

enum class AffinityMode { WithPS, NoPS };

struct AffinityHeadParams {
  double w = 10.0;
  double b = -5.0;
  AffinityMode mode = AffinityMode::WithPS;

  friend bool operator==(const AffinityHeadParams&, const AffinityHeadParams&) = default;
};

inline double logistic(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

/// Unit L2 norm per spatial position; zero vectors stay zero.
inline FeaturePatch normalize_channels(const FeaturePatch& f) {
  FeaturePatch out = f;
  for (int p = 0; p < out.positions(); ++p) {
    auto v = out.position(p);
    double n2 = 0.0;
    for (double x : v) n2 += x * x;
    if (n2 <= 0.0) continue;
    const double inv = 1.0 / std::sqrt(n2);
    for (double& x : v) x *= inv;
  }
  return out;
}

/// The two position-sensitive maps of shape m x m x m^2, stored as
/// [(u * m + v) * m^2 + p].
struct PsMaps {
  int m = 0;
  std::vector<double> ij;  // <f'_i(u,v), f'_j(p)>
  std::vector<double> ji;  // <f'_j(u,v), f'_i(p)>
};

namespace detail {

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
  return s;
}

inline void require_same_shape(const FeaturePatch& a, const FeaturePatch& b) {
  if (!a.same_shape(b)) throw std::invalid_argument("feature patches differ in shape");
}

}  // namespace detail

/// Expects normalized inputs.
inline PsMaps ps_maps(const FeaturePatch& fi, const FeaturePatch& fj) {
  detail::require_same_shape(fi, fj);
  const int positions = fi.positions();
  PsMaps maps{fi.bins(), std::vector<double>(static_cast<std::size_t>(positions) * positions),
              std::vector<double>(static_cast<std::size_t>(positions) * positions)};
  for (int a = 0; a < positions; ++a) {
    for (int p = 0; p < positions; ++p) {
      const double s = detail::dot(fi.position(a), fj.position(p));
      maps.ij[static_cast<std::size_t>(a) * positions + p] = s;
      maps.ji[static_cast<std::size_t>(p) * positions + a] = s;
    }
  }
  return maps;
}

/// Pooled similarity of two normalized patches. WithPS averages, over both
/// directions, each bin's best match among all positions of the other
/// patch; NoPS averages the aligned inner products.
inline double affinity_statistic_normalized(AffinityMode mode, const FeaturePatch& ni,
                                            const FeaturePatch& nj) {
  detail::require_same_shape(ni, nj);
  const int positions = ni.positions();
  if (mode == AffinityMode::NoPS) {
    double s = 0.0;
    for (int p = 0; p < positions; ++p) s += detail::dot(ni.position(p), nj.position(p));
    return s / positions;
  }
  std::vector<double> best_j(positions, -std::numeric_limits<double>::infinity());
  double sum_i = 0.0;
  for (int a = 0; a < positions; ++a) {
    double best_i = -std::numeric_limits<double>::infinity();
    const auto va = ni.position(a);
    for (int p = 0; p < positions; ++p) {
      const double s = detail::dot(va, nj.position(p));
      best_i = std::max(best_i, s);
      best_j[p] = std::max(best_j[p], s);
    }
    sum_i += best_i;
  }
  double sum_j = 0.0;
  for (double v : best_j) sum_j += v;
  return 0.5 * (sum_i + sum_j) / positions;
}

inline double affinity_statistic(AffinityMode mode, const FeaturePatch& fi,
                                 const FeaturePatch& fj) {
  return affinity_statistic_normalized(mode, normalize_channels(fi), normalize_channels(fj));
}

/// Probability that two patches show the same object.
inline double affinity(const AffinityHeadParams& params, const FeaturePatch& fi,
                       const FeaturePatch& fj) {
  return logistic(params.w * affinity_statistic(params.mode, fi, fj) + params.b);
}

inline double iou_cost(const BBox& a, const BBox& b) { return 1.0 - bbox_iou(a, b); }

/// 1 - best affinity between `f` and any gallery entry.
inline double appearance_cost(const AffinityHeadParams& params,
                              const std::deque<FeaturePatch>& gallery, const FeaturePatch& f) {
  if (gallery.empty()) throw std::invalid_argument("appearance_cost: empty gallery");
  const FeaturePatch nf = normalize_channels(f);
  double best = 0.0;
  for (const auto& g : gallery) {
    const double s = affinity_statistic_normalized(params.mode, normalize_channels(g), nf);
    best = std::max(best, logistic(params.w * s + params.b));
  }
  return 1.0 - best;
}

struct AffinityPair {
  FeaturePatch a;
  FeaturePatch b;
  int label = 0;  // 1: same object
};

struct AffinityHyper {
  double lr = 1.0;
  int epochs = 2000;
  std::uint64_t seed = 0;
  AffinityMode mode = AffinityMode::WithPS;
};

struct AffinityFit {
  AffinityHeadParams params;
  double loss = 0.0;  // mean cross-entropy
  double accuracy = 0.0;
};

namespace detail {

inline double cross_entropy(double p, int label) {
  constexpr double eps = 1e-12;
  return label ? -std::log(std::max(p, eps)) : -std::log(std::max(1.0 - p, eps));
}

}  // namespace detail

/// Head quality on precomputed statistics.
inline std::pair<double, double> evaluate_head(const AffinityHeadParams& params,
                                               const std::vector<double>& stats,
                                               const std::vector<int>& labels) {
  double loss = 0.0;
  int correct = 0;
  for (std::size_t i = 0; i < stats.size(); ++i) {
    const double p = logistic(params.w * stats[i] + params.b);
    loss += detail::cross_entropy(p, labels[i]);
    correct += (p > 0.5) == (labels[i] == 1);
  }
  const double n = static_cast<double>(stats.size());
  return {loss / n, correct / n};
}

/// Logistic regression of the label on the scalar statistic, by full-batch
/// gradient descent on the mean cross-entropy.
inline AffinityFit fit_affinity_head_on_stats(const std::vector<double>& stats,
                                              const std::vector<int>& labels,
                                              const AffinityHyper& hyper) {
  if (stats.size() != labels.size() || stats.empty())
    throw std::invalid_argument("fit_affinity_head: empty or mismatched input");
  const bool has_pos = std::find(labels.begin(), labels.end(), 1) != labels.end();
  const bool has_neg = std::find(labels.begin(), labels.end(), 0) != labels.end();
  if (!has_pos || !has_neg) throw std::invalid_argument("fit_affinity_head: single-class input");

  std::mt19937_64 rng(hyper.seed);
  std::normal_distribution<double> normal(0.0, 0.01);
  AffinityHeadParams p{normal(rng), normal(rng), hyper.mode};
  const double n = static_cast<double>(stats.size());
  for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
    double gw = 0.0, gb = 0.0;
    for (std::size_t i = 0; i < stats.size(); ++i) {
      const double err = logistic(p.w * stats[i] + p.b) - labels[i];
      gw += err * stats[i];
      gb += err;
    }
    p.w -= hyper.lr * gw / n;
    p.b -= hyper.lr * gb / n;
    if (!std::isfinite(p.w) || !std::isfinite(p.b))
      throw std::runtime_error("fit_affinity_head: diverged at epoch " + std::to_string(epoch + 1));
  }
  AffinityFit fit{p, 0.0, 0.0};
  std::tie(fit.loss, fit.accuracy) = evaluate_head(p, stats, labels);
  return fit;
}

inline AffinityFit fit_affinity_head(const std::vector<AffinityPair>& pairs,
                                     const AffinityHyper& hyper) {
  std::vector<double> stats;
  std::vector<int> labels;
  stats.reserve(pairs.size());
  for (const auto& pr : pairs) {
    stats.push_back(affinity_statistic(hyper.mode, pr.a, pr.b));
    labels.push_back(pr.label);
  }
  return fit_affinity_head_on_stats(stats, labels, hyper);
}

inline void write_affinity(const AffinityHeadParams& p, std::ostream& out) {
  const auto old = out.precision(17);
  out << "affinity " << (p.mode == AffinityMode::WithPS ? "ps" : "nops") << ' ' << p.w << ' '
      << p.b << '\n';
  out.precision(old);
}

inline AffinityHeadParams read_affinity(std::istream& in) {
  std::string tag, mode;
  AffinityHeadParams p;
  if (!(in >> tag >> mode >> p.w >> p.b) || tag != "affinity" || (mode != "ps" && mode != "nops"))
    throw FormatError("affinity: malformed record");
  if (!std::isfinite(p.w) || !std::isfinite(p.b)) throw FormatError("affinity: non-finite value");
  p.mode = mode == "ps" ? AffinityMode::WithPS : AffinityMode::NoPS;
  return p;
}

}  // namespace otcd
