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

// Propagation of boxes through non-key frames from block motion data.
//
// Two closed-form baselines (averaged block vectors, shifted pixel extent)
// and a learnable velocity regressor: per-cell motion statistics are mapped
// affinely to a 4*m*m channel velocity field, which is read out for a box
// with position-sensitive pooling and applied with predict_bbox.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <limits>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "otcd/model.hpp"
#include "otcd/stream.hpp"

namespace otcd {

/// Mean block vector over blocks whose centers lie in `prev`; size is kept.
inline BBox propagate_bbox_avg(const BBox& prev, const MotionFrame& frame) {
  if (frame.kind == FrameKind::I) return prev;
  const double b = frame.block;
  const int cx0 = std::max(0, static_cast<int>(std::floor(prev.left() / b - 0.5)));
  const int cx1 = std::min(frame.grid_w - 1, static_cast<int>(std::ceil(prev.right() / b)));
  const int cy0 = std::max(0, static_cast<int>(std::floor(prev.top() / b - 0.5)));
  const int cy1 = std::min(frame.grid_h - 1, static_cast<int>(std::ceil(prev.bottom() / b)));
  double sx = 0.0, sy = 0.0;
  int n = 0;
  for (int cy = cy0; cy <= cy1; ++cy) {
    for (int cx = cx0; cx <= cx1; ++cx) {
      if (!prev.contains((cx + 0.5) * b, (cy + 0.5) * b)) continue;
      sx += frame.mv_x[frame.cell(cx, cy)];
      sy += frame.mv_y[frame.cell(cx, cy)];
      ++n;
    }
  }
  if (n == 0) return prev;
  return {prev.x + sx / n, prev.y + sy / n, prev.w, prev.h};
}

/// Tight rectangle around every pixel of `prev` shifted by its block's
/// vector. Parts of the box outside the frame use the nearest border block.
inline BBox propagate_pixel_shift(const BBox& prev, const MotionFrame& frame) {
  if (frame.kind == FrameKind::I) return prev;
  const double b = frame.block;
  const int bx0 = static_cast<int>(std::floor(prev.left() / b));
  const int bx1 = static_cast<int>(std::ceil(prev.right() / b)) - 1;
  const int by0 = static_cast<int>(std::floor(prev.top() / b));
  const int by1 = static_cast<int>(std::ceil(prev.bottom() / b)) - 1;
  double l = std::numeric_limits<double>::infinity(), t = l;
  double r = -l, btm = -l;
  for (int by = by0; by <= by1; ++by) {
    const double y0 = std::max(prev.top(), by * b);
    const double y1 = std::min(prev.bottom(), (by + 1) * b);
    if (y1 <= y0) continue;
    const int gy = std::clamp(by, 0, frame.grid_h - 1);
    for (int bx = bx0; bx <= bx1; ++bx) {
      const double x0 = std::max(prev.left(), bx * b);
      const double x1 = std::min(prev.right(), (bx + 1) * b);
      if (x1 <= x0) continue;
      const int gx = std::clamp(bx, 0, frame.grid_w - 1);
      const double dx = frame.mv_x[frame.cell(gx, gy)];
      const double dy = frame.mv_y[frame.cell(gx, gy)];
      l = std::min(l, x0 + dx);
      r = std::max(r, x1 + dx);
      t = std::min(t, y0 + dy);
      btm = std::max(btm, y1 + dy);
    }
  }
  if (!(r > l && btm > t)) return prev;
  return BBox::from_corner(l, t, r - l, btm - t);
}

/// Number of per-cell motion statistics produced by encode_motion.
inline constexpr int kMotionFeatures = 7;

/// Per-cell motion statistics, channel-major: data[f * cells + cell].
/// Channels: dx, dy, residual, d(dx)/dx, d(dy)/dy, d(dx)/dy, d(dy)/dx, with
/// derivatives in displacement pixels per pixel.
struct MotionEncoding {
  int grid_w = 0;
  int grid_h = 0;
  std::vector<double> data;

  std::size_t cells() const { return static_cast<std::size_t>(grid_w) * grid_h; }
  double at(int f, std::size_t cell) const { return data[f * cells() + cell]; }
};

inline MotionEncoding encode_motion(const MotionFrame& frame) {
  MotionEncoding enc{frame.grid_w, frame.grid_h,
                     std::vector<double>(kMotionFeatures * frame.cells(), 0.0)};
  const std::size_t n = frame.cells();
  const int gw = frame.grid_w, gh = frame.grid_h;
  const double b = frame.block;
  auto ddx = [&](const std::vector<int>& v, int cx, int cy) {
    if (gw < 2) return 0.0;
    if (cx == 0) return (v[frame.cell(1, cy)] - v[frame.cell(0, cy)]) / b;
    if (cx == gw - 1) return (v[frame.cell(gw - 1, cy)] - v[frame.cell(gw - 2, cy)]) / b;
    return (v[frame.cell(cx + 1, cy)] - v[frame.cell(cx - 1, cy)]) / (2.0 * b);
  };
  auto ddy = [&](const std::vector<int>& v, int cx, int cy) {
    if (gh < 2) return 0.0;
    if (cy == 0) return (v[frame.cell(cx, 1)] - v[frame.cell(cx, 0)]) / b;
    if (cy == gh - 1) return (v[frame.cell(cx, gh - 1)] - v[frame.cell(cx, gh - 2)]) / b;
    return (v[frame.cell(cx, cy + 1)] - v[frame.cell(cx, cy - 1)]) / (2.0 * b);
  };
  for (int cy = 0; cy < gh; ++cy) {
    for (int cx = 0; cx < gw; ++cx) {
      const std::size_t c = frame.cell(cx, cy);
      enc.data[0 * n + c] = frame.mv_x[c];
      enc.data[1 * n + c] = frame.mv_y[c];
      enc.data[2 * n + c] = frame.residual[c];
      enc.data[3 * n + c] = ddx(frame.mv_x, cx, cy);
      enc.data[4 * n + c] = ddy(frame.mv_y, cx, cy);
      enc.data[5 * n + c] = ddy(frame.mv_x, cx, cy);
      enc.data[6 * n + c] = ddx(frame.mv_y, cx, cy);
    }
  }
  return enc;
}

/// Affine head of the velocity regressor. Output channel k*m*m + u*m + v
/// holds component k (x, y, w, h) for pooling bin (u = row, v = column).
struct RegressorParams {
  int m = 7;
  int features = kMotionFeatures;
  std::vector<double> weights;  // channels() x features, row-major
  std::vector<double> bias;     // channels()

  static RegressorParams zeros(int m = 7, int features = kMotionFeatures) {
    RegressorParams p;
    p.m = m;
    p.features = features;
    p.weights.assign(static_cast<std::size_t>(p.channels()) * features, 0.0);
    p.bias.assign(p.channels(), 0.0);
    return p;
  }

  int channels() const { return 4 * m * m; }
  std::size_t size() const { return weights.size() + bias.size(); }

  double& weight(int ch, int f) { return weights[static_cast<std::size_t>(ch) * features + f]; }
  double weight(int ch, int f) const {
    return weights[static_cast<std::size_t>(ch) * features + f];
  }

  /// Flat parameter access: weights first, then bias.
  double& flat(std::size_t i) { return i < weights.size() ? weights[i] : bias[i - weights.size()]; }
  double flat(std::size_t i) const {
    return i < weights.size() ? weights[i] : bias[i - weights.size()];
  }

  void check() const {
    if (m < 1 || features < 1 ||
        weights.size() != static_cast<std::size_t>(channels()) * features ||
        bias.size() != static_cast<std::size_t>(channels()))
      throw std::invalid_argument("RegressorParams: inconsistent shape");
    for (std::size_t i = 0; i < size(); ++i)
      if (!std::isfinite(flat(i))) throw std::invalid_argument("RegressorParams: non-finite value");
  }

  friend bool operator==(const RegressorParams&, const RegressorParams&) = default;
};

/// Channel-major velocity field over the block grid.
struct VelocityField {
  int m = 7;
  int grid_w = 0;
  int grid_h = 0;
  std::vector<double> data;  // data[ch * cells + cell]

  std::size_t cells() const { return static_cast<std::size_t>(grid_w) * grid_h; }
  int channels() const { return 4 * m * m; }
  double at(int ch, std::size_t cell) const { return data[ch * cells() + cell]; }
};

inline VelocityField velocity_field(const RegressorParams& params, const MotionEncoding& enc) {
  if (enc.data.size() != static_cast<std::size_t>(params.features) * enc.cells())
    throw std::invalid_argument("velocity_field: encoding does not match regressor inputs");
  VelocityField field{params.m, enc.grid_w, enc.grid_h, {}};
  const std::size_t n = enc.cells();
  const int channels = params.channels();
  field.data.assign(static_cast<std::size_t>(channels) * n, 0.0);
  for (int ch = 0; ch < channels; ++ch) {
    double* out = field.data.data() + ch * n;
    std::fill(out, out + n, params.bias[ch]);
    for (int f = 0; f < params.features; ++f) {
      const double w = params.weight(ch, f);
      if (w == 0.0) continue;
      const double* in = enc.data.data() + f * n;
      for (std::size_t c = 0; c < n; ++c) out[c] += w * in[c];
    }
  }
  return field;
}

namespace detail {

/// Visits every grid cell whose center lies in `box` together with its
/// pooling bin (u = row, v = column).
template <class Visit>
void for_each_binned_cell(const BBox& box, int block, int grid_w, int grid_h, int m,
                          Visit&& visit) {
  const double l = box.left() / block, t = box.top() / block;
  const double w = box.w / block, h = box.h / block;
  const int cx0 = std::max(0, static_cast<int>(std::floor(l - 0.5)));
  const int cx1 = std::min(grid_w - 1, static_cast<int>(std::ceil(l + w)));
  const int cy0 = std::max(0, static_cast<int>(std::floor(t - 0.5)));
  const int cy1 = std::min(grid_h - 1, static_cast<int>(std::ceil(t + h)));
  for (int cy = cy0; cy <= cy1; ++cy) {
    const double py = cy + 0.5;
    if (py < t || py >= t + h) continue;
    const int u = std::min(m - 1, static_cast<int>((py - t) / h * m));
    for (int cx = cx0; cx <= cx1; ++cx) {
      const double px = cx + 0.5;
      if (px < l || px >= l + w) continue;
      const int v = std::min(m - 1, static_cast<int>((px - l) / w * m));
      visit(static_cast<std::size_t>(cy) * grid_w + cx, u, v);
    }
  }
}

}  // namespace detail

/// Position-sensitive readout: channel k*m*m + u*m + v is averaged over the
/// cells of bin (u, v); component k is the mean over all m*m bins, with
/// empty bins counting as zero.
inline Velocity psroi_readout(const VelocityField& field, const BBox& box, int block) {
  const int m = field.m;
  const int bins = m * m;
  std::vector<double> sums(4 * bins, 0.0);
  std::vector<int> counts(bins, 0);
  const std::size_t n = field.cells();
  detail::for_each_binned_cell(box, block, field.grid_w, field.grid_h, m,
                               [&](std::size_t cell, int u, int v) {
                                 const int bin = u * m + v;
                                 ++counts[bin];
                                 for (int k = 0; k < 4; ++k)
                                   sums[k * bins + bin] += field.data[(k * bins + bin) * n + cell];
                               });
  Velocity out;
  for (int k = 0; k < 4; ++k) {
    double acc = 0.0;
    for (int bin = 0; bin < bins; ++bin)
      if (counts[bin] > 0) acc += sums[k * bins + bin] / counts[bin];
    out[k] = acc / bins;
  }
  return out;
}

inline BBox propagate_regressor(const BBox& prev, const MotionFrame& frame,
                                const RegressorParams& params) {
  if (frame.kind == FrameKind::I) return prev;
  const auto field = velocity_field(params, encode_motion(frame));
  return predict_bbox(psroi_readout(field, prev, frame.block), prev);
}

inline double smooth_l1(double x) {
  const double a = std::abs(x);
  return a < 1.0 ? 0.5 * x * x : a - 0.5;
}

/// Derivative of smooth_l1.
inline double smooth_l1_grad(double x) {
  if (std::abs(x) < 1.0) return x;
  return x > 0.0 ? 1.0 : -1.0;
}

/// One training pair: the frame moving `prev` (ground truth at t-1) to
/// `next` (ground truth at t). The frame must outlive the sample.
struct RegressorSample {
  const MotionFrame* frame = nullptr;
  BBox prev;
  BBox next;
};

/// Mean encoding per pooling bin plus a non-empty indicator, scaled by
/// 1/(m*m): the readout of any regressor equals a dot product with it.
/// Layout: z[bin * (F + 1) + f], with the indicator at f = F.
struct PooledEncoding {
  int m = 7;
  int features = kMotionFeatures;
  std::vector<double> z;
};

inline PooledEncoding pool_encoding(const MotionEncoding& enc, const BBox& box, int block, int m,
                                    int features = kMotionFeatures) {
  const int bins = m * m;
  const int stride = features + 1;
  PooledEncoding out{m, features, std::vector<double>(static_cast<std::size_t>(bins) * stride, 0.0)};
  std::vector<int> counts(bins, 0);
  detail::for_each_binned_cell(box, block, enc.grid_w, enc.grid_h, m,
                               [&](std::size_t cell, int u, int v) {
                                 const int bin = u * m + v;
                                 ++counts[bin];
                                 for (int f = 0; f < features; ++f)
                                   out.z[bin * stride + f] += enc.at(f, cell);
                               });
  for (int bin = 0; bin < bins; ++bin) {
    if (counts[bin] == 0) continue;
    for (int f = 0; f < features; ++f)
      out.z[bin * stride + f] /= static_cast<double>(counts[bin]) * bins;
    out.z[bin * stride + features] = 1.0 / bins;
  }
  return out;
}

inline Velocity readout_pooled(const RegressorParams& params, const PooledEncoding& pooled) {
  const int bins = params.m * params.m;
  const int stride = params.features + 1;
  Velocity out;
  for (int k = 0; k < 4; ++k) {
    double acc = 0.0;
    for (int bin = 0; bin < bins; ++bin) {
      const int ch = k * bins + bin;
      const double* z = pooled.z.data() + bin * stride;
      for (int f = 0; f < params.features; ++f) acc += params.weight(ch, f) * z[f];
      acc += params.bias[ch] * z[params.features];
    }
    out[k] = acc;
  }
  return out;
}

/// Mean over samples of the summed smooth-L1 velocity error, evaluated
/// through the full field and pooling path.
inline double regressor_loss(const RegressorParams& params,
                             const std::vector<RegressorSample>& batch) {
  if (batch.empty()) throw std::invalid_argument("regressor_loss: empty batch");
  const MotionFrame* cached = nullptr;
  VelocityField field;
  double total = 0.0;
  for (const auto& s : batch) {
    if (s.frame->kind != FrameKind::P)
      throw std::invalid_argument("regressor_loss: sample frame is not a P-frame");
    if (s.frame != cached) {
      field = velocity_field(params, encode_motion(*s.frame));
      cached = s.frame;
    }
    const Velocity target = inverse_velocity(s.prev, s.next);
    const Velocity pred = psroi_readout(field, s.prev, s.frame->block);
    for (int k = 0; k < 4; ++k) total += smooth_l1(target[k] - pred[k]);
  }
  return total / static_cast<double>(batch.size());
}

namespace detail {

struct PreparedSamples {
  std::vector<PooledEncoding> pooled;
  std::vector<Velocity> targets;
};

inline PreparedSamples prepare_samples(const std::vector<RegressorSample>& batch, int m) {
  PreparedSamples out;
  const MotionFrame* cached = nullptr;
  MotionEncoding enc;
  for (const auto& s : batch) {
    if (s.frame->kind != FrameKind::P)
      throw std::invalid_argument("regressor: sample frame is not a P-frame");
    if (s.frame != cached) {
      enc = encode_motion(*s.frame);
      cached = s.frame;
    }
    out.pooled.push_back(pool_encoding(enc, s.prev, s.frame->block, m));
    out.targets.push_back(inverse_velocity(s.prev, s.next));
  }
  return out;
}

}  // namespace detail

/// Closed-form gradient of regressor_loss, flattened like
/// RegressorParams::flat.
inline std::vector<double> regressor_gradient(const RegressorParams& params,
                                              const std::vector<RegressorSample>& batch) {
  if (batch.empty()) throw std::invalid_argument("regressor_gradient: empty batch");
  const auto prep = detail::prepare_samples(batch, params.m);
  const int bins = params.m * params.m;
  const int stride = params.features + 1;
  std::vector<double> grad(params.size(), 0.0);
  const double scale = 1.0 / static_cast<double>(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const Velocity pred = readout_pooled(params, prep.pooled[i]);
    for (int k = 0; k < 4; ++k) {
      const double g = -smooth_l1_grad(prep.targets[i][k] - pred[k]) * scale;
      if (g == 0.0) continue;
      for (int bin = 0; bin < bins; ++bin) {
        const int ch = k * bins + bin;
        const double* z = prep.pooled[i].z.data() + bin * stride;
        for (int f = 0; f < params.features; ++f)
          grad[static_cast<std::size_t>(ch) * params.features + f] += g * z[f];
        grad[params.weights.size() + ch] += g * z[params.features];
      }
    }
  }
  return grad;
}

struct RegressorHyper {
  double lr = 1.0;
  int epochs = 200;
  std::uint64_t seed = 0;
  double ridge = 1e-3;       // damping, relative to the mean curvature
  double init_scale = 1e-4;  // std dev of the initial weights
  double tolerance = 1e-12;  // stop once the loss improves by less than this
};

struct RegressorFit {
  RegressorParams params;
  double loss = 0.0;
  int epochs_run = 0;
};

/// Fits the regressor by damped Newton descent on the smooth-L1 objective.
/// The loss separates over the four velocity components and is convex in
/// each component's parameters; every epoch solves the iteratively
/// reweighted quadratic model of that loss and steps by `lr`.
inline RegressorFit fit_regressor(const std::vector<RegressorSample>& batch,
                                  const RegressorHyper& hyper, int m = 7) {
  if (batch.empty()) throw std::invalid_argument("fit_regressor: empty training set");
  if (hyper.epochs < 0) throw ConfigError("fit_regressor: epochs must be >= 0");
  if (!(hyper.lr > 0.0)) throw ConfigError("fit_regressor: lr must be positive");

  RegressorFit fit;
  fit.params = RegressorParams::zeros(m);
  {
    std::mt19937_64 rng(hyper.seed);
    std::normal_distribution<double> normal(0.0, hyper.init_scale);
    if (hyper.init_scale > 0.0)
      for (double& w : fit.params.weights) w = normal(rng);
  }

  const auto prep = detail::prepare_samples(batch, m);
  const int bins = m * m;
  const int stride = kMotionFeatures + 1;
  const int dim = bins * stride;
  const Eigen::Index n = static_cast<Eigen::Index>(batch.size());

  Eigen::MatrixXd Z(n, dim);
  for (Eigen::Index i = 0; i < n; ++i)
    for (int j = 0; j < dim; ++j) Z(i, j) = prep.pooled[i].z[j];
  Eigen::MatrixXd Y(n, 4);
  for (Eigen::Index i = 0; i < n; ++i)
    for (int k = 0; k < 4; ++k) Y(i, k) = prep.targets[i][k];

  // theta_k[bin * stride + f] mirrors weight(k * bins + bin, f), bias at f = F.
  auto gather = [&](int k) {
    Eigen::VectorXd theta(dim);
    for (int bin = 0; bin < bins; ++bin) {
      const int ch = k * bins + bin;
      for (int f = 0; f < kMotionFeatures; ++f) theta(bin * stride + f) = fit.params.weight(ch, f);
      theta(bin * stride + kMotionFeatures) = fit.params.bias[ch];
    }
    return theta;
  };
  auto scatter = [&](int k, const Eigen::VectorXd& theta) {
    for (int bin = 0; bin < bins; ++bin) {
      const int ch = k * bins + bin;
      for (int f = 0; f < kMotionFeatures; ++f) fit.params.weight(ch, f) = theta(bin * stride + f);
      fit.params.bias[ch] = theta(bin * stride + kMotionFeatures);
    }
  };
  // R holds the residuals Y - Z * theta of every component.
  Eigen::MatrixXd R(n, 4);
  for (int k = 0; k < 4; ++k) R.col(k) = Y.col(k) - Z * gather(k);
  auto loss_of = [&]() {
    double total = 0.0;
    for (int k = 0; k < 4; ++k)
      for (Eigen::Index i = 0; i < n; ++i) total += smooth_l1(R(i, k));
    return total / static_cast<double>(n);
  };

  double loss = loss_of();
  Eigen::VectorXd last_weights;
  Eigen::LDLT<Eigen::MatrixXd> solver;
  for (int epoch = 1; epoch <= hyper.epochs; ++epoch) {
    for (int k = 0; k < 4; ++k) {
      Eigen::VectorXd psi(n), weights(n);
      for (Eigen::Index i = 0; i < n; ++i) {
        const double r = R(i, k);
        psi(i) = smooth_l1_grad(r);
        weights(i) = std::abs(r) < 1.0 ? 1.0 : 1.0 / std::abs(r);
      }
      if (last_weights.size() != n || (weights - last_weights).cwiseAbs().maxCoeff() > 0.0) {
        Eigen::MatrixXd hessian = Z.transpose() * weights.asDiagonal() * Z / static_cast<double>(n);
        const double mean_curv = hessian.trace() / dim;
        hessian.diagonal().array() += hyper.ridge * (mean_curv > 0.0 ? mean_curv : 1.0);
        solver.compute(hessian);
        last_weights = weights;
      }
      const Eigen::VectorXd grad = -Z.transpose() * psi / static_cast<double>(n);
      const Eigen::VectorXd step = -hyper.lr * solver.solve(grad);
      scatter(k, gather(k) + step);
      R.col(k) -= Z * step;
    }
    const double next = loss_of();
    fit.epochs_run = epoch;
    if (!std::isfinite(next))
      throw std::runtime_error("fit_regressor: loss diverged at epoch " + std::to_string(epoch));
    const bool converged = std::abs(loss - next) < hyper.tolerance;
    loss = next;
    if (converged) break;
  }
  fit.loss = loss;
  return fit;
}

/// Consecutive-frame ground-truth pairs over P-frames; objects must be
/// visible in both frames.
inline std::vector<RegressorSample> collect_regressor_samples(const Scenario& sc) {
  std::vector<RegressorSample> out;
  for (int i = 1; i < sc.frame_count(); ++i) {
    const MotionFrame& f = sc.frames[i];
    if (f.kind != FrameKind::P) continue;
    const auto prev = sc.gt_at(i - 1);
    for (const auto& e : sc.gt_at(i)) {
      if (!e.visible) continue;
      for (const auto& p : prev)
        if (p.id == e.id && p.visible) out.push_back({&f, p.bbox, e.bbox});
    }
  }
  return out;
}

/// Appends `copies` perturbed versions of every sample. A copy shifts prev
/// by a relative offset and rescales it by a log-normal factor, both with
/// standard deviation `jitter`; next receives the same relative change, so
/// the target is the image of the perturbed box under the object's own
/// per-frame scale-and-shift map.
inline std::vector<RegressorSample> augment_regressor_samples(
    const std::vector<RegressorSample>& samples, int copies, double jitter, std::uint64_t seed) {
  if (copies < 0 || !(jitter >= 0.0)) throw ConfigError("augment: copies and jitter must be >= 0");
  std::vector<RegressorSample> out = samples;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (const auto& s : samples) {
    for (int c = 0; c < copies; ++c) {
      const double dx = jitter * normal(rng), dy = jitter * normal(rng);
      const double sw = std::exp(jitter * normal(rng)), sh = std::exp(jitter * normal(rng));
      auto perturb = [&](const BBox& b) {
        return BBox{b.x + dx * b.w, b.y + dy * b.h, b.w * sw, b.h * sh};
      };
      out.push_back({s.frame, perturb(s.prev), perturb(s.next)});
    }
  }
  return out;
}

inline void write_regressor(const RegressorParams& p, std::ostream& out) {
  out << "regressor " << p.m << ' ' << p.features << '\n';
  out << std::setprecision(17);
  for (int ch = 0; ch < p.channels(); ++ch) {
    for (int f = 0; f < p.features; ++f) out << (f ? " " : "") << p.weight(ch, f);
    out << ' ' << p.bias[ch] << '\n';
  }
}

inline RegressorParams read_regressor(std::istream& in) {
  std::string tag;
  int m = 0, features = 0;
  if (!(in >> tag >> m >> features) || tag != "regressor" || m < 1 || features != kMotionFeatures)
    throw FormatError("regressor: malformed shape header");
  RegressorParams p = RegressorParams::zeros(m, features);
  for (int ch = 0; ch < p.channels(); ++ch) {
    for (int f = 0; f < features; ++f)
      if (!(in >> p.weight(ch, f)))
        throw FormatError("regressor: truncated at channel " + std::to_string(ch));
    if (!(in >> p.bias[ch])) throw FormatError("regressor: truncated at channel " + std::to_string(ch));
  }
  p.check();
  return p;
}

}  // namespace otcd
