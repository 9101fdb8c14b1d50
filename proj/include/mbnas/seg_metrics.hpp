// Copyright 2026 The MBNAS Authors
//
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

// Overlap and boundary-distance metrics on 2D label masks.
//
// Boundary pixels of a class are the class pixels with at least one
// 4-neighbour outside the class or outside the image. Boundary distances are
// Euclidean in physical units (spacing dy, dx), computed with an exact
// separable distance transform.

#ifndef MBNAS_SEG_METRICS_HPP_
#define MBNAS_SEG_METRICS_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "mbnas/common.hpp"

namespace mbnas {

struct LabelMask {
  int height = 0;
  int width = 0;
  double dy = 1.0;
  double dx = 1.0;
  std::vector<std::int32_t> labels;  // row-major

  LabelMask() = default;
  LabelMask(int h, int w, double spacing_y = 1.0, double spacing_x = 1.0)
      : height(h), width(w), dy(spacing_y), dx(spacing_x),
        labels(static_cast<std::size_t>(h) * w, 0) {
    if (h <= 0 || w <= 0) throw ShapeError("mask dims must be positive");
    if (!(dy > 0.0) || !(dx > 0.0)) throw ShapeError("mask spacing must be positive");
  }

  std::int32_t& at(int y, int x) { return labels[static_cast<std::size_t>(y) * width + x]; }
  std::int32_t at(int y, int x) const { return labels[static_cast<std::size_t>(y) * width + x]; }
};

struct Pixel {
  int y = 0;
  int x = 0;
};

namespace detail {

inline void check_same_geometry(const LabelMask& a, const LabelMask& b) {
  if (a.height != b.height || a.width != b.width) throw ShapeError("mask shapes differ");
  if (a.dy != b.dy || a.dx != b.dx) throw ShapeError("mask spacings differ");
  if (a.labels.size() != static_cast<std::size_t>(a.height) * a.width ||
      b.labels.size() != static_cast<std::size_t>(b.height) * b.width)
    throw ShapeError("mask buffer does not match its shape");
}

// Squared distance along one line to the lower envelope of parabolas
// w * (q - p)^2 + f[p]. Infinite entries take no part.
inline void distance_transform_1d(std::span<const double> f, std::span<double> out, double w) {
  const int n = static_cast<int>(f.size());
  std::vector<int> v(n);
  std::vector<double> z(n + 1);
  int k = -1;
  constexpr double inf = std::numeric_limits<double>::infinity();
  for (int q = 0; q < n; ++q) {
    if (!std::isfinite(f[q])) continue;
    if (k < 0) {
      k = 0;
      v[0] = q;
      z[0] = -inf;
      z[1] = inf;
      continue;
    }
    double s;
    for (;;) {
      const int p = v[k];
      s = ((f[q] + w * q * q) - (f[p] + w * p * p)) / (2.0 * w * (q - p));
      if (s <= z[k] && k > 0) {
        --k;
        continue;
      }
      break;
    }
    ++k;
    v[k] = q;
    z[k] = s;
    z[k + 1] = inf;
  }
  if (k < 0) {
    std::fill(out.begin(), out.end(), inf);
    return;
  }
  int j = 0;
  for (int q = 0; q < n; ++q) {
    while (z[j + 1] < q) ++j;
    const double d = static_cast<double>(q - v[j]);
    out[q] = w * (d * d) + f[v[j]];
  }
}

}  // namespace detail

inline std::vector<Pixel> boundary_pixels(const LabelMask& m, int class_id) {
  std::vector<Pixel> out;
  for (int y = 0; y < m.height; ++y) {
    for (int x = 0; x < m.width; ++x) {
      if (m.at(y, x) != class_id) continue;
      const bool edge = y == 0 || x == 0 || y == m.height - 1 || x == m.width - 1;
      if (edge || m.at(y - 1, x) != class_id || m.at(y + 1, x) != class_id ||
          m.at(y, x - 1) != class_id || m.at(y, x + 1) != class_id)
        out.push_back({y, x});
    }
  }
  return out;
}

// Squared physical distance from every pixel to the nearest pixel in `sites`.
inline std::vector<double> squared_distance_field(int height, int width, double dy, double dx,
                                                  std::span<const Pixel> sites) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  std::vector<double> grid(static_cast<std::size_t>(height) * width, inf);
  for (const auto& p : sites) grid[static_cast<std::size_t>(p.y) * width + p.x] = 0.0;
  std::vector<double> col_in(height), col_out(height);
  for (int x = 0; x < width; ++x) {
    for (int y = 0; y < height; ++y) col_in[y] = grid[static_cast<std::size_t>(y) * width + x];
    detail::distance_transform_1d(col_in, col_out, dy * dy);
    for (int y = 0; y < height; ++y) grid[static_cast<std::size_t>(y) * width + x] = col_out[y];
  }
  std::vector<double> row_out(width);
  for (int y = 0; y < height; ++y) {
    std::span<double> row(grid.data() + static_cast<std::size_t>(y) * width, width);
    detail::distance_transform_1d(row, row_out, dx * dx);
    std::copy(row_out.begin(), row_out.end(), row.begin());
  }
  return grid;
}

// Dice of one class. Both sets empty counts as perfect agreement.
inline double dsc(const LabelMask& pred, const LabelMask& gt, int class_id) {
  detail::check_same_geometry(pred, gt);
  std::int64_t p = 0, g = 0, both = 0;
  for (std::size_t i = 0; i < pred.labels.size(); ++i) {
    const bool a = pred.labels[i] == class_id;
    const bool b = gt.labels[i] == class_id;
    p += a;
    g += b;
    both += a && b;
  }
  if (p + g == 0) return 1.0;
  return 2.0 * static_cast<double>(both) / static_cast<double>(p + g);
}

// Foreground soft Dice loss. `probs[c]` is the row-major probability map of
// class c; class 0 is background and excluded from the mean.
inline double soft_dice_loss(std::span<const std::vector<double>> probs, const LabelMask& gt,
                             double eps = 1e-5) {
  const std::size_t n = static_cast<std::size_t>(gt.height) * gt.width;
  if (probs.size() < 2) throw ShapeError("soft Dice needs at least one foreground class");
  for (const auto& p : probs)
    if (p.size() != n) throw ShapeError("probability map does not match the mask");
  double total = 0.0;
  for (std::size_t c = 1; c < probs.size(); ++c) {
    double inter = 0.0, psum = 0.0, gsum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double g = gt.labels[i] == static_cast<std::int32_t>(c) ? 1.0 : 0.0;
      inter += probs[c][i] * g;
      psum += probs[c][i];
      gsum += g;
    }
    total += (2.0 * inter + eps) / (psum + gsum + eps);
  }
  return 1.0 - total / static_cast<double>(probs.size() - 1);
}

struct BoundaryDistances {
  std::vector<double> pred_to_gt;  // per boundary pixel of pred
  std::vector<double> gt_to_pred;
};

// Nearest opposing-boundary distance for every boundary pixel of both masks.
inline BoundaryDistances boundary_distances(const LabelMask& pred, const LabelMask& gt,
                                            int class_id) {
  detail::check_same_geometry(pred, gt);
  const auto bp = boundary_pixels(pred, class_id);
  const auto bg = boundary_pixels(gt, class_id);
  if (bp.empty() || bg.empty())
    throw MetricUndefinedError("class " + std::to_string(class_id) +
                               " is empty in " + (bp.empty() ? "prediction" : "ground truth"));
  const auto to_gt = squared_distance_field(gt.height, gt.width, gt.dy, gt.dx, bg);
  const auto to_pred = squared_distance_field(pred.height, pred.width, pred.dy, pred.dx, bp);
  BoundaryDistances d;
  for (const auto& p : bp)
    d.pred_to_gt.push_back(std::sqrt(to_gt[static_cast<std::size_t>(p.y) * gt.width + p.x]));
  for (const auto& p : bg)
    d.gt_to_pred.push_back(std::sqrt(to_pred[static_cast<std::size_t>(p.y) * pred.width + p.x]));
  return d;
}

// Percentile with linear interpolation between order statistics.
inline double percentile(std::vector<double> values, double q) {
  if (values.empty()) throw MetricUndefinedError("percentile of an empty set");
  std::sort(values.begin(), values.end());
  const double pos = q / 100.0 * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

// 95th percentile of the pooled symmetric boundary distances.
inline double hd95(const LabelMask& pred, const LabelMask& gt, int class_id) {
  auto d = boundary_distances(pred, gt, class_id);
  std::vector<double> pooled = std::move(d.pred_to_gt);
  pooled.insert(pooled.end(), d.gt_to_pred.begin(), d.gt_to_pred.end());
  return percentile(std::move(pooled), 95.0);
}

// Share of boundary pixels (both masks pooled) lying within `tolerance`
// physical units of the other mask's boundary.
inline double surface_dice(const LabelMask& pred, const LabelMask& gt, int class_id,
                           double tolerance) {
  if (tolerance < 0.0) throw std::invalid_argument("surface_dice: negative tolerance");
  const auto d = boundary_distances(pred, gt, class_id);
  std::size_t within = 0;
  for (double v : d.pred_to_gt) within += v <= tolerance;
  for (double v : d.gt_to_pred) within += v <= tolerance;
  return static_cast<double>(within) /
         static_cast<double>(d.pred_to_gt.size() + d.gt_to_pred.size());
}

}  // namespace mbnas

#endif  // MBNAS_SEG_METRICS_HPP_
