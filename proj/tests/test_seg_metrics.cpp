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

#include <gtest/gtest.h>

#include "mbnas/seg_metrics.hpp"
#include "oracles.hpp"

namespace mbnas {
namespace {

LabelMask from_rows(const std::vector<std::string>& rows, double dy = 1.0, double dx = 1.0) {
  LabelMask m(static_cast<int>(rows.size()), static_cast<int>(rows[0].size()), dy, dx);
  for (int y = 0; y < m.height; ++y)
    for (int x = 0; x < m.width; ++x) m.at(y, x) = rows[y][x] - '0';
  return m;
}

TEST(Dice, HalfOverlap) {
  const auto p = from_rows({"1100"});
  const auto g = from_rows({"0110"});
  EXPECT_DOUBLE_EQ(dsc(p, g, 1), 0.5);
  EXPECT_DOUBLE_EQ(dsc(p, p, 1), 1.0);
  EXPECT_DOUBLE_EQ(dsc(p, g, 2), 1.0);  // absent from both
  EXPECT_DOUBLE_EQ(dsc(from_rows({"1000"}), from_rows({"0001"}), 1), 0.0);
}

TEST(Dice, ShapeMismatchThrows) {
  EXPECT_THROW(dsc(from_rows({"10"}), from_rows({"100"}), 1), ShapeError);
  EXPECT_THROW(dsc(from_rows({"10"}, 1.0, 1.0), from_rows({"10"}, 2.0, 1.0), 1), ShapeError);
}

TEST(SoftDice, PerfectAndWorstPredictions) {
  const auto g = from_rows({"0110"});
  std::vector<std::vector<double>> probs = {{1, 0, 0, 1}, {0, 1, 1, 0}};
  EXPECT_NEAR(soft_dice_loss(probs, g), 0.0, 1e-9);
  probs = {{0, 1, 1, 0}, {1, 0, 0, 1}};
  EXPECT_NEAR(soft_dice_loss(probs, g), 1.0, 1e-5);
  probs = {{0.5, 0.5, 0.5, 0.5}, {0.5, 0.5, 0.5, 0.5}};
  // inter 1, psum 2, gsum 2
  EXPECT_NEAR(soft_dice_loss(probs, g, 0.0), 0.5, 1e-12);
  EXPECT_THROW(soft_dice_loss(std::span(probs).first(1), g), ShapeError);
}

TEST(Hd95, AdjacentSinglePixels) {
  const auto p = from_rows({"100"});
  const auto g = from_rows({"010"});
  EXPECT_DOUBLE_EQ(hd95(p, g, 1), 1.0);
  EXPECT_DOUBLE_EQ(hd95(p, p, 1), 0.0);
}

TEST(Hd95, AnisotropicSpacing) {
  const auto p = from_rows({"1", "0", "0"}, 2.5, 1.0);
  const auto g = from_rows({"0", "0", "1"}, 2.5, 1.0);
  EXPECT_DOUBLE_EQ(hd95(p, g, 1), 5.0);
  const auto q = from_rows({"100"}, 2.5, 0.5);
  const auto h = from_rows({"001"}, 2.5, 0.5);
  EXPECT_DOUBLE_EQ(hd95(q, h, 1), 1.0);
}

TEST(BoundaryDistances, InteriorPixelsAreNotBoundary) {
  const auto m = from_rows({"00000", "01110", "01110", "01110", "00000"});
  const auto b = boundary_pixels(m, 1);
  EXPECT_EQ(b.size(), 8u);
  for (const auto& px : b) EXPECT_FALSE(px.y == 2 && px.x == 2);
  // Pixels on the image edge count as boundary.
  EXPECT_EQ(boundary_pixels(from_rows({"111", "111", "111"}), 1).size(), 8u);
}

TEST(BoundaryDistances, EmptyClassIsUndefined) {
  const auto p = from_rows({"000"});
  const auto g = from_rows({"010"});
  EXPECT_THROW(hd95(p, g, 1), MetricUndefinedError);
  EXPECT_THROW(hd95(g, p, 1), MetricUndefinedError);
  EXPECT_THROW(surface_dice(p, g, 1, 1.0), MetricUndefinedError);
  EXPECT_THROW(surface_dice(g, g, 1, -1.0), std::invalid_argument);
}

TEST(Percentile, LinearInterpolation) {
  EXPECT_DOUBLE_EQ(percentile({0, 10}, 95), 9.5);
  EXPECT_DOUBLE_EQ(percentile({3}, 95), 3.0);
  EXPECT_DOUBLE_EQ(percentile({4, 1, 2, 3}, 50), 2.5);
  EXPECT_THROW(percentile({}, 95), MetricUndefinedError);
}

TEST(DistanceField, MatchesBruteForce) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const int h = 1 + rng() % 17, w = 1 + rng() % 17;
    const double dy = 0.5 + (rng() % 8) * 0.25, dx = 0.5 + (rng() % 8) * 0.25;
    std::vector<Pixel> sites;
    for (int i = 0, n = 1 + rng() % 6; i < n; ++i)
      sites.push_back({static_cast<int>(rng() % h), static_cast<int>(rng() % w)});
    const auto field = squared_distance_field(h, w, dy, dx, sites);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        double best = std::numeric_limits<double>::infinity();
        for (const auto& s : sites) {
          const double ey = (y - s.y) * dy, ex = (x - s.x) * dx;
          best = std::min(best, ey * ey + ex * ex);
        }
        EXPECT_NEAR(field[y * w + x], best, 1e-9 * (1 + best));
      }
  }
}

TEST(Oracle, RandomMaskPairs) {
  std::mt19937_64 rng(2026);
  int compared = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const int h = 4 + rng() % 61, w = 4 + rng() % 61;
    const bool aniso = trial % 2;
    const double dy = aniso ? 0.5 + (rng() % 10) * 0.3 : 1.0;
    const double dx = aniso ? 0.5 + (rng() % 10) * 0.3 : 1.0;
    const int classes = 2 + trial % 3;
    const auto p = oracle::random_mask(rng, h, w, dy, dx, classes);
    const auto g = oracle::random_mask(rng, h, w, dy, dx, classes);
    for (int cls = 0; cls < classes; ++cls) {
      EXPECT_NEAR(dsc(p, g, cls), oracle::dsc(p, g, cls), 1e-12);
      if (oracle::boundary(p, cls).empty() || oracle::boundary(g, cls).empty()) {
        EXPECT_THROW(hd95(p, g, cls), MetricUndefinedError);
        continue;
      }
      ++compared;
      EXPECT_NEAR(hd95(p, g, cls), oracle::hd95(p, g, cls), 1e-9) << "trial " << trial;
      for (double tol : {0.0, 1.0, 2.0, 3.5})
        EXPECT_NEAR(surface_dice(p, g, cls, tol), oracle::surface_dice(p, g, cls, tol), 1e-12);
    }
  }
  EXPECT_GT(compared, 150);
}

TEST(Properties, SymmetryAndMonotoneTolerance) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 30; ++trial) {
    const auto p = oracle::random_mask(rng, 32, 24, 1.0, 0.75);
    const auto g = oracle::random_mask(rng, 32, 24, 1.0, 0.75);
    if (boundary_pixels(p, 1).empty() || boundary_pixels(g, 1).empty()) continue;
    EXPECT_DOUBLE_EQ(dsc(p, g, 1), dsc(g, p, 1));
    EXPECT_DOUBLE_EQ(hd95(p, g, 1), hd95(g, p, 1));
    double previous = 1.0;
    for (double tol = 6.0; tol >= 0.0; tol -= 0.25) {
      const double sd = surface_dice(p, g, 1, tol);
      EXPECT_LE(sd, previous);
      EXPECT_DOUBLE_EQ(sd, surface_dice(g, p, 1, tol));
      previous = sd;
    }
    EXPECT_DOUBLE_EQ(surface_dice(p, p, 1, 0.0), 1.0);
    EXPECT_DOUBLE_EQ(hd95(p, p, 1), 0.0);
  }
}

}  // namespace
}  // namespace mbnas
