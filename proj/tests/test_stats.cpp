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

#include "mbnas/stats.hpp"
#include "oracles.hpp"

namespace mbnas {
namespace {

ScoreTable table(std::vector<std::vector<double>> rows) {
  ScoreTable t;
  for (std::size_t j = 0; j < rows.at(0).size(); ++j) t.models.push_back("m" + std::to_string(j));
  t.rows = std::move(rows);
  return t;
}

TEST(Ranks, AverageTies) {
  const std::vector<double> v = {0.3, 0.1, 0.3, 0.2};
  double ties = 0;
  const auto r = average_ranks(v, &ties);
  EXPECT_EQ(r, (std::vector<double>{3.5, 1, 3.5, 2}));
  EXPECT_DOUBLE_EQ(ties, 6.0);
}

TEST(Friedman, IdenticalColumnsGiveZero) {
  const auto r = friedman_test(table({{0.8, 0.8, 0.8}, {0.7, 0.7, 0.7}, {0.9, 0.9, 0.9}}));
  EXPECT_DOUBLE_EQ(r.statistic, 0.0);
  EXPECT_DOUBLE_EQ(r.p_value, 1.0);
  EXPECT_EQ(r.degrees_of_freedom, 2);
}

TEST(Friedman, ConsistentOrderingOnThreeByThree) {
  const auto r = friedman_test(table({{0.1, 0.2, 0.3}, {0.4, 0.5, 0.6}, {0.0, 0.5, 0.9}}));
  EXPECT_DOUBLE_EQ(r.statistic, 6.0);
  EXPECT_EQ(r.degrees_of_freedom, 2);
  EXPECT_NEAR(r.p_value, std::exp(-3.0), 1e-12);
  EXPECT_EQ(r.mean_ranks, (std::vector<double>{1, 2, 3}));
}

TEST(Friedman, SixModelsHaveFiveDegreesOfFreedom) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.5, 0.9);
  std::vector<std::vector<double>> rows(15, std::vector<double>(6));
  for (auto& r : rows)
    for (auto& v : r) v = u(rng);
  const auto res = friedman_test(table(rows));
  EXPECT_EQ(res.degrees_of_freedom, 5);
  EXPECT_GE(res.p_value, 0.0);
  EXPECT_LE(res.p_value, 1.0);
}

TEST(Friedman, InvariantUnderMonotoneTransform) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<std::vector<double>> rows(10, std::vector<double>(4));
  for (auto& r : rows)
    for (auto& v : r) v = std::round(u(rng) * 8) / 8;  // forces some ties
  auto warped = rows;
  for (auto& r : warped)
    for (auto& v : r) v = std::exp(3 * v) - 7;
  const auto a = friedman_test(table(rows)), b = friedman_test(table(warped));
  EXPECT_DOUBLE_EQ(a.statistic, b.statistic);
  EXPECT_DOUBLE_EQ(a.p_value, b.p_value);
}

TEST(Friedman, TieCorrectionAgainstHandValue) {
  // Rank sums 4, 5, 9; the first two rows each hold one tied pair.
  const auto r = friedman_test(table({{1, 1, 2}, {1, 1, 2}, {1, 2, 3}}));
  // raw = 12/(3*3*4) * (16+25+81) - 36; correction = 1 - 12/72
  EXPECT_NEAR(r.statistic, (122.0 / 3.0 - 36.0) / (1.0 - 12.0 / 72.0), 1e-12);
}

TEST(Friedman, RejectsRaggedOrMissing) {
  auto t = table({{1, 2}, {3, 4}});
  t.rows[1].pop_back();
  EXPECT_THROW(friedman_test(t), StatsError);
  EXPECT_THROW(friedman_test(table({{1, std::nan("")}, {1, 2}})), StatsError);
  EXPECT_THROW(friedman_test(table({{1, 2}})), StatsError);
}

TEST(Wilcoxon, ConstantShiftHasZeroStatistic) {
  std::vector<double> x = {0.71, 0.65, 0.80, 0.77, 0.69, 0.74, 0.70, 0.81};
  std::vector<double> y;
  for (double v : x) y.push_back(v + 0.02);
  const auto r = wilcoxon_signed_rank(x, y);
  EXPECT_DOUBLE_EQ(r.statistic, 0.0);
  EXPECT_DOUBLE_EQ(r.w_plus, 0.0);
  EXPECT_DOUBLE_EQ(r.w_minus, 36.0);
  EXPECT_TRUE(r.exact);
  EXPECT_NEAR(r.p_value, 2.0 / 256.0, 1e-15);
}

TEST(Wilcoxon, ExactMatchesEnumeration) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 40; ++trial) {
    const int n = 5 + trial % 10;
    std::vector<double> x(n), y(n);
    for (int i = 0; i < n; ++i) {
      x[i] = u(rng);
      y[i] = trial % 3 == 0 ? std::round((x[i] + u(rng) - 0.5) * 10) / 10 : u(rng);
      if (trial % 3 == 0) x[i] = std::round(x[i] * 10) / 10;  // ties and zero differences
    }
    double stat = 0;
    std::size_t nonzero = 0;
    for (int i = 0; i < n; ++i) nonzero += x[i] != y[i];
    if (nonzero < 5) continue;
    const double p = oracle::wilcoxon_exact_p(x, y, &stat);
    const auto r = wilcoxon_signed_rank(x, y);
    EXPECT_DOUBLE_EQ(r.statistic, stat);
    EXPECT_NEAR(r.p_value, p, 1e-12) << "trial " << trial;
  }
}

TEST(Wilcoxon, DegenerateInputsThrow) {
  const std::vector<double> x = {1, 2, 3, 4, 5, 6};
  EXPECT_THROW(wilcoxon_signed_rank(x, x), StatsError);
  std::vector<double> y = x;
  y[0] += 1;
  y[1] += 1;
  EXPECT_THROW(wilcoxon_signed_rank(x, y), StatsError);  // 2 nonzero
  EXPECT_THROW(wilcoxon_signed_rank(x, std::vector<double>{1, 2}), StatsError);
}

TEST(Wilcoxon, NormalApproximationAboveExactLimit) {
  std::vector<double> x, y;
  for (int i = 0; i < 40; ++i) {
    x.push_back(i);
    y.push_back(i + (i % 4 == 0 ? -1.0 : 1.0) * (1 + i % 7));
  }
  const auto r = wilcoxon_signed_rank(x, y);
  EXPECT_FALSE(r.exact);
  EXPECT_EQ(r.n, 40);
  EXPECT_DOUBLE_EQ(r.w_plus + r.w_minus, 40.0 * 41.0 / 2.0);
  double ties = 0;
  std::vector<double> mags;
  for (int i = 0; i < 40; ++i) mags.push_back(std::fabs(x[i] - y[i]));
  average_ranks(mags, &ties);
  const double var = 40.0 * 41 * 81 / 24 - ties / 48;
  const double z = -(std::fabs(r.statistic - 410.0) - 0.5) / std::sqrt(var);
  EXPECT_NEAR(r.z, z, 1e-12);
  EXPECT_NEAR(r.p_value, std::erfc(-z / std::sqrt(2.0)), 1e-12);
}

TEST(Wilcoxon, ExactCloseToNormalAtTheLimit) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> nd(0.3, 1.0);
  std::vector<double> x(25), y(25, 0.0);
  for (auto& v : x) v = nd(rng);
  const auto r = wilcoxon_signed_rank(x, y);
  ASSERT_TRUE(r.exact);
  const double var = 25.0 * 26 * 51 / 24;
  const double z = -(std::fabs(r.statistic - 162.5) - 0.5) / std::sqrt(var);
  EXPECT_NEAR(r.p_value, std::erfc(-z / std::sqrt(2.0)), 0.01);
}

TEST(Pairwise, AllPairsInOrder) {
  std::vector<std::vector<double>> rows;
  for (int i = 0; i < 8; ++i) rows.push_back({0.1 * i, 0.1 * i + 0.05 + 0.001 * i, 0.1 * i - 0.03 - 0.002 * i});
  const auto out = pairwise_wilcoxon(table(rows));
  ASSERT_EQ(out.size(), 3u);
  EXPECT_EQ(out[0].first, 0u);
  EXPECT_EQ(out[0].second, 1u);
  EXPECT_EQ(out[2].first, 1u);
  EXPECT_EQ(out[2].second, 2u);
}

}  // namespace
}  // namespace mbnas
