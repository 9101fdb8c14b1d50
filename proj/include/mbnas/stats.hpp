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

// Rank-based significance tests for comparing models over repeated runs.

#ifndef MBNAS_STATS_HPP_
#define MBNAS_STATS_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>

namespace mbnas {

class StatsError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Rows are measurement blocks (fold x seed), columns are models.
struct ScoreTable {
  std::vector<std::string> models;
  std::vector<std::vector<double>> rows;

  std::size_t num_models() const { return models.size(); }
  std::size_t num_rows() const { return rows.size(); }

  void check() const {
    for (const auto& r : rows)
      if (r.size() != models.size()) throw StatsError("score table is not rectangular");
    for (const auto& r : rows)
      for (double v : r)
        if (!std::isfinite(v)) throw StatsError("score table has a missing entry");
  }

  std::vector<double> column(std::size_t j) const {
    std::vector<double> out;
    out.reserve(rows.size());
    for (const auto& r : rows) out.push_back(r.at(j));
    return out;
  }
};

// 1-based ranks, ties get their average rank. `tie_term` accumulates
// sum(t^3 - t) over tie groups.
inline std::vector<double> average_ranks(std::span<const double> values, double* tie_term = nullptr) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i + 1;
    while (j < n && values[order[j]] == values[order[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) ranks[order[k]] = avg;
    if (tie_term) {
      const double t = static_cast<double>(j - i);
      *tie_term += t * t * t - t;
    }
    i = j;
  }
  return ranks;
}

struct FriedmanResult {
  double statistic = 0.0;
  int degrees_of_freedom = 0;
  double p_value = 1.0;
  std::vector<double> mean_ranks;
};

inline FriedmanResult friedman_test(const ScoreTable& table) {
  table.check();
  const std::size_t k = table.num_models();
  const std::size_t n = table.num_rows();
  if (k < 2) throw StatsError("Friedman test needs at least 2 models");
  if (n < 2) throw StatsError("Friedman test needs at least 2 rows");
  std::vector<double> rank_sums(k, 0.0);
  double ties = 0.0;
  for (const auto& row : table.rows) {
    const auto r = average_ranks(row, &ties);
    for (std::size_t j = 0; j < k; ++j) rank_sums[j] += r[j];
  }
  const double nd = static_cast<double>(n), kd = static_cast<double>(k);
  double ssq = 0.0;
  for (double s : rank_sums) ssq += s * s;
  FriedmanResult out;
  out.degrees_of_freedom = static_cast<int>(k - 1);
  for (double s : rank_sums) out.mean_ranks.push_back(s / nd);
  const double correction = 1.0 - ties / (nd * (kd * kd * kd - kd));
  if (correction <= 0.0) return out;  // every row fully tied
  const double raw = 12.0 / (nd * kd * (kd + 1.0)) * ssq - 3.0 * nd * (kd + 1.0);
  out.statistic = std::max(0.0, raw / correction);
  boost::math::chi_squared dist(static_cast<double>(out.degrees_of_freedom));
  out.p_value = out.statistic > 0.0 ? boost::math::cdf(boost::math::complement(dist, out.statistic))
                                    : 1.0;
  return out;
}

struct WilcoxonResult {
  double statistic = 0.0;  // min(W+, W-)
  double w_plus = 0.0;
  double w_minus = 0.0;
  int n = 0;  // nonzero differences
  bool exact = false;
  double z = std::numeric_limits<double>::quiet_NaN();
  double p_value = 1.0;
};

inline constexpr int kWilcoxonExactLimit = 25;

// Two-sided signed-rank test on paired scores.
inline WilcoxonResult wilcoxon_signed_rank(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw StatsError("paired samples differ in length");
  std::vector<double> diffs;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = x[i] - y[i];
    if (!std::isfinite(d)) throw StatsError("paired samples contain a non-finite value");
    if (d != 0.0) diffs.push_back(d);
  }
  if (diffs.empty()) throw StatsError("all paired differences are zero");
  if (diffs.size() < 5)
    throw StatsError("need at least 5 nonzero paired differences, got " +
                     std::to_string(diffs.size()));
  std::vector<double> mags;
  for (double d : diffs) mags.push_back(std::fabs(d));
  double ties = 0.0;
  const auto ranks = average_ranks(mags, &ties);

  WilcoxonResult out;
  out.n = static_cast<int>(diffs.size());
  for (std::size_t i = 0; i < diffs.size(); ++i)
    (diffs[i] > 0 ? out.w_plus : out.w_minus) += ranks[i];
  out.statistic = std::min(out.w_plus, out.w_minus);
  const double nd = static_cast<double>(out.n);

  if (out.n <= kWilcoxonExactLimit) {
    // Null distribution of W+ over all sign assignments of the observed
    // (possibly tied) ranks. Doubled ranks are integers.
    out.exact = true;
    std::vector<int> doubled;
    int total = 0;
    for (double r : ranks) {
      doubled.push_back(static_cast<int>(std::lround(2.0 * r)));
      total += doubled.back();
    }
    std::vector<double> ways(static_cast<std::size_t>(total) + 1, 0.0);
    ways[0] = 1.0;
    int reach = 0;
    for (int r : doubled) {
      for (int s = reach; s >= 0; --s)
        if (ways[s] != 0.0) ways[s + r] += ways[s];
      reach += r;
    }
    const int observed = static_cast<int>(std::lround(2.0 * out.statistic));
    double tail = 0.0;
    for (int s = 0; s <= observed; ++s) tail += ways[s];
    out.p_value = std::min(1.0, 2.0 * tail / std::ldexp(1.0, out.n));
    return out;
  }

  const double mean = nd * (nd + 1.0) / 4.0;
  const double var = nd * (nd + 1.0) * (2.0 * nd + 1.0) / 24.0 - ties / 48.0;
  if (var <= 0.0) throw StatsError("signed-rank variance is zero");
  const double dev = std::max(0.0, std::fabs(out.statistic - mean) - 0.5);
  out.z = -dev / std::sqrt(var);
  boost::math::normal stdnorm;
  out.p_value = std::min(1.0, 2.0 * boost::math::cdf(stdnorm, out.z));
  return out;
}

struct PairwiseComparison {
  std::size_t first = 0;
  std::size_t second = 0;
  WilcoxonResult result;
};

inline std::vector<PairwiseComparison> pairwise_wilcoxon(const ScoreTable& table) {
  table.check();
  std::vector<PairwiseComparison> out;
  for (std::size_t a = 0; a < table.num_models(); ++a) {
    const auto ca = table.column(a);
    for (std::size_t b = a + 1; b < table.num_models(); ++b) {
      const auto cb = table.column(b);
      out.push_back({a, b, wilcoxon_signed_rank(ca, cb)});
    }
  }
  return out;
}

}  // namespace mbnas

#endif  // MBNAS_STATS_HPP_
