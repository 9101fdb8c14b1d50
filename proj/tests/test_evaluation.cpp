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

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <random>
#include <thread>

#include "mbnas/evaluation.hpp"
#include "oracles.hpp"

namespace mbnas {
namespace {

namespace fs = std::filesystem;

fs::path temp_dir(const std::string& name) {
  auto p = fs::temp_directory_path() / ("mbnas_eval_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

TEST(Aggregate, HandBuiltFixtures) {
  const std::vector<Curve> five = {{0, 0, {0.5, 0.6, 0.7, 0.8, 0.9}}};
  EXPECT_DOUBLE_EQ(aggregate_score(five), 0.9);
  const std::vector<Curve> ten = {{0, 0, {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.75, 0.8, 0.9}}};
  EXPECT_DOUBLE_EQ(aggregate_score(ten), (0.8 + 0.9) / 2);
  const std::vector<Curve> two = {{0, 0, {0.1, 0.6}}, {1, 0, {0.2, 0.8}}};
  // Two epochs: the tail is ceil(0.4) = 1 entry.
  EXPECT_DOUBLE_EQ(aggregate_score(two), 0.7);
}

TEST(Aggregate, TailLengthIsCeilingOfFifth) {
  EXPECT_EQ(tail_length(1), 1u);
  EXPECT_EQ(tail_length(5), 1u);
  EXPECT_EQ(tail_length(6), 2u);
  EXPECT_EQ(tail_length(50), 10u);
  EXPECT_EQ(tail_length(100), 20u);
  EXPECT_EQ(tail_length(101), 21u);
}

TEST(Aggregate, PaperScaleProtocol) {
  // 5 folds x 3 seeds, 100 epochs: only epochs 81..100 enter.
  std::vector<Curve> curves;
  double want = 0.0;
  for (int f = 0; f < 5; ++f)
    for (int s = 0; s < 3; ++s) {
      Curve c{f, s, std::vector<double>(100, 0.0)};
      double tail = 0.0;
      for (int e = 0; e < 100; ++e) {
        c.dice[e] = (e * 7 + f * 3 + s) % 97 / 100.0;
        if (e >= 80) tail += c.dice[e];
      }
      want += tail / 20.0;
      curves.push_back(c);
    }
  EXPECT_DOUBLE_EQ(aggregate_score(curves), want / 15.0);
}

TEST(Aggregate, ConstantCurvesGiveTheConstant) {
  for (double v : {0.0, 0.3, 0.77, 1.0}) {
    std::vector<Curve> curves = {{0, 0, std::vector<double>(7, v)}, {1, 0, std::vector<double>(13, v)}};
    EXPECT_EQ(aggregate_score(curves), v);
  }
}

TEST(Aggregate, PermutationOfCurvesOnly) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<Curve> curves;
  for (int i = 0; i < 6; ++i) {
    Curve c{i, 0, {}};
    for (int e = 0; e < 10; ++e) c.dice.push_back(u(rng));
    curves.push_back(c);
  }
  const double a = aggregate_score(curves);
  auto shuffled = curves;
  std::reverse(shuffled.begin(), shuffled.end());
  EXPECT_NEAR(aggregate_score(shuffled), a, 1e-15);
  auto reordered = curves;
  std::reverse(reordered[0].dice.begin(), reordered[0].dice.end());
  EXPECT_NE(aggregate_score(reordered), a);
}

TEST(Aggregate, RejectsBadInput) {
  EXPECT_THROW(aggregate_score(std::vector<Curve>{}), ProtocolError);
  EXPECT_THROW(aggregate_score(std::vector<Curve>{{0, 0, {}}}), ProtocolError);
  EXPECT_THROW(aggregate_score(std::vector<Curve>{{0, 0, {0.5, 1.2}}}), ProtocolError);
}

TEST(TrainConfig, Defaults) {
  const auto p = TrainConfig::for_dataset("prostate");
  EXPECT_EQ(p.epochs, 100);
  EXPECT_EQ(TrainConfig::for_dataset("spleen").epochs, 50);
  EXPECT_EQ(p.learning_rate, 1e-3);
  EXPECT_EQ(p.lr_decay_exponent, 0.9);
  EXPECT_EQ(p.batch_size, 32);
  EXPECT_EQ(p.input_size, 128);
  EXPECT_EQ(p.folds, 5);
  EXPECT_EQ(p.seeds, 3);
  const auto back = train_config_from_json(train_config_to_json(p));
  EXPECT_EQ(train_config_to_json(back), train_config_to_json(p));
}

TEST(Surrogate, DeterministicWithoutNoise) {
  SpaceConfig c;
  SurrogateConfig s;
  s.interaction_strength = 0.5;
  const auto g = random_genotype(c, 2);
  const auto a = surrogate_evaluate(g, s, 1);
  const auto b = surrogate_evaluate(g, s, 99);
  EXPECT_EQ(result_to_json(a), result_to_json(b));
  EXPECT_TRUE(a.ok());
  EXPECT_EQ(a.curves.size(), 15u);
}

TEST(Surrogate, AggregateEqualsFitness) {
  SpaceConfig c;
  SurrogateConfig s;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto g = random_genotype(c, seed);
    const auto r = surrogate_evaluate(g, s, 0);
    EXPECT_NEAR(*r.aggregate, squash(surrogate_logit(g, s)), 1e-12);
    for (const auto& curve : r.curves)
      for (double v : curve.dice) EXPECT_TRUE(v >= 0.0 && v <= 1.0);
  }
}

TEST(Surrogate, NoiseIsSeeded) {
  SpaceConfig c;
  SurrogateConfig s;
  s.noise_amplitude = 0.05;
  const auto g = random_genotype(c, 2);
  EXPECT_EQ(*surrogate_evaluate(g, s, 7).aggregate, *surrogate_evaluate(g, s, 7).aggregate);
  EXPECT_NE(*surrogate_evaluate(g, s, 7).aggregate, *surrogate_evaluate(g, s, 8).aggregate);
  SurrogateConfig quiet;
  EXPECT_LE(std::fabs(*surrogate_evaluate(g, s, 7).aggregate - *surrogate_evaluate(g, quiet, 7).aggregate),
            0.05 + 1e-12);
}

TEST(Surrogate, ZeroUtilitiesGiveSquashOfZero) {
  SpaceConfig c;
  SurrogateConfig s;
  s.utility_scale = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed)
    EXPECT_DOUBLE_EQ(*surrogate_evaluate(random_genotype(c, seed), s, 0).aggregate, 0.5);
}

TEST(Surrogate, SeparableArgmaxIsPerVariableComposition) {
  // Three Same nodes: every variable ranges over its own domain independently.
  SpaceConfig c;
  c.num_nodes = 3;
  c.max_levels = 0;
  for (std::uint64_t table = 0; table < 5; ++table) {
    SurrogateConfig s;
    s.table_seed = table;
    const auto all = oracle::enumerate_valid(c);
    const Genotype* best = nullptr;
    double best_logit = -1e300;
    for (const auto& g : all) {
      const double l = surrogate_logit(g, s);
      if (l > best_logit) {
        best_logit = l;
        best = &g;
      }
    }
    Genotype composed = all.front();
    for (int node = 0; node < 3; ++node) {
      for (auto var : kAllVariables) {
        const auto opts = variable_options(composed, node, var, c);
        int arg = opts.front();
        double top = -1e300;
        for (int v : opts) {
          const double l = surrogate_logit(with_value(composed, node, var, v), s);
          if (l > top) {
            top = l;
            arg = v;
          }
        }
        composed = with_value(composed, node, var, arg);
      }
    }
    EXPECT_EQ(composed, *best) << "table " << table;
  }
}

TEST(ResultJson, RoundTrip) {
  SpaceConfig c;
  auto r = surrogate_evaluate(random_genotype(c, 1), SurrogateConfig{}, 0);
  r.params_reported = 1234;
  r.wall_time = 1.5;
  const auto back = result_from_json(nlohmann::json::parse(result_to_json(r).dump()));
  EXPECT_EQ(result_to_json(back), result_to_json(r));
  const auto failed = failed_result("abc", "worker-timeout");
  EXPECT_FALSE(failed.ok());
  EXPECT_EQ(failed.score(), -std::numeric_limits<double>::infinity());
  EXPECT_EQ(result_to_json(result_from_json(result_to_json(failed))), result_to_json(failed));
}

TEST(Cache, StoreLookupAndMiss) {
  const auto dir = temp_dir("cache");
  ResultCache cache(dir);
  SpaceConfig c;
  const auto r = surrogate_evaluate(random_genotype(c, 1), SurrogateConfig{}, 0);
  EXPECT_FALSE(cache.lookup(r.genotype_digest, "cfg").has_value());
  cache.store(r, "cfg");
  cache.store(r, "cfg");
  const auto hit = cache.lookup(r.genotype_digest, "cfg");
  ASSERT_TRUE(hit.has_value());
  EXPECT_EQ(result_to_json(*hit), result_to_json(r));
  EXPECT_FALSE(cache.lookup(r.genotype_digest, "other").has_value());
  EXPECT_FALSE(cache.lookup("unknown", "cfg").has_value());
  fs::remove_all(dir);
}

TEST(Cache, IndependentEntriesPerConfig) {
  const auto dir = temp_dir("cfgs");
  ResultCache cache(dir);
  SpaceConfig c;
  const auto g = random_genotype(c, 1);
  SurrogateConfig a, b;
  b.table_seed = 5;
  cache.store(surrogate_evaluate(g, a, 0), "A");
  cache.store(surrogate_evaluate(g, b, 0), "B");
  EXPECT_NE(*cache.lookup(genotype_digest(g), "A")->aggregate, *cache.lookup(genotype_digest(g), "B")->aggregate);
  fs::remove_all(dir);
}

TEST(Cache, CorruptEntryIsAMiss) {
  const auto dir = temp_dir("corrupt");
  ResultCache cache(dir);
  SpaceConfig c;
  const auto r = surrogate_evaluate(random_genotype(c, 1), SurrogateConfig{}, 0);
  cache.store(r, "cfg");
  for (const auto& e : fs::directory_iterator(dir)) std::ofstream(e.path()) << "{\"trunc";
  testing::internal::CaptureStderr();
  EXPECT_FALSE(cache.lookup(r.genotype_digest, "cfg").has_value());
  EXPECT_NE(testing::internal::GetCapturedStderr().find("warning"), std::string::npos);
  fs::remove_all(dir);
}

TEST(Cache, ConcurrentWritersLeaveOneCompleteEntry) {
  const auto dir = temp_dir("concurrent");
  ResultCache cache(dir);
  SpaceConfig c;
  const auto r = surrogate_evaluate(random_genotype(c, 1), SurrogateConfig{}, 0);
  std::vector<std::thread> threads;
  for (int t = 0; t < 8; ++t)
    threads.emplace_back([&] {
      for (int i = 0; i < 50; ++i) {
        cache.store(r, "cfg");
        auto hit = cache.lookup(r.genotype_digest, "cfg");
        if (hit) {
          EXPECT_EQ(hit->aggregate, r.aggregate);
        }
      }
    });
  for (auto& t : threads) t.join();
  int files = 0;
  for (const auto& e : fs::directory_iterator(dir)) {
    (void)e;
    ++files;
  }
  EXPECT_EQ(files, 1);
  fs::remove_all(dir);
}

class ScriptedEvaluator : public Evaluator {
 public:
  EvaluationResult evaluate(const Genotype& g) override {
    ++calls;
    if (fail_unstarted) return failed_result(genotype_digest(g), "no worker", false);
    return surrogate_evaluate(g, SurrogateConfig{}, 0);
  }
  std::string config_digest() const override { return "scripted"; }
  int calls = 0;
  bool fail_unstarted = false;
};

TEST(CachingEvaluator, ServesRepeatsAndSkipsUnstartedFailures) {
  const auto dir = temp_dir("caching");
  ResultCache cache(dir);
  ScriptedEvaluator inner;
  CachingEvaluator eval(inner, cache);
  SpaceConfig c;
  const auto g = random_genotype(c, 3);
  const auto a = eval.evaluate(g);
  const auto b = eval.evaluate(g);
  EXPECT_EQ(inner.calls, 1);
  EXPECT_EQ(eval.hits(), 1u);
  EXPECT_EQ(a.aggregate, b.aggregate);
  inner.fail_unstarted = true;
  const auto h = random_genotype(c, 4);
  eval.evaluate(h);
  eval.evaluate(h);
  EXPECT_EQ(inner.calls, 3);
  fs::remove_all(dir);
}

}  // namespace
}  // namespace mbnas
