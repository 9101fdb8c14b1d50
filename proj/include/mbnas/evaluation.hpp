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

#ifndef MBNAS_EVALUATION_HPP_
#define MBNAS_EVALUATION_HPP_

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <set>
#include <span>
#include <thread>
#include <string>
#include <utility>
#include <vector>

#include <unistd.h>

#include <nlohmann/json.hpp>

#include "mbnas/common.hpp"
#include "mbnas/search_space.hpp"

namespace mbnas {

// Validation Dice per epoch for one (fold, seed) training run.
struct Curve {
  int fold = 0;
  int seed = 0;
  std::vector<double> dice;

  friend bool operator==(const Curve&, const Curve&) = default;
};

enum class EvalStatus { kOk, kFailed };

struct EvaluationResult {
  std::string genotype_digest;
  std::vector<Curve> curves;
  std::optional<double> aggregate;  // present iff status == kOk
  EvalStatus status = EvalStatus::kOk;
  std::string reason;
  bool training_started = true;
  double wall_time = 0.0;  // seconds
  std::optional<std::int64_t> params_reported;

  bool ok() const { return status == EvalStatus::kOk; }
  // Fitness seen by the search: failed evaluations never win a comparison.
  double score() const {
    return ok() && aggregate ? *aggregate : -std::numeric_limits<double>::infinity();
  }
};

inline EvaluationResult failed_result(std::string digest, std::string reason,
                                      bool training_started = true) {
  EvaluationResult r;
  r.genotype_digest = std::move(digest);
  r.status = EvalStatus::kFailed;
  r.reason = std::move(reason);
  r.training_started = training_started;
  return r;
}

// Number of trailing epochs that enter the score: ceil(0.2 * E).
inline std::size_t tail_length(std::size_t epochs) { return (epochs + 4) / 5; }

// Mean over curves of the mean of each curve's last ceil(0.2 * E) values.
inline double aggregate_score(std::span<const Curve> curves) {
  if (curves.empty()) throw ProtocolError("aggregate_score: no curves");
  double total = 0.0;
  for (const auto& c : curves) {
    if (c.dice.empty()) throw ProtocolError("aggregate_score: empty curve");
    for (double v : c.dice)
      if (!(v >= 0.0 && v <= 1.0)) throw ProtocolError("aggregate_score: Dice outside [0, 1]");
    const std::size_t tail = tail_length(c.dice.size());
    double sum = 0.0;
    for (std::size_t i = c.dice.size() - tail; i < c.dice.size(); ++i) sum += c.dice[i];
    total += sum / static_cast<double>(tail);
  }
  return total / static_cast<double>(curves.size());
}

// ---------------------------------------------------------------------------
// Training protocol for external workers.

struct AugmentationFlags {
  bool scaling = true;
  bool shifting = true;
  bool rotating = true;
  bool flipping = true;
  bool brightness = true;
};

struct TrainConfig {
  int epochs = 100;
  double learning_rate = 1e-3;
  double lr_decay_exponent = 0.9;
  int batch_size = 32;
  int input_size = 128;
  int folds = 5;
  int seeds = 3;
  std::string dataset_id = "prostate";
  AugmentationFlags augmentation;

  // Epoch budget used for the two reference datasets.
  static TrainConfig for_dataset(const std::string& id) {
    TrainConfig t;
    t.dataset_id = id;
    t.epochs = id == "spleen" ? 50 : 100;
    return t;
  }
};

inline nlohmann::json train_config_to_json(const TrainConfig& t) {
  return {{"epochs", t.epochs},
          {"learning_rate", t.learning_rate},
          {"lr_decay_exponent", t.lr_decay_exponent},
          {"batch_size", t.batch_size},
          {"input_size", t.input_size},
          {"folds", t.folds},
          {"seeds", t.seeds},
          {"dataset_id", t.dataset_id},
          {"augmentation",
           {{"scaling", t.augmentation.scaling},
            {"shifting", t.augmentation.shifting},
            {"rotating", t.augmentation.rotating},
            {"flipping", t.augmentation.flipping},
            {"brightness", t.augmentation.brightness}}}};
}

inline TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig t;
  t.epochs = j.value("epochs", t.epochs);
  t.learning_rate = j.value("learning_rate", t.learning_rate);
  t.lr_decay_exponent = j.value("lr_decay_exponent", t.lr_decay_exponent);
  t.batch_size = j.value("batch_size", t.batch_size);
  t.input_size = j.value("input_size", t.input_size);
  t.folds = j.value("folds", t.folds);
  t.seeds = j.value("seeds", t.seeds);
  t.dataset_id = j.value("dataset_id", t.dataset_id);
  if (j.contains("augmentation")) {
    const auto& a = j["augmentation"];
    t.augmentation.scaling = a.value("scaling", true);
    t.augmentation.shifting = a.value("shifting", true);
    t.augmentation.rotating = a.value("rotating", true);
    t.augmentation.flipping = a.value("flipping", true);
    t.augmentation.brightness = a.value("brightness", true);
  }
  return t;
}

struct EvalJobSpec {
  std::string job_id;
  nlohmann::json ir;  // exported ArchitectureIR document
  TrainConfig train_config;
};

// ---------------------------------------------------------------------------

inline nlohmann::json result_to_json(const EvaluationResult& r) {
  nlohmann::json curves = nlohmann::json::array();
  for (const auto& c : r.curves) curves.push_back({{"fold", c.fold}, {"seed", c.seed}, {"dice", c.dice}});
  nlohmann::json j = {{"genotype_digest", r.genotype_digest},
                      {"curves", curves},
                      {"status", r.ok() ? "ok" : "failed"},
                      {"reason", r.reason},
                      {"training_started", r.training_started},
                      {"wall_time", r.wall_time}};
  j["aggregate"] = r.aggregate ? nlohmann::json(*r.aggregate) : nlohmann::json(nullptr);
  j["params_reported"] = r.params_reported ? nlohmann::json(*r.params_reported) : nlohmann::json(nullptr);
  return j;
}

inline EvaluationResult result_from_json(const nlohmann::json& j) {
  EvaluationResult r;
  r.genotype_digest = j.at("genotype_digest").get<std::string>();
  for (const auto& c : j.at("curves"))
    r.curves.push_back({c.at("fold").get<int>(), c.at("seed").get<int>(),
                        c.at("dice").get<std::vector<double>>()});
  r.status = j.at("status").get<std::string>() == "ok" ? EvalStatus::kOk : EvalStatus::kFailed;
  r.reason = j.at("reason").get<std::string>();
  r.training_started = j.at("training_started").get<bool>();
  r.wall_time = j.at("wall_time").get<double>();
  if (!j.at("aggregate").is_null()) r.aggregate = j["aggregate"].get<double>();
  if (!j.at("params_reported").is_null()) r.params_reported = j["params_reported"].get<std::int64_t>();
  return r;
}

// Fitness source used by the search engine. evaluate() blocks until the
// result is final. Transport failures that never reached training are thrown
// as WorkerError; everything else comes back as a (possibly failed) result.
class Evaluator {
 public:
  virtual ~Evaluator() = default;
  virtual EvaluationResult evaluate(const Genotype& g) = 0;
  // Identifies the fitness definition; part of every cache key.
  virtual std::string config_digest() const = 0;
};

// ---------------------------------------------------------------------------
// Deterministic surrogate fitness.

struct SurrogateConfig {
  std::uint64_t table_seed = 0;
  double utility_scale = 1.0;
  // Weight of pairwise terms between consecutive nodes; 0 gives a separable
  // fitness.
  double interaction_strength = 0.0;
  double noise_amplitude = 0.0;
  int epochs = 10;
  int folds = 5;
  int seeds = 3;
};

inline nlohmann::json surrogate_config_to_json(const SurrogateConfig& s) {
  return {{"table_seed", s.table_seed},     {"utility_scale", s.utility_scale},
          {"interaction_strength", s.interaction_strength},
          {"noise_amplitude", s.noise_amplitude}, {"epochs", s.epochs},
          {"folds", s.folds},               {"seeds", s.seeds}};
}

inline SurrogateConfig surrogate_config_from_json(const nlohmann::json& j) {
  SurrogateConfig s;
  try {
    s.table_seed = j.value("table_seed", s.table_seed);
    s.utility_scale = j.value("utility_scale", s.utility_scale);
    s.interaction_strength = j.value("interaction_strength", s.interaction_strength);
    s.noise_amplitude = j.value("noise_amplitude", s.noise_amplitude);
    s.epochs = j.value("epochs", s.epochs);
    s.folds = j.value("folds", s.folds);
    s.seeds = j.value("seeds", s.seeds);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed surrogate config: ") + e.what());
  }
  if (s.epochs < 1 || s.folds < 1 || s.seeds < 1)
    throw ConfigError("surrogate epochs, folds and seeds must be positive");
  return s;
}

namespace detail {

inline double table_entry(std::uint64_t seed, std::uint64_t a, std::uint64_t b, std::uint64_t c,
                          std::uint64_t d = 0, std::uint64_t e = 0, std::uint64_t f = 0) {
  std::uint64_t h = splitmix64(seed);
  for (std::uint64_t v : {a, b, c, d, e, f}) h = hash_combine(h, v);
  return 2.0 * unit_interval(h) - 1.0;
}

// Non-negative key of a variable value, stable across spaces.
inline std::uint64_t value_key(const NodeGene& n, Variable v) {
  return static_cast<std::uint64_t>(detail::encode_value(n, v) + 1);
}

}  // namespace detail

// Pre-noise logit of the surrogate. Per-(node, variable, value) utilities in
// [-1, 1] scaled by utility_scale / sqrt(#variables), plus optional
// interaction terms between each pair of variables of consecutive nodes.
inline double surrogate_logit(const Genotype& g, const SurrogateConfig& s) {
  const std::size_t n = g.size();
  if (n == 0) return 0.0;
  double sum = 0.0;
  for (std::size_t l = 0; l < n; ++l)
    for (auto v : kAllVariables)
      sum += detail::table_entry(s.table_seed, 1, l, static_cast<std::uint64_t>(v),
                                 detail::value_key(g.nodes[l], v));
  double logit = s.utility_scale * sum / std::sqrt(4.0 * static_cast<double>(n));
  if (s.interaction_strength != 0.0 && n > 1) {
    double inter = 0.0;
    for (std::size_t l = 0; l + 1 < n; ++l)
      for (auto v : kAllVariables)
        for (auto w : kAllVariables)
          inter += detail::table_entry(s.table_seed, 2, l, static_cast<std::uint64_t>(v),
                                       detail::value_key(g.nodes[l], v),
                                       static_cast<std::uint64_t>(w),
                                       detail::value_key(g.nodes[l + 1], w));
    logit += s.interaction_strength * inter / std::sqrt(16.0 * static_cast<double>(n - 1));
  }
  return logit;
}

inline double squash(double logit) { return 1.0 / (1.0 + std::exp(-logit)); }

// Curves whose aggregate is `fitness`: each curve ramps up and then holds a
// tail of fitness +/- a small per-curve offset, with offsets cancelling
// in pairs.
inline std::vector<Curve> synthesize_curves(double fitness, int epochs, int folds, int seeds) {
  std::vector<Curve> curves;
  const int count = folds * seeds;
  const double spread = std::min({0.01, fitness, 1.0 - fitness});
  const std::size_t tail = tail_length(static_cast<std::size_t>(epochs));
  const std::size_t head = static_cast<std::size_t>(epochs) - tail;
  for (int f = 0; f < folds; ++f) {
    for (int s = 0; s < seeds; ++s) {
      const int idx = f * seeds + s;
      double offset = 0.0;
      if (!(count % 2 == 1 && idx == count - 1)) offset = idx % 2 == 0 ? spread : -spread;
      const double level = fitness + offset;
      Curve c{f, s, {}};
      for (std::size_t e = 0; e < head; ++e)
        c.dice.push_back(level * (1.0 - std::exp(-3.0 * static_cast<double>(e + 1) /
                                                  static_cast<double>(head + 1))));
      c.dice.insert(c.dice.end(), tail, level);
      curves.push_back(std::move(c));
    }
  }
  return curves;
}

inline EvaluationResult surrogate_evaluate(const Genotype& g, const SurrogateConfig& s,
                                           std::uint64_t rng_seed) {
  double fitness = squash(surrogate_logit(g, s));
  const std::string digest = genotype_digest(g);
  if (s.noise_amplitude != 0.0) {
    const std::uint64_t h = detail::hash_combine(detail::splitmix64(rng_seed), detail::fnv1a64(digest));
    fitness += s.noise_amplitude * (2.0 * detail::unit_interval(h) - 1.0);
    fitness = std::clamp(fitness, 0.0, 1.0);
  }
  EvaluationResult r;
  r.genotype_digest = digest;
  r.curves = synthesize_curves(fitness, std::max(1, s.epochs), std::max(1, s.folds),
                               std::max(1, s.seeds));
  r.aggregate = aggregate_score(r.curves);
  r.status = EvalStatus::kOk;
  return r;
}

class SurrogateEvaluator : public Evaluator {
 public:
  explicit SurrogateEvaluator(SurrogateConfig config, std::uint64_t rng_seed = 0)
      : config_(config), rng_seed_(rng_seed) {}

  EvaluationResult evaluate(const Genotype& g) override {
    ++calls_;
    return surrogate_evaluate(g, config_, rng_seed_);
  }

  std::string config_digest() const override {
    auto j = surrogate_config_to_json(config_);
    j["rng_seed"] = rng_seed_;
    return detail::digest_of(j.dump());
  }

  const SurrogateConfig& config() const { return config_; }
  std::size_t calls() const { return calls_; }

 private:
  SurrogateConfig config_;
  std::uint64_t rng_seed_;
  std::size_t calls_ = 0;
};

// ---------------------------------------------------------------------------
// Persistent result cache: one JSON file per (genotype digest, config digest).
// Writes go through a temporary file and rename, so concurrent writers of the
// same key leave one complete entry behind.

class ResultCache {
 public:
  explicit ResultCache(std::filesystem::path dir) : dir_(std::move(dir)) {
    std::filesystem::create_directories(dir_);
  }

  std::optional<EvaluationResult> lookup(const std::string& genotype_digest,
                                         const std::string& config_digest) const {
    const auto path = entry_path(genotype_digest, config_digest);
    std::ifstream in(path);
    if (!in) return std::nullopt;
    try {
      const auto j = nlohmann::json::parse(in);
      if (j.at("config_digest").get<std::string>() != config_digest) return std::nullopt;
      auto r = result_from_json(j.at("result"));
      if (r.genotype_digest != genotype_digest) return std::nullopt;
      return r;
    } catch (const std::exception& e) {
      std::cerr << "warning: ignoring corrupted cache entry " << path << ": " << e.what() << "\n";
      return std::nullopt;
    }
  }

  void store(const EvaluationResult& r, const std::string& config_digest) const {
    const auto path = entry_path(r.genotype_digest, config_digest);
    const nlohmann::json doc = {{"config_digest", config_digest}, {"result", result_to_json(r)}};
    static std::atomic<std::uint64_t> counter{0};
    auto tmp = path;
    tmp += ".tmp." + std::to_string(::getpid()) + "." +
           std::to_string(std::hash<std::thread::id>{}(std::this_thread::get_id())) + "." +
           std::to_string(counter++);
    {
      std::ofstream out(tmp);
      out << doc.dump();
    }
    std::filesystem::rename(tmp, path);
  }

  const std::filesystem::path& dir() const { return dir_; }

 private:
  std::filesystem::path entry_path(const std::string& g, const std::string& c) const {
    return dir_ / (g + "_" + c + ".json");
  }
  std::filesystem::path dir_;
};

// Serves repeated genotypes from a ResultCache. Only completed evaluations
// (ok, or failed after training started) are stored.
class CachingEvaluator : public Evaluator {
 public:
  CachingEvaluator(Evaluator& inner, const ResultCache& cache) : inner_(inner), cache_(cache) {}

  EvaluationResult evaluate(const Genotype& g) override {
    const std::string digest = genotype_digest(g);
    const std::string config = inner_.config_digest();
    if (auto hit = cache_.lookup(digest, config)) {
      ++hits_;
      return *hit;
    }
    auto r = inner_.evaluate(g);
    if (r.ok() || r.training_started) cache_.store(r, config);
    return r;
  }

  std::string config_digest() const override { return inner_.config_digest(); }
  std::size_t hits() const { return hits_; }

 private:
  Evaluator& inner_;
  const ResultCache& cache_;
  std::size_t hits_ = 0;
};

}  // namespace mbnas

#endif  // MBNAS_EVALUATION_HPP_
