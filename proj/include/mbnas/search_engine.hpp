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

// Budgeted architecture search: first-improvement local search, a random
// search baseline and two-stage (topology, then kernel size) bilevel search.
//
// Local search walks the (node, variable) pairs in a shuffled order. For
// each pair it scores every admissible alternative value and moves to the
// best one if it strictly beats the incumbent, then continues with the next
// pair. Every pass reshuffles. A pass without any accepted move ends the
// search; so does running out of budget.
//
// Evaluated genotypes are memoised per run, so a genotype costs budget at
// most once. Events are handed to the sink one probe batch at a time, after
// the batch's acceptance decision, which keeps the log append-only.

#ifndef MBNAS_SEARCH_ENGINE_HPP_
#define MBNAS_SEARCH_ENGINE_HPP_

#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "mbnas/common.hpp"
#include "mbnas/evaluation.hpp"
#include "mbnas/search_space.hpp"

namespace mbnas {

class ResumeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class ProbeKind { kInit, kProbe, kSample };

struct TraceEvent {
  enum class Kind { kEvaluation, kError } kind = Kind::kEvaluation;
  int step = 0;   // 1-based evaluation count; errors carry the count so far
  int stage = 0;  // 0 for single-stage searches, 1 / 2 for bilevel
  std::string genotype_digest;
  Genotype genotype;
  double score = -std::numeric_limits<double>::infinity();
  bool ok = true;
  bool accepted = false;
  ProbeKind probe = ProbeKind::kInit;
  int probe_node = 0;  // 1-based, for kProbe
  Variable probe_variable = Variable::kChannelMove;
  std::string message;

  bool is_evaluation() const { return kind == Kind::kEvaluation; }
};

enum class Termination { kConverged, kBudget, kError, kExhausted, kStageFailed };

inline std::string_view to_string(Termination t) {
  switch (t) {
    case Termination::kConverged: return "converged";
    case Termination::kBudget: return "budget";
    case Termination::kError: return "error";
    case Termination::kExhausted: return "exhausted";
    case Termination::kStageFailed: return "stage-failed";
  }
  return "?";
}

struct SearchTrace {
  std::string algorithm;
  std::string config_digest;
  std::uint64_t rng_seed = 0;
  int budget = 0;
  std::vector<TraceEvent> events;
  std::optional<Genotype> best_genotype;
  double best_score = -std::numeric_limits<double>::infinity();
  int budget_used = 0;
  Termination termination = Termination::kBudget;
  // False when the search stopped on an error before finishing its plan.
  bool complete = true;
  int stage1_budget = 0;  // bilevel only

  std::size_t evaluation_count() const {
    std::size_t n = 0;
    for (const auto& e : events) n += e.is_evaluation();
    return n;
  }
};

using TraceSink = std::function<void(std::span<const TraceEvent>)>;

struct SearchOptions {
  // Events of an interrupted run with the same inputs. They are replayed in
  // order instead of calling the evaluator; any divergence throws ResumeError.
  std::vector<TraceEvent> replay;
  // Receives newly produced (non-replayed) events.
  TraceSink sink;
};

namespace detail {

class SearchContext {
 public:
  SearchContext(Evaluator& evaluator, int budget, SearchOptions options, SearchTrace& trace)
      : evaluator_(evaluator), limit_(budget), options_(std::move(options)), trace_(trace) {
    for (auto& e : options_.replay) {
      if (e.is_evaluation()) {
        replay_.push_back(e);
      } else if (!e.genotype_digest.empty()) {
        replay_unstarted_.insert(e.genotype_digest);
      }
    }
  }

  struct Outcome {
    double score;
    bool evaluated;  // false for a memo hit or a job that never started
  };

  bool budget_left() const { return used() < limit_; }
  void set_limit(int limit) { limit_ = limit; }
  int used() const { return trace_.budget_used + pending_evals(); }
  void set_stage(int stage) { stage_ = stage; }

  std::optional<double> cached(const std::string& digest) const {
    auto it = memo_.find(digest);
    if (it == memo_.end()) return std::nullopt;
    return it->second;
  }

  // Scores `g`, from the memo if possible. Returns nullopt when the budget is
  // spent. WorkerError propagates after an error event has been logged.
  std::optional<Outcome> score(const Genotype& g, ProbeKind probe, int node = 0,
                               Variable var = Variable::kChannelMove) {
    const std::string digest = genotype_digest(g);
    if (auto hit = cached(digest)) return Outcome{*hit, false};
    if (!budget_left()) return std::nullopt;

    TraceEvent ev;
    ev.step = used() + 1;
    ev.stage = stage_;
    ev.genotype_digest = digest;
    ev.genotype = g;
    ev.probe = probe;
    ev.probe_node = node + 1;
    ev.probe_variable = var;

    const bool replaying = replay_cursor_ < replay_.size();
    if (replaying && replay_unstarted_.count(digest) &&
        replay_[replay_cursor_].genotype_digest != digest) {
      record_unstarted(g, digest, "job did not start (replayed)", true);
      return Outcome{-std::numeric_limits<double>::infinity(), false};
    }
    if (replaying) {
      const TraceEvent& prior = replay_[replay_cursor_++];
      if (prior.genotype_digest != digest || prior.step != ev.step)
        throw ResumeError("trace diverges from replay at step " + std::to_string(ev.step));
      ev.score = prior.score;
      ev.ok = prior.ok;
      ev.message = prior.message;
      replayed_.push_back(true);
    } else {
      EvaluationResult r;
      try {
        r = evaluator_.evaluate(g);
      } catch (const WorkerError& e) {
        log_error(e.what());
        throw;
      }
      if (!r.ok() && !r.training_started) {
        record_unstarted(g, digest, r.reason, false);
        return Outcome{-std::numeric_limits<double>::infinity(), false};
      }
      ev.score = r.score();
      ev.ok = r.ok();
      ev.message = r.reason;
      replayed_.push_back(false);
    }
    memo_[digest] = ev.score;
    pending_.push_back(std::move(ev));
    return Outcome{pending_.back().score, true};
  }

  void accept(const std::string& digest) {
    for (auto& e : pending_)
      if (e.is_evaluation() && e.genotype_digest == digest) e.accepted = true;
  }

  // Commits the pending batch to the trace and hands new events to the sink.
  void flush() {
    std::vector<TraceEvent> fresh;
    for (std::size_t i = 0; i < pending_.size(); ++i) {
      TraceEvent& e = pending_[i];
      if (replayed_[i]) {
        if (e.is_evaluation()) {
          const TraceEvent& prior = replay_[replay_checked_++];
          if (prior.accepted != e.accepted)
            throw ResumeError("replayed acceptance differs at step " + std::to_string(e.step));
        }
      } else {
        fresh.push_back(e);
      }
      if (e.is_evaluation()) {
        ++trace_.budget_used;
        if (!trace_.best_genotype || e.score > trace_.best_score) {
          trace_.best_score = e.score;
          trace_.best_genotype = e.genotype;
        }
      }
      trace_.events.push_back(std::move(e));
    }
    pending_.clear();
    replayed_.clear();
    if (options_.sink && !fresh.empty()) options_.sink(fresh);
  }

  void log_error(const std::string& message) {
    // Pending evaluations of the unfinished batch are dropped: their
    // acceptance was never decided.
    for (const auto& e : pending_) memo_.erase(e.genotype_digest);
    pending_.clear();
    replayed_.clear();
    replay_cursor_ = replay_checked_;
    TraceEvent err;
    err.kind = TraceEvent::Kind::kError;
    err.step = trace_.budget_used;
    err.stage = stage_;
    err.ok = false;
    err.message = message;
    trace_.events.push_back(err);
    trace_.complete = false;
    trace_.termination = Termination::kError;
    if (options_.sink) options_.sink(std::span<const TraceEvent>(&trace_.events.back(), 1));
  }

 private:
  void record_unstarted(const Genotype& g, const std::string& digest, const std::string& reason,
                        bool replayed) {
    memo_[digest] = -std::numeric_limits<double>::infinity();
    TraceEvent err;
    err.kind = TraceEvent::Kind::kError;
    err.step = used();
    err.stage = stage_;
    err.genotype_digest = digest;
    err.genotype = g;
    err.ok = false;
    err.message = reason;
    pending_.push_back(std::move(err));
    replayed_.push_back(replayed);
  }

  int pending_evals() const {
    int n = 0;
    for (const auto& e : pending_) n += e.is_evaluation();
    return n;
  }

  Evaluator& evaluator_;
  int limit_;
  SearchOptions options_;
  SearchTrace& trace_;
  int stage_ = 0;
  std::map<std::string, double> memo_;
  std::vector<TraceEvent> pending_;
  std::vector<bool> replayed_;
  std::vector<TraceEvent> replay_;
  std::set<std::string> replay_unstarted_;
  std::size_t replay_cursor_ = 0;
  std::size_t replay_checked_ = 0;
};

inline std::mt19937_64 order_rng(std::uint64_t seed) {
  return std::mt19937_64(splitmix64(seed ^ 0x6c6f63616c5f6c73ULL));
}

// Runs local search from `start` inside an existing context. `start_score`
// skips the initial evaluation when the start is already scored.
inline void run_local_search(SearchContext& ctx, SearchTrace& trace, const SpaceConfig& space,
                             Genotype start, std::optional<double> start_score,
                             std::uint64_t seed) {
  Genotype incumbent = std::move(start);
  double incumbent_score;
  if (start_score) {
    incumbent_score = *start_score;
  } else {
    auto init = ctx.score(incumbent, ProbeKind::kInit);
    if (!init) {
      trace.complete = false;
      trace.termination = Termination::kBudget;
      return;
    }
    incumbent_score = init->score;
    ctx.accept(genotype_digest(incumbent));
    ctx.flush();
  }

  std::vector<std::pair<int, Variable>> pairs;
  for (int node = 0; node < space.num_nodes; ++node)
    for (auto v : kAllVariables) pairs.emplace_back(node, v);
  auto rng = order_rng(seed);

  for (;;) {
    shuffle(pairs, rng);
    bool moved = false;
    for (const auto& [node, var] : pairs) {
      const int current = get_value(incumbent, node, var);
      std::optional<Genotype> best;
      double best_score = incumbent_score;
      bool out_of_budget = false;
      for (int value : variable_options(incumbent, node, var, space)) {
        if (value == current) continue;
        Genotype candidate = with_value(incumbent, node, var, value);
        auto outcome = ctx.score(candidate, ProbeKind::kProbe, node, var);
        if (!outcome) {
          out_of_budget = true;
          break;
        }
        if (outcome->score > best_score) {
          best_score = outcome->score;
          best = std::move(candidate);
        }
      }
      if (best) {
        ctx.accept(genotype_digest(*best));
        incumbent = std::move(*best);
        incumbent_score = best_score;
        moved = true;
      }
      ctx.flush();
      if (out_of_budget) {
        trace.termination = Termination::kBudget;
        return;
      }
    }
    if (!moved) {
      trace.termination = Termination::kConverged;
      return;
    }
  }
}

inline SearchTrace new_trace(const std::string& algorithm, const SpaceConfig& space, int budget,
                             std::uint64_t seed) {
  if (budget < 1) throw std::invalid_argument("search budget must be at least 1");
  check_config(space);
  SearchTrace t;
  t.algorithm = algorithm;
  t.config_digest = config_digest(space);
  t.rng_seed = seed;
  t.budget = budget;
  return t;
}

}  // namespace detail

inline SearchTrace local_search(const SpaceConfig& space, Evaluator& evaluator, int budget,
                                std::uint64_t rng_seed, SearchOptions options = {}) {
  SearchTrace trace = detail::new_trace("local", space, budget, rng_seed);
  detail::SearchContext ctx(evaluator, budget, std::move(options), trace);
  try {
    detail::run_local_search(ctx, trace, space, random_genotype(space, rng_seed), std::nullopt,
                             rng_seed);
  } catch (const WorkerError&) {
  }
  return trace;
}

// Independent samples from random_genotype. Duplicates are redrawn without
// spending budget; a space with fewer genotypes than the budget ends early.
inline SearchTrace random_search(const SpaceConfig& space, Evaluator& evaluator, int budget,
                                 std::uint64_t rng_seed, SearchOptions options = {}) {
  SearchTrace trace = detail::new_trace("random", space, budget, rng_seed);
  detail::SearchContext ctx(evaluator, budget, std::move(options), trace);
  std::mt19937_64 rng(detail::splitmix64(rng_seed ^ 0x72616e646f6d5f73ULL));
  const int max_misses = 100 * budget + 1000;
  int misses = 0;
  double best = -std::numeric_limits<double>::infinity();
  try {
    while (ctx.budget_left()) {
      Genotype g = random_genotype(space, rng());
      const std::string digest = genotype_digest(g);
      if (ctx.cached(digest)) {
        if (++misses > max_misses) {
          trace.termination = Termination::kExhausted;
          return trace;
        }
        continue;
      }
      misses = 0;
      auto outcome = ctx.score(g, ProbeKind::kSample);
      if (outcome && outcome->evaluated && (outcome->score > best || trace.budget_used == 0)) {
        if (outcome->score > best) best = outcome->score;
        ctx.accept(digest);
      }
      ctx.flush();
    }
    trace.termination = Termination::kBudget;
  } catch (const WorkerError&) {
  }
  return trace;
}

// Stage 1 searches the topology (VGG blocks, smallest kernel) with
// floor(budget * stage_split) evaluations; stage 2 starts from its winner and
// searches only kernel sizes with whatever budget is left.
inline SearchTrace bilevel_search(const SpaceConfig& space, Evaluator& evaluator, int budget,
                                  double stage_split, std::uint64_t rng_seed,
                                  SearchOptions options = {}) {
  if (space.mode != SpaceMode::kBilevelTopology)
    throw ConfigError("bilevel search needs a bilevel_topology space for stage 1");
  if (!(stage_split > 0.0 && stage_split <= 1.0))
    throw ConfigError("stage_split must lie in (0, 1]");
  SearchTrace trace = detail::new_trace("bilevel", space, budget, rng_seed);
  const int stage1 = std::max(1, static_cast<int>(std::floor(budget * stage_split)));
  trace.stage1_budget = stage1;
  detail::SearchContext ctx(evaluator, stage1, std::move(options), trace);
  try {
    ctx.set_stage(1);
    detail::run_local_search(ctx, trace, space, random_genotype(space, rng_seed), std::nullopt,
                             rng_seed);
    if (!trace.best_genotype || !std::isfinite(trace.best_score)) {
      trace.complete = false;
      trace.termination = Termination::kStageFailed;
      return trace;
    }
    SpaceConfig cell_space = space;
    cell_space.mode = SpaceMode::kBilevelCell;
    cell_space.reference_topology = *trace.best_genotype;
    ctx.set_stage(2);
    ctx.set_limit(budget);
    const Genotype winner = *trace.best_genotype;
    detail::run_local_search(ctx, trace, cell_space, winner, trace.best_score,
                             detail::splitmix64(rng_seed + 1));
  } catch (const WorkerError&) {
  }
  return trace;
}

// ---------------------------------------------------------------------------
// Persistence: one JSON record per line, plus a summary document.

inline nlohmann::json score_to_json(double s) {
  return std::isfinite(s) ? nlohmann::json(s) : nlohmann::json(nullptr);
}

inline double score_from_json(const nlohmann::json& j) {
  return j.is_null() ? -std::numeric_limits<double>::infinity() : j.get<double>();
}

inline nlohmann::json event_to_json(const TraceEvent& e) {
  nlohmann::json probe;
  switch (e.probe) {
    case ProbeKind::kInit: probe = {{"kind", "init"}}; break;
    case ProbeKind::kSample: probe = {{"kind", "sample"}}; break;
    case ProbeKind::kProbe:
      probe = {{"kind", "probe"}, {"node", e.probe_node}, {"variable", to_string(e.probe_variable)}};
      break;
  }
  if (!e.is_evaluation()) {
    nlohmann::json j = {{"kind", "error"}, {"step", e.step}, {"stage", e.stage}, {"message", e.message}};
    if (!e.genotype_digest.empty()) j["genotype_digest"] = e.genotype_digest;
    return j;
  }
  return {{"kind", "eval"},
          {"step", e.step},
          {"stage", e.stage},
          {"genotype_digest", e.genotype_digest},
          {"genotype", nodes_to_json(e.genotype)},
          {"score", score_to_json(e.score)},
          {"status", e.ok ? "ok" : "failed"},
          {"accepted", e.accepted},
          {"probe", probe},
          {"message", e.message}};
}

inline TraceEvent event_from_json(const nlohmann::json& j) {
  TraceEvent e;
  const auto kind = j.at("kind").get<std::string>();
  e.step = j.at("step").get<int>();
  e.stage = j.at("stage").get<int>();
  if (kind == "error") {
    e.kind = TraceEvent::Kind::kError;
    e.ok = false;
    e.message = j.value("message", std::string());
    e.genotype_digest = j.value("genotype_digest", std::string());
    return e;
  }
  if (kind != "eval") throw ResumeError("unknown trace record kind '" + kind + "'");
  e.genotype_digest = j.at("genotype_digest").get<std::string>();
  e.genotype = nodes_from_json(j.at("genotype"));
  e.score = score_from_json(j.at("score"));
  e.ok = j.at("status").get<std::string>() == "ok";
  e.accepted = j.at("accepted").get<bool>();
  e.message = j.value("message", std::string());
  const auto& p = j.at("probe");
  const auto pk = p.at("kind").get<std::string>();
  if (pk == "init") {
    e.probe = ProbeKind::kInit;
  } else if (pk == "sample") {
    e.probe = ProbeKind::kSample;
  } else {
    e.probe = ProbeKind::kProbe;
    e.probe_node = p.at("node").get<int>();
    e.probe_variable = parse_variable(p.at("variable").get<std::string>());
  }
  return e;
}

inline std::string events_to_jsonl(std::span<const TraceEvent> events) {
  std::string out;
  for (const auto& e : events) out += event_to_json(e).dump() + "\n";
  return out;
}

// Reads the event records of a log. A truncated final line (interrupted
// write) is ignored; other malformed lines throw ResumeError.
inline std::vector<TraceEvent> read_trace_log(std::istream& in) {
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);)
    if (!line.empty()) lines.push_back(line);
  std::vector<TraceEvent> events;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(lines[i]);
    } catch (const nlohmann::json::exception&) {
      if (i + 1 == lines.size()) break;
      throw ResumeError("malformed trace record on line " + std::to_string(i + 1));
    }
    if (j.value("kind", std::string()) == "header") continue;
    events.push_back(event_from_json(j));
  }
  return events;
}

inline nlohmann::json trace_summary(const SearchTrace& t) {
  nlohmann::json j = {{"algorithm", t.algorithm},
                      {"config_digest", t.config_digest},
                      {"rng_seed", t.rng_seed},
                      {"budget", t.budget},
                      {"budget_used", t.budget_used},
                      {"best_score", score_to_json(t.best_score)},
                      {"termination", to_string(t.termination)},
                      {"complete", t.complete},
                      {"events", t.events.size()}};
  j["best_genotype"] = t.best_genotype ? nodes_to_json(*t.best_genotype) : nlohmann::json(nullptr);
  j["best_genotype_digest"] =
      t.best_genotype ? nlohmann::json(genotype_digest(*t.best_genotype)) : nlohmann::json(nullptr);
  if (t.algorithm == "bilevel") j["stage1_budget"] = t.stage1_budget;
  return j;
}

// Running best score after each evaluation event: (step, best).
inline std::vector<std::pair<int, double>> best_score_series(const SearchTrace& t) {
  std::vector<std::pair<int, double>> series;
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& e : t.events) {
    if (!e.is_evaluation()) continue;
    best = std::max(best, e.score);
    series.emplace_back(e.step, best);
  }
  return series;
}

}  // namespace mbnas

#endif  // MBNAS_SEARCH_ENGINE_HPP_
