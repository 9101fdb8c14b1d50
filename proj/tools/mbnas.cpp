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

// mbnas: command line entry point.
//
//   mbnas count   [--config F] [--space S]
//   mbnas sample  --out DIR [--config F] [--space S] [--seed N] [--count K]
//   mbnas compile --genotype F [--config F] [--input-shape C,H,W] [--classes K] [--stats] [--out DIR]
//   mbnas search  --out DIR [--space mb|macro|micro|bilevel] [--algorithm local|random]
//                 [--budget 150] [--evaluator surrogate|external:<endpoint>] [--seed N] ...
//   mbnas resume  --out DIR
//   mbnas score   --pred F --gt F [--tolerance T] [--out DIR]
//   mbnas stats   --table F [--out DIR]
//
// Exit codes: 0 ok, 1 other failure, 2 bad configuration or input,
// 3 worker failure, 4 metric undefined, 5 resume mismatch.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "CLI11.hpp"
#include "mbnas/mbnas.hpp"

namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using namespace mbnas;

enum ExitCode : int {
  kExitOk = 0,
  kExitOther = 1,
  kExitConfig = 2,
  kExitWorker = 3,
  kExitUndefined = 4,
  kExitResume = 5,
};

json read_json(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw ConfigError("cannot open " + p.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(p.string() + ": " + e.what());
  }
}

void write_json(const fs::path& p, const json& j) {
  std::ofstream out(p);
  if (!out) throw ConfigError("cannot write " + p.string());
  out << j.dump(2) << '\n';
}

std::string format_double(double v) {
  if (std::isinf(v)) return v < 0 ? "-inf" : "inf";
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

SpaceMode space_flag(const std::string& s) {
  if (s == "mb") return SpaceMode::kMixedBlock;
  if (s == "macro") return SpaceMode::kMacro;
  if (s == "micro") return SpaceMode::kMicro;
  if (s == "bilevel") return SpaceMode::kBilevelTopology;
  throw ConfigError("unknown --space '" + s + "' (expected mb, macro, micro or bilevel)");
}

InputShape parse_shape(const std::string& s) {
  InputShape shape;
  char c1 = 0, c2 = 0;
  std::istringstream in(s);
  if (!(in >> shape.channels >> c1 >> shape.height >> c2 >> shape.width) || c1 != ',' ||
      c2 != ',' || !in.eof())
    throw ConfigError("--input-shape must look like C,H,W, got '" + s + "'");
  if (shape.channels < 1 || shape.height < 1 || shape.width < 1)
    throw ConfigError("--input-shape entries must be positive");
  return shape;
}

json shape_json(const InputShape& s) { return {s.channels, s.height, s.width}; }

InputShape shape_from_json(const json& j) {
  return InputShape{j.at(0).get<int>(), j.at(1).get<int>(), j.at(2).get<int>()};
}

SpaceConfig load_space(const std::string& path) {
  if (path.empty()) return SpaceConfig{};
  return config_from_json(read_json(path));
}

// The run manifest. Its digest covers the command, inputs, seed and engine
// version; where the outputs went is recorded but not hashed.
struct Manifest {
  std::string command;
  json inputs = json::object();
  std::uint64_t seed = 0;
  fs::path output_dir;
  json config_paths = json::object();

  std::string digest() const {
    const json core = {{"command", command},
                       {"engine_version", kEngineVersion},
                       {"seed", seed},
                       {"inputs", inputs}};
    return detail::digest_of(core.dump());
  }

  json to_json() const {
    return {{"command", command},
            {"engine_version", kEngineVersion},
            {"seed", seed},
            {"inputs", inputs},
            {"config_paths", config_paths},
            {"output_dir", output_dir.string()},
            {"manifest_digest", digest()}};
  }

  static Manifest from_json(const json& j) {
    Manifest m;
    try {
      m.command = j.at("command").get<std::string>();
      m.inputs = j.at("inputs");
      m.seed = j.at("seed").get<std::uint64_t>();
      m.output_dir = j.value("output_dir", std::string());
      m.config_paths = j.value("config_paths", json::object());
    } catch (const json::exception& e) {
      throw ConfigError(std::string("malformed manifest: ") + e.what());
    }
    if (j.contains("manifest_digest") && j["manifest_digest"] != m.digest())
      throw ConfigError("manifest digest does not match its contents");
    return m;
  }

  void write(const fs::path& dir) const {
    fs::create_directories(dir);
    write_json(dir / "manifest.json", to_json());
  }
};

json stamped(json j, const Manifest& m) {
  j["manifest_digest"] = m.digest();
  return j;
}

json cost_json(const ArchitectureIR& ir, const InputShape& shape) {
  const auto params = count_params(ir);
  const auto macs = count_mmacs(ir, shape);
  json cells = json::array();
  for (std::size_t i = 0; i < params.cells.size(); ++i)
    cells.push_back({{"index", params.cells[i].index},
                     {"params", params.cells[i].params},
                     {"macs", macs.cells[i].macs}});
  return {{"input_shape", shape_json(shape)},
          {"total_params", params.total_params},
          {"total_macs", macs.total_macs},
          {"mmacs", macs.mmacs()},
          {"stem", {{"params", params.stem_params}, {"macs", macs.stem_macs}}},
          {"head", {{"params", params.head_params}, {"macs", macs.head_macs}}},
          {"cells", cells}};
}

void check_divisible(const SpaceConfig& space, const InputShape& shape) {
  const int div = 1 << space.max_levels;
  if (shape.height % div != 0 || shape.width % div != 0)
    throw ConfigError("input " + std::to_string(shape.height) + "x" + std::to_string(shape.width) +
                      " is not divisible by 2^max_levels = " + std::to_string(div));
}

// ---------------------------------------------------------------------------

struct CountArgs {
  std::string config;
  std::string space;
};

int cmd_count(const CountArgs& a) {
  SpaceConfig c = load_space(a.config);
  if (!a.space.empty()) c.mode = space_flag(a.space);
  if (c.mode == SpaceMode::kMicro && !c.reference_topology) {
    std::cout << "note: no reference topology in the config; using canonical_unet\n";
    c.reference_topology = canonical_unet(c);
  }
  const BigCount n = cardinality(c);
  std::ostringstream sci;
  sci << std::setprecision(4) << std::scientific << n.convert_to<double>();
  std::cout << "config: " << config_to_json(c).dump() << "\n";
  std::cout << "config_digest: " << config_digest(c) << "\n";
  std::cout << "cardinality: " << n.str() << "\n";
  std::cout << "approx: " << sci.str() << "\n";
  if (c.mode == SpaceMode::kMacro) {
    SpaceConfig full = c;
    full.mode = SpaceMode::kMixedBlock;
    const BigCount mb = cardinality(full);
    const auto cell = static_cast<long>(c.block_pool.size() * c.conv_sizes.size());
    const BigCount factor = boost::multiprecision::pow(BigCount(cell), c.num_nodes);
    const bool ok = mb == n * factor;
    std::cout << "check: mixed_block " << mb.str() << " = macro x " << cell << "^" << c.num_nodes
              << (ok ? " (ok)" : " (MISMATCH)") << "\n";
    if (!ok) return kExitOther;
  }
  return kExitOk;
}

struct SampleArgs {
  std::string config;
  std::string space;
  std::string reference;
  std::uint64_t seed = 0;
  int count = 1;
  std::string out;
};

Genotype load_genotype(const std::string& path) {
  try {
    return decode_genotype(read_json(path));
  } catch (const StructuralError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

int cmd_sample(const SampleArgs& a) {
  SpaceConfig c = load_space(a.config);
  if (!a.space.empty()) c.mode = space_flag(a.space);
  if (!a.reference.empty()) c.reference_topology = load_genotype(a.reference);
  if (c.mode == SpaceMode::kMicro && !c.reference_topology) {
    std::cout << "note: no --reference-topology given; using canonical_unet\n";
    c.reference_topology = canonical_unet(c);
  }
  if (a.count < 1) throw ConfigError("--count must be positive");
  Manifest m;
  m.command = "sample";
  m.seed = a.seed;
  m.inputs = {{"space", config_to_json(c)}, {"count", a.count}};
  m.output_dir = a.out;
  m.config_paths = {{"config", a.config}};
  m.write(a.out);
  for (int i = 0; i < a.count; ++i) {
    const Genotype g = random_genotype(c, a.seed + static_cast<std::uint64_t>(i));
    std::ostringstream name;
    name << "genotype_" << std::setw(3) << std::setfill('0') << i << ".json";
    write_json(fs::path(a.out) / name.str(), stamped(encode_genotype(g, c), m));
    std::cout << name.str() << " " << genotype_digest(g) << "\n";
  }
  return kExitOk;
}

struct CompileArgs {
  std::string genotype;
  std::string config;
  std::string input_shape = "1,128,128";
  int classes = 2;
  bool stats = false;
  std::string out;
};

int cmd_compile(const CompileArgs& a) {
  const SpaceConfig c = load_space(a.config);
  const Genotype g = load_genotype(a.genotype);
  const InputShape shape = parse_shape(a.input_shape);
  const ArchitectureIR ir = compile(g, c, shape, a.classes);
  const json cost = cost_json(ir, shape);
  if (!a.out.empty()) {
    Manifest m;
    m.command = "compile";
    m.inputs = {{"space", config_to_json(c)},
                {"genotype", nodes_to_json(g)},
                {"input_shape", shape_json(shape)},
                {"classes", a.classes}};
    m.output_dir = a.out;
    m.config_paths = {{"config", a.config}, {"genotype", a.genotype}};
    m.write(a.out);
    write_json(fs::path(a.out) / "ir.json", stamped(export_ir(ir), m));
    write_json(fs::path(a.out) / "cost.json", stamped(cost, m));
  }
  if (a.stats || a.out.empty()) {
    std::cout << "genotype_digest: " << genotype_digest(g) << "\n";
    std::cout << "ir_digest: " << ir_digest(ir) << "\n";
    std::cout << "params: " << cost["total_params"].get<std::int64_t>() << "\n";
    std::cout << "macs: " << cost["total_macs"].get<std::int64_t>() << "\n";
    std::cout << "mmacs: " << format_double(cost["mmacs"].get<double>()) << "\n";
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// search / resume

struct SearchArgs {
  std::string config;
  std::string space = "mb";
  std::string algorithm = "local";
  int budget = 150;
  std::uint64_t seed = 0;
  std::string evaluator = "surrogate";
  std::string out;
  std::string reference;
  double stage_split = 0.5;
  std::string surrogate_config;
  std::uint64_t table_seed = 0;
  double interaction = 0.0;
  double noise = 0.0;
  std::string input_shape = "1,128,128";
  int classes = 2;
  std::string dataset = "prostate";
  std::string train_config;
  double heartbeat_s = 30.0;
  double job_timeout_s = 0.0;
  bool force = false;
};

std::unique_ptr<Evaluator> make_evaluator(const json& in, const SpaceConfig& space,
                                          std::uint64_t seed) {
  const auto spec = in.at("evaluator").get<std::string>();
  if (spec == "surrogate")
    return std::make_unique<SurrogateEvaluator>(surrogate_config_from_json(in.at("surrogate")), seed);
  if (spec.rfind("external:", 0) == 0) {
    WorkerTimeouts t;
    t.heartbeat = std::chrono::milliseconds(in.at("timeouts").at("heartbeat_ms").get<std::int64_t>());
    const auto& job = in.at("timeouts").at("job_ms");
    if (!job.is_null()) t.job = std::chrono::milliseconds(job.get<std::int64_t>());
    return std::make_unique<ExternalEvaluator>(
        WorkerEndpoint::parse(spec.substr(9)), space, shape_from_json(in.at("input_shape")),
        in.at("classes").get<int>(), train_config_from_json(in.at("train_config")), t);
  }
  throw ConfigError("unknown --evaluator '" + spec + "' (expected surrogate or external:<endpoint>)");
}

void write_best(const fs::path& dir, const SearchTrace& t, const SpaceConfig& space,
                const InputShape& shape, int classes, const Manifest& m) {
  if (!t.best_genotype || !std::isfinite(t.best_score)) return;
  // Every restricted space is a subset of the unrestricted one, which is the
  // view used to compile the winner.
  SpaceConfig view = space;
  view.mode = SpaceMode::kMixedBlock;
  view.reference_topology.reset();
  const Genotype& g = *t.best_genotype;
  fs::create_directories(dir / "best");
  json doc = encode_genotype(g, view);
  doc["score"] = t.best_score;
  doc["search_config_digest"] = config_digest(space);
  write_json(dir / "best" / "genotype.json", stamped(doc, m));
  const ArchitectureIR ir = compile(g, view, shape, classes);
  write_json(dir / "best" / "ir.json", stamped(export_ir(ir), m));
  write_json(dir / "best" / "cost.json", stamped(cost_json(ir, shape), m));
}

int run_search(const Manifest& m, std::vector<TraceEvent> replay) {
  const json& in = m.inputs;
  const fs::path dir = m.output_dir;
  SpaceConfig space;
  std::string algorithm;
  int budget = 0;
  InputShape shape;
  int classes = 0;
  try {
    space = config_from_json(in.at("space"));
    algorithm = in.at("algorithm").get<std::string>();
    budget = in.at("budget").get<int>();
    shape = shape_from_json(in.at("input_shape"));
    classes = in.at("classes").get<int>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed search inputs: ") + e.what());
  }
  check_divisible(space, shape);

  std::unique_ptr<Evaluator> base = make_evaluator(in, space, m.seed);
  std::unique_ptr<ResultCache> cache;
  std::unique_ptr<CachingEvaluator> cached;
  Evaluator* evaluator = base.get();
  if (const char* env = std::getenv("MBNAS_CACHE_DIR"); env && *env) {
    cache = std::make_unique<ResultCache>(env);
    cached = std::make_unique<CachingEvaluator>(*base, *cache);
    evaluator = cached.get();
  }

  const json header = {{"kind", "header"},
                       {"manifest_digest", m.digest()},
                       {"algorithm", algorithm},
                       {"budget", budget},
                       {"rng_seed", m.seed},
                       {"space_digest", config_digest(space)},
                       {"evaluator_digest", evaluator->config_digest()}};
  {
    std::ofstream log(dir / "trace.jsonl", std::ios::trunc);
    log << header.dump() << '\n' << events_to_jsonl(replay);
  }
  std::ofstream log(dir / "trace.jsonl", std::ios::app);
  SearchOptions opts;
  opts.replay = std::move(replay);
  opts.sink = [&](std::span<const TraceEvent> events) {
    log << events_to_jsonl(events);
    log.flush();
  };

  SearchTrace trace;
  if (algorithm == "local") {
    trace = local_search(space, *evaluator, budget, m.seed, std::move(opts));
  } else if (algorithm == "random") {
    trace = random_search(space, *evaluator, budget, m.seed, std::move(opts));
  } else if (algorithm == "bilevel") {
    trace = bilevel_search(space, *evaluator, budget, in.at("stage_split").get<double>(), m.seed,
                           std::move(opts));
  } else {
    throw ConfigError("unknown algorithm '" + algorithm + "'");
  }
  log.close();

  json summary = trace_summary(trace);
  summary["evaluator_digest"] = evaluator->config_digest();
  if (cached) summary["cache_hits"] = cached->hits();
  write_json(dir / "summary.json", stamped(summary, m));

  std::ofstream series(dir / "series.csv");
  series << "# manifest_digest=" << m.digest() << "\nstep,best_score\n";
  for (const auto& [step, best] : best_score_series(trace))
    series << step << ',' << format_double(best) << '\n';
  series.close();

  write_best(dir, trace, space, shape, classes, m);

  std::cout << "algorithm: " << algorithm << "\n";
  std::cout << "evaluations: " << trace.budget_used << " / " << budget << "\n";
  std::cout << "termination: " << to_string(trace.termination) << "\n";
  std::cout << "best_score: " << format_double(trace.best_score) << "\n";
  if (trace.best_genotype)
    std::cout << "best_genotype: " << genotype_digest(*trace.best_genotype) << "\n";
  std::cout << "output: " << dir.string() << "\n";

  if (trace.termination == Termination::kError) {
    const std::string msg = trace.events.empty() ? "" : trace.events.back().message;
    std::cerr << json{{"error", "worker"}, {"message", msg}}.dump() << "\n";
    return kExitWorker;
  }
  if (trace.termination == Termination::kStageFailed) {
    std::cerr << json{{"error", "search"}, {"message", "no stage-1 evaluation succeeded"}}.dump()
              << "\n";
    return kExitOther;
  }
  return kExitOk;
}

int cmd_search(const SearchArgs& a, const CLI::App& sub) {
  SpaceConfig space = load_space(a.config);
  space.mode = space_flag(a.space);
  const bool bilevel = space.mode == SpaceMode::kBilevelTopology;
  const bool external = a.evaluator.rfind("external:", 0) == 0;
  if (!external && a.evaluator != "surrogate")
    throw ConfigError("unknown --evaluator '" + a.evaluator + "'");
  if (sub.count("--stage-split") && !bilevel)
    throw ConfigError("--stage-split only applies to --space bilevel");
  if (bilevel && a.algorithm != "local")
    throw ConfigError("--space bilevel runs local search in both stages; drop --algorithm " +
                      a.algorithm);
  if (a.algorithm != "local" && a.algorithm != "random")
    throw ConfigError("unknown --algorithm '" + a.algorithm + "'");
  if (!a.reference.empty() && space.mode != SpaceMode::kMicro)
    throw ConfigError("--reference-topology only applies to --space micro");
  for (const char* flag : {"--surrogate-config", "--table-seed", "--interaction", "--noise"})
    if (external && sub.count(flag)) throw ConfigError(std::string(flag) + " needs --evaluator surrogate");
  for (const char* flag : {"--dataset", "--train-config", "--heartbeat", "--job-timeout"})
    if (!external && sub.count(flag)) throw ConfigError(std::string(flag) + " needs an external evaluator");
  if (a.budget < 1) throw ConfigError("--budget must be at least 1");

  if (space.mode == SpaceMode::kMicro) {
    if (a.reference.empty()) {
      std::cout << "note: no --reference-topology given; using canonical_unet\n";
      space.reference_topology = canonical_unet(space);
    } else {
      space.reference_topology = load_genotype(a.reference);
    }
  }
  check_config(space);
  const InputShape shape = parse_shape(a.input_shape);
  check_divisible(space, shape);

  Manifest m;
  m.command = "search";
  m.seed = a.seed;
  m.output_dir = a.out;
  m.inputs = {{"space", config_to_json(space)},
              {"algorithm", bilevel ? "bilevel" : a.algorithm},
              {"budget", a.budget},
              {"evaluator", a.evaluator},
              {"input_shape", shape_json(shape)},
              {"classes", a.classes}};
  if (bilevel) m.inputs["stage_split"] = a.stage_split;
  m.config_paths = {{"config", a.config}, {"reference_topology", a.reference}};
  if (external) {
    TrainConfig t = a.train_config.empty() ? TrainConfig::for_dataset(a.dataset)
                                           : train_config_from_json(read_json(a.train_config));
    if (sub.count("--dataset")) t.dataset_id = a.dataset;
    m.inputs["train_config"] = train_config_to_json(t);
    m.inputs["timeouts"] = {
        {"heartbeat_ms", static_cast<std::int64_t>(a.heartbeat_s * 1000)},
        {"job_ms", a.job_timeout_s > 0 ? json(static_cast<std::int64_t>(a.job_timeout_s * 1000))
                                       : json(nullptr)}};
    m.config_paths["train_config"] = a.train_config;
  } else {
    SurrogateConfig s = a.surrogate_config.empty()
                            ? SurrogateConfig{}
                            : surrogate_config_from_json(read_json(a.surrogate_config));
    if (sub.count("--table-seed")) s.table_seed = a.table_seed;
    if (sub.count("--interaction")) s.interaction_strength = a.interaction;
    if (sub.count("--noise")) s.noise_amplitude = a.noise;
    m.inputs["surrogate"] = surrogate_config_to_json(s);
    m.config_paths["surrogate_config"] = a.surrogate_config;
  }

  const fs::path dir = a.out;
  if (fs::exists(dir / "trace.jsonl") && !a.force)
    throw ConfigError(dir.string() + " already holds a trace; use 'resume' or --force");
  m.write(dir);
  return run_search(m, {});
}

int cmd_resume(const std::string& out) {
  const fs::path dir = out;
  Manifest m = Manifest::from_json(read_json(dir / "manifest.json"));
  if (m.command != "search") throw ConfigError("only search runs can be resumed");
  m.output_dir = dir;
  std::ifstream log(dir / "trace.jsonl");
  if (!log) throw ConfigError("missing " + (dir / "trace.jsonl").string());
  std::string first;
  std::getline(log, first);
  try {
    const auto header = json::parse(first);
    if (header.at("manifest_digest") != m.digest())
      throw ResumeError("trace header does not belong to this manifest");
  } catch (const json::exception&) {
    throw ResumeError("trace log has no readable header");
  }
  std::vector<TraceEvent> prior;
  for (auto& e : read_trace_log(log))
    if (e.is_evaluation() || !e.genotype_digest.empty()) prior.push_back(std::move(e));
  std::cout << "resuming from " << prior.size() << " logged events\n";
  return run_search(m, std::move(prior));
}

// ---------------------------------------------------------------------------
// score / stats

struct ScoreArgs {
  std::string pred;
  std::string gt;
  double tolerance = 1.0;
  std::string out;
};

int cmd_score(const ScoreArgs& a) {
  const LoadedMask pred = load_mask(a.pred);
  const LoadedMask gt = load_mask(a.gt);
  if (a.tolerance < 0) throw ConfigError("--tolerance must be non-negative");
  const int classes = std::max(pred.num_classes, gt.num_classes);
  json per_class = json::array();
  json errors = json::array();
  double sum_dsc = 0, sum_hd = 0, sum_sd = 0;
  int fg = 0, defined = 0;
  for (int c = 1; c < classes; ++c) {
    json row = {{"class", c}, {"dsc", dsc(pred.mask, gt.mask, c)}};
    sum_dsc += row["dsc"].get<double>();
    ++fg;
    try {
      const double h = hd95(pred.mask, gt.mask, c);
      const double s = surface_dice(pred.mask, gt.mask, c, a.tolerance);
      row["hd95"] = h;
      row["surface_dice"] = s;
      sum_hd += h;
      sum_sd += s;
      ++defined;
    } catch (const MetricUndefinedError& e) {
      row["hd95"] = nullptr;
      row["surface_dice"] = nullptr;
      errors.push_back({{"class", c}, {"message", e.what()}});
    }
    per_class.push_back(row);
  }
  if (fg == 0) throw MetricUndefinedError("masks contain no foreground class");
  json result = {{"pred", a.pred},
                 {"gt", a.gt},
                 {"tolerance", a.tolerance},
                 {"spacing", {gt.mask.dy, gt.mask.dx}},
                 {"classes", per_class},
                 {"mean", {{"dsc", sum_dsc / fg}}}};
  result["mean"]["hd95"] = errors.empty() ? json(sum_hd / defined) : json(nullptr);
  result["mean"]["surface_dice"] = errors.empty() ? json(sum_sd / defined) : json(nullptr);
  if (!errors.empty()) result["errors"] = errors;
  if (!a.out.empty()) {
    Manifest m;
    m.command = "score";
    m.inputs = {{"pred", a.pred}, {"gt", a.gt}, {"tolerance", a.tolerance}};
    m.output_dir = a.out;
    m.write(a.out);
    write_json(fs::path(a.out) / "score.json", stamped(result, m));
  }
  std::cout << result.dump(2) << "\n";
  if (!errors.empty()) {
    std::cerr << json{{"error", "metric-undefined"}, {"message", errors[0]["message"]}}.dump()
              << "\n";
    return kExitUndefined;
  }
  return kExitOk;
}

struct StatsArgs {
  std::string table;
  std::string out;
};

int cmd_stats(const StatsArgs& a) {
  ScoreTable t;
  try {
    t = load_score_table(a.table);
  } catch (const FormatError& e) {
    throw ConfigError(e.what());
  }
  const FriedmanResult f = friedman_test(t);
  json pairs = json::array();
  for (std::size_t x = 0; x < t.num_models(); ++x)
    for (std::size_t y = x + 1; y < t.num_models(); ++y) {
      json row = {{"a", t.models[x]}, {"b", t.models[y]}};
      try {
        const auto w = wilcoxon_signed_rank(t.column(x), t.column(y));
        row["statistic"] = w.statistic;
        row["w_plus"] = w.w_plus;
        row["w_minus"] = w.w_minus;
        row["n"] = w.n;
        row["method"] = w.exact ? "exact" : "normal";
        row["p_value"] = w.p_value;
      } catch (const StatsError& e) {
        row["undefined"] = e.what();
      }
      pairs.push_back(row);
    }
  const json result = {{"table", a.table},
                       {"models", t.models},
                       {"rows", t.num_rows()},
                       {"friedman",
                        {{"statistic", f.statistic},
                         {"degrees_of_freedom", f.degrees_of_freedom},
                         {"p_value", f.p_value},
                         {"mean_ranks", f.mean_ranks}}},
                       {"wilcoxon", pairs}};
  if (!a.out.empty()) {
    Manifest m;
    m.command = "stats";
    m.inputs = {{"table", a.table}};
    m.output_dir = a.out;
    m.write(a.out);
    write_json(fs::path(a.out) / "stats.json", stamped(result, m));
  }
  std::cout << result.dump(2) << "\n";
  return kExitOk;
}

int fail(const char* kind, const std::exception& e, int code) {
  std::cerr << json{{"error", kind}, {"message", e.what()}}.dump() << "\n";
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Mixed-block neural architecture search engine", "mbnas"};
  app.set_version_flag("--version", std::string(kEngineVersion));
  app.require_subcommand(1);

  CountArgs count;
  auto* c_count = app.add_subcommand("count", "Exact number of genotypes in a space");
  c_count->add_option("--config", count.config, "Space config (JSON)");
  c_count->add_option("--space", count.space, "Override the mode: mb, macro, micro, bilevel");

  SampleArgs sample;
  auto* c_sample = app.add_subcommand("sample", "Write random genotypes");
  c_sample->add_option("--config", sample.config, "Space config (JSON)");
  c_sample->add_option("--space", sample.space, "Override the mode: mb, macro, micro, bilevel");
  c_sample->add_option("--reference-topology", sample.reference, "Genotype file (micro mode)");
  c_sample->add_option("--seed", sample.seed, "RNG seed");
  c_sample->add_option("--count", sample.count, "Number of genotypes");
  c_sample->add_option("--out", sample.out, "Output directory")->required();

  CompileArgs comp;
  auto* c_compile = app.add_subcommand("compile", "Compile a genotype to IR and cost report");
  c_compile->add_option("--genotype", comp.genotype, "Genotype file")->required();
  c_compile->add_option("--config", comp.config, "Space config (JSON)");
  c_compile->add_option("--input-shape", comp.input_shape, "C,H,W")->capture_default_str();
  c_compile->add_option("--classes", comp.classes, "Output classes")->capture_default_str();
  c_compile->add_flag("--stats", comp.stats, "Print parameter and MAC counts");
  c_compile->add_option("--out", comp.out, "Output directory");

  SearchArgs search;
  auto* c_search = app.add_subcommand("search", "Run an architecture search");
  c_search->add_option("--config", search.config, "Space config (JSON)");
  c_search->add_option("--space", search.space, "mb, macro, micro or bilevel")->capture_default_str();
  c_search->add_option("--algorithm", search.algorithm, "local or random")->capture_default_str();
  c_search->add_option("--budget", search.budget, "Network evaluations")->capture_default_str();
  c_search->add_option("--seed", search.seed, "RNG seed")->capture_default_str();
  c_search->add_option("--evaluator", search.evaluator, "surrogate or external:<endpoint>")
      ->capture_default_str();
  c_search->add_option("--out", search.out, "Output directory")->required();
  c_search->add_option("--reference-topology", search.reference,
                       "Genotype file fixing the micro topology (default: canonical_unet)");
  c_search->add_option("--stage-split", search.stage_split, "Bilevel stage-1 budget share")
      ->capture_default_str();
  c_search->add_option("--surrogate-config", search.surrogate_config, "Surrogate config (JSON)");
  c_search->add_option("--table-seed", search.table_seed, "Surrogate utility table seed");
  c_search->add_option("--interaction", search.interaction, "Surrogate interaction strength");
  c_search->add_option("--noise", search.noise, "Surrogate noise amplitude");
  c_search->add_option("--input-shape", search.input_shape, "C,H,W")->capture_default_str();
  c_search->add_option("--classes", search.classes, "Output classes")->capture_default_str();
  c_search->add_option("--dataset", search.dataset, "Dataset id for the worker");
  c_search->add_option("--train-config", search.train_config, "Train config (JSON)");
  c_search->add_option("--heartbeat", search.heartbeat_s, "Worker heartbeat timeout, seconds");
  c_search->add_option("--job-timeout", search.job_timeout_s, "Per-job timeout, seconds");
  c_search->add_flag("--force", search.force, "Overwrite an existing trace");

  std::string resume_out;
  auto* c_resume = app.add_subcommand("resume", "Continue an interrupted search");
  c_resume->add_option("--out", resume_out, "Run directory")->required();

  ScoreArgs score;
  auto* c_score = app.add_subcommand("score", "DSC, HD95 and Surface Dice between masks");
  c_score->add_option("--pred", score.pred, "Predicted mask")->required();
  c_score->add_option("--gt", score.gt, "Ground-truth mask")->required();
  c_score->add_option("--tolerance", score.tolerance, "Surface Dice tolerance")->capture_default_str();
  c_score->add_option("--out", score.out, "Output directory");

  StatsArgs stats;
  auto* c_stats = app.add_subcommand("stats", "Friedman and pairwise Wilcoxon tests");
  c_stats->add_option("--table", stats.table, "Score table (CSV)")->required();
  c_stats->add_option("--out", stats.out, "Output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*c_count) return cmd_count(count);
    if (*c_sample) return cmd_sample(sample);
    if (*c_compile) return cmd_compile(comp);
    if (*c_search) return cmd_search(search, *c_search);
    if (*c_resume) return cmd_resume(resume_out);
    if (*c_score) return cmd_score(score);
    if (*c_stats) return cmd_stats(stats);
  } catch (const ConfigError& e) {
    return fail("config", e, kExitConfig);
  } catch (const StructuralError& e) {
    return fail("config", e, kExitConfig);
  } catch (const ShapeError& e) {
    return fail("config", e, kExitConfig);
  } catch (const FormatError& e) {
    return fail("config", e, kExitConfig);
  } catch (const WorkerError& e) {
    return fail("worker", e, kExitWorker);
  } catch (const ProtocolError& e) {
    return fail("worker", e, kExitWorker);
  } catch (const MetricUndefinedError& e) {
    return fail("metric-undefined", e, kExitUndefined);
  } catch (const StatsError& e) {
    return fail("metric-undefined", e, kExitUndefined);
  } catch (const ResumeError& e) {
    return fail("resume", e, kExitResume);
  } catch (const std::exception& e) {
    return fail("internal", e, kExitOther);
  }
  return kExitOther;
}
