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

// Mixed-block search space: genotypes, validity rules, single-variable
// neighbourhoods, sampling and exact cardinality.
//
// A genotype is a fixed-length chain of nodes. Each node carries four
// categorical variables:
//
//   channel_move  Down / Same / Up relative to the predecessor. Down halves
//                 the resolution and doubles the channels, Up the reverse.
//   block_type    VGG, Residual, Dense or Inception cell template.
//   conv_size     odd kernel size from SpaceConfig::conv_sizes.
//   skip_source   optional earlier node whose output is concatenated to the
//                 cell input; it must sit at the node's output level.
//
// The stem produces level 0. A node's level is the running sum of its moves.

#ifndef MBNAS_SEARCH_SPACE_HPP_
#define MBNAS_SEARCH_SPACE_HPP_

#include <algorithm>
#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>
#include <nlohmann/json.hpp>

#include "mbnas/common.hpp"

namespace mbnas {

enum class ChannelMove : int { kDown = 0, kSame = 1, kUp = 2 };
enum class BlockType : int { kVgg = 0, kResidual = 1, kDense = 2, kInception = 3 };
enum class Variable : int { kChannelMove = 0, kBlockType = 1, kConvSize = 2, kSkipSource = 3 };
enum class SpaceMode : int { kMixedBlock, kMacro, kMicro, kBilevelTopology, kBilevelCell };

inline constexpr std::array<ChannelMove, 3> kAllMoves = {ChannelMove::kDown, ChannelMove::kSame,
                                                         ChannelMove::kUp};
inline constexpr std::array<BlockType, 4> kAllBlocks = {BlockType::kVgg, BlockType::kResidual,
                                                        BlockType::kDense, BlockType::kInception};
inline constexpr std::array<Variable, 4> kAllVariables = {
    Variable::kChannelMove, Variable::kBlockType, Variable::kConvSize, Variable::kSkipSource};

inline int level_delta(ChannelMove m) {
  switch (m) {
    case ChannelMove::kDown: return 1;
    case ChannelMove::kUp: return -1;
    default: return 0;
  }
}

inline std::string_view to_string(ChannelMove m) {
  switch (m) {
    case ChannelMove::kDown: return "down";
    case ChannelMove::kSame: return "same";
    case ChannelMove::kUp: return "up";
  }
  return "?";
}

inline std::string_view to_string(BlockType b) {
  switch (b) {
    case BlockType::kVgg: return "vgg";
    case BlockType::kResidual: return "residual";
    case BlockType::kDense: return "dense";
    case BlockType::kInception: return "inception";
  }
  return "?";
}

inline std::string_view to_string(Variable v) {
  switch (v) {
    case Variable::kChannelMove: return "channel_move";
    case Variable::kBlockType: return "block_type";
    case Variable::kConvSize: return "conv_size";
    case Variable::kSkipSource: return "skip_source";
  }
  return "?";
}

inline std::string_view to_string(SpaceMode m) {
  switch (m) {
    case SpaceMode::kMixedBlock: return "mixed_block";
    case SpaceMode::kMacro: return "macro";
    case SpaceMode::kMicro: return "micro";
    case SpaceMode::kBilevelTopology: return "bilevel_topology";
    case SpaceMode::kBilevelCell: return "bilevel_cell";
  }
  return "?";
}

inline ChannelMove parse_channel_move(std::string_view s) {
  for (auto m : kAllMoves)
    if (to_string(m) == s) return m;
  throw StructuralError("unknown channel_move '" + std::string(s) + "'");
}

inline BlockType parse_block_type(std::string_view s) {
  for (auto b : kAllBlocks)
    if (to_string(b) == s) return b;
  throw StructuralError("unknown block_type '" + std::string(s) + "'");
}

inline Variable parse_variable(std::string_view s) {
  for (auto v : kAllVariables)
    if (to_string(v) == s) return v;
  throw StructuralError("unknown variable '" + std::string(s) + "'");
}

inline SpaceMode parse_space_mode(std::string_view s) {
  for (auto m : {SpaceMode::kMixedBlock, SpaceMode::kMacro, SpaceMode::kMicro,
                 SpaceMode::kBilevelTopology, SpaceMode::kBilevelCell})
    if (to_string(m) == s) return m;
  throw ConfigError("unknown space mode '" + std::string(s) + "'");
}

struct NodeGene {
  ChannelMove channel_move = ChannelMove::kSame;
  BlockType block_type = BlockType::kVgg;
  int conv_size = 3;
  std::optional<int> skip_source;  // 0-based node index

  friend bool operator==(const NodeGene&, const NodeGene&) = default;
};

struct Genotype {
  std::vector<NodeGene> nodes;

  std::size_t size() const { return nodes.size(); }
  friend bool operator==(const Genotype&, const Genotype&) = default;
};

struct SpaceConfig {
  int num_nodes = 10;
  int base_channels = 32;
  int max_levels = 4;
  std::vector<int> conv_sizes = {3, 5, 7};
  std::vector<BlockType> block_pool = {BlockType::kVgg, BlockType::kResidual, BlockType::kDense,
                                       BlockType::kInception};
  bool require_full_resolution_output = true;
  // A Same cell may take its own predecessor as skip source (concatenating
  // the input with itself). Counted by the cardinality calibration.
  bool allow_predecessor_skip = true;
  SpaceMode mode = SpaceMode::kMixedBlock;
  std::optional<Genotype> reference_topology;

  int min_conv_size() const { return *std::min_element(conv_sizes.begin(), conv_sizes.end()); }
  bool in_pool(BlockType b) const {
    return std::find(block_pool.begin(), block_pool.end(), b) != block_pool.end();
  }
  bool has_conv(int k) const {
    return std::find(conv_sizes.begin(), conv_sizes.end(), k) != conv_sizes.end();
  }
};

struct Violation {
  int node = 0;  // 1-based; 0 for genotype-level rules
  std::string rule;

  friend bool operator==(const Violation&, const Violation&) = default;
};

struct Verdict {
  std::vector<Violation> violations;

  bool valid() const { return violations.empty(); }
  bool has(int node, std::string_view rule) const {
    return std::any_of(violations.begin(), violations.end(),
                       [&](const Violation& v) { return v.node == node && v.rule == rule; });
  }
  std::string describe() const {
    if (valid()) return "valid";
    std::ostringstream os;
    for (std::size_t i = 0; i < violations.size(); ++i) {
      if (i) os << "; ";
      os << "node " << violations[i].node << ": " << violations[i].rule;
    }
    return os.str();
  }
};

// Output resolution level of every node. May leave [0, max_levels] for an
// invalid genotype.
inline std::vector<int> node_levels(const Genotype& g) {
  std::vector<int> levels;
  levels.reserve(g.size());
  int level = 0;
  for (const auto& n : g.nodes) {
    level += level_delta(n.channel_move);
    levels.push_back(level);
  }
  return levels;
}

namespace detail {

inline bool variable_is_fixed(const SpaceConfig& c, Variable v) {
  switch (c.mode) {
    case SpaceMode::kMixedBlock:
      return false;
    case SpaceMode::kMacro:
    case SpaceMode::kBilevelTopology:
      return v == Variable::kBlockType || v == Variable::kConvSize;
    case SpaceMode::kMicro:
      return v == Variable::kChannelMove || v == Variable::kSkipSource;
    case SpaceMode::kBilevelCell:
      return v != Variable::kConvSize;
  }
  return false;
}

inline int encode_value(const NodeGene& n, Variable v) {
  switch (v) {
    case Variable::kChannelMove: return static_cast<int>(n.channel_move);
    case Variable::kBlockType: return static_cast<int>(n.block_type);
    case Variable::kConvSize: return n.conv_size;
    case Variable::kSkipSource: return n.skip_source ? *n.skip_source : -1;
  }
  return 0;
}

inline void assign_value(NodeGene& n, Variable v, int value) {
  switch (v) {
    case Variable::kChannelMove: n.channel_move = static_cast<ChannelMove>(value); break;
    case Variable::kBlockType: n.block_type = static_cast<BlockType>(value); break;
    case Variable::kConvSize: n.conv_size = value; break;
    case Variable::kSkipSource:
      n.skip_source = value < 0 ? std::nullopt : std::optional<int>(value);
      break;
  }
}

}  // namespace detail

// Value of one variable in the integer encoding used by neighbourhoods:
// enum ordinal for channel_move / block_type, the kernel size for conv_size,
// and the 0-based source index (or -1 for none) for skip_source.
inline int get_value(const Genotype& g, int node, Variable v) {
  return detail::encode_value(g.nodes.at(node), v);
}

inline Genotype with_value(Genotype g, int node, Variable v, int value) {
  detail::assign_value(g.nodes.at(node), v, value);
  return g;
}

inline std::string describe_value(Variable v, int value) {
  switch (v) {
    case Variable::kChannelMove: return std::string(to_string(static_cast<ChannelMove>(value)));
    case Variable::kBlockType: return std::string(to_string(static_cast<BlockType>(value)));
    case Variable::kConvSize: return std::to_string(value);
    case Variable::kSkipSource: return value < 0 ? "none" : std::to_string(value + 1);
  }
  return "?";
}

// Throws StructuralError if the genotype cannot be interpreted under `c` at
// all: wrong length, unknown enum ordinals, a kernel outside conv_sizes, or a
// skip index outside [0, num_nodes).
inline void check_structure(const Genotype& g, const SpaceConfig& c) {
  if (static_cast<int>(g.size()) != c.num_nodes) {
    throw StructuralError("genotype has " + std::to_string(g.size()) + " nodes, expected " +
                          std::to_string(c.num_nodes));
  }
  for (int i = 0; i < c.num_nodes; ++i) {
    const auto& n = g.nodes[i];
    const std::string where = "node " + std::to_string(i + 1) + ": ";
    auto cm = static_cast<int>(n.channel_move);
    auto bt = static_cast<int>(n.block_type);
    if (cm < 0 || cm > 2) throw StructuralError(where + "channel_move out of range");
    if (bt < 0 || bt > 3) throw StructuralError(where + "block_type out of range");
    if (!c.has_conv(n.conv_size))
      throw StructuralError(where + "conv_size " + std::to_string(n.conv_size) +
                            " not in the configured domain");
    if (n.skip_source && (*n.skip_source < 0 || *n.skip_source >= c.num_nodes))
      throw StructuralError(where + "skip_source out of range");
  }
}

// Mode-independent validity rules.
inline Verdict validate_topology_and_cells(const Genotype& g, const SpaceConfig& c) {
  Verdict verdict;
  const auto levels = node_levels(g);
  for (int i = 0; i < c.num_nodes; ++i) {
    const auto& n = g.nodes[i];
    const int node = i + 1;
    if (levels[i] < 0) verdict.violations.push_back({node, "resolution-floor"});
    if (levels[i] > c.max_levels) verdict.violations.push_back({node, "resolution-ceiling"});
    if (!c.in_pool(n.block_type)) verdict.violations.push_back({node, "block-pool"});
    if (n.skip_source) {
      const int s = *n.skip_source;
      if (s >= i) {
        verdict.violations.push_back({node, "skip-not-earlier"});
      } else {
        if (s == i - 1 && !c.allow_predecessor_skip)
          verdict.violations.push_back({node, "skip-predecessor"});
        if (levels[s] != levels[i])
          verdict.violations.push_back({node, "skip-resolution-mismatch"});
      }
    }
  }
  if (c.require_full_resolution_output && !levels.empty() && levels.back() != 0)
    verdict.violations.push_back({c.num_nodes, "output-resolution"});
  return verdict;
}

inline Verdict validate(const Genotype& g, const SpaceConfig& c) {
  check_structure(g, c);
  Verdict verdict = validate_topology_and_cells(g, c);
  const bool fix_cell = c.mode == SpaceMode::kMacro || c.mode == SpaceMode::kBilevelTopology;
  const bool fix_topology = c.mode == SpaceMode::kMicro || c.mode == SpaceMode::kBilevelCell;
  for (int i = 0; i < c.num_nodes; ++i) {
    const auto& n = g.nodes[i];
    bool ok = true;
    if (fix_cell) ok = n.block_type == BlockType::kVgg && n.conv_size == c.min_conv_size();
    if (fix_topology && c.reference_topology) {
      const auto& r = c.reference_topology->nodes[i];
      ok = n.channel_move == r.channel_move && n.skip_source == r.skip_source;
      if (c.mode == SpaceMode::kBilevelCell) ok = ok && n.block_type == r.block_type;
    }
    if (!ok) verdict.violations.push_back({i + 1, "mode-restriction"});
  }
  return verdict;
}

// Throws ConfigError when the configuration itself is inconsistent.
inline void check_config(const SpaceConfig& c) {
  if (c.num_nodes < 1) throw ConfigError("num_nodes must be positive");
  if (c.base_channels < 1) throw ConfigError("base_channels must be positive");
  if (c.max_levels < 0) throw ConfigError("max_levels must be non-negative");
  if (c.conv_sizes.empty()) throw ConfigError("unsatisfiable space: conv_sizes is empty");
  if (c.block_pool.empty()) throw ConfigError("unsatisfiable space: block_pool is empty");
  for (int k : c.conv_sizes)
    if (k < 1 || k % 2 == 0) throw ConfigError("conv sizes must be odd and positive");
  for (std::size_t i = 0; i < c.conv_sizes.size(); ++i)
    for (std::size_t j = i + 1; j < c.conv_sizes.size(); ++j)
      if (c.conv_sizes[i] == c.conv_sizes[j]) throw ConfigError("duplicate conv size");
  for (std::size_t i = 0; i < c.block_pool.size(); ++i)
    for (std::size_t j = i + 1; j < c.block_pool.size(); ++j)
      if (c.block_pool[i] == c.block_pool[j]) throw ConfigError("duplicate block type");
  if (c.in_pool(BlockType::kInception) && c.base_channels % 4 != 0)
    throw ConfigError("inception blocks need base_channels divisible by 4");
  if (c.in_pool(BlockType::kDense) && c.base_channels % 2 != 0)
    throw ConfigError("dense blocks need an even base_channels");
  if ((c.mode == SpaceMode::kMacro || c.mode == SpaceMode::kBilevelTopology) &&
      !c.in_pool(BlockType::kVgg))
    throw ConfigError("macro spaces fix VGG blocks, which are missing from block_pool");
  if (c.mode == SpaceMode::kMicro || c.mode == SpaceMode::kBilevelCell) {
    if (!c.reference_topology)
      throw ConfigError(std::string(to_string(c.mode)) + " mode needs a reference topology");
    SpaceConfig free = c;
    free.mode = SpaceMode::kMixedBlock;
    Verdict v;
    try {
      v = validate(*c.reference_topology, free);
    } catch (const StructuralError& e) {
      throw ConfigError(std::string("reference topology is malformed: ") + e.what());
    }
    if (!v.valid())
      throw ConfigError("reference topology is not valid in this space: " + v.describe());
  }
}

// Samples node by node. Each variable is drawn uniformly from the values
// that keep the prefix completable; restricted variables take their fixed
// value. Same (config, seed) always yields the same genotype.
inline Genotype random_genotype(const SpaceConfig& c, std::uint64_t seed) {
  check_config(c);
  std::mt19937_64 rng(seed);
  const bool fix_move = detail::variable_is_fixed(c, Variable::kChannelMove);
  const bool fix_block = detail::variable_is_fixed(c, Variable::kBlockType);
  const bool fix_conv = detail::variable_is_fixed(c, Variable::kConvSize);
  const bool fix_skip = detail::variable_is_fixed(c, Variable::kSkipSource);
  const Genotype* ref = c.reference_topology ? &*c.reference_topology : nullptr;

  Genotype g;
  g.nodes.resize(c.num_nodes);
  std::vector<int> levels;
  int level = 0;
  for (int i = 0; i < c.num_nodes; ++i) {
    NodeGene& n = g.nodes[i];
    const int remaining = c.num_nodes - 1 - i;
    std::vector<ChannelMove> moves;
    for (auto m : kAllMoves) {
      if (fix_move && m != ref->nodes[i].channel_move) continue;
      const int next = level + level_delta(m);
      if (next < 0 || next > c.max_levels) continue;
      if (c.require_full_resolution_output && next > remaining) continue;
      moves.push_back(m);
    }
    if (moves.empty())
      throw ConfigError("unsatisfiable space: no channel move available at node " +
                        std::to_string(i + 1));
    n.channel_move = moves[detail::uniform_index(rng, moves.size())];
    level += level_delta(n.channel_move);
    levels.push_back(level);

    if (fix_block) {
      n.block_type = c.mode == SpaceMode::kBilevelCell ? ref->nodes[i].block_type : BlockType::kVgg;
    } else {
      n.block_type = c.block_pool[detail::uniform_index(rng, c.block_pool.size())];
    }
    if (fix_conv) {
      n.conv_size = c.min_conv_size();
    } else {
      n.conv_size = c.conv_sizes[detail::uniform_index(rng, c.conv_sizes.size())];
    }
    if (fix_skip) {
      n.skip_source = ref->nodes[i].skip_source;
    } else {
      std::vector<int> sources = {-1};
      for (int j = 0; j < i; ++j) {
        if (levels[j] != level) continue;
        if (j == i - 1 && !c.allow_predecessor_skip) continue;
        sources.push_back(j);
      }
      int s = sources[detail::uniform_index(rng, sources.size())];
      n.skip_source = s < 0 ? std::nullopt : std::optional<int>(s);
    }
  }
  return g;
}

// All values of `var` at `node` that keep the genotype valid, in domain order,
// current value included. Substitutions needing downstream repair are
// excluded.
inline std::vector<int> variable_options(const Genotype& g, int node, Variable var,
                                         const SpaceConfig& c) {
  if (node < 0 || node >= c.num_nodes) throw std::out_of_range("variable_options: node index");
  if (detail::variable_is_fixed(c, var)) return {get_value(g, node, var)};
  std::vector<int> domain;
  switch (var) {
    case Variable::kChannelMove:
      for (auto m : kAllMoves) domain.push_back(static_cast<int>(m));
      break;
    case Variable::kBlockType:
      for (auto b : kAllBlocks) domain.push_back(static_cast<int>(b));
      break;
    case Variable::kConvSize:
      domain = c.conv_sizes;
      break;
    case Variable::kSkipSource:
      domain.push_back(-1);
      for (int j = 0; j < node; ++j) domain.push_back(j);
      break;
  }
  std::vector<int> options;
  Genotype probe = g;
  for (int value : domain) {
    detail::assign_value(probe.nodes[node], var, value);
    if (validate(probe, c).valid()) options.push_back(value);
  }
  return options;
}

using BigCount = boost::multiprecision::cpp_int;

namespace detail {

inline void count_topologies(const SpaceConfig& c, std::vector<int>& levels, BigCount& total,
                             const BigCount& prefix_weight, std::int64_t cell_factor) {
  const int i = static_cast<int>(levels.size());
  if (i == c.num_nodes) {
    if (!c.require_full_resolution_output || levels.back() == 0) total += prefix_weight;
    return;
  }
  const int prev = i == 0 ? 0 : levels.back();
  const int remaining = c.num_nodes - 1 - i;
  for (auto m : kAllMoves) {
    const int level = prev + level_delta(m);
    if (level < 0 || level > c.max_levels) continue;
    if (c.require_full_resolution_output && level > remaining) continue;
    std::int64_t skips = 1;
    for (int j = 0; j < i; ++j) {
      if (levels[j] != level) continue;
      if (j == i - 1 && !c.allow_predecessor_skip) continue;
      ++skips;
    }
    levels.push_back(level);
    count_topologies(c, levels, total, prefix_weight * (cell_factor * skips), cell_factor);
    levels.pop_back();
  }
}

}  // namespace detail

// Exact number of valid genotypes. Channel-move sequences are enumerated with
// level pruning; each contributes the product over nodes of
// (cell options) x (1 + admissible skip sources).
inline BigCount cardinality(const SpaceConfig& c) {
  check_config(c);
  const std::int64_t pool = static_cast<std::int64_t>(c.block_pool.size());
  const std::int64_t convs = static_cast<std::int64_t>(c.conv_sizes.size());
  switch (c.mode) {
    case SpaceMode::kMixedBlock:
    case SpaceMode::kMacro:
    case SpaceMode::kBilevelTopology: {
      const std::int64_t cell = c.mode == SpaceMode::kMixedBlock ? pool * convs : 1;
      BigCount total = 0;
      std::vector<int> levels;
      levels.reserve(c.num_nodes);
      detail::count_topologies(c, levels, total, BigCount(1), cell);
      return total;
    }
    case SpaceMode::kMicro:
      return boost::multiprecision::pow(BigCount(pool * convs), c.num_nodes);
    case SpaceMode::kBilevelCell:
      return boost::multiprecision::pow(BigCount(convs), c.num_nodes);
  }
  return 0;
}

// Standard U-Net as a 10-node genotype: four Down cells, four Up cells with
// mirrored skips, and Same cells at both ends.
inline Genotype canonical_unet(const SpaceConfig& c) {
  if (c.num_nodes != 10) throw ConfigError("unsupported fixture: canonical U-Net needs 10 nodes");
  using M = ChannelMove;
  const std::array<M, 10> moves = {M::kSame, M::kDown, M::kDown, M::kDown, M::kDown,
                                   M::kUp,   M::kUp,   M::kUp,   M::kUp,   M::kSame};
  Genotype g;
  for (int i = 0; i < 10; ++i) {
    NodeGene n;
    n.channel_move = moves[i];
    n.block_type = BlockType::kVgg;
    n.conv_size = c.min_conv_size();
    if (i >= 5 && i <= 8) n.skip_source = 8 - i;
    g.nodes.push_back(n);
  }
  return g;
}

// ---------------------------------------------------------------------------
// Serialization. Skip sources are written 1-based to match log and error
// messages.

inline nlohmann::json nodes_to_json(const Genotype& g) {
  nlohmann::json nodes = nlohmann::json::array();
  for (const auto& n : g.nodes) {
    nodes.push_back({{"channel_move", to_string(n.channel_move)},
                     {"block_type", to_string(n.block_type)},
                     {"conv_size", n.conv_size},
                     {"skip_source", n.skip_source ? nlohmann::json(*n.skip_source + 1)
                                                   : nlohmann::json(nullptr)}});
  }
  return nodes;
}

inline Genotype nodes_from_json(const nlohmann::json& nodes) {
  if (!nodes.is_array()) throw StructuralError("genotype nodes must be an array");
  Genotype g;
  for (const auto& j : nodes) {
    try {
      NodeGene n;
      n.channel_move = parse_channel_move(j.at("channel_move").get<std::string>());
      n.block_type = parse_block_type(j.at("block_type").get<std::string>());
      n.conv_size = j.at("conv_size").get<int>();
      const auto& s = j.at("skip_source");
      if (!s.is_null()) n.skip_source = s.get<int>() - 1;
      g.nodes.push_back(n);
    } catch (const nlohmann::json::exception& e) {
      throw StructuralError(std::string("malformed genotype node: ") + e.what());
    }
  }
  return g;
}

inline std::string genotype_digest(const Genotype& g) {
  return detail::digest_of(nodes_to_json(g).dump());
}

inline nlohmann::json config_to_json(const SpaceConfig& c) {
  nlohmann::json pool = nlohmann::json::array();
  for (auto b : c.block_pool) pool.push_back(to_string(b));
  return {{"num_nodes", c.num_nodes},
          {"base_channels", c.base_channels},
          {"max_levels", c.max_levels},
          {"conv_sizes", c.conv_sizes},
          {"block_pool", pool},
          {"require_full_resolution_output", c.require_full_resolution_output},
          {"allow_predecessor_skip", c.allow_predecessor_skip},
          {"mode", to_string(c.mode)},
          {"reference_topology", c.reference_topology ? nodes_to_json(*c.reference_topology)
                                                      : nlohmann::json(nullptr)}};
}

// Missing fields keep their defaults.
inline SpaceConfig config_from_json(const nlohmann::json& j) {
  SpaceConfig c;
  try {
    if (j.contains("num_nodes")) c.num_nodes = j["num_nodes"].get<int>();
    if (j.contains("base_channels")) c.base_channels = j["base_channels"].get<int>();
    if (j.contains("max_levels")) c.max_levels = j["max_levels"].get<int>();
    if (j.contains("conv_sizes")) c.conv_sizes = j["conv_sizes"].get<std::vector<int>>();
    if (j.contains("block_pool")) {
      c.block_pool.clear();
      for (const auto& b : j["block_pool"]) c.block_pool.push_back(parse_block_type(b.get<std::string>()));
    }
    if (j.contains("require_full_resolution_output"))
      c.require_full_resolution_output = j["require_full_resolution_output"].get<bool>();
    if (j.contains("allow_predecessor_skip"))
      c.allow_predecessor_skip = j["allow_predecessor_skip"].get<bool>();
    if (j.contains("mode")) c.mode = parse_space_mode(j["mode"].get<std::string>());
    if (j.contains("reference_topology") && !j["reference_topology"].is_null())
      c.reference_topology = nodes_from_json(j["reference_topology"]);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed space config: ") + e.what());
  } catch (const StructuralError& e) {
    throw ConfigError(std::string("malformed space config: ") + e.what());
  }
  return c;
}

inline std::string config_digest(const SpaceConfig& c) {
  return detail::digest_of(config_to_json(c).dump());
}

inline constexpr int kGenotypeFormatVersion = 1;

// Genotype file document: {version, config_digest, nodes}.
inline nlohmann::json encode_genotype(const Genotype& g, const SpaceConfig& c) {
  return {{"version", kGenotypeFormatVersion},
          {"config_digest", config_digest(c)},
          {"nodes", nodes_to_json(g)}};
}

inline Genotype decode_genotype(const nlohmann::json& doc) {
  if (!doc.is_object() || !doc.contains("nodes"))
    throw StructuralError("genotype document lacks 'nodes'");
  if (doc.contains("version") && doc["version"].get<int>() != kGenotypeFormatVersion)
    throw StructuralError("unsupported genotype format version");
  return nodes_from_json(doc["nodes"]);
}

}  // namespace mbnas

#endif  // MBNAS_SEARCH_SPACE_HPP_
