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

// Genotype -> layer-level architecture graph, with shape inference and
// closed-form parameter / multiply-accumulate counts.
//
// Cell layout, in order:
//   1. scaling: 2x2 max-pool (Down) or 2x nearest upsample (Up), none for Same
//   2. concat with the skip source's output, when a skip edge exists
//   3. the block template at the output resolution
//
// Block templates (conv-bn-relu is written CBR, k is the node's kernel):
//   VGG        CBR(k) -> CBR(k)
//   Residual   CBR(k) -> conv(k) -> bn, plus shortcut, add, relu. The shortcut
//              is a 1x1 conv projection when block input and output widths
//              differ, identity otherwise.
//   Dense      two CBR(k) layers of growth out/2, each concatenated onto its
//              input, then a CBR(1x1) transition to out.
//   Inception  CBR(1x1, out/4) | CBR(1x1, out/2) -> CBR(k, out/2) |
//              maxpool(3, s1) -> CBR(1x1, out/4), concatenated.
//
// Stem is a single 3x3 conv to base_channels; head is an optional upsample
// back to full resolution followed by a 1x1 conv to num_classes.

#ifndef MBNAS_ARCH_COMPILER_HPP_
#define MBNAS_ARCH_COMPILER_HPP_

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "mbnas/common.hpp"
#include "mbnas/search_space.hpp"

namespace mbnas {

enum class LayerKind { kConv, kBatchNorm, kRelu, kMaxPool, kUpsample, kConcat, kAdd };

inline std::string_view to_string(LayerKind k) {
  switch (k) {
    case LayerKind::kConv: return "conv2d";
    case LayerKind::kBatchNorm: return "batch_norm";
    case LayerKind::kRelu: return "relu";
    case LayerKind::kMaxPool: return "max_pool";
    case LayerKind::kUpsample: return "upsample_nearest";
    case LayerKind::kConcat: return "concat";
    case LayerKind::kAdd: return "add";
  }
  return "?";
}

inline LayerKind parse_layer_kind(std::string_view s) {
  for (auto k : {LayerKind::kConv, LayerKind::kBatchNorm, LayerKind::kRelu, LayerKind::kMaxPool,
                 LayerKind::kUpsample, LayerKind::kConcat, LayerKind::kAdd})
    if (to_string(k) == s) return k;
  throw ProtocolError("unknown layer kind '" + std::string(s) + "'");
}

// Layer inputs are indices into the owning cell's layer list, or one of these.
inline constexpr int kCellInput = -1;
inline constexpr int kSkipInput = -2;

struct Shape2D {
  int h = 0;
  int w = 0;
  friend bool operator==(const Shape2D&, const Shape2D&) = default;
};

struct LayerSpec {
  LayerKind kind = LayerKind::kConv;
  std::vector<int> inputs;
  int kernel = 0;  // conv and pool window; upsample scale factor
  int stride = 1;
  int padding = 0;
  int in_channels = 0;
  int out_channels = 0;
  Shape2D in_shape;
  Shape2D out_shape;
  bool bias = false;
  std::string role;  // "", "shortcut", "transition", "branch1".. for readers

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

struct CellIR {
  int index = 0;  // 1-based node index
  ChannelMove channel_move = ChannelMove::kSame;
  BlockType block_type = BlockType::kVgg;
  int conv_size = 3;
  int level = 0;
  int in_channels = 0;    // primary input width
  int skip_channels = 0;  // 0 without a skip edge
  int out_channels = 0;
  Shape2D in_shape;
  Shape2D out_shape;
  std::vector<LayerSpec> layers;

  friend bool operator==(const CellIR&, const CellIR&) = default;
};

enum class EdgeKind { kPrimary, kSkip };

// Endpoints: 0 is the stem, 1..n the cells, n+1 the head.
struct Edge {
  int from = 0;
  int to = 0;
  EdgeKind kind = EdgeKind::kPrimary;
  friend bool operator==(const Edge&, const Edge&) = default;
};

struct InputShape {
  int channels = 1;
  int height = 128;
  int width = 128;
  friend bool operator==(const InputShape&, const InputShape&) = default;
};

struct ArchitectureIR {
  std::string genotype_digest;
  InputShape input_shape;
  int num_classes = 2;
  std::vector<LayerSpec> stem;
  std::vector<CellIR> cells;
  std::vector<LayerSpec> head;
  std::vector<Edge> edges;

  friend bool operator==(const ArchitectureIR&, const ArchitectureIR&) = default;
};

namespace detail {

class LayerListBuilder {
 public:
  explicit LayerListBuilder(std::vector<LayerSpec>& out) : out_(out) {}

  int conv(int input, int cin, int cout, int k, Shape2D shape, std::string role = {}) {
    LayerSpec l;
    l.kind = LayerKind::kConv;
    l.inputs = {input};
    l.kernel = k;
    l.padding = (k - 1) / 2;
    l.in_channels = cin;
    l.out_channels = cout;
    l.in_shape = l.out_shape = shape;
    l.bias = true;
    l.role = std::move(role);
    return push(std::move(l));
  }

  int unary(LayerKind kind, int input, int channels, Shape2D shape) {
    LayerSpec l;
    l.kind = kind;
    l.inputs = {input};
    l.in_channels = l.out_channels = channels;
    l.in_shape = l.out_shape = shape;
    return push(std::move(l));
  }

  int cbr(int input, int cin, int cout, int k, Shape2D shape, std::string role = {}) {
    int c = conv(input, cin, cout, k, shape, std::move(role));
    int b = unary(LayerKind::kBatchNorm, c, cout, shape);
    return unary(LayerKind::kRelu, b, cout, shape);
  }

  int concat(std::vector<int> inputs, int channels, Shape2D shape) {
    LayerSpec l;
    l.kind = LayerKind::kConcat;
    l.inputs = std::move(inputs);
    l.in_channels = l.out_channels = channels;
    l.in_shape = l.out_shape = shape;
    return push(std::move(l));
  }

  int pool(int input, int channels, int window, int stride, int padding, Shape2D in,
           Shape2D out, std::string role = {}) {
    LayerSpec l;
    l.kind = LayerKind::kMaxPool;
    l.inputs = {input};
    l.kernel = window;
    l.stride = stride;
    l.padding = padding;
    l.in_channels = l.out_channels = channels;
    l.in_shape = in;
    l.out_shape = out;
    l.role = std::move(role);
    return push(std::move(l));
  }

  int upsample(int input, int channels, int factor, Shape2D in) {
    LayerSpec l;
    l.kind = LayerKind::kUpsample;
    l.inputs = {input};
    l.kernel = factor;
    l.in_channels = l.out_channels = channels;
    l.in_shape = in;
    l.out_shape = {in.h * factor, in.w * factor};
    return push(std::move(l));
  }

  int add(int a, int b, int channels, Shape2D shape) {
    LayerSpec l;
    l.kind = LayerKind::kAdd;
    l.inputs = {a, b};
    l.in_channels = l.out_channels = channels;
    l.in_shape = l.out_shape = shape;
    return push(std::move(l));
  }

 private:
  int push(LayerSpec l) {
    out_.push_back(std::move(l));
    return static_cast<int>(out_.size()) - 1;
  }
  std::vector<LayerSpec>& out_;
};

inline void build_block(LayerListBuilder& b, BlockType type, int x, int cin, int cout, int k,
                        Shape2D s) {
  switch (type) {
    case BlockType::kVgg: {
      int h = b.cbr(x, cin, cout, k, s);
      b.cbr(h, cout, cout, k, s);
      return;
    }
    case BlockType::kResidual: {
      int h = b.cbr(x, cin, cout, k, s);
      int c = b.conv(h, cout, cout, k, s);
      int n = b.unary(LayerKind::kBatchNorm, c, cout, s);
      int shortcut = cin == cout ? x : b.conv(x, cin, cout, 1, s, "shortcut");
      int sum = b.add(n, shortcut, cout, s);
      b.unary(LayerKind::kRelu, sum, cout, s);
      return;
    }
    case BlockType::kDense: {
      const int growth = cout / 2;
      int l1 = b.cbr(x, cin, growth, k, s);
      int c1 = b.concat({x, l1}, cin + growth, s);
      int l2 = b.cbr(c1, cin + growth, growth, k, s);
      int c2 = b.concat({c1, l2}, cin + 2 * growth, s);
      b.cbr(c2, cin + 2 * growth, cout, 1, s, "transition");
      return;
    }
    case BlockType::kInception: {
      const int quarter = cout / 4;
      const int half = cout / 2;
      int b1 = b.cbr(x, cin, quarter, 1, s, "branch1");
      int b2a = b.cbr(x, cin, half, 1, s, "branch2");
      int b2 = b.cbr(b2a, half, half, k, s, "branch2");
      int p = b.pool(x, cin, 3, 1, 1, s, s, "branch3");
      int b3 = b.cbr(p, cin, quarter, 1, s, "branch3");
      b.concat({b1, b2, b3}, quarter + half + quarter, s);
      return;
    }
  }
}

inline Shape2D level_shape(const InputShape& in, int level) {
  return {in.height >> level, in.width >> level};
}

}  // namespace detail

inline void check_ir(const ArchitectureIR& ir);

// Expands a valid genotype into the layer graph. Deterministic.
inline ArchitectureIR compile(const Genotype& g, const SpaceConfig& c, InputShape input,
                              int num_classes) {
  const Verdict verdict = validate(g, c);
  if (!verdict.valid()) throw ConfigError("cannot compile invalid genotype: " + verdict.describe());
  if (num_classes < 1) throw ConfigError("num_classes must be positive");
  if (input.channels < 1 || input.height < 1 || input.width < 1)
    throw ShapeError("input shape must be positive");
  const int div = 1 << c.max_levels;
  if (input.height % div != 0 || input.width % div != 0)
    throw ShapeError("input spatial dims " + std::to_string(input.height) + "x" +
                     std::to_string(input.width) + " are not divisible by " + std::to_string(div));

  ArchitectureIR ir;
  ir.genotype_digest = genotype_digest(g);
  ir.input_shape = input;
  ir.num_classes = num_classes;

  const Shape2D full = detail::level_shape(input, 0);
  {
    detail::LayerListBuilder b(ir.stem);
    b.conv(kCellInput, input.channels, c.base_channels, 3, full);
  }
  ir.edges.push_back({0, 1, EdgeKind::kPrimary});

  const auto levels = node_levels(g);
  int prev_level = 0;
  for (int i = 0; i < c.num_nodes; ++i) {
    const NodeGene& n = g.nodes[i];
    CellIR cell;
    cell.index = i + 1;
    cell.channel_move = n.channel_move;
    cell.block_type = n.block_type;
    cell.conv_size = n.conv_size;
    cell.level = levels[i];
    cell.in_channels = c.base_channels << prev_level;
    cell.out_channels = c.base_channels << cell.level;
    cell.in_shape = detail::level_shape(input, prev_level);
    cell.out_shape = detail::level_shape(input, cell.level);

    detail::LayerListBuilder b(cell.layers);
    int x = kCellInput;
    if (n.channel_move == ChannelMove::kDown) {
      x = b.pool(x, cell.in_channels, 2, 2, 0, cell.in_shape, cell.out_shape);
    } else if (n.channel_move == ChannelMove::kUp) {
      x = b.upsample(x, cell.in_channels, 2, cell.in_shape);
    }
    int block_in = cell.in_channels;
    if (n.skip_source) {
      cell.skip_channels = c.base_channels << levels[*n.skip_source];
      block_in += cell.skip_channels;
      x = b.concat({x, kSkipInput}, block_in, cell.out_shape);
      ir.edges.push_back({*n.skip_source + 1, i + 1, EdgeKind::kSkip});
    }
    detail::build_block(b, n.block_type, x, block_in, cell.out_channels, n.conv_size,
                        cell.out_shape);
    ir.cells.push_back(std::move(cell));
    ir.edges.push_back({i + 1, i + 2, EdgeKind::kPrimary});
    prev_level = levels[i];
  }

  {
    detail::LayerListBuilder b(ir.head);
    const int width = c.base_channels << prev_level;
    int x = kCellInput;
    if (prev_level > 0) x = b.upsample(x, width, 1 << prev_level, detail::level_shape(input, prev_level));
    b.conv(x, width, num_classes, 1, full);
  }
  check_ir(ir);
  return ir;
}

// Structural invariants of a compiled graph. Throws ShapeError on violation.
inline void check_ir(const ArchitectureIR& ir) {
  auto fail = [](const std::string& m) { throw ShapeError("ill-formed IR: " + m); };
  auto check_layers = [&](const std::vector<LayerSpec>& layers, const std::string& where) {
    for (std::size_t i = 0; i < layers.size(); ++i) {
      for (int in : layers[i].inputs)
        if (in >= static_cast<int>(i) || in < kSkipInput)
          fail(where + " layer " + std::to_string(i) + " has a non-causal input");
    }
  };
  const int n = static_cast<int>(ir.cells.size());
  if (ir.stem.empty() || ir.head.empty()) fail("missing stem or head");
  check_layers(ir.stem, "stem");
  check_layers(ir.head, "head");
  std::vector<int> primary(n + 2, 0), skip(n + 2, 0);
  for (const auto& e : ir.edges) {
    if (e.from < 0 || e.to > n + 1 || e.from >= e.to) fail("edge is not forward");
    (e.kind == EdgeKind::kPrimary ? primary : skip)[e.to]++;
  }
  for (int i = 1; i <= n + 1; ++i) {
    if (primary[i] != 1) fail("node " + std::to_string(i) + " needs exactly one primary input");
    if (skip[i] > 1) fail("node " + std::to_string(i) + " has more than one skip input");
  }
  int prev_channels = ir.stem.back().out_channels;
  Shape2D prev_shape = ir.stem.back().out_shape;
  for (const auto& cell : ir.cells) {
    const std::string where = "cell " + std::to_string(cell.index);
    check_layers(cell.layers, where);
    if (cell.layers.empty()) fail(where + " is empty");
    if (cell.in_channels != prev_channels || !(cell.in_shape == prev_shape))
      fail(where + " input does not match its predecessor");
    const int f = cell.channel_move == ChannelMove::kDown ? 2 : 1;
    const int u = cell.channel_move == ChannelMove::kUp ? 2 : 1;
    if (cell.out_shape.h * f != cell.in_shape.h * u || cell.out_shape.w * f != cell.in_shape.w * u)
      fail(where + " violates the scaling rule");
    if (cell.layers.back().out_channels != cell.out_channels)
      fail(where + " declared width differs from its last layer");
    if (!(cell.layers.back().out_shape == cell.out_shape)) fail(where + " output shape mismatch");
    if ((cell.skip_channels > 0) != (skip[cell.index] == 1)) fail(where + " skip edge mismatch");
    prev_channels = cell.out_channels;
    prev_shape = cell.out_shape;
  }
  if (ir.head.front().in_channels != prev_channels) fail("head input width mismatch");
  if (ir.head.back().out_channels != ir.num_classes) fail("head width differs from num_classes");
}

// ---------------------------------------------------------------------------
// Cost model.

struct CellCost {
  int index = 0;
  std::int64_t params = 0;
  std::int64_t macs = 0;
};

struct CostReport {
  std::int64_t total_params = 0;
  std::int64_t total_macs = 0;
  std::int64_t stem_params = 0;
  std::int64_t stem_macs = 0;
  std::int64_t head_params = 0;
  std::int64_t head_macs = 0;
  std::vector<CellCost> cells;

  double mmacs() const { return static_cast<double>(total_macs) / 1e6; }
};

inline std::int64_t layer_params(const LayerSpec& l) {
  switch (l.kind) {
    case LayerKind::kConv: {
      const std::int64_t k2 = static_cast<std::int64_t>(l.kernel) * l.kernel;
      return k2 * l.in_channels * l.out_channels + (l.bias ? l.out_channels : 0);
    }
    case LayerKind::kBatchNorm:
      return 2 * static_cast<std::int64_t>(l.out_channels);
    default:
      return 0;
  }
}

// Only convolutions count: H_out * W_out * C_out * k * k * C_in.
inline std::int64_t layer_macs(const LayerSpec& l, Shape2D out) {
  if (l.kind != LayerKind::kConv) return 0;
  const std::int64_t k2 = static_cast<std::int64_t>(l.kernel) * l.kernel;
  return static_cast<std::int64_t>(out.h) * out.w * l.out_channels * k2 * l.in_channels;
}

namespace detail {

// Rescales an IR shape to a different input resolution.
inline Shape2D rescale(Shape2D s, const InputShape& from, const InputShape& to) {
  return {static_cast<int>(static_cast<std::int64_t>(s.h) * to.height / from.height),
          static_cast<int>(static_cast<std::int64_t>(s.w) * to.width / from.width)};
}

inline CostReport cost(const ArchitectureIR& ir, const InputShape& at) {
  if (at.height <= 0 || at.width <= 0) throw ShapeError("input shape must be positive");
  for (const auto& cell : ir.cells) {
    const int f = ir.input_shape.height / cell.out_shape.h;
    if (at.height % f != 0 || at.width % (ir.input_shape.width / cell.out_shape.w) != 0)
      throw ShapeError("input shape not divisible by the network's downscaling factor");
  }
  CostReport r;
  auto sum = [&](const std::vector<LayerSpec>& layers, std::int64_t& p, std::int64_t& m) {
    for (const auto& l : layers) {
      p += layer_params(l);
      m += layer_macs(l, rescale(l.out_shape, ir.input_shape, at));
    }
  };
  sum(ir.stem, r.stem_params, r.stem_macs);
  sum(ir.head, r.head_params, r.head_macs);
  r.total_params = r.stem_params + r.head_params;
  r.total_macs = r.stem_macs + r.head_macs;
  for (const auto& cell : ir.cells) {
    CellCost cc;
    cc.index = cell.index;
    sum(cell.layers, cc.params, cc.macs);
    r.total_params += cc.params;
    r.total_macs += cc.macs;
    r.cells.push_back(cc);
  }
  return r;
}

}  // namespace detail

inline CostReport count_params(const ArchitectureIR& ir) { return detail::cost(ir, ir.input_shape); }

inline CostReport count_mmacs(const ArchitectureIR& ir, const InputShape& input_shape) {
  return detail::cost(ir, input_shape);
}

inline nlohmann::json cost_to_json(const CostReport& r) {
  nlohmann::json cells = nlohmann::json::array();
  for (const auto& c : r.cells)
    cells.push_back({{"index", c.index}, {"params", c.params}, {"macs", c.macs}});
  return {{"total_params", r.total_params},
          {"total_macs", r.total_macs},
          {"total_mmacs", r.mmacs()},
          {"stem", {{"params", r.stem_params}, {"macs", r.stem_macs}}},
          {"head", {{"params", r.head_params}, {"macs", r.head_macs}}},
          {"cells", cells}};
}

// ---------------------------------------------------------------------------
// IR document. Keys are emitted in sorted order, so dump() is stable.

inline constexpr std::string_view kIrFormatVersion = "1.0";

namespace detail {

inline nlohmann::json layer_to_json(const LayerSpec& l) {
  return {{"kind", to_string(l.kind)},
          {"inputs", l.inputs},
          {"kernel", l.kernel},
          {"stride", l.stride},
          {"padding", l.padding},
          {"in_channels", l.in_channels},
          {"out_channels", l.out_channels},
          {"in_shape", {l.in_shape.h, l.in_shape.w}},
          {"out_shape", {l.out_shape.h, l.out_shape.w}},
          {"bias", l.bias},
          {"role", l.role}};
}

inline LayerSpec layer_from_json(const nlohmann::json& j) {
  LayerSpec l;
  l.kind = parse_layer_kind(j.at("kind").get<std::string>());
  l.inputs = j.at("inputs").get<std::vector<int>>();
  l.kernel = j.at("kernel").get<int>();
  l.stride = j.at("stride").get<int>();
  l.padding = j.at("padding").get<int>();
  l.in_channels = j.at("in_channels").get<int>();
  l.out_channels = j.at("out_channels").get<int>();
  l.in_shape = {j.at("in_shape").at(0).get<int>(), j.at("in_shape").at(1).get<int>()};
  l.out_shape = {j.at("out_shape").at(0).get<int>(), j.at("out_shape").at(1).get<int>()};
  l.bias = j.at("bias").get<bool>();
  l.role = j.at("role").get<std::string>();
  return l;
}

inline nlohmann::json layers_to_json(const std::vector<LayerSpec>& layers) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& l : layers) out.push_back(layer_to_json(l));
  return out;
}

inline std::vector<LayerSpec> layers_from_json(const nlohmann::json& j) {
  std::vector<LayerSpec> out;
  for (const auto& l : j) out.push_back(layer_from_json(l));
  return out;
}

}  // namespace detail

inline nlohmann::json export_ir(const ArchitectureIR& ir) {
  nlohmann::json cells = nlohmann::json::array();
  for (const auto& c : ir.cells) {
    cells.push_back({{"index", c.index},
                     {"channel_move", to_string(c.channel_move)},
                     {"block_type", to_string(c.block_type)},
                     {"conv_size", c.conv_size},
                     {"level", c.level},
                     {"in_channels", c.in_channels},
                     {"skip_channels", c.skip_channels},
                     {"out_channels", c.out_channels},
                     {"in_shape", {c.in_shape.h, c.in_shape.w}},
                     {"out_shape", {c.out_shape.h, c.out_shape.w}},
                     {"layers", detail::layers_to_json(c.layers)}});
  }
  nlohmann::json edges = nlohmann::json::array();
  for (const auto& e : ir.edges)
    edges.push_back(
        {{"from", e.from}, {"to", e.to}, {"kind", e.kind == EdgeKind::kSkip ? "skip" : "primary"}});
  return {{"version", kIrFormatVersion},
          {"genotype_digest", ir.genotype_digest},
          {"input_shape", {ir.input_shape.channels, ir.input_shape.height, ir.input_shape.width}},
          {"num_classes", ir.num_classes},
          {"stem", detail::layers_to_json(ir.stem)},
          {"cells", cells},
          {"head", detail::layers_to_json(ir.head)},
          {"edges", edges}};
}

inline ArchitectureIR import_ir(const nlohmann::json& doc) {
  ArchitectureIR ir;
  try {
    const auto version = doc.at("version").get<std::string>();
    if (version.substr(0, version.find('.')) != kIrFormatVersion.substr(0, 1))
      throw ProtocolError("unsupported IR major version " + version);
    ir.genotype_digest = doc.at("genotype_digest").get<std::string>();
    const auto& in = doc.at("input_shape");
    ir.input_shape = {in.at(0).get<int>(), in.at(1).get<int>(), in.at(2).get<int>()};
    ir.num_classes = doc.at("num_classes").get<int>();
    ir.stem = detail::layers_from_json(doc.at("stem"));
    ir.head = detail::layers_from_json(doc.at("head"));
    for (const auto& c : doc.at("cells")) {
      CellIR cell;
      cell.index = c.at("index").get<int>();
      cell.channel_move = parse_channel_move(c.at("channel_move").get<std::string>());
      cell.block_type = parse_block_type(c.at("block_type").get<std::string>());
      cell.conv_size = c.at("conv_size").get<int>();
      cell.level = c.at("level").get<int>();
      cell.in_channels = c.at("in_channels").get<int>();
      cell.skip_channels = c.at("skip_channels").get<int>();
      cell.out_channels = c.at("out_channels").get<int>();
      cell.in_shape = {c.at("in_shape").at(0).get<int>(), c.at("in_shape").at(1).get<int>()};
      cell.out_shape = {c.at("out_shape").at(0).get<int>(), c.at("out_shape").at(1).get<int>()};
      cell.layers = detail::layers_from_json(c.at("layers"));
      ir.cells.push_back(std::move(cell));
    }
    for (const auto& e : doc.at("edges")) {
      const auto kind = e.at("kind").get<std::string>();
      if (kind != "skip" && kind != "primary") throw ProtocolError("unknown edge kind " + kind);
      ir.edges.push_back({e.at("from").get<int>(), e.at("to").get<int>(),
                          kind == "skip" ? EdgeKind::kSkip : EdgeKind::kPrimary});
    }
  } catch (const nlohmann::json::exception& e) {
    throw ProtocolError(std::string("malformed IR document: ") + e.what());
  } catch (const StructuralError& e) {
    throw ProtocolError(std::string("malformed IR document: ") + e.what());
  }
  check_ir(ir);
  return ir;
}

inline std::string ir_digest(const ArchitectureIR& ir) {
  return detail::digest_of(export_ir(ir).dump());
}

}  // namespace mbnas

#endif  // MBNAS_ARCH_COMPILER_HPP_
