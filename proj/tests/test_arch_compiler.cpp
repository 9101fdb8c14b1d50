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

#include "mbnas/arch_compiler.hpp"
#include "oracles.hpp"

namespace mbnas {
namespace {

const InputShape kInput{1, 128, 128};

int count_kind(const ArchitectureIR& ir, LayerKind k) {
  int n = 0;
  for (const auto& c : ir.cells)
    for (const auto& l : c.layers) n += l.kind == k;
  return n;
}

Genotype all_same(int n, BlockType b = BlockType::kVgg, int conv = 3) {
  Genotype g;
  for (int i = 0; i < n; ++i) g.nodes.push_back({ChannelMove::kSame, b, conv, {}});
  return g;
}

TEST(Compile, CanonicalUnetStructure) {
  SpaceConfig c;
  const auto ir = compile(canonical_unet(c), c, kInput, 2);
  ASSERT_EQ(ir.cells.size(), 10u);
  std::vector<int> levels;
  for (const auto& cell : ir.cells) levels.push_back(cell.level);
  EXPECT_EQ(levels, (std::vector<int>{0, 1, 2, 3, 4, 3, 2, 1, 0, 0}));
  EXPECT_EQ(count_kind(ir, LayerKind::kConcat), 4);
  int skips = 0;
  for (const auto& e : ir.edges) skips += e.kind == EdgeKind::kSkip;
  EXPECT_EQ(skips, 4);
  EXPECT_EQ(ir.cells[4].out_channels, 32 * 16);
  EXPECT_EQ(ir.cells[4].out_shape, (Shape2D{8, 8}));
  EXPECT_EQ(ir.head.back().out_shape, (Shape2D{128, 128}));
}

TEST(Compile, AllSameKeepsFullResolution) {
  SpaceConfig c;
  const auto ir = compile(all_same(10), c, kInput, 2);
  for (const auto& cell : ir.cells) {
    EXPECT_EQ(cell.in_shape, (Shape2D{128, 128}));
    EXPECT_EQ(cell.out_shape, (Shape2D{128, 128}));
    EXPECT_EQ(cell.out_channels, 32);
  }
}

TEST(Compile, SkipWidensCellInput) {
  SpaceConfig c;
  const auto g = canonical_unet(c);
  const auto ir = compile(g, c, kInput, 2);
  const auto& cell6 = ir.cells[5];
  EXPECT_EQ(cell6.in_channels, 512);   // from node 5 at level 4
  EXPECT_EQ(cell6.skip_channels, 256);  // node 4 at level 3
  // Upsample, then concatenation, then the first conv of the block.
  EXPECT_EQ(cell6.layers[0].kind, LayerKind::kUpsample);
  EXPECT_EQ(cell6.layers[1].kind, LayerKind::kConcat);
  EXPECT_EQ(cell6.layers[1].out_channels, 512 + 256);
  EXPECT_EQ(cell6.layers[2].in_channels, 512 + 256);
}

TEST(Compile, SkipConcatIsFirstOpInSameCells) {
  SpaceConfig c;
  Genotype g = all_same(10);
  g.nodes[4].skip_source = 1;
  const auto ir = compile(g, c, kInput, 2);
  EXPECT_EQ(ir.cells[4].layers[0].kind, LayerKind::kConcat);
  EXPECT_EQ(ir.cells[4].layers[0].inputs, (std::vector<int>{kCellInput, kSkipInput}));
}

TEST(Compile, RejectsInvalidGenotypeAndBadShape) {
  SpaceConfig c;
  Genotype g = all_same(10);
  g.nodes[0].channel_move = ChannelMove::kUp;
  try {
    compile(g, c, kInput, 2);
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("resolution-floor"), std::string::npos);
  }
  EXPECT_THROW(compile(all_same(10), c, InputShape{1, 120, 128}, 2), ShapeError);
}

TEST(Compile, ShapeSoundnessOnRandomGenotypes) {
  SpaceConfig c;
  for (std::uint64_t s = 0; s < 200; ++s) {
    const auto g = random_genotype(c, s);
    const auto ir = compile(g, c, kInput, 3);
    Shape2D prev{128, 128};
    for (const auto& cell : ir.cells) {
      EXPECT_EQ(cell.in_shape, prev);
      const int h = cell.channel_move == ChannelMove::kDown ? prev.h / 2
                    : cell.channel_move == ChannelMove::kUp ? prev.h * 2
                                                            : prev.h;
      EXPECT_EQ(cell.out_shape.h, h);
      EXPECT_EQ(cell.out_channels, 32 << cell.level);
      EXPECT_EQ(cell.layers.back().out_channels, cell.out_channels);
      for (const auto& l : cell.layers)
        if (l.kind == LayerKind::kConv) {
          EXPECT_EQ(l.in_shape, l.out_shape);
        }
      prev = cell.out_shape;
    }
    EXPECT_EQ(ir.head.back().out_shape, (Shape2D{128, 128}));
    EXPECT_EQ(ir.head.back().out_channels, 3);
  }
}

TEST(Compile, Deterministic) {
  SpaceConfig c;
  const auto g = random_genotype(c, 11);
  EXPECT_EQ(compile(g, c, kInput, 2), compile(g, c, kInput, 2));
}

TEST(Blocks, DenseChannelLaw) {
  SpaceConfig c;
  for (std::uint64_t s = 0; s < 50; ++s) {
    Genotype g = random_genotype(c, s);
    for (auto& n : g.nodes) n.block_type = BlockType::kDense;
    const auto ir = compile(g, c, kInput, 2);
    for (const auto& cell : ir.cells) {
      const int growth = cell.out_channels / 2;
      const int cin = cell.in_channels + cell.skip_channels;
      std::vector<int> conv_inputs;
      for (const auto& l : cell.layers)
        if (l.kind == LayerKind::kConv) conv_inputs.push_back(l.in_channels);
      ASSERT_EQ(conv_inputs.size(), 3u);
      for (int i = 0; i < 3; ++i) EXPECT_EQ(conv_inputs[i], cin + i * growth);
    }
  }
}

TEST(Blocks, ResidualProjectionOnlyWhenWidthChanges) {
  SpaceConfig c;
  for (std::uint64_t s = 0; s < 50; ++s) {
    Genotype g = random_genotype(c, s);
    for (auto& n : g.nodes) n.block_type = BlockType::kResidual;
    const auto ir = compile(g, c, kInput, 2);
    for (const auto& cell : ir.cells) {
      int projections = 0;
      for (const auto& l : cell.layers) projections += l.role == "shortcut";
      const int cin = cell.in_channels + cell.skip_channels;
      const bool scaling = cell.channel_move != ChannelMove::kSame;
      if (cin == cell.out_channels && !scaling) {
        EXPECT_EQ(projections, 0);
      } else if (cin != cell.out_channels) {
        EXPECT_EQ(projections, 1);
      }
      EXPECT_LE(projections, 1);
    }
  }
}

TEST(Blocks, InceptionBranchWidths) {
  SpaceConfig c;
  const auto ir = compile(all_same(10, BlockType::kInception, 5), c, kInput, 2);
  const auto& cell = ir.cells[0];
  EXPECT_EQ(cell.layers.back().kind, LayerKind::kConcat);
  EXPECT_EQ(cell.layers.back().out_channels, 32);
  int kxk = 0;
  for (const auto& l : cell.layers)
    if (l.kind == LayerKind::kConv && l.kernel == 5) {
      ++kxk;
      EXPECT_EQ(l.out_channels, 16);
      EXPECT_EQ(l.padding, 2);
    }
  EXPECT_EQ(kxk, 1);
}

TEST(Cost, SingleConvClosedForms) {
  LayerSpec l;
  l.kind = LayerKind::kConv;
  l.kernel = 3;
  l.in_channels = 1;
  l.out_channels = 8;
  l.bias = true;
  EXPECT_EQ(layer_params(l), 80);
  EXPECT_EQ(layer_macs(l, {128, 128}), 1179648);
  EXPECT_EQ(layer_macs(l, {64, 64}) * 4, layer_macs(l, {128, 128}));
}

TEST(Cost, StemAndHeadOnly) {
  ArchitectureIR ir;
  ir.input_shape = kInput;
  ir.num_classes = 2;
  detail::LayerListBuilder stem(ir.stem), head(ir.head);
  stem.conv(kCellInput, 1, 32, 3, {128, 128});
  head.conv(kCellInput, 32, 2, 1, {128, 128});
  const auto r = count_params(ir);
  EXPECT_EQ(r.stem_params, 320);
  EXPECT_EQ(r.head_params, 66);
  EXPECT_EQ(r.total_params, 386);
}

TEST(Cost, MatchesClosedFormOraclePerBlock) {
  for (auto block : kAllBlocks) {
    SpaceConfig c;
    for (std::uint64_t s = 0; s < 20; ++s) {
      Genotype g = random_genotype(c, 1000 + s);
      for (auto& n : g.nodes) n.block_type = block;
      const auto ir = compile(g, c, kInput, 2);
      const auto want = oracle::network_cost(g, c, 1, 128, 128, 2);
      EXPECT_EQ(count_params(ir).total_params, want.params) << to_string(block) << " seed " << s;
      EXPECT_EQ(count_mmacs(ir, kInput).total_macs, want.macs) << to_string(block) << " seed " << s;
    }
  }
}

TEST(Cost, TotalsAreSumsOfParts) {
  SpaceConfig c;
  const auto ir = compile(random_genotype(c, 5), c, kInput, 2);
  const auto r = count_params(ir);
  std::int64_t p = r.stem_params + r.head_params, m = r.stem_macs + r.head_macs;
  for (const auto& cc : r.cells) {
    p += cc.params;
    m += cc.macs;
  }
  EXPECT_EQ(p, r.total_params);
  EXPECT_EQ(m, r.total_macs);
}

TEST(Cost, MacsRescaleWithInputShape) {
  SpaceConfig c;
  const auto g = random_genotype(c, 9);
  const auto ir = compile(g, c, kInput, 2);
  const auto small = compile(g, c, InputShape{1, 64, 64}, 2);
  EXPECT_EQ(count_mmacs(ir, InputShape{1, 64, 64}).total_macs, count_mmacs(small, small.input_shape).total_macs);
  EXPECT_EQ(count_mmacs(ir, InputShape{1, 64, 64}).total_macs * 4, count_mmacs(ir, kInput).total_macs);
  // The canonical U-Net reaches level 4, so 40 is not divisible by its
  // downscaling factor.
  const auto unet = compile(canonical_unet(c), c, kInput, 2);
  EXPECT_THROW(count_mmacs(unet, InputShape{1, 40, 40}), ShapeError);
}

TEST(Cost, LargerKernelNeverCheaper) {
  SpaceConfig c;
  for (std::uint64_t s = 0; s < 30; ++s) {
    const auto g = random_genotype(c, s);
    const auto base = count_params(compile(g, c, kInput, 2));
    for (int i = 0; i < 10; ++i) {
      if (g.nodes[i].conv_size != 3) continue;
      Genotype h = g;
      h.nodes[i].conv_size = 5;
      const auto bigger = count_params(compile(h, c, kInput, 2));
      EXPECT_GE(bigger.total_params, base.total_params);
      EXPECT_GE(bigger.total_macs, base.total_macs);
    }
  }
}

TEST(Cost, CanonicalUnetAtBase64IsTensOfMillions) {
  SpaceConfig c;
  c.base_channels = 64;
  const auto ir = compile(canonical_unet(c), c, kInput, 2);
  const auto r = count_params(ir);
  EXPECT_GE(r.total_params, 10'000'000);
  EXPECT_LT(r.total_params, 100'000'000);
  EXPECT_EQ(r.total_params, oracle::network_cost(canonical_unet(c), c, 1, 128, 128, 2).params);
}

TEST(IrDocument, RoundTripIsByteIdentical) {
  SpaceConfig c;
  for (std::uint64_t s = 0; s < 20; ++s) {
    const auto ir = compile(random_genotype(c, s), c, kInput, 2);
    const auto doc = export_ir(ir);
    const auto back = import_ir(nlohmann::json::parse(doc.dump()));
    EXPECT_EQ(back, ir);
    EXPECT_EQ(export_ir(back).dump(), doc.dump());
  }
}

TEST(IrDocument, CanonicalUnetHasFourSkipEdges) {
  SpaceConfig c;
  const auto doc = export_ir(compile(canonical_unet(c), c, kInput, 2));
  int skips = 0;
  for (const auto& e : doc.at("edges")) skips += e.at("kind") == "skip";
  EXPECT_EQ(skips, 4);
  EXPECT_EQ(doc.at("version"), "1.0");
  EXPECT_EQ(doc.at("cells").size(), 10u);
  EXPECT_EQ(doc.at("cells")[0].at("layers")[0].at("kind"), "conv2d");
}

TEST(IrDocument, DigestChangesWithConvSize) {
  SpaceConfig c;
  Genotype g = canonical_unet(c);
  const auto a = ir_digest(compile(g, c, kInput, 2));
  g.nodes[2].conv_size = 5;
  EXPECT_NE(ir_digest(compile(g, c, kInput, 2)), a);
}

}  // namespace
}  // namespace mbnas
