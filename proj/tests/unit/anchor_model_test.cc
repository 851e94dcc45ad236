// Copyright 2026 The Anchorprune Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "anchorprune/anchor_model.h"

#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "anchorprune/digest.h"
#include "anchorprune/errors.h"
#include "anchorprune/random.h"
#include "gtest/gtest.h"
#include "testing/oracles.h"
#include "testing/test_util.h"

namespace anchorprune {
namespace {

using ::anchorprune::testing::MakeHead;
using ::anchorprune::testing::ReadFile;

std::shared_ptr<const HeadSpec> LoadDataHead(const std::string& name) {
  return std::make_shared<const HeadSpec>(HeadSpec::FromJson(
      ReadFile(std::string(ANCHORPRUNE_DATA_DIR) + "/" + name)));
}

// Keeps the first `counts[i]` slots of layer i.
AnchorConfiguration KeepFirst(std::shared_ptr<const HeadSpec> head,
                              const std::vector<int>& counts) {
  std::vector<AnchorId> kept;
  for (std::size_t l = 0; l < counts.size(); ++l) {
    for (int s = 0; s < counts[l]; ++s) {
      kept.push_back({static_cast<int>(l), s});
    }
  }
  return AnchorConfiguration::FromKept(std::move(head), kept);
}

TEST(AnchorShapeTest, WidthAndHeightPreserveAreaAndRatio) {
  const AnchorShape s{32.0, 2.0};
  EXPECT_DOUBLE_EQ(s.width() * s.height(), 32.0 * 32.0);
  EXPECT_DOUBLE_EQ(s.width() / s.height(), 2.0);
}

TEST(HeadSpecTest, CanonicalOrderAndIndices) {
  auto head = MakeHead({4, 2}, {3, 2});
  ASSERT_EQ(head->num_anchors(), 5u);
  EXPECT_EQ(head->anchor(0), (AnchorId{0, 0}));
  EXPECT_EQ(head->anchor(3), (AnchorId{1, 0}));
  EXPECT_EQ(head->layer_begin(1), 3u);
  EXPECT_EQ(head->layer_end(1), 5u);
  EXPECT_EQ(head->IndexOf({1, 1}), 4u);
  EXPECT_FALSE(head->IndexOf({1, 2}).has_value());
  EXPECT_FALSE(head->IndexOf({7, 0}).has_value());
}

TEST(HeadSpecTest, ConstructorSortsSlots) {
  LayerSpec l{0, 2, 2, 8, 16, {{2, {10, 1}}, {0, {20, 1}}, {1, {30, 1}}}};
  HeadSpec head(HeadStyle::kPerLayerConv, 2, 4, 3, {l});
  EXPECT_EQ(head.anchor(0), (AnchorId{0, 0}));
  EXPECT_DOUBLE_EQ(head.shape(0).scale, 20);
  EXPECT_DOUBLE_EQ(head.shape(2).scale, 10);
}

TEST(HeadSpecTest, JsonRoundTripAndDigest) {
  auto head = LoadDataHead("ssd300.json");
  const HeadSpec again = HeadSpec::FromJson(head->ToJson());
  EXPECT_EQ(again, *head);
  EXPECT_EQ(HeadSpec::FromJson(head->ToPrettyJson()), *head);
  EXPECT_EQ(head->Digest(), Sha256Hex(head->ToJson()));
  EXPECT_EQ(head->Digest().size(), 64u);
  // Canonical text has no whitespace and starts with the first sorted key.
  EXPECT_EQ(head->ToJson().find(' '), std::string::npos);
  EXPECT_EQ(head->ToJson().rfind("{\"box_outputs\":4,", 0), 0u);
}

TEST(HeadSpecTest, DigestTracksContent) {
  auto a = MakeHead({4}, {2}, 3);
  auto b = MakeHead({4}, {2}, 4);
  auto c = MakeHead({4}, {2}, 3);
  EXPECT_NE(a->Digest(), b->Digest());
  EXPECT_EQ(a->Digest(), c->Digest());
}

TEST(HeadSpecTest, RejectsInvalidHeads) {
  const LayerSpec ok{0, 2, 2, 8, 16, {{0, {10, 1}}}};
  EXPECT_THROW(HeadSpec(HeadStyle::kPerLayerConv, 0, 4, 3, {ok}), InputError);
  EXPECT_THROW(HeadSpec(HeadStyle::kPerLayerConv, 2, 4, 3, {}), InputError);
  LayerSpec gap = ok;
  gap.index = 1;
  EXPECT_THROW(HeadSpec(HeadStyle::kPerLayerConv, 2, 4, 3, {gap}), InputError);
  LayerSpec dup = ok;
  dup.anchors.push_back({0, {12, 1}});
  EXPECT_THROW(HeadSpec(HeadStyle::kPerLayerConv, 2, 4, 3, {dup}), InputError);
  LayerSpec bad_shape = ok;
  bad_shape.anchors[0].shape.scale = 0;
  EXPECT_THROW(HeadSpec(HeadStyle::kPerLayerConv, 2, 4, 3, {bad_shape}),
               InputError);
  LayerSpec zero = ok;
  zero.height = 0;
  EXPECT_THROW(HeadSpec(HeadStyle::kPerLayerConv, 2, 4, 3, {zero}), InputError);
  EXPECT_THROW(HeadSpec(HeadStyle::kSharedTower, 2, 4, 3, {ok}), InputError);
  LayerSpec other = ok;
  other.index = 1;
  other.anchors = {{1, {10, 1}}};
  EXPECT_THROW(HeadSpec(HeadStyle::kSharedTower, 2, 4, 3, {ok, other},
                        TowerSpec{4, 256, 2}),
               InputError);
}

TEST(HeadSpecTest, FromJsonErrorsNameTheField) {
  try {
    HeadSpec::FromJson(
        R"({"style":"PerLayerConv","num_classes":2,"box_outputs":4,)"
        R"("kernel":3,"layers":[{"index":0,"h":2,"w":2,"stride":8,)"
        R"("in_channels":8,"anchors":[{"slot":0,"scale":1,"ratio":1,"x":0}]}]})");
    FAIL() << "expected InputError";
  } catch (const InputError& e) {
    EXPECT_EQ(e.locus(), "layers[0].anchors[0]");
  }
  EXPECT_THROW(HeadSpec::FromJson("{"), InputError);
  EXPECT_THROW(HeadSpec::FromJson(R"({"style":"Nope"})"), InputError);
}

TEST(AnchorMaskTest, HexEncoding) {
  AnchorMask m(10);
  EXPECT_EQ(m.ToHex(), "000");
  m.set(0);
  m.set(9);
  EXPECT_EQ(m.ToHex(), "201");
  EXPECT_EQ(AnchorMask::FromHex("0x201", 10), m);
  EXPECT_EQ(AnchorMask::FromHex("0000201", 10), m);
  EXPECT_THROW(AnchorMask::FromHex("400", 10), InputError);
  EXPECT_THROW(AnchorMask::FromHex("", 10), InputError);
  EXPECT_THROW(AnchorMask::FromHex("2g1", 10), InputError);
  EXPECT_EQ(AnchorMask(130, true).ToHex().size(), 33u);
}

TEST(AnchorMaskTest, OrderingMatchesIntegerValue) {
  KeyedRng rng({1234});
  for (int trial = 0; trial < 200; ++trial) {
    AnchorMask a(20), b(20);
    std::uint64_t va = rng.Below(1 << 20), vb = rng.Below(1 << 20);
    for (int i = 0; i < 20; ++i) {
      if (va >> i & 1) a.set(i);
      if (vb >> i & 1) b.set(i);
    }
    EXPECT_EQ(a < b, va < vb);
    EXPECT_EQ(a == b, va == vb);
    EXPECT_EQ(a.count(), static_cast<std::size_t>(__builtin_popcountll(va)));
    EXPECT_EQ(AnchorMask::FromHex(a.ToHex(), 20), a);
  }
}

TEST(AnchorMaskTest, WideMasksRoundTrip) {
  KeyedRng rng({99});
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 1 + rng.Below(200);
    AnchorMask m(n);
    for (std::size_t i = 0; i < n; ++i) {
      if (rng.Below(2)) m.set(i);
    }
    EXPECT_EQ(AnchorMask::FromHex(m.ToHex(), n), m);
    EXPECT_EQ(m.ToHex().size(), (n + 3) / 4);
  }
}

TEST(AnchorConfigurationTest, ParseAndQueries) {
  auto head = MakeHead({4, 2}, {3, 2});
  const auto full = AnchorConfiguration::Parse(head, "full");
  EXPECT_EQ(full.size(), 5u);
  EXPECT_EQ(full.Encoding(), "1f");
  EXPECT_TRUE(AnchorConfiguration::Parse(head, "empty").empty());
  const auto c = AnchorConfiguration::Parse(head, "0x12");
  EXPECT_EQ(c.Kept(), (std::vector<AnchorId>{{0, 1}, {1, 1}}));
  EXPECT_EQ(c.KeptInLayer(0), 1);
  EXPECT_TRUE(c.Contains(AnchorId{1, 1}));
  EXPECT_FALSE(c.Contains(AnchorId{1, 0}));
  EXPECT_FALSE(c.Contains(AnchorId{9, 9}));
  EXPECT_EQ(full.Without(4).Encoding(), "0f");
  const std::vector<AnchorId> bad{{0, 7}};
  EXPECT_THROW(AnchorConfiguration::FromKept(head, bad), InputError);
}

TEST(CostTest, SsdTableOneCounts) {
  auto head = LoadDataHead("ssd300.json");
  EXPECT_EQ(head->num_anchors(), 30u);
  EXPECT_EQ(BBoxCount(AnchorConfiguration::Full(head)), 8732);
  EXPECT_EQ(BBoxCount(KeepFirst(head, {4, 6, 6, 6, 4, 4})), 8732);
  EXPECT_EQ(BBoxCount(KeepFirst(head, {2, 6, 6, 6, 4, 4})), 5844);
  EXPECT_EQ(BBoxCount(AnchorConfiguration::Empty(head)), 0);
}

TEST(CostTest, SsdHeadFlops) {
  auto head = LoadDataHead("ssd300.json");
  EXPECT_EQ(HeadFlops(AnchorConfiguration::Full(head)), 4231319040);
  EXPECT_EQ(HeadFlops(KeepFirst(head, {4, 4, 4, 4, 4, 4})), 3577605120);
  EXPECT_EQ(HeadFlops(KeepFirst(head, {2, 2, 2, 2, 2, 2})), 1788802560);
  EXPECT_EQ(HeadFlops(AnchorConfiguration::Empty(head)), 0);
}

TEST(CostTest, MatchesOracleOnRandomConfigurations) {
  const auto heads = {LoadDataHead("ssd300.json"),
                      LoadDataHead("retinanet300.json"),
                      MakeHead({7, 5, 3}, {2, 4, 1}, 11, 48)};
  KeyedRng rng({7});
  for (const auto& head : heads) {
    for (int trial = 0; trial < 100; ++trial) {
      AnchorMask m(head->num_anchors());
      for (std::size_t i = 0; i < m.size(); ++i) {
        if (rng.Below(2)) m.set(i);
      }
      const AnchorConfiguration c(head, m);
      const auto kept = oracle::KeptPerLayer(c);
      EXPECT_EQ(BBoxCount(c), oracle::BoxCount(*head, kept));
      EXPECT_EQ(HeadFlops(c), oracle::Flops(*head, kept));
    }
  }
}

TEST(CostTest, CostsAreMonotoneUnderRemoval) {
  auto head = LoadDataHead("retinanet300.json");
  KeyedRng rng({11});
  AnchorConfiguration c = AnchorConfiguration::Full(head);
  while (!c.empty()) {
    const auto kept = c.Kept();
    const auto next = c.Without(*head->IndexOf(kept[rng.Below(kept.size())]));
    EXPECT_LT(BBoxCount(next), BBoxCount(c));
    EXPECT_LE(HeadFlops(next), HeadFlops(c));
    c = next;
  }
}

TEST(CostTest, RetinaNetSharedTower) {
  auto head = LoadDataHead("retinanet300.json");
  EXPECT_EQ(head->style(), HeadStyle::kSharedTower);
  EXPECT_EQ(head->num_anchors(), 45u);
  const auto full = AnchorConfiguration::Full(head);
  EXPECT_EQ(HeadFlops(full), 12526746624);
  // Removing every anchor of a layer also removes that layer's tower.
  std::vector<AnchorId> kept;
  for (int s = 0; s < 9; ++s) kept.push_back({4, s});
  const auto last_only = AnchorConfiguration::FromKept(head, kept);
  EXPECT_EQ(HeadFlops(last_only),
            oracle::Flops(*head, oracle::KeptPerLayer(last_only)));
  EXPECT_EQ(HeadFlops(last_only), 9LL * 9 * 256 * (2 * 4 * 256 + 9 * 84));
}

TEST(CostTest, EqualAnchorsPutThreeQuartersOfBoxesOnFirstLayer) {
  auto head = LoadDataHead("ssd300.json");
  const auto c = KeepFirst(head, {4, 4, 4, 4, 4, 4});
  const std::vector<AnchorId> first{{0, 0}, {0, 1}, {0, 2}, {0, 3}};
  const double share =
      static_cast<double>(
          BBoxCount(AnchorConfiguration::FromKept(head, first))) /
      BBoxCount(c);
  EXPECT_DOUBLE_EQ(share, 1444.0 / 1940.0);
}

TEST(OverAnchorizedTest, DenseSsdHead) {
  const OverAnchorSpec spec = OverAnchorSpec::FromJson(
      ReadFile(std::string(ANCHORPRUNE_DATA_DIR) +
               "/ssd300_overanchorized.json"));
  auto head = std::make_shared<const HeadSpec>(GenerateOverAnchorized(spec));
  EXPECT_EQ(head->num_anchors(), 48u);
  const auto full = AnchorConfiguration::Full(head);
  EXPECT_EQ(BBoxCount(full), 13584);
  EXPECT_EQ(HeadFlops(full) / 1000000, 6673);
}

TEST(OverAnchorizedTest, ScaleMajorSlotsAndValidation) {
  OverAnchorSpec spec;
  spec.num_classes = 2;
  spec.layers = {{0, 4, 4, 8, 16, {}}};
  spec.scales_per_layer = {{10, 20}};
  spec.ratios_per_layer = {{1, 2, 0.5}};
  const HeadSpec head = GenerateOverAnchorized(spec);
  ASSERT_EQ(head.num_anchors(), 6u);
  EXPECT_DOUBLE_EQ(head.shape(1).scale, 10);
  EXPECT_DOUBLE_EQ(head.shape(1).aspect_ratio, 2);
  EXPECT_DOUBLE_EQ(head.shape(3).scale, 20);
  spec.ratios_per_layer = {{1, -2}};
  EXPECT_THROW(GenerateOverAnchorized(spec), InputError);
  spec.ratios_per_layer = {{1}, {2}};
  EXPECT_THROW(GenerateOverAnchorized(spec), InputError);
}

TEST(NeighborsTest, PerAnchorRemovesOneKeptAnchor) {
  auto head = LoadDataHead("ssd300.json");
  const auto full = AnchorConfiguration::Full(head);
  const auto children = Neighbors(full, NeighborMode::kPerAnchor);
  ASSERT_EQ(children.size(), 30u);
  for (std::size_t i = 0; i < children.size(); ++i) {
    EXPECT_EQ(children[i].size(), 29u);
    EXPECT_FALSE(children[i].Contains(i));
  }
  EXPECT_EQ(Neighbors(children[0], NeighborMode::kPerAnchor).size(), 29u);
  EXPECT_TRUE(
      Neighbors(AnchorConfiguration::Empty(head), NeighborMode::kPerAnchor)
          .empty());
}

TEST(NeighborsTest, SharedModeRemovesSlotsOrLayers) {
  auto head = LoadDataHead("retinanet300.json");
  const auto full = AnchorConfiguration::Full(head);
  const auto children = Neighbors(full, NeighborMode::kSharedSlotOrLayer);
  ASSERT_EQ(children.size(), 14u);
  for (int s = 0; s < 9; ++s) {
    EXPECT_EQ(children[s].size(), 40u);
    for (int l = 0; l < 5; ++l) {
      EXPECT_FALSE(children[s].Contains(AnchorId{l, s}));
    }
  }
  for (int l = 0; l < 5; ++l) {
    EXPECT_EQ(children[9 + l].KeptInLayer(l), 0);
    EXPECT_EQ(children[9 + l].size(), 36u);
  }
}

TEST(NeighborsTest, SharedModeDropsDuplicateChildren) {
  auto head = LoadDataHead("retinanet300.json");
  // One layer with a single slot: removing the slot and removing the layer
  // give the same child.
  const std::vector<AnchorId> kept{{2, 3}};
  const auto c = AnchorConfiguration::FromKept(head, kept);
  const auto children = Neighbors(c, NeighborMode::kSharedSlotOrLayer);
  ASSERT_EQ(children.size(), 1u);
  EXPECT_TRUE(children[0].empty());
}

}  // namespace
}  // namespace anchorprune
