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

#include "anchorprune/synthgen.h"

#include <cmath>
#include <map>
#include <memory>
#include <numeric>
#include <set>
#include <string>

#include "anchorprune/errors.h"
#include "anchorprune/eval.h"
#include "anchorprune/ingest.h"
#include "gtest/gtest.h"
#include "testing/test_util.h"

namespace anchorprune {
namespace {

using ::anchorprune::testing::MakeHead;

SynthSpec BaseSpec() {
  SynthSpec s;
  s.seed = 11;
  s.num_images = 25;
  s.min_objects = 1;
  s.max_objects = 4;
  s.num_classes = 3;
  s.head = MakeHead({16, 8, 4}, {3, 3, 2}, 3);
  s.responsiveness_radius = 0.6;
  s.false_positive_rate = 0.2;
  return s;
}

TEST(SynthSpecTest, JsonRoundTrip) {
  SynthSpec s = BaseSpec();
  s.duplicate_slots = {{{1, 0}, {0, 2}}};
  s.snap_to_anchor_shapes = true;
  const std::string text = s.ToJson();
  const SynthSpec back = SynthSpec::FromJson(text);
  EXPECT_EQ(back.ToJson(), text);
  EXPECT_EQ(*back.head, *s.head);
  EXPECT_EQ(back.duplicate_slots, s.duplicate_slots);
  EXPECT_EQ(back.seed, 11u);
}

TEST(SynthSpecTest, ValidationErrors) {
  SynthSpec s = BaseSpec();
  s.duplicate_slots = {{{1, 0}, {1, 0}}};
  EXPECT_THROW(s.Validate(), InputError);
  s.duplicate_slots = {{{1, 0}, {0, 9}}};
  EXPECT_THROW(s.Validate(), InputError);
  s.duplicate_slots = {{{1, 0}, {0, 2}}, {{1, 1}, {0, 2}}};
  EXPECT_THROW(s.Validate(), InputError);
  s.duplicate_slots = {{{1, 0}, {0, 2}}, {{0, 2}, {0, 1}}};
  EXPECT_THROW(s.Validate(), InputError);
  s = BaseSpec();
  s.max_objects = 0;
  EXPECT_THROW(s.Validate(), InputError);
  s = BaseSpec();
  s.score_floor = 0;
  EXPECT_THROW(s.Validate(), InputError);
  s = BaseSpec();
  s.head = nullptr;
  EXPECT_THROW(s.Validate(), InputError);
  EXPECT_THROW(SynthSpec::FromJson(R"({"seed": 1, "bogus": 2})"), InputError);
}

TEST(GenerateTest, DeterministicAcrossRunsAndThreads) {
  const SynthSpec s = BaseSpec();
  const SyntheticInstance a = Generate(s, 1);
  const SyntheticInstance b = Generate(s, 4);
  EXPECT_EQ(SerializeGroundTruth(*a.ground_truth),
            SerializeGroundTruth(*b.ground_truth));
  EXPECT_EQ(SerializeDetections(*a.detections),
            SerializeDetections(*b.detections));
  SynthSpec other = s;
  other.seed = 12;
  EXPECT_NE(SerializeDetections(*Generate(other).detections),
            SerializeDetections(*a.detections));
}

TEST(GenerateTest, StructureOfTheInstance) {
  const SynthSpec s = BaseSpec();
  const SyntheticInstance inst = Generate(s);
  const GroundTruthSet& gt = *inst.ground_truth;
  ASSERT_EQ(gt.images().size(), 25u);
  EXPECT_EQ(gt.images()[0].id, 1);
  EXPECT_EQ(gt.images()[24].id, 25);
  ASSERT_EQ(gt.categories().size(), 3u);
  EXPECT_EQ(gt.categories()[2].name, "class_3");
  std::map<std::int64_t, int> per_image;
  for (std::size_t i = 0; i < gt.annotations().size(); ++i) {
    const Annotation& a = gt.annotations()[i];
    EXPECT_EQ(a.id, static_cast<std::int64_t>(i) + 1);
    EXPECT_GE(a.bbox.w, s.min_width);
    EXPECT_LE(a.bbox.w, s.max_width);
    EXPECT_GE(a.bbox.x, 0);
    EXPECT_LE(a.bbox.x + a.bbox.w, s.image_width + 1e-9);
    ++per_image[a.image_id];
  }
  for (const ImageInfo& im : gt.images()) {
    EXPECT_GE(per_image[im.id], s.min_objects);
    EXPECT_LE(per_image[im.id], s.max_objects);
  }
  for (const DetectionRecord& r : inst.detections->records()) {
    EXPECT_GE(r.score, s.score_floor);
    EXPECT_LE(r.score, 1.0);
  }
  EXPECT_EQ(inst.detections->header().head_spec_digest, s.head->Digest());
  // The dump survives a serialize/parse cycle against its own inputs.
  EXPECT_EQ(ParseDetections(SerializeDetections(*inst.detections), inst.head,
                            inst.ground_truth),
            *inst.detections);
}

TEST(GenerateTest, ExactBoxesFireOnlyWithinTheRadius) {
  SynthSpec s = BaseSpec();
  s.localization_noise = 0;
  s.false_positive_rate = 0;
  const SyntheticInstance inst = Generate(s);
  std::set<std::tuple<std::int64_t, double, double>> objects;
  for (const Annotation& a : inst.ground_truth->annotations()) {
    objects.insert({a.image_id, a.bbox.x, a.bbox.y});
  }
  const auto& dets = *inst.detections;
  ASSERT_FALSE(dets.records().empty());
  for (std::size_t i = 0; i < dets.records().size(); ++i) {
    const DetectionRecord& r = dets.records()[i];
    EXPECT_TRUE(objects.count({r.image_id, r.bbox.x, r.bbox.y}));
    const AnchorShape& shape = s.head->shape(dets.anchor_index(i));
    const double d = std::hypot(std::log(r.bbox.w / shape.width()),
                                std::log(r.bbox.h / shape.height()));
    EXPECT_LE(d, s.responsiveness_radius + 1e-12);
  }
}

TEST(GenerateTest, ClonesRepeatTheirSource) {
  SynthSpec s = BaseSpec();
  const AnchorId source{1, 0};
  const AnchorId clone{0, 2};
  s.duplicate_slots = {{source, clone}};
  const auto& records = Generate(s).detections->records();
  std::size_t source_count = 0, clone_count = 0;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (records[i].anchor == source) {
      ++source_count;
      ASSERT_LT(i + 1, records.size());
      DetectionRecord copy = records[i];
      copy.anchor = clone;
      EXPECT_EQ(records[i + 1], copy);
    }
    if (records[i].anchor == clone) {
      ++clone_count;
      ASSERT_GT(i, 0u);
      EXPECT_EQ(records[i - 1].anchor, source);
    }
  }
  EXPECT_GT(source_count, 0u);
  EXPECT_EQ(source_count, clone_count);
}

TEST(GenerateTest, DroppingACloneKeepsAccuracyExactly) {
  SynthSpec s = BaseSpec();
  s.localization_noise = 0.1;
  s.duplicate_slots = {{{1, 0}, {0, 2}}};
  const SyntheticInstance inst = Generate(s);
  const Evaluator ev(inst.detections, MetricSpec::Coco());
  const AnchorConfiguration full = AnchorConfiguration::Full(inst.head);
  const std::size_t clone = *inst.head->IndexOf({0, 2});
  const std::size_t source = *inst.head->IndexOf({1, 0});
  EXPECT_EQ(ev.Accuracy(full.Without(clone)), ev.Accuracy(full));
  EXPECT_EQ(ev.Accuracy(full.Without(source)), ev.Accuracy(full));
  EXPECT_NE(ev.Accuracy(full.Without(source).Without(clone)),
            ev.Accuracy(full));
}

TEST(GenerateTest, SnappedObjectsTakeEmitterShapes) {
  SynthSpec s = BaseSpec();
  s.snap_to_anchor_shapes = true;
  s.duplicate_slots = {{{1, 0}, {0, 2}}};
  const SyntheticInstance inst = Generate(s);
  const std::size_t clone_index = *s.head->IndexOf({0, 2});
  for (const Annotation& a : inst.ground_truth->annotations()) {
    bool matched = false;
    for (std::size_t i = 0; i < s.head->num_anchors(); ++i) {
      const AnchorShape& sh = s.head->shape(i);
      if (std::abs(sh.width() - a.bbox.w) < 1e-9 &&
          std::abs(sh.height() - a.bbox.h) < 1e-9) {
        matched = matched || i != clone_index;
      }
    }
    EXPECT_TRUE(matched);
  }
}

TEST(ShapeDistributionTest, CountsEveryRecordOnce) {
  const SyntheticInstance inst = Generate(BaseSpec());
  const RawDetectionSet& dets = *inst.detections;
  const ShapeDistribution dist = ComputeShapeDistribution(dets);
  ASSERT_EQ(dist.anchors.size(), dets.head().num_anchors());
  std::size_t total = 0;
  for (std::size_t a = 0; a < dist.anchors.size(); ++a) {
    const AnchorShapeHistogram& h = dist.anchors[a];
    EXPECT_EQ(h.anchor, dets.head().anchor(a));
    EXPECT_EQ(h.default_shape, dets.head().shape(a));
    std::size_t cells = 0;
    for (const auto& [cell, n] : h.bins) cells += n;
    EXPECT_EQ(cells, h.total);
    EXPECT_EQ(std::accumulate(h.width_marginal.begin(), h.width_marginal.end(),
                              std::size_t{0}),
              h.total);
    EXPECT_EQ(std::accumulate(h.height_marginal.begin(),
                              h.height_marginal.end(), std::size_t{0}),
              h.total);
    total += h.total;
  }
  EXPECT_EQ(total, dets.records().size());
  EXPECT_NE(ShapeDistributionToJson(dist).find("\"width_marginal\""),
            std::string::npos);
  EXPECT_THROW(ComputeShapeDistribution(dets, {0, 0, 10}), InputError);
}

TEST(ShapeDistributionTest, BinPlacement) {
  auto head = MakeHead({4}, {1});
  auto gt = ::anchorprune::testing::MakeGt(1, 1, {});
  auto dets = ::anchorprune::testing::MakeDets(
      head, gt,
      {::anchorprune::testing::Det(1, {0, 0}, 1, 0.5, {0, 0, 1, 1}),
       ::anchorprune::testing::Det(1, {0, 0}, 1, 0.5, {0, 0, 32, 64}),
       ::anchorprune::testing::Det(1, {0, 0}, 1, 0.5, {0, 0, 4096, 0.5})});
  const ShapeDistribution dist = ComputeShapeDistribution(*dets);
  const auto& bins = dist.anchors[0].bins;
  // 4 bins per octave starting at 1 px; out-of-range values clamp.
  EXPECT_EQ(bins.at({0, 0}), 1u);
  EXPECT_EQ(bins.at({20, 24}), 1u);
  EXPECT_EQ(bins.at({39, 0}), 1u);
}

}  // namespace
}  // namespace anchorprune
