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

// Deterministic synthetic detection instances with controllable anchor
// redundancy, and per-anchor predicted-shape histograms.

#ifndef ANCHORPRUNE_SYNTHGEN_H_
#define ANCHORPRUNE_SYNTHGEN_H_

#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "anchorprune/anchor_model.h"
#include "anchorprune/ingest.h"

namespace anchorprune {

struct ScoreModel {
  double base = 0.9;
  // Subtracted per unit of log-shape distance to the object.
  double distance_penalty = 1.0;
  // Std of additive Gaussian score noise.
  double noise = 0.05;

  bool operator==(const ScoreModel&) const = default;
};

struct DuplicateSlot {
  AnchorId source;
  AnchorId clone;

  bool operator==(const DuplicateSlot&) const = default;
};

struct SynthSpec {
  std::uint64_t seed = 0;
  int num_images = 1;
  int image_width = 300;
  int image_height = 300;
  int min_objects = 1;
  int max_objects = 1;
  int num_classes = 1;
  // Log-uniform object extents in pixels.
  double min_width = 16;
  double max_width = 256;
  double min_height = 16;
  double max_height = 256;
  // Objects take the exact shape of a uniformly chosen non-clone anchor.
  bool snap_to_anchor_shapes = false;
  // Anchors carry their shapes; the generated dump is bound to this head.
  std::shared_ptr<const HeadSpec> head;
  // An anchor fires on an object when the Euclidean distance between
  // (log w, log h) of anchor and object is at most this.
  double responsiveness_radius = 0.5;
  // Box jitter std as a fraction of the object size.
  double localization_noise = 0.05;
  ScoreModel score_model;
  // Expected spurious detections per anchor per image.
  double false_positive_rate = 0.0;
  double false_positive_min_score = 0.05;
  double false_positive_max_score = 0.5;
  double score_floor = 0.01;
  // Each clone emits exactly the records of its source (except the slot).
  std::vector<DuplicateSlot> duplicate_slots;

  // Throws InputError.
  void Validate() const;

  static SynthSpec FromJson(std::string_view text);
  std::string ToJson() const;
};

struct SyntheticInstance {
  std::shared_ptr<const HeadSpec> head;
  std::shared_ptr<const GroundTruthSet> ground_truth;
  std::shared_ptr<const RawDetectionSet> detections;
};

// Per-image generation keyed by (seed, image index, ...), assembled in image
// order; output is independent of `threads`.
SyntheticInstance Generate(const SynthSpec& spec, int threads = 1);

struct HistogramAxes {
  double log2_min = 0.0;   // 1 px
  double log2_max = 10.0;  // 1024 px
  int bins = 40;

  bool operator==(const HistogramAxes&) const = default;
};

struct AnchorShapeHistogram {
  AnchorId anchor;
  AnchorShape default_shape;
  std::size_t total = 0;
  // (width bin, height bin) -> count; only occupied bins are stored.
  std::map<std::pair<int, int>, std::size_t> bins;
  std::vector<std::size_t> width_marginal;
  std::vector<std::size_t> height_marginal;

  bool operator==(const AnchorShapeHistogram&) const = default;
};

struct ShapeDistribution {
  HistogramAxes axes;
  std::vector<AnchorShapeHistogram> anchors;  // canonical order
};

// 2-D histograms of log2(width), log2(height) of the predicted boxes of each
// anchor. Boxes with zero extent are skipped; values outside the axes are
// clamped into the edge bins.
ShapeDistribution ComputeShapeDistribution(const RawDetectionSet& dets,
                                           HistogramAxes axes = {});
std::string ShapeDistributionToJson(const ShapeDistribution& dist);

}  // namespace anchorprune

#endif  // ANCHORPRUNE_SYNTHGEN_H_
