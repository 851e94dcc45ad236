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

// Scoring an anchor configuration on cached detections: anchor filtering,
// class-wise NMS, then COCO-style average precision and recall.

#ifndef ANCHORPRUNE_EVAL_H_
#define ANCHORPRUNE_EVAL_H_

#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "anchorprune/anchor_model.h"
#include "anchorprune/ingest.h"

namespace anchorprune {

enum class Protocol { kCocoStyle, kVoc50 };

struct MetricSpec {
  Protocol protocol = Protocol::kCocoStyle;
  // Strictly increasing, each in (0, 1); at most 32 thresholds.
  std::vector<double> iou_thresholds;
  int max_detections_per_image = 100;
  double nms_iou = 0.45;
  double nms_score_floor = 0.02;
  int pre_nms_top_k = 400;

  // 0.50:0.05:0.95.
  static MetricSpec Coco();
  // Single threshold 0.50.
  static MetricSpec Voc50();

  // Throws InputError.
  void Validate() const;
};

std::string_view ToString(Protocol protocol);

// Strata without ground truth report kUndefined, serialized as -1.
inline constexpr double kUndefined = -1.0;

struct EvalResult {
  double map = kUndefined;
  double ap50 = kUndefined;
  double ap75 = kUndefined;
  double ap_s = kUndefined;
  double ap_m = kUndefined;
  double ap_l = kUndefined;
  double ar_s = kUndefined;
  double ar_m = kUndefined;
  double ar_l = kUndefined;
  std::map<std::int64_t, double> per_class_ap;

  bool operator==(const EvalResult&) const = default;
};

std::string EvalResultToJson(const EvalResult& result);

// Intersection over union; 0 when the union is empty.
double Iou(const Box& a, const Box& b);

// Records whose anchor is kept by `config`, in their original order. Throws
// BindingError when the configuration belongs to a different head.
RawDetectionSet FilterByConfig(const RawDetectionSet& dets,
                               const AnchorConfiguration& config);

// Total order used for ranking and NMS tie-breaks: score descending, then
// anchor (layer, slot), category, box coordinates, all ascending.
bool RanksBefore(const DetectionRecord& a, const DetectionRecord& b);

// Per-image NMS. Per class: drop scores below nms_score_floor, keep the top
// pre_nms_top_k by rank, then greedily suppress records whose IoU with an
// already kept record exceeds nms_iou. Finally the best
// max_detections_per_image across classes are returned in rank order.
std::vector<DetectionRecord> Nms(std::span<const DetectionRecord> records,
                                 const MetricSpec& spec);

struct RankedDetection {
  std::int64_t image_id = 0;
  double score = 0;
  Box bbox;
};

// Single-class AP at one IoU threshold with greedy COCO matching and
// 101-point interpolation. `ranked` must be sorted by descending score;
// `gt` holds this class's annotations (crowd regions are ignored rather than
// matched). Returns kUndefined when there is no non-crowd ground truth.
double AveragePrecision(std::span<const RankedDetection> ranked,
                        std::span<const Annotation> gt, double iou_threshold);

// Precomputes per-image, per-class indices for one detection set so that
// many configurations can be scored cheaply. Immutable after construction;
// Evaluate and Accuracy may be called concurrently.
class Evaluator {
 public:
  Evaluator(std::shared_ptr<const RawDetectionSet> dets, MetricSpec spec);
  ~Evaluator();
  Evaluator(const Evaluator&) = delete;
  Evaluator& operator=(const Evaluator&) = delete;

  EvalResult Evaluate(const AnchorConfiguration& config) const;

  // The search objective: map over all areas, with kUndefined mapped to 0.
  // Bit-identical to Evaluate(config).map when that is defined.
  double Accuracy(const AnchorConfiguration& config) const;

  const RawDetectionSet& detections() const { return *dets_; }
  const MetricSpec& spec() const { return spec_; }

 private:
  struct Index;
  struct Scores;
  Scores Score(const AnchorConfiguration& config, int num_areas) const;

  std::shared_ptr<const RawDetectionSet> dets_;
  MetricSpec spec_;
  std::unique_ptr<Index> index_;
};

// One-shot evaluation. `gt` must be the set `dets` is bound to.
EvalResult Evaluate(const RawDetectionSet& dets, const GroundTruthSet& gt,
                    const AnchorConfiguration& config, const MetricSpec& spec);

}  // namespace anchorprune

#endif  // ANCHORPRUNE_EVAL_H_
