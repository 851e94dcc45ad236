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

#include "anchorprune/eval.h"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <unordered_map>
#include <utility>

#include "anchorprune/errors.h"
#include "json_util.h"

namespace anchorprune {
namespace {

constexpr int kRecallPoints = 101;

// Area strata: all, small, medium, large.
constexpr int kAreaAll = 0;
constexpr int kNumAreas = 4;

bool InArea(double area, int stratum) {
  switch (stratum) {
    case kAreaAll:
      return true;
    case 1:
      return SizeBucketOf(area) == SizeBucket::kSmall;
    case 2:
      return SizeBucketOf(area) == SizeBucket::kMedium;
    default:
      return SizeBucketOf(area) == SizeBucket::kLarge;
  }
}

double Intersection(const Box& a, const Box& b) {
  const double w = std::min(a.x + a.w, b.x + b.w) - std::max(a.x, b.x);
  const double h = std::min(a.y + a.h, b.y + b.h) - std::max(a.y, b.y);
  if (w <= 0 || h <= 0) return 0;
  return w * h;
}

// Crowd regions are scored against the detection area only.
double MatchIou(const Box& det, const Box& gt, bool crowd) {
  const double inter = Intersection(det, gt);
  const double uni = crowd ? det.area() : det.area() + gt.area() - inter;
  return uni > 0 ? inter / uni : 0.0;
}

bool SameHead(const HeadSpec& a, const HeadSpec& b) {
  return &a == &b || a == b;
}

// Per-detection outcome over all thresholds, bit t for threshold t.
struct MatchFlags {
  std::uint32_t tp = 0;
  std::uint32_t ignored = 0;
};

// Greedy COCO matching of rank-ordered detections against one image's
// ground truth of one class.
std::vector<MatchFlags> MatchImage(std::span<const Box> dets,
                                   std::span<const Annotation* const> gts,
                                   std::span<const double> thresholds,
                                   int stratum) {
  std::vector<MatchFlags> flags(dets.size());
  if (dets.empty()) return flags;

  // Ignored ground truth goes last.
  std::vector<std::size_t> order(gts.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<char> ignore(gts.size());
  for (std::size_t g = 0; g < gts.size(); ++g) {
    ignore[g] = gts[g]->iscrowd || !InArea(gts[g]->area, stratum);
  }
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) {
                     return ignore[a] < ignore[b];
                   });

  std::vector<double> ious(dets.size() * gts.size());
  for (std::size_t d = 0; d < dets.size(); ++d) {
    for (std::size_t k = 0; k < order.size(); ++k) {
      const Annotation& g = *gts[order[k]];
      ious[d * gts.size() + k] = MatchIou(dets[d], g.bbox, g.iscrowd);
    }
  }

  std::vector<int> gt_match(gts.size());
  for (std::size_t t = 0; t < thresholds.size(); ++t) {
    std::fill(gt_match.begin(), gt_match.end(), -1);
    const std::uint32_t bit = std::uint32_t{1} << t;
    for (std::size_t d = 0; d < dets.size(); ++d) {
      double best = std::min(thresholds[t], 1 - 1e-10);
      int m = -1;
      for (std::size_t k = 0; k < order.size(); ++k) {
        const std::size_t g = order[k];
        if (gt_match[k] >= 0 && !gts[g]->iscrowd) continue;
        if (m > -1 && !ignore[order[m]] && ignore[g]) break;
        const double iou = ious[d * gts.size() + k];
        if (iou < best) continue;
        best = iou;
        m = static_cast<int>(k);
      }
      if (m >= 0) {
        gt_match[m] = static_cast<int>(d);
        if (ignore[order[m]]) {
          flags[d].ignored |= bit;
        } else {
          flags[d].tp |= bit;
        }
      } else if (!InArea(dets[d].area(), stratum)) {
        flags[d].ignored |= bit;
      }
    }
  }
  return flags;
}

struct RankedFlags {
  double score;
  MatchFlags flags;
};

struct PrSummary {
  double ap = kUndefined;
  double recall = kUndefined;
};

// `entries` must already be in ranking order.
PrSummary Accumulate(std::span<const RankedFlags> entries, std::size_t npig,
                     std::size_t threshold) {
  if (npig == 0) return {};
  const std::uint32_t bit = std::uint32_t{1} << threshold;
  std::vector<double> rc;
  std::vector<double> pr;
  std::size_t tp = 0;
  std::size_t fp = 0;
  for (const RankedFlags& e : entries) {
    if (e.flags.ignored & bit) continue;
    if (e.flags.tp & bit) {
      ++tp;
    } else {
      ++fp;
    }
    rc.push_back(static_cast<double>(tp) / static_cast<double>(npig));
    pr.push_back(static_cast<double>(tp) / static_cast<double>(tp + fp));
  }
  PrSummary out;
  out.recall = rc.empty() ? 0.0 : rc.back();
  for (std::size_t i = pr.size(); i-- > 1;) {
    pr[i - 1] = std::max(pr[i - 1], pr[i]);
  }
  double sum = 0;
  for (int r = 0; r < kRecallPoints; ++r) {
    const double level = r / 100.0;
    auto it = std::lower_bound(rc.begin(), rc.end(), level);
    if (it != rc.end()) sum += pr[it - rc.begin()];
  }
  out.ap = sum / kRecallPoints;
  return out;
}

void SortByScore(std::vector<RankedFlags>& entries) {
  std::stable_sort(entries.begin(), entries.end(),
                   [](const RankedFlags& a, const RankedFlags& b) {
                     return a.score > b.score;
                   });
}

// Greedy suppression over per-class candidate lists already in rank order.
// Returns kept record indices in rank order, capped at max_detections.
template <typename Candidates>
std::vector<std::uint32_t> SuppressAndCap(
    std::span<const DetectionRecord> base,
    const std::vector<Candidates>& by_class, const MetricSpec& spec) {
  std::vector<std::uint32_t> kept_all;
  std::vector<std::uint32_t> kept;
  for (const Candidates& candidates : by_class) {
    kept.clear();
    int considered = 0;
    for (std::uint32_t idx : candidates) {
      const DetectionRecord& r = base[idx];
      if (r.score < spec.nms_score_floor) continue;
      if (considered++ >= spec.pre_nms_top_k) break;
      bool suppressed = false;
      for (std::uint32_t k : kept) {
        if (Iou(base[k].bbox, r.bbox) > spec.nms_iou) {
          suppressed = true;
          break;
        }
      }
      if (!suppressed) kept.push_back(idx);
    }
    kept_all.insert(kept_all.end(), kept.begin(), kept.end());
  }
  std::stable_sort(kept_all.begin(), kept_all.end(),
                   [&](std::uint32_t a, std::uint32_t b) {
                     if (RanksBefore(base[a], base[b])) return true;
                     if (RanksBefore(base[b], base[a])) return false;
                     return a < b;
                   });
  if (kept_all.size() > static_cast<std::size_t>(spec.max_detections_per_image)) {
    kept_all.resize(spec.max_detections_per_image);
  }
  return kept_all;
}

double MeanDefined(std::span<const double> values) {
  double sum = 0;
  std::size_t n = 0;
  for (double v : values) {
    if (v == kUndefined) continue;
    sum += v;
    ++n;
  }
  return n == 0 ? kUndefined : sum / static_cast<double>(n);
}

}  // namespace

// ---------------------------------------------------------------------------

MetricSpec MetricSpec::Coco() {
  MetricSpec spec;
  spec.protocol = Protocol::kCocoStyle;
  for (int i = 0; i < 10; ++i) spec.iou_thresholds.push_back((50 + 5 * i) / 100.0);
  return spec;
}

MetricSpec MetricSpec::Voc50() {
  MetricSpec spec;
  spec.protocol = Protocol::kVoc50;
  spec.iou_thresholds = {0.5};
  return spec;
}

void MetricSpec::Validate() const {
  if (iou_thresholds.empty() || iou_thresholds.size() > 32) {
    throw InputError("metric", "between 1 and 32 IoU thresholds required");
  }
  for (std::size_t i = 0; i < iou_thresholds.size(); ++i) {
    const double t = iou_thresholds[i];
    if (!(t > 0 && t < 1)) {
      throw InputError("metric", "IoU thresholds must lie in (0, 1)");
    }
    if (i > 0 && !(t > iou_thresholds[i - 1])) {
      throw InputError("metric", "IoU thresholds must be strictly increasing");
    }
  }
  if (!(nms_iou > 0 && nms_iou < 1)) {
    throw InputError("metric", "nms_iou must lie in (0, 1)");
  }
  if (max_detections_per_image < 1 || pre_nms_top_k < 1) {
    throw InputError("metric", "detection caps must be >= 1");
  }
}

std::string_view ToString(Protocol protocol) {
  return protocol == Protocol::kCocoStyle ? "coco" : "voc50";
}

std::string EvalResultToJson(const EvalResult& r) {
  internal::OrderedJson j;
  j["map"] = r.map;
  j["ap50"] = r.ap50;
  j["ap75"] = r.ap75;
  j["ap_s"] = r.ap_s;
  j["ap_m"] = r.ap_m;
  j["ap_l"] = r.ap_l;
  j["ar_s"] = r.ar_s;
  j["ar_m"] = r.ar_m;
  j["ar_l"] = r.ar_l;
  internal::OrderedJson per_class = internal::OrderedJson::object();
  for (const auto& [id, ap] : r.per_class_ap) {
    per_class[std::to_string(id)] = ap;
  }
  j["per_class_ap"] = std::move(per_class);
  return j.dump(2) + "\n";
}

double Iou(const Box& a, const Box& b) { return MatchIou(a, b, false); }

bool RanksBefore(const DetectionRecord& a, const DetectionRecord& b) {
  if (a.score != b.score) return a.score > b.score;
  if (a.anchor != b.anchor) return a.anchor < b.anchor;
  if (a.category_id != b.category_id) return a.category_id < b.category_id;
  if (a.bbox.x != b.bbox.x) return a.bbox.x < b.bbox.x;
  if (a.bbox.y != b.bbox.y) return a.bbox.y < b.bbox.y;
  if (a.bbox.w != b.bbox.w) return a.bbox.w < b.bbox.w;
  return a.bbox.h < b.bbox.h;
}

RawDetectionSet FilterByConfig(const RawDetectionSet& dets,
                               const AnchorConfiguration& config) {
  if (!SameHead(dets.head(), config.head())) {
    throw BindingError("config", "configuration belongs to a different head");
  }
  std::vector<DetectionRecord> kept;
  for (std::size_t i = 0; i < dets.records().size(); ++i) {
    if (config.Contains(dets.anchor_index(i))) {
      kept.push_back(dets.records()[i]);
    }
  }
  return RawDetectionSet(dets.header(), std::move(kept), dets.head_ptr(),
                         dets.ground_truth_ptr());
}

std::vector<DetectionRecord> Nms(std::span<const DetectionRecord> records,
                                 const MetricSpec& spec) {
  std::map<std::int64_t, std::vector<std::uint32_t>> by_class;
  for (std::uint32_t i = 0; i < records.size(); ++i) {
    by_class[records[i].category_id].push_back(i);
  }
  std::vector<std::vector<std::uint32_t>> lists;
  for (auto& [cls, list] : by_class) {
    std::stable_sort(list.begin(), list.end(),
                     [&](std::uint32_t a, std::uint32_t b) {
                       return RanksBefore(records[a], records[b]);
                     });
    lists.push_back(std::move(list));
  }
  std::vector<DetectionRecord> out;
  for (std::uint32_t idx : SuppressAndCap(records, lists, spec)) {
    out.push_back(records[idx]);
  }
  return out;
}

double AveragePrecision(std::span<const RankedDetection> ranked,
                        std::span<const Annotation> gt, double iou_threshold) {
  std::map<std::int64_t, std::vector<const Annotation*>> gt_by_image;
  std::size_t npig = 0;
  for (const Annotation& a : gt) {
    gt_by_image[a.image_id].push_back(&a);
    if (!a.iscrowd) ++npig;
  }
  std::map<std::int64_t, std::vector<std::size_t>> dets_by_image;
  for (std::size_t i = 0; i < ranked.size(); ++i) {
    dets_by_image[ranked[i].image_id].push_back(i);
  }
  const double thresholds[] = {iou_threshold};
  std::vector<RankedFlags> entries(ranked.size());
  for (const auto& [image, indices] : dets_by_image) {
    std::vector<Box> boxes;
    for (std::size_t i : indices) boxes.push_back(ranked[i].bbox);
    const auto& gts = gt_by_image[image];
    auto flags = MatchImage(boxes, gts, thresholds, kAreaAll);
    for (std::size_t k = 0; k < indices.size(); ++k) {
      entries[indices[k]] = {ranked[indices[k]].score, flags[k]};
    }
  }
  return Accumulate(entries, npig, 0).ap;
}

// ---------------------------------------------------------------------------
// Evaluator

struct Evaluator::Index {
  // Records and ground truth of one (image, class) pair.
  struct Group {
    std::size_t class_pos = 0;
    std::vector<std::uint32_t> records;  // rank order
    std::vector<const Annotation*> gts;
  };
  std::vector<std::int64_t> class_ids;  // ascending
  std::vector<std::vector<Group>> images;  // ground-truth image order
  std::vector<std::array<std::size_t, kNumAreas>> npig;  // per class
};

Evaluator::Evaluator(std::shared_ptr<const RawDetectionSet> dets,
                     MetricSpec spec)
    : dets_(std::move(dets)), spec_(std::move(spec)),
      index_(std::make_unique<Index>()) {
  spec_.Validate();
  const GroundTruthSet& gt = dets_->ground_truth();
  const auto& records = dets_->records();

  for (const Category& c : gt.categories()) index_->class_ids.push_back(c.id);
  std::sort(index_->class_ids.begin(), index_->class_ids.end());
  std::unordered_map<std::int64_t, std::size_t> class_pos;
  for (std::size_t k = 0; k < index_->class_ids.size(); ++k) {
    class_pos[index_->class_ids[k]] = k;
  }

  // Images are visited in ascending id order, matching COCO's sorted imgIds.
  std::vector<std::int64_t> image_ids;
  for (const ImageInfo& im : gt.images()) image_ids.push_back(im.id);
  std::sort(image_ids.begin(), image_ids.end());
  std::unordered_map<std::int64_t, std::size_t> image_pos;
  for (std::size_t i = 0; i < image_ids.size(); ++i) {
    image_pos[image_ids[i]] = i;
  }

  std::vector<std::map<std::size_t, Index::Group>> groups(image_ids.size());
  for (std::uint32_t i = 0; i < records.size(); ++i) {
    const std::size_t cls = class_pos.at(records[i].category_id);
    auto& g = groups[image_pos.at(records[i].image_id)][cls];
    g.class_pos = cls;
    g.records.push_back(i);
  }
  index_->npig.assign(index_->class_ids.size(), {});
  for (const Annotation& a : gt.annotations()) {
    const std::size_t cls = class_pos.at(a.category_id);
    auto& g = groups[image_pos.at(a.image_id)][cls];
    g.class_pos = cls;
    g.gts.push_back(&a);
    if (!a.iscrowd) {
      for (int s = 0; s < kNumAreas; ++s) {
        if (InArea(a.area, s)) ++index_->npig[cls][s];
      }
    }
  }
  index_->images.resize(image_ids.size());
  for (std::size_t i = 0; i < image_ids.size(); ++i) {
    for (auto& [cls, g] : groups[i]) {
      std::stable_sort(g.records.begin(), g.records.end(),
                       [&](std::uint32_t a, std::uint32_t b) {
                         return RanksBefore(records[a], records[b]);
                       });
      index_->images[i].push_back(std::move(g));
    }
  }
}

Evaluator::~Evaluator() = default;

struct Evaluator::Scores {
  // [class][area][threshold]
  std::vector<std::array<std::vector<PrSummary>, kNumAreas>> cells;
};

EvalResult Evaluator::Evaluate(const AnchorConfiguration& config) const {
  Scores s = Score(config, kNumAreas);
  const std::size_t num_t = spec_.iou_thresholds.size();
  auto find_threshold = [&](double value) -> int {
    for (std::size_t t = 0; t < num_t; ++t) {
      if (std::abs(spec_.iou_thresholds[t] - value) < 1e-9) {
        return static_cast<int>(t);
      }
    }
    return -1;
  };
  auto collect = [&](int area, int threshold, bool recall) {
    std::vector<double> values;
    for (const auto& cell : s.cells) {
      for (std::size_t t = 0; t < num_t; ++t) {
        if (threshold >= 0 && static_cast<int>(t) != threshold) continue;
        values.push_back(recall ? cell[area][t].recall : cell[area][t].ap);
      }
    }
    return MeanDefined(values);
  };

  EvalResult r;
  r.map = collect(kAreaAll, -1, false);
  const int t50 = find_threshold(0.5);
  const int t75 = find_threshold(0.75);
  if (t50 >= 0) r.ap50 = collect(kAreaAll, t50, false);
  if (t75 >= 0) r.ap75 = collect(kAreaAll, t75, false);
  r.ap_s = collect(1, -1, false);
  r.ap_m = collect(2, -1, false);
  r.ap_l = collect(3, -1, false);
  r.ar_s = collect(1, -1, true);
  r.ar_m = collect(2, -1, true);
  r.ar_l = collect(3, -1, true);
  for (std::size_t k = 0; k < s.cells.size(); ++k) {
    std::vector<double> values;
    for (const PrSummary& p : s.cells[k][kAreaAll]) values.push_back(p.ap);
    r.per_class_ap[index_->class_ids[k]] = MeanDefined(values);
  }
  return r;
}

double Evaluator::Accuracy(const AnchorConfiguration& config) const {
  Scores s = Score(config, 1);
  std::vector<double> values;
  for (const auto& cell : s.cells) {
    for (const PrSummary& p : cell[kAreaAll]) values.push_back(p.ap);
  }
  const double map = MeanDefined(values);
  return map == kUndefined ? 0.0 : map;
}

Evaluator::Scores Evaluator::Score(const AnchorConfiguration& config,
                                   int num_areas) const {
  const RawDetectionSet& dets = *dets_;
  const MetricSpec& spec = spec_;
  if (!SameHead(dets.head(), config.head())) {
    throw BindingError("config", "configuration belongs to a different head");
  }
  const Index& index = *index_;
  const auto& records = dets.records();
  const std::size_t num_classes = index.class_ids.size();
  const std::size_t num_t = spec.iou_thresholds.size();

  // [class][area] -> ranked entries across images.
  std::vector<std::array<std::vector<RankedFlags>, kNumAreas>> ranked(
      num_classes);

  std::vector<std::vector<std::uint32_t>> candidates;
  std::vector<Box> boxes;
  for (const auto& image : index.images) {
    candidates.assign(image.size(), {});
    for (std::size_t g = 0; g < image.size(); ++g) {
      for (std::uint32_t idx : image[g].records) {
        if (config.Contains(dets.anchor_index(idx))) {
          candidates[g].push_back(idx);
        }
      }
    }
    const std::vector<std::uint32_t> kept =
        SuppressAndCap(std::span<const DetectionRecord>(records), candidates,
                       spec);
    // Split the surviving records back into their groups, keeping rank order.
    std::vector<std::vector<std::uint32_t>> kept_by_group(image.size());
    {
      std::unordered_map<std::int64_t, std::size_t> group_of_class;
      for (std::size_t g = 0; g < image.size(); ++g) {
        group_of_class[index.class_ids[image[g].class_pos]] = g;
      }
      for (std::uint32_t idx : kept) {
        kept_by_group[group_of_class.at(records[idx].category_id)].push_back(
            idx);
      }
    }
    for (std::size_t g = 0; g < image.size(); ++g) {
      const auto& group = image[g];
      boxes.clear();
      for (std::uint32_t idx : kept_by_group[g]) {
        boxes.push_back(records[idx].bbox);
      }
      for (int area = 0; area < num_areas; ++area) {
        auto flags = MatchImage(boxes, group.gts, spec.iou_thresholds, area);
        auto& out = ranked[group.class_pos][area];
        for (std::size_t d = 0; d < boxes.size(); ++d) {
          out.push_back({records[kept_by_group[g][d]].score, flags[d]});
        }
      }
    }
  }

  Scores s;
  s.cells.resize(num_classes);
  for (std::size_t k = 0; k < num_classes; ++k) {
    for (int area = 0; area < num_areas; ++area) {
      auto& entries = ranked[k][area];
      SortByScore(entries);
      auto& cell = s.cells[k][area];
      cell.resize(num_t);
      for (std::size_t t = 0; t < num_t; ++t) {
        cell[t] = Accumulate(entries, index.npig[k][area], t);
      }
    }
  }
  return s;
}

EvalResult Evaluate(const RawDetectionSet& dets, const GroundTruthSet& gt,
                    const AnchorConfiguration& config, const MetricSpec& spec) {
  if (&gt != &dets.ground_truth() && !(gt == dets.ground_truth())) {
    throw BindingError("ground truth",
                       "detections are bound to a different ground truth");
  }
  auto shared = std::make_shared<const RawDetectionSet>(dets);
  Evaluator evaluator(std::move(shared), spec);
  return evaluator.Evaluate(config);
}

}  // namespace anchorprune
