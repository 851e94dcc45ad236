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

// Ground-truth annotations (a strict subset of COCO JSON) and cached pre-NMS
// detection dumps tagged with the anchor that produced each box.

#ifndef ANCHORPRUNE_INGEST_H_
#define ANCHORPRUNE_INGEST_H_

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "anchorprune/anchor_model.h"

namespace anchorprune {

// Axis-aligned box, (x, y) is the top-left corner.
struct Box {
  double x = 0;
  double y = 0;
  double w = 0;
  double h = 0;

  double area() const { return w * h; }
  bool operator==(const Box&) const = default;
};

struct ImageInfo {
  std::int64_t id = 0;
  std::int64_t width = 0;
  std::int64_t height = 0;
  bool operator==(const ImageInfo&) const = default;
};

struct Category {
  std::int64_t id = 0;
  std::string name;
  bool operator==(const Category&) const = default;
};

struct Annotation {
  std::int64_t id = 0;
  std::int64_t image_id = 0;
  std::int64_t category_id = 0;
  Box bbox;
  double area = 0;
  bool iscrowd = false;
  bool operator==(const Annotation&) const = default;
};

class GroundTruthSet {
 public:
  GroundTruthSet() = default;
  // Validates ids and references; throws InputError naming the record.
  GroundTruthSet(std::vector<ImageInfo> images,
                 std::vector<Category> categories,
                 std::vector<Annotation> annotations);

  const std::vector<ImageInfo>& images() const { return images_; }
  const std::vector<Category>& categories() const { return categories_; }
  const std::vector<Annotation>& annotations() const { return annotations_; }

  bool HasImage(std::int64_t id) const { return image_pos_.contains(id); }
  bool HasCategory(std::int64_t id) const {
    return category_pos_.contains(id);
  }
  // Position of the image / category in images() / categories().
  std::size_t ImagePosition(std::int64_t id) const {
    return image_pos_.at(id);
  }
  std::size_t CategoryPosition(std::int64_t id) const {
    return category_pos_.at(id);
  }

  bool operator==(const GroundTruthSet& other) const {
    return images_ == other.images_ && categories_ == other.categories_ &&
           annotations_ == other.annotations_;
  }

 private:
  std::vector<ImageInfo> images_;
  std::vector<Category> categories_;
  std::vector<Annotation> annotations_;
  std::unordered_map<std::int64_t, std::size_t> image_pos_;
  std::unordered_map<std::int64_t, std::size_t> category_pos_;
};

inline constexpr std::string_view kDetectionFormat = "anchor-dets/v1";

struct DetectionHeader {
  std::string format{kDetectionFormat};
  std::string head_spec_digest;
  double score_floor = 0;
  bool operator==(const DetectionHeader&) const = default;
};

struct DetectionRecord {
  std::int64_t image_id = 0;
  AnchorId anchor;
  std::int64_t category_id = 0;
  double score = 0;
  Box bbox;
  bool operator==(const DetectionRecord&) const = default;
};

// Detections bound to a head and a ground-truth set. Every record's anchor,
// image and category are guaranteed to resolve.
class RawDetectionSet {
 public:
  // Throws BindingError on digest mismatch, InputError for invalid records.
  RawDetectionSet(DetectionHeader header, std::vector<DetectionRecord> records,
                  std::shared_ptr<const HeadSpec> head,
                  std::shared_ptr<const GroundTruthSet> gt);

  const DetectionHeader& header() const { return header_; }
  const std::vector<DetectionRecord>& records() const { return records_; }
  // Canonical anchor index of records()[i].
  std::size_t anchor_index(std::size_t i) const { return anchor_index_[i]; }
  const HeadSpec& head() const { return *head_; }
  const std::shared_ptr<const HeadSpec>& head_ptr() const { return head_; }
  const GroundTruthSet& ground_truth() const { return *gt_; }
  const std::shared_ptr<const GroundTruthSet>& ground_truth_ptr() const {
    return gt_;
  }

  bool operator==(const RawDetectionSet& other) const {
    return header_ == other.header_ && records_ == other.records_;
  }

 private:
  DetectionHeader header_;
  std::vector<DetectionRecord> records_;
  std::vector<std::size_t> anchor_index_;
  std::shared_ptr<const HeadSpec> head_;
  std::shared_ptr<const GroundTruthSet> gt_;
};

// COCO-compatible ground truth. Unknown keys (info, licenses, segmentation,
// file_name, ...) are ignored. Missing "area" defaults to w*h, missing
// "iscrowd" to false.
GroundTruthSet ParseGroundTruth(std::string_view bytes);
std::string SerializeGroundTruth(const GroundTruthSet& gt);

// Line-delimited JSON: a header line, then one record per line. Errors carry
// "line N" loci.
RawDetectionSet ParseDetections(std::string_view bytes,
                                std::shared_ptr<const HeadSpec> head,
                                std::shared_ptr<const GroundTruthSet> gt);
std::string SerializeDetections(const RawDetectionSet& dets);

enum class SizeBucket { kSmall, kMedium, kLarge };

// COCO convention: small < 32^2 <= medium < 96^2 <= large.
SizeBucket SizeBucketOf(double area);
std::string_view ToString(SizeBucket bucket);

struct DatasetSummary {
  std::size_t num_images = 0;
  std::size_t num_annotations = 0;
  std::size_t num_records = 0;
  // Every anchor of the head appears, in canonical order.
  std::vector<std::pair<AnchorId, std::size_t>> records_per_anchor;
  std::map<std::int64_t, std::size_t> annotations_per_class;
  std::map<SizeBucket, std::size_t> annotations_per_bucket;
};

DatasetSummary Summarize(const GroundTruthSet& gt, const RawDetectionSet& dets);
std::string SummaryToJson(const DatasetSummary& summary);

}  // namespace anchorprune

#endif  // ANCHORPRUNE_INGEST_H_
