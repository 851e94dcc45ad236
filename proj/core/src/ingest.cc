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

#include "anchorprune/ingest.h"

#include <cmath>
#include <set>
#include <sstream>
#include <utility>

#include "anchorprune/errors.h"
#include "json_util.h"

namespace anchorprune {

using internal::Json;
using internal::OrderedJson;

namespace {

Box ParseBox(const Json& j, const std::string& locus) {
  if (!j.is_array() || j.size() != 4) {
    throw InputError(locus, "bbox must be an array [x, y, w, h]");
  }
  for (const Json& v : j) {
    if (!v.is_number()) throw InputError(locus, "bbox values must be numbers");
  }
  Box b{j[0].get<double>(), j[1].get<double>(), j[2].get<double>(),
        j[3].get<double>()};
  if (!std::isfinite(b.x) || !std::isfinite(b.y) || !std::isfinite(b.w) ||
      !std::isfinite(b.h)) {
    throw InputError(locus, "bbox values must be finite");
  }
  if (b.w < 0 || b.h < 0) throw InputError(locus, "negative bbox extent");
  return b;
}

void ValidateRecord(const DetectionRecord& r, const DetectionHeader& header,
                    const HeadSpec& head, const GroundTruthSet& gt,
                    const std::string& locus) {
  if (!head.IndexOf(r.anchor)) {
    throw BindingError(locus, "unknown anchor (layer " +
                                  std::to_string(r.anchor.layer) + ", slot " +
                                  std::to_string(r.anchor.slot) + ")");
  }
  if (!gt.HasImage(r.image_id)) {
    throw BindingError(locus,
                       "unknown image_id " + std::to_string(r.image_id));
  }
  if (!gt.HasCategory(r.category_id)) {
    throw BindingError(locus,
                       "unknown category_id " + std::to_string(r.category_id));
  }
  if (!(r.score > 0.0 && r.score <= 1.0)) {
    throw InputError(locus, "score must be in (0, 1]");
  }
  if (r.score < header.score_floor) {
    throw InputError(locus, "score below the header score_floor");
  }
  if (r.bbox.w < 0 || r.bbox.h < 0) {
    throw InputError(locus, "negative bbox extent");
  }
}

void ValidateHeader(const DetectionHeader& header, const HeadSpec& head) {
  if (header.format != kDetectionFormat) {
    throw InputError("line 1", "unsupported format \"" + header.format + "\"");
  }
  if (!(header.score_floor >= 0.0 && header.score_floor <= 1.0)) {
    throw InputError("line 1", "score_floor must be in [0, 1]");
  }
  const std::string digest = head.Digest();
  if (header.head_spec_digest != digest) {
    throw BindingError("line 1", "head_spec_digest " +
                                     header.head_spec_digest +
                                     " does not match head digest " + digest);
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// GroundTruthSet

GroundTruthSet::GroundTruthSet(std::vector<ImageInfo> images,
                               std::vector<Category> categories,
                               std::vector<Annotation> annotations)
    : images_(std::move(images)),
      categories_(std::move(categories)),
      annotations_(std::move(annotations)) {
  for (std::size_t i = 0; i < images_.size(); ++i) {
    const std::string locus = internal::Index("images", i);
    if (images_[i].width < 0 || images_[i].height < 0) {
      throw InputError(locus, "negative image size");
    }
    if (!image_pos_.emplace(images_[i].id, i).second) {
      throw InputError(locus,
                       "duplicate image id " + std::to_string(images_[i].id));
    }
  }
  for (std::size_t i = 0; i < categories_.size(); ++i) {
    if (!category_pos_.emplace(categories_[i].id, i).second) {
      throw InputError(internal::Index("categories", i),
                       "duplicate category id " +
                           std::to_string(categories_[i].id));
    }
  }
  std::set<std::int64_t> ann_ids;
  for (std::size_t i = 0; i < annotations_.size(); ++i) {
    const Annotation& a = annotations_[i];
    const std::string locus = internal::Index("annotations", i) + " (id " +
                              std::to_string(a.id) + ")";
    if (!ann_ids.insert(a.id).second) {
      throw InputError(locus, "duplicate annotation id");
    }
    if (!HasImage(a.image_id)) {
      throw InputError(locus, "unknown image_id " + std::to_string(a.image_id));
    }
    if (!HasCategory(a.category_id)) {
      throw InputError(locus,
                       "unknown category_id " + std::to_string(a.category_id));
    }
    if (a.bbox.w < 0 || a.bbox.h < 0) {
      throw InputError(locus, "negative bbox extent");
    }
    if (!(a.area >= 0)) throw InputError(locus, "area must be >= 0");
  }
}

GroundTruthSet ParseGroundTruth(std::string_view bytes) {
  using namespace internal;
  const Json j = ParseJson(bytes, "ground truth");
  RequireObject(j, "ground truth");

  std::vector<ImageInfo> images;
  const Json& jimages = GetArray(j, "images", "");
  for (std::size_t i = 0; i < jimages.size(); ++i) {
    const std::string locus = Index("images", i);
    const Json& ji = RequireObject(jimages[i], locus);
    images.push_back({GetInt(ji, "id", locus), GetInt(ji, "width", locus),
                      GetInt(ji, "height", locus)});
  }

  std::vector<Category> categories;
  const Json& jcats = GetArray(j, "categories", "");
  for (std::size_t i = 0; i < jcats.size(); ++i) {
    const std::string locus = Index("categories", i);
    const Json& jc = RequireObject(jcats[i], locus);
    std::string name;
    if (jc.contains("name")) name = GetString(jc, "name", locus);
    categories.push_back({GetInt(jc, "id", locus), std::move(name)});
  }

  std::vector<Annotation> annotations;
  const Json& janns = GetArray(j, "annotations", "");
  for (std::size_t i = 0; i < janns.size(); ++i) {
    const std::string locus = Index("annotations", i);
    const Json& ja = RequireObject(janns[i], locus);
    Annotation a;
    a.id = GetInt(ja, "id", locus);
    a.image_id = GetInt(ja, "image_id", locus);
    a.category_id = GetInt(ja, "category_id", locus);
    a.bbox = ParseBox(Field(ja, "bbox", locus), locus + ".bbox");
    a.area = ja.contains("area") ? GetNumber(ja, "area", locus) : a.bbox.area();
    if (auto it = ja.find("iscrowd"); it != ja.end()) {
      if (it->is_boolean()) {
        a.iscrowd = it->get<bool>();
      } else if (it->is_number_integer()) {
        a.iscrowd = it->get<std::int64_t>() != 0;
      } else {
        throw InputError(locus + ".iscrowd", "expected 0/1 or a boolean");
      }
    }
    annotations.push_back(a);
  }
  return GroundTruthSet(std::move(images), std::move(categories),
                        std::move(annotations));
}

std::string SerializeGroundTruth(const GroundTruthSet& gt) {
  OrderedJson j;
  OrderedJson images = OrderedJson::array();
  for (const ImageInfo& im : gt.images()) {
    images.push_back({{"id", im.id}, {"width", im.width},
                      {"height", im.height}});
  }
  OrderedJson cats = OrderedJson::array();
  for (const Category& c : gt.categories()) {
    cats.push_back({{"id", c.id}, {"name", c.name}});
  }
  OrderedJson anns = OrderedJson::array();
  for (const Annotation& a : gt.annotations()) {
    anns.push_back({{"id", a.id},
                    {"image_id", a.image_id},
                    {"category_id", a.category_id},
                    {"bbox", {a.bbox.x, a.bbox.y, a.bbox.w, a.bbox.h}},
                    {"area", a.area},
                    {"iscrowd", a.iscrowd ? 1 : 0}});
  }
  j["images"] = std::move(images);
  j["categories"] = std::move(cats);
  j["annotations"] = std::move(anns);
  return j.dump() + "\n";
}

// ---------------------------------------------------------------------------
// RawDetectionSet

RawDetectionSet::RawDetectionSet(DetectionHeader header,
                                 std::vector<DetectionRecord> records,
                                 std::shared_ptr<const HeadSpec> head,
                                 std::shared_ptr<const GroundTruthSet> gt)
    : header_(std::move(header)),
      records_(std::move(records)),
      head_(std::move(head)),
      gt_(std::move(gt)) {
  if (!head_ || !gt_) {
    throw BindingError("detections", "detections need a head and ground truth");
  }
  ValidateHeader(header_, *head_);
  anchor_index_.reserve(records_.size());
  for (std::size_t i = 0; i < records_.size(); ++i) {
    ValidateRecord(records_[i], header_, *head_, *gt_,
                   internal::Index("records", i));
    anchor_index_.push_back(*head_->IndexOf(records_[i].anchor));
  }
}

RawDetectionSet ParseDetections(std::string_view bytes,
                                std::shared_ptr<const HeadSpec> head,
                                std::shared_ptr<const GroundTruthSet> gt) {
  using namespace internal;
  if (bytes.starts_with("\xEF\xBB\xBF")) {
    throw InputError("line 1", "byte order mark not allowed");
  }
  DetectionHeader header;
  std::vector<DetectionRecord> records;
  bool have_header = false;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < bytes.size()) {
    std::size_t end = bytes.find('\n', pos);
    if (end == std::string_view::npos) end = bytes.size();
    std::string_view line = bytes.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.find_first_not_of(" \t") == std::string_view::npos) continue;
    const std::string locus = "line " + std::to_string(line_no);
    const Json j = ParseJson(line, locus);
    RequireObject(j, locus);
    if (!have_header) {
      RejectUnknownKeys(j, locus, {"format", "head_spec_digest", "score_floor"});
      header.format = GetString(j, "format", locus);
      header.head_spec_digest = GetString(j, "head_spec_digest", locus);
      header.score_floor = GetNumber(j, "score_floor", locus);
      ValidateHeader(header, *head);
      have_header = true;
      continue;
    }
    RejectUnknownKeys(j, locus, {"image_id", "layer", "slot", "category_id",
                                 "score", "bbox"});
    DetectionRecord r;
    r.image_id = GetInt(j, "image_id", locus);
    r.anchor.layer = static_cast<int>(GetInt(j, "layer", locus));
    r.anchor.slot = static_cast<int>(GetInt(j, "slot", locus));
    r.category_id = GetInt(j, "category_id", locus);
    r.score = GetNumber(j, "score", locus);
    r.bbox = ParseBox(Field(j, "bbox", locus), locus + ".bbox");
    ValidateRecord(r, header, *head, *gt, locus);
    records.push_back(r);
  }
  if (!have_header) throw InputError("line 1", "missing header line");
  return RawDetectionSet(std::move(header), std::move(records), std::move(head),
                         std::move(gt));
}

std::string SerializeDetections(const RawDetectionSet& dets) {
  std::string out;
  OrderedJson h;
  h["format"] = dets.header().format;
  h["head_spec_digest"] = dets.header().head_spec_digest;
  h["score_floor"] = dets.header().score_floor;
  out += h.dump();
  out += '\n';
  for (const DetectionRecord& r : dets.records()) {
    OrderedJson j;
    j["image_id"] = r.image_id;
    j["layer"] = r.anchor.layer;
    j["slot"] = r.anchor.slot;
    j["category_id"] = r.category_id;
    j["score"] = r.score;
    j["bbox"] = {r.bbox.x, r.bbox.y, r.bbox.w, r.bbox.h};
    out += j.dump();
    out += '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------
// Summary

SizeBucket SizeBucketOf(double area) {
  if (area < 32.0 * 32.0) return SizeBucket::kSmall;
  if (area < 96.0 * 96.0) return SizeBucket::kMedium;
  return SizeBucket::kLarge;
}

std::string_view ToString(SizeBucket bucket) {
  switch (bucket) {
    case SizeBucket::kSmall:
      return "small";
    case SizeBucket::kMedium:
      return "medium";
    case SizeBucket::kLarge:
      return "large";
  }
  return "";
}

DatasetSummary Summarize(const GroundTruthSet& gt,
                         const RawDetectionSet& dets) {
  DatasetSummary s;
  s.num_images = gt.images().size();
  s.num_annotations = gt.annotations().size();
  s.num_records = dets.records().size();
  const HeadSpec& head = dets.head();
  std::vector<std::size_t> counts(head.num_anchors(), 0);
  for (std::size_t i = 0; i < dets.records().size(); ++i) {
    ++counts[dets.anchor_index(i)];
  }
  for (std::size_t i = 0; i < head.num_anchors(); ++i) {
    s.records_per_anchor.emplace_back(head.anchor(i), counts[i]);
  }
  for (const Category& c : gt.categories()) s.annotations_per_class[c.id] = 0;
  for (SizeBucket b :
       {SizeBucket::kSmall, SizeBucket::kMedium, SizeBucket::kLarge}) {
    s.annotations_per_bucket[b] = 0;
  }
  for (const Annotation& a : gt.annotations()) {
    ++s.annotations_per_class[a.category_id];
    ++s.annotations_per_bucket[SizeBucketOf(a.area)];
  }
  return s;
}

std::string SummaryToJson(const DatasetSummary& summary) {
  OrderedJson j;
  j["images"] = summary.num_images;
  j["annotations"] = summary.num_annotations;
  j["records"] = summary.num_records;
  OrderedJson per_anchor = OrderedJson::array();
  for (const auto& [id, n] : summary.records_per_anchor) {
    per_anchor.push_back({{"layer", id.layer}, {"slot", id.slot},
                          {"records", n}});
  }
  j["records_per_anchor"] = std::move(per_anchor);
  OrderedJson per_class = OrderedJson::array();
  for (const auto& [id, n] : summary.annotations_per_class) {
    per_class.push_back({{"category_id", id}, {"annotations", n}});
  }
  j["annotations_per_class"] = std::move(per_class);
  OrderedJson buckets;
  for (const auto& [b, n] : summary.annotations_per_bucket) {
    buckets[std::string(ToString(b))] = n;
  }
  j["annotations_per_bucket"] = std::move(buckets);
  return j.dump(2) + "\n";
}

}  // namespace anchorprune
