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

#include <algorithm>
#include <cmath>
#include <set>
#include <utility>

#include "anchorprune/errors.h"
#include "anchorprune/parallel.h"
#include "anchorprune/random.h"
#include "json_util.h"

namespace anchorprune {

using internal::Json;
using internal::OrderedJson;

namespace {

// Stream tags keep the keyed generators of different purposes disjoint.
constexpr std::uint64_t kImageStream = 1;
constexpr std::uint64_t kObjectStream = 2;
constexpr std::uint64_t kDetectionStream = 3;
constexpr std::uint64_t kFalsePositiveStream = 4;

std::pair<double, double> GetRange(const Json& j, std::string_view key,
                                   const std::string& locus) {
  const Json& v = internal::Field(j, key, locus);
  if (!v.is_array() || v.size() != 2 || !v[0].is_number() ||
      !v[1].is_number()) {
    throw InputError(internal::Join(locus, key), "expected [min, max]");
  }
  return {v[0].get<double>(), v[1].get<double>()};
}

AnchorId GetAnchorId(const Json& j, const std::string& locus) {
  internal::RequireObject(j, locus);
  internal::RejectUnknownKeys(j, locus, {"layer", "slot"});
  return {static_cast<int>(internal::GetInt(j, "layer", locus)),
          static_cast<int>(internal::GetInt(j, "slot", locus))};
}

double LogShapeDistance(double w1, double h1, double w2, double h2) {
  const double dw = std::log(w1) - std::log(w2);
  const double dh = std::log(h1) - std::log(h2);
  return std::sqrt(dw * dw + dh * dh);
}

double LogUniform(KeyedRng& rng, double lo, double hi) {
  return std::exp(rng.Uniform(std::log(lo), std::log(hi)));
}

struct ImageOutput {
  std::vector<Annotation> annotations;
  std::vector<DetectionRecord> records;
};

}  // namespace

void SynthSpec::Validate() const {
  if (!head) throw InputError("synth.head", "a head is required");
  if (num_images < 0) throw InputError("synth.num_images", "must be >= 0");
  if (image_width < 1 || image_height < 1) {
    throw InputError("synth.image_size", "must be positive");
  }
  if (min_objects < 0 || max_objects < min_objects) {
    throw InputError("synth.objects_per_image", "need 0 <= min <= max");
  }
  if (num_classes < 1) throw InputError("synth.num_classes", "must be >= 1");
  if (!(min_width > 0) || !(max_width >= min_width) || !(min_height > 0) ||
      !(max_height >= min_height)) {
    throw InputError("synth.object_size", "need 0 < min <= max");
  }
  if (!(responsiveness_radius >= 0) || !(localization_noise >= 0) ||
      !(false_positive_rate >= 0) || !(score_model.noise >= 0) ||
      !(score_model.distance_penalty >= 0)) {
    throw InputError("synth", "rates, radii and noise levels must be >= 0");
  }
  if (!(score_floor > 0 && score_floor <= 1)) {
    throw InputError("synth.score_floor", "must lie in (0, 1]");
  }
  if (!(false_positive_min_score > 0) ||
      !(false_positive_max_score >= false_positive_min_score) ||
      false_positive_max_score > 1) {
    throw InputError("synth.false_positive_score", "need 0 < min <= max <= 1");
  }
  std::set<AnchorId> sources;
  std::set<AnchorId> clones;
  for (std::size_t i = 0; i < duplicate_slots.size(); ++i) {
    const DuplicateSlot& d = duplicate_slots[i];
    const std::string locus = internal::Index("synth.duplicate_slots", i);
    if (!head->IndexOf(d.source) || !head->IndexOf(d.clone)) {
      throw InputError(locus, "source and clone must exist in the head");
    }
    if (d.source == d.clone) throw InputError(locus, "anchor cloned onto itself");
    if (!clones.insert(d.clone).second) {
      throw InputError(locus, "anchor cloned twice");
    }
    sources.insert(d.source);
  }
  for (const AnchorId& c : clones) {
    if (sources.contains(c)) {
      throw InputError("synth.duplicate_slots", "a clone cannot be a source");
    }
  }
}

SynthSpec SynthSpec::FromJson(std::string_view text) {
  using namespace internal;
  const Json j = ParseJson(text, "synth");
  RequireObject(j, "synth");
  RejectUnknownKeys(
      j, "synth",
      {"seed", "num_images", "image_size", "objects_per_image", "num_classes",
       "object_width", "object_height", "snap_to_anchor_shapes", "head",
       "responsiveness_radius", "localization_noise", "score_model",
       "false_positive_rate", "false_positive_score", "score_floor",
       "duplicate_slots"});
  SynthSpec s;
  const std::int64_t seed = GetInt(j, "seed", "synth");
  if (seed < 0) throw InputError("synth.seed", "must be >= 0");
  s.seed = static_cast<std::uint64_t>(seed);
  s.num_images = static_cast<int>(GetInt(j, "num_images", "synth"));
  s.head = std::make_shared<const HeadSpec>(
      HeadSpec::FromJson(Field(j, "head", "synth").dump()));
  if (j.contains("image_size")) {
    auto [w, h] = GetRange(j, "image_size", "synth");
    s.image_width = static_cast<int>(w);
    s.image_height = static_cast<int>(h);
  }
  if (j.contains("objects_per_image")) {
    auto [lo, hi] = GetRange(j, "objects_per_image", "synth");
    s.min_objects = static_cast<int>(lo);
    s.max_objects = static_cast<int>(hi);
  }
  if (j.contains("num_classes")) {
    s.num_classes = static_cast<int>(GetInt(j, "num_classes", "synth"));
  }
  if (j.contains("object_width")) {
    std::tie(s.min_width, s.max_width) = GetRange(j, "object_width", "synth");
  }
  if (j.contains("object_height")) {
    std::tie(s.min_height, s.max_height) =
        GetRange(j, "object_height", "synth");
  }
  if (auto it = j.find("snap_to_anchor_shapes"); it != j.end()) {
    if (!it->is_boolean()) {
      throw InputError("synth.snap_to_anchor_shapes", "expected a boolean");
    }
    s.snap_to_anchor_shapes = it->get<bool>();
  }
  if (j.contains("responsiveness_radius")) {
    s.responsiveness_radius = GetNumber(j, "responsiveness_radius", "synth");
  }
  if (j.contains("localization_noise")) {
    s.localization_noise = GetNumber(j, "localization_noise", "synth");
  }
  if (auto it = j.find("score_model"); it != j.end()) {
    const std::string locus = "synth.score_model";
    RequireObject(*it, locus);
    RejectUnknownKeys(*it, locus, {"base", "distance_penalty", "noise"});
    if (it->contains("base")) s.score_model.base = GetNumber(*it, "base", locus);
    if (it->contains("distance_penalty")) {
      s.score_model.distance_penalty =
          GetNumber(*it, "distance_penalty", locus);
    }
    if (it->contains("noise")) {
      s.score_model.noise = GetNumber(*it, "noise", locus);
    }
  }
  if (j.contains("false_positive_rate")) {
    s.false_positive_rate = GetNumber(j, "false_positive_rate", "synth");
  }
  if (j.contains("false_positive_score")) {
    std::tie(s.false_positive_min_score, s.false_positive_max_score) =
        GetRange(j, "false_positive_score", "synth");
  }
  if (j.contains("score_floor")) {
    s.score_floor = GetNumber(j, "score_floor", "synth");
  }
  if (auto it = j.find("duplicate_slots"); it != j.end()) {
    if (!it->is_array()) {
      throw InputError("synth.duplicate_slots", "expected an array");
    }
    for (std::size_t i = 0; i < it->size(); ++i) {
      const std::string locus = Index("synth.duplicate_slots", i);
      const Json& d = RequireObject((*it)[i], locus);
      RejectUnknownKeys(d, locus, {"source", "clone"});
      s.duplicate_slots.push_back(
          {GetAnchorId(Field(d, "source", locus), locus + ".source"),
           GetAnchorId(Field(d, "clone", locus), locus + ".clone")});
    }
  }
  s.Validate();
  return s;
}

std::string SynthSpec::ToJson() const {
  OrderedJson j;
  j["seed"] = seed;
  j["num_images"] = num_images;
  j["image_size"] = {image_width, image_height};
  j["objects_per_image"] = {min_objects, max_objects};
  j["num_classes"] = num_classes;
  j["object_width"] = {min_width, max_width};
  j["object_height"] = {min_height, max_height};
  j["snap_to_anchor_shapes"] = snap_to_anchor_shapes;
  j["head"] = OrderedJson::parse(head->ToJson());
  j["responsiveness_radius"] = responsiveness_radius;
  j["localization_noise"] = localization_noise;
  j["score_model"] = {{"base", score_model.base},
                      {"distance_penalty", score_model.distance_penalty},
                      {"noise", score_model.noise}};
  j["false_positive_rate"] = false_positive_rate;
  j["false_positive_score"] = {false_positive_min_score,
                               false_positive_max_score};
  j["score_floor"] = score_floor;
  OrderedJson dups = OrderedJson::array();
  for (const DuplicateSlot& d : duplicate_slots) {
    dups.push_back(
        {{"source", {{"layer", d.source.layer}, {"slot", d.source.slot}}},
         {"clone", {{"layer", d.clone.layer}, {"slot", d.clone.slot}}}});
  }
  j["duplicate_slots"] = std::move(dups);
  return j.dump(2) + "\n";
}

SyntheticInstance Generate(const SynthSpec& spec, int threads) {
  spec.Validate();
  const HeadSpec& head = *spec.head;
  const std::size_t num_anchors = head.num_anchors();

  // clones_of[i] lists the canonical indices cloning anchor i.
  std::vector<std::vector<std::size_t>> clones_of(num_anchors);
  std::vector<char> is_clone(num_anchors, 0);
  for (const DuplicateSlot& d : spec.duplicate_slots) {
    const std::size_t src = *head.IndexOf(d.source);
    const std::size_t cl = *head.IndexOf(d.clone);
    clones_of[src].push_back(cl);
    is_clone[cl] = 1;
  }
  std::vector<std::size_t> emitters;
  for (std::size_t a = 0; a < num_anchors; ++a) {
    if (!is_clone[a]) emitters.push_back(a);
  }

  const double W = spec.image_width;
  const double H = spec.image_height;

  auto emit = [&](std::vector<DetectionRecord>& out, DetectionRecord r,
                  std::size_t anchor) {
    out.push_back(r);
    for (std::size_t c : clones_of[anchor]) {
      r.anchor = head.anchor(c);
      out.push_back(r);
    }
  };

  std::vector<ImageOutput> images(spec.num_images);
  ParallelFor(images.size(), threads, [&](std::size_t i) {
    ImageOutput& out = images[i];
    const std::int64_t image_id = static_cast<std::int64_t>(i) + 1;
    KeyedRng image_rng({spec.seed, i, kImageStream});
    const int span = spec.max_objects - spec.min_objects + 1;
    const int num_objects =
        spec.min_objects + static_cast<int>(image_rng.Below(span));

    for (int j = 0; j < num_objects; ++j) {
      KeyedRng obj_rng({spec.seed, i, static_cast<std::uint64_t>(j),
                        kObjectStream});
      Annotation a;
      a.image_id = image_id;
      a.category_id = 1 + static_cast<std::int64_t>(
                              obj_rng.Below(spec.num_classes));
      double w;
      double h;
      if (spec.snap_to_anchor_shapes && !emitters.empty()) {
        const AnchorShape& s =
            head.shape(emitters[obj_rng.Below(emitters.size())]);
        w = s.width();
        h = s.height();
      } else {
        w = LogUniform(obj_rng, spec.min_width, spec.max_width);
        h = LogUniform(obj_rng, spec.min_height, spec.max_height);
      }
      const double x = obj_rng.Uniform(0.0, std::max(0.0, W - w));
      const double y = obj_rng.Uniform(0.0, std::max(0.0, H - h));
      a.bbox = {x, y, w, h};
      a.area = w * h;
      out.annotations.push_back(a);

      for (std::size_t anchor : emitters) {
        const AnchorShape& s = head.shape(anchor);
        const double d = LogShapeDistance(w, h, s.width(), s.height());
        if (d > spec.responsiveness_radius) continue;
        KeyedRng det_rng({spec.seed, i, static_cast<std::uint64_t>(j), anchor,
                          kDetectionStream});
        const double noise = spec.localization_noise;
        DetectionRecord r;
        r.image_id = image_id;
        r.anchor = head.anchor(anchor);
        r.category_id = a.category_id;
        if (noise > 0) {
          r.bbox = {x + noise * w * det_rng.Normal(),
                    y + noise * h * det_rng.Normal(),
                    w * std::exp(noise * det_rng.Normal()),
                    h * std::exp(noise * det_rng.Normal())};
        } else {
          r.bbox = a.bbox;
        }
        double score = spec.score_model.base -
                       spec.score_model.distance_penalty * d;
        if (spec.score_model.noise > 0) {
          score += spec.score_model.noise * det_rng.Normal();
        }
        score = std::min(score, 1.0);
        if (score < spec.score_floor) continue;
        r.score = score;
        emit(out.records, r, anchor);
      }
    }

    for (std::size_t anchor : emitters) {
      KeyedRng fp_rng({spec.seed, i, anchor, kFalsePositiveStream});
      const int count = fp_rng.Poisson(spec.false_positive_rate);
      const AnchorShape& s = head.shape(anchor);
      for (int k = 0; k < count; ++k) {
        DetectionRecord r;
        r.image_id = image_id;
        r.anchor = head.anchor(anchor);
        r.category_id =
            1 + static_cast<std::int64_t>(fp_rng.Below(spec.num_classes));
        const double w = s.width() * std::exp(0.25 * fp_rng.Normal());
        const double h = s.height() * std::exp(0.25 * fp_rng.Normal());
        r.bbox = {fp_rng.Uniform(0.0, std::max(0.0, W - w)),
                  fp_rng.Uniform(0.0, std::max(0.0, H - h)), w, h};
        r.score = fp_rng.Uniform(spec.false_positive_min_score,
                                 spec.false_positive_max_score);
        if (r.score < spec.score_floor) continue;
        emit(out.records, r, anchor);
      }
    }
  });

  std::vector<ImageInfo> image_infos;
  std::vector<Category> categories;
  std::vector<Annotation> annotations;
  std::vector<DetectionRecord> records;
  for (int k = 1; k <= spec.num_classes; ++k) {
    categories.push_back({k, "class_" + std::to_string(k)});
  }
  std::int64_t next_annotation_id = 1;
  for (std::size_t i = 0; i < images.size(); ++i) {
    image_infos.push_back({static_cast<std::int64_t>(i) + 1,
                           spec.image_width, spec.image_height});
    for (Annotation& a : images[i].annotations) {
      a.id = next_annotation_id++;
      annotations.push_back(a);
    }
    records.insert(records.end(), images[i].records.begin(),
                   images[i].records.end());
  }

  SyntheticInstance instance;
  instance.head = spec.head;
  instance.ground_truth = std::make_shared<const GroundTruthSet>(
      std::move(image_infos), std::move(categories), std::move(annotations));
  DetectionHeader header;
  header.head_spec_digest = head.Digest();
  header.score_floor = spec.score_floor;
  instance.detections = std::make_shared<const RawDetectionSet>(
      std::move(header), std::move(records), instance.head,
      instance.ground_truth);
  return instance;
}

// ---------------------------------------------------------------------------
// Shape distribution

ShapeDistribution ComputeShapeDistribution(const RawDetectionSet& dets,
                                           HistogramAxes axes) {
  if (axes.bins < 1 || !(axes.log2_max > axes.log2_min)) {
    throw InputError("histogram", "need bins >= 1 and log2_max > log2_min");
  }
  const HeadSpec& head = dets.head();
  ShapeDistribution dist;
  dist.axes = axes;
  for (std::size_t a = 0; a < head.num_anchors(); ++a) {
    AnchorShapeHistogram h;
    h.anchor = head.anchor(a);
    h.default_shape = head.shape(a);
    h.width_marginal.assign(axes.bins, 0);
    h.height_marginal.assign(axes.bins, 0);
    dist.anchors.push_back(std::move(h));
  }
  const double scale = axes.bins / (axes.log2_max - axes.log2_min);
  auto bin_of = [&](double v) {
    const int b =
        static_cast<int>(std::floor((std::log2(v) - axes.log2_min) * scale));
    return std::clamp(b, 0, axes.bins - 1);
  };
  for (std::size_t i = 0; i < dets.records().size(); ++i) {
    const Box& b = dets.records()[i].bbox;
    if (!(b.w > 0) || !(b.h > 0)) continue;
    AnchorShapeHistogram& h = dist.anchors[dets.anchor_index(i)];
    const int bw = bin_of(b.w);
    const int bh = bin_of(b.h);
    ++h.bins[{bw, bh}];
    ++h.width_marginal[bw];
    ++h.height_marginal[bh];
    ++h.total;
  }
  return dist;
}

std::string ShapeDistributionToJson(const ShapeDistribution& dist) {
  OrderedJson j;
  j["axes"] = {{"log2_min", dist.axes.log2_min},
               {"log2_max", dist.axes.log2_max},
               {"bins", dist.axes.bins}};
  OrderedJson anchors = OrderedJson::array();
  for (const AnchorShapeHistogram& h : dist.anchors) {
    OrderedJson bins = OrderedJson::array();
    for (const auto& [cell, count] : h.bins) {
      bins.push_back({cell.first, cell.second, count});
    }
    anchors.push_back(
        {{"layer", h.anchor.layer},
         {"slot", h.anchor.slot},
         {"default_width", h.default_shape.width()},
         {"default_height", h.default_shape.height()},
         {"total", h.total},
         {"bins", std::move(bins)},
         {"width_marginal", h.width_marginal},
         {"height_marginal", h.height_marginal}});
  }
  j["anchors"] = std::move(anchors);
  return j.dump() + "\n";
}

}  // namespace anchorprune
