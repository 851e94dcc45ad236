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

// Detection-head geometry, anchor configurations and their resource costs.
//
// A head is a list of feature-map layers, each carrying a set of anchor
// slots. Every anchor slot of every layer gets a canonical index ordered by
// (layer_index, slot_index); configurations are bitmasks over those indices.

#ifndef ANCHORPRUNE_ANCHOR_MODEL_H_
#define ANCHORPRUNE_ANCHOR_MODEL_H_

#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace anchorprune {

// Anchor box shape. `scale` is sqrt(area) in input pixels and
// `aspect_ratio` is width / height.
struct AnchorShape {
  double scale = 0.0;
  double aspect_ratio = 1.0;

  double width() const;
  double height() const;

  bool operator==(const AnchorShape&) const = default;
};

struct AnchorId {
  int layer = 0;
  int slot = 0;

  auto operator<=>(const AnchorId&) const = default;
};

struct AnchorSlot {
  int slot = 0;
  AnchorShape shape;

  bool operator==(const AnchorSlot&) const = default;
};

struct LayerSpec {
  int index = 0;
  int height = 1;
  int width = 1;
  int stride = 1;
  int in_channels = 1;
  std::vector<AnchorSlot> anchors;

  std::int64_t cells() const {
    return static_cast<std::int64_t>(height) * width;
  }

  bool operator==(const LayerSpec&) const = default;
};

enum class HeadStyle { kPerLayerConv, kSharedTower };

// Shared classification/regression towers applied to every feature map
// (RetinaNet style). Tower input channels are taken equal to `width`.
struct TowerSpec {
  int depth = 0;
  int width = 0;
  int subnets = 0;

  bool operator==(const TowerSpec&) const = default;
};

// Immutable, validated description of a detection head.
class HeadSpec {
 public:
  // Throws InputError when an invariant is violated. Layers may be given in
  // any order but their indices must be exactly 0..k-1; anchors within a
  // layer are sorted by slot.
  HeadSpec(HeadStyle style, int num_classes, int box_outputs, int kernel,
           std::vector<LayerSpec> layers,
           std::optional<TowerSpec> tower = std::nullopt);

  static HeadSpec FromJson(std::string_view text);

  // Canonical JSON: sorted keys, no whitespace. The digest is the SHA-256 of
  // exactly this text, in lowercase hex.
  std::string ToJson() const;
  std::string ToPrettyJson() const;
  std::string Digest() const;

  HeadStyle style() const { return style_; }
  int num_classes() const { return num_classes_; }
  int box_outputs() const { return box_outputs_; }
  int kernel() const { return kernel_; }
  const std::vector<LayerSpec>& layers() const { return layers_; }
  const std::optional<TowerSpec>& tower() const { return tower_; }

  std::size_t num_anchors() const { return anchors_.size(); }
  // All anchors in canonical order.
  std::span<const AnchorId> anchors() const { return anchors_; }
  const AnchorId& anchor(std::size_t index) const { return anchors_[index]; }
  const AnchorShape& shape(std::size_t index) const;
  std::optional<std::size_t> IndexOf(AnchorId id) const;

  // Canonical indices of layer `layer` occupy [layer_begin, layer_end).
  std::size_t layer_begin(int layer) const { return layer_offsets_[layer]; }
  std::size_t layer_end(int layer) const { return layer_offsets_[layer + 1]; }

  bool operator==(const HeadSpec& other) const;

 private:
  HeadStyle style_;
  int num_classes_;
  int box_outputs_;
  int kernel_;
  std::vector<LayerSpec> layers_;
  std::optional<TowerSpec> tower_;
  std::vector<AnchorId> anchors_;
  std::vector<std::size_t> layer_offsets_;
};

// Fixed-size bitset over canonical anchor indices. Ordering compares the
// masks as unsigned integers (bit i has weight 2^i).
class AnchorMask {
 public:
  AnchorMask() = default;
  explicit AnchorMask(std::size_t size, bool value = false);

  std::size_t size() const { return size_; }
  bool test(std::size_t i) const {
    return (words_[i / 64] >> (i % 64)) & 1u;
  }
  void set(std::size_t i) { words_[i / 64] |= std::uint64_t{1} << (i % 64); }
  void reset(std::size_t i) {
    words_[i / 64] &= ~(std::uint64_t{1} << (i % 64));
  }
  std::size_t count() const;
  bool none() const { return count() == 0; }

  // Lowercase hex, ceil(size/4) digits, most significant digit first.
  std::string ToHex() const;
  // Accepts an optional "0x" prefix and any number of leading zeros; bits
  // beyond `size` must be clear.
  static AnchorMask FromHex(std::string_view hex, std::size_t size);

  std::size_t Hash() const;

  bool operator==(const AnchorMask&) const = default;
  std::strong_ordering operator<=>(const AnchorMask& other) const;

 private:
  std::size_t size_ = 0;
  std::vector<std::uint64_t> words_;
};

// A subset of a head's anchors. Cheap to copy; the head is shared.
class AnchorConfiguration {
 public:
  AnchorConfiguration(std::shared_ptr<const HeadSpec> head, AnchorMask kept);

  static AnchorConfiguration Full(std::shared_ptr<const HeadSpec> head);
  static AnchorConfiguration Empty(std::shared_ptr<const HeadSpec> head);
  // Throws InputError for anchors not in the head.
  static AnchorConfiguration FromKept(std::shared_ptr<const HeadSpec> head,
                                      std::span<const AnchorId> kept);
  // "full", "empty", or a hex mask.
  static AnchorConfiguration Parse(std::shared_ptr<const HeadSpec> head,
                                   std::string_view text);

  const HeadSpec& head() const { return *head_; }
  const std::shared_ptr<const HeadSpec>& head_ptr() const { return head_; }
  const AnchorMask& mask() const { return kept_; }

  bool Contains(std::size_t index) const { return kept_.test(index); }
  bool Contains(AnchorId id) const;
  std::size_t size() const { return kept_.count(); }
  bool empty() const { return kept_.none(); }
  int KeptInLayer(int layer) const;
  std::vector<AnchorId> Kept() const;
  std::string Encoding() const { return kept_.ToHex(); }

  AnchorConfiguration Without(std::size_t index) const;

  bool operator==(const AnchorConfiguration& other) const {
    return kept_ == other.kept_ && *head_ == *other.head_;
  }

 private:
  std::shared_ptr<const HeadSpec> head_;
  AnchorMask kept_;
};

// Total predicted boxes per image: sum over layers of kept anchors x H x W.
std::int64_t BBoxCount(const AnchorConfiguration& config);

// Head multiply-adds (one MAC counts as one FLOP; bias and activations
// excluded).
//
// PerLayerConv: sum_i H_i W_i k^2 C_in,i A_i (classes + box_outputs).
// SharedTower: for every layer with at least one kept anchor,
//   subnets * depth * H W k^2 width^2 + H W k^2 width A (classes + box).
// A layer without kept anchors costs nothing since the head is not applied.
std::int64_t HeadFlops(const AnchorConfiguration& config);

// Layer geometry for GenerateOverAnchorized; any anchors already present in
// `layers` are replaced.
struct OverAnchorSpec {
  HeadStyle style = HeadStyle::kPerLayerConv;
  int num_classes = 1;
  int box_outputs = 4;
  int kernel = 3;
  std::vector<LayerSpec> layers;
  std::optional<TowerSpec> tower;
  // One scale list per layer.
  std::vector<std::vector<double>> scales_per_layer;
  // Either one shared list or one list per layer.
  std::vector<std::vector<double>> ratios_per_layer;

  // JSON form: layer geometry plus "scales" per layer, and "ratios" either
  // per layer or once at the top level. Throws InputError.
  static OverAnchorSpec FromJson(std::string_view text);
};

// Dense scales x ratios cross product per layer, slots numbered scale-major
// from 0. Throws InputError for non-positive or missing scales and ratios.
HeadSpec GenerateOverAnchorized(const OverAnchorSpec& spec);

enum class NeighborMode { kPerAnchor, kSharedSlotOrLayer };

// Configurations one removal step away from `config`, in canonical order.
//
// kPerAnchor: one child per kept anchor.
// kSharedSlotOrLayer: one child per kept slot index (removed from every
// layer), then one child per non-empty layer (all of its anchors removed).
// When both rules produce the same child only the first is returned.
std::vector<AnchorConfiguration> Neighbors(const AnchorConfiguration& config,
                                           NeighborMode mode);

std::string_view ToString(HeadStyle style);
std::string_view ToString(NeighborMode mode);

}  // namespace anchorprune

template <>
struct std::hash<anchorprune::AnchorMask> {
  std::size_t operator()(const anchorprune::AnchorMask& m) const {
    return m.Hash();
  }
};

#endif  // ANCHORPRUNE_ANCHOR_MODEL_H_
