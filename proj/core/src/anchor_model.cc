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

#include <algorithm>
#include <bit>
#include <cmath>
#include <set>
#include <utility>

#include "anchorprune/digest.h"
#include "anchorprune/errors.h"
#include "json_util.h"

namespace anchorprune {

using internal::Json;

double AnchorShape::width() const { return scale * std::sqrt(aspect_ratio); }
double AnchorShape::height() const { return scale / std::sqrt(aspect_ratio); }

std::string_view ToString(HeadStyle style) {
  return style == HeadStyle::kPerLayerConv ? "PerLayerConv" : "SharedTower";
}

std::string_view ToString(NeighborMode mode) {
  return mode == NeighborMode::kPerAnchor ? "per-anchor" : "shared";
}

// ---------------------------------------------------------------------------
// HeadSpec

HeadSpec::HeadSpec(HeadStyle style, int num_classes, int box_outputs,
                   int kernel, std::vector<LayerSpec> layers,
                   std::optional<TowerSpec> tower)
    : style_(style),
      num_classes_(num_classes),
      box_outputs_(box_outputs),
      kernel_(kernel),
      layers_(std::move(layers)),
      tower_(tower) {
  if (num_classes_ < 1) throw InputError("num_classes", "must be >= 1");
  if (box_outputs_ < 1) throw InputError("box_outputs", "must be >= 1");
  if (kernel_ < 1) throw InputError("kernel", "must be >= 1");
  if (layers_.empty()) throw InputError("layers", "at least one layer needed");

  std::sort(layers_.begin(), layers_.end(),
            [](const LayerSpec& a, const LayerSpec& b) {
              return a.index < b.index;
            });
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    LayerSpec& layer = layers_[i];
    const std::string locus = "layers[" + std::to_string(i) + "]";
    if (layer.index != static_cast<int>(i)) {
      throw InputError(locus, "layer indices must be exactly 0.." +
                                  std::to_string(layers_.size() - 1));
    }
    if (layer.height < 1 || layer.width < 1 || layer.stride < 1 ||
        layer.in_channels < 1) {
      throw InputError(locus, "h, w, stride and in_channels must be >= 1");
    }
    std::sort(layer.anchors.begin(), layer.anchors.end(),
              [](const AnchorSlot& a, const AnchorSlot& b) {
                return a.slot < b.slot;
              });
    for (std::size_t j = 0; j < layer.anchors.size(); ++j) {
      const AnchorSlot& a = layer.anchors[j];
      const std::string alocus = locus + ".anchors[" + std::to_string(j) + "]";
      if (a.slot < 0) throw InputError(alocus, "slot must be >= 0");
      if (j > 0 && layer.anchors[j - 1].slot == a.slot) {
        throw InputError(alocus, "duplicate slot " + std::to_string(a.slot));
      }
      if (!(a.shape.scale > 0) || !(a.shape.aspect_ratio > 0)) {
        throw InputError(alocus, "scale and ratio must be positive");
      }
    }
  }

  if (style_ == HeadStyle::kSharedTower) {
    if (!tower_) throw InputError("tower", "required for SharedTower heads");
    if (tower_->depth < 0 || tower_->width < 1 || tower_->subnets < 0) {
      throw InputError("tower", "depth, subnets >= 0 and width >= 1 required");
    }
    for (std::size_t i = 1; i < layers_.size(); ++i) {
      const auto& a = layers_[0].anchors;
      const auto& b = layers_[i].anchors;
      bool same = a.size() == b.size() &&
                  std::equal(a.begin(), a.end(), b.begin(),
                             [](const AnchorSlot& x, const AnchorSlot& y) {
                               return x.slot == y.slot;
                             });
      if (!same) {
        throw InputError("layers[" + std::to_string(i) + "]",
                         "SharedTower heads need identical slot sets on "
                         "every layer");
      }
    }
  } else if (tower_) {
    throw InputError("tower", "only allowed for SharedTower heads");
  }

  layer_offsets_.push_back(0);
  for (const LayerSpec& layer : layers_) {
    for (const AnchorSlot& a : layer.anchors) {
      anchors_.push_back({layer.index, a.slot});
    }
    layer_offsets_.push_back(anchors_.size());
  }
}

const AnchorShape& HeadSpec::shape(std::size_t index) const {
  const AnchorId& id = anchors_[index];
  return layers_[id.layer].anchors[index - layer_offsets_[id.layer]].shape;
}

std::optional<std::size_t> HeadSpec::IndexOf(AnchorId id) const {
  if (id.layer < 0 || id.layer >= static_cast<int>(layers_.size())) {
    return std::nullopt;
  }
  auto first = anchors_.begin() + layer_offsets_[id.layer];
  auto last = anchors_.begin() + layer_offsets_[id.layer + 1];
  auto it = std::lower_bound(first, last, id);
  if (it == last || *it != id) return std::nullopt;
  return static_cast<std::size_t>(it - anchors_.begin());
}

bool HeadSpec::operator==(const HeadSpec& other) const {
  return style_ == other.style_ && num_classes_ == other.num_classes_ &&
         box_outputs_ == other.box_outputs_ && kernel_ == other.kernel_ &&
         layers_ == other.layers_ && tower_ == other.tower_;
}

namespace {

Json HeadToJson(const HeadSpec& head) {
  Json j;
  j["style"] = std::string(ToString(head.style()));
  j["num_classes"] = head.num_classes();
  j["box_outputs"] = head.box_outputs();
  j["kernel"] = head.kernel();
  Json layers = Json::array();
  for (const LayerSpec& layer : head.layers()) {
    Json anchors = Json::array();
    for (const AnchorSlot& a : layer.anchors) {
      anchors.push_back(
          {{"slot", a.slot}, {"scale", a.shape.scale},
           {"ratio", a.shape.aspect_ratio}});
    }
    layers.push_back({{"index", layer.index},
                      {"h", layer.height},
                      {"w", layer.width},
                      {"stride", layer.stride},
                      {"in_channels", layer.in_channels},
                      {"anchors", std::move(anchors)}});
  }
  j["layers"] = std::move(layers);
  if (head.tower()) {
    j["tower"] = {{"depth", head.tower()->depth},
                  {"width", head.tower()->width},
                  {"subnets", head.tower()->subnets}};
  }
  return j;
}

int ToInt(std::int64_t v, const std::string& locus) {
  if (v < INT32_MIN || v > INT32_MAX) throw InputError(locus, "out of range");
  return static_cast<int>(v);
}

}  // namespace

namespace {

HeadStyle ParseStyle(const internal::Json& j, const std::string& locus) {
  const std::string name = internal::GetString(j, "style", locus);
  if (name == "PerLayerConv") return HeadStyle::kPerLayerConv;
  if (name == "SharedTower") return HeadStyle::kSharedTower;
  throw InputError(locus + ".style", "unknown style \"" + name + "\"");
}

LayerSpec ParseLayerGeometry(const internal::Json& jl,
                             const std::string& locus) {
  using namespace internal;
  LayerSpec layer;
  layer.index = ToInt(GetInt(jl, "index", locus), locus);
  layer.height = ToInt(GetInt(jl, "h", locus), locus);
  layer.width = ToInt(GetInt(jl, "w", locus), locus);
  layer.stride = ToInt(GetInt(jl, "stride", locus), locus);
  layer.in_channels = ToInt(GetInt(jl, "in_channels", locus), locus);
  return layer;
}

std::optional<TowerSpec> ParseTower(const internal::Json& j) {
  using namespace internal;
  auto it = j.find("tower");
  if (it == j.end() || it->is_null()) return std::nullopt;
  const Json& jt = RequireObject(*it, "tower");
  RejectUnknownKeys(jt, "tower", {"depth", "width", "subnets"});
  return TowerSpec{ToInt(GetInt(jt, "depth", "tower"), "tower"),
                   ToInt(GetInt(jt, "width", "tower"), "tower"),
                   ToInt(GetInt(jt, "subnets", "tower"), "tower")};
}

std::vector<double> ParseNumberList(const internal::Json& j,
                                    const std::string& key,
                                    const std::string& locus) {
  std::vector<double> out;
  const internal::Json& a = internal::GetArray(j, key, locus);
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!a[i].is_number()) {
      throw InputError(internal::Index(locus + "." + key, i),
                       "expected a number");
    }
    out.push_back(a[i].get<double>());
  }
  return out;
}

}  // namespace

HeadSpec HeadSpec::FromJson(std::string_view text) {
  using namespace internal;
  const Json j = ParseJson(text, "head");
  RequireObject(j, "head");
  RejectUnknownKeys(j, "head", {"style", "num_classes", "box_outputs",
                                "kernel", "layers", "tower"});
  const HeadStyle style = ParseStyle(j, "head");

  std::vector<LayerSpec> layers;
  const Json& jlayers = GetArray(j, "layers", "head");
  for (std::size_t i = 0; i < jlayers.size(); ++i) {
    const std::string locus = Index("layers", i);
    const Json& jl = RequireObject(jlayers[i], locus);
    RejectUnknownKeys(jl, locus,
                      {"index", "h", "w", "stride", "in_channels", "anchors"});
    LayerSpec layer = ParseLayerGeometry(jl, locus);
    const Json& janchors = GetArray(jl, "anchors", locus);
    for (std::size_t k = 0; k < janchors.size(); ++k) {
      const std::string alocus = Index(locus + ".anchors", k);
      const Json& ja = RequireObject(janchors[k], alocus);
      RejectUnknownKeys(ja, alocus, {"slot", "scale", "ratio"});
      layer.anchors.push_back(
          {ToInt(GetInt(ja, "slot", alocus), alocus),
           {GetNumber(ja, "scale", alocus), GetNumber(ja, "ratio", alocus)}});
    }
    layers.push_back(std::move(layer));
  }
  return HeadSpec(style, ToInt(GetInt(j, "num_classes", "head"), "head"),
                  ToInt(GetInt(j, "box_outputs", "head"), "head"),
                  ToInt(GetInt(j, "kernel", "head"), "head"), std::move(layers),
                  ParseTower(j));
}

OverAnchorSpec OverAnchorSpec::FromJson(std::string_view text) {
  using namespace internal;
  const Json j = ParseJson(text, "overanchor");
  RequireObject(j, "overanchor");
  RejectUnknownKeys(j, "overanchor", {"style", "num_classes", "box_outputs",
                                      "kernel", "layers", "tower", "ratios"});
  OverAnchorSpec spec;
  spec.style = ParseStyle(j, "overanchor");
  spec.num_classes = ToInt(GetInt(j, "num_classes", "overanchor"), "overanchor");
  spec.box_outputs = ToInt(GetInt(j, "box_outputs", "overanchor"), "overanchor");
  spec.kernel = ToInt(GetInt(j, "kernel", "overanchor"), "overanchor");
  spec.tower = ParseTower(j);
  std::optional<std::vector<double>> shared;
  if (j.contains("ratios")) shared = ParseNumberList(j, "ratios", "overanchor");

  const Json& jlayers = GetArray(j, "layers", "overanchor");
  for (std::size_t i = 0; i < jlayers.size(); ++i) {
    const std::string locus = Index("layers", i);
    const Json& jl = RequireObject(jlayers[i], locus);
    RejectUnknownKeys(jl, locus, {"index", "h", "w", "stride", "in_channels",
                                  "scales", "ratios"});
    spec.layers.push_back(ParseLayerGeometry(jl, locus));
    spec.scales_per_layer.push_back(ParseNumberList(jl, "scales", locus));
    if (jl.contains("ratios")) {
      spec.ratios_per_layer.push_back(ParseNumberList(jl, "ratios", locus));
    } else if (shared) {
      spec.ratios_per_layer.push_back(*shared);
    } else {
      throw InputError(locus, "missing \"ratios\" and no shared list");
    }
  }
  return spec;
}

std::string HeadSpec::ToJson() const { return HeadToJson(*this).dump(); }

std::string HeadSpec::ToPrettyJson() const {
  return HeadToJson(*this).dump(2) + "\n";
}

std::string HeadSpec::Digest() const { return Sha256Hex(ToJson()); }

// ---------------------------------------------------------------------------
// AnchorMask

AnchorMask::AnchorMask(std::size_t size, bool value)
    : size_(size), words_((size + 63) / 64, value ? ~std::uint64_t{0} : 0) {
  if (value && size % 64 != 0) {
    words_.back() = (std::uint64_t{1} << (size % 64)) - 1;
  }
}

std::size_t AnchorMask::count() const {
  std::size_t n = 0;
  for (std::uint64_t w : words_) n += std::popcount(w);
  return n;
}

std::string AnchorMask::ToHex() const {
  static constexpr char kDigits[] = "0123456789abcdef";
  const std::size_t digits = std::max<std::size_t>(1, (size_ + 3) / 4);
  std::string out(digits, '0');
  for (std::size_t d = 0; d < digits; ++d) {
    const std::size_t bit = d * 4;
    unsigned nibble = 0;
    for (std::size_t b = 0; b < 4 && bit + b < size_; ++b) {
      nibble |= static_cast<unsigned>(test(bit + b)) << b;
    }
    out[digits - 1 - d] = kDigits[nibble];
  }
  return out;
}

AnchorMask AnchorMask::FromHex(std::string_view hex, std::size_t size) {
  if (hex.starts_with("0x") || hex.starts_with("0X")) hex.remove_prefix(2);
  if (hex.empty()) throw InputError("config", "empty hex mask");
  AnchorMask mask(size);
  for (std::size_t d = 0; d < hex.size(); ++d) {
    const char c = hex[hex.size() - 1 - d];
    unsigned nibble;
    if (c >= '0' && c <= '9') {
      nibble = c - '0';
    } else if (c >= 'a' && c <= 'f') {
      nibble = c - 'a' + 10;
    } else if (c >= 'A' && c <= 'F') {
      nibble = c - 'A' + 10;
    } else {
      throw InputError("config", "invalid hex digit '" + std::string(1, c) +
                                     "'");
    }
    for (std::size_t b = 0; b < 4; ++b) {
      if (!((nibble >> b) & 1u)) continue;
      const std::size_t bit = d * 4 + b;
      if (bit >= size) {
        throw InputError("config", "mask sets bit " + std::to_string(bit) +
                                       " but the head has only " +
                                       std::to_string(size) + " anchors");
      }
      mask.set(bit);
    }
  }
  return mask;
}

std::size_t AnchorMask::Hash() const {
  std::size_t h = size_;
  for (std::uint64_t w : words_) {
    h ^= std::hash<std::uint64_t>{}(w) + 0x9e3779b97f4a7c15ULL + (h << 6) +
         (h >> 2);
  }
  return h;
}

std::strong_ordering AnchorMask::operator<=>(const AnchorMask& other) const {
  if (auto c = size_ <=> other.size_; c != 0) return c;
  for (std::size_t i = words_.size(); i-- > 0;) {
    if (auto c = words_[i] <=> other.words_[i]; c != 0) return c;
  }
  return std::strong_ordering::equal;
}

// ---------------------------------------------------------------------------
// AnchorConfiguration

AnchorConfiguration::AnchorConfiguration(std::shared_ptr<const HeadSpec> head,
                                         AnchorMask kept)
    : head_(std::move(head)), kept_(std::move(kept)) {
  if (!head_) throw InputError("config", "configuration without a head");
  if (kept_.size() != head_->num_anchors()) {
    throw BindingError("config", "mask size " + std::to_string(kept_.size()) +
                                     " does not match head anchor count " +
                                     std::to_string(head_->num_anchors()));
  }
}

AnchorConfiguration AnchorConfiguration::Full(
    std::shared_ptr<const HeadSpec> head) {
  const std::size_t n = head->num_anchors();
  return AnchorConfiguration(std::move(head), AnchorMask(n, true));
}

AnchorConfiguration AnchorConfiguration::Empty(
    std::shared_ptr<const HeadSpec> head) {
  const std::size_t n = head->num_anchors();
  return AnchorConfiguration(std::move(head), AnchorMask(n, false));
}

AnchorConfiguration AnchorConfiguration::FromKept(
    std::shared_ptr<const HeadSpec> head, std::span<const AnchorId> kept) {
  AnchorMask mask(head->num_anchors());
  for (const AnchorId& id : kept) {
    auto index = head->IndexOf(id);
    if (!index) {
      throw InputError("config", "unknown anchor (" + std::to_string(id.layer) +
                                     ", " + std::to_string(id.slot) + ")");
    }
    mask.set(*index);
  }
  return AnchorConfiguration(std::move(head), std::move(mask));
}

AnchorConfiguration AnchorConfiguration::Parse(
    std::shared_ptr<const HeadSpec> head, std::string_view text) {
  if (text == "full") return Full(std::move(head));
  if (text == "empty") return Empty(std::move(head));
  const std::size_t n = head->num_anchors();
  return AnchorConfiguration(std::move(head), AnchorMask::FromHex(text, n));
}

bool AnchorConfiguration::Contains(AnchorId id) const {
  auto index = head_->IndexOf(id);
  return index && kept_.test(*index);
}

int AnchorConfiguration::KeptInLayer(int layer) const {
  int n = 0;
  for (std::size_t i = head_->layer_begin(layer); i < head_->layer_end(layer);
       ++i) {
    n += kept_.test(i);
  }
  return n;
}

std::vector<AnchorId> AnchorConfiguration::Kept() const {
  std::vector<AnchorId> out;
  for (std::size_t i = 0; i < kept_.size(); ++i) {
    if (kept_.test(i)) out.push_back(head_->anchor(i));
  }
  return out;
}

AnchorConfiguration AnchorConfiguration::Without(std::size_t index) const {
  AnchorMask mask = kept_;
  mask.reset(index);
  return AnchorConfiguration(head_, std::move(mask));
}

// ---------------------------------------------------------------------------
// Cost models

std::int64_t BBoxCount(const AnchorConfiguration& config) {
  std::int64_t total = 0;
  for (const LayerSpec& layer : config.head().layers()) {
    total += config.KeptInLayer(layer.index) * layer.cells();
  }
  return total;
}

std::int64_t HeadFlops(const AnchorConfiguration& config) {
  const HeadSpec& head = config.head();
  const std::int64_t k2 = static_cast<std::int64_t>(head.kernel()) *
                          head.kernel();
  const std::int64_t outputs_per_anchor =
      static_cast<std::int64_t>(head.num_classes()) + head.box_outputs();
  std::int64_t total = 0;
  for (const LayerSpec& layer : head.layers()) {
    const std::int64_t kept = config.KeptInLayer(layer.index);
    if (head.style() == HeadStyle::kPerLayerConv) {
      total += layer.cells() * k2 * layer.in_channels * kept *
               outputs_per_anchor;
    } else if (kept > 0) {
      const TowerSpec& t = *head.tower();
      const std::int64_t width = t.width;
      total += static_cast<std::int64_t>(t.subnets) * t.depth *
               layer.cells() * k2 * width * width;
      total += layer.cells() * k2 * width * kept * outputs_per_anchor;
    }
  }
  return total;
}

// ---------------------------------------------------------------------------
// Overanchorized heads

HeadSpec GenerateOverAnchorized(const OverAnchorSpec& spec) {
  const std::size_t k = spec.layers.size();
  if (spec.scales_per_layer.size() != k) {
    throw InputError("scales_per_layer", "expected one scale list per layer");
  }
  if (spec.ratios_per_layer.size() != 1 && spec.ratios_per_layer.size() != k) {
    throw InputError("ratios", "expected one shared list or one per layer");
  }
  std::vector<LayerSpec> layers = spec.layers;
  for (std::size_t i = 0; i < k; ++i) {
    const auto& scales = spec.scales_per_layer[i];
    const auto& ratios = spec.ratios_per_layer.size() == 1
                             ? spec.ratios_per_layer[0]
                             : spec.ratios_per_layer[i];
    const std::string locus = "layers[" + std::to_string(i) + "]";
    if (scales.empty() || ratios.empty()) {
      throw InputError(locus, "scales and ratios must be non-empty");
    }
    layers[i].anchors.clear();
    int slot = 0;
    for (double s : scales) {
      for (double r : ratios) {
        if (!(s > 0) || !(r > 0)) {
          throw InputError(locus, "scales and ratios must be positive");
        }
        layers[i].anchors.push_back({slot++, {s, r}});
      }
    }
  }
  return HeadSpec(spec.style, spec.num_classes, spec.box_outputs, spec.kernel,
                  std::move(layers), spec.tower);
}

// ---------------------------------------------------------------------------
// Neighborhoods

std::vector<AnchorConfiguration> Neighbors(const AnchorConfiguration& config,
                                           NeighborMode mode) {
  std::vector<AnchorConfiguration> children;
  const HeadSpec& head = config.head();
  if (mode == NeighborMode::kPerAnchor) {
    for (std::size_t i = 0; i < head.num_anchors(); ++i) {
      if (config.Contains(i)) children.push_back(config.Without(i));
    }
    return children;
  }

  std::set<int> slots;
  for (std::size_t i = 0; i < head.num_anchors(); ++i) {
    if (config.Contains(i)) slots.insert(head.anchor(i).slot);
  }
  std::vector<AnchorMask> seen;
  auto add = [&](AnchorMask mask) {
    if (std::find(seen.begin(), seen.end(), mask) != seen.end()) return;
    seen.push_back(mask);
    children.emplace_back(config.head_ptr(), std::move(mask));
  };
  for (int slot : slots) {
    AnchorMask mask = config.mask();
    for (std::size_t i = 0; i < head.num_anchors(); ++i) {
      if (head.anchor(i).slot == slot) mask.reset(i);
    }
    add(std::move(mask));
  }
  for (const LayerSpec& layer : head.layers()) {
    if (config.KeptInLayer(layer.index) == 0) continue;
    AnchorMask mask = config.mask();
    for (std::size_t i = head.layer_begin(layer.index);
         i < head.layer_end(layer.index); ++i) {
      mask.reset(i);
    }
    add(std::move(mask));
  }
  return children;
}

}  // namespace anchorprune
