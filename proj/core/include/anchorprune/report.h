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

// Frontier serialization, SVG plots and run manifests.

#ifndef ANCHORPRUNE_REPORT_H_
#define ANCHORPRUNE_REPORT_H_

#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "anchorprune/eval.h"
#include "anchorprune/search.h"
#include "anchorprune/synthgen.h"

namespace anchorprune {

inline constexpr std::string_view kFrontierFormat = "anchor-frontier/v1";

struct FrontierMetadata {
  std::string head_spec_digest;
  ResourceMetric resource = ResourceMetric::kHeadFlops;
  Protocol metric = Protocol::kCocoStyle;
  NeighborMode mode = NeighborMode::kPerAnchor;
  double theta = 0.0;

  bool operator==(const FrontierMetadata&) const = default;
};

// Entries in ascending cost with hex encoding, kept anchors, accuracy, cost
// and parent encoding (null for roots).
std::string FrontierToJson(const Frontier& frontier,
                           const FrontierMetadata& meta);
// Header "encoding,accuracy,cost" plus one row per entry.
std::string FrontierToCsv(const Frontier& frontier);

struct ParsedFrontier {
  Frontier frontier;
  FrontierMetadata meta;
};

// Rejects documents whose digest, costs or ordering disagree with `head`.
ParsedFrontier ParseFrontierJson(std::string_view text,
                                 std::shared_ptr<const HeadSpec> head);

std::string TrajectoryToJson(const std::vector<TrajectoryPoint>& points,
                             const FrontierMetadata& meta);
std::string TrajectoryToCsv(const std::vector<TrajectoryPoint>& points);
std::vector<TrajectoryPoint> ParseTrajectoryJson(
    std::string_view text, std::shared_ptr<const HeadSpec> head);

struct FrontierPlotOptions {
  std::string title = "Accuracy vs. resource cost";
  std::string x_label = "head FLOPs (M)";
  std::string y_label = "mAP";
  // Costs are divided by this before plotting.
  double cost_scale = 1e6;
  // Encoding of the unpruned configuration, highlighted when present.
  std::optional<std::string> unpruned_encoding;
};

// Scatter of frontier points joined by a staircase (one step per entry),
// plus optional baseline points. Markers carry the classes
// "frontier-marker", "baseline-marker" and "unpruned-highlight"; the
// staircase path has class "frontier-staircase".
std::string RenderFrontierSvg(const Frontier& frontier,
                              const std::vector<TrajectoryPoint>& baseline,
                              const FrontierPlotOptions& options = {});

// Log-log predicted shape density per anchor with the default anchor shape
// marked, and width/height marginals along the axes. `layers` restricts the
// plot (empty = all layers).
std::string RenderShapeDistributionSvg(const ShapeDistribution& dist,
                                       const std::vector<int>& layers = {});

struct ManifestFile {
  std::string role;
  std::string path;
  std::string sha256;
};

struct RunManifest {
  std::string tool_version;
  std::string command;
  std::vector<ManifestFile> inputs;
  std::vector<ManifestFile> outputs;
  // Flattened parameters, written in insertion order.
  std::vector<std::pair<std::string, std::string>> params;
  std::string started_at;
  std::string finished_at;

  std::string ToJson() const;
};

}  // namespace anchorprune

#endif  // ANCHORPRUNE_REPORT_H_
