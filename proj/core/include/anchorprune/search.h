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

// Greedy anchor-pruning Pareto search, its brute-force oracle, and the random
// and layer-wise pruning baselines.

#ifndef ANCHORPRUNE_SEARCH_H_
#define ANCHORPRUNE_SEARCH_H_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "anchorprune/anchor_model.h"
#include "anchorprune/eval.h"

namespace anchorprune {

enum class ResourceMetric { kHeadFlops, kBBoxCount };

std::string_view ToString(ResourceMetric metric);
std::int64_t ResourceCost(const AnchorConfiguration& config,
                          ResourceMetric metric);

struct FrontierEntry {
  AnchorConfiguration config;
  double accuracy = 0;
  std::int64_t cost = 0;
  // Configuration this one was derived from by a single removal step.
  std::optional<AnchorMask> parent;

  bool operator==(const FrontierEntry&) const = default;
};

// a.cost <= b.cost and a.accuracy >= b.accuracy, at least one strictly.
bool Dominates(const FrontierEntry& a, const FrontierEntry& b);

// Mutually non-dominated entries ordered by strictly increasing cost (and
// therefore strictly increasing accuracy).
class Frontier {
 public:
  // Inserts `entry` unless an existing entry dominates it or sits at the same
  // (cost, accuracy) point; entries dominated by `entry` are dropped.
  // Returns whether `entry` was inserted.
  bool Insert(FrontierEntry entry);

  const std::vector<FrontierEntry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  bool Contains(const AnchorMask& mask) const;

  // True iff ordering and mutual non-dominance hold.
  bool IsValid() const;

  bool operator==(const Frontier&) const = default;

 private:
  std::vector<FrontierEntry> entries_;
};

struct SearchParams {
  ResourceMetric resource = ResourceMetric::kHeadFlops;
  NeighborMode mode = NeighborMode::kPerAnchor;
  // Children below this accuracy are neither kept nor explored.
  double theta = 0.0;
  // Baselines only.
  std::uint64_t seed = 0;

  // Throws InputError.
  void Validate() const;
};

struct SearchStats {
  std::size_t evaluations = 0;
  std::size_t expansions = 0;
};

// Thrown when an evaluation fails mid-search; carries the state reached.
class SearchAborted : public std::runtime_error {
 public:
  SearchAborted(const std::string& what, Frontier partial, SearchStats stats,
                bool input_error)
      : std::runtime_error(what),
        partial_(std::move(partial)),
        stats_(stats),
        input_error_(input_error) {}

  const Frontier& partial() const { return partial_; }
  const SearchStats& stats() const { return stats_; }
  bool input_error() const { return input_error_; }

 private:
  Frontier partial_;
  SearchStats stats_;
  bool input_error_;
};

// Greedy Pareto search starting from the full configuration. The worklist is
// explored best-accuracy first (ties: smaller mask); a configuration that has
// dropped off the frontier before its turn is not expanded. Each canonical
// configuration is evaluated at most once. Children of one expansion are
// evaluated on up to `threads` workers and merged in canonical order, so the
// result does not depend on `threads`.
Frontier AnchorPruningSearch(const Evaluator& evaluator,
                             const SearchParams& params, int threads = 1,
                             SearchStats* stats = nullptr);

inline constexpr std::size_t kOracleMaxAnchors = 20;

// Exact frontier over every subset of the head's anchors (full configuration
// always admitted, every other subset gated by theta). Throws InputError
// for heads with more than kOracleMaxAnchors anchors.
Frontier BruteForceFrontier(const Evaluator& evaluator,
                            const SearchParams& params, int threads = 1);

struct TrajectoryPoint {
  AnchorConfiguration config;
  double accuracy = 0;
  std::int64_t cost = 0;

  bool operator==(const TrajectoryPoint&) const = default;
};

// Repeatedly removes a uniformly chosen kept anchor (kPerAnchor) or a
// uniformly chosen neighbor (kSharedSlotOrLayer) using params.seed, scoring
// each configuration along the way. `steps == 0` runs until the
// configuration is empty.
std::vector<TrajectoryPoint> RandomPruneBaseline(const Evaluator& evaluator,
                                                 const SearchParams& params,
                                                 std::size_t steps = 0);

// Visits layers in ascending order and, within each, repeatedly removes the
// kept anchor whose removal leaves the highest accuracy (ties: lowest
// canonical index) until `target_per_layer` anchors remain.
TrajectoryPoint LayerwisePruneBaseline(const Evaluator& evaluator,
                                       const SearchParams& params,
                                       int target_per_layer, int threads = 1);

// Area dominated in (cost, accuracy) relative to (ref_cost, 0). Throws
// InputError when ref_cost is below the largest frontier cost.
double Hypervolume(const Frontier& frontier, std::int64_t ref_cost);

// Non-dominated subset of arbitrary scored points, inserted in order.
Frontier FrontierOf(const std::vector<TrajectoryPoint>& points);

}  // namespace anchorprune

#endif  // ANCHORPRUNE_SEARCH_H_
