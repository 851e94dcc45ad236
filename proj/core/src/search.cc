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

#include "anchorprune/search.h"

#include <algorithm>
#include <set>
#include <tuple>
#include <unordered_set>
#include <utility>

#include "anchorprune/errors.h"
#include "anchorprune/parallel.h"
#include "anchorprune/random.h"

namespace anchorprune {

std::string_view ToString(ResourceMetric metric) {
  return metric == ResourceMetric::kHeadFlops ? "flops" : "bboxes";
}

std::int64_t ResourceCost(const AnchorConfiguration& config,
                          ResourceMetric metric) {
  return metric == ResourceMetric::kHeadFlops ? HeadFlops(config)
                                              : BBoxCount(config);
}

bool Dominates(const FrontierEntry& a, const FrontierEntry& b) {
  return a.cost <= b.cost && a.accuracy >= b.accuracy &&
         (a.cost < b.cost || a.accuracy > b.accuracy);
}

bool Frontier::Insert(FrontierEntry entry) {
  for (const FrontierEntry& e : entries_) {
    if (Dominates(e, entry) ||
        (e.cost == entry.cost && e.accuracy == entry.accuracy)) {
      return false;
    }
  }
  std::erase_if(entries_,
                [&](const FrontierEntry& e) { return Dominates(entry, e); });
  auto pos = std::lower_bound(
      entries_.begin(), entries_.end(), entry.cost,
      [](const FrontierEntry& e, std::int64_t cost) { return e.cost < cost; });
  entries_.insert(pos, std::move(entry));
  return true;
}

bool Frontier::Contains(const AnchorMask& mask) const {
  return std::any_of(entries_.begin(), entries_.end(),
                     [&](const FrontierEntry& e) {
                       return e.config.mask() == mask;
                     });
}

bool Frontier::IsValid() const {
  for (std::size_t i = 1; i < entries_.size(); ++i) {
    if (!(entries_[i - 1].cost < entries_[i].cost) ||
        !(entries_[i - 1].accuracy < entries_[i].accuracy)) {
      return false;
    }
  }
  for (const FrontierEntry& a : entries_) {
    for (const FrontierEntry& b : entries_) {
      if (&a != &b && Dominates(a, b)) return false;
    }
  }
  return true;
}

void SearchParams::Validate() const {
  if (!(theta >= 0.0 && theta <= 1.0)) {
    throw InputError("theta", "must lie in [0, 1]");
  }
}

namespace {

std::vector<double> ScoreAll(const Evaluator& evaluator,
                             const std::vector<AnchorConfiguration>& configs,
                             int threads) {
  std::vector<double> acc(configs.size());
  ParallelFor(configs.size(), threads,
              [&](std::size_t i) { acc[i] = evaluator.Accuracy(configs[i]); });
  return acc;
}

// Worklist order: higher accuracy first, then smaller mask.
struct WorkItem {
  double accuracy;
  AnchorConfiguration config;

  bool operator<(const WorkItem& other) const {
    if (accuracy != other.accuracy) return accuracy > other.accuracy;
    return config.mask() < other.config.mask();
  }
};

}  // namespace

Frontier AnchorPruningSearch(const Evaluator& evaluator,
                             const SearchParams& params, int threads,
                             SearchStats* stats) {
  params.Validate();
  SearchStats local;
  Frontier frontier;
  const auto& head = evaluator.detections().head_ptr();

  try {
    AnchorConfiguration full = AnchorConfiguration::Full(head);
    const double full_acc = evaluator.Accuracy(full);
    ++local.evaluations;
    frontier.Insert({full, full_acc, ResourceCost(full, params.resource), {}});

    std::set<WorkItem> worklist{{full_acc, full}};
    std::unordered_set<AnchorMask> visited{full.mask()};

    while (!worklist.empty()) {
      WorkItem item = *worklist.begin();
      worklist.erase(worklist.begin());
      if (!frontier.Contains(item.config.mask())) continue;
      ++local.expansions;

      std::vector<AnchorConfiguration> children;
      for (AnchorConfiguration& child : Neighbors(item.config, params.mode)) {
        if (visited.insert(child.mask()).second) {
          children.push_back(std::move(child));
        }
      }
      const std::vector<double> acc = ScoreAll(evaluator, children, threads);
      local.evaluations += children.size();

      for (std::size_t i = 0; i < children.size(); ++i) {
        if (acc[i] < params.theta) continue;
        FrontierEntry entry{children[i], acc[i],
                            ResourceCost(children[i], params.resource),
                            item.config.mask()};
        if (frontier.Insert(std::move(entry))) {
          worklist.insert({acc[i], children[i]});
        }
      }
    }
  } catch (const InputError& e) {
    throw SearchAborted(
        std::string("search aborted after ") +
            std::to_string(local.evaluations) + " evaluations: " + e.what(),
        frontier, local, true);
  } catch (const std::exception& e) {
    throw SearchAborted(
        std::string("search aborted after ") +
            std::to_string(local.evaluations) + " evaluations: " + e.what(),
        frontier, local, false);
  }
  if (stats) *stats = local;
  return frontier;
}

Frontier BruteForceFrontier(const Evaluator& evaluator,
                            const SearchParams& params, int threads) {
  params.Validate();
  const auto& head = evaluator.detections().head_ptr();
  const std::size_t n = head->num_anchors();
  if (n > kOracleMaxAnchors) {
    throw InputError("oracle", "refusing to enumerate 2^" + std::to_string(n) +
                                   " configurations (limit is " +
                                   std::to_string(kOracleMaxAnchors) +
                                   " anchors)");
  }
  const std::size_t total = std::size_t{1} << n;
  std::vector<AnchorConfiguration> configs;
  configs.reserve(total);
  for (std::size_t bits = 0; bits < total; ++bits) {
    AnchorMask mask(n);
    for (std::size_t i = 0; i < n; ++i) {
      if ((bits >> i) & 1u) mask.set(i);
    }
    configs.emplace_back(head, std::move(mask));
  }
  const std::vector<double> acc = ScoreAll(evaluator, configs, threads);

  Frontier frontier;
  const std::size_t full = total - 1;
  frontier.Insert({configs[full], acc[full],
                   ResourceCost(configs[full], params.resource), {}});
  for (std::size_t i = 0; i + 1 < total; ++i) {
    if (acc[i] < params.theta) continue;
    frontier.Insert(
        {configs[i], acc[i], ResourceCost(configs[i], params.resource), {}});
  }
  return frontier;
}

std::vector<TrajectoryPoint> RandomPruneBaseline(const Evaluator& evaluator,
                                                 const SearchParams& params,
                                                 std::size_t steps) {
  params.Validate();
  KeyedRng rng({params.seed, 0x72616e646f6dULL});
  AnchorConfiguration config =
      AnchorConfiguration::Full(evaluator.detections().head_ptr());
  std::vector<TrajectoryPoint> trajectory;
  while (!config.empty() && (steps == 0 || trajectory.size() < steps)) {
    if (params.mode == NeighborMode::kPerAnchor) {
      std::vector<std::size_t> kept;
      for (std::size_t i = 0; i < config.mask().size(); ++i) {
        if (config.Contains(i)) kept.push_back(i);
      }
      config = config.Without(kept[rng.Below(kept.size())]);
    } else {
      auto children = Neighbors(config, params.mode);
      config = children[rng.Below(children.size())];
    }
    trajectory.push_back({config, evaluator.Accuracy(config),
                          ResourceCost(config, params.resource)});
  }
  return trajectory;
}

TrajectoryPoint LayerwisePruneBaseline(const Evaluator& evaluator,
                                       const SearchParams& params,
                                       int target_per_layer, int threads) {
  params.Validate();
  if (target_per_layer < 0) {
    throw InputError("target", "target anchors per layer must be >= 0");
  }
  const auto& head = evaluator.detections().head_ptr();
  AnchorConfiguration config = AnchorConfiguration::Full(head);
  for (const LayerSpec& layer : head->layers()) {
    while (config.KeptInLayer(layer.index) > target_per_layer) {
      std::vector<std::size_t> removable;
      std::vector<AnchorConfiguration> candidates;
      for (std::size_t i = head->layer_begin(layer.index);
           i < head->layer_end(layer.index); ++i) {
        if (!config.Contains(i)) continue;
        removable.push_back(i);
        candidates.push_back(config.Without(i));
      }
      const std::vector<double> acc = ScoreAll(evaluator, candidates, threads);
      std::size_t best = 0;
      for (std::size_t k = 1; k < acc.size(); ++k) {
        if (acc[k] > acc[best]) best = k;
      }
      config = std::move(candidates[best]);
    }
  }
  const double acc = evaluator.Accuracy(config);
  return {config, acc, ResourceCost(config, params.resource)};
}

double Hypervolume(const Frontier& frontier, std::int64_t ref_cost) {
  const auto& entries = frontier.entries();
  if (entries.empty()) return 0.0;
  if (ref_cost < entries.back().cost) {
    throw InputError("hypervolume",
                     "reference cost below the largest frontier cost");
  }
  double volume = 0.0;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const std::int64_t next =
        i + 1 < entries.size() ? entries[i + 1].cost : ref_cost;
    volume += static_cast<double>(next - entries[i].cost) * entries[i].accuracy;
  }
  return volume;
}

Frontier FrontierOf(const std::vector<TrajectoryPoint>& points) {
  Frontier frontier;
  for (const TrajectoryPoint& p : points) {
    frontier.Insert({p.config, p.accuracy, p.cost, {}});
  }
  return frontier;
}

}  // namespace anchorprune
