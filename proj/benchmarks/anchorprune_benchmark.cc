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

#include <memory>
#include <vector>

#include "anchorprune/anchor_model.h"
#include "anchorprune/eval.h"
#include "anchorprune/search.h"
#include "anchorprune/synthgen.h"
#include "benchmark/benchmark.h"

namespace anchorprune {
namespace {

std::shared_ptr<const HeadSpec> PyramidHead(int anchors_per_layer) {
  const int sides[] = {38, 19, 10, 5, 3, 1};
  std::vector<LayerSpec> layers;
  for (int l = 0; l < 6; ++l) {
    LayerSpec spec{l, sides[l], sides[l], 300 / sides[l], 256, {}};
    for (int s = 0; s < anchors_per_layer; ++s) {
      spec.anchors.push_back({s, {24.0 * (l + 1), 0.5 + 0.5 * s}});
    }
    layers.push_back(spec);
  }
  return std::make_shared<const HeadSpec>(HeadStyle::kPerLayerConv, 21, 4, 3,
                                          layers);
}

SyntheticInstance MakeInstance(int anchors_per_layer, int images) {
  SynthSpec spec;
  spec.seed = 42;
  spec.num_images = images;
  spec.num_classes = 5;
  spec.max_objects = 6;
  spec.false_positive_rate = 0.05;
  spec.head = PyramidHead(anchors_per_layer);
  return Generate(spec);
}

void BM_HeadFlops(benchmark::State& state) {
  const auto head = PyramidHead(6);
  const AnchorConfiguration full = AnchorConfiguration::Full(head);
  for (auto _ : state) benchmark::DoNotOptimize(HeadFlops(full));
}
BENCHMARK(BM_HeadFlops);

void BM_Accuracy(benchmark::State& state) {
  const SyntheticInstance inst =
      MakeInstance(4, static_cast<int>(state.range(0)));
  const Evaluator ev(inst.detections, MetricSpec::Coco());
  const AnchorConfiguration full = AnchorConfiguration::Full(inst.head);
  for (auto _ : state) benchmark::DoNotOptimize(ev.Accuracy(full));
  state.SetItemsProcessed(state.iterations() *
                          inst.detections->records().size());
}
BENCHMARK(BM_Accuracy)->Arg(50)->Arg(200)->Unit(benchmark::kMillisecond);

void BM_Nms(benchmark::State& state) {
  const SyntheticInstance inst = MakeInstance(6, 1);
  const auto& records = inst.detections->records();
  const MetricSpec spec = MetricSpec::Coco();
  for (auto _ : state) benchmark::DoNotOptimize(Nms(records, spec));
  state.SetItemsProcessed(state.iterations() * records.size());
}
BENCHMARK(BM_Nms);

void BM_GreedySearch(benchmark::State& state) {
  const SyntheticInstance inst = MakeInstance(2, 40);
  const Evaluator ev(inst.detections, MetricSpec::Coco());
  const int threads = static_cast<int>(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(AnchorPruningSearch(ev, SearchParams{}, threads));
  }
}
BENCHMARK(BM_GreedySearch)->Arg(1)->Arg(4)->Unit(benchmark::kMillisecond);

}  // namespace
}  // namespace anchorprune

BENCHMARK_MAIN();
