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

// anchorprune: command-line front end for the anchor-pruning toolkit.

#include <algorithm>
#include <chrono>
#include <ctime>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <iterator>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "anchorprune/anchor_model.h"
#include "anchorprune/digest.h"
#include "anchorprune/errors.h"
#include "anchorprune/eval.h"
#include "anchorprune/ingest.h"
#include "anchorprune/report.h"
#include "anchorprune/search.h"
#include "anchorprune/synthgen.h"

#ifndef ANCHORPRUNE_VERSION
#define ANCHORPRUNE_VERSION "0.0.0"
#endif

namespace anchorprune {
namespace {

namespace fs = std::filesystem;

constexpr int kExitOk = 0;
constexpr int kExitInput = 1;
constexpr int kExitInternal = 2;

std::string ReadFile(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError(path, "cannot open file");
  return std::string(std::istreambuf_iterator<char>(in), {});
}

// Re-raises input errors with the file name prepended to the locus.
template <typename F>
auto WithFile(const std::string& path, F&& parse) {
  try {
    return parse(ReadFile(path));
  } catch (const BindingError& e) {
    throw BindingError(path + ": " + e.locus(), e.message());
  } catch (const InputError& e) {
    if (e.locus() == path) throw;
    throw InputError(path + ": " + e.locus(), e.message());
  }
}

std::string UtcNow() {
  const std::time_t t =
      std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string FormatDouble(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

struct Options {
  std::string head;
  std::string gt;
  std::string dets;
  std::string config = "full";
  std::string metric = "coco";
  std::string resource = "flops";
  std::string mode = "per-anchor";
  double theta = 0.0;
  std::uint64_t seed = 0;
  bool seed_set = false;
  int threads = 1;
  std::string out_dir;

  // Subcommand specific.
  std::string spec;
  std::string frontier;
  std::string baseline;
  std::vector<int> targets;
  std::size_t steps = 0;
  std::vector<int> layers;
  std::string title;
};

MetricSpec ParseMetric(const std::string& name) {
  if (name == "coco") return MetricSpec::Coco();
  if (name == "voc50") return MetricSpec::Voc50();
  throw InputError("--metric", "expected coco or voc50");
}

SearchParams ParseSearchParams(const Options& o) {
  SearchParams p;
  if (o.resource == "flops") {
    p.resource = ResourceMetric::kHeadFlops;
  } else if (o.resource == "bboxes") {
    p.resource = ResourceMetric::kBBoxCount;
  } else {
    throw InputError("--resource", "expected flops or bboxes");
  }
  if (o.mode == "per-anchor") {
    p.mode = NeighborMode::kPerAnchor;
  } else if (o.mode == "shared") {
    p.mode = NeighborMode::kSharedSlotOrLayer;
  } else {
    throw InputError("--mode", "expected per-anchor or shared");
  }
  p.theta = o.theta;
  p.seed = o.seed;
  p.Validate();
  return p;
}

std::shared_ptr<const HeadSpec> LoadHead(const std::string& path) {
  return WithFile(path, [](const std::string& text) {
    return std::make_shared<const HeadSpec>(HeadSpec::FromJson(text));
  });
}

std::shared_ptr<const GroundTruthSet> LoadGroundTruth(const std::string& path) {
  return WithFile(path, [](const std::string& text) {
    return std::make_shared<const GroundTruthSet>(ParseGroundTruth(text));
  });
}

struct Inputs {
  std::shared_ptr<const HeadSpec> head;
  std::shared_ptr<const GroundTruthSet> gt;
  std::shared_ptr<const RawDetectionSet> dets;
};

Inputs LoadAll(const Options& o) {
  Inputs in;
  in.head = LoadHead(o.head);
  in.gt = LoadGroundTruth(o.gt);
  in.dets = WithFile(o.dets, [&](const std::string& text) {
    return std::make_shared<const RawDetectionSet>(
        ParseDetections(text, in.head, in.gt));
  });
  return in;
}

// Collects provenance for one artifact-producing run.
class ManifestWriter {
 public:
  ManifestWriter(std::string command, const Options& o)
      : out_dir_(o.out_dir) {
    manifest_.tool_version = ANCHORPRUNE_VERSION;
    manifest_.command = std::move(command);
    manifest_.started_at = UtcNow();
    fs::create_directories(out_dir_);
  }

  void Input(const std::string& role, const std::string& path) {
    manifest_.inputs.push_back({role, path, Sha256HexOfFile(path)});
  }
  void Param(const std::string& key, const std::string& value) {
    manifest_.params.emplace_back(key, value);
  }
  void Metric(const MetricSpec& spec) {
    Param("metric", std::string(ToString(spec.protocol)));
    std::string thresholds;
    for (double t : spec.iou_thresholds) {
      if (!thresholds.empty()) thresholds += ",";
      thresholds += FormatDouble(t);
    }
    Param("iou_thresholds", thresholds);
    Param("max_detections_per_image",
          std::to_string(spec.max_detections_per_image));
    Param("nms_iou", FormatDouble(spec.nms_iou));
    Param("nms_score_floor", FormatDouble(spec.nms_score_floor));
    Param("pre_nms_top_k", std::to_string(spec.pre_nms_top_k));
  }
  void Search(const SearchParams& p) {
    Param("resource", std::string(ToString(p.resource)));
    Param("mode", std::string(ToString(p.mode)));
    Param("theta", FormatDouble(p.theta));
  }

  // Writes `contents` under the output directory and records it.
  void Output(const std::string& role, const std::string& name,
              const std::string& contents) {
    const fs::path path = fs::path(out_dir_) / name;
    std::ofstream out(path, std::ios::binary);
    out << contents;
    out.close();
    if (!out) throw std::runtime_error("failed to write " + path.string());
    manifest_.outputs.push_back({role, path.string(), Sha256Hex(contents)});
  }

  void Finish() {
    manifest_.finished_at = UtcNow();
    const fs::path path = fs::path(out_dir_) / "manifest.json";
    std::ofstream out(path, std::ios::binary);
    out << manifest_.ToJson();
    if (!out) throw std::runtime_error("failed to write " + path.string());
  }

 private:
  std::string out_dir_;
  RunManifest manifest_;
};

void RecordLoaded(ManifestWriter& m, const Options& o) {
  m.Input("head", o.head);
  m.Input("ground_truth", o.gt);
  m.Input("detections", o.dets);
}

FrontierMetadata Metadata(const HeadSpec& head, const SearchParams& p,
                          const MetricSpec& metric) {
  return {head.Digest(), p.resource, metric.protocol, p.mode, p.theta};
}

// ---------------------------------------------------------------------------
// Subcommands

int RunValidate(const Options& o) {
  const auto head = LoadHead(o.head);
  std::cout << "head: ok (" << head->num_anchors() << " anchors, "
            << head->layers().size() << " layers, digest " << head->Digest()
            << ")\n";
  if (o.gt.empty()) {
    if (!o.dets.empty()) {
      throw InputError("--dets", "validating detections requires --gt");
    }
    return kExitOk;
  }
  const auto gt = LoadGroundTruth(o.gt);
  std::cout << "ground truth: ok (" << gt->images().size() << " images, "
            << gt->categories().size() << " categories, "
            << gt->annotations().size() << " annotations)\n";
  if (o.dets.empty()) return kExitOk;
  const auto dets = WithFile(o.dets, [&](const std::string& text) {
    return ParseDetections(text, head, gt);
  });
  std::cout << "detections: ok (" << dets.records().size() << " records)\n";
  std::cout << SummaryToJson(Summarize(*gt, dets));
  return kExitOk;
}

int RunCost(const Options& o) {
  const auto head = LoadHead(o.head);
  const AnchorConfiguration config = AnchorConfiguration::Parse(head, o.config);
  const std::int64_t flops = HeadFlops(config);
  std::cout << BBoxCount(config) << " boxes\n"
            << flops / 1000000 << "M FLOPs (" << flops << ")\n"
            << config.size() << " of " << head->num_anchors()
            << " anchors kept\n";
  return kExitOk;
}

int RunEval(const Options& o) {
  const Inputs in = LoadAll(o);
  const MetricSpec metric = ParseMetric(o.metric);
  const AnchorConfiguration config = AnchorConfiguration::Parse(in.head, o.config);
  const Evaluator evaluator(in.dets, metric);
  const std::string result = EvalResultToJson(evaluator.Evaluate(config));
  std::cout << result;
  if (!o.out_dir.empty()) {
    ManifestWriter m("eval", o);
    RecordLoaded(m, o);
    m.Metric(metric);
    m.Param("config", config.Encoding());
    m.Output("eval", "eval.json", result);
    m.Finish();
  }
  return kExitOk;
}

void WriteFrontier(ManifestWriter& m, const std::string& stem,
                   const Frontier& frontier, const FrontierMetadata& meta) {
  m.Output("frontier_json", stem + ".json", FrontierToJson(frontier, meta));
  m.Output("frontier_csv", stem + ".csv", FrontierToCsv(frontier));
}

int RunSearch(const Options& o, bool oracle) {
  const Inputs in = LoadAll(o);
  const MetricSpec metric = ParseMetric(o.metric);
  const SearchParams params = ParseSearchParams(o);
  const Evaluator evaluator(in.dets, metric);
  ManifestWriter m(oracle ? "oracle" : "search", o);
  RecordLoaded(m, o);
  m.Metric(metric);
  m.Search(params);
  const FrontierMetadata meta = Metadata(*in.head, params, metric);

  Frontier frontier;
  SearchStats stats;
  try {
    frontier = oracle ? BruteForceFrontier(evaluator, params, o.threads)
                      : AnchorPruningSearch(evaluator, params, o.threads,
                                            &stats);
  } catch (const SearchAborted& e) {
    WriteFrontier(m, "frontier.partial", e.partial(), meta);
    m.Finish();
    throw;
  }
  WriteFrontier(m, oracle ? "oracle_frontier" : "frontier", frontier, meta);
  m.Finish();
  std::cout << frontier.size() << " frontier entries";
  if (!oracle) {
    std::cout << ", " << stats.evaluations << " evaluations, "
              << stats.expansions << " expansions";
  }
  std::cout << "\n";
  return kExitOk;
}

int RunBaselineRandom(const Options& o) {
  const Inputs in = LoadAll(o);
  const MetricSpec metric = ParseMetric(o.metric);
  const SearchParams params = ParseSearchParams(o);
  const Evaluator evaluator(in.dets, metric);
  const auto points = RandomPruneBaseline(evaluator, params, o.steps);
  ManifestWriter m("baseline random", o);
  RecordLoaded(m, o);
  m.Metric(metric);
  m.Search(params);
  m.Param("seed", std::to_string(params.seed));
  m.Param("steps", std::to_string(o.steps));
  const FrontierMetadata meta = Metadata(*in.head, params, metric);
  m.Output("trajectory_json", "random_trajectory.json",
           TrajectoryToJson(points, meta));
  m.Output("trajectory_csv", "random_trajectory.csv", TrajectoryToCsv(points));
  m.Finish();
  std::cout << points.size() << " trajectory points\n";
  return kExitOk;
}

int RunBaselineLayerwise(const Options& o) {
  const Inputs in = LoadAll(o);
  const MetricSpec metric = ParseMetric(o.metric);
  const SearchParams params = ParseSearchParams(o);
  const Evaluator evaluator(in.dets, metric);
  std::vector<int> targets = o.targets;
  if (targets.empty()) {
    std::size_t widest = 0;
    for (const LayerSpec& l : in.head->layers()) {
      widest = std::max(widest, l.anchors.size());
    }
    for (int t = static_cast<int>(widest); t >= 1; --t) targets.push_back(t);
  }
  std::vector<TrajectoryPoint> points;
  for (int t : targets) {
    points.push_back(LayerwisePruneBaseline(evaluator, params, t, o.threads));
  }
  ManifestWriter m("baseline layerwise", o);
  RecordLoaded(m, o);
  m.Metric(metric);
  m.Search(params);
  std::string joined;
  for (int t : targets) joined += (joined.empty() ? "" : ",") + std::to_string(t);
  m.Param("targets", joined);
  const FrontierMetadata meta = Metadata(*in.head, params, metric);
  m.Output("trajectory_json", "layerwise.json", TrajectoryToJson(points, meta));
  m.Output("trajectory_csv", "layerwise.csv", TrajectoryToCsv(points));
  m.Finish();
  std::cout << points.size() << " layer-wise configurations\n";
  return kExitOk;
}

int RunSynth(const Options& o) {
  SynthSpec spec = WithFile(o.spec, [](const std::string& text) {
    return SynthSpec::FromJson(text);
  });
  if (o.seed_set) spec.seed = o.seed;
  const SyntheticInstance inst = Generate(spec, o.threads);
  ManifestWriter m("synth", o);
  m.Input("synth_spec", o.spec);
  m.Param("seed", std::to_string(spec.seed));
  m.Output("head", "head.json", inst.head->ToPrettyJson());
  m.Output("ground_truth", "gt.json", SerializeGroundTruth(*inst.ground_truth));
  m.Output("detections", "dets.jsonl", SerializeDetections(*inst.detections));
  m.Finish();
  std::cout << inst.ground_truth->images().size() << " images, "
            << inst.ground_truth->annotations().size() << " objects, "
            << inst.detections->records().size() << " detections\n";
  return kExitOk;
}

int RunPlotFrontier(const Options& o) {
  const auto head = LoadHead(o.head);
  const ParsedFrontier parsed = WithFile(o.frontier, [&](const std::string& t) {
    return ParseFrontierJson(t, head);
  });
  std::vector<TrajectoryPoint> baseline;
  if (!o.baseline.empty()) {
    baseline = WithFile(o.baseline, [&](const std::string& t) {
      return ParseTrajectoryJson(t, head);
    });
  }
  FrontierPlotOptions options;
  if (!o.title.empty()) options.title = o.title;
  if (parsed.meta.resource == ResourceMetric::kBBoxCount) {
    options.x_label = "bounding boxes";
    options.cost_scale = 1.0;
  }
  options.y_label = parsed.meta.metric == Protocol::kVoc50 ? "AP50" : "mAP";
  options.unpruned_encoding = AnchorConfiguration::Full(head).Encoding();
  ManifestWriter m("plot frontier", o);
  m.Input("head", o.head);
  m.Input("frontier", o.frontier);
  if (!o.baseline.empty()) m.Input("baseline", o.baseline);
  m.Output("svg", "frontier.svg",
           RenderFrontierSvg(parsed.frontier, baseline, options));
  m.Finish();
  return kExitOk;
}

int RunPlotShapes(const Options& o) {
  const Inputs in = LoadAll(o);
  const ShapeDistribution dist = ComputeShapeDistribution(*in.dets);
  ManifestWriter m("plot shapes", o);
  RecordLoaded(m, o);
  std::string joined;
  for (int l : o.layers) joined += (joined.empty() ? "" : ",") + std::to_string(l);
  m.Param("layers", joined.empty() ? "all" : joined);
  m.Output("svg", "shapes.svg", RenderShapeDistributionSvg(dist, o.layers));
  m.Output("histogram_json", "shapes.json", ShapeDistributionToJson(dist));
  m.Finish();
  return kExitOk;
}

int RunOveranchorize(const Options& o) {
  const OverAnchorSpec spec = WithFile(o.spec, [](const std::string& text) {
    return OverAnchorSpec::FromJson(text);
  });
  const HeadSpec head = GenerateOverAnchorized(spec);
  const std::string json = head.ToPrettyJson();
  if (o.out_dir.empty()) {
    std::cout << json;
    return kExitOk;
  }
  ManifestWriter m("overanchorize", o);
  m.Input("overanchor_spec", o.spec);
  m.Output("head", "head.json", json);
  m.Finish();
  const AnchorConfiguration full =
      AnchorConfiguration::Full(std::make_shared<const HeadSpec>(head));
  std::cout << head.num_anchors() << " anchors, " << BBoxCount(full)
            << " boxes, " << HeadFlops(full) / 1000000 << "M FLOPs\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// Argument grammar

void AddHead(CLI::App* app, Options& o) {
  app->add_option("--head", o.head, "HeadSpec JSON")->required();
}

void AddData(CLI::App* app, Options& o) {
  AddHead(app, o);
  app->add_option("--gt", o.gt, "COCO-style ground truth JSON")->required();
  app->add_option("--dets", o.dets, "anchor-dets/v1 JSONL dump")->required();
}

void AddMetric(CLI::App* app, Options& o) {
  app->add_option("--metric", o.metric, "coco or voc50")
      ->check(CLI::IsMember({"coco", "voc50"}));
}

void AddSearch(CLI::App* app, Options& o) {
  AddMetric(app, o);
  app->add_option("--resource", o.resource, "flops or bboxes")
      ->check(CLI::IsMember({"flops", "bboxes"}));
  app->add_option("--mode", o.mode, "per-anchor or shared")
      ->check(CLI::IsMember({"per-anchor", "shared"}));
  app->add_option("--theta", o.theta, "accuracy gate for children");
}

void AddThreads(CLI::App* app, Options& o) {
  app->add_option("--threads", o.threads, "worker threads")
      ->check(CLI::Range(1, 1024));
}

void AddOutDir(CLI::App* app, Options& o, bool required) {
  auto* opt = app->add_option("--out-dir", o.out_dir, "output directory");
  if (required) opt->required();
}

void AddSeed(CLI::App* app, Options& o) {
  app->add_option_function<std::uint64_t>(
      "--seed",
      [&o](std::uint64_t s) {
        o.seed = s;
        o.seed_set = true;
      },
      "random seed");
}

int Main(int argc, char** argv) {
  CLI::App app{"Anchor pruning toolkit for single-shot detection heads"};
  app.set_version_flag("--version", ANCHORPRUNE_VERSION);
  app.require_subcommand(1);
  Options o;

  auto* validate = app.add_subcommand("validate", "check input files");
  AddHead(validate, o);
  validate->add_option("--gt", o.gt, "COCO-style ground truth JSON");
  validate->add_option("--dets", o.dets, "anchor-dets/v1 JSONL dump");

  auto* cost = app.add_subcommand("cost", "box count and head FLOPs");
  AddHead(cost, o);
  cost->add_option("--config", o.config, "full, empty or hex mask");

  auto* eval = app.add_subcommand("eval", "evaluate one configuration");
  AddData(eval, o);
  AddMetric(eval, o);
  eval->add_option("--config", o.config, "full, empty or hex mask");
  AddOutDir(eval, o, false);

  auto* search = app.add_subcommand("search", "greedy Pareto search");
  AddData(search, o);
  AddSearch(search, o);
  AddThreads(search, o);
  AddOutDir(search, o, true);

  auto* oracle = app.add_subcommand("oracle", "exhaustive Pareto frontier");
  AddData(oracle, o);
  AddSearch(oracle, o);
  AddThreads(oracle, o);
  AddOutDir(oracle, o, true);

  auto* baseline = app.add_subcommand("baseline", "pruning baselines");
  baseline->require_subcommand(1);
  auto* random = baseline->add_subcommand("random", "random pruning trajectory");
  AddData(random, o);
  AddSearch(random, o);
  AddSeed(random, o);
  AddThreads(random, o);
  random->add_option("--steps", o.steps, "removal steps (0: until empty)");
  AddOutDir(random, o, true);
  auto* layerwise =
      baseline->add_subcommand("layerwise", "per-layer greedy pruning");
  AddData(layerwise, o);
  AddSearch(layerwise, o);
  AddThreads(layerwise, o);
  layerwise->add_option("--target", o.targets,
                        "anchors kept per layer (repeatable)");
  AddOutDir(layerwise, o, true);

  auto* synth = app.add_subcommand("synth", "generate a synthetic instance");
  synth->add_option("--spec", o.spec, "synthetic instance JSON")->required();
  AddSeed(synth, o);
  AddThreads(synth, o);
  AddOutDir(synth, o, true);

  auto* plot = app.add_subcommand("plot", "render SVG figures");
  plot->require_subcommand(1);
  auto* plot_frontier = plot->add_subcommand("frontier", "frontier staircase");
  AddHead(plot_frontier, o);
  plot_frontier->add_option("--frontier", o.frontier, "frontier JSON")
      ->required();
  plot_frontier->add_option("--baseline", o.baseline, "trajectory JSON");
  plot_frontier->add_option("--title", o.title, "plot title");
  AddOutDir(plot_frontier, o, true);
  auto* plot_shapes = plot->add_subcommand("shapes", "per-anchor box shapes");
  AddData(plot_shapes, o);
  plot_shapes->add_option("--layer", o.layers, "layers to draw (repeatable)");
  AddOutDir(plot_shapes, o, true);

  auto* overanchorize =
      app.add_subcommand("overanchorize", "emit a dense HeadSpec");
  overanchorize->add_option("--spec", o.spec, "scales and ratios JSON")
      ->required();
  AddOutDir(overanchorize, o, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitInput;
  }

  try {
    if (*validate) return RunValidate(o);
    if (*cost) return RunCost(o);
    if (*eval) return RunEval(o);
    if (*search) return RunSearch(o, false);
    if (*oracle) return RunSearch(o, true);
    if (*random) return RunBaselineRandom(o);
    if (*layerwise) return RunBaselineLayerwise(o);
    if (*synth) return RunSynth(o);
    if (*plot_frontier) return RunPlotFrontier(o);
    if (*plot_shapes) return RunPlotShapes(o);
    if (*overanchorize) return RunOveranchorize(o);
  } catch (const SearchAborted& e) {
    std::cerr << "error: search aborted: " << e.what() << "\n";
    return e.input_error() ? kExitInput : kExitInternal;
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }
  return kExitInternal;
}

}  // namespace
}  // namespace anchorprune

int main(int argc, char** argv) { return anchorprune::Main(argc, argv); }
