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

#include "anchorprune/report.h"

#include <memory>
#include <string>
#include <vector>

#include "anchorprune/errors.h"
#include "gtest/gtest.h"
#include "testing/test_util.h"

namespace anchorprune {
namespace {

using ::anchorprune::testing::MakeHead;
using ::anchorprune::testing::MakeRandomDets;

std::size_t Count(const std::string& haystack, const std::string& needle) {
  std::size_t n = 0;
  for (std::size_t pos = haystack.find(needle); pos != std::string::npos;
       pos = haystack.find(needle, pos + needle.size())) {
    ++n;
  }
  return n;
}

class ReportTest : public ::testing::Test {
 protected:
  void SetUp() override {
    head_ = MakeHead({8, 4}, {3, 2});
    dets_ = MakeRandomDets(head_, 5, 6);
    evaluator_ = std::make_unique<Evaluator>(dets_, MetricSpec::Coco());
    frontier_ = AnchorPruningSearch(*evaluator_, params_);
    meta_ = {head_->Digest(), params_.resource, Protocol::kCocoStyle,
             params_.mode, params_.theta};
  }

  std::shared_ptr<const HeadSpec> head_;
  std::shared_ptr<const RawDetectionSet> dets_;
  std::unique_ptr<Evaluator> evaluator_;
  SearchParams params_;
  Frontier frontier_;
  FrontierMetadata meta_;
};

TEST_F(ReportTest, FrontierJsonRoundTrip) {
  ASSERT_GT(frontier_.size(), 2u);
  const std::string json = FrontierToJson(frontier_, meta_);
  const ParsedFrontier parsed = ParseFrontierJson(json, head_);
  EXPECT_EQ(parsed.frontier, frontier_);
  EXPECT_EQ(parsed.meta, meta_);
  EXPECT_EQ(FrontierToJson(parsed.frontier, parsed.meta), json);
}

TEST_F(ReportTest, EmptyFrontierKeepsTheHeader) {
  const std::string json = FrontierToJson(Frontier(), meta_);
  EXPECT_NE(json.find("\"entries\": []"), std::string::npos) << json;
  EXPECT_NE(json.find("\"format\": \"anchor-frontier/v1\""), std::string::npos);
  EXPECT_NE(json.find(head_->Digest()), std::string::npos);
  EXPECT_TRUE(ParseFrontierJson(json, head_).frontier.empty());
}

TEST_F(ReportTest, FieldOrderIsStable) {
  const std::string json = FrontierToJson(frontier_, meta_);
  const std::vector<std::string> keys = {
      "\"format\"", "\"head_spec_digest\"", "\"resource\"", "\"metric\"",
      "\"mode\"",   "\"theta\"",            "\"entries\""};
  std::size_t last = 0;
  for (const std::string& k : keys) {
    const std::size_t pos = json.find(k);
    ASSERT_NE(pos, std::string::npos) << k;
    EXPECT_GT(pos, last) << k;
    last = pos;
  }
}

TEST_F(ReportTest, CsvHasOneRowPerEntry) {
  const std::string csv = FrontierToCsv(frontier_);
  EXPECT_EQ(Count(csv, "\n"), frontier_.size() + 1);
  EXPECT_EQ(csv.rfind("encoding,accuracy,cost\n", 0), 0u);
  EXPECT_EQ(FrontierToCsv(Frontier()), "encoding,accuracy,cost\n");
  const FrontierEntry& first = frontier_.entries()[0];
  EXPECT_NE(csv.find(first.config.Encoding() + ","), std::string::npos);
}

TEST_F(ReportTest, ParseRejectsInconsistentFiles) {
  const std::string json = FrontierToJson(frontier_, meta_);
  EXPECT_THROW(ParseFrontierJson(json, MakeHead({8, 4}, {3, 3})),
               BindingError);
  auto replace = [&](const std::string& from, const std::string& to) {
    std::string copy = json;
    const auto pos = copy.find(from);
    EXPECT_NE(pos, std::string::npos) << from;
    copy.replace(pos, from.size(), to);
    return copy;
  };
  const FrontierEntry& last = frontier_.entries().back();
  EXPECT_THROW(ParseFrontierJson(replace("\"cost\": " + std::to_string(last.cost),
                                         "\"cost\": 1"),
                                 head_),
               InputError);
  EXPECT_THROW(ParseFrontierJson(replace("anchor-frontier/v1", "x"), head_),
               InputError);
  EXPECT_THROW(ParseFrontierJson(replace("\"flops\"", "\"watts\""), head_),
               InputError);
  EXPECT_THROW(ParseFrontierJson("{", head_), InputError);
  // Two entries where one dominates the other.
  Frontier bogus_source;
  bogus_source.Insert(frontier_.entries()[0]);
  std::string twice = FrontierToJson(bogus_source, meta_);
  const auto start = twice.find("    {");
  const auto end = twice.rfind("}\n  ]");
  const std::string entry = twice.substr(start, end + 1 - start);
  twice.insert(end + 1, ",\n" + entry);
  EXPECT_THROW(ParseFrontierJson(twice, head_), InputError);
}

TEST_F(ReportTest, TrajectoryRoundTrip) {
  params_.seed = 3;
  const auto points = RandomPruneBaseline(*evaluator_, params_);
  const std::string json = TrajectoryToJson(points, meta_);
  EXPECT_EQ(ParseTrajectoryJson(json, head_), points);
  EXPECT_EQ(Count(TrajectoryToCsv(points), "\n"), points.size() + 1);
  EXPECT_THROW(ParseTrajectoryJson(FrontierToJson(frontier_, meta_), head_),
               InputError);
}

TEST_F(ReportTest, FrontierSvgStructure) {
  Frontier two;
  two.Insert(frontier_.entries()[0]);
  two.Insert(frontier_.entries().back());
  ASSERT_EQ(two.size(), 2u);
  const std::string svg = RenderFrontierSvg(two, {});
  EXPECT_EQ(Count(svg, "class=\"frontier-marker\""), 2u);
  EXPECT_EQ(Count(svg, "class=\"frontier-staircase\""), 1u);
  const auto path_start = svg.find("class=\"frontier-staircase\" d=\"");
  const auto path_end = svg.find('"', path_start + 31);
  const std::string d = svg.substr(path_start + 31, path_end - path_start - 31);
  EXPECT_EQ(Count(d, "H"), 2u) << d;
  EXPECT_EQ(Count(d, "V"), 1u) << d;
  EXPECT_EQ(Count(svg, "baseline-marker"), 0u);
  EXPECT_EQ(svg.rfind("<svg", 0), 0u);
  EXPECT_NE(svg.find("</svg>"), std::string::npos);
}

TEST_F(ReportTest, FrontierSvgBaselineAndHighlight) {
  params_.seed = 1;
  const auto points = RandomPruneBaseline(*evaluator_, params_);
  FrontierPlotOptions options;
  options.title = "a < b & c";
  options.unpruned_encoding =
      AnchorConfiguration::Full(head_).Encoding();
  Frontier with_full;
  const auto full = AnchorConfiguration::Full(head_);
  with_full.Insert({full, evaluator_->Accuracy(full), HeadFlops(full), {}});
  const std::string svg = RenderFrontierSvg(with_full, points, options);
  EXPECT_EQ(Count(svg, "class=\"baseline-marker\""), points.size());
  EXPECT_EQ(Count(svg, "class=\"unpruned-highlight\""), 1u);
  EXPECT_NE(svg.find("a &lt; b &amp; c"), std::string::npos);
  EXPECT_EQ(RenderFrontierSvg(with_full, points, options), svg);
  EXPECT_NE(RenderFrontierSvg(Frontier(), {}).find("</svg>"),
            std::string::npos);
}

TEST_F(ReportTest, ShapeSvgFiltersLayers) {
  const ShapeDistribution dist = ComputeShapeDistribution(*dets_);
  const std::string all = RenderShapeDistributionSvg(dist);
  EXPECT_EQ(Count(all, "class=\"anchor\""), head_->num_anchors());
  EXPECT_EQ(Count(all, "class=\"default-shape\""), head_->num_anchors());
  const std::string one = RenderShapeDistributionSvg(dist, {1});
  EXPECT_EQ(Count(one, "class=\"anchor\""), 2u);
  EXPECT_EQ(Count(one, "data-layer=\"0\""), 0u);
}

TEST(ManifestTest, JsonLayout) {
  RunManifest m;
  m.tool_version = "1.2.3";
  m.command = "search";
  m.inputs = {{"head", "h.json", "abc"}};
  m.outputs = {{"frontier_json", "out/frontier.json", "def"}};
  m.params = {{"theta", "0"}, {"mode", "per-anchor"}};
  m.started_at = "2026-01-01T00:00:00Z";
  m.finished_at = "2026-01-01T00:00:01Z";
  const std::string json = m.ToJson();
  EXPECT_NE(json.find("\"version\": \"1.2.3\""), std::string::npos);
  EXPECT_NE(json.find("\"sha256\": \"abc\""), std::string::npos);
  EXPECT_LT(json.find("\"theta\""), json.find("\"mode\""));
  EXPECT_LT(json.find("\"inputs\""), json.find("\"outputs\""));
}

}  // namespace
}  // namespace anchorprune
