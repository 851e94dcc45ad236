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

#include <memory>
#include <string>

#include "anchorprune/errors.h"
#include "gtest/gtest.h"
#include "testing/test_util.h"

namespace anchorprune {
namespace {

using ::anchorprune::testing::Ann;
using ::anchorprune::testing::Det;
using ::anchorprune::testing::MakeDets;
using ::anchorprune::testing::MakeGt;
using ::anchorprune::testing::MakeHead;

constexpr char kCocoStyle[] = R"({
  "info": {"year": 2017},
  "licenses": [],
  "images": [{"id": 7, "width": 640, "height": 480, "file_name": "a.jpg"},
             {"id": 3, "width": 300, "height": 300}],
  "categories": [{"id": 1, "name": "person", "supercategory": "x"},
                 {"id": 5, "name": "dog"}],
  "annotations": [
    {"id": 10, "image_id": 7, "category_id": 1, "bbox": [1, 2, 10, 20],
     "area": 150.5, "iscrowd": 0, "segmentation": [[0, 0, 1, 1]]},
    {"id": 11, "image_id": 3, "category_id": 5, "bbox": [0, 0, 4, 4],
     "iscrowd": true},
    {"id": 12, "image_id": 3, "category_id": 5, "bbox": [5, 5, 2, 3]}
  ]
})";

std::string ExpectInputError(const auto& fn) {
  try {
    fn();
  } catch (const InputError& e) {
    return e.locus();
  }
  ADD_FAILURE() << "expected InputError";
  return "";
}

TEST(GroundTruthTest, ParsesCocoAndIgnoresExtraKeys) {
  const GroundTruthSet gt = ParseGroundTruth(kCocoStyle);
  ASSERT_EQ(gt.images().size(), 2u);
  EXPECT_EQ(gt.images()[0], (ImageInfo{7, 640, 480}));
  EXPECT_EQ(gt.categories()[1].name, "dog");
  ASSERT_EQ(gt.annotations().size(), 3u);
  EXPECT_DOUBLE_EQ(gt.annotations()[0].area, 150.5);
  EXPECT_FALSE(gt.annotations()[0].iscrowd);
  EXPECT_TRUE(gt.annotations()[1].iscrowd);
  EXPECT_DOUBLE_EQ(gt.annotations()[2].area, 6.0);
  EXPECT_EQ(gt.ImagePosition(3), 1u);
  EXPECT_TRUE(gt.HasCategory(5));
  EXPECT_FALSE(gt.HasCategory(2));
}

TEST(GroundTruthTest, SerializeRoundTrip) {
  const GroundTruthSet gt = ParseGroundTruth(kCocoStyle);
  const std::string text = SerializeGroundTruth(gt);
  EXPECT_EQ(ParseGroundTruth(text), gt);
  EXPECT_EQ(SerializeGroundTruth(ParseGroundTruth(text)), text);
}

TEST(GroundTruthTest, ErrorsNameTheRecord) {
  EXPECT_EQ(ExpectInputError([] {
              ParseGroundTruth(
                  R"({"images":[{"id":1,"width":1,"height":1}],)"
                  R"("categories":[{"id":1}],"annotations":[)"
                  R"({"id":1,"image_id":2,"category_id":1,"bbox":[0,0,1,1]}]})");
            }),
            "annotations[0] (id 1)");
  EXPECT_EQ(ExpectInputError([] {
              ParseGroundTruth(
                  R"({"images":[{"id":1,"width":1,"height":1},)"
                  R"({"id":1,"width":1,"height":1}],"categories":[],)"
                  R"("annotations":[]})");
            }),
            "images[1]");
  EXPECT_EQ(ExpectInputError([] {
              ParseGroundTruth(
                  R"({"images":[],"categories":[{"id":1}],"annotations":[)"
                  R"({"id":1,"image_id":1,"category_id":1,"bbox":[0,0,1]}]})");
            }),
            "annotations[0].bbox");
  EXPECT_THROW(ParseGroundTruth("[1,2"), InputError);
  EXPECT_THROW(ParseGroundTruth(R"({"images":[]})"), InputError);
}

class DetectionsTest : public ::testing::Test {
 protected:
  std::shared_ptr<const HeadSpec> head_ = MakeHead({4, 2}, {2, 1});
  std::shared_ptr<const GroundTruthSet> gt_ =
      MakeGt(2, 2, {Ann(1, 1, 1, {0, 0, 10, 10})});

  std::string Header() const {
    return R"({"format":"anchor-dets/v1","head_spec_digest":")" +
           head_->Digest() + R"(","score_floor":0.01})" + "\n";
  }
};

TEST_F(DetectionsTest, ParsesAndRoundTrips) {
  const std::string text =
      Header() +
      R"({"image_id":1,"layer":1,"slot":0,"category_id":2,"score":0.5,"bbox":[1,2,3,4]})"
      "\n\n"
      R"({"image_id":2,"layer":0,"slot":1,"category_id":1,"score":0.25,"bbox":[0,0,1,1]})"
      "\r\n";
  const RawDetectionSet dets = ParseDetections(text, head_, gt_);
  ASSERT_EQ(dets.records().size(), 2u);
  EXPECT_EQ(dets.records()[0],
            Det(1, {1, 0}, 2, 0.5, Box{1, 2, 3, 4}));
  EXPECT_EQ(dets.anchor_index(0), 2u);
  EXPECT_EQ(dets.anchor_index(1), 1u);
  EXPECT_DOUBLE_EQ(dets.header().score_floor, 0.01);
  const std::string again = SerializeDetections(dets);
  EXPECT_EQ(ParseDetections(again, head_, gt_), dets);
  EXPECT_EQ(SerializeDetections(ParseDetections(again, head_, gt_)), again);
}

TEST_F(DetectionsTest, HeaderOnlyIsAnEmptyDump) {
  EXPECT_TRUE(ParseDetections(Header(), head_, gt_).records().empty());
}

TEST_F(DetectionsTest, RejectsBadHeaders) {
  EXPECT_EQ(ExpectInputError([&] { ParseDetections("", head_, gt_); }),
            "line 1");
  EXPECT_EQ(ExpectInputError([&] {
              ParseDetections("\xEF\xBB\xBF" + Header(), head_, gt_);
            }),
            "line 1");
  const auto other = MakeHead({4, 2}, {2, 2});
  EXPECT_THROW(ParseDetections(Header(), other, gt_), BindingError);
  EXPECT_THROW(
      ParseDetections(R"({"format":"v0","head_spec_digest":"x","score_floor":0})",
                      head_, gt_),
      InputError);
}

TEST_F(DetectionsTest, RecordErrorsCarryLineNumbers) {
  auto record = [&](const std::string& body) {
    return Header() + "\n" + body + "\n";
  };
  const auto bad_anchor = record(
      R"({"image_id":1,"layer":1,"slot":3,"category_id":1,"score":0.5,"bbox":[0,0,1,1]})");
  EXPECT_THROW(ParseDetections(bad_anchor, head_, gt_), BindingError);
  EXPECT_EQ(ExpectInputError(
                [&] { ParseDetections(bad_anchor, head_, gt_); }),
            "line 3");
  EXPECT_THROW(
      ParseDetections(
          record(R"({"image_id":9,"layer":0,"slot":0,"category_id":1,"score":0.5,"bbox":[0,0,1,1]})"),
          head_, gt_),
      BindingError);
  EXPECT_THROW(
      ParseDetections(
          record(R"({"image_id":1,"layer":0,"slot":0,"category_id":3,"score":0.5,"bbox":[0,0,1,1]})"),
          head_, gt_),
      BindingError);
  // Below the header's floor.
  EXPECT_THROW(
      ParseDetections(
          record(R"({"image_id":1,"layer":0,"slot":0,"category_id":1,"score":0.001,"bbox":[0,0,1,1]})"),
          head_, gt_),
      InputError);
  EXPECT_THROW(
      ParseDetections(
          record(R"({"image_id":1,"layer":0,"slot":0,"category_id":1,"score":1.5,"bbox":[0,0,1,1]})"),
          head_, gt_),
      InputError);
  EXPECT_THROW(
      ParseDetections(
          record(R"({"image_id":1,"layer":0,"slot":0,"category_id":1,"score":0.5,"bbox":[0,0,-1,1]})"),
          head_, gt_),
      InputError);
  EXPECT_THROW(
      ParseDetections(
          record(R"({"image_id":1,"layer":0,"slot":0,"category_id":1,"score":0.5,"bbox":[0,0,1,1],"extra":1})"),
          head_, gt_),
      InputError);
  EXPECT_EQ(ExpectInputError([&] {
              ParseDetections(record("{not json"), head_, gt_);
            }),
            "line 3");
}

TEST_F(DetectionsTest, ConstructorValidatesRecords) {
  EXPECT_THROW(MakeDets(head_, gt_, {Det(1, {5, 0}, 1, 0.5, {0, 0, 1, 1})}),
               BindingError);
  EXPECT_NO_THROW(MakeDets(head_, gt_, {Det(1, {0, 0}, 1, 0.5, {0, 0, 1, 1})}));
}

TEST(SizeBucketTest, HalfOpenBoundaries) {
  EXPECT_EQ(SizeBucketOf(0), SizeBucket::kSmall);
  EXPECT_EQ(SizeBucketOf(1023.999), SizeBucket::kSmall);
  EXPECT_EQ(SizeBucketOf(1024), SizeBucket::kMedium);
  EXPECT_EQ(SizeBucketOf(9215.999), SizeBucket::kMedium);
  EXPECT_EQ(SizeBucketOf(9216), SizeBucket::kLarge);
  EXPECT_EQ(ToString(SizeBucket::kMedium), "medium");
}

TEST(SummaryTest, CountsPerAnchorClassAndBucket) {
  auto head = MakeHead({4, 2}, {2, 1});
  auto gt = MakeGt(2, 2,
                   {Ann(1, 1, 1, {0, 0, 10, 10}), Ann(2, 1, 2, {0, 0, 40, 40}),
                    Ann(3, 2, 2, {0, 0, 100, 100})});
  auto dets = MakeDets(head, gt,
                       {Det(1, {0, 0}, 1, 0.5, {0, 0, 1, 1}),
                        Det(1, {1, 0}, 1, 0.5, {0, 0, 1, 1}),
                        Det(2, {1, 0}, 2, 0.5, {0, 0, 1, 1})});
  const DatasetSummary s = Summarize(*gt, *dets);
  EXPECT_EQ(s.num_images, 2u);
  EXPECT_EQ(s.num_annotations, 3u);
  EXPECT_EQ(s.num_records, 3u);
  ASSERT_EQ(s.records_per_anchor.size(), 3u);
  EXPECT_EQ(s.records_per_anchor[1].first, (AnchorId{0, 1}));
  EXPECT_EQ(s.records_per_anchor[1].second, 0u);
  EXPECT_EQ(s.records_per_anchor[2].second, 2u);
  EXPECT_EQ(s.annotations_per_class.at(2), 2u);
  EXPECT_EQ(s.annotations_per_bucket.at(SizeBucket::kSmall), 1u);
  EXPECT_EQ(s.annotations_per_bucket.at(SizeBucket::kMedium), 1u);
  EXPECT_EQ(s.annotations_per_bucket.at(SizeBucket::kLarge), 1u);
  EXPECT_NE(SummaryToJson(s).find("\"records_per_anchor\""), std::string::npos);
}

}  // namespace
}  // namespace anchorprune
