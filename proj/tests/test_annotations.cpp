#include <doctest.h>

#include "smoky/annotations.hpp"
#include "smoky/errors.hpp"
#include "test_util.hpp"

using namespace smoky;

TEST_CASE("segments expand to inclusive frame labels") {
  std::vector<SegmentAnnotation> segs = {{"v", 2, 4, "s"}, {"v", 7, 7, "s"}};
  const auto labels = expand_segments(segs, 10);
  const std::vector<bool> want = {false, false, true, true, true, false, false, true, false, false};
  CHECK(labels.labels() == want);
  CHECK(labels.positives() == 4);
  CHECK(labels.negatives() == 6);
}

TEST_CASE("segment validation") {
  std::vector<SegmentAnnotation> overlap = {{"v", 2, 5, ""}, {"v", 5, 8, ""}};
  CHECK_THROWS_AS(expand_segments(overlap, 10), ValidationError);
  std::vector<SegmentAnnotation> inverted = {{"v", 5, 2, ""}};
  CHECK_THROWS_AS(expand_segments(inverted, 10), ValidationError);
  std::vector<SegmentAnnotation> past = {{"v", 8, 10, ""}};
  CHECK_THROWS_AS(expand_segments(past, 10), RangeError);
  std::vector<SegmentAnnotation> last = {{"v", 8, 9, ""}};
  CHECK(expand_segments(last, 10).positives() == 2);
}

TEST_CASE("segment file round trip and line-numbered errors") {
  TempDir dir;
  std::vector<VideoAnnotation> recs = {{"a", "s1", 30, {{"a", 1, 4, "s1"}, {"a", 10, 12, "s1"}}},
                                       {"b", "s2", 5, {}}};
  save_segment_annotations(recs, dir / "seg.jsonl");
  CHECK(load_segment_annotations(dir / "seg.jsonl") == recs);

  write_text(dir / "bad.jsonl",
             "{\"video\":\"a\",\"num_frames\":5,\"segments\":[]}\n\n{\"video\":\"b\",\"num_frames\":5,"
             "\"segments\":[[3,1]]}\n");
  try {
    load_segment_annotations(dir / "bad.jsonl");
    FAIL("expected failure");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find(":3:") != std::string::npos);
  }
  write_text(dir / "junk.jsonl", "{not json\n");
  CHECK_THROWS_AS(load_segment_annotations(dir / "junk.jsonl"), ParseError);
  CHECK_THROWS_AS(load_segment_annotations(dir / "missing.jsonl"), IoError);
}

TEST_CASE("box annotation file round trip and bounds") {
  TempDir dir;
  std::vector<ImageAnnotation> recs = {
      {"img0.ppm", 100, 80, {BoundingBox::make(1, 2, 30, 40)}, {Category::smoke}},
      {"img1.ppm", 100, 80, {BoundingBox::make(0, 0, 100, 80), BoundingBox::make(5, 5, 6, 6)},
       {Category::truck, Category::car}}};
  save_box_annotations(recs, dir / "boxes.jsonl");
  CHECK(load_box_annotations(dir / "boxes.jsonl") == recs);

  write_text(dir / "out.jsonl", "{\"image\":\"x\",\"width\":10,\"height\":10,\"boxes\":[[0,0,11,5]]}\n");
  CHECK_THROWS_AS(load_box_annotations(dir / "out.jsonl"), ValidationError);
  write_text(dir / "inv.jsonl", "{\"image\":\"x\",\"width\":10,\"height\":10,\"boxes\":[[5,0,1,5]]}\n");
  CHECK_THROWS_AS(load_box_annotations(dir / "inv.jsonl"), ValidationError);
}

TEST_CASE("detection stream round trip sorts by frame") {
  TempDir dir;
  std::vector<ScoredDetection> dets = {
      {BoundingBox::make(1, 1, 5, 5), 0.5, Category::smoke, 3},
      {BoundingBox::make(2, 2, 6, 6), 0.25, Category::car, 1},
      {BoundingBox::make(3, 3, 7, 9), 1.0, Category::smoke, 3}};
  write_detection_stream(dets, dir / "d.jsonl");
  const auto back = read_detection_stream(dir / "d.jsonl");
  REQUIRE(back.size() == 3);
  CHECK(back[0] == dets[1]);
  CHECK(back[1] == dets[0]);
  CHECK(back[2] == dets[2]);

  std::vector<ScoredDetection> bad = {{BoundingBox::make(1, 1, 5, 5), 1.5, Category::smoke, 0}};
  CHECK_THROWS_AS(write_detection_stream(bad, dir / "e.jsonl"), ValidationError);
  write_text(dir / "neg.jsonl", "{\"frame\":-1,\"category\":\"smoke\",\"score\":0.5,\"box\":[0,0,1,1]}\n");
  CHECK_THROWS_AS(read_detection_stream(dir / "neg.jsonl"), ValidationError);
  write_text(dir / "cat.jsonl", "{\"frame\":1,\"category\":\"boat\",\"score\":0.5,\"box\":[0,0,1,1]}\n");
  CHECK_THROWS_AS(read_detection_stream(dir / "cat.jsonl"), ValidationError);
}
