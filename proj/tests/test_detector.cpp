#include <doctest.h>

#include "smoky/detector.hpp"
#include "smoky/errors.hpp"
#include "smoky/fixture.hpp"
#include "test_util.hpp"

using namespace smoky;

namespace {

class ListDetector final : public DetectorHandle {
 public:
  explicit ListDetector(std::vector<ScoredDetection> d) : d_(std::move(d)) {}
  std::string name() const override { return "list"; }
  std::vector<ScoredDetection> propose(const Image&, int frame) override {
    auto out = d_;
    for (auto& x : out) x.frame_index = frame;
    return out;
  }

 private:
  std::vector<ScoredDetection> d_;
};

ScoredDetection det(double x1, double y1, double x2, double y2, double s,
                    Category c = Category::smoke) {
  return {BoundingBox::make(x1, y1, x2, y2), s, c, 0};
}

FixtureScript scene() {
  FixtureScript s;
  s.num_frames = 10;
  PlantedEvent smoke;
  smoke.start_frame = 2;
  smoke.end_frame = 6;
  smoke.x = 100;
  smoke.y = 150;
  PlantedEvent decoy;
  decoy.kind = EventKind::shadow_decoy;
  decoy.start_frame = 0;
  decoy.end_frame = 9;
  decoy.x = 400;
  decoy.y = 200;
  decoy.height = 20;
  s.events = {smoke, decoy};
  return s;
}

}  // namespace

TEST_CASE("nms keeps the best of overlapping duplicates per category") {
  const auto kept = non_max_suppression(
      {det(0, 0, 10, 10, 0.5), det(1, 0, 11, 10, 0.9), det(50, 50, 60, 60, 0.3),
       det(0, 0, 10, 10, 0.8, Category::car)},
      0.45);
  REQUIRE(kept.size() == 3);
  CHECK(kept[0].score == 0.9);
  CHECK(kept[1].category == Category::car);
  CHECK(kept[2].score == 0.3);
}

TEST_CASE("run_detector thresholds, clips and rejects bad input") {
  ListDetector d({det(-5, 10, 30, 40, 0.4), det(100, 10, 130, 40, 0.1)});
  const Image frame(64, 48);
  auto out = run_detector(d, frame, 3, 0.2);
  REQUIRE(out.size() == 1);
  CHECK(out[0].box == BoundingBox::make(0, 10, 30, 40));
  CHECK(out[0].frame_index == 3);
  CHECK(run_detector(d, frame, 3, 1.1).empty());
  CHECK(run_detector(d, frame, 3, 0.0).size() == 1);   // second box lies outside the frame
  CHECK_THROWS_AS(run_detector(d, frame, 3, -0.1), RangeError);
  CHECK(d.invocations() == 3);
  CHECK_THROWS_AS(d.set_nms_iou(1.5), ConfigError);
}

TEST_CASE("oracle roles") {
  const FixtureVideo video(scene(), 1);
  OracleDetector smoke(video.truth(), DetectorRole::smoke);
  OracleDetector vehicle(video.truth(), DetectorRole::vehicle);
  const Image frame = video.frame(3);
  const auto s = run_detector(smoke, frame, 3, 0.2);
  const auto v = run_detector(vehicle, frame, 3, 0.25);
  CHECK(s.size() == 2);   // smoke blob and shadow decoy
  CHECK(v.size() == 2);
  for (const auto& x : s) CHECK(x.category == Category::smoke);
  for (const auto& x : v) CHECK(is_vehicle(x.category));
  CHECK(run_detector(smoke, video.frame(8), 8, 0.2).size() == 1);
  CHECK_THROWS_AS(run_detector(smoke, video.frame(8), 10, 0.2), RangeError);
}

TEST_CASE("noisy detector is seeded and favours smoke over decoys") {
  FixtureScript s = scene();
  s.num_frames = 200;
  s.events[0].end_frame = 199;
  s.events[0].vx = 0;
  s.events[1].end_frame = 199;
  const FixtureVideo video(s, 1);
  NoisyDetector a(video.truth(), 5), b(video.truth(), 5);
  const Image frame(video.width(), video.height());
  double smoke_sum = 0, decoy_sum = 0;
  for (int i = 0; i < 200; ++i) {
    const auto pa = a.propose(frame, i);
    const auto pb = b.propose(frame, i);
    CHECK(pa == pb);
    for (const auto& d : pa) (d.box.center().x < 300 ? smoke_sum : decoy_sum) += d.score;
  }
  CHECK(smoke_sum > decoy_sum);
}

TEST_CASE("stream detector replays one role") {
  TempDir dir;
  std::vector<ScoredDetection> recs = {{BoundingBox::make(1, 1, 9, 9), 0.7, Category::smoke, 2},
                                       {BoundingBox::make(1, 1, 9, 9), 0.6, Category::bus, 2}};
  write_detection_stream(recs, dir / "d.jsonl");
  StreamDetector s(dir / "d.jsonl", DetectorRole::smoke);
  StreamDetector v(dir / "d.jsonl", DetectorRole::vehicle);
  const Image frame(20, 20);
  CHECK(s.propose(frame, 2).size() == 1);
  CHECK(v.propose(frame, 2).front().category == Category::bus);
  CHECK(s.propose(frame, 3).empty());
}

TEST_CASE("network detector runs on frames of its input size") {
  TinyOptions o;
  YoloDetector d(DetectorNetwork(build_yolov5tiny(o), 3), 64, 64, {{0, Category::smoke}});
  CHECK_NOTHROW(run_detector(d, Image(64, 64), 0, 0.5));
  CHECK_THROWS_AS(run_detector(d, Image(64, 32), 0, 0.5), ShapeError);
  CHECK_THROWS_AS(YoloDetector(DetectorNetwork(build_yolov5tiny(o), 3), 60, 64, {}), ConfigError);
}
