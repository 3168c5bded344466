#include <doctest.h>

#include <random>

#include "oracles.hpp"
#include "smoky/errors.hpp"
#include "smoky/fixture.hpp"
#include "smoky/temporal.hpp"
#include "test_util.hpp"

using namespace smoky;

namespace {

// Frame i is a flat image whose red channel encodes i.
Image coded_frame(int i, int w = 200, int h = 150) {
  return Image(w, h, Rgb{static_cast<std::uint8_t>(10 * i), 50, 90});
}

}  // namespace

TEST_CASE("square extension examples") {
  auto sq = extend_to_square(BoundingBox::make(100, 100, 150, 140), 640, 360);
  CHECK(sq == BoundingBox::make(69, 64, 181, 176));
  sq = extend_to_square(BoundingBox::make(0, 0, 200, 100), 640, 360);
  CHECK(sq == BoundingBox::make(0, 0, 200, 200));
  const auto fixed = extend_to_square(sq, 640, 360);
  CHECK(fixed == sq);
  sq = extend_to_square(BoundingBox::make(600, 340, 630, 355), 640, 360);
  CHECK(sq == BoundingBox::make(528, 248, 640, 360));
}

TEST_CASE("square extension on a frame smaller than the side is flagged") {
  const auto r = extend_to_square_region(BoundingBox::make(10, 10, 50, 50), 160, 90);
  CHECK(r.clipped);
  CHECK(r.box.width() == doctest::Approx(90));
  CHECK(r.box.height() == doctest::Approx(90));
  CHECK(r.box.inside(160, 90));
  CHECK_THROWS_AS(extend_to_square(BoundingBox::make(600, 10, 700, 50), 640, 360), ValidationError);
}

TEST_CASE("square extension agrees with the case-analysis oracle") {
  std::mt19937 rng(21);
  std::uniform_real_distribution<double> u(0, 1);
  for (int i = 0; i < 2000; ++i) {
    const double w = 10 + u(rng) * 300, h = 10 + u(rng) * 200;
    const double x = u(rng) * (640 - w), y = u(rng) * (360 - h);
    const auto box = BoundingBox::make(x, y, x + w, y + h);
    const auto got = extend_to_square(box, 640, 360);
    const auto want = oracle::square_region(x, y, x + w, y + h, 640, 360, 112);
    CHECK(got.x1() == doctest::Approx(want.x1));
    CHECK(got.y1() == doctest::Approx(want.y1));
    CHECK(got.x2() == doctest::Approx(want.x2));
    CHECK(got.y2() == doctest::Approx(want.y2));
    CHECK(got.width() == doctest::Approx(got.height()));
    CHECK(got.width() >= std::max({w, h, 112.0}) - 1e-9);
    if (got.width() <= 360) {
      CHECK(got.x1() <= x + 1e-9);
      CHECK(got.y1() <= y + 1e-9);
      CHECK(got.x2() >= x + w - 1e-9);
      CHECK(got.y2() >= y + h - 1e-9);
    }
  }
}

TEST_CASE("frame buffer evicts the oldest frame") {
  FrameBuffer buf(3);
  for (int i = 0; i < 5; ++i) buf.push(i, coded_frame(i));
  CHECK(buf.oldest() == 2);
  CHECK(buf.newest() == 4);
  CHECK(buf.find(1) == nullptr);
  CHECK(buf.find(3) != nullptr);
  CHECK_THROWS_AS(buf.push(4, coded_frame(4)), ValidationError);
}

TEST_CASE("clip windows end at t and pad at the video start") {
  FrameBuffer buf(3);
  const auto box = BoundingBox::make(20, 20, 60, 60);
  ClipConfig cfg;
  buf.push(0, coded_frame(0));
  auto clip = extract_clip(buf, "v", 0, box, cfg, 16);
  CHECK(clip.frames == std::vector<int>{0, 0, 0});
  CHECK(clip.padded);
  for (int i = 1; i <= 10; ++i) buf.push(i, coded_frame(i));
  clip = extract_clip(buf, "v", 10, box, cfg, 16);
  CHECK(clip.frames == std::vector<int>{8, 9, 10});
  CHECK_FALSE(clip.padded);
  REQUIRE(clip.k() == 3);
  CHECK(clip.patch_size() == 16);
  CHECK(clip.patches[0].pixel(3, 3)[0] == 80);
  CHECK(clip.patches[2].pixel(3, 3)[0] == 100);
  CHECK_THROWS_AS(extract_clip(buf, "v", 11, box, cfg, 16), ValidationError);
}

TEST_CASE("clip from a video matches the buffered path") {
  FixtureScript s;
  s.num_frames = 6;
  s.width = 200;
  s.height = 150;
  s.events.push_back({});
  s.events[0].start_frame = 0;
  s.events[0].end_frame = 5;
  s.events[0].x = 60;
  s.events[0].y = 90;
  const FixtureVideo video(s, 1);
  FrameBuffer buf(3);
  for (int i = 0; i <= 4; ++i) buf.push(i, video.frame(i));
  const auto box = BoundingBox::make(60, 90, 100, 130);
  ClipConfig cfg;
  const auto a = extract_clip(buf, video.id(), 4, box, cfg, 32);
  const auto b = extract_clip(video, 4, box, cfg, 32);
  CHECK(a.frames == b.frames);
  CHECK(a.region == b.region);
  for (int i = 0; i < 3; ++i) CHECK(a.patches[i] == b.patches[i]);
}

TEST_CASE("clip dataset round trip") {
  TempDir dir;
  FrameBuffer buf(3);
  for (int i = 0; i < 3; ++i) buf.push(i, coded_frame(i));
  auto c = extract_clip(buf, "v", 2, BoundingBox::make(20, 20, 60, 60), {}, 16);
  c.label = ClipLabel::smoke;
  auto d = extract_clip(buf, "v", 1, BoundingBox::make(30, 20, 60, 50), {}, 16);
  write_clip_dataset({c, d}, dir.path());
  const auto back = read_clip_dataset(dir.path());
  REQUIRE(back.size() == 2);
  CHECK(back[0].label == ClipLabel::smoke);
  CHECK_FALSE(back[1].label.has_value());
  CHECK(back[0].frames == c.frames);
  CHECK(back[1].padded == d.padded);
  CHECK(back[0].region == c.region);
  for (int i = 0; i < 3; ++i) CHECK(back[0].patches[i] == c.patches[i]);
}

TEST_CASE("clip config validation") {
  ClipConfig c;
  c.k = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = {};
  c.train_crop = 200;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  CHECK(ClipConfig::large().train_crop == 224);
  CHECK(parse_clip_label("smoke") == ClipLabel::smoke);
  CHECK_THROWS_AS(parse_clip_label("fire"), ValidationError);
}
