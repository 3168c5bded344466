#include <doctest.h>

#include "smoky/errors.hpp"
#include "smoky/fixture.hpp"
#include "smoky/json_util.hpp"
#include "test_util.hpp"

using namespace smoky;

TEST_CASE("fixture rendering is deterministic per seed") {
  const auto script = make_scenario({}, 3);
  const FixtureVideo a(script, 1), b(script, 1), c(script, 2);
  CHECK(a.frame(17) == b.frame(17));
  CHECK_FALSE(a.frame(17) == c.frame(17));
  CHECK(a.frame(5) == a.frame(5));
}

TEST_CASE("scenario layout") {
  ScenarioSpec spec;
  const auto s = make_scenario(spec, 9);
  CHECK_NOTHROW(validate_script(s));
  CHECK(s.events.size() == 11u);
  int with = 0, without = 0, decoys = 0;
  for (std::size_t i = 0; i < s.events.size(); ++i) {
    const auto& e = s.events[i];
    CHECK(e.end_frame - e.start_frame + 1 == spec.event_length);
    if (i > 0) CHECK(e.start_frame > s.events[i - 1].end_frame);
    with += e.kind == EventKind::smoke_with_vehicle;
    without += e.kind == EventKind::smoke_without_vehicle;
    decoys += e.kind == EventKind::shadow_decoy;
  }
  CHECK(with == 3);
  CHECK(without == 3);
  CHECK(decoys == 5);
  const auto seg = script_segments(s);
  CHECK(seg.segments.size() == 3u);
  CHECK(expand_segments(seg).positives() == 3 * spec.event_length);
  ScenarioSpec crowded;
  crowded.num_frames = 50;
  CHECK_THROWS_AS(make_scenario(crowded, 1), ValidationError);
}

TEST_CASE("truth follows the planted motion") {
  FixtureScript s;
  s.num_frames = 10;
  PlantedEvent e;
  e.start_frame = 2;
  e.end_frame = 8;
  e.x = 100;
  e.y = 100;
  e.vx = 2;
  s.events.push_back(e);
  const auto truth = script_truth(s);
  CHECK(truth[1].empty());
  REQUIRE(truth[4].size() == 2);
  const auto& smoke = truth[4][0].role == ObjectRole::smoke ? truth[4][0] : truth[4][1];
  const auto& car = truth[4][0].role == ObjectRole::smoke ? truth[4][1] : truth[4][0];
  CHECK(smoke.box.x1() == doctest::Approx(104));
  CHECK(car.box.y2() == doctest::Approx(100 - e.vehicle_gap));
  CHECK(car.box.center().x == doctest::Approx(smoke.box.center().x));

  PlantedEvent off = e;
  off.x = 630;
  s.events = {off};
  CHECK_THROWS_AS(validate_script(s), ValidationError);
  PlantedEvent late = e;
  late.end_frame = 10;
  s.events = {late};
  CHECK_THROWS_AS(validate_script(s), ValidationError);
}

TEST_CASE("fixture directory round trip") {
  TempDir dir;
  const FixtureVideo video(make_scenario({}, 4), 4);
  write_fixture(video, dir / "v");
  const PpmDirectoryVideo back(dir / "v");
  CHECK(back.num_frames() == video.num_frames());
  CHECK(back.frame(33) == video.frame(33));
  CHECK(read_truth(dir / "v" / "truth.jsonl", video.num_frames()) == video.truth());
  CHECK(load_segment_annotations(dir / "v" / "segments.jsonl").front() == video.segments());
  CHECK(script_from_json(read_json_file(dir / "v" / "script.json")).events.size() ==
        video.script().events.size());
  std::filesystem::remove(dir / "v" / "frame_000007.ppm");
  CHECK_THROWS_AS(PpmDirectoryVideo(dir / "v"), IoError);
}
