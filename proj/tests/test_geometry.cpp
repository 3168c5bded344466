#include <doctest.h>

#include <random>

#include "oracles.hpp"
#include "smoky/errors.hpp"
#include "smoky/geometry.hpp"

using namespace smoky;

namespace {

ScoredDetection det(double x1, double y1, double x2, double y2, Category c, double score = 0.9) {
  return {BoundingBox::make(x1, y1, x2, y2), score, c, 0};
}

}  // namespace

TEST_CASE("box construction rejects inverted corners") {
  CHECK_THROWS_AS(BoundingBox::make(10, 10, 5, 20), ValidationError);
  CHECK_THROWS_AS(BoundingBox::make(0, 0, 0, 10), ValidationError);
  CHECK_THROWS_AS(BoundingBox::make(0, 0, 1, std::nan("")), ValidationError);
  CHECK_FALSE(BoundingBox::try_make(3, 3, 2, 4).has_value());
  const auto b = BoundingBox::make(1, 2, 5, 10);
  CHECK(b.area() == doctest::Approx(32.0));
  CHECK(b.center().x == doctest::Approx(3.0));
}

TEST_CASE("iou agrees with pixel counting") {
  std::mt19937 rng(11);
  std::uniform_int_distribution<int> c(0, 60), s(1, 30);
  for (int i = 0; i < 300; ++i) {
    const int ax = c(rng), ay = c(rng), aw = s(rng), ah = s(rng);
    const int bx = c(rng), by = c(rng), bw = s(rng), bh = s(rng);
    const auto a = BoundingBox::make(ax, ay, ax + aw, ay + ah);
    const auto b = BoundingBox::make(bx, by, bx + bw, by + bh);
    const double want = oracle::raster_iou(ax, ay, ax + aw, ay + ah, bx, by, bx + bw, by + bh);
    CHECK(iou(a, b) == doctest::Approx(want).epsilon(1e-12));
    CHECK(iou(a, b) == doctest::Approx(iou(b, a)));
  }
  const auto a = BoundingBox::make(0, 0, 10, 10);
  CHECK(iou(a, a) == doctest::Approx(1.0));
  CHECK(iou(a, BoundingBox::make(10, 0, 20, 10)) == 0.0);
}

TEST_CASE("anchor points and distance") {
  const auto s = BoundingBox::make(0, 10, 20, 30);
  const auto a = smoke_anchor_points(s);
  CHECK(a[0].x == 0.0);
  CHECK(a[1].x == 10.0);
  CHECK(a[2].x == 20.0);
  CHECK(a[1].y == 10.0);
  const auto v = BoundingBox::make(0, -20, 20, 10);
  CHECK(vehicle_anchor_point(v).x == 10.0);
  CHECK(vehicle_anchor_point(v).y == 10.0);
  CHECK(mean_anchor_distance(s, v) == doctest::Approx(20.0 / 3.0));
}

TEST_CASE("overlap case wins over a closer proximity vehicle") {
  const auto smoke = det(100, 100, 140, 140, Category::smoke);
  std::vector<ScoredDetection> vs = {det(100, 60, 140, 100, Category::car),
                                     det(90, 50, 150, 110, Category::truck)};
  const auto m = match_smoke_to_vehicles(smoke, vs, {});
  REQUIRE(m.vehicle);
  CHECK(m.rule == MatchRule::overlap);
  CHECK(*m.vehicle_index == 1);
}

TEST_CASE("proximity respects l_dist and the front filter") {
  const auto smoke = det(100, 100, 140, 140, Category::smoke);
  std::vector<ScoredDetection> vs = {det(100, 50, 140, 90, Category::bus)};
  MatchConfig cfg;
  const double d = mean_anchor_distance(smoke.box, vs[0].box);
  cfg.l_dist = d + 0.5;
  auto m = match_smoke_to_vehicles(smoke, vs, cfg);
  CHECK(m.rule == MatchRule::proximity);
  CHECK(m.score_detail == doctest::Approx(d));
  cfg.l_dist = d;
  CHECK(match_smoke_to_vehicles(smoke, vs, cfg).rule == MatchRule::unmatched);

  std::vector<ScoredDetection> behind = {det(100, 150, 140, 190, Category::car)};
  cfg.l_dist = 1000;
  CHECK_FALSE(match_smoke_to_vehicles(smoke, behind, cfg).vehicle);
  cfg.front_filter_enabled = false;
  CHECK(match_smoke_to_vehicles(smoke, behind, cfg).vehicle);
}

TEST_CASE("ties break by score then list order") {
  const auto smoke = det(100, 100, 140, 140, Category::smoke);
  std::vector<ScoredDetection> vs = {det(100, 50, 140, 90, Category::car, 0.5),
                                     det(100, 50, 140, 90, Category::truck, 0.8),
                                     det(100, 50, 140, 90, Category::bus, 0.8)};
  const auto m = match_smoke_to_vehicles(smoke, vs, {});
  CHECK(*m.vehicle_index == 1);
}

TEST_CASE("matching input validation") {
  const auto smoke = det(0, 0, 10, 10, Category::smoke);
  std::vector<ScoredDetection> bad = {det(0, 0, 5, 5, Category::smoke)};
  CHECK_THROWS_AS(match_smoke_to_vehicles(smoke, bad, {}), ValidationError);
  CHECK_THROWS_AS(match_smoke_to_vehicles(det(0, 0, 5, 5, Category::car), {}, {}), ValidationError);
  MatchConfig c;
  c.l_dist = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("matching equals brute force on random scenes") {
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> pos(0, 400), size(5, 80), score(0, 1);
  std::uniform_int_distribution<int> count(0, 6);
  for (double l : {25.0, 50.0, 100.0}) {
    MatchConfig cfg;
    cfg.l_dist = l;
    for (int t = 0; t < 400; ++t) {
      const double sx = pos(rng), sy = pos(rng);
      const auto smoke = det(sx, sy, sx + size(rng), sy + size(rng), Category::smoke);
      std::vector<ScoredDetection> vs;
      const int n = count(rng);
      for (int i = 0; i < n; ++i) {
        const double x = pos(rng), y = pos(rng);
        vs.push_back(det(x, y, x + size(rng), y + size(rng), Category::car, score(rng)));
      }
      const auto got = match_smoke_to_vehicles(smoke, vs, cfg);
      const auto want = oracle::brute_force_match(smoke.box, vs, l);
      CHECK(got.vehicle_index == want.index);
      if (want.index) CHECK((got.rule == MatchRule::overlap) == want.overlap);
    }
  }
}
