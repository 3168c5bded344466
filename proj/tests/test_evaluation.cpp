#include <doctest.h>

#include <random>

#include "oracles.hpp"
#include "smoky/errors.hpp"
#include "smoky/evaluation.hpp"

using namespace smoky;

namespace {

VideoAnnotation annotation(const std::string& id, const std::string& scene, int n,
                           std::vector<std::pair<int, int>> segs) {
  VideoAnnotation a{id, scene, n, {}};
  for (auto [s, e] : segs) a.segments.push_back({id, s, e, scene});
  return a;
}

}  // namespace

TEST_CASE("worked metric example") {
  const ConfusionCounts c{5, 0, 10, 5};
  const auto m = metrics(c);
  CHECK(*m.dr.value == doctest::Approx(0.5));
  CHECK(*m.far.value == 0.0);
  CHECK(*m.precision.value == 1.0);
  CHECK(*m.f1.value == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("F1 from precision 0.7 and detection rate 0.7168") {
  const ConfusionCounts c{7168, 3072, 0, 2832};
  const auto m = metrics(c);
  CHECK(*m.precision.value == doctest::Approx(0.7));
  CHECK(*m.dr.value == doctest::Approx(0.7168));
  CHECK(*m.f1.value == doctest::Approx(0.7083).epsilon(1e-4));
}

TEST_CASE("undefined ratios carry a reason") {
  auto m = metrics({0, 0, 10, 0});
  CHECK_FALSE(m.dr.defined());
  CHECK_FALSE(m.precision.defined());
  CHECK_FALSE(m.f1.defined());
  CHECK_FALSE(m.dr.reason.empty());
  CHECK(format_ratio(m.dr).find("undefined") != std::string::npos);
  m = metrics({0, 5, 0, 5});
  CHECK(*m.dr.value == 0.0);
  CHECK(*m.precision.value == 0.0);
  CHECK_FALSE(m.f1.defined());
  CHECK_FALSE(metrics({3, 0, 0, 0}).far.defined());
}

TEST_CASE("metrics agree with the definition oracle on random counts") {
  std::mt19937 rng(8);
  std::uniform_int_distribution<int> u(0, 30);
  for (int i = 0; i < 500; ++i) {
    const ConfusionCounts c{u(rng), u(rng), u(rng), u(rng)};
    const auto m = metrics(c);
    const auto want = oracle::rates(c.tp, c.fp, c.tn, c.fn);
    CHECK(m.dr.value == want.dr);
    CHECK(m.far.value == want.far);
    CHECK(m.precision.value == want.precision);
    CHECK(m.f1.defined() == want.f1.has_value());
    if (want.f1) CHECK(*m.f1.value == doctest::Approx(*want.f1).epsilon(1e-12));
  }
}

TEST_CASE("confusion counting and length check") {
  const auto labels = expand_segments(annotation("v", "s", 6, {{1, 3}}));
  const auto c = confusion({true, true, false, false, true, false}, labels);
  CHECK(c == ConfusionCounts{1, 2, 1, 2});
  CHECK_THROWS_AS(confusion({true}, labels), ValidationError);
}

TEST_CASE("pooled and scene-averaged detection rate differ") {
  std::vector<VideoAnnotation> ann = {annotation("a", "A", 10, {{0, 9}}),
                                      annotation("b", "B", 1, {{0, 0}})};
  std::vector<VideoVerdicts> runs = {
      {"a", {true, true, true, true, true, true, true, true, true, false}}, {"b", {false}}};
  const auto pooled = evaluate_run(runs, ann, {}, Aggregation::pooled);
  CHECK(*pooled.metrics.dr.value == doctest::Approx(9.0 / 11.0));
  const auto scene = evaluate_run(runs, ann, {}, Aggregation::scene_averaged);
  CHECK(*scene.metrics.dr.value == doctest::Approx(0.45));
  CHECK(scene.per_scene.size() == 2);
  const auto merged = evaluate_run(runs, ann, {{"a", "X"}, {"b", "X"}}, Aggregation::scene_averaged);
  CHECK(*merged.metrics.dr.value == doctest::Approx(9.0 / 11.0));
}

TEST_CASE("unmatched ids are listed") {
  std::vector<VideoAnnotation> ann = {annotation("a", "A", 2, {})};
  std::vector<VideoVerdicts> runs = {{"a", {false, false}}, {"zz", {false}}, {"yy", {true}}};
  try {
    evaluate_run(runs, ann, {}, Aggregation::pooled);
    FAIL("expected failure");
  } catch (const ValidationError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("zz") != std::string::npos);
    CHECK(msg.find("yy") != std::string::npos);
  }
  std::vector<VideoVerdicts> dup = {{"a", {false, false}}, {"a", {false, false}}};
  CHECK_THROWS_AS(evaluate_run(dup, ann, {}, Aggregation::pooled), ValidationError);
  CHECK_THROWS_AS(parse_aggregation("median"), ConfigError);
}

TEST_CASE("threshold sweep is monotone") {
  std::mt19937 rng(4);
  std::uniform_real_distribution<double> score(0, 1);
  std::bernoulli_distribution coin(0.4);
  LabelledStream s;
  std::vector<bool> labels;
  for (int f = 0; f < 200; ++f) {
    labels.push_back(coin(rng));
    const int n = static_cast<int>(score(rng) * 3);
    for (int i = 0; i < n; ++i) {
      s.detections.push_back({BoundingBox::make(0, 0, 10, 10), score(rng), Category::smoke, f});
    }
    s.detections.push_back({BoundingBox::make(0, 0, 10, 10), 0.99, Category::car, f});
  }
  s.labels = FrameLabelSet("v", labels);
  const std::vector<double> ts = {0.0, 0.1, 0.3, 0.5, 0.7, 0.9, 1.0};
  const auto rows = threshold_sweep({s}, ts);
  REQUIRE(rows.size() == ts.size());
  for (std::size_t i = 1; i < rows.size(); ++i) {
    CHECK(rows[i].counts.tp <= rows[i - 1].counts.tp);
    CHECK(rows[i].counts.fp <= rows[i - 1].counts.fp);
    CHECK(rows[i].counts.tp + rows[i].counts.fn == rows[0].counts.tp + rows[0].counts.fn);
  }
  const auto j = sweep_to_json(rows);
  CHECK(j.size() == ts.size());
}
