#include <doctest.h>

#include <random>

#include "oracles.hpp"
#include "smoky/errors.hpp"
#include "smoky/nn/ops.hpp"
#include "smoky/refiner.hpp"
#include "test_util.hpp"

using namespace smoky;
using nn::Tensor;

namespace {

Tensor random_input(int n, int k, int s, std::uint64_t seed) {
  nn::Rng rng(seed);
  std::normal_distribution<float> d;
  Tensor x({n, 3, k, s, s});
  for (auto& v : x.values()) v = d(rng);
  return x;
}

Tensor reverse_time(const Tensor& x) {
  Tensor y(x.shape());
  for (int n = 0; n < x.dim(0); ++n)
    for (int c = 0; c < x.dim(1); ++c)
      for (int t = 0; t < x.dim(2); ++t)
        for (int h = 0; h < x.dim(3); ++h)
          for (int w = 0; w < x.dim(4); ++w)
            y.at(n, c, x.dim(2) - 1 - t, h, w) = x.at(n, c, t, h, w);
  return y;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(double(a[i]) - b[i]));
  return m;
}

TemporalHeadSpec small_spec(HeadVariant v, int k = 3) {
  TemporalHeadSpec s;
  s.variant = v;
  s.k = k;
  s.base_width = 4;
  return s;
}

// Clip whose patches are bright for smoke and dark otherwise, with per-clip noise.
ClipSample toy_clip(bool smoke, int k, int size, std::uint64_t seed) {
  std::mt19937 rng(static_cast<unsigned>(seed));
  std::uniform_int_distribution<int> noise(-20, 20);
  ClipSample c;
  c.video_id = "toy";
  c.source_box = BoundingBox::make(0, 0, size, size);
  c.region = c.source_box;
  for (int t = 0; t < k; ++t) {
    Image img(size, size);
    for (int y = 0; y < size; ++y)
      for (int x = 0; x < size; ++x) {
        const int base = smoke ? 190 : 60;
        auto* p = img.pixel(x, y);
        p[0] = p[1] = p[2] = static_cast<std::uint8_t>(std::clamp(base + noise(rng), 0, 255));
      }
    c.patches.push_back(std::move(img));
    c.frames.push_back(t);
  }
  c.label = smoke ? ClipLabel::smoke : ClipLabel::non_smoke;
  return c;
}

ClipConfig toy_clip_config(int k) {
  ClipConfig c;
  c.k = k;
  c.train_resize = 36;
  c.train_crop = 32;
  c.eval_size = 32;
  c.min_side = 32;
  return c;
}

}  // namespace

TEST_CASE("every variant produces two logits per clip") {
  for (auto v : {HeadVariant::prefix3d, HeadVariant::suffix3d, HeadVariant::avg2d, HeadVariant::cat2d}) {
    TemporalHead head(small_spec(v), 1);
    const Tensor y = head.forward(random_input(2, 3, 32, 2), false);
    CHECK(y.shape() == std::vector<int>{2, 2});
    CHECK_THROWS_AS(head.forward(random_input(1, 2, 32, 2), false), ShapeError);
  }
}

TEST_CASE("avg2d ignores frame order, the others do not") {
  const Tensor x = random_input(2, 3, 32, 3);
  const Tensor xr = reverse_time(x);
  TemporalHead avg(small_spec(HeadVariant::avg2d), 4);
  CHECK(max_abs_diff(avg.forward(x, false), avg.forward(xr, false)) == 0.0);
  for (auto v : {HeadVariant::prefix3d, HeadVariant::suffix3d, HeadVariant::cat2d}) {
    TemporalHead head(small_spec(v), 4);
    CHECK(max_abs_diff(head.forward(x, false), head.forward(xr, false)) > 1e-6);
  }
}

TEST_CASE("the oldest frame reaches the logits of every variant") {
  for (auto v : {HeadVariant::prefix3d, HeadVariant::suffix3d, HeadVariant::avg2d, HeadVariant::cat2d}) {
    TemporalHead head(small_spec(v), 5);
    const Tensor x = random_input(1, 3, 32, 6);
    Tensor z = x;
    for (int c = 0; c < 3; ++c)
      for (int h = 0; h < 32; ++h)
        for (int w = 0; w < 32; ++w) z.at(0, c, 0, h, w) = 0.0f;
    CHECK(max_abs_diff(head.forward(x, false), head.forward(z, false)) > 1e-6);
  }
}

TEST_CASE("suffix3d equals per-frame features followed by a summed 2-D convolution") {
  for (int k : {1, 3}) {
    TemporalHead head(small_spec(HeadVariant::suffix3d, k), 7);
    const Tensor x = random_input(2, k, 64, 8);
    const Tensor logits = head.forward(x, false);
    const Tensor f = head.frame_features(x);   // (N*K, C, 1, h, w)
    const auto view = head.suffix_view();
    const Tensor& w3 = *view.conv_weight;      // (C, C, K, 3, 3)
    const int c = f.dim(1), h = f.dim(3), w = f.dim(4);
    Tensor conv({2, c, 1, h, w});
    for (int n = 0; n < 2; ++n) {
      std::vector<double> acc(static_cast<std::size_t>(c) * h * w, 0.0);
      for (int t = 0; t < k; ++t) {
        std::vector<double> img(static_cast<std::size_t>(c) * h * w);
        for (int ch = 0; ch < c; ++ch)
          for (int yy = 0; yy < h; ++yy)
            for (int xx = 0; xx < w; ++xx)
              img[(static_cast<std::size_t>(ch) * h + yy) * w + xx] = f.at(n * k + t, ch, 0, yy, xx);
        std::vector<double> wt(static_cast<std::size_t>(c) * c * 9);
        for (int o = 0; o < c; ++o)
          for (int i = 0; i < c; ++i)
            for (int q = 0; q < 9; ++q)
              wt[(static_cast<std::size_t>(o) * c + i) * 9 + q] = w3.at(o, i, t, q / 3, q % 3);
        const auto y = oracle::conv2d(img, c, h, w, wt, c, 3, 1, {});
        for (std::size_t i = 0; i < y.size(); ++i) acc[i] += y[i];
      }
      for (std::size_t i = 0; i < acc.size(); ++i) conv[static_cast<std::size_t>(n) * acc.size() + i] = float(acc[i]);
    }
    Tensor a = view.norm->forward(conv, false);
    nn::relu_inplace(a);
    const Tensor want = view.classifier->forward(nn::global_avg_pool(a), false);
    CHECK(max_abs_diff(logits, want) < 1e-5);
  }
}

TEST_CASE("head spec validation") {
  auto s = small_spec(HeadVariant::suffix3d, 3);
  s.temporal_kernel = 4;
  CHECK_THROWS_AS(TemporalHead(s, 1), ConfigError);
  s.temporal_kernel = 2;
  CHECK_NOTHROW(TemporalHead(s, 1));
  CHECK_THROWS_AS(parse_head_variant("lstm"), ConfigError);
  CHECK(parse_head_variant("cat2d") == HeadVariant::cat2d);
}

TEST_CASE("directional derivative of the training loss matches backward") {
  for (auto v : {HeadVariant::prefix3d, HeadVariant::suffix3d, HeadVariant::avg2d, HeadVariant::cat2d}) {
    TemporalHead head(small_spec(v), 11);
    const Tensor x = random_input(4, 3, 32, 12);
    const std::vector<int> labels{0, 1, 1, 0};
    auto params = head.parameters();
    auto loss_at = [&] {
      Tensor d;
      return nn::softmax_cross_entropy(head.forward(x, true), labels, d);
    };
    for (auto* p : params) p->zero_grad();
    Tensor dl;
    nn::softmax_cross_entropy(head.forward(x, true), labels, dl);
    head.backward(dl);
    nn::Rng rng(13);
    std::normal_distribution<float> nd;
    std::vector<Tensor> dir;
    double analytic = 0.0;
    for (auto* p : params) {
      Tensor d(p->value.shape());
      for (std::size_t i = 0; i < d.size(); ++i) {
        d[i] = nd(rng);
        analytic += double(d[i]) * p->grad[i];
      }
      dir.push_back(std::move(d));
    }
    double norm = 0.0;
    for (const auto& d : dir)
      for (std::size_t i = 0; i < d.size(); ++i) norm += double(d[i]) * d[i];
    norm = std::sqrt(norm);
    for (auto& d : dir) d *= static_cast<float>(1.0 / norm);
    analytic /= norm;
    const float eps = 1e-2f;
    auto shift = [&](float s) {
      for (std::size_t j = 0; j < params.size(); ++j)
        for (std::size_t i = 0; i < dir[j].size(); ++i) params[j]->value[i] += s * dir[j][i];
    };
    shift(eps);
    const double up = loss_at();
    shift(-2 * eps);
    const double down = loss_at();
    shift(eps);
    const double numeric = (up - down) / (2.0 * eps);
    INFO(to_string(v));
    CHECK(analytic == doctest::Approx(numeric).epsilon(0.05));
  }
}

TEST_CASE("learning rate schedule") {
  TrainSchedule s;
  CHECK(s.learning_rate_at(1) == doctest::Approx(0.01));
  CHECK(s.learning_rate_at(4) == doctest::Approx(0.01));
  CHECK(s.learning_rate_at(5) == doctest::Approx(0.001));
  CHECK(s.learning_rate_at(9) == doctest::Approx(0.0001));
}

TEST_CASE("training edge cases") {
  const ClipConfig cfg = toy_clip_config(3);
  std::vector<ClipSample> clips;
  for (int i = 0; i < 4; ++i) clips.push_back(toy_clip(i % 2 == 0, 3, 36, i));
  TemporalHead head(small_spec(HeadVariant::suffix3d), 3);
  TrainSchedule s;
  s.epochs = 0;
  const Tensor x = random_input(1, 3, 32, 1);
  const Tensor before = head.forward(x, false);
  CHECK(train_head(head, clips, cfg, s).empty());
  CHECK(max_abs_diff(before, head.forward(x, false)) == 0.0);

  s.epochs = 1;
  std::vector<ClipSample> one_class = {toy_clip(true, 3, 36, 1), toy_clip(true, 3, 36, 2)};
  CHECK_THROWS_AS(train_head(head, one_class, cfg, s), ValidationError);
  auto unlabelled = clips;
  unlabelled[1].label.reset();
  CHECK_THROWS_AS(train_head(head, unlabelled, cfg, s), ValidationError);
  std::vector<ClipSample> wrong_k = {toy_clip(true, 2, 36, 1), toy_clip(false, 2, 36, 2)};
  CHECK_THROWS_AS(train_head(head, wrong_k, cfg, s), ConfigError);
  CHECK_THROWS_AS(classify_clip(head, wrong_k[0], cfg), ConfigError);
}

TEST_CASE("training separates an easy dataset and is deterministic") {
  const ClipConfig cfg = toy_clip_config(3);
  std::vector<ClipSample> clips;
  for (int i = 0; i < 8; ++i) clips.push_back(toy_clip(i % 2 == 0, 3, 36, 100 + i));
  TrainSchedule s;
  s.epochs = 6;
  s.batch_size = 4;
  s.seed = 9;
  TemporalHead a(small_spec(HeadVariant::suffix3d), 21);
  TemporalHead b(small_spec(HeadVariant::suffix3d), 21);
  const auto ha = train_head(a, clips, cfg, s);
  const auto hb = train_head(b, clips, cfg, s);
  REQUIRE(ha.size() == 6);
  CHECK(ha.back().accuracy == doctest::Approx(1.0));
  for (std::size_t i = 0; i < ha.size(); ++i) {
    CHECK(ha[i].loss == hb[i].loss);
    CHECK(ha[i].learning_rate == doctest::Approx(s.learning_rate_at(ha[i].epoch)));
  }
  const auto sa = a.state();
  const auto sb = b.state();
  for (std::size_t i = 0; i < sa.size(); ++i) CHECK(max_abs_diff(*sa[i].second, *sb[i].second) == 0.0);
  const auto p = classify_clip(a, toy_clip(true, 3, 32, 999), cfg);
  CHECK(p.verdict);
  CHECK(p.probabilities[0] + p.probabilities[1] == doctest::Approx(1.0));

  s.epochs = 20;
  s.stop_at_accuracy = 1.0;
  TemporalHead c(small_spec(HeadVariant::suffix3d), 21);
  const auto hc = train_head(c, clips, cfg, s);
  CHECK(hc.size() < 20);
  CHECK(hc.back().accuracy == doctest::Approx(1.0));
}

TEST_CASE("refiner checkpoint round trip") {
  TempDir dir;
  auto spec = small_spec(HeadVariant::prefix3d);
  TemporalHead head(spec, 31);
  const ClipConfig cfg = toy_clip_config(3);
  head.save(dir / "r.ckpt", cfg);
  auto [back, back_cfg] = TemporalHead::load(dir / "r.ckpt");
  CHECK(back.spec().variant == HeadVariant::prefix3d);
  CHECK(back_cfg.eval_size == 32);
  const Tensor x = random_input(1, 3, 32, 3);
  CHECK(max_abs_diff(head.forward(x, false), back.forward(x, false)) == 0.0);
  write_text(dir / "junk.ckpt", "nope");
  CHECK_THROWS(TemporalHead::load(dir / "junk.ckpt"));
}
