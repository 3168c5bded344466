#include <doctest.h>

#include "smoky/architecture.hpp"
#include "smoky/errors.hpp"
#include "smoky/network.hpp"
#include "test_util.hpp"

using namespace smoky;

namespace {

ArchitectureSpec single_layer(int in_channels, LayerSpec layer) {
  ArchitectureSpec a;
  a.name = "probe";
  a.input_channels = in_channels;
  a.layers.push_back(std::move(layer));
  return a;
}

// Hand-written closed forms for the blocks at (c_in -> c_out), hidden c = c_out/2.
long long c3_params(long long c_in, long long c_out) {
  const long long c = c_out / 2;
  return 2 * (c_in * c + c) + (2 * c * c_out + c_out) + (c * c + c) + (9 * c * c + c);
}

long long ghost_params(long long n_in, long long n, long long k, long long dk) {
  const long long m = (n + 1) / 2;
  return n_in * m * k * k + m + (n - m) * dk * dk;
}

long long c3ghost_params(long long c_in, long long c_out) {
  const long long c = c_out / 2;
  return 2 * (c_in * c + c) + (2 * c * c_out + c_out) + ghost_params(c, c / 2, 1, 5) +
         ghost_params(c / 2, c, 1, 5);
}

}  // namespace

TEST_CASE("conv closed form") {
  CHECK(conv_budget(3, 16, 3, 1, 1, 1).parameters == 448);
  CHECK(conv_budget(3, 16, 3, 1, 10, 10).macs == 43200);
  CHECK(conv_budget(16, 16, 3, 16, 1, 1).parameters == 16 * 9 + 16);
  ArchitectureSpec empty;
  empty.name = "empty";
  CHECK(compute_budget(empty, 64, 64) == ModelBudget{});
}

TEST_CASE("block budgets match hand derivations") {
  for (int c : {16, 32, 64, 128}) {
    LayerSpec c3;
    c3.type = LayerType::c3;
    c3.out_channels = c;
    CHECK(compute_budget(single_layer(c, c3), 32, 32).parameters == c3_params(c, c));
    const auto g = single_layer(c, build_c3ghost(c, c));
    CHECK(compute_budget(g, 32, 32).parameters == c3ghost_params(c, c));
    CHECK(c3ghost_params(c, c) < c3_params(c, c));
  }
  const auto g = GhostConvSpec::with_ratio(64, 64, 3, 1);
  CHECK(ghost_conv_budget(g, 1, 1).parameters == ghost_params(64, 64, 3, 5));
  CHECK(ghost_conv_budget(g, 1, 1).parameters < conv_budget(64, 64, 3, 1, 1, 1).parameters);
}

TEST_CASE("budget is additive over layers") {
  const auto spec = build_yolov5tiny();
  ModelBudget sum;
  for (const auto& b : layer_budgets(spec, 640, 640)) sum += b;
  CHECK(sum == compute_budget(spec, 640, 640));
}

TEST_CASE("reference budgets") {
  const auto n = compute_budget(build_yolov5n(), 640, 640);
  const auto t = compute_budget(build_yolov5tiny(), 640, 640);
  CHECK(t.parameters < n.parameters);
  CHECK(t.flops() < n.flops());
  CHECK(n.parameters > 1'700'000);
  CHECK(n.parameters < 2'000'000);
  CHECK(t.parameters > 900'000);
  CHECK(t.parameters < 1'500'000);
  CHECK(t.flops() / 1e9 > 2.0);
  CHECK(t.flops() / 1e9 < 3.5);
  TinyOptions o;
  o.ghost_neck_convs = true;
  CHECK(compute_budget(build_yolov5tiny(o), 640, 640).parameters < t.parameters);
}

TEST_CASE("prediction shapes at strides 8, 16, 32") {
  const auto p = prediction_shapes(build_yolov5tiny(), 640, 640);
  REQUIRE(p.size() == 3);
  CHECK(p[0].height == 80);
  CHECK(p[1].height == 40);
  CHECK(p[2].height == 20);
  for (const auto& s : p) CHECK(s.channels == 18);
  const auto q = prediction_shapes(build_yolov5n(), 320, 640);
  CHECK(q[2].width == 20);
  CHECK(q[2].height == 10);
  CHECK(q[0].channels == 255);
}

TEST_CASE("bad compositions raise shape errors") {
  auto spec = build_yolov5tiny();
  spec.layers[12].from = {-1, 30};
  CHECK_THROWS_AS(infer_shapes(spec, 640, 640), ShapeError);
  auto odd = build_yolov5tiny();
  CHECK_THROWS_AS(infer_shapes(odd, 100, 100), ShapeError);
  CHECK_THROWS_AS(build_c3ghost(16, 7), ValidationError);
  CHECK_THROWS_AS(build_c3ghost(16, 6), ValidationError);
}

TEST_CASE("ghost spec split and validation") {
  const auto g = GhostConvSpec::with_ratio(32, 64, 1, 1);
  CHECK(g.primary_channels == 32);
  CHECK(g.ghost_channels == 32);
  CHECK(GhostConvSpec::with_ratio(8, 9, 1, 1).primary_channels == 5);
  GhostConvSpec bad = g;
  bad.ghost_channels = 0;
  bad.primary_channels = 64;
  CHECK_THROWS_AS(bad.validate(), ValidationError);
  bad = g;
  bad.primary_channels = 31;
  CHECK_THROWS_AS(bad.validate(), ValidationError);
  bad = g;
  bad.cheap_kernel = 4;
  CHECK_THROWS_AS(bad.validate(), ValidationError);
}

TEST_CASE("ghost forward shape and composition") {
  nn::Rng rng(9);
  const auto g = GhostConvSpec::with_ratio(16, 64, 3, 1);
  const auto w = init_ghost_weights(g, rng);
  nn::Tensor x({1, 16, 1, 32, 32});
  std::normal_distribution<float> d;
  for (auto& v : x.values()) v = d(rng);
  const auto y = ghost_conv_forward(g, w, x);
  CHECK(y.shape() == std::vector<int>{1, 64, 1, 32, 32});
  nn::Tensor wrong({1, 15, 1, 32, 32});
  CHECK_THROWS_AS(ghost_conv_forward(g, w, wrong), ShapeError);
}

TEST_CASE("architecture text round trip") {
  for (const auto& spec : {build_yolov5n(), build_yolov5tiny()}) {
    const auto text = to_text(spec);
    CHECK(architecture_from_text(text) == spec);
  }
  try {
    architecture_from_text("# smoky architecture v1\nname x\ninput_channels 3\nlayer 0 type=blob\n");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("line 4") != std::string::npos);
  }
}

TEST_CASE("network parameters match the budget and outputs match shapes") {
  const auto spec = build_yolov5tiny();
  const DetectorNetwork net(spec, 1);
  CHECK(net.parameter_count() == compute_budget(spec, 640, 640).parameters);
  const nn::Tensor x({1, 3, 1, 64, 96}, 0.5f);
  const auto maps = net.forward(x);
  const auto shapes = prediction_shapes(spec, 64, 96);
  REQUIRE(maps.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(maps[i].dim(1) == shapes[i].channels);
    CHECK(maps[i].dim(3) == shapes[i].height);
    CHECK(maps[i].dim(4) == shapes[i].width);
  }
  const nn::Tensor bad({1, 3, 1, 60, 64});
  CHECK_THROWS_AS(net.forward(bad), ShapeError);
}

TEST_CASE("network checkpoint round trip") {
  TempDir dir;
  DetectorNetwork net(build_yolov5tiny(), 4);
  net.save(dir / "net.ckpt");
  const auto back = DetectorNetwork::load(dir / "net.ckpt");
  CHECK(back.spec() == net.spec());
  const nn::Tensor x({1, 3, 1, 64, 64}, 0.25f);
  const auto a = net.forward(x);
  const auto b = back.forward(x);
  CHECK(std::equal(a[0].values().begin(), a[0].values().end(), b[0].values().begin()));
}
