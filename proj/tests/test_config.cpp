#include <doctest.h>

#include "smoky/config.hpp"
#include "smoky/errors.hpp"
#include "test_util.hpp"

using namespace smoky;

TEST_CASE("key value parsing") {
  const auto kv = parse_key_values("# comment\nl_dist = 75  # trailing\n\nsmoke_detector = \"stream:a b.jsonl\"\n", "t");
  CHECK(kv.at("l_dist") == "75");
  CHECK(kv.at("smoke_detector") == "stream:a b.jsonl");
  CHECK_THROWS_AS(parse_key_values("k = 3\nk = 4\n", "t"), ParseError);
  try {
    parse_key_values("k = 3\nnonsense line\n", "cfg.txt");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("cfg.txt:2") != std::string::npos);
  }
}

TEST_CASE("settings apply with type checks") {
  RunConfig c;
  apply_setting(c, "l_dist", "80");
  apply_setting(c, "front_filter", "false");
  apply_setting(c, "k", "5");
  apply_setting(c, "refiner_variant", "cat2d");
  CHECK(c.cascade.match.l_dist == 80.0);
  CHECK_FALSE(c.cascade.match.front_filter_enabled);
  CHECK(c.cascade.clip.k == 5);
  CHECK(c.refiner_variant == HeadVariant::cat2d);
  CHECK_THROWS_AS(apply_setting(c, "colour", "red"), ConfigError);
  CHECK_THROWS_AS(apply_setting(c, "k", "three"), ConfigError);
  CHECK_THROWS_AS(apply_setting(c, "front_filter", "maybe"), ConfigError);
  c.cascade.match.l_dist = -1;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("every documented key round trips through the text form") {
  RunConfig c;
  for (const auto& k : config_keys()) {
    if (!k.default_value.empty()) CHECK_NOTHROW(apply_setting(c, k.name, k.default_value));
  }
  TempDir dir;
  apply_setting(c, "seed", "17");
  apply_setting(c, "refiner_checkpoint", (dir / "r.ckpt").string());
  write_text(dir / "run.cfg", to_config_text(c));
  const auto back = load_run_config(dir / "run.cfg");
  CHECK(to_config_text(back) == to_config_text(c));
  CHECK(back.seed == 17);
}

TEST_CASE("relative paths resolve against the config file") {
  TempDir dir;
  std::filesystem::create_directories(dir / "sub");
  write_text(dir / "sub" / "run.cfg", "refiner_checkpoint = models/r.ckpt\nsmoke_detector = stream:d.jsonl\n");
  const auto c = load_run_config(dir / "sub" / "run.cfg");
  CHECK(std::filesystem::path(c.refiner_checkpoint) == dir / "sub" / "models" / "r.ckpt");
  CHECK(c.smoke_detector == "stream:" + (dir / "sub" / "d.jsonl").string());
  CHECK_THROWS_AS(load_run_config(dir / "none.cfg"), IoError);
}
