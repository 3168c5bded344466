#include <doctest.h>

#include <initializer_list>

#include "smoky/cli.hpp"
#include "test_util.hpp"

namespace {

int cli(std::initializer_list<std::string> args) {
  std::vector<std::string> owned{"smoky"};
  owned.insert(owned.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& a : owned) argv.push_back(a.c_str());
  return smoky::run_cli(static_cast<int>(argv.size()), argv.data());
}

}  // namespace

TEST_CASE("help and usage errors") {
  CHECK(cli({"--help"}) == 0);
  CHECK(cli({"run", "--help"}) == 0);
  CHECK(cli({}) == 1);
  CHECK(cli({"frobnicate"}) == 1);
  CHECK(cli({"run", "--video"}) == 1);
  CHECK(cli({"budget", "--size", "33"}) == 1);
  CHECK(cli({"evaluate", "--annotations", "x.jsonl", "--agg", "median"}) == 1);
}

TEST_CASE("missing inputs are I/O failures and leave no output") {
  TempDir dir;
  const auto out = (dir / "out").string();
  CHECK(cli({"run", "--video", (dir / "nope").string(), "--out", out, "--set",
             "refiner_enabled=false"}) == 2);
  CHECK_FALSE(std::filesystem::exists(out));
  CHECK(cli({"evaluate", "--verdicts", (dir / "v.jsonl").string(), "--annotations",
             (dir / "a.jsonl").string()}) == 2);
}

TEST_CASE("pipeline without refiner, evaluation and rendering") {
  TempDir dir;
  const auto video = (dir / "video").string();
  REQUIRE(cli({"fixture", "--out", video, "--preset", "demo", "--seed", "2"}) == 0);
  CHECK(cli({"run", "--video", video, "--out", (dir / "run").string(), "--set",
             "refiner_enabled=false"}) == 0);
  const auto verdicts = (dir / "run" / "fixture.verdicts.jsonl").string();
  CHECK(std::filesystem::exists(verdicts));
  CHECK(cli({"evaluate", "--verdicts", verdicts, "--annotations", video + "/segments.jsonl",
             "--detections", (dir / "run" / "fixture.detections.jsonl").string(), "--out",
             (dir / "report.json").string()}) == 0);
  CHECK(read_text(dir / "report.json").find("\"sweep\"") != std::string::npos);
  CHECK(cli({"render", "--video", video, "--verdicts", verdicts, "--out",
             (dir / "overlay").string()}) == 0);
  CHECK(std::filesystem::exists(dir / "overlay"));
  CHECK(cli({"detect", "--video", video, "--out", (dir / "d.jsonl").string()}) == 0);
  CHECK(cli({"match", "--detections", (dir / "d.jsonl").string(), "--out",
             (dir / "m.jsonl").string()}) == 0);
  // refiner requested without a checkpoint
  CHECK(cli({"run", "--video", video, "--out", (dir / "run2").string()}) == 1);
  CHECK_FALSE(std::filesystem::exists(dir / "run2"));
}

TEST_CASE("budget command writes a reloadable architecture") {
  TempDir dir;
  const auto arch = (dir / "tiny.arch").string();
  CHECK(cli({"budget", "--arch", "yolov5tiny", "--write", arch}) == 0);
  CHECK(cli({"budget", "--arch", arch, "--per-layer"}) == 0);
  write_text(dir / "bad.arch", "garbage\n");
  CHECK(cli({"budget", "--arch", (dir / "bad.arch").string()}) == 1);
}
