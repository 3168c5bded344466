#include "smoky/cli.hpp"

#include <atomic>
#include <cstdio>
#include <exception>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "smoky/architecture.hpp"
#include "smoky/config.hpp"
#include "smoky/errors.hpp"
#include "smoky/evaluation.hpp"
#include "smoky/fixture.hpp"
#include "smoky/json_util.hpp"

namespace smoky {

namespace fs = std::filesystem;
using nlohmann::json;

int render_overlays(const VideoSource& video, const std::vector<FrameVerdict>& verdicts,
                    const fs::path& out_dir) {
  const Rgb green{40, 220, 60};
  const Rgb yellow{250, 220, 30};
  int written = 0;
  for (const auto& v : verdicts) {
    if (v.pairs.empty() && v.dropped.empty()) continue;
    if (v.frame_index < 0 || v.frame_index >= video.num_frames()) {
      throw RangeError("verdict frame " + std::to_string(v.frame_index) + " outside the video");
    }
    if (written == 0) fs::create_directories(out_dir);
    Image img = video.frame(v.frame_index);
    for (const auto& d : v.dropped) img.draw_box(d.smoke.box, yellow);
    for (const auto& p : v.pairs) {
      img.draw_box(p.smoke.box, green);
      if (p.vehicle) {
        img.draw_box(p.vehicle->box, green);
        img.draw_line(p.smoke.box.center(), p.vehicle->box.center(), green);
      }
    }
    write_ppm(img, out_dir / frame_file_name(v.frame_index));
    ++written;
  }
  return written;
}

namespace {

/// Removes outputs created by a failed command.
class OutputGuard {
 public:
  void track(const fs::path& p) {
    if (!fs::exists(p)) created_.push_back(p);
  }
  void commit() { created_.clear(); }
  ~OutputGuard() {
    for (auto it = created_.rbegin(); it != created_.rend(); ++it) {
      std::error_code ec;
      fs::remove_all(*it, ec);
    }
  }

 private:
  std::vector<fs::path> created_;
};

struct CommonFlags {
  std::string config;
  std::optional<double> smoke_thresh;
  std::optional<double> l_dist;
  std::optional<int> k;
  std::optional<std::string> refiner;
  std::optional<std::uint64_t> seed;
  std::optional<int> jobs;
  std::vector<std::string> sets;
};

RunConfig build_config(const CommonFlags& f) {
  RunConfig c = f.config.empty() ? RunConfig{} : load_run_config(f.config);
  const auto num = [](double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
  };
  for (const auto& s : f.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + s + "'");
    apply_setting(c, s.substr(0, eq), s.substr(eq + 1));
  }
  if (f.smoke_thresh) apply_setting(c, "smoke_threshold", num(*f.smoke_thresh));
  if (f.l_dist) apply_setting(c, "l_dist", num(*f.l_dist));
  if (f.k) apply_setting(c, "k", std::to_string(*f.k));
  if (f.refiner) apply_setting(c, "refiner_variant", *f.refiner);
  if (f.seed) apply_setting(c, "seed", std::to_string(*f.seed));
  if (f.jobs) apply_setting(c, "jobs", std::to_string(*f.jobs));
  c.validate();
  return c;
}

void add_config_flag(CLI::App* app, CommonFlags& f) {
  app->add_option("--config", f.config, "key = value config file (see README for keys)");
  app->add_option("--set", f.sets, "override one config key: --set key=value (repeatable)");
}
void add_thresh_flag(CLI::App* app, CommonFlags& f) {
  app->add_option("--smoke-thresh", f.smoke_thresh, "smoke detection threshold (default 0.2)");
}
void add_ldist_flag(CLI::App* app, CommonFlags& f) {
  app->add_option("--l-dist", f.l_dist, "proximity matching limit in pixels (default 50)");
}
void add_k_flag(CLI::App* app, CommonFlags& f) {
  app->add_option("--k", f.k, "clip length in frames (default 3)");
}
void add_refiner_flag(CLI::App* app, CommonFlags& f) {
  app->add_option("--refiner", f.refiner, "refiner head: prefix3d, suffix3d, avg2d, cat2d (default suffix3d)")
      ->check(CLI::IsMember({"prefix3d", "suffix3d", "avg2d", "cat2d"}));
}
void add_seed_flag(CLI::App* app, CommonFlags& f) {
  app->add_option("--seed", f.seed, "random seed (default 0)");
}

std::unique_ptr<DetectorHandle> make_detector(const std::string& spec, DetectorRole role,
                                              const fs::path& video_dir,
                                              const VideoSource& video, double nms_iou) {
  std::unique_ptr<DetectorHandle> h;
  if (spec == "oracle") {
    const auto truth_path = video_dir / "truth.jsonl";
    if (!fs::exists(truth_path)) {
      throw IoError("oracle detector needs " + truth_path.string());
    }
    h = std::make_unique<OracleDetector>(read_truth(truth_path, video.num_frames()), role);
  } else if (spec.rfind("stream:", 0) == 0) {
    h = std::make_unique<StreamDetector>(spec.substr(7), role);
  } else if (spec.rfind("yolo:", 0) == 0) {
    h = YoloDetector::from_checkpoint(spec.substr(5), video.width(), video.height());
  } else {
    throw ConfigError("unknown detector '" + spec + "' (expected oracle, stream:<file> or yolo:<checkpoint>)");
  }
  h->set_nms_iou(nms_iou);
  return h;
}

FrameLabelSet labels_for(const fs::path& video_dir, const VideoSource& video) {
  const auto path = video_dir / "segments.jsonl";
  if (!fs::exists(path)) throw IoError("missing segment annotations " + path.string());
  for (const auto& a : load_segment_annotations(path)) {
    if (a.video == video.id()) {
      if (a.num_frames != video.num_frames()) {
        throw ValidationError(path.string() + ": num_frames differs from the video");
      }
      return expand_segments(a);
    }
  }
  throw ValidationError(path.string() + " has no record for video '" + video.id() + "'");
}

// --- fixture -------------------------------------------------------------

struct FixtureArgs {
  std::string out;
  std::string preset = "demo";
  std::string script;
  std::uint64_t seed = 0;
  std::string video_id;
  std::string scene;
};

ScenarioSpec preset_spec(const std::string& name) {
  ScenarioSpec s;
  if (name == "demo") {
    s.num_frames = 60;
    s.smoke_with_vehicle = 1;
    s.smoke_without_vehicle = 1;
    s.shadow_decoys = 1;
    s.vehicle_only = 1;
    s.event_length = 12;
  } else if (name == "training") {
    s.num_frames = 160;
    s.smoke_with_vehicle = 4;
    s.smoke_without_vehicle = 2;
    s.shadow_decoys = 4;
  } else if (name != "acceptance") {
    throw ConfigError("unknown preset '" + name + "'");
  }
  return s;
}

int cmd_fixture(const FixtureArgs& a) {
  FixtureScript script;
  if (!a.script.empty()) {
    script = script_from_json(read_json_file(a.script));
  } else {
    auto spec = preset_spec(a.preset);
    if (!a.video_id.empty()) spec.video_id = a.video_id;
    if (!a.scene.empty()) spec.scene_id = a.scene;
    script = make_scenario(spec, a.seed);
  }
  if (!a.video_id.empty()) script.video_id = a.video_id;
  if (!a.scene.empty()) script.scene_id = a.scene;
  const FixtureVideo video(script, a.seed);
  OutputGuard guard;
  guard.track(a.out);
  write_fixture(video, a.out);
  guard.commit();
  std::cout << "fixture " << video.id() << ": " << video.num_frames() << " frames, "
            << script.events.size() << " events -> " << a.out << "\n";
  return 0;
}

// --- detect / match ------------------------------------------------------

struct DetectArgs {
  CommonFlags flags;
  std::string video;
  std::string out;
  std::string role = "both";
};

int cmd_detect(const DetectArgs& a) {
  const RunConfig cfg = build_config(a.flags);
  const PpmDirectoryVideo video(a.video);
  std::unique_ptr<DetectorHandle> smoke;
  std::unique_ptr<DetectorHandle> vehicle;
  if (a.role != "vehicle") {
    smoke = make_detector(cfg.smoke_detector, DetectorRole::smoke, a.video, video, cfg.nms_iou);
  }
  if (a.role != "smoke") {
    vehicle = make_detector(cfg.vehicle_detector, DetectorRole::vehicle, a.video, video, cfg.nms_iou);
  }
  std::vector<ScoredDetection> all;
  for (int i = 0; i < video.num_frames(); ++i) {
    const Image frame = video.frame(i);
    if (smoke) {
      for (auto& d : run_detector(*smoke, frame, i, cfg.cascade.smoke_threshold)) all.push_back(d);
    }
    if (vehicle) {
      for (auto& d : run_detector(*vehicle, frame, i, cfg.cascade.vehicle_threshold)) all.push_back(d);
    }
  }
  OutputGuard guard;
  guard.track(a.out);
  write_detection_stream(all, a.out);
  guard.commit();
  std::cout << all.size() << " detections -> " << a.out << "\n";
  return 0;
}

struct MatchArgs {
  CommonFlags flags;
  std::string detections;
  std::string out;
};

int cmd_match(const MatchArgs& a) {
  const RunConfig cfg = build_config(a.flags);
  std::map<int, std::pair<std::vector<ScoredDetection>, std::vector<ScoredDetection>>> frames;
  for (const auto& d : read_detection_stream(a.detections)) {
    auto& f = frames[d.frame_index];
    (d.category == Category::smoke ? f.first : f.second).push_back(d);
  }
  OutputGuard guard;
  guard.track(a.out);
  JsonLineWriter out(a.out);
  int matched = 0, total = 0;
  for (const auto& [frame, f] : frames) {
    for (const auto& s : f.first) {
      const auto m = match_smoke_to_vehicles(s, f.second, cfg.cascade.match);
      ++total;
      if (m.vehicle) ++matched;
      json rec = {{"frame", frame},
                  {"smoke", box_to_json(s.box)},
                  {"smoke_score", s.score},
                  {"rule", std::string(to_string(m.rule))},
                  {"detail", m.score_detail}};
      rec["vehicle"] = m.vehicle ? box_to_json(m.vehicle->box) : json(nullptr);
      rec["vehicle_category"] =
          m.vehicle ? json(std::string(to_string(m.vehicle->category))) : json(nullptr);
      out.write(rec);
    }
  }
  out.close();
  guard.commit();
  std::cout << matched << " of " << total << " smoke detections matched -> " << a.out << "\n";
  return 0;
}

// --- collect-clips / train-refiner ---------------------------------------

struct CollectArgs {
  CommonFlags flags;
  std::vector<std::string> videos;
  std::string out;
};

int cmd_collect(const CollectArgs& a) {
  const RunConfig cfg = build_config(a.flags);
  std::vector<ClipSample> clips;
  for (const auto& dir : a.videos) {
    const PpmDirectoryVideo video(dir);
    const auto labels = labels_for(dir, video);
    auto smoke = make_detector(cfg.smoke_detector, DetectorRole::smoke, dir, video, cfg.nms_iou);
    auto vehicle = make_detector(cfg.vehicle_detector, DetectorRole::vehicle, dir, video, cfg.nms_iou);
    auto more = collect_training_clips(cfg.cascade, video, labels, *smoke, *vehicle);
    clips.insert(clips.end(), std::make_move_iterator(more.begin()),
                 std::make_move_iterator(more.end()));
  }
  OutputGuard guard;
  guard.track(a.out);
  write_clip_dataset(clips, a.out);
  guard.commit();
  int pos = 0;
  for (const auto& c : clips) pos += c.label == ClipLabel::smoke ? 1 : 0;
  std::cout << clips.size() << " clips (" << pos << " smoke, " << clips.size() - pos
            << " non_smoke) -> " << a.out << "\n";
  return 0;
}

struct TrainArgs {
  CommonFlags flags;
  std::vector<std::string> clip_dirs;
  std::string out;
  std::string history;
  std::optional<int> epochs;
  std::optional<int> width;
  std::optional<double> target_accuracy;
};

int cmd_train(const TrainArgs& a) {
  RunConfig cfg = build_config(a.flags);
  if (a.epochs) apply_setting(cfg, "epochs", std::to_string(*a.epochs));
  if (a.width) apply_setting(cfg, "refiner_width", std::to_string(*a.width));
  cfg.validate();
  std::vector<ClipSample> clips;
  for (const auto& dir : a.clip_dirs) {
    auto more = read_clip_dataset(dir);
    clips.insert(clips.end(), std::make_move_iterator(more.begin()),
                 std::make_move_iterator(more.end()));
  }
  if (clips.empty()) throw ValidationError("no training clips found");
  TemporalHeadSpec spec;
  spec.variant = cfg.refiner_variant;
  spec.k = cfg.cascade.clip.k;
  spec.base_width = cfg.refiner_width;
  TemporalHead head(spec, cfg.seed);
  TrainSchedule schedule = cfg.schedule;
  schedule.seed = cfg.seed;
  schedule.stop_at_accuracy = a.target_accuracy;
  const auto history = train_head(head, clips, cfg.cascade.clip, schedule);

  OutputGuard guard;
  guard.track(a.out);
  if (!a.history.empty()) guard.track(a.history);
  head.save(a.out, cfg.cascade.clip);
  if (!a.history.empty()) {
    JsonLineWriter h(a.history);
    for (const auto& r : history) {
      h.write({{"epoch", r.epoch}, {"lr", r.learning_rate}, {"loss", r.loss}, {"accuracy", r.accuracy}});
    }
    h.close();
  }
  guard.commit();
  for (const auto& r : history) {
    std::printf("epoch %2d  lr %.6g  loss %.4f  accuracy %.4f\n", r.epoch, r.learning_rate, r.loss,
                r.accuracy);
  }
  std::cout << "refiner " << to_string(spec.variant) << " (K=" << spec.k << ") -> " << a.out << "\n";
  return 0;
}

// --- run -----------------------------------------------------------------

struct RunArgs {
  CommonFlags flags;
  std::vector<std::string> videos;
  std::string out;
};

struct RunOutcome {
  std::string video_id;
  int frames = 0;
  int positive = 0;
  std::exception_ptr error;
};

int cmd_run(const RunArgs& a) {
  const RunConfig cfg = build_config(a.flags);
  const bool use_refiner = cfg.cascade.refiner_enabled;
  if (use_refiner && cfg.refiner_checkpoint.empty()) {
    throw ConfigError("refiner_enabled is true but no refiner_checkpoint is configured");
  }
  // Fail on configuration problems before any output is written.
  if (use_refiner) {
    const auto [head, clip] = TemporalHead::load(cfg.refiner_checkpoint);
    if (a.flags.refiner && head.spec().variant != cfg.refiner_variant) {
      throw ConfigError("checkpoint holds a " + std::string(to_string(head.spec().variant)) +
                        " refiner, not " + std::string(to_string(cfg.refiner_variant)));
    }
    if (head.k() != cfg.cascade.clip.k) {
      throw ConfigError("refiner checkpoint has K = " + std::to_string(head.k()) +
                        " but the run uses K = " + std::to_string(cfg.cascade.clip.k));
    }
  }
  std::vector<std::unique_ptr<PpmDirectoryVideo>> videos;
  std::set<std::string> ids;
  for (const auto& dir : a.videos) {
    videos.push_back(std::make_unique<PpmDirectoryVideo>(dir));
    if (!ids.insert(videos.back()->id()).second) {
      throw ValidationError("video id '" + videos.back()->id() + "' given twice");
    }
  }

  OutputGuard guard;
  guard.track(a.out);
  fs::create_directories(a.out);
  const fs::path out_dir(a.out);
  for (const auto& v : videos) {
    guard.track(out_dir / (v->id() + ".verdicts.jsonl"));
    guard.track(out_dir / (v->id() + ".detections.jsonl"));
  }

  std::vector<RunOutcome> outcomes(videos.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (std::size_t i = next++; i < videos.size(); i = next++) {
      auto& o = outcomes[i];
      const auto& video = *videos[i];
      o.video_id = video.id();
      try {
        auto smoke = make_detector(cfg.smoke_detector, DetectorRole::smoke, video.directory(),
                                   video, cfg.nms_iou);
        auto vehicle = make_detector(cfg.vehicle_detector, DetectorRole::vehicle,
                                     video.directory(), video, cfg.nms_iou);
        std::optional<TemporalHead> head;
        if (use_refiner) head.emplace(TemporalHead::load(cfg.refiner_checkpoint).first);
        const auto run = process_video(cfg.cascade, video, *smoke, *vehicle,
                                       head ? &*head : nullptr);
        write_verdicts(run.video_id, run.verdicts, out_dir / (run.video_id + ".verdicts.jsonl"));
        write_detection_stream(run.detections, out_dir / (run.video_id + ".detections.jsonl"));
        o.frames = static_cast<int>(run.verdicts.size());
        for (const auto& v : run.verdicts) o.positive += v.verdict ? 1 : 0;
      } catch (...) {
        o.error = std::current_exception();
      }
    }
  };
  const int jobs = std::min<int>(cfg.jobs, static_cast<int>(videos.size()));
  if (jobs <= 1) {
    worker();
  } else {
    std::vector<std::thread> threads;
    for (int j = 0; j < jobs; ++j) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
  }
  for (const auto& o : outcomes) {
    if (o.error) std::rethrow_exception(o.error);
  }
  guard.commit();
  for (const auto& o : outcomes) {
    std::cout << o.video_id << ": " << o.positive << " of " << o.frames
              << " frames smoky -> " << (out_dir / (o.video_id + ".verdicts.jsonl")).string() << "\n";
  }
  return 0;
}

// --- evaluate ------------------------------------------------------------

struct EvalArgs {
  std::vector<std::string> verdicts;
  std::vector<std::string> annotations;
  std::vector<std::string> detections;
  std::vector<double> thresholds{0.2, 0.5};
  std::string scenes;
  std::string agg = "pooled";
  std::string out;
};

std::string stream_video_id(const fs::path& p) {
  const auto name = p.filename().string();
  const auto pos = name.find(".detections");
  if (pos == std::string::npos || pos == 0) {
    throw ValidationError(p.string() + ": detection stream names must look like <video>.detections.jsonl");
  }
  return name.substr(0, pos);
}

int cmd_evaluate(const EvalArgs& a) {
  if (a.verdicts.empty() && a.detections.empty()) {
    throw ValidationError("evaluate needs --verdicts and/or --detections");
  }
  const auto mode = parse_aggregation(a.agg);
  std::vector<VideoAnnotation> annotations;
  for (const auto& f : a.annotations) {
    auto more = load_segment_annotations(f);
    annotations.insert(annotations.end(), more.begin(), more.end());
  }
  std::map<std::string, std::string> scenes;
  if (!a.scenes.empty()) {
    const json j = read_json_file(a.scenes);
    if (!j.is_object()) throw ValidationError(a.scenes + ": expected {video: scene}");
    for (const auto& [k, v] : j.items()) scenes[k] = v.get<std::string>();
  }
  json record;
  if (!a.verdicts.empty()) {
    std::vector<VideoVerdicts> runs;
    for (const auto& f : a.verdicts) {
      const auto vf = read_verdicts(f);
      VideoVerdicts r{vf.video_id, {}};
      for (const auto& v : vf.verdicts) r.verdicts.push_back(v.verdict);
      runs.push_back(std::move(r));
    }
    const auto report = evaluate_run(runs, annotations, scenes, mode);
    std::cout << format_report(report);
    record["report"] = report_to_json(report);
  }
  if (!a.detections.empty()) {
    std::map<std::string, const VideoAnnotation*> by_id;
    for (const auto& an : annotations) by_id[an.video] = &an;
    std::vector<LabelledStream> streams;
    std::set<std::string> unmatched;
    for (const auto& f : a.detections) {
      const auto id = stream_video_id(f);
      const auto it = by_id.find(id);
      if (it == by_id.end()) {
        unmatched.insert(id);
        continue;
      }
      streams.push_back({read_detection_stream(f), expand_segments(*it->second)});
    }
    if (!unmatched.empty()) {
      std::string ids;
      for (const auto& id : unmatched) ids += (ids.empty() ? "" : ", ") + id;
      throw ValidationError("no annotation for detection streams of [" + ids + "]");
    }
    const auto rows = threshold_sweep(streams, a.thresholds);
    std::cout << format_sweep(rows);
    record["sweep"] = sweep_to_json(rows);
  }
  if (!a.out.empty()) {
    OutputGuard guard;
    guard.track(a.out);
    write_json_file(record, a.out);
    guard.commit();
  }
  return 0;
}

// --- render / budget -----------------------------------------------------

struct RenderArgs {
  std::string video;
  std::string verdicts;
  std::string out;
};

int cmd_render(const RenderArgs& a) {
  const PpmDirectoryVideo video(a.video);
  const auto vf = read_verdicts(a.verdicts);
  if (vf.video_id != video.id()) {
    throw ValidationError("verdicts are for video '" + vf.video_id + "' but the video is '" +
                          video.id() + "'");
  }
  OutputGuard guard;
  guard.track(a.out);
  const int n = render_overlays(video, vf.verdicts, a.out);
  guard.commit();
  std::cout << n << " frames rendered -> " << a.out << "\n";
  return 0;
}

struct BudgetArgs {
  std::string arch = "yolov5tiny";
  int size = 640;
  bool ghost_necks = false;
  bool ghost_outer = false;
  bool per_layer = false;
  std::string write;
};

int cmd_budget(const BudgetArgs& a) {
  ArchitectureSpec spec;
  if (a.arch == "yolov5tiny") {
    TinyOptions o;
    o.ghost_neck_convs = a.ghost_necks;
    o.ghost_outer = a.ghost_outer;
    spec = build_yolov5tiny(o);
  } else if (a.arch == "yolov5n") {
    spec = build_yolov5n();
  } else {
    std::ifstream in(a.arch);
    if (!in) throw IoError("cannot read architecture file " + a.arch);
    std::stringstream buf;
    buf << in.rdbuf();
    spec = architecture_from_text(buf.str());
  }
  if (a.size < 32 || a.size % 32 != 0) throw ConfigError("--size must be a positive multiple of 32");
  const auto total = compute_budget(spec, a.size, a.size);
  if (a.per_layer) {
    const auto layers = layer_budgets(spec, a.size, a.size);
    const auto shapes = infer_shapes(spec, a.size, a.size);
    for (std::size_t i = 0; i < layers.size(); ++i) {
      std::printf("%3zu %-10s %4d x %3d x %3d  params %9lld  MACs %12lld\n", i,
                  std::string(to_string(spec.layers[i].type)).c_str(), shapes[i].channels,
                  shapes[i].height, shapes[i].width, static_cast<long long>(layers[i].parameters),
                  static_cast<long long>(layers[i].macs));
    }
  }
  std::printf("architecture: %s\ninput: %dx%d\nparameters: %lld (%.3fM)\nFLOPs: %.3f G (2 x MACs)\n",
              spec.name.c_str(), a.size, a.size, static_cast<long long>(total.parameters),
              static_cast<double>(total.parameters) / 1e6, total.flops() / 1e9);
  if (!a.write.empty()) {
    OutputGuard guard;
    guard.track(a.write);
    std::ofstream out(a.write);
    if (!(out << to_text(spec))) throw IoError("cannot write " + a.write);
    out.close();
    guard.commit();
  }
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"Coarse-to-fine smoky vehicle detection toolkit", "smoky"};
  app.require_subcommand(1, 1);

  FixtureArgs fx;
  auto* fixture = app.add_subcommand("fixture", "Render a synthetic fixture video with ground truth");
  fixture->add_option("--out", fx.out, "output directory")->required();
  fixture->add_option("--preset", fx.preset, "scenario preset: demo, acceptance, training")
      ->capture_default_str()
      ->check(CLI::IsMember({"demo", "acceptance", "training"}));
  fixture->add_option("--script", fx.script, "explicit script.json (overrides --preset)");
  fixture->add_option("--seed", fx.seed, "random seed")->capture_default_str();
  fixture->add_option("--video-id", fx.video_id, "video id (default: fixture)");
  fixture->add_option("--scene", fx.scene, "scene id (default: synthetic)");

  DetectArgs det;
  auto* detect = app.add_subcommand("detect", "Run the smoke and/or vehicle detector over a video");
  add_config_flag(detect, det.flags);
  add_thresh_flag(detect, det.flags);
  detect->add_option("--video", det.video, "video directory")->required();
  detect->add_option("--out", det.out, "detection stream file")->required();
  detect->add_option("--role", det.role, "smoke, vehicle or both")
      ->capture_default_str()
      ->check(CLI::IsMember({"smoke", "vehicle", "both"}));

  MatchArgs mt;
  auto* match = app.add_subcommand("match", "Match smoke detections to vehicles in a detection stream");
  add_config_flag(match, mt.flags);
  add_ldist_flag(match, mt.flags);
  match->add_option("--detections", mt.detections, "detection stream with smoke and vehicle records")
      ->required();
  match->add_option("--out", mt.out, "match records file")->required();

  CollectArgs col;
  auto* collect = app.add_subcommand("collect-clips", "Collect labelled refiner training clips");
  add_config_flag(collect, col.flags);
  add_thresh_flag(collect, col.flags);
  add_ldist_flag(collect, col.flags);
  add_k_flag(collect, col.flags);
  collect->add_option("--video", col.videos, "video directory with segments.jsonl (repeatable)")
      ->required();
  collect->add_option("--out", col.out, "clip dataset directory")->required();

  TrainArgs tr;
  auto* train = app.add_subcommand("train-refiner", "Train the clip classifier");
  add_config_flag(train, tr.flags);
  add_k_flag(train, tr.flags);
  add_refiner_flag(train, tr.flags);
  add_seed_flag(train, tr.flags);
  train->add_option("--clips", tr.clip_dirs, "clip dataset directory (repeatable)")->required();
  train->add_option("--out", tr.out, "checkpoint file")->required();
  train->add_option("--epochs", tr.epochs, "training epochs (default 10)");
  train->add_option("--width", tr.width, "backbone base width (default 64)");
  train->add_option("--target-accuracy", tr.target_accuracy,
                    "stop once training accuracy reaches this value");
  train->add_option("--history", tr.history, "per-epoch history file (JSON lines)");

  RunArgs rn;
  auto* run = app.add_subcommand("run", "Run the full cascade and write verdicts");
  add_config_flag(run, rn.flags);
  add_thresh_flag(run, rn.flags);
  add_ldist_flag(run, rn.flags);
  add_k_flag(run, rn.flags);
  add_refiner_flag(run, rn.flags);
  add_seed_flag(run, rn.flags);
  run->add_option("--jobs", rn.flags.jobs, "videos processed in parallel (default 1)");
  run->add_option("--video", rn.videos, "video directory (repeatable)")->required();
  run->add_option("--out", rn.out, "output directory")->required();

  EvalArgs ev;
  auto* evaluate = app.add_subcommand("evaluate", "Frame-level DR, FAR, precision and F1");
  evaluate->add_option("--verdicts", ev.verdicts, "verdict file (repeatable)");
  evaluate->add_option("--annotations", ev.annotations, "segment annotation file (repeatable)")
      ->required();
  evaluate->add_option("--detections", ev.detections,
                       "<video>.detections.jsonl for a threshold sweep (repeatable)");
  evaluate->add_option("--thresholds", ev.thresholds, "sweep thresholds")
      ->delimiter(',')
      ->capture_default_str();
  evaluate->add_option("--scenes", ev.scenes, "JSON object mapping video id to scene id");
  evaluate->add_option("--agg", ev.agg, "aggregation: pooled or scene")
      ->capture_default_str()
      ->check(CLI::IsMember({"pooled", "scene"}));
  evaluate->add_option("--out", ev.out, "machine-readable report (JSON)");

  RenderArgs rd;
  auto* render = app.add_subcommand("render", "Draw verdict overlays (green kept, yellow dropped)");
  render->add_option("--video", rd.video, "video directory")->required();
  render->add_option("--verdicts", rd.verdicts, "verdict file")->required();
  render->add_option("--out", rd.out, "output directory")->required();

  BudgetArgs bg;
  auto* budget = app.add_subcommand("budget", "Analytic parameter and FLOP count of a detector");
  budget->add_option("--arch", bg.arch, "yolov5tiny, yolov5n or an architecture file")
      ->capture_default_str();
  budget->add_option("--size", bg.size, "square input size")->capture_default_str();
  budget->add_flag("--ghost-necks", bg.ghost_necks, "yolov5tiny: ghost the plain neck convolutions");
  budget->add_flag("--ghost-outer", bg.ghost_outer, "yolov5tiny: ghost the C3Ghost outer convolutions");
  budget->add_flag("--per-layer", bg.per_layer, "print every layer");
  budget->add_option("--write", bg.write, "write the architecture as text");

  std::string keys = "Config keys (--config file or --set key=value):\n";
  for (const auto& k : config_keys()) {
    keys += "  " + k.name + " = " + (k.default_value.empty() ? "\"\"" : k.default_value) + "\n      " +
            k.help + "\n";
  }
  for (auto* sub : {detect, match, collect, train, run}) sub->footer(keys);
  app.footer("Exit codes: 0 success, 1 invalid input or configuration, 2 I/O failure.");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (*fixture) return cmd_fixture(fx);
    if (*detect) return cmd_detect(det);
    if (*match) return cmd_match(mt);
    if (*collect) return cmd_collect(col);
    if (*train) return cmd_train(tr);
    if (*run) return cmd_run(rn);
    if (*evaluate) return cmd_evaluate(ev);
    if (*render) return cmd_render(rd);
    if (*budget) return cmd_budget(bg);
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}

}  // namespace smoky
