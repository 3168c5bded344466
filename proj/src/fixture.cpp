#include "smoky/fixture.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "smoky/errors.hpp"
#include "smoky/json_util.hpp"
#include "smoky/seed.hpp"

namespace smoky {

using nlohmann::json;

std::string_view to_string(EventKind k) noexcept {
  switch (k) {
    case EventKind::smoke_with_vehicle: return "smoke_with_vehicle";
    case EventKind::smoke_without_vehicle: return "smoke_without_vehicle";
    case EventKind::shadow_decoy: return "shadow_decoy";
    case EventKind::vehicle_only: return "vehicle_only";
  }
  return "smoke_with_vehicle";
}

EventKind parse_event_kind(std::string_view name) {
  if (name == "smoke_with_vehicle") return EventKind::smoke_with_vehicle;
  if (name == "smoke_without_vehicle") return EventKind::smoke_without_vehicle;
  if (name == "shadow_decoy") return EventKind::shadow_decoy;
  if (name == "vehicle_only") return EventKind::vehicle_only;
  throw ValidationError("unknown event kind '" + std::string(name) + "'");
}

std::string_view to_string(ObjectRole r) noexcept {
  switch (r) {
    case ObjectRole::smoke: return "smoke";
    case ObjectRole::vehicle: return "vehicle";
    case ObjectRole::decoy: return "decoy";
  }
  return "smoke";
}

ObjectRole parse_object_role(std::string_view name) {
  if (name == "smoke") return ObjectRole::smoke;
  if (name == "vehicle") return ObjectRole::vehicle;
  if (name == "decoy") return ObjectRole::decoy;
  throw ValidationError("unknown object role '" + std::string(name) + "'");
}

namespace {

bool has_companion(const PlantedEvent& e) {
  return e.kind == EventKind::smoke_with_vehicle ||
         (e.kind == EventKind::shadow_decoy && e.with_vehicle);
}

BoundingBox primary_box(const PlantedEvent& e, int frame) {
  const double t = frame - e.start_frame;
  const double x = e.x + e.vx * t;
  const double y = e.y + e.vy * t;
  return BoundingBox::make(x, y, x + e.width, y + e.height);
}

BoundingBox companion_box(const PlantedEvent& e, const BoundingBox& primary) {
  const double vw = e.vehicle_width > 0 ? e.vehicle_width : 1.5 * e.width;
  const double vh = e.vehicle_height > 0 ? e.vehicle_height : 1.2 * e.width;
  const double cx = primary.center().x;
  const double bottom = primary.y1() - e.vehicle_gap;
  return BoundingBox::make(cx - vw / 2, bottom - vh, cx + vw / 2, bottom);
}

std::string event_name(const FixtureScript& s, std::size_t i) {
  std::ostringstream os;
  os << "event " << i << " (" << to_string(s.events[i].kind) << ")";
  return os.str();
}

Rgb vehicle_color(Category c) {
  switch (c) {
    case Category::bus: return {40, 70, 180};
    case Category::truck: return {205, 170, 45};
    default: return {185, 45, 45};
  }
}

// First pixel index whose centre lies at or beyond v.
int pixel_edge(double v) { return static_cast<int>(std::ceil(v - 0.5)); }

}  // namespace

void validate_script(const FixtureScript& s) {
  if (s.width <= 0 || s.height <= 0) throw ValidationError("fixture frame size must be positive");
  if (s.num_frames <= 0) throw ValidationError("fixture needs at least one frame");
  if (s.noise_sigma < 0) throw ValidationError("noise sigma must be non-negative");
  for (std::size_t i = 0; i < s.events.size(); ++i) {
    const auto& e = s.events[i];
    if (e.start_frame < 0 || e.end_frame < e.start_frame || e.end_frame >= s.num_frames) {
      throw ValidationError(event_name(s, i) + ": frame range outside the video");
    }
    if (!(e.width > 0) || !(e.height > 0)) {
      throw ValidationError(event_name(s, i) + ": object size must be positive");
    }
    if (e.kind == EventKind::shadow_decoy && e.with_vehicle && !(e.vehicle_gap > 0)) {
      throw ValidationError(event_name(s, i) + ": shadow must be detached from its vehicle");
    }
    if (!is_vehicle(e.vehicle_category)) {
      throw ValidationError(event_name(s, i) + ": vehicle category must be car, bus or truck");
    }
    for (int f = e.start_frame; f <= e.end_frame; ++f) {
      const auto p = primary_box(e, f);
      if (!p.inside(s.width, s.height)) {
        throw ValidationError(event_name(s, i) + ": leaves the frame at frame " +
                              std::to_string(f));
      }
      if (has_companion(e) && !companion_box(e, p).inside(s.width, s.height)) {
        throw ValidationError(event_name(s, i) + ": vehicle leaves the frame at frame " +
                              std::to_string(f));
      }
    }
  }
}

VideoAnnotation script_segments(const FixtureScript& s) {
  std::vector<std::pair<int, int>> ranges;
  for (const auto& e : s.events) {
    if (e.kind == EventKind::smoke_with_vehicle) ranges.emplace_back(e.start_frame, e.end_frame);
  }
  std::sort(ranges.begin(), ranges.end());
  VideoAnnotation v{s.video_id, s.scene_id, s.num_frames, {}};
  for (const auto& [a, b] : ranges) {
    if (!v.segments.empty() && a <= v.segments.back().end_frame) {
      v.segments.back().end_frame = std::max(v.segments.back().end_frame, b);
    } else {
      v.segments.push_back({s.video_id, a, b, s.scene_id});
    }
  }
  return v;
}

std::vector<FrameTruth> script_truth(const FixtureScript& s) {
  std::vector<FrameTruth> truth(static_cast<std::size_t>(s.num_frames));
  for (std::size_t i = 0; i < s.events.size(); ++i) {
    const auto& e = s.events[i];
    const int idx = static_cast<int>(i);
    for (int f = e.start_frame; f <= e.end_frame; ++f) {
      auto& t = truth[static_cast<std::size_t>(f)];
      const auto p = primary_box(e, f);
      switch (e.kind) {
        case EventKind::smoke_with_vehicle:
        case EventKind::smoke_without_vehicle:
          t.push_back({ObjectRole::smoke, Category::smoke, p, idx, e.kind});
          break;
        case EventKind::shadow_decoy:
          t.push_back({ObjectRole::decoy, Category::smoke, p, idx, e.kind});
          break;
        case EventKind::vehicle_only:
          t.push_back({ObjectRole::vehicle, e.vehicle_category, p, idx, e.kind});
          break;
      }
      if (has_companion(e)) {
        t.push_back({ObjectRole::vehicle, e.vehicle_category, companion_box(e, p), idx, e.kind});
      }
    }
  }
  return truth;
}

FixtureVideo::FixtureVideo(FixtureScript script, std::uint64_t seed)
    : script_(std::move(script)), seed_(seed) {
  validate_script(script_);
  truth_ = script_truth(script_);
  segments_ = script_segments(script_);
}

Image FixtureVideo::frame(int index) const {
  if (index < 0 || index >= script_.num_frames) throw RangeError("fixture frame out of range");
  Image img(script_.width, script_.height, {112, 112, 114});

  std::mt19937_64 noise_rng(seed_mix(seed_, static_cast<std::uint64_t>(index)));
  std::normal_distribution<double> noise(0.0, script_.noise_sigma);
  if (script_.noise_sigma > 0) {
    auto& px = img.bytes();
    for (std::size_t i = 0; i < px.size(); i += 3) {
      const double n = noise(noise_rng);
      for (int c = 0; c < 3; ++c) {
        px[i + c] = static_cast<std::uint8_t>(std::clamp(std::lround(px[i + c] + n), 0L, 255L));
      }
    }
  }

  const auto& objects = truth_[static_cast<std::size_t>(index)];
  // Painter's order: shadows, smoke, vehicles.
  for (const auto& o : objects) {
    if (o.role != ObjectRole::decoy) continue;
    img.fill_rect(pixel_edge(o.box.x1()), pixel_edge(o.box.y1()), pixel_edge(o.box.x2()), pixel_edge(o.box.y2()),
                  {34, 34, 38});
  }
  for (const auto& o : objects) {
    if (o.role != ObjectRole::smoke) continue;
    // Puff texture varies per frame and seed; the silhouette is the inscribed ellipse.
    std::mt19937_64 puff_rng(seed_mix(seed_mix(seed_, static_cast<std::uint64_t>(o.event) + 7919),
                                 static_cast<std::uint64_t>(index)));
    std::uniform_real_distribution<double> u(0.0, 1.0);
    struct Puff { double cx, cy, r, w; };
    std::vector<Puff> puffs(5);
    for (auto& p : puffs) p = {u(puff_rng), u(puff_rng), 0.15 + 0.25 * u(puff_rng), u(puff_rng)};
    const auto c = o.box.center();
    const double rx = o.box.width() / 2;
    const double ry = o.box.height() / 2;
    for (int y = pixel_edge(o.box.y1()); y < pixel_edge(o.box.y2()); ++y) {
      for (int x = pixel_edge(o.box.x1()); x < pixel_edge(o.box.x2()); ++x) {
        const double nx = (x + 0.5 - c.x) / rx;
        const double ny = (y + 0.5 - c.y) / ry;
        const double r2 = nx * nx + ny * ny;
        if (r2 >= 1.0) continue;
        double texture = 0.0;
        const double ux = (x + 0.5 - o.box.x1()) / o.box.width();
        const double uy = (y + 0.5 - o.box.y1()) / o.box.height();
        for (const auto& p : puffs) {
          const double d2 = (ux - p.cx) * (ux - p.cx) + (uy - p.cy) * (uy - p.cy);
          texture += p.w * std::exp(-d2 / (2 * p.r * p.r));
        }
        const double alpha = 0.55 * std::sqrt(1.0 - r2) * (0.6 + 0.4 * std::tanh(texture));
        img.blend(x, y, {72, 72, 76}, alpha);
      }
    }
  }
  for (const auto& o : objects) {
    if (o.role != ObjectRole::vehicle) continue;
    const int x1 = pixel_edge(o.box.x1());
    const int y1 = pixel_edge(o.box.y1());
    const int x2 = pixel_edge(o.box.x2());
    const int y2 = pixel_edge(o.box.y2());
    img.fill_rect(x1, y1, x2, y2, vehicle_color(o.category));
    const int inset = std::max(1, (x2 - x1) / 8);
    img.fill_rect(x1 + inset, y1 + inset, x2 - inset, y1 + inset + std::max(1, (y2 - y1) / 5),
                  {30, 40, 60});
  }
  return img;
}

Fixture generate_fixture(const FixtureScript& script, std::uint64_t seed) {
  FixtureVideo video(script, seed);
  Fixture out;
  out.frames.reserve(static_cast<std::size_t>(script.num_frames));
  for (int i = 0; i < script.num_frames; ++i) out.frames.push_back(video.frame(i));
  out.segments = video.segments();
  out.truth = video.truth();
  return out;
}

json script_to_json(const FixtureScript& s) {
  json events = json::array();
  for (const auto& e : s.events) {
    events.push_back({{"kind", std::string(to_string(e.kind))},
                      {"start", e.start_frame},
                      {"end", e.end_frame},
                      {"x", e.x},
                      {"y", e.y},
                      {"w", e.width},
                      {"h", e.height},
                      {"vx", e.vx},
                      {"vy", e.vy},
                      {"vehicle_category", std::string(to_string(e.vehicle_category))},
                      {"vehicle_w", e.vehicle_width},
                      {"vehicle_h", e.vehicle_height},
                      {"vehicle_gap", e.vehicle_gap},
                      {"with_vehicle", e.with_vehicle}});
  }
  return {{"video", s.video_id},       {"scene", s.scene_id},
          {"width", s.width},          {"height", s.height},
          {"num_frames", s.num_frames}, {"noise_sigma", s.noise_sigma},
          {"events", events}};
}

FixtureScript script_from_json(const json& j) {
  FixtureScript s;
  try {
    s.video_id = j.value("video", s.video_id);
    s.scene_id = j.value("scene", s.scene_id);
    s.width = j.at("width").get<int>();
    s.height = j.at("height").get<int>();
    s.num_frames = j.at("num_frames").get<int>();
    s.noise_sigma = j.value("noise_sigma", s.noise_sigma);
    for (const auto& je : j.value("events", json::array())) {
      PlantedEvent e;
      e.kind = parse_event_kind(je.at("kind").get<std::string>());
      e.start_frame = je.at("start").get<int>();
      e.end_frame = je.at("end").get<int>();
      e.x = je.at("x").get<double>();
      e.y = je.at("y").get<double>();
      e.width = je.value("w", e.width);
      e.height = je.value("h", e.height);
      e.vx = je.value("vx", 0.0);
      e.vy = je.value("vy", 0.0);
      e.vehicle_category =
          parse_category(je.value("vehicle_category", std::string(to_string(e.vehicle_category))));
      e.vehicle_width = je.value("vehicle_w", 0.0);
      e.vehicle_height = je.value("vehicle_h", 0.0);
      e.vehicle_gap = je.value("vehicle_gap", e.vehicle_gap);
      e.with_vehicle = je.value("with_vehicle", true);
      s.events.push_back(e);
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("fixture script: ") + e.what());
  }
  return s;
}

void write_truth(const std::vector<FrameTruth>& truth, const std::filesystem::path& path) {
  JsonLineWriter w(path);
  for (std::size_t f = 0; f < truth.size(); ++f) {
    for (const auto& o : truth[f]) {
      w.write({{"frame", f},
               {"role", std::string(to_string(o.role))},
               {"category", std::string(to_string(o.category))},
               {"box", {o.box.x1(), o.box.y1(), o.box.x2(), o.box.y2()}},
               {"event", o.event},
               {"kind", std::string(to_string(o.kind))}});
    }
  }
  w.close();
}

std::vector<FrameTruth> read_truth(const std::filesystem::path& path, int num_frames) {
  std::vector<FrameTruth> truth(static_cast<std::size_t>(num_frames));
  for_each_json_line(path, [&](const json& j) {
    const int f = j.at("frame").get<int>();
    if (f < 0 || f >= num_frames) throw RangeError("truth frame out of range");
    const auto& b = j.at("box");
    truth[static_cast<std::size_t>(f)].push_back(
        {parse_object_role(j.at("role").get<std::string>()),
         parse_category(j.at("category").get<std::string>()),
         BoundingBox::make(b.at(0).get<double>(), b.at(1).get<double>(),
                           b.at(2).get<double>(), b.at(3).get<double>()),
         j.value("event", 0), parse_event_kind(j.value("kind", std::string("smoke_with_vehicle")))});
  });
  return truth;
}

void write_fixture(const FixtureVideo& video, const std::filesystem::path& dir) {
  write_video(video, video.script().scene_id, dir);
  write_truth(video.truth(), dir / "truth.jsonl");
  const VideoAnnotation seg = video.segments();
  save_segment_annotations(std::span<const VideoAnnotation>(&seg, 1), dir / "segments.jsonl");
  write_json_file(script_to_json(video.script()), dir / "script.json");
}

FixtureScript make_scenario(const ScenarioSpec& spec, std::uint64_t seed) {
  const int total =
      spec.smoke_with_vehicle + spec.smoke_without_vehicle + spec.shadow_decoys + spec.vehicle_only;
  if (spec.smoke_with_vehicle < 0 || spec.smoke_without_vehicle < 0 || spec.shadow_decoys < 0 ||
      spec.vehicle_only < 0) {
    throw ValidationError("scenario event counts must be non-negative");
  }
  FixtureScript script;
  script.video_id = spec.video_id;
  script.scene_id = spec.scene_id;
  script.width = spec.width;
  script.height = spec.height;
  script.num_frames = spec.num_frames;
  if (total == 0) {
    validate_script(script);
    return script;
  }
  const int slot = spec.num_frames / total;
  if (spec.event_length < 1 || slot < spec.event_length + 1) {
    throw ValidationError("scenario: " + std::to_string(total) + " events of length " +
                          std::to_string(spec.event_length) + " do not fit into " +
                          std::to_string(spec.num_frames) + " frames");
  }

  std::vector<EventKind> kinds;
  int left[4] = {spec.smoke_with_vehicle, spec.shadow_decoys, spec.smoke_without_vehicle,
                 spec.vehicle_only};
  const EventKind order[4] = {EventKind::smoke_with_vehicle, EventKind::shadow_decoy,
                              EventKind::smoke_without_vehicle, EventKind::vehicle_only};
  while (static_cast<int>(kinds.size()) < total) {
    for (int k = 0; k < 4; ++k) {
      if (left[k] > 0) {
        kinds.push_back(order[k]);
        --left[k];
      }
    }
  }

  std::mt19937_64 rng(seed_mix(seed, 0x5ce9a10ULL));
  auto uniform = [&](double a, double b) { return std::uniform_real_distribution<double>(a, b)(rng); };
  const Category categories[3] = {Category::car, Category::bus, Category::truck};
  for (int i = 0; i < total; ++i) {
    PlantedEvent e;
    e.kind = kinds[static_cast<std::size_t>(i)];
    e.start_frame = i * slot + (slot - spec.event_length) / 2;
    e.end_frame = e.start_frame + spec.event_length - 1;
    e.vehicle_category = categories[std::uniform_int_distribution<int>(0, 2)(rng)];
    FixtureScript single = script;
    for (int attempt = 0;; ++attempt) {
      if (attempt == 1000) {
        throw ValidationError("scenario: frame too small to place event " + std::to_string(i));
      }
      switch (e.kind) {
        case EventKind::smoke_with_vehicle:
        case EventKind::smoke_without_vehicle:
          e.width = uniform(32, 56);
          e.height = uniform(30, 50);
          e.vehicle_gap = uniform(-8, 8);
          break;
        case EventKind::shadow_decoy:
          e.width = uniform(40, 64);
          e.height = uniform(16, 28);
          e.vehicle_gap = uniform(3, 10);
          break;
        case EventKind::vehicle_only:
          e.width = uniform(50, 90);
          e.height = uniform(40, 70);
          break;
      }
      e.vx = uniform(-1.5, 1.5);
      e.vy = uniform(-0.5, 0.5);
      e.x = uniform(0, spec.width - e.width);
      e.y = uniform(0, spec.height - e.height);
      single.events = {e};
      try {
        validate_script(single);
        break;
      } catch (const ValidationError&) {
      }
    }
    script.events.push_back(e);
  }
  validate_script(script);
  return script;
}

}  // namespace smoky
