#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "smoky/annotations.hpp"
#include "smoky/video.hpp"

namespace smoky {

enum class EventKind { smoke_with_vehicle, smoke_without_vehicle, shadow_decoy, vehicle_only };

std::string_view to_string(EventKind k) noexcept;
EventKind parse_event_kind(std::string_view name);

/// A planted object track. (x, y, width, height) is the primary object's box at
/// start_frame: the smoke blob, the shadow, or the vehicle for vehicle_only.
/// The box moves by (vx, vy) pixels per frame.
///
/// smoke_with_vehicle and shadow_decoy carry a companion vehicle centred
/// horizontally on the primary box whose bottom edge sits `vehicle_gap` pixels
/// above the primary top edge (negative gap = overlap). Shadows never overlap
/// their vehicle, so their gap must be positive.
struct PlantedEvent {
  EventKind kind = EventKind::smoke_with_vehicle;
  int start_frame = 0;
  int end_frame = 0;
  double x = 0.0;
  double y = 0.0;
  double width = 40.0;
  double height = 40.0;
  double vx = 0.0;
  double vy = 0.0;
  Category vehicle_category = Category::truck;
  double vehicle_width = 0.0;   // 0: 1.5 x primary width
  double vehicle_height = 0.0;  // 0: 1.2 x primary width
  double vehicle_gap = 6.0;
  bool with_vehicle = true;     // shadow_decoy only
};

struct FixtureScript {
  std::string video_id = "fixture";
  std::string scene_id = "synthetic";
  int width = 640;
  int height = 360;
  int num_frames = 20;
  double noise_sigma = 6.0;
  std::vector<PlantedEvent> events;
};

enum class ObjectRole { smoke, vehicle, decoy };
std::string_view to_string(ObjectRole r) noexcept;
ObjectRole parse_object_role(std::string_view name);

struct GroundTruthObject {
  ObjectRole role = ObjectRole::smoke;
  Category category = Category::smoke;
  BoundingBox box;
  int event = 0;               // index into FixtureScript::events
  EventKind kind = EventKind::smoke_with_vehicle;

  friend bool operator==(const GroundTruthObject&, const GroundTruthObject&) = default;
};

using FrameTruth = std::vector<GroundTruthObject>;

/// Throws ValidationError when an event leaves the frame or the frame range.
void validate_script(const FixtureScript& script);

/// Smoke segments of the script: union of smoke_with_vehicle frame ranges,
/// merged where they overlap.
VideoAnnotation script_segments(const FixtureScript& script);

/// Ground-truth objects of every frame.
std::vector<FrameTruth> script_truth(const FixtureScript& script);

/// Deterministic renderer: frame(i) depends only on (script, seed, i).
class FixtureVideo final : public VideoSource {
 public:
  FixtureVideo(FixtureScript script, std::uint64_t seed);

  std::string id() const override { return script_.video_id; }
  int num_frames() const override { return script_.num_frames; }
  int width() const override { return script_.width; }
  int height() const override { return script_.height; }
  Image frame(int index) const override;

  const FixtureScript& script() const noexcept { return script_; }
  const std::vector<FrameTruth>& truth() const noexcept { return truth_; }
  const VideoAnnotation& segments() const noexcept { return segments_; }

 private:
  FixtureScript script_;
  std::uint64_t seed_;
  std::vector<FrameTruth> truth_;
  VideoAnnotation segments_;
};

/// Randomised scenario: events of the requested kinds laid out one after
/// another in time (never overlapping), kinds interleaved, with sizes,
/// positions, motion and vehicle gaps drawn from the seed.
struct ScenarioSpec {
  std::string video_id = "fixture";
  std::string scene_id = "synthetic";
  int width = 640;
  int height = 360;
  int num_frames = 200;
  int smoke_with_vehicle = 3;
  int smoke_without_vehicle = 3;
  int shadow_decoys = 5;
  int vehicle_only = 0;
  int event_length = 14;
};

/// Throws ValidationError when the events cannot fit into num_frames.
FixtureScript make_scenario(const ScenarioSpec& spec, std::uint64_t seed);

struct Fixture {
  std::vector<Image> frames;
  VideoAnnotation segments;
  std::vector<FrameTruth> truth;
};

Fixture generate_fixture(const FixtureScript& script, std::uint64_t seed);

nlohmann::json script_to_json(const FixtureScript& script);
FixtureScript script_from_json(const nlohmann::json& j);

/// Per-frame ground truth file: one record per object,
/// {"frame": f, "role": "smoke|vehicle|decoy", "category": c, "box": [...], "event": e, "kind": k}.
void write_truth(const std::vector<FrameTruth>& truth, const std::filesystem::path& path);
std::vector<FrameTruth> read_truth(const std::filesystem::path& path, int num_frames);

/// Writes frames, video.json, truth.jsonl, segments.jsonl and script.json into dir.
void write_fixture(const FixtureVideo& video, const std::filesystem::path& dir);

}  // namespace smoky
