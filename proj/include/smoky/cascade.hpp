#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "smoky/annotations.hpp"
#include "smoky/detector.hpp"
#include "smoky/geometry.hpp"
#include "smoky/refiner.hpp"
#include "smoky/temporal.hpp"
#include "smoky/video.hpp"

namespace smoky {

struct CascadeConfig {
  double smoke_threshold = 0.2;
  double vehicle_threshold = 0.25;
  MatchConfig match;
  ClipConfig clip;
  double refine_threshold = 0.5;
  bool matching_enabled = true;
  bool refiner_enabled = true;

  /// Throws ConfigError on thresholds outside [0,1] or invalid sub-configs.
  void validate() const;
};

struct VerdictPair {
  ScoredDetection smoke;
  std::optional<ScoredDetection> vehicle;
  std::optional<double> probability;   // absent when the refiner is off

  friend bool operator==(const VerdictPair&, const VerdictPair&) = default;
};

enum class DropStage { matching, refiner };
std::string_view to_string(DropStage s) noexcept;

struct DroppedDetection {
  ScoredDetection smoke;
  DropStage stage = DropStage::matching;
  std::optional<double> probability;

  friend bool operator==(const DroppedDetection&, const DroppedDetection&) = default;
};

struct FrameVerdict {
  int frame_index = 0;
  bool verdict = false;
  std::vector<VerdictPair> pairs;
  int dropped_by_matching = 0;
  int dropped_by_refiner = 0;
  std::vector<DroppedDetection> dropped;

  int raw_count() const noexcept {
    return static_cast<int>(pairs.size()) + dropped_by_matching + dropped_by_refiner;
  }
  friend bool operator==(const FrameVerdict&, const FrameVerdict&) = default;
};

/// Per-stream cascade state: detectors, refiner and a ring buffer of the
/// last K frames. One instance per video; not shareable across threads.
class Cascade {
 public:
  /// refiner may be null only when config.refiner_enabled is false.
  /// Throws ConfigError when the refiner's K differs from config.clip.k.
  Cascade(CascadeConfig config, std::string video_id, DetectorHandle& smoke,
          DetectorHandle& vehicle, ClipScorer* refiner);

  /// Buffers the frame, then runs detection, matching and refinement.
  /// Frame indices must increase.
  FrameVerdict process_frame(int index, const Image& frame);

  /// Smoke and vehicle detections produced by the last process_frame call.
  const std::vector<ScoredDetection>& last_detections() const noexcept { return detections_; }
  const CascadeConfig& config() const noexcept { return config_; }

 private:
  CascadeConfig config_;
  std::string video_id_;
  DetectorHandle& smoke_;
  DetectorHandle& vehicle_;
  ClipScorer* refiner_;
  FrameBuffer buffer_;
  std::vector<ScoredDetection> detections_;
};

struct VideoRun {
  std::string video_id;
  std::vector<FrameVerdict> verdicts;
  std::vector<ScoredDetection> detections;   // stage-1 smoke and on-demand vehicle output
};

VideoRun process_video(const CascadeConfig& config, const VideoSource& video,
                       DetectorHandle& smoke, DetectorHandle& vehicle, ClipScorer* refiner);

/// Verdict file: JSON lines, one record per frame,
/// {"video", "frame", "verdict", "pairs": [{"smoke", "smoke_score", "vehicle",
/// "vehicle_category", "vehicle_score", "prob"}], "dropped_by_matching",
/// "dropped_by_refiner", "dropped": [{"box", "score", "stage", "prob"}]}.
void write_verdicts(const std::string& video_id, const std::vector<FrameVerdict>& verdicts,
                    const std::filesystem::path& path);

struct VerdictFile {
  std::string video_id;
  std::vector<FrameVerdict> verdicts;
};
/// Throws ParseError on malformed records, ValidationError when frames are
/// not 0..n-1 in order or several videos are mixed.
VerdictFile read_verdicts(const std::filesystem::path& path);

/// Training-clip collection: stage-1 detection at config.smoke_threshold and
/// matching (when enabled); every surviving detection becomes a clip of
/// train_resize patches labelled by whether its frame is a positive frame.
std::vector<ClipSample> collect_training_clips(const CascadeConfig& config,
                                               const VideoSource& video,
                                               const FrameLabelSet& labels,
                                               DetectorHandle& smoke, DetectorHandle& vehicle);

}  // namespace smoky
