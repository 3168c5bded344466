#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "smoky/box.hpp"

namespace smoky {

/// Box annotations of one image.
struct ImageAnnotation {
  std::string image;
  int width = 0;
  int height = 0;
  std::vector<BoundingBox> boxes;
  std::vector<Category> categories;  // parallel to boxes

  friend bool operator==(const ImageAnnotation&, const ImageAnnotation&) = default;
};

/// Inclusive smoke frame range [start_frame, end_frame] of one video.
struct SegmentAnnotation {
  std::string video_id;
  int start_frame = 0;
  int end_frame = 0;
  std::string scene_id;

  friend bool operator==(const SegmentAnnotation&, const SegmentAnnotation&) = default;
};

/// One record of a segment annotation file.
struct VideoAnnotation {
  std::string video;
  std::string scene;
  int num_frames = 0;
  std::vector<SegmentAnnotation> segments;

  friend bool operator==(const VideoAnnotation&, const VideoAnnotation&) = default;
};

class FrameLabelSet {
 public:
  FrameLabelSet() = default;
  FrameLabelSet(std::string video_id, std::vector<bool> labels)
      : video_id_(std::move(video_id)), labels_(std::move(labels)) {}

  const std::string& video_id() const noexcept { return video_id_; }
  int num_frames() const noexcept { return static_cast<int>(labels_.size()); }
  bool positive(int frame) const { return labels_.at(static_cast<std::size_t>(frame)); }
  const std::vector<bool>& labels() const noexcept { return labels_; }
  int positives() const noexcept;
  int negatives() const noexcept { return num_frames() - positives(); }

 private:
  std::string video_id_;
  std::vector<bool> labels_;
};

/// Per-frame binary labels from inclusive segments.
/// Throws ValidationError on overlapping segments or start > end, RangeError when
/// a segment reaches past num_frames.
FrameLabelSet expand_segments(std::span<const SegmentAnnotation> segments, int num_frames);
FrameLabelSet expand_segments(const VideoAnnotation& video);

// JSON-lines file formats. Readers report the offending line in ParseError;
// unknown fields are ignored.

std::vector<ImageAnnotation> load_box_annotations(const std::filesystem::path& path);
void save_box_annotations(std::span<const ImageAnnotation> records,
                          const std::filesystem::path& path);

std::vector<VideoAnnotation> load_segment_annotations(const std::filesystem::path& path);
void save_segment_annotations(std::span<const VideoAnnotation> records,
                              const std::filesystem::path& path);

std::vector<ScoredDetection> read_detection_stream(const std::filesystem::path& path);
/// Records are written sorted by frame index (stable for equal frames).
void write_detection_stream(std::span<const ScoredDetection> detections,
                            const std::filesystem::path& path);

}  // namespace smoky
