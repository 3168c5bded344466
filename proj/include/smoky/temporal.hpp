#pragma once

#include <deque>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "smoky/box.hpp"
#include "smoky/image.hpp"
#include "smoky/video.hpp"

namespace smoky {

struct ClipConfig {
  int k = 3;
  int min_side = 112;
  int train_resize = 128;
  int train_crop = 112;
  int eval_size = 112;

  /// 256 -> 224 training crops.
  static ClipConfig large();
  /// Throws ConfigError unless k >= 1, sizes positive and crop <= resize.
  void validate() const;
};

enum class ClipLabel { non_smoke = 0, smoke = 1 };

std::string_view to_string(ClipLabel l) noexcept;
ClipLabel parse_clip_label(std::string_view name);

struct SquareRegion {
  BoundingBox box;
  bool clipped = false;   // frame smaller than the required side
};

/// Square of side max(min_side, longest box side) centred on the box, shifted
/// (not shrunk) into the frame. When the frame is smaller than that side the
/// square shrinks to the frame's shorter side and `clipped` is set.
/// Throws ValidationError when the box is not inside the frame.
SquareRegion extend_to_square_region(const BoundingBox& box, int frame_w, int frame_h,
                                     int min_side = 112);
BoundingBox extend_to_square(const BoundingBox& box, int frame_w, int frame_h,
                             int min_side = 112);

struct ClipSample {
  std::string video_id;
  int center_frame = 0;           // t, the last frame of the window
  BoundingBox source_box;
  BoundingBox region;             // square actually cropped
  std::vector<int> frames;        // source frame of each patch, oldest first
  std::vector<Image> patches;     // K square patches cut from `region`
  std::optional<ClipLabel> label;
  bool padded = false;            // window reached before the first buffered frame
  bool clipped = false;

  int k() const noexcept { return static_cast<int>(patches.size()); }
  int patch_size() const noexcept { return patches.empty() ? 0 : patches.front().width(); }
};

/// The most recent frames of one video, oldest first.
class FrameBuffer {
 public:
  explicit FrameBuffer(int capacity);

  /// Frame indices must increase; the oldest frame is evicted when full.
  void push(int index, Image frame);
  const Image* find(int index) const noexcept;
  bool empty() const noexcept { return frames_.empty(); }
  int capacity() const noexcept { return capacity_; }
  int oldest() const;
  int newest() const;

 private:
  int capacity_;
  std::deque<std::pair<int, Image>> frames_;
};

/// Crops the square around `box` from frames [t-K+1, t] and resamples each
/// crop to patch_size. Frames missing from the buffer are replaced by the
/// earliest buffered frame of the window (padded). Throws ValidationError
/// when frame t is not buffered.
ClipSample extract_clip(const FrameBuffer& frames, const std::string& video_id, int t,
                        const BoundingBox& box, const ClipConfig& cfg, int patch_size);

/// Same, reading frames straight from a video.
ClipSample extract_clip(const VideoSource& video, int t, const BoundingBox& box,
                        const ClipConfig& cfg, int patch_size);

// Clip dataset directory: clip_NNNNNN.bin holds the K patches as raw RGB8
// (oldest first); clip_NNNNNN.json holds {video, frame, frames, box, region,
// label, k, size, padded, clipped}.
void write_clip_dataset(const std::vector<ClipSample>& clips, const std::filesystem::path& dir);
std::vector<ClipSample> read_clip_dataset(const std::filesystem::path& dir);

}  // namespace smoky
