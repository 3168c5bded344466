#pragma once

#include <filesystem>
#include <string>

#include "smoky/image.hpp"

namespace smoky {

/// Random-access frame source. Implementations are read-only after construction.
class VideoSource {
 public:
  virtual ~VideoSource() = default;
  virtual std::string id() const = 0;
  virtual int num_frames() const = 0;
  virtual int width() const = 0;
  virtual int height() const = 0;
  virtual Image frame(int index) const = 0;
};

/// A video stored as a directory:
///   video.json            {"video": id, "scene": s, "width": w, "height": h, "num_frames": n}
///   frame_000000.ppm ...  binary PPM frames
class PpmDirectoryVideo final : public VideoSource {
 public:
  /// Throws IoError when the directory or its metadata is unreadable, or
  /// when any frame file is missing.
  explicit PpmDirectoryVideo(std::filesystem::path dir);

  std::string id() const override { return id_; }
  const std::string& scene() const noexcept { return scene_; }
  int num_frames() const override { return num_frames_; }
  int width() const override { return width_; }
  int height() const override { return height_; }
  Image frame(int index) const override;

  const std::filesystem::path& directory() const noexcept { return dir_; }

 private:
  std::filesystem::path dir_;
  std::string id_;
  std::string scene_;
  int num_frames_ = 0;
  int width_ = 0;
  int height_ = 0;
};

std::filesystem::path frame_file_name(int index);

/// Writes every frame of `video` plus video.json into `dir` (created if absent).
void write_video(const VideoSource& video, const std::string& scene,
                 const std::filesystem::path& dir);

}  // namespace smoky
