#include "smoky/video.hpp"

#include <cstdio>

#include "smoky/errors.hpp"
#include "smoky/json_util.hpp"

namespace smoky {

std::filesystem::path frame_file_name(int index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "frame_%06d.ppm", index);
  return buf;
}

PpmDirectoryVideo::PpmDirectoryVideo(std::filesystem::path dir) : dir_(std::move(dir)) {
  if (!std::filesystem::is_directory(dir_)) {
    throw IoError("video source " + dir_.string() + " is not a directory");
  }
  const auto meta = read_json_file(dir_ / "video.json");
  try {
    id_ = meta.at("video").get<std::string>();
    scene_ = meta.value("scene", std::string());
    width_ = meta.at("width").get<int>();
    height_ = meta.at("height").get<int>();
    num_frames_ = meta.at("num_frames").get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw IoError(dir_.string() + "/video.json: " + e.what());
  }
  for (int i = 0; i < num_frames_; ++i) {
    if (!std::filesystem::exists(dir_ / frame_file_name(i))) {
      throw IoError("missing frame " + (dir_ / frame_file_name(i)).string());
    }
  }
}

Image PpmDirectoryVideo::frame(int index) const {
  if (index < 0 || index >= num_frames_) throw RangeError("frame index out of range");
  Image img = read_ppm(dir_ / frame_file_name(index));
  if (img.width() != width_ || img.height() != height_) {
    throw ShapeError("frame " + std::to_string(index) + " size differs from video.json");
  }
  return img;
}

void write_video(const VideoSource& video, const std::string& scene,
                 const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_json_file({{"video", video.id()},
                   {"scene", scene},
                   {"width", video.width()},
                   {"height", video.height()},
                   {"num_frames", video.num_frames()}},
                  dir / "video.json");
  for (int i = 0; i < video.num_frames(); ++i) write_ppm(video.frame(i), dir / frame_file_name(i));
}

}  // namespace smoky
