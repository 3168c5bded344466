#include "smoky/temporal.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>

#include "smoky/errors.hpp"
#include "smoky/json_util.hpp"

namespace smoky {

using nlohmann::json;

ClipConfig ClipConfig::large() {
  ClipConfig c;
  c.min_side = 224;
  c.train_resize = 256;
  c.train_crop = 224;
  c.eval_size = 224;
  return c;
}

void ClipConfig::validate() const {
  if (k < 1) throw ConfigError("clip length k must be >= 1");
  if (min_side < 1 || train_resize < 1 || train_crop < 1 || eval_size < 1) {
    throw ConfigError("clip sizes must be positive");
  }
  if (train_crop > train_resize) throw ConfigError("train_crop must not exceed train_resize");
}

std::string_view to_string(ClipLabel l) noexcept {
  return l == ClipLabel::smoke ? "smoke" : "non_smoke";
}

ClipLabel parse_clip_label(std::string_view name) {
  if (name == "smoke") return ClipLabel::smoke;
  if (name == "non_smoke") return ClipLabel::non_smoke;
  throw ValidationError("unknown clip label '" + std::string(name) + "'");
}

SquareRegion extend_to_square_region(const BoundingBox& box, int frame_w, int frame_h,
                                     int min_side) {
  if (frame_w < 1 || frame_h < 1 || min_side < 1) throw ValidationError("invalid frame size");
  if (!box.inside(frame_w, frame_h)) throw ValidationError("box lies outside the frame");
  double side = std::max<double>(min_side, std::max(box.width(), box.height()));
  SquareRegion out;
  const double limit = std::min(frame_w, frame_h);
  if (side > limit) {
    side = limit;
    out.clipped = true;
  }
  const auto place = [side](double centre, double extent) {
    return std::clamp(centre - side / 2.0, 0.0, extent - side);
  };
  const Point c = box.center();
  const double x1 = place(c.x, frame_w);
  const double y1 = place(c.y, frame_h);
  out.box = BoundingBox::make(x1, y1, x1 + side, y1 + side);
  return out;
}

BoundingBox extend_to_square(const BoundingBox& box, int frame_w, int frame_h, int min_side) {
  return extend_to_square_region(box, frame_w, frame_h, min_side).box;
}

FrameBuffer::FrameBuffer(int capacity) : capacity_(capacity) {
  if (capacity < 1) throw ConfigError("frame buffer capacity must be >= 1");
}

void FrameBuffer::push(int index, Image frame) {
  if (!frames_.empty() && index <= frames_.back().first) {
    throw ValidationError("frame indices must increase");
  }
  frames_.emplace_back(index, std::move(frame));
  while (static_cast<int>(frames_.size()) > capacity_) frames_.pop_front();
}

const Image* FrameBuffer::find(int index) const noexcept {
  for (const auto& [i, img] : frames_) {
    if (i == index) return &img;
  }
  return nullptr;
}

int FrameBuffer::oldest() const {
  if (frames_.empty()) throw ValidationError("frame buffer is empty");
  return frames_.front().first;
}

int FrameBuffer::newest() const {
  if (frames_.empty()) throw ValidationError("frame buffer is empty");
  return frames_.back().first;
}

namespace {

template <class Lookup>
ClipSample make_clip(Lookup&& lookup, const std::string& video_id, int t,
                     const BoundingBox& box, const ClipConfig& cfg, int patch_size) {
  cfg.validate();
  if (patch_size < 1) throw ConfigError("patch size must be positive");
  const Image* current = lookup(t);
  if (current == nullptr) {
    throw ValidationError("frame " + std::to_string(t) + " is not available for clip extraction");
  }
  ClipSample s;
  s.video_id = video_id;
  s.center_frame = t;
  s.source_box = box;
  const auto region = extend_to_square_region(box, current->width(), current->height(),
                                              cfg.min_side);
  s.region = region.box;
  s.clipped = region.clipped;

  int earliest = t;
  for (int f = t - cfg.k + 1; f <= t; ++f) {
    if (f >= 0 && lookup(f) != nullptr) {
      earliest = f;
      break;
    }
  }
  for (int f = t - cfg.k + 1; f <= t; ++f) {
    int src = f;
    if (f < earliest) {
      src = earliest;
      s.padded = true;
    }
    const Image* img = lookup(src);
    if (img == nullptr) {
      src = earliest;
      s.padded = true;
      img = lookup(src);
    }
    if (img->width() != current->width() || img->height() != current->height()) {
      throw ShapeError("frames of one clip differ in size");
    }
    s.frames.push_back(src);
    s.patches.push_back(resample(*img, s.region, patch_size, patch_size));
  }
  return s;
}

}  // namespace

ClipSample extract_clip(const FrameBuffer& frames, const std::string& video_id, int t,
                        const BoundingBox& box, const ClipConfig& cfg, int patch_size) {
  return make_clip([&](int f) { return frames.find(f); }, video_id, t, box, cfg, patch_size);
}

ClipSample extract_clip(const VideoSource& video, int t, const BoundingBox& box,
                        const ClipConfig& cfg, int patch_size) {
  std::vector<std::pair<int, Image>> cache;
  auto lookup = [&](int f) -> const Image* {
    if (f < 0 || f >= video.num_frames()) return nullptr;
    for (const auto& [i, img] : cache) {
      if (i == f) return &img;
    }
    cache.emplace_back(f, video.frame(f));
    return &cache.back().second;
  };
  cache.reserve(static_cast<std::size_t>(cfg.k) + 1);
  return make_clip(lookup, video.id(), t, box, cfg, patch_size);
}

namespace {

std::string clip_stem(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "clip_%06zu", i);
  return buf;
}

}  // namespace

void write_clip_dataset(const std::vector<ClipSample>& clips, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  for (std::size_t i = 0; i < clips.size(); ++i) {
    const auto& c = clips[i];
    const auto stem = clip_stem(i);
    std::ofstream blob(dir / (stem + ".bin"), std::ios::binary);
    if (!blob) throw IoError("cannot write " + (dir / (stem + ".bin")).string());
    for (const auto& p : c.patches) {
      blob.write(reinterpret_cast<const char*>(p.bytes().data()),
                 static_cast<std::streamsize>(p.bytes().size()));
    }
    if (!blob) throw IoError("write failed for " + (dir / (stem + ".bin")).string());
    json rec = {{"video", c.video_id},
                {"frame", c.center_frame},
                {"frames", c.frames},
                {"box", box_to_json(c.source_box)},
                {"region", box_to_json(c.region)},
                {"k", c.k()},
                {"size", c.patch_size()},
                {"padded", c.padded},
                {"clipped", c.clipped}};
    rec["label"] = c.label ? json(std::string(to_string(*c.label))) : json(nullptr);
    write_json_file(rec, dir / (stem + ".json"));
  }
}

std::vector<ClipSample> read_clip_dataset(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw IoError(dir.string() + " is not a directory");
  std::vector<std::filesystem::path> sidecars;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    const auto name = e.path().filename().string();
    if (name.rfind("clip_", 0) == 0 && e.path().extension() == ".json") sidecars.push_back(e.path());
  }
  std::sort(sidecars.begin(), sidecars.end());
  std::vector<ClipSample> out;
  for (const auto& path : sidecars) {
    const json rec = read_json_file(path);
    ClipSample c;
    try {
      c.video_id = rec.at("video").get<std::string>();
      c.center_frame = rec.at("frame").get<int>();
      c.frames = rec.at("frames").get<std::vector<int>>();
      c.source_box = box_from_json(rec.at("box"));
      c.region = box_from_json(rec.at("region"));
      c.padded = rec.value("padded", false);
      c.clipped = rec.value("clipped", false);
      if (!rec.at("label").is_null()) c.label = parse_clip_label(rec["label"].get<std::string>());
      const int k = rec.at("k").get<int>();
      const int size = rec.at("size").get<int>();
      if (k < 1 || size < 1 || static_cast<int>(c.frames.size()) != k) {
        throw ValidationError("inconsistent k/size/frames");
      }
      auto blob_path = path;
      blob_path.replace_extension(".bin");
      std::ifstream blob(blob_path, std::ios::binary);
      if (!blob) throw IoError("cannot open " + blob_path.string());
      for (int i = 0; i < k; ++i) {
        Image img(size, size);
        blob.read(reinterpret_cast<char*>(img.bytes().data()),
                  static_cast<std::streamsize>(img.bytes().size()));
        if (!blob) throw ValidationError(blob_path.string() + " is truncated");
        c.patches.push_back(std::move(img));
      }
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(path.string() + ": " + e.what());
    } catch (const ValidationError& e) {
      throw ValidationError(path.string() + ": " + e.what());
    }
    out.push_back(std::move(c));
  }
  return out;
}

}  // namespace smoky
