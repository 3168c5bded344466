#include "smoky/annotations.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "smoky/errors.hpp"
#include "smoky/json_util.hpp"

namespace smoky {

using nlohmann::json;

int FrameLabelSet::positives() const noexcept {
  return static_cast<int>(std::count(labels_.begin(), labels_.end(), true));
}

FrameLabelSet expand_segments(std::span<const SegmentAnnotation> segments, int num_frames) {
  if (num_frames < 0) throw RangeError("negative frame count");
  std::vector<SegmentAnnotation> sorted(segments.begin(), segments.end());
  std::stable_sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) {
    return a.start_frame < b.start_frame;
  });
  std::vector<bool> labels(static_cast<std::size_t>(num_frames), false);
  int last_end = -1;
  for (const auto& s : sorted) {
    if (s.start_frame < 0 || s.start_frame > s.end_frame) {
      std::ostringstream os;
      os << "invalid segment [" << s.start_frame << ", " << s.end_frame << "] in video '"
         << s.video_id << "'";
      throw ValidationError(os.str());
    }
    if (s.end_frame >= num_frames) {
      std::ostringstream os;
      os << "segment end " << s.end_frame << " >= num_frames " << num_frames
         << " in video '" << s.video_id << "'";
      throw RangeError(os.str());
    }
    if (s.start_frame <= last_end) {
      std::ostringstream os;
      os << "overlapping segments at frame " << s.start_frame << " in video '"
         << s.video_id << "'";
      throw ValidationError(os.str());
    }
    for (int f = s.start_frame; f <= s.end_frame; ++f) labels[static_cast<std::size_t>(f)] = true;
    last_end = s.end_frame;
  }
  return FrameLabelSet(sorted.empty() ? std::string() : sorted.front().video_id,
                       std::move(labels));
}

FrameLabelSet expand_segments(const VideoAnnotation& video) {
  auto labels = expand_segments(video.segments, video.num_frames);
  return FrameLabelSet(video.video, labels.labels());
}


std::vector<ImageAnnotation> load_box_annotations(const std::filesystem::path& path) {
  std::vector<ImageAnnotation> out;
  for_each_json_line(path, [&](const json& j) {
    ImageAnnotation rec;
    rec.image = j.at("image").get<std::string>();
    rec.width = j.at("width").get<int>();
    rec.height = j.at("height").get<int>();
    const auto& boxes = j.at("boxes");
    if (!boxes.is_array()) throw ParseError("'boxes' must be an array");
    std::vector<Category> cats;
    if (auto it = j.find("category"); it != j.end()) {
      if (it->is_string()) {
        cats.assign(boxes.size(), parse_category(it->get<std::string>()));
      } else {
        for (const auto& c : *it) cats.push_back(parse_category(c.get<std::string>()));
      }
    } else {
      cats.assign(boxes.size(), Category::smoke);
    }
    if (cats.size() != boxes.size()) {
      throw ValidationError("image '" + rec.image + "': category count does not match boxes");
    }
    for (const auto& b : boxes) {
      try {
        rec.boxes.push_back(box_from_json(b));
      } catch (const ValidationError& e) {
        throw ValidationError("image '" + rec.image + "': " + e.what());
      }
      if (!rec.boxes.back().inside(rec.width, rec.height)) {
        throw ValidationError("image '" + rec.image + "': box exceeds the image bounds");
      }
    }
    rec.categories = std::move(cats);
    out.push_back(std::move(rec));
  });
  return out;
}

void save_box_annotations(std::span<const ImageAnnotation> records,
                          const std::filesystem::path& path) {
  JsonLineWriter w(path);
  for (const auto& r : records) {
    json boxes = json::array();
    json cats = json::array();
    for (std::size_t i = 0; i < r.boxes.size(); ++i) {
      boxes.push_back(box_to_json(r.boxes[i]));
      cats.push_back(std::string(to_string(i < r.categories.size() ? r.categories[i]
                                                                  : Category::smoke)));
    }
    w.write({{"image", r.image},
             {"width", r.width},
             {"height", r.height},
             {"boxes", boxes},
             {"category", cats}});
  }
  w.close();
}

std::vector<VideoAnnotation> load_segment_annotations(const std::filesystem::path& path) {
  std::vector<VideoAnnotation> out;
  for_each_json_line(path, [&](const json& j) {
    VideoAnnotation v;
    v.video = j.at("video").get<std::string>();
    v.scene = j.value("scene", std::string());
    v.num_frames = j.at("num_frames").get<int>();
    for (const auto& s : j.at("segments")) {
      if (!s.is_array() || s.size() != 2) throw ParseError("segment must be [start,end]");
      v.segments.push_back({v.video, s[0].get<int>(), s[1].get<int>(), v.scene});
    }
    // Validates ordering, overlap and range.
    expand_segments(v);
    out.push_back(std::move(v));
  });
  return out;
}

void save_segment_annotations(std::span<const VideoAnnotation> records,
                              const std::filesystem::path& path) {
  JsonLineWriter w(path);
  for (const auto& v : records) {
    json segs = json::array();
    for (const auto& s : v.segments) segs.push_back(json::array({s.start_frame, s.end_frame}));
    w.write({{"video", v.video}, {"scene", v.scene}, {"num_frames", v.num_frames},
             {"segments", segs}});
  }
  w.close();
}

std::vector<ScoredDetection> read_detection_stream(const std::filesystem::path& path) {
  std::vector<ScoredDetection> out;
  for_each_json_line(path, [&](const json& j) {
    ScoredDetection d;
    d.frame_index = j.at("frame").get<int>();
    d.category = parse_category(j.at("category").get<std::string>());
    d.score = j.at("score").get<double>();
    d.box = box_from_json(j.at("box"));
    d.validate();
    out.push_back(d);
  });
  return out;
}

void write_detection_stream(std::span<const ScoredDetection> detections,
                            const std::filesystem::path& path) {
  std::vector<ScoredDetection> sorted(detections.begin(), detections.end());
  for (const auto& d : sorted) d.validate();
  std::stable_sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) {
    return a.frame_index < b.frame_index;
  });
  JsonLineWriter w(path);
  for (const auto& d : sorted) {
    w.write({{"frame", d.frame_index},
             {"category", std::string(to_string(d.category))},
             {"score", d.score},
             {"box", box_to_json(d.box)}});
  }
  w.close();
}

}  // namespace smoky
