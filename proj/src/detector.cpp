#include "smoky/detector.hpp"

#include <algorithm>
#include <random>

#include "smoky/annotations.hpp"
#include "smoky/errors.hpp"
#include "smoky/geometry.hpp"
#include "smoky/seed.hpp"

namespace smoky {

void DetectorHandle::set_nms_iou(double v) {
  if (!(v > 0.0 && v <= 1.0)) throw ConfigError("NMS IoU threshold must be in (0, 1]");
  nms_iou_ = v;
}

std::vector<ScoredDetection> non_max_suppression(std::vector<ScoredDetection> detections,
                                                 double iou_threshold) {
  std::stable_sort(detections.begin(), detections.end(),
                   [](const auto& a, const auto& b) { return a.score > b.score; });
  std::vector<ScoredDetection> kept;
  for (const auto& d : detections) {
    const bool suppressed = std::any_of(kept.begin(), kept.end(), [&](const auto& k) {
      return k.category == d.category && iou(k.box, d.box) > iou_threshold;
    });
    if (!suppressed) kept.push_back(d);
  }
  return kept;
}

std::vector<ScoredDetection> run_detector(DetectorHandle& handle, const Image& frame,
                                          int frame_index, double threshold) {
  if (!(threshold >= 0.0)) throw RangeError("detection threshold must be >= 0");
  if (const auto size = handle.expected_size()) {
    if (size->first != frame.width() || size->second != frame.height()) {
      throw ShapeError(handle.name() + " expects " + std::to_string(size->first) + "x" +
                       std::to_string(size->second) + " frames, got " +
                       std::to_string(frame.width()) + "x" + std::to_string(frame.height()));
    }
  }
  ++handle.invocations_;
  std::vector<ScoredDetection> kept;
  for (auto d : handle.propose(frame, frame_index)) {
    if (!(d.score >= threshold)) continue;
    const auto box = d.box.clipped(frame.width(), frame.height());
    if (!box) continue;
    d.box = *box;
    d.score = std::clamp(d.score, 0.0, 1.0);
    d.frame_index = frame_index;
    kept.push_back(d);
  }
  return non_max_suppression(std::move(kept), handle.nms_iou());
}

OracleDetector::OracleDetector(std::vector<FrameTruth> truth, DetectorRole role, double score)
    : truth_(std::move(truth)), role_(role), score_(score) {
  if (!(score >= 0.0 && score <= 1.0)) throw RangeError("oracle score must be in [0,1]");
}

std::string OracleDetector::name() const {
  return role_ == DetectorRole::smoke ? "oracle-smoke" : "oracle-vehicle";
}

namespace {

void check_truth_frame(const std::vector<FrameTruth>& truth, int frame_index) {
  if (frame_index < 0 || static_cast<std::size_t>(frame_index) >= truth.size()) {
    throw RangeError("frame " + std::to_string(frame_index) + " has no ground truth (" +
                     std::to_string(truth.size()) + " frames)");
  }
}

}  // namespace

std::vector<ScoredDetection> OracleDetector::propose(const Image&, int frame_index) {
  std::vector<ScoredDetection> out;
  check_truth_frame(truth_, frame_index);
  for (const auto& o : truth_[static_cast<std::size_t>(frame_index)]) {
    const bool smoke_like = o.role == ObjectRole::smoke || o.role == ObjectRole::decoy;
    if (role_ == DetectorRole::smoke && smoke_like) {
      out.push_back({o.box, score_, Category::smoke, frame_index});
    } else if (role_ == DetectorRole::vehicle && o.role == ObjectRole::vehicle) {
      out.push_back({o.box, score_, o.category, frame_index});
    }
  }
  return out;
}

NoisyDetector::NoisyDetector(std::vector<FrameTruth> truth, std::uint64_t seed, NoiseModel model)
    : truth_(std::move(truth)), seed_(seed), model_(model) {}

std::vector<ScoredDetection> NoisyDetector::propose(const Image&, int frame_index) {
  std::vector<ScoredDetection> out;
  check_truth_frame(truth_, frame_index);
  const auto& objects = truth_[static_cast<std::size_t>(frame_index)];
  for (std::size_t i = 0; i < objects.size(); ++i) {
    const auto& o = objects[i];
    if (o.role == ObjectRole::vehicle) continue;
    std::mt19937_64 rng(seed_mix(seed_mix(seed_, static_cast<std::uint64_t>(frame_index)), i));
    const bool smoke = o.role == ObjectRole::smoke;
    std::normal_distribution<double> score(smoke ? model_.smoke_mean : model_.decoy_mean,
                                           smoke ? model_.smoke_sigma : model_.decoy_sigma);
    std::normal_distribution<double> jitter(0.0, model_.jitter);
    const double s = std::clamp(score(rng), 0.01, 0.99);
    const double x1 = o.box.x1() + jitter(rng);
    const double y1 = o.box.y1() + jitter(rng);
    const double x2 = o.box.x2() + jitter(rng);
    const double y2 = o.box.y2() + jitter(rng);
    if (const auto box = BoundingBox::try_make(x1, y1, x2, y2)) {
      out.push_back({*box, s, Category::smoke, frame_index});
    }
  }
  return out;
}

StreamDetector::StreamDetector(const std::filesystem::path& stream, DetectorRole role) {
  for (const auto& d : read_detection_stream(stream)) {
    const bool keep = role == DetectorRole::smoke ? d.category == Category::smoke
                                                  : is_vehicle(d.category);
    if (keep) by_frame_[d.frame_index].push_back(d);
  }
}

std::vector<ScoredDetection> StreamDetector::propose(const Image&, int frame_index) {
  const auto it = by_frame_.find(frame_index);
  return it == by_frame_.end() ? std::vector<ScoredDetection>{} : it->second;
}

YoloDetector::YoloDetector(DetectorNetwork network, int input_width, int input_height,
                           std::map<int, Category> class_map)
    : network_(std::move(network)),
      width_(input_width),
      height_(input_height),
      class_map_(std::move(class_map)) {
  if (width_ % 32 != 0 || height_ % 32 != 0 || width_ <= 0 || height_ <= 0) {
    throw ConfigError("detector input size must be a positive multiple of 32");
  }
}

std::unique_ptr<YoloDetector> YoloDetector::from_checkpoint(const std::filesystem::path& path,
                                                            int input_width, int input_height) {
  auto net = DetectorNetwork::load(path);
  int classes = 0;
  for (const auto& l : net.spec().layers) {
    if (l.type == LayerType::detect) classes = l.num_classes;
  }
  std::map<int, Category> map;
  if (classes == 1) {
    map = {{0, Category::smoke}};
  } else if (classes == 80) {
    map = {{2, Category::car}, {5, Category::bus}, {7, Category::truck}};
  } else {
    throw ConfigError(path.string() + ": expected a 1-class smoke or 80-class COCO head, got " +
                      std::to_string(classes) + " classes");
  }
  return std::make_unique<YoloDetector>(std::move(net), input_width, input_height, map);
}

std::vector<ScoredDetection> YoloDetector::propose(const Image& frame, int frame_index) {
  const auto maps = network_.forward(DetectorNetwork::image_tensor(frame));
  std::vector<ScoredDetection> out;
  for (const auto& c : network_.decode(maps, 0.001)) {
    const auto cat = class_map_.find(c.class_index);
    if (cat == class_map_.end()) continue;
    if (const auto box = BoundingBox::try_make(c.x1, c.y1, c.x2, c.y2)) {
      out.push_back({*box, c.score, cat->second, frame_index});
    }
  }
  return out;
}

}  // namespace smoky
