#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "smoky/box.hpp"
#include "smoky/fixture.hpp"
#include "smoky/image.hpp"
#include "smoky/network.hpp"

namespace smoky {

/// Frame detector contract. propose() returns raw candidates; run_detector()
/// applies the threshold, clipping, NMS and ordering. A handle is used by one
/// thread at a time.
class DetectorHandle {
 public:
  virtual ~DetectorHandle() = default;

  virtual std::string name() const = 0;
  virtual std::vector<ScoredDetection> propose(const Image& frame, int frame_index) = 0;
  /// (width, height) the handle requires, if any.
  virtual std::optional<std::pair<int, int>> expected_size() const { return std::nullopt; }

  double nms_iou() const noexcept { return nms_iou_; }
  void set_nms_iou(double v);
  std::int64_t invocations() const noexcept { return invocations_; }

 private:
  friend std::vector<ScoredDetection> run_detector(DetectorHandle&, const Image&, int, double);
  double nms_iou_ = 0.45;
  std::int64_t invocations_ = 0;
};

/// Greedy NMS within each category. Keeps the higher-scoring box of any pair
/// whose IoU exceeds iou_threshold; input order breaks score ties. Output is
/// sorted by descending score.
std::vector<ScoredDetection> non_max_suppression(std::vector<ScoredDetection> detections,
                                                 double iou_threshold);

/// Detections with score >= threshold, clipped to the frame, NMS'd per
/// category and sorted by descending score. Throws ShapeError when the frame
/// size differs from the handle's expected input, RangeError on a threshold
/// outside [0, +inf).
std::vector<ScoredDetection> run_detector(DetectorHandle& handle, const Image& frame,
                                          int frame_index, double threshold);

enum class DetectorRole { smoke, vehicle };

/// Replays planted ground truth. The smoke role reports smoke blobs and
/// shadow decoys (anything smoke-like) as smoke; the vehicle role reports
/// vehicles.
class OracleDetector final : public DetectorHandle {
 public:
  OracleDetector(std::vector<FrameTruth> truth, DetectorRole role, double score = 0.99);
  std::string name() const override;
  std::vector<ScoredDetection> propose(const Image& frame, int frame_index) override;

 private:
  std::vector<FrameTruth> truth_;
  DetectorRole role_;
  double score_;
};

struct NoiseModel {
  double smoke_mean = 0.65;
  double smoke_sigma = 0.2;
  double decoy_mean = 0.3;
  double decoy_sigma = 0.15;
  double jitter = 2.0;        // box corner noise, pixels
};

/// Smoke-role oracle with seeded random scores: genuine smoke tends to score
/// higher than decoys. Scores depend only on (seed, frame, object).
class NoisyDetector final : public DetectorHandle {
 public:
  NoisyDetector(std::vector<FrameTruth> truth, std::uint64_t seed, NoiseModel model = {});
  std::string name() const override { return "noisy"; }
  std::vector<ScoredDetection> propose(const Image& frame, int frame_index) override;

 private:
  std::vector<FrameTruth> truth_;
  std::uint64_t seed_;
  NoiseModel model_;
};

/// Replays a detection stream file, keeping records of one role.
class StreamDetector final : public DetectorHandle {
 public:
  StreamDetector(const std::filesystem::path& stream, DetectorRole role);
  std::string name() const override { return "stream"; }
  std::vector<ScoredDetection> propose(const Image& frame, int frame_index) override;

 private:
  std::map<int, std::vector<ScoredDetection>> by_frame_;
};

/// Network detector over frames of exactly the network input size.
/// class_map maps head class indices to categories; unmapped classes are
/// ignored.
class YoloDetector final : public DetectorHandle {
 public:
  YoloDetector(DetectorNetwork network, int input_width, int input_height,
               std::map<int, Category> class_map);
  /// Single-class smoke model or an 80-class COCO model (car, bus, truck).
  static std::unique_ptr<YoloDetector> from_checkpoint(const std::filesystem::path& path,
                                                       int input_width, int input_height);

  std::string name() const override { return network_.spec().name; }
  std::vector<ScoredDetection> propose(const Image& frame, int frame_index) override;
  std::optional<std::pair<int, int>> expected_size() const override {
    return std::make_pair(width_, height_);
  }

 private:
  DetectorNetwork network_;
  int width_;
  int height_;
  std::map<int, Category> class_map_;
};

}  // namespace smoky
