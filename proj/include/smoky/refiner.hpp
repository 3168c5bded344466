#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "smoky/nn/layers.hpp"
#include "smoky/temporal.hpp"

namespace smoky {

enum class HeadVariant { prefix3d, suffix3d, avg2d, cat2d };

std::string_view to_string(HeadVariant v) noexcept;
HeadVariant parse_head_variant(std::string_view name);

struct TemporalHeadSpec {
  HeadVariant variant = HeadVariant::suffix3d;
  int k = 3;
  int base_width = 64;       // ResNet-18 stage widths: w, 2w, 4w, 8w
  int temporal_kernel = 0;   // 3D kernel depth; 0: K for suffix3d, min(3, K) for prefix3d
  int num_classes = 2;

  /// Throws ConfigError on k < 1, width < 1, num_classes != 2, or a temporal
  /// kernel deeper than K.
  void validate() const;
};

/// Fixed per-channel patch normalisation on 0..255 pixel values.
struct PatchNormalization {
  std::array<float, 3> mean{123.675f, 116.28f, 103.53f};
  std::array<float, 3> stddev{58.395f, 57.12f, 57.375f};
};

/// Anything that scores a clip; the cascade's refinement stage.
class ClipScorer {
 public:
  virtual ~ClipScorer() = default;
  virtual int k() const = 0;
  /// Smoke-class probability in [0, 1].
  virtual double smoke_probability(const ClipSample& clip) = 0;
};

class TemporalHead;

struct ClipPrediction {
  std::array<double, 2> probabilities{};  // {non_smoke, smoke}
  double smoke_probability = 0.0;
  bool verdict = false;
};

/// Residual-18 clip classifier. Input tensors are (N, 3, K, S, S).
class TemporalHead final : public ClipScorer {
 public:
  TemporalHead(TemporalHeadSpec spec, std::uint64_t seed);
  ~TemporalHead() override;
  TemporalHead(TemporalHead&&) noexcept;
  TemporalHead& operator=(TemporalHead&&) noexcept;

  const TemporalHeadSpec& spec() const noexcept { return spec_; }
  int k() const override { return spec_.k; }
  double smoke_probability(const ClipSample& clip) override;

  /// Logits (N, 2). train selects batch statistics and caches activations
  /// for backward().
  nn::Tensor forward(const nn::Tensor& x, bool train);
  /// Accumulates parameter gradients from d(loss)/d(logits).
  void backward(const nn::Tensor& dlogits);

  std::vector<nn::Parameter*> parameters();
  nn::StateList state();

  void save(const std::filesystem::path& path, const ClipConfig& clip);
  /// Returns the head and the clip settings it was trained with.
  static std::pair<TemporalHead, ClipConfig> load(const std::filesystem::path& path);

  /// Pooled per-frame backbone features of a (N, 3, K, S, S) input in eval
  /// mode, shaped (N*K, C, 1, h, w) before the temporal stage. Not meaningful
  /// for prefix3d.
  nn::Tensor frame_features(const nn::Tensor& x);

  /// Head layers applied after the per-frame backbone (suffix3d only): the
  /// temporal convolution, its batch norm and the classifier.
  struct SuffixView {
    const nn::Tensor* conv_weight;
    const nn::Tensor* conv_bias;   // empty tensor when the conv has no bias
    nn::BatchNorm* norm;
    nn::Linear* classifier;
  };
  SuffixView suffix_view();

 private:
  struct Impl;
  TemporalHeadSpec spec_;
  std::unique_ptr<Impl> impl_;
};

/// Stacks patches into a normalised (N, 3, K, S, S) tensor. When crop is set,
/// every clip is cropped to crop_size starting at its (x, y) offset (the
/// same offset for all K frames of a clip).
nn::Tensor clips_to_tensor(const std::vector<const ClipSample*>& clips,
                           const PatchNormalization& norm = {});
nn::Tensor clips_to_tensor(const std::vector<const ClipSample*>& clips, int crop_size,
                           const std::vector<std::pair<int, int>>& offsets,
                           const PatchNormalization& norm = {});

struct TrainSchedule {
  int epochs = 10;
  double learning_rate = 0.01;
  int step_epochs = 4;        // lr multiplied by `gamma` after every step_epochs epochs
  double gamma = 0.1;
  int batch_size = 8;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  std::optional<double> stop_at_accuracy;  // stop once training accuracy reaches this
  std::uint64_t seed = 0;

  /// Learning rate used during epoch e (1-based).
  double learning_rate_at(int epoch) const;
};

struct EpochRecord {
  int epoch = 0;
  double learning_rate = 0.0;
  double loss = 0.0;
  double accuracy = 0.0;   // eval-mode accuracy on the training clips after the epoch
};

/// Minibatch SGD over labelled clips. Clips stored at clip.train_resize are
/// randomly cropped to clip.train_crop; other sizes are resampled first.
/// Throws ValidationError when clips lack labels or cover a single class.
std::vector<EpochRecord> train_head(TemporalHead& head, const std::vector<ClipSample>& clips,
                                    const ClipConfig& clip, const TrainSchedule& schedule);

/// Softmax probabilities of a single clip; verdict = smoke probability >= threshold.
ClipPrediction classify_clip(TemporalHead& head, const ClipSample& clip,
                             const ClipConfig& cfg = {}, double threshold = 0.5);

/// Clip patches resampled to `size` (no-op when already that size).
ClipSample resize_patches(const ClipSample& clip, int size);

}  // namespace smoky
