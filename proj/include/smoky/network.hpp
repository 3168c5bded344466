#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "smoky/architecture.hpp"
#include "smoky/image.hpp"
#include "smoky/nn/layers.hpp"

namespace smoky {

struct GhostConvWeights {
  nn::Tensor primary_weight;  // (m, n_in, 1, k, k)
  nn::Tensor primary_bias;    // (m)
  nn::Tensor cheap_weight;    // (s, 1, 1, dk, dk)
};

/// Random weights shaped for `spec`.
GhostConvWeights init_ghost_weights(const GhostConvSpec& spec, nn::Rng& rng);

/// Input (N, n_in, 1, H, W) -> (N, n, 1, H', W'). The first m channels come
/// from the primary convolution (SiLU when spec.primary_activation), the last
/// s from the linear depthwise op over the primary maps.
/// Throws ShapeError on channel mismatch.
nn::Tensor ghost_conv_forward(const GhostConvSpec& spec, const GhostConvWeights& weights,
                              const nn::Tensor& input);

/// One raw prediction decoded from the detection head, in input pixels.
struct Candidate {
  double x1 = 0, y1 = 0, x2 = 0, y2 = 0;
  double score = 0;
  int class_index = 0;
};

/// Inference-only network instantiated from an ArchitectureSpec. Convolutions
/// carry folded batch-norm biases and SiLU activations.
class DetectorNetwork {
 public:
  DetectorNetwork(ArchitectureSpec spec, std::uint64_t seed);

  const ArchitectureSpec& spec() const noexcept { return spec_; }
  std::int64_t parameter_count() const;

  /// x: (1, C, 1, H, W), H and W multiples of the largest stride.
  /// Returns one raw map per detection scale.
  std::vector<nn::Tensor> forward(const nn::Tensor& x) const;

  /// Decodes raw maps with the usual YOLOv5 parameterisation; keeps candidates
  /// whose objectness x class probability reaches min_score.
  std::vector<Candidate> decode(const std::vector<nn::Tensor>& maps, double min_score) const;

  /// RGB image scaled to [0, 1] as a (1, 3, 1, H, W) tensor.
  static nn::Tensor image_tensor(const Image& image);

  nn::StateList state();
  void save(const std::filesystem::path& path);
  /// Architecture is read from the checkpoint header.
  static DetectorNetwork load(const std::filesystem::path& path);

 private:
  struct ConvUnit {
    nn::Tensor weight;
    nn::Tensor bias;
    nn::ConvGeometry geometry;
    bool activation = true;
    bool ghost = false;
    GhostConvSpec ghost_spec;
    GhostConvWeights ghost_weights;
  };
  struct Layer {
    std::vector<ConvUnit> units;
  };

  nn::Tensor run_layer(std::size_t index, const std::vector<const nn::Tensor*>& inputs) const;
  static nn::Tensor apply(const ConvUnit& unit, const nn::Tensor& x);

  ArchitectureSpec spec_;
  std::vector<LayerShape> shapes_;
  std::vector<Layer> layers_;
};

}  // namespace smoky
