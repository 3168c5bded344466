#pragma once

#include <array>
#include <cstdint>
#include <string_view>
#include <string>
#include <vector>

namespace smoky {

/// GhostConv block: `primary_channels` maps from an ordinary convolution
/// (optionally activated) and `ghost_channels` maps from a cheap depthwise
/// linear op over the primary maps, concatenated to `out_channels`.
struct GhostConvSpec {
  int in_channels = 0;
  int out_channels = 0;
  int primary_channels = 0;
  int ghost_channels = 0;
  int kernel = 1;
  int stride = 1;
  bool primary_activation = true;
  int cheap_kernel = 5;

  /// primary = ceil(n / ratio), ghost = n - primary.
  static GhostConvSpec with_ratio(int in_channels, int out_channels, int kernel, int stride,
                                  int ratio = 2, bool activation = true, int cheap_kernel = 5);

  /// Throws ValidationError unless m + s = n, 1 <= m < n, kernels odd/positive.
  void validate() const;

  /// Primary channel that ghost map j is derived from.
  int ghost_source(int j) const noexcept {
    return static_cast<int>(static_cast<long long>(j) * primary_channels / ghost_channels);
  }
};

enum class LayerType { conv, ghost_conv, c3, c3ghost, sppf, upsample, concat, detect };

std::string_view to_string(LayerType t) noexcept;

struct LayerSpec {
  LayerType type = LayerType::conv;
  std::vector<int> from{-1};   // -1: previous layer; otherwise absolute layer index
  int out_channels = 0;
  int kernel = 1;
  int stride = 1;
  int padding = -1;            // -1: kernel / 2
  int repeats = 1;             // bottlenecks inside C3 / C3Ghost
  bool shortcut = true;
  bool ghost_outer = false;    // C3Ghost: also make cv1/cv2/cv3 GhostConv
  int ghost_ratio = 2;
  int cheap_kernel = 5;
  int num_classes = 1;         // detect
  std::vector<std::array<double, 6>> anchors;  // detect: 3 (w,h) pairs per level

  int effective_padding() const noexcept { return padding >= 0 ? padding : kernel / 2; }
  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

/// Declarative network description, YOLO-style: each layer reads the outputs
/// named in `from`.
struct ArchitectureSpec {
  std::string name;
  int input_channels = 3;
  std::vector<LayerSpec> layers;

  friend bool operator==(const ArchitectureSpec&, const ArchitectureSpec&) = default;
};

struct LayerShape {
  int channels = 0;
  int height = 0;
  int width = 0;
  int stride = 1;   // cumulative down-sampling relative to the input
};

/// Output shape of every layer for an input of the given size; the detect
/// layer reports the shapes of its inputs' prediction maps through
/// prediction_shapes(). Throws ShapeError when layers do not compose.
std::vector<LayerShape> infer_shapes(const ArchitectureSpec& spec, int height, int width);

/// Shapes (channels = anchors * (5 + classes)) of the detection outputs.
std::vector<LayerShape> prediction_shapes(const ArchitectureSpec& spec, int height, int width);

struct ModelBudget {
  std::int64_t parameters = 0;
  std::int64_t macs = 0;   // multiply-accumulates at the given input size

  /// FLOPs reported as 2 x MACs.
  double flops() const noexcept { return 2.0 * static_cast<double>(macs); }
  ModelBudget& operator+=(const ModelBudget& o) noexcept {
    parameters += o.parameters;
    macs += o.macs;
    return *this;
  }
  friend bool operator==(const ModelBudget&, const ModelBudget&) = default;
};

/// Parameter and MAC totals from closed-form per-layer formulas. Convolutions
/// count weight + one bias per output channel (batch norm folded); the ghost
/// cheap op has no bias.
ModelBudget compute_budget(const ArchitectureSpec& spec, int height, int width);
std::vector<ModelBudget> layer_budgets(const ArchitectureSpec& spec, int height, int width);

// Closed forms for single blocks at spatial output size out_h x out_w.
ModelBudget conv_budget(int in_channels, int out_channels, int kernel, int groups, int out_h,
                        int out_w);
ModelBudget ghost_conv_budget(const GhostConvSpec& spec, int out_h, int out_w);

/// C3Ghost fragment (single layer) after validating channel counts.
LayerSpec build_c3ghost(int in_channels, int out_channels, int bottleneck_count = 1);

struct TinyOptions {
  int num_classes = 1;
  int ghost_ratio = 2;
  int cheap_kernel = 5;
  bool ghost_outer = false;      // ghost the C3 cv1/cv2/cv3 too
  bool ghost_neck_convs = false; // ghost the plain neck convolutions too
};

/// Reference YOLOv5n layout (width 0.25, depth 0.33).
ArchitectureSpec build_yolov5n(int num_classes = 80);
/// Light-weight smoke detector: YOLOv5n layout, every C3 at depth one and
/// replaced by C3Ghost, single smoke class by default.
ArchitectureSpec build_yolov5tiny(const TinyOptions& options = {});

/// Human-readable, diffable text form (one layer per line).
std::string to_text(const ArchitectureSpec& spec);
/// Throws ParseError naming the line on malformed input.
ArchitectureSpec architecture_from_text(const std::string& text);

}  // namespace smoky
