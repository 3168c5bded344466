#pragma once

#include <array>
#include <span>
#include <vector>

#include "smoky/nn/tensor.hpp"

namespace smoky::nn {

/// Kernel, stride and zero padding per (time, height, width) axis.
struct ConvGeometry {
  std::array<int, 3> kernel{1, 1, 1};
  std::array<int, 3> stride{1, 1, 1};
  std::array<int, 3> padding{0, 0, 0};
  int groups = 1;

  /// Output extent along axis a for an input extent `in`.
  int out_extent(int axis, int in) const noexcept {
    return (in + 2 * padding[axis] - kernel[axis]) / stride[axis] + 1;
  }
};

/// Spatial-only geometry: kernel k, stride s, padding p on H and W, depth 1.
ConvGeometry conv2d_geometry(int k, int s, int p, int groups = 1);

/// y = conv(x, weight) + bias. x: (N, Cin, T, H, W); weight:
/// (Cout, Cin/groups, kt, kh, kw); bias: (Cout) or empty.
/// Throws ShapeError on any mismatch.
Tensor conv3d_forward(const Tensor& x, const Tensor& weight, const Tensor& bias,
                      const ConvGeometry& g);

/// Accumulates into dweight/dbias (which must be sized like weight/bias) and
/// returns dx when want_dx is set.
Tensor conv3d_backward(const Tensor& x, const Tensor& weight, const ConvGeometry& g,
                       const Tensor& dy, Tensor& dweight, Tensor* dbias, bool want_dx);

/// Max pooling with implicit -inf padding. When `argmax` is non-null it receives
/// the flat input offset chosen for every output element.
Tensor max_pool3d_forward(const Tensor& x, const ConvGeometry& g,
                          std::vector<std::size_t>* argmax = nullptr);
Tensor max_pool3d_backward(const std::vector<int>& x_shape,
                           const std::vector<std::size_t>& argmax, const Tensor& dy);

/// Cheap per-channel linear op: output channel j is a kxk stride-1 'same'
/// convolution of input channel source[j] with kernel weight[j] (no bias).
/// x: (N, C, T, H, W); weight: (S, 1, 1, k, k).
Tensor depthwise_forward(const Tensor& x, const Tensor& weight, std::span<const int> source);

Tensor upsample_nearest2x(const Tensor& x);
/// Concatenation along the channel axis; all other axes must agree.
Tensor concat_channels(std::span<const Tensor* const> parts);
/// Copies channels [begin, end) of x.
Tensor slice_channels(const Tensor& x, int begin, int end);
/// Copies time steps [begin, begin+len) of x.
Tensor slice_time(const Tensor& x, int begin, int len);
/// Inverse of slice_time for gradients: zero tensor of time extent t_full with dy placed at begin.
Tensor pad_time(const Tensor& dy, int begin, int t_full);

/// (N, C, T, H, W) -> (N, T, C, H, W); its own inverse.
Tensor swap_channel_time(const Tensor& x);
/// Mean over time, keeping a unit time axis; backward spreads dy evenly.
Tensor mean_time(const Tensor& x);
Tensor mean_time_backward(const Tensor& dy, int t_full);
/// Mean over (T, H, W): (N, C, T, H, W) -> (N, C).
Tensor global_avg_pool(const Tensor& x);
Tensor global_avg_pool_backward(const Tensor& dy, const std::vector<int>& x_shape);

void silu_inplace(Tensor& x) noexcept;
void relu_inplace(Tensor& x) noexcept;

/// Row-wise softmax of an (N, K) tensor.
Tensor softmax_rows(const Tensor& logits);

}  // namespace smoky::nn
