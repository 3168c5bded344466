#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace smoky::nn {

/// Dense float tensor, row-major. Convolution code uses the 5-D layout
/// (batch, channels, time, height, width).
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<int> shape, float fill = 0.0f);

  const std::vector<int>& shape() const noexcept { return shape_; }
  int rank() const noexcept { return static_cast<int>(shape_.size()); }
  int dim(int i) const { return shape_.at(static_cast<std::size_t>(i)); }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  float* data() noexcept { return data_.data(); }
  const float* data() const noexcept { return data_.data(); }
  std::span<float> values() noexcept { return data_; }
  std::span<const float> values() const noexcept { return data_; }

  float& operator[](std::size_t i) noexcept { return data_[i]; }
  float operator[](std::size_t i) const noexcept { return data_[i]; }

  /// Element offset of a 5-D index.
  std::size_t offset(int n, int c, int t, int h, int w) const noexcept {
    return ((((static_cast<std::size_t>(n) * shape_[1] + c) * shape_[2] + t) * shape_[3] + h) *
            shape_[4]) + w;
  }
  float& at(int n, int c, int t, int h, int w) noexcept { return data_[offset(n, c, t, h, w)]; }
  float at(int n, int c, int t, int h, int w) const noexcept {
    return data_[offset(n, c, t, h, w)];
  }

  void fill(float v) noexcept;
  /// Same data, new shape of equal element count. Throws ShapeError otherwise.
  Tensor reshaped(std::vector<int> shape) const;
  bool same_shape(const Tensor& o) const noexcept { return shape_ == o.shape_; }

  Tensor& operator+=(const Tensor& o);
  Tensor& operator*=(float s) noexcept;

 private:
  std::vector<int> shape_;
  std::vector<float> data_;
};

std::size_t element_count(const std::vector<int>& shape);

}  // namespace smoky::nn
