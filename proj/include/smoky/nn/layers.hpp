#pragma once

#include <random>
#include <string>
#include <utility>
#include <vector>

#include "smoky/nn/ops.hpp"
#include "smoky/nn/tensor.hpp"

namespace smoky::nn {

using Rng = std::mt19937_64;

struct Parameter {
  Tensor value;
  Tensor grad;
  Tensor velocity;

  explicit Parameter(std::vector<int> shape = {0})
      : value(shape), grad(shape), velocity(shape) {}
  void zero_grad() noexcept { grad.fill(0.0f); }
};

/// Named view of every tensor that defines a module's state (trainable
/// parameters and running statistics), in a fixed order.
using StateList = std::vector<std::pair<std::string, Tensor*>>;

/// Trainable layers cache what their backward pass needs during forward.
/// backward() must follow the matching forward(train=true) call.
class Conv3d {
 public:
  Conv3d() = default;
  Conv3d(int in_channels, int out_channels, ConvGeometry geometry, bool with_bias, Rng& rng);

  Tensor forward(const Tensor& x, bool train);
  Tensor backward(const Tensor& dy, bool want_dx = true);

  void parameters(std::vector<Parameter*>& out);
  void state(const std::string& prefix, StateList& out);

  const ConvGeometry& geometry() const noexcept { return geometry_; }
  Parameter& weight() noexcept { return weight_; }
  const Parameter& weight() const noexcept { return weight_; }
  bool has_bias() const noexcept { return has_bias_; }
  Parameter& bias() noexcept { return bias_; }
  const Parameter& bias() const noexcept { return bias_; }

 private:
  ConvGeometry geometry_;
  bool has_bias_ = false;
  Parameter weight_;
  Parameter bias_{std::vector<int>{0}};
  Tensor input_;
};

/// Batch normalisation over every axis except channels.
class BatchNorm {
 public:
  BatchNorm() = default;
  explicit BatchNorm(int channels, float momentum = 0.1f, float eps = 1e-5f);

  Tensor forward(const Tensor& x, bool train);
  Tensor backward(const Tensor& dy);

  void parameters(std::vector<Parameter*>& out);
  void state(const std::string& prefix, StateList& out);

 private:
  int channels_ = 0;
  float momentum_ = 0.1f;
  float eps_ = 1e-5f;
  Parameter gamma_;
  Parameter beta_;
  Tensor running_mean_;
  Tensor running_var_;
  Tensor normalized_;
  std::vector<float> inv_std_;
};

class ReLU {
 public:
  Tensor forward(const Tensor& x, bool train);
  Tensor backward(const Tensor& dy) const;

 private:
  Tensor output_;
};

class MaxPool3d {
 public:
  MaxPool3d() = default;
  explicit MaxPool3d(ConvGeometry geometry) : geometry_(geometry) {}

  Tensor forward(const Tensor& x, bool train);
  Tensor backward(const Tensor& dy) const;

 private:
  ConvGeometry geometry_;
  std::vector<int> input_shape_;
  std::vector<std::size_t> argmax_;
};

/// Fully connected layer on (N, F) inputs.
class Linear {
 public:
  Linear() = default;
  Linear(int in_features, int out_features, Rng& rng);

  Tensor forward(const Tensor& x, bool train);
  Tensor backward(const Tensor& dy);

  void parameters(std::vector<Parameter*>& out);
  void state(const std::string& prefix, StateList& out);

  int in_features() const noexcept { return in_; }
  int out_features() const noexcept { return out_; }
  Parameter& weight() noexcept { return weight_; }
  Parameter& bias() noexcept { return bias_; }

 private:
  int in_ = 0;
  int out_ = 0;
  Parameter weight_;
  Parameter bias_;
  Tensor input_;
};

/// Mean softmax cross-entropy over the batch. Returns the loss and writes the
/// gradient with respect to the logits.
double softmax_cross_entropy(const Tensor& logits, const std::vector<int>& labels,
                             Tensor& dlogits);

struct SgdConfig {
  double learning_rate = 0.01;
  double momentum = 0.9;
  double weight_decay = 5e-4;
};

void sgd_step(const std::vector<Parameter*>& params, const SgdConfig& cfg);

}  // namespace smoky::nn
