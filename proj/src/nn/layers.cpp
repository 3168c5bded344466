#include "smoky/nn/layers.hpp"

#include <cmath>

#include "smoky/errors.hpp"

namespace smoky::nn {

Conv3d::Conv3d(int in_channels, int out_channels, ConvGeometry geometry, bool with_bias,
               Rng& rng)
    : geometry_(geometry),
      has_bias_(with_bias),
      weight_({out_channels, in_channels / geometry.groups, geometry.kernel[0],
               geometry.kernel[1], geometry.kernel[2]}),
      bias_(std::vector<int>{with_bias ? out_channels : 0}) {
  // Kaiming normal, fan-out mode, ReLU gain.
  const double fan_out = static_cast<double>(out_channels) * geometry.kernel[0] *
                         geometry.kernel[1] * geometry.kernel[2] / geometry.groups;
  std::normal_distribution<float> dist(0.0f, static_cast<float>(std::sqrt(2.0 / fan_out)));
  for (float& v : weight_.value.values()) v = dist(rng);
}

Tensor Conv3d::forward(const Tensor& x, bool train) {
  if (train) input_ = x;
  return conv3d_forward(x, weight_.value, bias_.value, geometry_);
}

Tensor Conv3d::backward(const Tensor& dy, bool want_dx) {
  if (input_.empty()) throw ShapeError("Conv3d::backward without a cached forward");
  return conv3d_backward(input_, weight_.value, geometry_, dy, weight_.grad,
                         has_bias_ ? &bias_.grad : nullptr, want_dx);
}

void Conv3d::parameters(std::vector<Parameter*>& out) {
  out.push_back(&weight_);
  if (has_bias_) out.push_back(&bias_);
}

void Conv3d::state(const std::string& prefix, StateList& out) {
  out.emplace_back(prefix + ".weight", &weight_.value);
  if (has_bias_) out.emplace_back(prefix + ".bias", &bias_.value);
}

BatchNorm::BatchNorm(int channels, float momentum, float eps)
    : channels_(channels),
      momentum_(momentum),
      eps_(eps),
      gamma_({channels}),
      beta_({channels}),
      running_mean_({channels}, 0.0f),
      running_var_({channels}, 1.0f) {
  gamma_.value.fill(1.0f);
}

Tensor BatchNorm::forward(const Tensor& x, bool train) {
  if (x.rank() < 2 || x.dim(1) != channels_) throw ShapeError("BatchNorm: channel mismatch");
  const int n = x.dim(0);
  const std::size_t inner = x.size() / (static_cast<std::size_t>(n) * channels_);
  Tensor y(x.shape());
  if (!train) {
    for (int a = 0; a < n; ++a) {
      for (int c = 0; c < channels_; ++c) {
        const float scale = gamma_.value[c] / std::sqrt(running_var_[c] + eps_);
        const float shift = beta_.value[c] - running_mean_[c] * scale;
        const std::size_t base = (static_cast<std::size_t>(a) * channels_ + c) * inner;
        for (std::size_t i = 0; i < inner; ++i) y[base + i] = x[base + i] * scale + shift;
      }
    }
    return y;
  }
  normalized_ = Tensor(x.shape());
  inv_std_.assign(static_cast<std::size_t>(channels_), 0.0f);
  const double count = static_cast<double>(n) * inner;
  for (int c = 0; c < channels_; ++c) {
    double sum = 0.0;
    for (int a = 0; a < n; ++a) {
      const std::size_t base = (static_cast<std::size_t>(a) * channels_ + c) * inner;
      for (std::size_t i = 0; i < inner; ++i) sum += x[base + i];
    }
    const double mean = sum / count;
    double sq = 0.0;
    for (int a = 0; a < n; ++a) {
      const std::size_t base = (static_cast<std::size_t>(a) * channels_ + c) * inner;
      for (std::size_t i = 0; i < inner; ++i) {
        const double d = x[base + i] - mean;
        sq += d * d;
      }
    }
    const double var = sq / count;
    const float inv = static_cast<float>(1.0 / std::sqrt(var + eps_));
    inv_std_[static_cast<std::size_t>(c)] = inv;
    for (int a = 0; a < n; ++a) {
      const std::size_t base = (static_cast<std::size_t>(a) * channels_ + c) * inner;
      for (std::size_t i = 0; i < inner; ++i) {
        const float xn = static_cast<float>((x[base + i] - mean) * inv);
        normalized_[base + i] = xn;
        y[base + i] = xn * gamma_.value[c] + beta_.value[c];
      }
    }
    const double unbiased = count > 1 ? var * count / (count - 1) : var;
    running_mean_[c] = static_cast<float>((1 - momentum_) * running_mean_[c] + momentum_ * mean);
    running_var_[c] = static_cast<float>((1 - momentum_) * running_var_[c] + momentum_ * unbiased);
  }
  return y;
}

Tensor BatchNorm::backward(const Tensor& dy) {
  if (!dy.same_shape(normalized_)) throw ShapeError("BatchNorm::backward shape mismatch");
  const int n = dy.dim(0);
  const std::size_t inner = dy.size() / (static_cast<std::size_t>(n) * channels_);
  const double count = static_cast<double>(n) * inner;
  Tensor dx(dy.shape());
  for (int c = 0; c < channels_; ++c) {
    double sum_dy = 0.0;
    double sum_dy_xn = 0.0;
    for (int a = 0; a < n; ++a) {
      const std::size_t base = (static_cast<std::size_t>(a) * channels_ + c) * inner;
      for (std::size_t i = 0; i < inner; ++i) {
        sum_dy += dy[base + i];
        sum_dy_xn += static_cast<double>(dy[base + i]) * normalized_[base + i];
      }
    }
    gamma_.grad[c] += static_cast<float>(sum_dy_xn);
    beta_.grad[c] += static_cast<float>(sum_dy);
    const double g = gamma_.value[c] * inv_std_[static_cast<std::size_t>(c)];
    const double mean_dy = sum_dy / count;
    const double mean_dy_xn = sum_dy_xn / count;
    for (int a = 0; a < n; ++a) {
      const std::size_t base = (static_cast<std::size_t>(a) * channels_ + c) * inner;
      for (std::size_t i = 0; i < inner; ++i) {
        dx[base + i] = static_cast<float>(
            g * (dy[base + i] - mean_dy - normalized_[base + i] * mean_dy_xn));
      }
    }
  }
  return dx;
}

void BatchNorm::parameters(std::vector<Parameter*>& out) {
  out.push_back(&gamma_);
  out.push_back(&beta_);
}

void BatchNorm::state(const std::string& prefix, StateList& out) {
  out.emplace_back(prefix + ".gamma", &gamma_.value);
  out.emplace_back(prefix + ".beta", &beta_.value);
  out.emplace_back(prefix + ".running_mean", &running_mean_);
  out.emplace_back(prefix + ".running_var", &running_var_);
}

Tensor ReLU::forward(const Tensor& x, bool train) {
  Tensor y = x;
  relu_inplace(y);
  if (train) output_ = y;
  return y;
}

Tensor ReLU::backward(const Tensor& dy) const {
  if (!dy.same_shape(output_)) throw ShapeError("ReLU::backward shape mismatch");
  Tensor dx = dy;
  for (std::size_t i = 0; i < dx.size(); ++i) {
    if (output_[i] <= 0.0f) dx[i] = 0.0f;
  }
  return dx;
}

Tensor MaxPool3d::forward(const Tensor& x, bool train) {
  if (!train) return max_pool3d_forward(x, geometry_);
  input_shape_ = x.shape();
  return max_pool3d_forward(x, geometry_, &argmax_);
}

Tensor MaxPool3d::backward(const Tensor& dy) const {
  return max_pool3d_backward(input_shape_, argmax_, dy);
}

Linear::Linear(int in_features, int out_features, Rng& rng)
    : in_(in_features), out_(out_features), weight_({out_features, in_features}),
      bias_({out_features}) {
  const float bound = 1.0f / std::sqrt(static_cast<float>(in_features));
  std::uniform_real_distribution<float> dist(-bound, bound);
  for (float& v : weight_.value.values()) v = dist(rng);
  for (float& v : bias_.value.values()) v = dist(rng);
}

Tensor Linear::forward(const Tensor& x, bool train) {
  if (x.rank() != 2 || x.dim(1) != in_) throw ShapeError("Linear: input feature mismatch");
  if (train) input_ = x;
  const int n = x.dim(0);
  Tensor y({n, out_});
  for (int a = 0; a < n; ++a) {
    for (int o = 0; o < out_; ++o) {
      double acc = bias_.value[o];
      for (int i = 0; i < in_; ++i) {
        acc += static_cast<double>(weight_.value[static_cast<std::size_t>(o) * in_ + i]) *
               x[static_cast<std::size_t>(a) * in_ + i];
      }
      y[static_cast<std::size_t>(a) * out_ + o] = static_cast<float>(acc);
    }
  }
  return y;
}

Tensor Linear::backward(const Tensor& dy) {
  const int n = dy.dim(0);
  Tensor dx({n, in_});
  for (int a = 0; a < n; ++a) {
    for (int o = 0; o < out_; ++o) {
      const float g = dy[static_cast<std::size_t>(a) * out_ + o];
      bias_.grad[o] += g;
      for (int i = 0; i < in_; ++i) {
        const std::size_t wi = static_cast<std::size_t>(o) * in_ + i;
        weight_.grad[wi] += g * input_[static_cast<std::size_t>(a) * in_ + i];
        dx[static_cast<std::size_t>(a) * in_ + i] += g * weight_.value[wi];
      }
    }
  }
  return dx;
}

void Linear::parameters(std::vector<Parameter*>& out) {
  out.push_back(&weight_);
  out.push_back(&bias_);
}

void Linear::state(const std::string& prefix, StateList& out) {
  out.emplace_back(prefix + ".weight", &weight_.value);
  out.emplace_back(prefix + ".bias", &bias_.value);
}

double softmax_cross_entropy(const Tensor& logits, const std::vector<int>& labels,
                             Tensor& dlogits) {
  const Tensor p = softmax_rows(logits);
  const int n = logits.dim(0), k = logits.dim(1);
  if (static_cast<int>(labels.size()) != n) throw ShapeError("label count differs from batch");
  dlogits = Tensor(logits.shape());
  double loss = 0.0;
  for (int a = 0; a < n; ++a) {
    const int y = labels[static_cast<std::size_t>(a)];
    if (y < 0 || y >= k) throw RangeError("class label out of range");
    loss -= std::log(std::max(1e-12, static_cast<double>(p[static_cast<std::size_t>(a) * k + y])));
    for (int j = 0; j < k; ++j) {
      const std::size_t i = static_cast<std::size_t>(a) * k + j;
      dlogits[i] = (p[i] - (j == y ? 1.0f : 0.0f)) / static_cast<float>(n);
    }
  }
  return loss / n;
}

void sgd_step(const std::vector<Parameter*>& params, const SgdConfig& cfg) {
  const auto lr = static_cast<float>(cfg.learning_rate);
  const auto mu = static_cast<float>(cfg.momentum);
  const auto wd = static_cast<float>(cfg.weight_decay);
  for (Parameter* p : params) {
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      const float g = p->grad[i] + wd * p->value[i];
      p->velocity[i] = mu * p->velocity[i] + g;
      p->value[i] -= lr * p->velocity[i];
    }
  }
}

}  // namespace smoky::nn
