#include "smoky/network.hpp"

#include <cmath>
#include <numeric>

#include "smoky/errors.hpp"
#include "smoky/nn/checkpoint.hpp"

namespace smoky {

using nn::Tensor;

namespace {

void init_normal(Tensor& t, double stddev, nn::Rng& rng) {
  std::normal_distribution<float> dist(0.0f, static_cast<float>(stddev));
  for (auto& v : t.values()) v = dist(rng);
}

Tensor conv_weight(int in, int out, int k, int groups, nn::Rng& rng) {
  Tensor w({out, in / groups, 1, k, k});
  init_normal(w, std::sqrt(2.0 / (static_cast<double>(in / groups) * k * k)), rng);
  return w;
}

std::vector<int> ghost_sources(const GhostConvSpec& spec) {
  std::vector<int> src(static_cast<std::size_t>(spec.ghost_channels));
  for (int j = 0; j < spec.ghost_channels; ++j) src[static_cast<std::size_t>(j)] = spec.ghost_source(j);
  return src;
}

}  // namespace

GhostConvWeights init_ghost_weights(const GhostConvSpec& spec, nn::Rng& rng) {
  spec.validate();
  GhostConvWeights w;
  w.primary_weight = conv_weight(spec.in_channels, spec.primary_channels, spec.kernel, 1, rng);
  w.primary_bias = Tensor({spec.primary_channels});
  w.cheap_weight = Tensor({spec.ghost_channels, 1, 1, spec.cheap_kernel, spec.cheap_kernel});
  init_normal(w.cheap_weight, 1.0 / spec.cheap_kernel, rng);
  return w;
}

Tensor ghost_conv_forward(const GhostConvSpec& spec, const GhostConvWeights& weights,
                          const Tensor& input) {
  spec.validate();
  if (input.rank() != 5 || input.dim(1) != spec.in_channels) {
    throw ShapeError("GhostConv: expected " + std::to_string(spec.in_channels) +
                     " input channels");
  }
  const auto g = nn::conv2d_geometry(spec.kernel, spec.stride, spec.kernel / 2);
  Tensor primary = nn::conv3d_forward(input, weights.primary_weight, weights.primary_bias, g);
  if (spec.primary_activation) nn::silu_inplace(primary);
  const auto src = ghost_sources(spec);
  const Tensor ghost = nn::depthwise_forward(primary, weights.cheap_weight, src);
  const Tensor* parts[] = {&primary, &ghost};
  return nn::concat_channels(parts);
}

DetectorNetwork::DetectorNetwork(ArchitectureSpec spec, std::uint64_t seed)
    : spec_(std::move(spec)) {
  shapes_ = infer_shapes(spec_, 640, 640);
  nn::Rng rng(seed);
  const LayerShape image{spec_.input_channels, 640, 640, 1};

  auto plain = [&](int in, int out, int k, int s, int p, bool act, bool bias_random) {
    ConvUnit u;
    u.weight = conv_weight(in, out, k, 1, rng);
    u.bias = Tensor({out});
    if (bias_random) init_normal(u.bias, 0.1, rng);
    u.geometry = nn::conv2d_geometry(k, s, p);
    u.activation = act;
    return u;
  };
  auto ghost = [&](int in, int out, int k, int s, const LayerSpec& l, bool act) {
    ConvUnit u;
    u.ghost = true;
    u.ghost_spec = GhostConvSpec::with_ratio(in, out, k, s, l.ghost_ratio, act, l.cheap_kernel);
    u.ghost_weights = init_ghost_weights(u.ghost_spec, rng);
    return u;
  };

  for (std::size_t i = 0; i < spec_.layers.size(); ++i) {
    const auto& l = spec_.layers[i];
    std::vector<int> in_channels;
    for (int f : l.from) {
      if (f == -1) {
        in_channels.push_back(i == 0 ? image.channels : shapes_[i - 1].channels);
      } else {
        in_channels.push_back(shapes_[static_cast<std::size_t>(f)].channels);
      }
    }
    const int cin = in_channels.front();
    Layer layer;
    auto& u = layer.units;
    switch (l.type) {
      case LayerType::conv:
        u.push_back(plain(cin, l.out_channels, l.kernel, l.stride, l.effective_padding(), true, false));
        break;
      case LayerType::ghost_conv:
        u.push_back(ghost(cin, l.out_channels, l.kernel, l.stride, l, true));
        break;
      case LayerType::c3:
      case LayerType::c3ghost: {
        const int c = l.out_channels / 2;
        const bool outer = l.type == LayerType::c3ghost && l.ghost_outer;
        auto pw = [&](int a, int z) {
          return outer ? ghost(a, z, 1, 1, l, true) : plain(a, z, 1, 1, 0, true, false);
        };
        u.push_back(pw(cin, c));
        u.push_back(pw(cin, c));
        u.push_back(pw(2 * c, l.out_channels));
        for (int r = 0; r < l.repeats; ++r) {
          if (l.type == LayerType::c3) {
            u.push_back(plain(c, c, 1, 1, 0, true, false));
            u.push_back(plain(c, c, 3, 1, 1, true, false));
          } else {
            u.push_back(ghost(c, c / 2, 1, 1, l, true));
            u.push_back(ghost(c / 2, c, 1, 1, l, false));
          }
        }
        break;
      }
      case LayerType::sppf:
        u.push_back(plain(cin, cin / 2, 1, 1, 0, true, false));
        u.push_back(plain(4 * (cin / 2), l.out_channels, 1, 1, 0, true, false));
        break;
      case LayerType::upsample:
      case LayerType::concat:
        break;
      case LayerType::detect:
        for (int c : in_channels) {
          u.push_back(plain(c, 3 * (5 + l.num_classes), 1, 1, 0, false, true));
        }
        break;
    }
    layers_.push_back(std::move(layer));
  }
}

std::int64_t DetectorNetwork::parameter_count() const {
  std::int64_t total = 0;
  for (const auto& layer : layers_) {
    for (const auto& u : layer.units) {
      if (u.ghost) {
        total += static_cast<std::int64_t>(u.ghost_weights.primary_weight.size() +
                                           u.ghost_weights.primary_bias.size() +
                                           u.ghost_weights.cheap_weight.size());
      } else {
        total += static_cast<std::int64_t>(u.weight.size() + u.bias.size());
      }
    }
  }
  return total;
}

Tensor DetectorNetwork::apply(const ConvUnit& unit, const Tensor& x) {
  if (unit.ghost) return ghost_conv_forward(unit.ghost_spec, unit.ghost_weights, x);
  Tensor y = nn::conv3d_forward(x, unit.weight, unit.bias, unit.geometry);
  if (unit.activation) nn::silu_inplace(y);
  return y;
}

Tensor DetectorNetwork::run_layer(std::size_t index,
                                  const std::vector<const Tensor*>& inputs) const {
  const auto& l = spec_.layers[index];
  const auto& u = layers_[index].units;
  const Tensor& x = *inputs.front();
  switch (l.type) {
    case LayerType::conv:
    case LayerType::ghost_conv:
      return apply(u[0], x);
    case LayerType::c3:
    case LayerType::c3ghost: {
      Tensor a = apply(u[0], x);
      for (int r = 0; r < l.repeats; ++r) {
        const auto& first = u[3 + 2 * static_cast<std::size_t>(r)];
        const auto& second = u[4 + 2 * static_cast<std::size_t>(r)];
        Tensor y = apply(second, apply(first, a));
        if (l.type == LayerType::c3ghost || l.shortcut) y += a;
        a = std::move(y);
      }
      const Tensor b = apply(u[1], x);
      const Tensor* parts[] = {&a, &b};
      return apply(u[2], nn::concat_channels(parts));
    }
    case LayerType::sppf: {
      const auto pool = nn::conv2d_geometry(l.kernel, 1, l.kernel / 2);
      const Tensor y0 = apply(u[0], x);
      const Tensor y1 = nn::max_pool3d_forward(y0, pool);
      const Tensor y2 = nn::max_pool3d_forward(y1, pool);
      const Tensor y3 = nn::max_pool3d_forward(y2, pool);
      const Tensor* parts[] = {&y0, &y1, &y2, &y3};
      return apply(u[1], nn::concat_channels(parts));
    }
    case LayerType::upsample:
      return nn::upsample_nearest2x(x);
    case LayerType::concat:
      return nn::concat_channels(inputs);
    case LayerType::detect:
      break;
  }
  throw ShapeError("detect layer is evaluated by forward()");
}

std::vector<Tensor> DetectorNetwork::forward(const Tensor& x) const {
  if (x.rank() != 5 || x.dim(0) != 1 || x.dim(1) != spec_.input_channels || x.dim(2) != 1) {
    throw ShapeError("detector input must be (1, " + std::to_string(spec_.input_channels) +
                     ", 1, H, W)");
  }
  int max_stride = 1;
  for (const auto& s : shapes_) max_stride = std::max(max_stride, s.stride);
  if (x.dim(3) % max_stride != 0 || x.dim(4) % max_stride != 0) {
    throw ShapeError("detector input size must be a multiple of " + std::to_string(max_stride));
  }
  std::vector<Tensor> outputs(spec_.layers.size());
  std::vector<Tensor> maps;
  for (std::size_t i = 0; i < spec_.layers.size(); ++i) {
    const auto& l = spec_.layers[i];
    std::vector<const Tensor*> inputs;
    for (int f : l.from) {
      inputs.push_back(f == -1 ? (i == 0 ? &x : &outputs[i - 1]) : &outputs[static_cast<std::size_t>(f)]);
    }
    if (l.type == LayerType::detect) {
      for (std::size_t j = 0; j < inputs.size(); ++j) {
        maps.push_back(apply(layers_[i].units[j], *inputs[j]));
      }
      continue;
    }
    outputs[i] = run_layer(i, inputs);
  }
  return maps;
}

std::vector<Candidate> DetectorNetwork::decode(const std::vector<Tensor>& maps,
                                               double min_score) const {
  const LayerSpec* head = nullptr;
  for (const auto& l : spec_.layers) {
    if (l.type == LayerType::detect) head = &l;
  }
  if (head == nullptr || head->anchors.size() != maps.size()) {
    throw ShapeError("prediction maps do not match the detection head");
  }
  const int nc = head->num_classes;
  const int no = 5 + nc;
  const auto sigmoid = [](float v) { return 1.0 / (1.0 + std::exp(-static_cast<double>(v))); };
  const auto pred_shapes = prediction_shapes(spec_, 640, 640);
  std::vector<Candidate> out;
  for (std::size_t level = 0; level < maps.size(); ++level) {
    const Tensor& m = maps[level];
    const int h = m.dim(3);
    const int w = m.dim(4);
    const double stride = pred_shapes[level].stride;
    for (int a = 0; a < 3; ++a) {
      const double aw = head->anchors[level][2 * static_cast<std::size_t>(a)];
      const double ah = head->anchors[level][2 * static_cast<std::size_t>(a) + 1];
      for (int gy = 0; gy < h; ++gy) {
        for (int gx = 0; gx < w; ++gx) {
          auto v = [&](int k) { return sigmoid(m.at(0, a * no + k, 0, gy, gx)); };
          const double obj = v(4);
          if (obj < min_score) continue;
          int best = 0;
          double best_p = -1.0;
          for (int c = 0; c < nc; ++c) {
            const double p = v(5 + c);
            if (p > best_p) {
              best_p = p;
              best = c;
            }
          }
          const double score = obj * best_p;
          if (score < min_score) continue;
          const double cx = (2.0 * v(0) - 0.5 + gx) * stride;
          const double cy = (2.0 * v(1) - 0.5 + gy) * stride;
          const double bw = std::pow(2.0 * v(2), 2) * aw;
          const double bh = std::pow(2.0 * v(3), 2) * ah;
          out.push_back({cx - bw / 2, cy - bh / 2, cx + bw / 2, cy + bh / 2, score, best});
        }
      }
    }
  }
  return out;
}

Tensor DetectorNetwork::image_tensor(const Image& image) {
  Tensor t({1, 3, 1, image.height(), image.width()});
  const auto bytes = image.bytes();
  const std::size_t plane = static_cast<std::size_t>(image.width()) * image.height();
  for (std::size_t p = 0; p < plane; ++p) {
    for (std::size_t c = 0; c < 3; ++c) t[c * plane + p] = bytes[3 * p + c] / 255.0f;
  }
  return t;
}

nn::StateList DetectorNetwork::state() {
  nn::StateList out;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    auto& units = layers_[i].units;
    for (std::size_t j = 0; j < units.size(); ++j) {
      const std::string p = "layer" + std::to_string(i) + ".unit" + std::to_string(j) + ".";
      auto& u = units[j];
      if (u.ghost) {
        out.emplace_back(p + "primary_weight", &u.ghost_weights.primary_weight);
        out.emplace_back(p + "primary_bias", &u.ghost_weights.primary_bias);
        out.emplace_back(p + "cheap_weight", &u.ghost_weights.cheap_weight);
      } else {
        out.emplace_back(p + "weight", &u.weight);
        out.emplace_back(p + "bias", &u.bias);
      }
    }
  }
  return out;
}

void DetectorNetwork::save(const std::filesystem::path& path) {
  nlohmann::json meta;
  meta["kind"] = "detector";
  meta["architecture"] = to_text(spec_);
  nn::save_checkpoint(path, meta, state());
}

DetectorNetwork DetectorNetwork::load(const std::filesystem::path& path) {
  const auto meta = nn::read_checkpoint_meta(path);
  if (meta.value("kind", "") != "detector" || !meta.contains("architecture")) {
    throw ConfigError(path.string() + ": not a detector checkpoint");
  }
  DetectorNetwork net(architecture_from_text(meta["architecture"].get<std::string>()), 0);
  nn::load_checkpoint(path, net.state());
  return net;
}

}  // namespace smoky
