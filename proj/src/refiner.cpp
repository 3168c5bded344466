#include "smoky/refiner.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "smoky/errors.hpp"
#include "smoky/nn/checkpoint.hpp"

namespace smoky {

using nn::Tensor;

std::string_view to_string(HeadVariant v) noexcept {
  switch (v) {
    case HeadVariant::prefix3d: return "prefix3d";
    case HeadVariant::suffix3d: return "suffix3d";
    case HeadVariant::avg2d: return "avg2d";
    case HeadVariant::cat2d: return "cat2d";
  }
  return "suffix3d";
}

HeadVariant parse_head_variant(std::string_view name) {
  for (auto v : {HeadVariant::prefix3d, HeadVariant::suffix3d, HeadVariant::avg2d,
                 HeadVariant::cat2d}) {
    if (to_string(v) == name) return v;
  }
  throw ConfigError("unknown refiner variant '" + std::string(name) +
                    "' (expected prefix3d, suffix3d, avg2d or cat2d)");
}

void TemporalHeadSpec::validate() const {
  if (k < 1) throw ConfigError("refiner K must be >= 1");
  if (base_width < 1) throw ConfigError("refiner base width must be >= 1");
  if (num_classes != 2) throw ConfigError("refiner must have exactly 2 classes");
  if (temporal_kernel < 0) throw ConfigError("temporal kernel must be >= 0");
  if (temporal_kernel > k) {
    throw ConfigError("temporal kernel depth " + std::to_string(temporal_kernel) +
                      " exceeds K = " + std::to_string(k));
  }
}

namespace {

struct Block {
  nn::Conv3d c1, c2, down;
  nn::BatchNorm b1, b2, down_bn;
  nn::ReLU r1, out;
  bool has_down = false;
  int t_in = 0;
  int crop_begin = 0;

  Block(int in, int out_ch, int stride, int kt1, int kt2, nn::Rng& rng)
      : c1(in, out_ch, {{kt1, 3, 3}, {1, stride, stride}, {0, 1, 1}, 1}, false, rng),
        c2(out_ch, out_ch, {{kt2, 3, 3}, {1, 1, 1}, {0, 1, 1}, 1}, false, rng),
        b1(out_ch),
        b2(out_ch) {
    if (stride != 1 || in != out_ch) {
      has_down = true;
      down = nn::Conv3d(in, out_ch, {{1, 1, 1}, {1, stride, stride}, {0, 0, 0}, 1}, false, rng);
      down_bn = nn::BatchNorm(out_ch);
    }
  }

  Tensor forward(const Tensor& x, bool train) {
    Tensor h = r1.forward(b1.forward(c1.forward(x, train), train), train);
    h = b2.forward(c2.forward(h, train), train);
    Tensor s = has_down ? down_bn.forward(down.forward(x, train), train) : x;
    t_in = s.dim(2);
    crop_begin = (t_in - h.dim(2)) / 2;
    if (t_in != h.dim(2)) s = nn::slice_time(s, crop_begin, h.dim(2));
    h += s;
    return out.forward(h, train);
  }

  Tensor backward(const Tensor& dy) {
    const Tensor d = out.backward(dy);
    Tensor dx = c1.backward(b1.backward(r1.backward(c2.backward(b2.backward(d)))));
    Tensor ds = d.dim(2) == t_in ? d : nn::pad_time(d, crop_begin, t_in);
    if (has_down) ds = down.backward(down_bn.backward(ds));
    dx += ds;
    return dx;
  }

  void parameters(std::vector<nn::Parameter*>& p) {
    c1.parameters(p);
    b1.parameters(p);
    c2.parameters(p);
    b2.parameters(p);
    if (has_down) {
      down.parameters(p);
      down_bn.parameters(p);
    }
  }

  void state(const std::string& prefix, nn::StateList& s) {
    c1.state(prefix + ".conv1", s);
    b1.state(prefix + ".bn1", s);
    c2.state(prefix + ".conv2", s);
    b2.state(prefix + ".bn2", s);
    if (has_down) {
      down.state(prefix + ".down", s);
      down_bn.state(prefix + ".down_bn", s);
    }
  }
};

// (N, C, K, H, W) <-> (N*K, C, 1, H, W)
Tensor fold_time(const Tensor& x) {
  const Tensor y = nn::swap_channel_time(x);
  return y.reshaped({x.dim(0) * x.dim(2), x.dim(1), 1, x.dim(3), x.dim(4)});
}

Tensor unfold_time(const Tensor& x, int k) {
  const Tensor y = x.reshaped({x.dim(0) / k, k, x.dim(1), x.dim(3), x.dim(4)});
  return nn::swap_channel_time(y);
}

}  // namespace

struct TemporalHead::Impl {
  TemporalHeadSpec spec;
  nn::Conv3d stem;
  nn::BatchNorm stem_bn;
  nn::ReLU stem_relu;
  nn::MaxPool3d pool{{{1, 3, 3}, {1, 2, 2}, {0, 1, 1}, 1}};
  std::vector<Block> blocks;   // 8 blocks, two per stage
  nn::Conv3d temporal;         // suffix3d
  nn::BatchNorm temporal_bn;
  nn::ReLU temporal_relu;
  nn::Linear fc;

  // cached shapes for backward
  std::vector<int> pooled_input_shape;
  int batch = 0;
  int t_after_stage1 = 1;

  Impl(const TemporalHeadSpec& s, nn::Rng& rng) : spec(s) {
    const int w = s.base_width;
    stem = nn::Conv3d(3, w, {{1, 7, 7}, {1, 2, 2}, {0, 3, 3}, 1}, false, rng);
    stem_bn = nn::BatchNorm(w);
    const bool prefix = s.variant == HeadVariant::prefix3d;
    int t = s.k;
    const int kt_max = s.temporal_kernel > 0 ? s.temporal_kernel : std::min(3, s.k);
    auto next_kt = [&]() {
      if (!prefix) return 1;
      const int kt = std::min(kt_max, t);
      t -= kt - 1;
      return kt;
    };
    const int widths[4] = {w, 2 * w, 4 * w, 8 * w};
    int in = w;
    for (int stage = 0; stage < 4; ++stage) {
      for (int b = 0; b < 2; ++b) {
        const int stride = (stage > 0 && b == 0) ? 2 : 1;
        int kt1 = 1, kt2 = 1;
        if (stage == 0) {
          kt1 = next_kt();
          kt2 = next_kt();
        }
        blocks.emplace_back(in, widths[stage], stride, kt1, kt2, rng);
        in = widths[stage];
      }
    }
    t_after_stage1 = prefix ? t : 1;
    const int feat = 8 * w;
    if (s.variant == HeadVariant::suffix3d) {
      const int kt = s.temporal_kernel > 0 ? s.temporal_kernel : s.k;
      temporal = nn::Conv3d(feat, feat, {{kt, 3, 3}, {1, 1, 1}, {0, 1, 1}, 1}, false, rng);
      temporal_bn = nn::BatchNorm(feat);
    }
    fc = nn::Linear(s.variant == HeadVariant::cat2d ? feat * s.k : feat, 2, rng);
  }

  Tensor run_stem(const Tensor& x, bool train) {
    return pool.forward(stem_relu.forward(stem_bn.forward(stem.forward(x, train), train), train),
                        train);
  }

  Tensor backbone_2d(const Tensor& folded, bool train) {
    Tensor h = run_stem(folded, train);
    for (auto& b : blocks) h = b.forward(h, train);
    return h;
  }

  Tensor forward(const Tensor& x, bool train) {
    if (x.rank() != 5 || x.dim(1) != 3 || x.dim(2) != spec.k) {
      throw ShapeError("refiner input must be (N, 3, " + std::to_string(spec.k) + ", H, W)");
    }
    batch = x.dim(0);
    const int k = spec.k;
    Tensor h;
    switch (spec.variant) {
      case HeadVariant::prefix3d: {
        h = unfold_time(run_stem(fold_time(x), train), k);
        for (std::size_t i = 0; i < 2; ++i) h = blocks[i].forward(h, train);
        if (h.dim(2) > 1) h = nn::mean_time(h);
        for (std::size_t i = 2; i < blocks.size(); ++i) h = blocks[i].forward(h, train);
        pooled_input_shape = h.shape();
        return fc.forward(nn::global_avg_pool(h), train);
      }
      case HeadVariant::suffix3d: {
        h = unfold_time(backbone_2d(fold_time(x), train), k);
        h = temporal_relu.forward(temporal_bn.forward(temporal.forward(h, train), train), train);
        pooled_input_shape = h.shape();
        return fc.forward(nn::global_avg_pool(h), train);
      }
      case HeadVariant::avg2d: {
        h = backbone_2d(fold_time(x), train);
        pooled_input_shape = h.shape();
        const Tensor f = nn::global_avg_pool(h);   // (N*K, F)
        const int feat = f.dim(1);
        Tensor m({batch, feat});
        std::vector<float> vals(static_cast<std::size_t>(k));
        for (int n = 0; n < batch; ++n) {
          for (int c = 0; c < feat; ++c) {
            for (int t = 0; t < k; ++t) {
              vals[static_cast<std::size_t>(t)] = f[static_cast<std::size_t>(n * k + t) * feat + c];
            }
            // sorted summation: independent of frame order
            std::sort(vals.begin(), vals.end());
            double sum = 0.0;
            for (float v : vals) sum += v;
            m[static_cast<std::size_t>(n) * feat + c] = static_cast<float>(sum / k);
          }
        }
        return fc.forward(m, train);
      }
      case HeadVariant::cat2d: {
        h = backbone_2d(fold_time(x), train);
        pooled_input_shape = h.shape();
        const Tensor f = nn::global_avg_pool(h);
        return fc.forward(f.reshaped({batch, k * f.dim(1)}), train);
      }
    }
    throw ConfigError("unknown variant");
  }

  void backward_2d(Tensor d) {
    for (auto it = blocks.rbegin(); it != blocks.rend(); ++it) d = it->backward(d);
    backward_stem(d);
  }

  void backward_stem(const Tensor& d) {
    stem.backward(stem_bn.backward(stem_relu.backward(pool.backward(d))), false);
  }

  void backward(const Tensor& dlogits) {
    const int k = spec.k;
    Tensor df = fc.backward(dlogits);
    switch (spec.variant) {
      case HeadVariant::prefix3d: {
        Tensor d = nn::global_avg_pool_backward(df, pooled_input_shape);
        for (std::size_t i = blocks.size(); i-- > 2;) d = blocks[i].backward(d);
        if (t_after_stage1 > 1) d = nn::mean_time_backward(d, t_after_stage1);
        for (std::size_t i = 2; i-- > 0;) d = blocks[i].backward(d);
        backward_stem(fold_time(d));
        return;
      }
      case HeadVariant::suffix3d: {
        Tensor d = nn::global_avg_pool_backward(df, pooled_input_shape);
        d = temporal.backward(temporal_bn.backward(temporal_relu.backward(d)));
        backward_2d(fold_time(d));
        return;
      }
      case HeadVariant::avg2d: {
        const int feat = df.dim(1);
        Tensor dframes({batch * k, feat});
        for (int n = 0; n < batch; ++n)
          for (int t = 0; t < k; ++t)
            for (int c = 0; c < feat; ++c)
              dframes[static_cast<std::size_t>(n * k + t) * feat + c] =
                  df[static_cast<std::size_t>(n) * feat + c] / static_cast<float>(k);
        backward_2d(nn::global_avg_pool_backward(dframes, pooled_input_shape));
        return;
      }
      case HeadVariant::cat2d: {
        const Tensor dframes = df.reshaped({batch * k, df.dim(1) / k});
        backward_2d(nn::global_avg_pool_backward(dframes, pooled_input_shape));
        return;
      }
    }
  }

  void parameters(std::vector<nn::Parameter*>& p) {
    stem.parameters(p);
    stem_bn.parameters(p);
    for (auto& b : blocks) b.parameters(p);
    if (spec.variant == HeadVariant::suffix3d) {
      temporal.parameters(p);
      temporal_bn.parameters(p);
    }
    fc.parameters(p);
  }

  void state(nn::StateList& s) {
    stem.state("stem.conv", s);
    stem_bn.state("stem.bn", s);
    for (std::size_t i = 0; i < blocks.size(); ++i) {
      blocks[i].state("layer" + std::to_string(i / 2 + 1) + "." + std::to_string(i % 2), s);
    }
    if (spec.variant == HeadVariant::suffix3d) {
      temporal.state("temporal.conv", s);
      temporal_bn.state("temporal.bn", s);
    }
    fc.state("fc", s);
  }
};

TemporalHead::TemporalHead(TemporalHeadSpec spec, std::uint64_t seed) : spec_(spec) {
  spec_.validate();
  nn::Rng rng(seed);
  impl_ = std::make_unique<Impl>(spec_, rng);
}

TemporalHead::~TemporalHead() = default;
TemporalHead::TemporalHead(TemporalHead&&) noexcept = default;
TemporalHead& TemporalHead::operator=(TemporalHead&&) noexcept = default;

Tensor TemporalHead::forward(const Tensor& x, bool train) { return impl_->forward(x, train); }

void TemporalHead::backward(const Tensor& dlogits) { impl_->backward(dlogits); }

std::vector<nn::Parameter*> TemporalHead::parameters() {
  std::vector<nn::Parameter*> p;
  impl_->parameters(p);
  return p;
}

nn::StateList TemporalHead::state() {
  nn::StateList s;
  impl_->state(s);
  return s;
}

Tensor TemporalHead::frame_features(const Tensor& x) {
  if (x.rank() != 5 || x.dim(2) != spec_.k) throw ShapeError("frame_features: bad input shape");
  return impl_->backbone_2d(fold_time(x), false);
}

TemporalHead::SuffixView TemporalHead::suffix_view() {
  if (spec_.variant != HeadVariant::suffix3d) throw ConfigError("suffix_view requires suffix3d");
  return {&impl_->temporal.weight().value, &impl_->temporal.bias().value, &impl_->temporal_bn,
          &impl_->fc};
}

double TemporalHead::smoke_probability(const ClipSample& clip) {
  const std::vector<const ClipSample*> one{&clip};
  const Tensor p = nn::softmax_rows(forward(clips_to_tensor(one), false));
  return std::clamp(static_cast<double>(p[1]), 0.0, 1.0);
}

void TemporalHead::save(const std::filesystem::path& path, const ClipConfig& clip) {
  nlohmann::json meta = {{"kind", "refiner"},
                         {"variant", std::string(to_string(spec_.variant))},
                         {"k", spec_.k},
                         {"base_width", spec_.base_width},
                         {"temporal_kernel", spec_.temporal_kernel},
                         {"clip",
                          {{"min_side", clip.min_side},
                           {"train_resize", clip.train_resize},
                           {"train_crop", clip.train_crop},
                           {"eval_size", clip.eval_size}}}};
  nn::save_checkpoint(path, meta, state());
}

std::pair<TemporalHead, ClipConfig> TemporalHead::load(const std::filesystem::path& path) {
  const auto meta = nn::read_checkpoint_meta(path);
  if (meta.value("kind", "") != "refiner") {
    throw ConfigError(path.string() + ": not a refiner checkpoint");
  }
  TemporalHeadSpec spec;
  ClipConfig clip;
  try {
    spec.variant = parse_head_variant(meta.at("variant").get<std::string>());
    spec.k = meta.at("k").get<int>();
    spec.base_width = meta.at("base_width").get<int>();
    spec.temporal_kernel = meta.value("temporal_kernel", 0);
    const auto& c = meta.at("clip");
    clip.k = spec.k;
    clip.min_side = c.at("min_side").get<int>();
    clip.train_resize = c.at("train_resize").get<int>();
    clip.train_crop = c.at("train_crop").get<int>();
    clip.eval_size = c.at("eval_size").get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path.string() + ": malformed refiner header: " + e.what());
  }
  TemporalHead head(spec, 0);
  nn::load_checkpoint(path, head.state());
  return {std::move(head), clip};
}

Tensor clips_to_tensor(const std::vector<const ClipSample*>& clips, int crop_size,
                       const std::vector<std::pair<int, int>>& offsets,
                       const PatchNormalization& norm) {
  if (clips.empty()) throw ShapeError("no clips to stack");
  if (offsets.size() != clips.size()) throw ShapeError("one crop offset per clip required");
  const int k = clips.front()->k();
  const int n = static_cast<int>(clips.size());
  Tensor x({n, 3, k, crop_size, crop_size});
  for (int a = 0; a < n; ++a) {
    const ClipSample& c = *clips[static_cast<std::size_t>(a)];
    const auto [ox, oy] = offsets[static_cast<std::size_t>(a)];
    if (c.k() != k) throw ShapeError("clips in one batch must share K");
    if (ox < 0 || oy < 0 || ox + crop_size > c.patch_size() || oy + crop_size > c.patch_size()) {
      throw ShapeError("crop exceeds the clip patch");
    }
    for (int t = 0; t < k; ++t) {
      const Image& img = c.patches[static_cast<std::size_t>(t)];
      for (int y = 0; y < crop_size; ++y) {
        for (int xx = 0; xx < crop_size; ++xx) {
          const std::uint8_t* px = img.pixel(ox + xx, oy + y);
          for (int ch = 0; ch < 3; ++ch) {
            x.at(a, ch, t, y, xx) =
                (static_cast<float>(px[ch]) - norm.mean[static_cast<std::size_t>(ch)]) /
                norm.stddev[static_cast<std::size_t>(ch)];
          }
        }
      }
    }
  }
  return x;
}

Tensor clips_to_tensor(const std::vector<const ClipSample*>& clips,
                       const PatchNormalization& norm) {
  if (clips.empty()) throw ShapeError("no clips to stack");
  const int size = clips.front()->patch_size();
  return clips_to_tensor(clips, size, std::vector<std::pair<int, int>>(clips.size(), {0, 0}), norm);
}

double TrainSchedule::learning_rate_at(int epoch) const {
  const int steps = step_epochs > 0 ? (epoch - 1) / step_epochs : 0;
  return learning_rate * std::pow(gamma, steps);
}

ClipSample resize_patches(const ClipSample& clip, int size) {
  if (clip.patch_size() == size) return clip;
  ClipSample out = clip;
  for (auto& p : out.patches) {
    p = resample(p, BoundingBox::make(0, 0, p.width(), p.height()), size, size);
  }
  return out;
}

std::vector<EpochRecord> train_head(TemporalHead& head, const std::vector<ClipSample>& clips,
                                    const ClipConfig& clip, const TrainSchedule& schedule) {
  clip.validate();
  if (schedule.epochs < 0 || schedule.batch_size < 1) {
    throw ConfigError("training needs epochs >= 0 and batch size >= 1");
  }
  bool seen[2] = {false, false};
  for (const auto& c : clips) {
    if (!c.label) throw ValidationError("training clip without a label");
    if (c.k() != head.k()) {
      throw ConfigError("clip K = " + std::to_string(c.k()) + " but refiner K = " +
                        std::to_string(head.k()));
    }
    seen[static_cast<int>(*c.label)] = true;
  }
  if (!seen[0] || !seen[1]) throw ValidationError("training clips must contain both classes");
  if (schedule.epochs == 0) return {};

  std::vector<ClipSample> train;
  std::vector<ClipSample> eval;
  train.reserve(clips.size());
  eval.reserve(clips.size());
  for (const auto& c : clips) {
    train.push_back(resize_patches(c, clip.train_resize));
    eval.push_back(resize_patches(c, clip.eval_size));
  }

  nn::Rng rng(schedule.seed);
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto params = head.parameters();
  const int slack = clip.train_resize - clip.train_crop;
  std::uniform_int_distribution<int> offset(0, slack);

  std::vector<EpochRecord> history;
  for (int epoch = 1; epoch <= schedule.epochs; ++epoch) {
    const nn::SgdConfig sgd{schedule.learning_rate_at(epoch), schedule.momentum,
                            schedule.weight_decay};
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(schedule.batch_size)) {
      const std::size_t end =
          std::min(order.size(), start + static_cast<std::size_t>(schedule.batch_size));
      std::vector<const ClipSample*> batch;
      std::vector<std::pair<int, int>> offsets;
      std::vector<int> labels;
      for (std::size_t i = start; i < end; ++i) {
        const auto& c = train[order[i]];
        batch.push_back(&c);
        const int ox = offset(rng);
        const int oy = offset(rng);
        offsets.emplace_back(ox, oy);
        labels.push_back(static_cast<int>(*c.label));
      }
      const Tensor x = clips_to_tensor(batch, clip.train_crop, offsets);
      const Tensor logits = head.forward(x, true);
      Tensor dlogits;
      loss_sum += nn::softmax_cross_entropy(logits, labels, dlogits) *
                  static_cast<double>(batch.size());
      for (auto* p : params) p->zero_grad();
      head.backward(dlogits);
      nn::sgd_step(params, sgd);
    }
    int correct = 0;
    for (const auto& c : eval) {
      const bool smoke = head.smoke_probability(c) >= 0.5;
      if (smoke == (*c.label == ClipLabel::smoke)) ++correct;
    }
    history.push_back({epoch, sgd.learning_rate, loss_sum / static_cast<double>(train.size()),
                       static_cast<double>(correct) / static_cast<double>(eval.size())});
    if (schedule.stop_at_accuracy && history.back().accuracy >= *schedule.stop_at_accuracy) break;
  }
  return history;
}

ClipPrediction classify_clip(TemporalHead& head, const ClipSample& clip, const ClipConfig& cfg,
                             double threshold) {
  if (clip.k() != head.k()) {
    throw ConfigError("clip K = " + std::to_string(clip.k()) + " but refiner K = " +
                      std::to_string(head.k()));
  }
  const ClipSample sized = resize_patches(clip, cfg.eval_size);
  const std::vector<const ClipSample*> one{&sized};
  const Tensor p = nn::softmax_rows(head.forward(clips_to_tensor(one), false));
  ClipPrediction out;
  out.probabilities = {p[0], p[1]};
  out.smoke_probability = std::clamp(static_cast<double>(p[1]), 0.0, 1.0);
  out.verdict = out.smoke_probability >= threshold;
  return out;
}

}  // namespace smoky
