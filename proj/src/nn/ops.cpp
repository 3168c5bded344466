#include "smoky/nn/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Core>

#include "smoky/errors.hpp"

namespace smoky::nn {

namespace {

using RowMatrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMatrix = Eigen::Map<RowMatrix>;
using ConstMapMatrix = Eigen::Map<const RowMatrix>;

void require_rank5(const Tensor& x, const char* what) {
  if (x.rank() != 5) throw ShapeError(std::string(what) + ": expected a 5-D tensor");
}

struct ConvDims {
  int n, cin, t, h, w;
  int cout, cin_g, cout_g;
  int to, ho, wo;
  int rows;         // cin_g * kt * kh * kw
  int cols;         // to * ho * wo
};

ConvDims conv_dims(const Tensor& x, const Tensor& weight, const ConvGeometry& g) {
  require_rank5(x, "conv3d input");
  require_rank5(weight, "conv3d weight");
  ConvDims d{};
  d.n = x.dim(0);
  d.cin = x.dim(1);
  d.t = x.dim(2);
  d.h = x.dim(3);
  d.w = x.dim(4);
  d.cout = weight.dim(0);
  if (g.groups < 1 || d.cin % g.groups != 0 || d.cout % g.groups != 0) {
    throw ShapeError("conv3d: channels not divisible by groups");
  }
  d.cin_g = d.cin / g.groups;
  d.cout_g = d.cout / g.groups;
  if (weight.dim(1) != d.cin_g || weight.dim(2) != g.kernel[0] || weight.dim(3) != g.kernel[1] ||
      weight.dim(4) != g.kernel[2]) {
    throw ShapeError("conv3d: weight shape does not match input channels or kernel");
  }
  d.to = g.out_extent(0, d.t);
  d.ho = g.out_extent(1, d.h);
  d.wo = g.out_extent(2, d.w);
  if (d.to <= 0 || d.ho <= 0 || d.wo <= 0) throw ShapeError("conv3d: kernel larger than input");
  d.rows = d.cin_g * g.kernel[0] * g.kernel[1] * g.kernel[2];
  d.cols = d.to * d.ho * d.wo;
  return d;
}

// Gathers the receptive fields of one (sample, group) into a rows x cols matrix.
void im2col(const float* x, const ConvDims& d, const ConvGeometry& g, float* col) {
  const auto [kt, kh, kw] = g.kernel;
  const auto [st, sh, sw] = g.stride;
  const auto [pt, ph, pw] = g.padding;
  const std::size_t plane = static_cast<std::size_t>(d.h) * d.w;
  int r = 0;
  for (int c = 0; c < d.cin_g; ++c) {
    const float* xc = x + static_cast<std::size_t>(c) * d.t * plane;
    for (int a = 0; a < kt; ++a) {
      for (int b = 0; b < kh; ++b) {
        for (int e = 0; e < kw; ++e, ++r) {
          float* out = col + static_cast<std::size_t>(r) * d.cols;
          for (int ot = 0; ot < d.to; ++ot) {
            const int it = ot * st - pt + a;
            if (it < 0 || it >= d.t) {
              std::fill(out, out + static_cast<std::size_t>(d.ho) * d.wo, 0.0f);
              out += static_cast<std::size_t>(d.ho) * d.wo;
              continue;
            }
            const float* xt = xc + static_cast<std::size_t>(it) * plane;
            for (int oh = 0; oh < d.ho; ++oh) {
              const int ih = oh * sh - ph + b;
              if (ih < 0 || ih >= d.h) {
                std::fill(out, out + d.wo, 0.0f);
                out += d.wo;
                continue;
              }
              const float* xr = xt + static_cast<std::size_t>(ih) * d.w;
              for (int ow = 0; ow < d.wo; ++ow) {
                const int iw = ow * sw - pw + e;
                *out++ = (iw >= 0 && iw < d.w) ? xr[iw] : 0.0f;
              }
            }
          }
        }
      }
    }
  }
}

void col2im(const float* col, const ConvDims& d, const ConvGeometry& g, float* dx) {
  const auto [kt, kh, kw] = g.kernel;
  const auto [st, sh, sw] = g.stride;
  const auto [pt, ph, pw] = g.padding;
  const std::size_t plane = static_cast<std::size_t>(d.h) * d.w;
  int r = 0;
  for (int c = 0; c < d.cin_g; ++c) {
    float* xc = dx + static_cast<std::size_t>(c) * d.t * plane;
    for (int a = 0; a < kt; ++a) {
      for (int b = 0; b < kh; ++b) {
        for (int e = 0; e < kw; ++e, ++r) {
          const float* in = col + static_cast<std::size_t>(r) * d.cols;
          for (int ot = 0; ot < d.to; ++ot) {
            const int it = ot * st - pt + a;
            if (it < 0 || it >= d.t) {
              in += static_cast<std::size_t>(d.ho) * d.wo;
              continue;
            }
            float* xt = xc + static_cast<std::size_t>(it) * plane;
            for (int oh = 0; oh < d.ho; ++oh) {
              const int ih = oh * sh - ph + b;
              if (ih < 0 || ih >= d.h) {
                in += d.wo;
                continue;
              }
              float* xr = xt + static_cast<std::size_t>(ih) * d.w;
              for (int ow = 0; ow < d.wo; ++ow, ++in) {
                const int iw = ow * sw - pw + e;
                if (iw >= 0 && iw < d.w) xr[iw] += *in;
              }
            }
          }
        }
      }
    }
  }
}

}  // namespace

ConvGeometry conv2d_geometry(int k, int s, int p, int groups) {
  ConvGeometry g;
  g.kernel = {1, k, k};
  g.stride = {1, s, s};
  g.padding = {0, p, p};
  g.groups = groups;
  return g;
}

Tensor conv3d_forward(const Tensor& x, const Tensor& weight, const Tensor& bias,
                      const ConvGeometry& g) {
  const ConvDims d = conv_dims(x, weight, g);
  if (!bias.empty() && static_cast<int>(bias.size()) != d.cout) {
    throw ShapeError("conv3d: bias size differs from output channels");
  }
  Tensor y({d.n, d.cout, d.to, d.ho, d.wo});
  std::vector<float> col(static_cast<std::size_t>(d.rows) * d.cols);
  const std::size_t x_group = static_cast<std::size_t>(d.cin_g) * d.t * d.h * d.w;
  const std::size_t y_group = static_cast<std::size_t>(d.cout_g) * d.cols;
  const std::size_t w_group = static_cast<std::size_t>(d.cout_g) * d.rows;
  for (int n = 0; n < d.n; ++n) {
    for (int grp = 0; grp < g.groups; ++grp) {
      const float* xs = x.data() + (static_cast<std::size_t>(n) * g.groups + grp) * x_group;
      float* ys = y.data() + (static_cast<std::size_t>(n) * g.groups + grp) * y_group;
      im2col(xs, d, g, col.data());
      ConstMapMatrix wm(weight.data() + grp * w_group, d.cout_g, d.rows);
      ConstMapMatrix cm(col.data(), d.rows, d.cols);
      MapMatrix ym(ys, d.cout_g, d.cols);
      ym.noalias() = wm * cm;
      if (!bias.empty()) {
        for (int o = 0; o < d.cout_g; ++o) ym.row(o).array() += bias[grp * d.cout_g + o];
      }
    }
  }
  return y;
}

Tensor conv3d_backward(const Tensor& x, const Tensor& weight, const ConvGeometry& g,
                       const Tensor& dy, Tensor& dweight, Tensor* dbias, bool want_dx) {
  const ConvDims d = conv_dims(x, weight, g);
  if (dy.rank() != 5 || dy.dim(0) != d.n || dy.dim(1) != d.cout || dy.dim(2) != d.to ||
      dy.dim(3) != d.ho || dy.dim(4) != d.wo) {
    throw ShapeError("conv3d backward: gradient shape mismatch");
  }
  if (!dweight.same_shape(weight)) throw ShapeError("conv3d backward: dweight shape mismatch");
  Tensor dx;
  if (want_dx) dx = Tensor(x.shape());
  std::vector<float> col(static_cast<std::size_t>(d.rows) * d.cols);
  std::vector<float> dcol(want_dx ? col.size() : 0);
  const std::size_t x_group = static_cast<std::size_t>(d.cin_g) * d.t * d.h * d.w;
  const std::size_t y_group = static_cast<std::size_t>(d.cout_g) * d.cols;
  const std::size_t w_group = static_cast<std::size_t>(d.cout_g) * d.rows;
  for (int n = 0; n < d.n; ++n) {
    for (int grp = 0; grp < g.groups; ++grp) {
      const std::size_t xo = (static_cast<std::size_t>(n) * g.groups + grp) * x_group;
      const std::size_t yo = (static_cast<std::size_t>(n) * g.groups + grp) * y_group;
      im2col(x.data() + xo, d, g, col.data());
      ConstMapMatrix dym(dy.data() + yo, d.cout_g, d.cols);
      ConstMapMatrix cm(col.data(), d.rows, d.cols);
      MapMatrix dwm(dweight.data() + grp * w_group, d.cout_g, d.rows);
      dwm.noalias() += dym * cm.transpose();
      if (dbias != nullptr && !dbias->empty()) {
        for (int o = 0; o < d.cout_g; ++o) (*dbias)[grp * d.cout_g + o] += dym.row(o).sum();
      }
      if (want_dx) {
        ConstMapMatrix wm(weight.data() + grp * w_group, d.cout_g, d.rows);
        MapMatrix dcm(dcol.data(), d.rows, d.cols);
        dcm.noalias() = wm.transpose() * dym;
        col2im(dcol.data(), d, g, dx.data() + xo);
      }
    }
  }
  return dx;
}

Tensor max_pool3d_forward(const Tensor& x, const ConvGeometry& g,
                          std::vector<std::size_t>* argmax) {
  require_rank5(x, "max_pool3d input");
  const int n = x.dim(0), c = x.dim(1), t = x.dim(2), h = x.dim(3), w = x.dim(4);
  const int to = g.out_extent(0, t), ho = g.out_extent(1, h), wo = g.out_extent(2, w);
  if (to <= 0 || ho <= 0 || wo <= 0) throw ShapeError("max_pool3d: window larger than input");
  Tensor y({n, c, to, ho, wo});
  if (argmax != nullptr) argmax->assign(y.size(), 0);
  std::size_t oi = 0;
  for (int a = 0; a < n; ++a) {
    for (int ch = 0; ch < c; ++ch) {
      for (int ot = 0; ot < to; ++ot) {
        for (int oh = 0; oh < ho; ++oh) {
          for (int ow = 0; ow < wo; ++ow, ++oi) {
            float best = -std::numeric_limits<float>::infinity();
            std::size_t best_i = 0;
            for (int kt = 0; kt < g.kernel[0]; ++kt) {
              const int it = ot * g.stride[0] - g.padding[0] + kt;
              if (it < 0 || it >= t) continue;
              for (int kh = 0; kh < g.kernel[1]; ++kh) {
                const int ih = oh * g.stride[1] - g.padding[1] + kh;
                if (ih < 0 || ih >= h) continue;
                for (int kw = 0; kw < g.kernel[2]; ++kw) {
                  const int iw = ow * g.stride[2] - g.padding[2] + kw;
                  if (iw < 0 || iw >= w) continue;
                  const std::size_t off = x.offset(a, ch, it, ih, iw);
                  if (x[off] > best) {
                    best = x[off];
                    best_i = off;
                  }
                }
              }
            }
            y[oi] = best;
            if (argmax != nullptr) (*argmax)[oi] = best_i;
          }
        }
      }
    }
  }
  return y;
}

Tensor max_pool3d_backward(const std::vector<int>& x_shape,
                           const std::vector<std::size_t>& argmax, const Tensor& dy) {
  if (argmax.size() != dy.size()) throw ShapeError("max_pool3d backward: size mismatch");
  Tensor dx(x_shape);
  for (std::size_t i = 0; i < dy.size(); ++i) dx[argmax[i]] += dy[i];
  return dx;
}

Tensor depthwise_forward(const Tensor& x, const Tensor& weight, std::span<const int> source) {
  require_rank5(x, "depthwise input");
  require_rank5(weight, "depthwise weight");
  const int n = x.dim(0), c = x.dim(1), t = x.dim(2), h = x.dim(3), w = x.dim(4);
  const int s = weight.dim(0);
  const int k = weight.dim(3);
  if (weight.dim(4) != k || k % 2 == 0) throw ShapeError("depthwise: kernel must be odd and square");
  if (static_cast<int>(source.size()) != s) throw ShapeError("depthwise: source map size mismatch");
  const int pad = k / 2;
  Tensor y({n, s, t, h, w});
  for (int a = 0; a < n; ++a) {
    for (int j = 0; j < s; ++j) {
      const int src = source[static_cast<std::size_t>(j)];
      if (src < 0 || src >= c) throw ShapeError("depthwise: source channel out of range");
      const float* kern = weight.data() + static_cast<std::size_t>(j) * k * k;
      for (int tt = 0; tt < t; ++tt) {
        for (int oh = 0; oh < h; ++oh) {
          for (int ow = 0; ow < w; ++ow) {
            float acc = 0.0f;
            for (int kh = 0; kh < k; ++kh) {
              const int ih = oh - pad + kh;
              if (ih < 0 || ih >= h) continue;
              for (int kw = 0; kw < k; ++kw) {
                const int iw = ow - pad + kw;
                if (iw < 0 || iw >= w) continue;
                acc += kern[kh * k + kw] * x.at(a, src, tt, ih, iw);
              }
            }
            y.at(a, j, tt, oh, ow) = acc;
          }
        }
      }
    }
  }
  return y;
}

Tensor upsample_nearest2x(const Tensor& x) {
  require_rank5(x, "upsample input");
  const int n = x.dim(0), c = x.dim(1), t = x.dim(2), h = x.dim(3), w = x.dim(4);
  Tensor y({n, c, t, 2 * h, 2 * w});
  for (int a = 0; a < n; ++a)
    for (int ch = 0; ch < c; ++ch)
      for (int tt = 0; tt < t; ++tt)
        for (int oh = 0; oh < 2 * h; ++oh)
          for (int ow = 0; ow < 2 * w; ++ow) y.at(a, ch, tt, oh, ow) = x.at(a, ch, tt, oh / 2, ow / 2);
  return y;
}

Tensor concat_channels(std::span<const Tensor* const> parts) {
  if (parts.empty()) throw ShapeError("concat of nothing");
  const Tensor& first = *parts[0];
  require_rank5(first, "concat input");
  int channels = 0;
  for (const Tensor* p : parts) {
    require_rank5(*p, "concat input");
    if (p->dim(0) != first.dim(0) || p->dim(2) != first.dim(2) || p->dim(3) != first.dim(3) ||
        p->dim(4) != first.dim(4)) {
      throw ShapeError("concat: non-channel extents differ");
    }
    channels += p->dim(1);
  }
  const int n = first.dim(0);
  const std::size_t plane = static_cast<std::size_t>(first.dim(2)) * first.dim(3) * first.dim(4);
  Tensor y({n, channels, first.dim(2), first.dim(3), first.dim(4)});
  float* out = y.data();
  for (int a = 0; a < n; ++a) {
    for (const Tensor* p : parts) {
      const std::size_t chunk = static_cast<std::size_t>(p->dim(1)) * plane;
      std::copy_n(p->data() + a * chunk, chunk, out);
      out += chunk;
    }
  }
  return y;
}

Tensor slice_channels(const Tensor& x, int begin, int end) {
  require_rank5(x, "slice input");
  if (begin < 0 || end > x.dim(1) || begin >= end) throw ShapeError("slice_channels: bad range");
  const int n = x.dim(0);
  const std::size_t plane = static_cast<std::size_t>(x.dim(2)) * x.dim(3) * x.dim(4);
  Tensor y({n, end - begin, x.dim(2), x.dim(3), x.dim(4)});
  for (int a = 0; a < n; ++a) {
    std::copy_n(x.data() + (static_cast<std::size_t>(a) * x.dim(1) + begin) * plane,
                static_cast<std::size_t>(end - begin) * plane,
                y.data() + static_cast<std::size_t>(a) * (end - begin) * plane);
  }
  return y;
}

Tensor slice_time(const Tensor& x, int begin, int len) {
  require_rank5(x, "slice input");
  if (begin < 0 || len <= 0 || begin + len > x.dim(2)) throw ShapeError("slice_time: bad range");
  const int n = x.dim(0), c = x.dim(1), h = x.dim(3), w = x.dim(4);
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  Tensor y({n, c, len, h, w});
  for (int a = 0; a < n; ++a)
    for (int ch = 0; ch < c; ++ch)
      std::copy_n(x.data() + x.offset(a, ch, begin, 0, 0), len * plane,
                  y.data() + y.offset(a, ch, 0, 0, 0));
  return y;
}

Tensor pad_time(const Tensor& dy, int begin, int t_full) {
  require_rank5(dy, "pad input");
  const int n = dy.dim(0), c = dy.dim(1), len = dy.dim(2), h = dy.dim(3), w = dy.dim(4);
  if (begin < 0 || begin + len > t_full) throw ShapeError("pad_time: bad range");
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  Tensor dx({n, c, t_full, h, w});
  for (int a = 0; a < n; ++a)
    for (int ch = 0; ch < c; ++ch)
      std::copy_n(dy.data() + dy.offset(a, ch, 0, 0, 0), len * plane,
                  dx.data() + dx.offset(a, ch, begin, 0, 0));
  return dx;
}

Tensor swap_channel_time(const Tensor& x) {
  require_rank5(x, "swap input");
  const int n = x.dim(0), c = x.dim(1), t = x.dim(2), h = x.dim(3), w = x.dim(4);
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  Tensor y({n, t, c, h, w});
  for (int a = 0; a < n; ++a)
    for (int ch = 0; ch < c; ++ch)
      for (int k = 0; k < t; ++k)
        std::copy_n(x.data() + x.offset(a, ch, k, 0, 0), plane, y.data() + y.offset(a, k, ch, 0, 0));
  return y;
}

Tensor mean_time(const Tensor& x) {
  require_rank5(x, "mean_time input");
  const int n = x.dim(0), c = x.dim(1), t = x.dim(2), h = x.dim(3), w = x.dim(4);
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  Tensor y({n, c, 1, h, w});
  for (int a = 0; a < n; ++a)
    for (int ch = 0; ch < c; ++ch)
      for (std::size_t i = 0; i < plane; ++i) {
        double sum = 0.0;
        for (int k = 0; k < t; ++k) sum += x[x.offset(a, ch, k, 0, 0) + i];
        y[y.offset(a, ch, 0, 0, 0) + i] = static_cast<float>(sum / t);
      }
  return y;
}

Tensor mean_time_backward(const Tensor& dy, int t_full) {
  require_rank5(dy, "mean_time gradient");
  const int n = dy.dim(0), c = dy.dim(1), h = dy.dim(3), w = dy.dim(4);
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  Tensor dx({n, c, t_full, h, w});
  for (int a = 0; a < n; ++a)
    for (int ch = 0; ch < c; ++ch)
      for (int k = 0; k < t_full; ++k)
        for (std::size_t i = 0; i < plane; ++i)
          dx[dx.offset(a, ch, k, 0, 0) + i] = dy[dy.offset(a, ch, 0, 0, 0) + i] / t_full;
  return dx;
}

Tensor global_avg_pool(const Tensor& x) {
  require_rank5(x, "pool input");
  const int n = x.dim(0), c = x.dim(1);
  const std::size_t inner = x.size() / (static_cast<std::size_t>(n) * c);
  Tensor y({n, c});
  for (std::size_t row = 0; row < static_cast<std::size_t>(n) * c; ++row) {
    double sum = 0.0;
    for (std::size_t i = 0; i < inner; ++i) sum += x[row * inner + i];
    y[row] = static_cast<float>(sum / static_cast<double>(inner));
  }
  return y;
}

Tensor global_avg_pool_backward(const Tensor& dy, const std::vector<int>& x_shape) {
  Tensor dx(x_shape);
  const std::size_t rows = dy.size();
  if (rows == 0 || dx.size() % rows != 0) throw ShapeError("global_avg_pool_backward: shape mismatch");
  const std::size_t inner = dx.size() / rows;
  for (std::size_t row = 0; row < rows; ++row) {
    const float g = dy[row] / static_cast<float>(inner);
    std::fill_n(dx.data() + row * inner, inner, g);
  }
  return dx;
}

void silu_inplace(Tensor& x) noexcept {
  for (float& v : x.values()) v = v / (1.0f + std::exp(-v));
}

void relu_inplace(Tensor& x) noexcept {
  for (float& v : x.values()) v = std::max(v, 0.0f);
}

Tensor softmax_rows(const Tensor& logits) {
  if (logits.rank() != 2) throw ShapeError("softmax expects (N, K)");
  const int n = logits.dim(0), k = logits.dim(1);
  Tensor p(logits.shape());
  for (int i = 0; i < n; ++i) {
    const float* row = logits.data() + static_cast<std::size_t>(i) * k;
    const float mx = *std::max_element(row, row + k);
    double sum = 0.0;
    for (int j = 0; j < k; ++j) sum += std::exp(static_cast<double>(row[j] - mx));
    for (int j = 0; j < k; ++j) {
      p[static_cast<std::size_t>(i) * k + j] =
          static_cast<float>(std::exp(static_cast<double>(row[j] - mx)) / sum);
    }
  }
  return p;
}

}  // namespace smoky::nn
