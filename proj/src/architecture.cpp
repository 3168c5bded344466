#include "smoky/architecture.hpp"

#include <sstream>

#include "smoky/errors.hpp"

namespace smoky {

GhostConvSpec GhostConvSpec::with_ratio(int in_channels, int out_channels, int kernel,
                                        int stride, int ratio, bool activation,
                                        int cheap_kernel) {
  if (ratio < 2) throw ValidationError("ghost ratio must be at least 2");
  GhostConvSpec s;
  s.in_channels = in_channels;
  s.out_channels = out_channels;
  s.primary_channels = (out_channels + ratio - 1) / ratio;
  s.ghost_channels = out_channels - s.primary_channels;
  s.kernel = kernel;
  s.stride = stride;
  s.primary_activation = activation;
  s.cheap_kernel = cheap_kernel;
  s.validate();
  return s;
}

void GhostConvSpec::validate() const {
  if (in_channels < 1) throw ValidationError("GhostConv: in_channels must be positive");
  if (primary_channels + ghost_channels != out_channels) {
    throw ValidationError("GhostConv: primary + ghost channels must equal out_channels");
  }
  if (primary_channels < 1 || primary_channels >= out_channels) {
    throw ValidationError("GhostConv: need 1 <= primary channels < out channels");
  }
  if (kernel < 1 || stride < 1) throw ValidationError("GhostConv: kernel and stride must be positive");
  if (cheap_kernel < 1 || cheap_kernel % 2 == 0) {
    throw ValidationError("GhostConv: cheap kernel must be odd");
  }
}

std::string_view to_string(LayerType t) noexcept {
  switch (t) {
    case LayerType::conv: return "conv";
    case LayerType::ghost_conv: return "ghost_conv";
    case LayerType::c3: return "c3";
    case LayerType::c3ghost: return "c3ghost";
    case LayerType::sppf: return "sppf";
    case LayerType::upsample: return "upsample";
    case LayerType::concat: return "concat";
    case LayerType::detect: return "detect";
  }
  return "conv";
}

namespace {

LayerType parse_layer_type(const std::string& s) {
  for (auto t : {LayerType::conv, LayerType::ghost_conv, LayerType::c3, LayerType::c3ghost,
                 LayerType::sppf, LayerType::upsample, LayerType::concat, LayerType::detect}) {
    if (to_string(t) == s) return t;
  }
  throw ParseError("unknown layer type '" + s + "'");
}

int conv_out(int in, int k, int s, int p) { return (in + 2 * p - k) / s + 1; }

std::string layer_name(std::size_t i, const LayerSpec& l) {
  std::ostringstream os;
  os << "layer " << i << " (" << to_string(l.type) << ")";
  return os.str();
}

// Shapes of a layer's inputs; `shapes` holds the outputs of all earlier layers.
std::vector<LayerShape> input_shapes(const ArchitectureSpec& spec, std::size_t i,
                                     const std::vector<LayerShape>& shapes,
                                     const LayerShape& image) {
  const auto& l = spec.layers[i];
  if (l.from.empty()) throw ShapeError(layer_name(i, l) + ": no inputs");
  std::vector<LayerShape> out;
  for (int f : l.from) {
    if (f == -1) {
      out.push_back(i == 0 ? image : shapes[i - 1]);
    } else if (f >= 0 && static_cast<std::size_t>(f) < i) {
      out.push_back(shapes[static_cast<std::size_t>(f)]);
    } else {
      throw ShapeError(layer_name(i, l) + ": input index " + std::to_string(f) +
                       " does not refer to an earlier layer");
    }
  }
  if (l.type != LayerType::concat && l.type != LayerType::detect && out.size() != 1) {
    throw ShapeError(layer_name(i, l) + ": expects exactly one input");
  }
  return out;
}

GhostConvSpec ghost_of(int cin, int cout, int k, int s, const LayerSpec& l, bool act) {
  return GhostConvSpec::with_ratio(cin, cout, k, s, l.ghost_ratio, act, l.cheap_kernel);
}

ModelBudget ghost_bottleneck_budget(int c, const LayerSpec& l, int h, int w) {
  ModelBudget b = ghost_conv_budget(ghost_of(c, c / 2, 1, 1, l, true), h, w);
  b += ghost_conv_budget(ghost_of(c / 2, c, 1, 1, l, false), h, w);
  return b;
}

ModelBudget layer_budget(const LayerSpec& l, const std::vector<LayerShape>& in,
                         const LayerShape& out) {
  ModelBudget b;
  const int cin = in.front().channels;
  const int h = out.height;
  const int w = out.width;
  switch (l.type) {
    case LayerType::conv:
      return conv_budget(cin, l.out_channels, l.kernel, 1, h, w);
    case LayerType::ghost_conv:
      return ghost_conv_budget(ghost_of(cin, l.out_channels, l.kernel, l.stride, l, true), h, w);
    case LayerType::c3:
    case LayerType::c3ghost: {
      const int c = l.out_channels / 2;
      const bool outer_ghost = l.type == LayerType::c3ghost && l.ghost_outer;
      auto pointwise = [&](int a, int z) {
        return outer_ghost ? ghost_conv_budget(ghost_of(a, z, 1, 1, l, true), h, w)
                           : conv_budget(a, z, 1, 1, h, w);
      };
      b += pointwise(cin, c);
      b += pointwise(cin, c);
      b += pointwise(2 * c, l.out_channels);
      for (int r = 0; r < l.repeats; ++r) {
        if (l.type == LayerType::c3) {
          b += conv_budget(c, c, 1, 1, h, w);
          b += conv_budget(c, c, 3, 1, h, w);
        } else {
          b += ghost_bottleneck_budget(c, l, h, w);
        }
      }
      return b;
    }
    case LayerType::sppf: {
      const int c = cin / 2;
      b += conv_budget(cin, c, 1, 1, h, w);
      b += conv_budget(4 * c, l.out_channels, 1, 1, h, w);
      return b;
    }
    case LayerType::upsample:
    case LayerType::concat:
      return b;
    case LayerType::detect: {
      const int no = 3 * (5 + l.num_classes);
      for (const auto& s : in) b += conv_budget(s.channels, no, 1, 1, s.height, s.width);
      return b;
    }
  }
  return b;
}

}  // namespace

ModelBudget conv_budget(int in_channels, int out_channels, int kernel, int groups, int out_h,
                        int out_w) {
  const std::int64_t weights = static_cast<std::int64_t>(in_channels / groups) * out_channels *
                               kernel * kernel;
  return {weights + out_channels, weights * out_h * out_w};
}

ModelBudget ghost_conv_budget(const GhostConvSpec& spec, int out_h, int out_w) {
  spec.validate();
  ModelBudget b = conv_budget(spec.in_channels, spec.primary_channels, spec.kernel, 1, out_h, out_w);
  const std::int64_t cheap =
      static_cast<std::int64_t>(spec.ghost_channels) * spec.cheap_kernel * spec.cheap_kernel;
  b.parameters += cheap;
  b.macs += cheap * out_h * out_w;
  return b;
}

std::vector<LayerShape> infer_shapes(const ArchitectureSpec& spec, int height, int width) {
  if (spec.input_channels < 1) throw ShapeError("architecture needs input channels");
  if (height < 1 || width < 1) throw ShapeError("input size must be positive");
  const LayerShape image{spec.input_channels, height, width, 1};
  std::vector<LayerShape> shapes;
  shapes.reserve(spec.layers.size());
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const auto& l = spec.layers[i];
    const auto in = input_shapes(spec, i, shapes, image);
    LayerShape out = in.front();
    switch (l.type) {
      case LayerType::conv:
      case LayerType::ghost_conv: {
        if (l.out_channels < 1 || l.kernel < 1 || l.stride < 1) {
          throw ShapeError(layer_name(i, l) + ": invalid channels, kernel or stride");
        }
        if (l.type == LayerType::ghost_conv && l.out_channels < 2) {
          throw ShapeError(layer_name(i, l) + ": GhostConv needs at least 2 output channels");
        }
        const int p = l.effective_padding();
        out = {l.out_channels, conv_out(out.height, l.kernel, l.stride, p),
               conv_out(out.width, l.kernel, l.stride, p), out.stride * l.stride};
        if (out.height < 1 || out.width < 1) throw ShapeError(layer_name(i, l) + ": input too small");
        break;
      }
      case LayerType::c3:
      case LayerType::c3ghost:
        if (l.out_channels < 2 || l.out_channels % 2 != 0 || l.repeats < 1) {
          throw ShapeError(layer_name(i, l) + ": needs an even channel count and >= 1 bottleneck");
        }
        if (l.type == LayerType::c3ghost && l.out_channels < 8) {
          throw ShapeError(layer_name(i, l) + ": C3Ghost needs at least 8 channels");
        }
        out.channels = l.out_channels;
        break;
      case LayerType::sppf:
        if (out.channels < 2 || l.out_channels < 1) throw ShapeError(layer_name(i, l) + ": bad channels");
        out.channels = l.out_channels;
        break;
      case LayerType::upsample:
        out.height *= 2;
        out.width *= 2;
        if (out.stride % 2 != 0) throw ShapeError(layer_name(i, l) + ": cannot upsample past input");
        out.stride /= 2;
        break;
      case LayerType::concat: {
        out.channels = 0;
        for (const auto& s : in) {
          if (s.height != in.front().height || s.width != in.front().width) {
            throw ShapeError(layer_name(i, l) + ": inputs have different spatial sizes");
          }
          out.channels += s.channels;
        }
        break;
      }
      case LayerType::detect:
        if (l.anchors.size() != in.size()) {
          throw ShapeError(layer_name(i, l) + ": one anchor set per input required");
        }
        if (l.num_classes < 1) throw ShapeError(layer_name(i, l) + ": needs at least one class");
        out = {3 * (5 + l.num_classes), 0, 0, 0};
        break;
    }
    shapes.push_back(out);
  }
  return shapes;
}

std::vector<LayerShape> prediction_shapes(const ArchitectureSpec& spec, int height, int width) {
  const auto shapes = infer_shapes(spec, height, width);
  const LayerShape image{spec.input_channels, height, width, 1};
  std::vector<LayerShape> out;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const auto& l = spec.layers[i];
    if (l.type != LayerType::detect) continue;
    for (const auto& s : input_shapes(spec, i, shapes, image)) {
      out.push_back({3 * (5 + l.num_classes), s.height, s.width, s.stride});
    }
  }
  return out;
}

std::vector<ModelBudget> layer_budgets(const ArchitectureSpec& spec, int height, int width) {
  const auto shapes = infer_shapes(spec, height, width);
  const LayerShape image{spec.input_channels, height, width, 1};
  std::vector<ModelBudget> out;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    out.push_back(layer_budget(spec.layers[i], input_shapes(spec, i, shapes, image), shapes[i]));
  }
  return out;
}

ModelBudget compute_budget(const ArchitectureSpec& spec, int height, int width) {
  ModelBudget total;
  for (const auto& b : layer_budgets(spec, height, width)) total += b;
  return total;
}

LayerSpec build_c3ghost(int in_channels, int out_channels, int bottleneck_count) {
  if (in_channels < 1 || out_channels < 1 || bottleneck_count < 1) {
    throw ValidationError("C3Ghost: channel and bottleneck counts must be positive");
  }
  if (out_channels % 2 != 0 || out_channels < 8) {
    throw ValidationError("C3Ghost: out_channels must be even and at least 8");
  }
  LayerSpec l;
  l.type = LayerType::c3ghost;
  l.out_channels = out_channels;
  l.repeats = bottleneck_count;
  return l;
}

namespace {

LayerSpec conv(int c, int k, int s, int p = -1) {
  LayerSpec l;
  l.type = LayerType::conv;
  l.out_channels = c;
  l.kernel = k;
  l.stride = s;
  l.padding = p;
  return l;
}

LayerSpec block(LayerType t, int c, int n, bool shortcut) {
  LayerSpec l;
  l.type = t;
  l.out_channels = c;
  l.repeats = n;
  l.shortcut = shortcut;
  return l;
}

LayerSpec simple(LayerType t, std::vector<int> from = {-1}) {
  LayerSpec l;
  l.type = t;
  l.from = std::move(from);
  return l;
}

const std::vector<std::array<double, 6>> kDefaultAnchors = {
    {10, 13, 16, 30, 33, 23}, {30, 61, 62, 45, 59, 119}, {116, 90, 156, 198, 373, 326}};

ArchitectureSpec yolov5_layout(const std::string& name, LayerType c3_type,
                               std::array<int, 4> depths, int num_classes,
                               const TinyOptions* tiny) {
  ArchitectureSpec s;
  s.name = name;
  s.input_channels = 3;
  auto c3 = [&](int c, int n, bool shortcut) {
    LayerSpec l = block(c3_type, c, n, shortcut);
    if (tiny != nullptr) {
      l.ghost_outer = tiny->ghost_outer;
      l.ghost_ratio = tiny->ghost_ratio;
      l.cheap_kernel = tiny->cheap_kernel;
    }
    return l;
  };
  auto neck_conv = [&](int c, int k, int st) {
    LayerSpec l = conv(c, k, st);
    if (tiny != nullptr && tiny->ghost_neck_convs) {
      l.type = LayerType::ghost_conv;
      l.ghost_ratio = tiny->ghost_ratio;
      l.cheap_kernel = tiny->cheap_kernel;
    }
    return l;
  };
  auto& L = s.layers;
  // backbone
  L.push_back(conv(16, 6, 2, 2));            // 0  P1/2
  L.push_back(conv(32, 3, 2));               // 1  P2/4
  L.push_back(c3(32, depths[0], true));      // 2
  L.push_back(conv(64, 3, 2));               // 3  P3/8
  L.push_back(c3(64, depths[1], true));      // 4
  L.push_back(conv(128, 3, 2));              // 5  P4/16
  L.push_back(c3(128, depths[2], true));     // 6
  L.push_back(conv(256, 3, 2));              // 7  P5/32
  L.push_back(c3(256, depths[3], true));     // 8
  L.push_back(block(LayerType::sppf, 256, 1, true));   // 9
  L.back().kernel = 5;
  // neck
  L.push_back(neck_conv(128, 1, 1));                    // 10
  L.push_back(simple(LayerType::upsample));             // 11
  L.push_back(simple(LayerType::concat, {-1, 6}));      // 12
  L.push_back(c3(128, 1, false));                       // 13
  L.push_back(neck_conv(64, 1, 1));                     // 14
  L.push_back(simple(LayerType::upsample));             // 15
  L.push_back(simple(LayerType::concat, {-1, 4}));      // 16
  L.push_back(c3(64, 1, false));                        // 17 P3/8 out
  L.push_back(neck_conv(64, 3, 2));                     // 18
  L.push_back(simple(LayerType::concat, {-1, 14}));     // 19
  L.push_back(c3(128, 1, false));                       // 20 P4/16 out
  L.push_back(neck_conv(128, 3, 2));                    // 21
  L.push_back(simple(LayerType::concat, {-1, 10}));     // 22
  L.push_back(c3(256, 1, false));                       // 23 P5/32 out
  LayerSpec det = simple(LayerType::detect, {17, 20, 23});
  det.num_classes = num_classes;
  det.anchors = kDefaultAnchors;
  L.push_back(det);                                     // 24
  infer_shapes(s, 640, 640);
  return s;
}

}  // namespace

ArchitectureSpec build_yolov5n(int num_classes) {
  return yolov5_layout("yolov5n", LayerType::c3, {1, 2, 3, 1}, num_classes, nullptr);
}

ArchitectureSpec build_yolov5tiny(const TinyOptions& options) {
  return yolov5_layout("yolov5tiny", LayerType::c3ghost, {1, 1, 1, 1}, options.num_classes,
                       &options);
}

std::string to_text(const ArchitectureSpec& spec) {
  std::ostringstream os;
  os.precision(17);
  os << "# smoky architecture v1\n";
  os << "name " << (spec.name.empty() ? "unnamed" : spec.name) << "\n";
  os << "input_channels " << spec.input_channels << "\n";
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const auto& l = spec.layers[i];
    os << "layer " << i << " type=" << to_string(l.type) << " from=";
    for (std::size_t j = 0; j < l.from.size(); ++j) os << (j ? "," : "") << l.from[j];
    switch (l.type) {
      case LayerType::conv:
      case LayerType::ghost_conv:
        os << " c=" << l.out_channels << " k=" << l.kernel << " s=" << l.stride
           << " p=" << l.effective_padding();
        if (l.type == LayerType::ghost_conv) {
          os << " ratio=" << l.ghost_ratio << " cheap_k=" << l.cheap_kernel;
        }
        break;
      case LayerType::c3:
      case LayerType::c3ghost:
        os << " c=" << l.out_channels << " n=" << l.repeats << " shortcut=" << l.shortcut;
        if (l.type == LayerType::c3ghost) {
          os << " ratio=" << l.ghost_ratio << " cheap_k=" << l.cheap_kernel
             << " ghost_outer=" << l.ghost_outer;
        }
        break;
      case LayerType::sppf:
        os << " c=" << l.out_channels << " k=" << l.kernel;
        break;
      case LayerType::upsample:
      case LayerType::concat:
        break;
      case LayerType::detect:
        os << " nc=" << l.num_classes << " anchors=";
        for (std::size_t a = 0; a < l.anchors.size(); ++a) {
          os << (a ? ";" : "");
          for (std::size_t v = 0; v < 6; ++v) os << (v ? "," : "") << l.anchors[a][v];
        }
        break;
    }
    os << "\n";
  }
  return os.str();
}

namespace {

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(s);
  while (std::getline(is, cur, sep)) out.push_back(cur);
  return out;
}

}  // namespace

ArchitectureSpec architecture_from_text(const std::string& text) {
  ArchitectureSpec spec;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto where = "architecture line " + std::to_string(lineno) + ": ";
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::string key;
    if (!(ls >> key)) continue;
    try {
      if (key == "name") {
        ls >> spec.name;
      } else if (key == "input_channels") {
        ls >> spec.input_channels;
        if (!ls) throw ParseError("missing value");
      } else if (key == "layer") {
        std::size_t index = 0;
        ls >> index;
        if (!ls || index != spec.layers.size()) throw ParseError("layer indices must be consecutive");
        LayerSpec l;
        l.padding = -1;
        std::string tok;
        bool typed = false;
        while (ls >> tok) {
          const auto eq = tok.find('=');
          if (eq == std::string::npos) throw ParseError("expected key=value, got '" + tok + "'");
          const std::string k = tok.substr(0, eq);
          const std::string v = tok.substr(eq + 1);
          if (k == "type") {
            l.type = parse_layer_type(v);
            typed = true;
          } else if (k == "from") {
            l.from.clear();
            for (const auto& f : split(v, ',')) l.from.push_back(std::stoi(f));
          } else if (k == "c") {
            l.out_channels = std::stoi(v);
          } else if (k == "k") {
            l.kernel = std::stoi(v);
          } else if (k == "s") {
            l.stride = std::stoi(v);
          } else if (k == "p") {
            l.padding = std::stoi(v);
          } else if (k == "n") {
            l.repeats = std::stoi(v);
          } else if (k == "shortcut") {
            l.shortcut = std::stoi(v) != 0;
          } else if (k == "ratio") {
            l.ghost_ratio = std::stoi(v);
          } else if (k == "cheap_k") {
            l.cheap_kernel = std::stoi(v);
          } else if (k == "ghost_outer") {
            l.ghost_outer = std::stoi(v) != 0;
          } else if (k == "nc") {
            l.num_classes = std::stoi(v);
          } else if (k == "anchors") {
            for (const auto& level : split(v, ';')) {
              const auto vals = split(level, ',');
              if (vals.size() != 6) throw ParseError("anchor level needs 6 values");
              std::array<double, 6> a{};
              for (std::size_t j = 0; j < 6; ++j) a[j] = std::stod(vals[j]);
              l.anchors.push_back(a);
            }
          } else {
            throw ParseError("unknown layer key '" + k + "'");
          }
        }
        if (!typed) throw ParseError("layer without type");
        // Canonical form keeps the auto padding marker for default paddings.
        if ((l.type == LayerType::conv || l.type == LayerType::ghost_conv) &&
            l.padding == l.kernel / 2) {
          l.padding = -1;
        }
        spec.layers.push_back(std::move(l));
      } else {
        throw ParseError("unknown directive '" + key + "'");
      }
    } catch (const ParseError& e) {
      throw ParseError(where + e.what());
    } catch (const std::logic_error& e) {
      throw ParseError(where + "bad number (" + e.what() + ")");
    }
  }
  return spec;
}

}  // namespace smoky
