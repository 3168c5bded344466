#include "smoky/image.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>

#include "smoky/errors.hpp"

namespace smoky {

Image::Image(int width, int height, Rgb fill) : width_(width), height_(height) {
  if (width <= 0 || height <= 0) throw ShapeError("image dimensions must be positive");
  pixels_.resize(static_cast<std::size_t>(width) * static_cast<std::size_t>(height) * 3);
  for (std::size_t i = 0; i < pixels_.size(); i += 3) {
    pixels_[i] = fill.r;
    pixels_[i + 1] = fill.g;
    pixels_[i + 2] = fill.b;
  }
}

void Image::fill_rect(int x1, int y1, int x2, int y2, Rgb color) {
  x1 = std::max(x1, 0);
  y1 = std::max(y1, 0);
  x2 = std::min(x2, width_);
  y2 = std::min(y2, height_);
  for (int y = y1; y < y2; ++y) {
    for (int x = x1; x < x2; ++x) {
      auto* p = pixel(x, y);
      p[0] = color.r;
      p[1] = color.g;
      p[2] = color.b;
    }
  }
}

void Image::blend(int x, int y, Rgb color, double alpha) {
  if (x < 0 || y < 0 || x >= width_ || y >= height_) return;
  alpha = std::clamp(alpha, 0.0, 1.0);
  auto* p = pixel(x, y);
  const Rgb c = color;
  const std::uint8_t ch[3] = {c.r, c.g, c.b};
  for (int i = 0; i < 3; ++i) {
    const double v = (1.0 - alpha) * p[i] + alpha * ch[i];
    p[i] = static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 255.0)));
  }
}

void Image::draw_box(const BoundingBox& box, Rgb color, int thickness) {
  const int x1 = static_cast<int>(std::floor(box.x1()));
  const int y1 = static_cast<int>(std::floor(box.y1()));
  const int x2 = static_cast<int>(std::ceil(box.x2()));
  const int y2 = static_cast<int>(std::ceil(box.y2()));
  fill_rect(x1, y1, x2, y1 + thickness, color);
  fill_rect(x1, y2 - thickness, x2, y2, color);
  fill_rect(x1, y1, x1 + thickness, y2, color);
  fill_rect(x2 - thickness, y1, x2, y2, color);
}

void Image::draw_line(Point a, Point b, Rgb color) {
  const double len = std::hypot(b.x - a.x, b.y - a.y);
  const int steps = std::max(1, static_cast<int>(std::ceil(len)));
  for (int i = 0; i <= steps; ++i) {
    const double t = static_cast<double>(i) / steps;
    blend(static_cast<int>(std::lround(a.x + t * (b.x - a.x))),
          static_cast<int>(std::lround(a.y + t * (b.y - a.y))), color, 1.0);
  }
}

void write_ppm(const Image& image, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "P6\n" << image.width() << ' ' << image.height() << "\n255\n";
  out.write(reinterpret_cast<const char*>(image.bytes().data()),
            static_cast<std::streamsize>(image.bytes().size()));
  if (!out) throw IoError("write failed: " + path.string());
}

namespace {

std::string next_token(std::istream& in) {
  std::string tok;
  while (in) {
    in >> std::ws;
    if (in.peek() == '#') {
      std::string skip;
      std::getline(in, skip);
      continue;
    }
    in >> tok;
    break;
  }
  return tok;
}

}  // namespace

Image read_ppm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  if (next_token(in) != "P6") throw ParseError(path.string() + ": not a binary PPM");
  int w = 0;
  int h = 0;
  int maxval = 0;
  try {
    w = std::stoi(next_token(in));
    h = std::stoi(next_token(in));
    maxval = std::stoi(next_token(in));
  } catch (const std::exception&) {
    throw ParseError(path.string() + ": malformed PPM header");
  }
  if (maxval != 255) throw ParseError(path.string() + ": only maxval 255 is supported");
  in.get();
  Image img(w, h);
  in.read(reinterpret_cast<char*>(img.bytes().data()),
          static_cast<std::streamsize>(img.bytes().size()));
  if (!in) throw IoError(path.string() + ": truncated pixel data");
  return img;
}

Image resample(const Image& src, const BoundingBox& region, int out_w, int out_h) {
  Image out(out_w, out_h);
  const double sx = region.width() / out_w;
  const double sy = region.height() / out_h;
  const int max_x = src.width() - 1;
  const int max_y = src.height() - 1;
  for (int oy = 0; oy < out_h; ++oy) {
    const double fy = std::clamp(region.y1() + (oy + 0.5) * sy - 0.5, 0.0,
                                 static_cast<double>(max_y));
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, max_y);
    const double wy = fy - y0;
    for (int ox = 0; ox < out_w; ++ox) {
      const double fx = std::clamp(region.x1() + (ox + 0.5) * sx - 0.5, 0.0,
                                   static_cast<double>(max_x));
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, max_x);
      const double wx = fx - x0;
      auto* o = out.pixel(ox, oy);
      for (int c = 0; c < 3; ++c) {
        const double top = (1 - wx) * src.pixel(x0, y0)[c] + wx * src.pixel(x1, y0)[c];
        const double bot = (1 - wx) * src.pixel(x0, y1)[c] + wx * src.pixel(x1, y1)[c];
        o[c] = static_cast<std::uint8_t>(std::lround((1 - wy) * top + wy * bot));
      }
    }
  }
  return out;
}

}  // namespace smoky
