#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "smoky/box.hpp"

namespace smoky {

struct Rgb {
  std::uint8_t r = 0;
  std::uint8_t g = 0;
  std::uint8_t b = 0;
};

/// 8-bit interleaved RGB raster.
class Image {
 public:
  Image() = default;
  Image(int width, int height, Rgb fill = {});

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  bool empty() const noexcept { return pixels_.empty(); }

  std::uint8_t* pixel(int x, int y) noexcept { return &pixels_[index(x, y)]; }
  const std::uint8_t* pixel(int x, int y) const noexcept { return &pixels_[index(x, y)]; }

  const std::vector<std::uint8_t>& bytes() const noexcept { return pixels_; }
  std::vector<std::uint8_t>& bytes() noexcept { return pixels_; }

  void fill_rect(int x1, int y1, int x2, int y2, Rgb color);
  /// Alpha-blend color into the pixel, alpha in [0,1].
  void blend(int x, int y, Rgb color, double alpha);
  /// One-pixel-wide (or `thickness`) outline; parts outside the raster are skipped.
  void draw_box(const BoundingBox& box, Rgb color, int thickness = 2);
  void draw_line(Point a, Point b, Rgb color);

  friend bool operator==(const Image&, const Image&) = default;

 private:
  std::size_t index(int x, int y) const noexcept {
    return (static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
            static_cast<std::size_t>(x)) * 3;
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> pixels_;
};

/// Binary PPM (P6, maxval 255).
void write_ppm(const Image& image, const std::filesystem::path& path);
Image read_ppm(const std::filesystem::path& path);

/// Bilinear sample of the square/rect region [x1,x2)x[y1,y2) into out_w x out_h.
/// Coordinates outside the raster are clamped to the border.
Image resample(const Image& src, const BoundingBox& region, int out_w, int out_h);

}  // namespace smoky
