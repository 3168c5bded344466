#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>

namespace smoky {

struct Point {
  double x = 0.0;
  double y = 0.0;
};

/// Axis-aligned box in pixel coordinates, corner form, origin top-left.
/// Construction through make() enforces x1 < x2, y1 < y2 and finiteness.
class BoundingBox {
 public:
  BoundingBox() = default;

  /// Throws ValidationError when the corners are inverted or not finite.
  static BoundingBox make(double x1, double y1, double x2, double y2);
  static std::optional<BoundingBox> try_make(double x1, double y1, double x2,
                                             double y2) noexcept;

  double x1() const noexcept { return x1_; }
  double y1() const noexcept { return y1_; }
  double x2() const noexcept { return x2_; }
  double y2() const noexcept { return y2_; }

  double width() const noexcept { return x2_ - x1_; }
  double height() const noexcept { return y2_ - y1_; }
  double area() const noexcept { return width() * height(); }
  Point center() const noexcept { return {(x1_ + x2_) / 2.0, (y1_ + y2_) / 2.0}; }

  std::array<double, 4> corners() const noexcept { return {x1_, y1_, x2_, y2_}; }

  BoundingBox translated(double dx, double dy) const;
  BoundingBox scaled(double s) const;

  /// Intersection with [0,w]x[0,h]; empty result when the box lies outside.
  std::optional<BoundingBox> clipped(double frame_w, double frame_h) const noexcept;

  bool inside(double frame_w, double frame_h) const noexcept {
    return x1_ >= 0.0 && y1_ >= 0.0 && x2_ <= frame_w && y2_ <= frame_h;
  }

  friend bool operator==(const BoundingBox&, const BoundingBox&) = default;

 private:
  BoundingBox(double x1, double y1, double x2, double y2)
      : x1_(x1), y1_(y1), x2_(x2), y2_(y2) {}

  double x1_ = 0.0;
  double y1_ = 0.0;
  double x2_ = 1.0;
  double y2_ = 1.0;
};

enum class Category { smoke, car, bus, truck };

std::string_view to_string(Category c) noexcept;
/// Throws ValidationError on an unknown name.
Category parse_category(std::string_view name);
bool is_vehicle(Category c) noexcept;

struct ScoredDetection {
  BoundingBox box;
  double score = 0.0;
  Category category = Category::smoke;
  int frame_index = 0;

  /// Throws ValidationError when score is outside [0,1] or frame_index < 0.
  void validate() const;

  friend bool operator==(const ScoredDetection&, const ScoredDetection&) = default;
};

}  // namespace smoky
