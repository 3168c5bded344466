#include "smoky/box.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "smoky/errors.hpp"

namespace smoky {

BoundingBox BoundingBox::make(double x1, double y1, double x2, double y2) {
  if (!std::isfinite(x1) || !std::isfinite(y1) || !std::isfinite(x2) ||
      !std::isfinite(y2)) {
    throw ValidationError("bounding box has non-finite coordinates");
  }
  if (!(x1 < x2) || !(y1 < y2)) {
    std::ostringstream os;
    os << "inverted bounding box [" << x1 << ", " << y1 << ", " << x2 << ", "
       << y2 << "]";
    throw ValidationError(os.str());
  }
  return BoundingBox(x1, y1, x2, y2);
}

std::optional<BoundingBox> BoundingBox::try_make(double x1, double y1, double x2,
                                                 double y2) noexcept {
  if (!std::isfinite(x1) || !std::isfinite(y1) || !std::isfinite(x2) ||
      !std::isfinite(y2) || !(x1 < x2) || !(y1 < y2)) {
    return std::nullopt;
  }
  return BoundingBox(x1, y1, x2, y2);
}

BoundingBox BoundingBox::translated(double dx, double dy) const {
  return make(x1_ + dx, y1_ + dy, x2_ + dx, y2_ + dy);
}

BoundingBox BoundingBox::scaled(double s) const {
  return make(x1_ * s, y1_ * s, x2_ * s, y2_ * s);
}

std::optional<BoundingBox> BoundingBox::clipped(double frame_w,
                                                double frame_h) const noexcept {
  return try_make(std::clamp(x1_, 0.0, frame_w), std::clamp(y1_, 0.0, frame_h),
                  std::clamp(x2_, 0.0, frame_w), std::clamp(y2_, 0.0, frame_h));
}

std::string_view to_string(Category c) noexcept {
  switch (c) {
    case Category::smoke: return "smoke";
    case Category::car: return "car";
    case Category::bus: return "bus";
    case Category::truck: return "truck";
  }
  return "smoke";
}

Category parse_category(std::string_view name) {
  if (name == "smoke") return Category::smoke;
  if (name == "car") return Category::car;
  if (name == "bus") return Category::bus;
  if (name == "truck") return Category::truck;
  throw ValidationError("unknown category '" + std::string(name) + "'");
}

bool is_vehicle(Category c) noexcept { return c != Category::smoke; }

void ScoredDetection::validate() const {
  if (!(score >= 0.0 && score <= 1.0)) {
    std::ostringstream os;
    os << "detection score " << score << " outside [0,1]";
    throw ValidationError(os.str());
  }
  if (frame_index < 0) throw ValidationError("negative frame index");
}

}  // namespace smoky
