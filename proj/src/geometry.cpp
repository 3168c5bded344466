#include "smoky/geometry.hpp"

#include <algorithm>
#include <cmath>

#include "smoky/errors.hpp"

namespace smoky {

void MatchConfig::validate() const {
  if (!(l_dist > 0.0) || !std::isfinite(l_dist)) throw ConfigError("l_dist must be positive");
  if (!(min_overlap_iou >= 0.0 && min_overlap_iou < 1.0)) {
    throw ConfigError("min_overlap_iou must lie in [0,1)");
  }
}

std::string_view to_string(MatchRule r) noexcept {
  switch (r) {
    case MatchRule::overlap: return "overlap";
    case MatchRule::proximity: return "proximity";
    case MatchRule::unmatched: return "unmatched";
  }
  return "unmatched";
}

double intersection_area(const BoundingBox& a, const BoundingBox& b) noexcept {
  const double w = std::min(a.x2(), b.x2()) - std::max(a.x1(), b.x1());
  const double h = std::min(a.y2(), b.y2()) - std::max(a.y1(), b.y1());
  return (w > 0.0 && h > 0.0) ? w * h : 0.0;
}

double iou(const BoundingBox& a, const BoundingBox& b) noexcept {
  const double inter = intersection_area(a, b);
  if (inter <= 0.0) return 0.0;
  return inter / (a.area() + b.area() - inter);
}

std::array<Point, 3> smoke_anchor_points(const BoundingBox& s) noexcept {
  return {Point{s.x1(), s.y1()}, Point{(s.x1() + s.x2()) / 2.0, s.y1()}, Point{s.x2(), s.y1()}};
}

Point vehicle_anchor_point(const BoundingBox& v) noexcept {
  return {(v.x1() + v.x2()) / 2.0, v.y2()};
}

double mean_anchor_distance(const BoundingBox& smoke, const BoundingBox& vehicle) noexcept {
  const Point va = vehicle_anchor_point(vehicle);
  double sum = 0.0;
  for (const Point& p : smoke_anchor_points(smoke)) sum += std::hypot(p.x - va.x, p.y - va.y);
  return sum / 3.0;
}

bool is_front_vehicle(const BoundingBox& smoke, const BoundingBox& vehicle) noexcept {
  return vehicle.center().y < smoke.center().y;
}

namespace {

// True when candidate (value, score, index) beats the incumbent.
bool better(double value, double score, std::size_t index, double best_value,
            double best_score, std::size_t best_index, bool maximise) {
  if (value != best_value) return maximise ? value > best_value : value < best_value;
  if (score != best_score) return score > best_score;
  return index < best_index;
}

}  // namespace

MatchResult match_smoke_to_vehicles(const ScoredDetection& smoke,
                                    std::span<const ScoredDetection> vehicles,
                                    const MatchConfig& cfg) {
  if (smoke.category != Category::smoke) {
    throw ValidationError("matching expects a smoke detection");
  }
  MatchResult result;
  result.smoke = smoke;

  std::vector<std::size_t> candidates;
  for (std::size_t i = 0; i < vehicles.size(); ++i) {
    if (!is_vehicle(vehicles[i].category)) {
      throw ValidationError("matching expects car, bus or truck vehicles");
    }
    if (!cfg.front_filter_enabled || is_front_vehicle(smoke.box, vehicles[i].box)) {
      candidates.push_back(i);
    }
  }

  std::optional<std::size_t> best;
  double best_iou = 0.0;
  for (std::size_t i : candidates) {
    const double v = iou(smoke.box, vehicles[i].box);
    if (v <= cfg.min_overlap_iou || v <= 0.0) continue;
    if (!best || better(v, vehicles[i].score, i, best_iou, vehicles[*best].score, *best, true)) {
      best = i;
      best_iou = v;
    }
  }
  if (best) {
    result.rule = MatchRule::overlap;
    result.vehicle = vehicles[*best];
    result.vehicle_index = best;
    result.score_detail = best_iou;
    return result;
  }

  double best_dist = 0.0;
  for (std::size_t i : candidates) {
    const double d = mean_anchor_distance(smoke.box, vehicles[i].box);
    if (!best || better(d, vehicles[i].score, i, best_dist, vehicles[*best].score, *best, false)) {
      best = i;
      best_dist = d;
    }
  }
  if (best && best_dist < cfg.l_dist) {
    result.rule = MatchRule::proximity;
    result.vehicle = vehicles[*best];
    result.vehicle_index = best;
    result.score_detail = best_dist;
  }
  return result;
}

}  // namespace smoky
