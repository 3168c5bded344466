#pragma once

#include <array>
#include <optional>
#include <span>

#include "smoky/box.hpp"

namespace smoky {

/// Smoke-vehicle matching parameters. l_dist is in pixels.
struct MatchConfig {
  double l_dist = 50.0;
  bool front_filter_enabled = true;
  /// Overlap case triggers when IoU exceeds this value; 0 means any overlap.
  double min_overlap_iou = 0.0;

  /// Throws ConfigError unless l_dist > 0 and min_overlap_iou in [0,1).
  void validate() const;
};

enum class MatchRule { overlap, proximity, unmatched };

std::string_view to_string(MatchRule r) noexcept;

struct MatchResult {
  ScoredDetection smoke;
  std::optional<ScoredDetection> vehicle;
  /// Position of the matched vehicle in the candidate list passed in.
  std::optional<std::size_t> vehicle_index;
  MatchRule rule = MatchRule::unmatched;
  /// IoU for the overlap rule, mean anchor distance for proximity, 0 otherwise.
  double score_detail = 0.0;
};

double iou(const BoundingBox& a, const BoundingBox& b) noexcept;
double intersection_area(const BoundingBox& a, const BoundingBox& b) noexcept;

/// Top-left, top-middle and top-right corners of the smoke box.
std::array<Point, 3> smoke_anchor_points(const BoundingBox& smoke) noexcept;
/// Bottom-middle point of the vehicle box.
Point vehicle_anchor_point(const BoundingBox& vehicle) noexcept;
/// Mean Euclidean distance from the three smoke anchors to the vehicle anchor.
double mean_anchor_distance(const BoundingBox& smoke, const BoundingBox& vehicle) noexcept;
/// True iff the vehicle centre lies strictly above the smoke centre (smaller y).
bool is_front_vehicle(const BoundingBox& smoke, const BoundingBox& vehicle) noexcept;

/// Two-case matching. Front vehicles only (when enabled); among those, the
/// overlap case picks the maximum IoU, otherwise the minimum mean anchor
/// distance below l_dist is taken. Ties prefer the higher vehicle score, then
/// the earlier list position.
///
/// Throws ValidationError when `smoke` is not a smoke detection or a vehicle
/// is not car/bus/truck.
MatchResult match_smoke_to_vehicles(const ScoredDetection& smoke,
                                    std::span<const ScoredDetection> vehicles,
                                    const MatchConfig& cfg);

}  // namespace smoky
