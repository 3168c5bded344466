#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "smoky/annotations.hpp"
#include "smoky/box.hpp"

namespace smoky {

struct ConfusionCounts {
  std::int64_t tp = 0;
  std::int64_t fp = 0;
  std::int64_t tn = 0;
  std::int64_t fn = 0;

  std::int64_t positives() const noexcept { return tp + fn; }
  std::int64_t negatives() const noexcept { return fp + tn; }
  ConfusionCounts& operator+=(const ConfusionCounts& o) noexcept {
    tp += o.tp;
    fp += o.fp;
    tn += o.tn;
    fn += o.fn;
    return *this;
  }
  friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

/// A ratio that may be undefined (zero denominator); `reason` says why.
struct Ratio {
  std::optional<double> value;
  std::string reason;

  bool defined() const noexcept { return value.has_value(); }
  static Ratio of(double num, double den, std::string undefined_reason);
  friend bool operator==(const Ratio&, const Ratio&) = default;
};

struct Metrics {
  Ratio dr;          // tp / N_pos (recall)
  Ratio far;         // fp / N_neg
  Ratio precision;   // tp / (tp + fp)
  Ratio f1;          // 2 P DR / (P + DR)
  friend bool operator==(const Metrics&, const Metrics&) = default;
};

/// Throws ValidationError when lengths differ.
ConfusionCounts confusion(const std::vector<bool>& verdicts, const FrameLabelSet& labels);
Metrics metrics(const ConfusionCounts& counts);

enum class Aggregation { pooled, scene_averaged };
std::string_view to_string(Aggregation a) noexcept;
/// Accepts "pooled", "scene" and "scene_averaged".
Aggregation parse_aggregation(std::string_view name);

struct SceneReport {
  ConfusionCounts counts;
  Metrics metrics;
  int videos = 0;
};

struct EvalReport {
  Aggregation mode = Aggregation::pooled;
  ConfusionCounts counts;   // pooled over every video
  Metrics metrics;          // per `mode`
  std::map<std::string, SceneReport> per_scene;
};

struct VideoVerdicts {
  std::string video_id;
  std::vector<bool> verdicts;
};

/// Pooled: metrics of the summed counts. Scene-averaged: mean of each
/// metric over the scenes where it is defined. Scenes come from scene_map
/// (video -> scene) when present, otherwise from the annotation.
/// Throws ValidationError listing unmatched video ids, or on frame-count
/// mismatches.
EvalReport evaluate_run(const std::vector<VideoVerdicts>& runs,
                        const std::vector<VideoAnnotation>& annotations,
                        const std::map<std::string, std::string>& scene_map, Aggregation mode);

struct SweepRow {
  double threshold = 0.0;
  ConfusionCounts counts;
  Metrics metrics;
};

struct LabelledStream {
  std::vector<ScoredDetection> detections;   // smoke-category records are used
  FrameLabelSet labels;
};

/// Frame verdict at threshold t: any smoke detection of the frame scores >= t.
/// Counts are pooled over all streams.
std::vector<SweepRow> threshold_sweep(const std::vector<LabelledStream>& streams,
                                      const std::vector<double>& thresholds);

std::string format_ratio(const Ratio& r);
std::string format_report(const EvalReport& report);
std::string format_sweep(const std::vector<SweepRow>& rows);
nlohmann::json report_to_json(const EvalReport& report);
nlohmann::json sweep_to_json(const std::vector<SweepRow>& rows);

}  // namespace smoky
