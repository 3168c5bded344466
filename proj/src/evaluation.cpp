#include "smoky/evaluation.hpp"

#include <algorithm>
#include <cstdio>
#include <set>
#include <sstream>

#include "smoky/errors.hpp"

namespace smoky {

using nlohmann::json;

Ratio Ratio::of(double num, double den, std::string undefined_reason) {
  if (den == 0.0) return {std::nullopt, std::move(undefined_reason)};
  return {num / den, ""};
}

ConfusionCounts confusion(const std::vector<bool>& verdicts, const FrameLabelSet& labels) {
  if (static_cast<int>(verdicts.size()) != labels.num_frames()) {
    throw ValidationError("video '" + labels.video_id() + "': " +
                          std::to_string(verdicts.size()) + " verdicts for " +
                          std::to_string(labels.num_frames()) + " labelled frames");
  }
  ConfusionCounts c;
  for (std::size_t i = 0; i < verdicts.size(); ++i) {
    const bool truth = labels.labels()[i];
    if (verdicts[i]) {
      ++(truth ? c.tp : c.fp);
    } else {
      ++(truth ? c.fn : c.tn);
    }
  }
  return c;
}

Metrics metrics(const ConfusionCounts& c) {
  Metrics m;
  m.dr = Ratio::of(static_cast<double>(c.tp), static_cast<double>(c.positives()),
                   "no positive frames");
  m.far = Ratio::of(static_cast<double>(c.fp), static_cast<double>(c.negatives()),
                    "no negative frames");
  m.precision = Ratio::of(static_cast<double>(c.tp), static_cast<double>(c.tp + c.fp),
                          "no positive verdicts");
  if (!m.precision.defined()) {
    m.f1 = {std::nullopt, "precision undefined"};
  } else if (!m.dr.defined()) {
    m.f1 = {std::nullopt, "detection rate undefined"};
  } else {
    const double p = *m.precision.value;
    const double r = *m.dr.value;
    m.f1 = Ratio::of(2.0 * p * r, p + r, "precision and detection rate are both zero");
  }
  return m;
}

std::string_view to_string(Aggregation a) noexcept {
  return a == Aggregation::pooled ? "pooled" : "scene_averaged";
}

Aggregation parse_aggregation(std::string_view name) {
  if (name == "pooled") return Aggregation::pooled;
  if (name == "scene" || name == "scene_averaged") return Aggregation::scene_averaged;
  throw ConfigError("unknown aggregation '" + std::string(name) + "' (expected pooled or scene)");
}

namespace {

Ratio average(const std::vector<const Ratio*>& values) {
  double sum = 0.0;
  int n = 0;
  for (const Ratio* r : values) {
    if (r->defined()) {
      sum += *r->value;
      ++n;
    }
  }
  if (n == 0) return {std::nullopt, "undefined in every scene"};
  return {sum / n, ""};
}

std::string join(const std::set<std::string>& ids) {
  std::string out;
  for (const auto& id : ids) out += (out.empty() ? "" : ", ") + id;
  return out;
}

}  // namespace

EvalReport evaluate_run(const std::vector<VideoVerdicts>& runs,
                        const std::vector<VideoAnnotation>& annotations,
                        const std::map<std::string, std::string>& scene_map, Aggregation mode) {
  std::map<std::string, const VideoAnnotation*> by_id;
  for (const auto& a : annotations) by_id[a.video] = &a;
  std::set<std::string> run_ids;
  std::set<std::string> missing_annotation;
  for (const auto& r : runs) {
    if (!run_ids.insert(r.video_id).second) {
      throw ValidationError("video '" + r.video_id + "' appears in more than one verdict file");
    }
    if (!by_id.count(r.video_id)) missing_annotation.insert(r.video_id);
  }
  std::set<std::string> missing_verdicts;
  for (const auto& [id, a] : by_id) {
    if (!run_ids.count(id)) missing_verdicts.insert(id);
  }
  if (!missing_annotation.empty() || !missing_verdicts.empty()) {
    std::string msg = "video ids do not match:";
    if (!missing_annotation.empty()) msg += " no annotation for [" + join(missing_annotation) + "]";
    if (!missing_verdicts.empty()) msg += " no verdicts for [" + join(missing_verdicts) + "]";
    throw ValidationError(msg);
  }

  EvalReport report;
  report.mode = mode;
  for (const auto& r : runs) {
    const VideoAnnotation& a = *by_id.at(r.video_id);
    const auto counts = confusion(r.verdicts, expand_segments(a));
    const auto it = scene_map.find(r.video_id);
    const std::string scene = it != scene_map.end() ? it->second : a.scene;
    auto& s = report.per_scene[scene];
    s.counts += counts;
    ++s.videos;
    report.counts += counts;
  }
  for (auto& [scene, s] : report.per_scene) s.metrics = metrics(s.counts);
  if (mode == Aggregation::pooled) {
    report.metrics = metrics(report.counts);
  } else {
    std::vector<const Ratio*> dr, far, precision, f1;
    for (const auto& [scene, s] : report.per_scene) {
      dr.push_back(&s.metrics.dr);
      far.push_back(&s.metrics.far);
      precision.push_back(&s.metrics.precision);
      f1.push_back(&s.metrics.f1);
    }
    report.metrics = {average(dr), average(far), average(precision), average(f1)};
  }
  return report;
}

std::vector<SweepRow> threshold_sweep(const std::vector<LabelledStream>& streams,
                                      const std::vector<double>& thresholds) {
  // Best smoke score per frame decides every threshold at once.
  std::vector<std::vector<double>> best(streams.size());
  for (std::size_t v = 0; v < streams.size(); ++v) {
    const auto& s = streams[v];
    best[v].assign(static_cast<std::size_t>(s.labels.num_frames()), -1.0);
    for (const auto& d : s.detections) {
      if (d.category != Category::smoke) continue;
      if (d.frame_index < 0 || d.frame_index >= s.labels.num_frames()) {
        throw RangeError("detection frame " + std::to_string(d.frame_index) +
                         " outside video '" + s.labels.video_id() + "'");
      }
      auto& b = best[v][static_cast<std::size_t>(d.frame_index)];
      b = std::max(b, d.score);
    }
  }
  std::vector<SweepRow> rows;
  for (double t : thresholds) {
    if (!(t >= 0.0)) throw RangeError("sweep thresholds must be >= 0");
    SweepRow row;
    row.threshold = t;
    for (std::size_t v = 0; v < streams.size(); ++v) {
      std::vector<bool> verdicts(best[v].size());
      for (std::size_t f = 0; f < verdicts.size(); ++f) verdicts[f] = best[v][f] >= 0 && best[v][f] >= t;
      row.counts += confusion(verdicts, streams[v].labels);
    }
    row.metrics = metrics(row.counts);
    rows.push_back(row);
  }
  return rows;
}

std::string format_ratio(const Ratio& r) {
  if (!r.defined()) return "undefined (" + r.reason + ")";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", *r.value);
  return buf;
}

namespace {

std::string counts_and_ratios(const ConfusionCounts& c, const Metrics& m) {
  char buf[96];
  std::snprintf(buf, sizeof buf, " %6lld %6lld %6lld %6lld", static_cast<long long>(c.tp),
                static_cast<long long>(c.fp), static_cast<long long>(c.tn),
                static_cast<long long>(c.fn));
  std::string out = buf;
  for (const Ratio* r : {&m.dr, &m.far, &m.precision, &m.f1}) {
    std::snprintf(buf, sizeof buf, "  %-9s", format_ratio(*r).c_str());
    out += buf;
  }
  while (!out.empty() && out.back() == ' ') out.pop_back();
  return out;
}

constexpr const char* kColumns = "     TP     FP     TN     FN  DR         FAR        Precision  F1\n";

}  // namespace

std::string format_report(const EvalReport& report) {
  std::ostringstream os;
  char name[64];
  os << "aggregation: " << to_string(report.mode) << "\n";
  std::snprintf(name, sizeof name, "%-18s", "scene");
  os << name << kColumns;
  const auto line = [&](const std::string& label, const ConfusionCounts& c, const Metrics& m) {
    std::snprintf(name, sizeof name, "%-18s", label.c_str());
    os << name << counts_and_ratios(c, m) << "\n";
  };
  for (const auto& [scene, s] : report.per_scene) line(scene, s.counts, s.metrics);
  line("overall", report.counts, report.metrics);
  return os.str();
}

std::string format_sweep(const std::vector<SweepRow>& rows) {
  std::ostringstream os;
  os << "threshold" << kColumns;
  for (const auto& r : rows) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%9.3f", r.threshold);
    os << buf << counts_and_ratios(r.counts, r.metrics) << "\n";
  }
  return os.str();
}

namespace {

json ratio_json(const Ratio& r) {
  if (r.defined()) return *r.value;
  return {{"undefined", r.reason}};
}

json counts_json(const ConfusionCounts& c) {
  return {{"tp", c.tp}, {"fp", c.fp}, {"tn", c.tn}, {"fn", c.fn}};
}

json metrics_json(const Metrics& m) {
  return {{"dr", ratio_json(m.dr)},
          {"far", ratio_json(m.far)},
          {"precision", ratio_json(m.precision)},
          {"f1", ratio_json(m.f1)}};
}

}  // namespace

json report_to_json(const EvalReport& report) {
  json scenes = json::object();
  for (const auto& [scene, s] : report.per_scene) {
    scenes[scene] = {{"videos", s.videos},
                     {"counts", counts_json(s.counts)},
                     {"metrics", metrics_json(s.metrics)}};
  }
  return {{"aggregation", std::string(to_string(report.mode))},
          {"counts", counts_json(report.counts)},
          {"metrics", metrics_json(report.metrics)},
          {"per_scene", scenes}};
}

json sweep_to_json(const std::vector<SweepRow>& rows) {
  json out = json::array();
  for (const auto& r : rows) {
    out.push_back({{"threshold", r.threshold},
                   {"counts", counts_json(r.counts)},
                   {"metrics", metrics_json(r.metrics)}});
  }
  return out;
}

}  // namespace smoky
