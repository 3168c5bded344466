#include "smoky/cascade.hpp"

#include "smoky/errors.hpp"
#include "smoky/json_util.hpp"

namespace smoky {

using nlohmann::json;

void CascadeConfig::validate() const {
  const auto unit = [](double v, const char* name) {
    if (!(v >= 0.0 && v <= 1.0)) throw ConfigError(std::string(name) + " must be in [0,1]");
  };
  unit(smoke_threshold, "smoke_threshold");
  unit(vehicle_threshold, "vehicle_threshold");
  unit(refine_threshold, "refine_threshold");
  match.validate();
  clip.validate();
}

std::string_view to_string(DropStage s) noexcept {
  return s == DropStage::matching ? "matching" : "refiner";
}

Cascade::Cascade(CascadeConfig config, std::string video_id, DetectorHandle& smoke,
                 DetectorHandle& vehicle, ClipScorer* refiner)
    : config_(std::move(config)),
      video_id_(std::move(video_id)),
      smoke_(smoke),
      vehicle_(vehicle),
      refiner_(refiner),
      buffer_(std::max(1, config_.clip.k)) {
  config_.validate();
  if (config_.refiner_enabled) {
    if (refiner_ == nullptr) throw ConfigError("refiner enabled but no refiner model given");
    if (refiner_->k() != config_.clip.k) {
      throw ConfigError("refiner was built for K = " + std::to_string(refiner_->k()) +
                        " but the cascade uses K = " + std::to_string(config_.clip.k));
    }
  }
}

FrameVerdict Cascade::process_frame(int index, const Image& frame) {
  buffer_.push(index, frame);
  detections_.clear();
  FrameVerdict v;
  v.frame_index = index;

  const auto smoke = run_detector(smoke_, frame, index, config_.smoke_threshold);
  detections_ = smoke;
  if (smoke.empty()) return v;

  const auto vehicles = run_detector(vehicle_, frame, index, config_.vehicle_threshold);
  detections_.insert(detections_.end(), vehicles.begin(), vehicles.end());

  for (const auto& s : smoke) {
    const auto m = match_smoke_to_vehicles(s, vehicles, config_.match);
    if (config_.matching_enabled && !m.vehicle) {
      ++v.dropped_by_matching;
      v.dropped.push_back({s, DropStage::matching, std::nullopt});
      continue;
    }
    VerdictPair pair{s, m.vehicle, std::nullopt};
    if (config_.refiner_enabled) {
      const auto clip = extract_clip(buffer_, video_id_, index, s.box, config_.clip,
                                     config_.clip.eval_size);
      const double p = refiner_->smoke_probability(clip);
      pair.probability = p;
      if (p < config_.refine_threshold) {
        ++v.dropped_by_refiner;
        v.dropped.push_back({s, DropStage::refiner, p});
        continue;
      }
    }
    v.pairs.push_back(std::move(pair));
  }
  v.verdict = !v.pairs.empty();
  return v;
}

VideoRun process_video(const CascadeConfig& config, const VideoSource& video,
                       DetectorHandle& smoke, DetectorHandle& vehicle, ClipScorer* refiner) {
  Cascade cascade(config, video.id(), smoke, vehicle, refiner);
  VideoRun run;
  run.video_id = video.id();
  for (int i = 0; i < video.num_frames(); ++i) {
    run.verdicts.push_back(cascade.process_frame(i, video.frame(i)));
    const auto& d = cascade.last_detections();
    run.detections.insert(run.detections.end(), d.begin(), d.end());
  }
  return run;
}

namespace {

json detection_json(const ScoredDetection& d) {
  return {{"box", box_to_json(d.box)}, {"score", d.score},
          {"category", std::string(to_string(d.category))}};
}

ScoredDetection detection_from(const json& j, int frame) {
  ScoredDetection d;
  d.box = box_from_json(j.at("box"));
  d.score = j.at("score").get<double>();
  d.category = parse_category(j.at("category").get<std::string>());
  d.frame_index = frame;
  d.validate();
  return d;
}

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::optional<double> read_optional(const json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<double>();
}

}  // namespace

void write_verdicts(const std::string& video_id, const std::vector<FrameVerdict>& verdicts,
                    const std::filesystem::path& path) {
  JsonLineWriter out(path);
  for (const auto& v : verdicts) {
    json pairs = json::array();
    for (const auto& p : v.pairs) {
      pairs.push_back({{"smoke", detection_json(p.smoke)},
                       {"vehicle", p.vehicle ? detection_json(*p.vehicle) : json(nullptr)},
                       {"prob", optional_number(p.probability)}});
    }
    json dropped = json::array();
    for (const auto& d : v.dropped) {
      dropped.push_back({{"smoke", detection_json(d.smoke)},
                         {"stage", std::string(to_string(d.stage))},
                         {"prob", optional_number(d.probability)}});
    }
    out.write({{"video", video_id},
               {"frame", v.frame_index},
               {"verdict", v.verdict},
               {"pairs", pairs},
               {"dropped_by_matching", v.dropped_by_matching},
               {"dropped_by_refiner", v.dropped_by_refiner},
               {"dropped", dropped}});
  }
  out.close();
}

VerdictFile read_verdicts(const std::filesystem::path& path) {
  VerdictFile f;
  bool first = true;
  for_each_json_line(path, [&](const json& j) {
    const auto video = j.at("video").get<std::string>();
    if (first) {
      f.video_id = video;
      first = false;
    } else if (video != f.video_id) {
      throw ValidationError("verdict file mixes videos '" + f.video_id + "' and '" + video + "'");
    }
    FrameVerdict v;
    v.frame_index = j.at("frame").get<int>();
    if (v.frame_index != static_cast<int>(f.verdicts.size())) {
      throw ValidationError("expected frame " + std::to_string(f.verdicts.size()) + ", got " +
                            std::to_string(v.frame_index));
    }
    v.verdict = j.at("verdict").get<bool>();
    for (const auto& p : j.at("pairs")) {
      VerdictPair pair;
      pair.smoke = detection_from(p.at("smoke"), v.frame_index);
      if (!p.at("vehicle").is_null()) pair.vehicle = detection_from(p["vehicle"], v.frame_index);
      pair.probability = read_optional(p.at("prob"));
      v.pairs.push_back(std::move(pair));
    }
    v.dropped_by_matching = j.at("dropped_by_matching").get<int>();
    v.dropped_by_refiner = j.at("dropped_by_refiner").get<int>();
    if (j.contains("dropped")) {
      for (const auto& d : j["dropped"]) {
        const auto stage = d.at("stage").get<std::string>();
        if (stage != "matching" && stage != "refiner") {
          throw ValidationError("unknown drop stage '" + stage + "'");
        }
        v.dropped.push_back({detection_from(d.at("smoke"), v.frame_index),
                             stage == "matching" ? DropStage::matching : DropStage::refiner,
                             read_optional(d.at("prob"))});
      }
    }
    if (v.dropped_by_matching < 0 || v.dropped_by_refiner < 0) {
      throw ValidationError("negative drop count");
    }
    if (v.verdict != !v.pairs.empty()) {
      throw ValidationError("verdict disagrees with the surviving pairs");
    }
    f.verdicts.push_back(std::move(v));
  });
  return f;
}

std::vector<ClipSample> collect_training_clips(const CascadeConfig& config,
                                               const VideoSource& video,
                                               const FrameLabelSet& labels,
                                               DetectorHandle& smoke, DetectorHandle& vehicle) {
  config.validate();
  if (labels.num_frames() != video.num_frames()) {
    throw ValidationError("labels cover " + std::to_string(labels.num_frames()) +
                          " frames but video '" + video.id() + "' has " +
                          std::to_string(video.num_frames()));
  }
  FrameBuffer buffer(config.clip.k);
  std::vector<ClipSample> clips;
  for (int i = 0; i < video.num_frames(); ++i) {
    const Image frame = video.frame(i);
    buffer.push(i, frame);
    const auto detections = run_detector(smoke, frame, i, config.smoke_threshold);
    if (detections.empty()) continue;
    const auto vehicles = run_detector(vehicle, frame, i, config.vehicle_threshold);
    for (const auto& s : detections) {
      if (config.matching_enabled &&
          !match_smoke_to_vehicles(s, vehicles, config.match).vehicle) {
        continue;
      }
      auto clip = extract_clip(buffer, video.id(), i, s.box, config.clip,
                               config.clip.train_resize);
      clip.label = labels.positive(i) ? ClipLabel::smoke : ClipLabel::non_smoke;
      clips.push_back(std::move(clip));
    }
  }
  return clips;
}

}  // namespace smoky
