#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "smoky/cascade.hpp"
#include "smoky/refiner.hpp"

namespace smoky {

/// Everything a cascade run needs. Detector specs:
///   "oracle"            ground truth from the video's truth.jsonl
///   "stream:<path>"     replay a detection stream file
///   "yolo:<checkpoint>" detector network checkpoint
struct RunConfig {
  CascadeConfig cascade;
  double nms_iou = 0.45;
  std::string smoke_detector = "oracle";
  std::string vehicle_detector = "oracle";
  std::string refiner_checkpoint;
  HeadVariant refiner_variant = HeadVariant::suffix3d;
  int refiner_width = 64;
  std::uint64_t seed = 0;
  int jobs = 1;
  TrainSchedule schedule;

  void validate() const;
};

struct ConfigKey {
  std::string name;
  std::string default_value;
  std::string help;
};

/// Every recognised key with its default and a one-line description.
const std::vector<ConfigKey>& config_keys();

/// Parses `key = value` lines; '#' starts a comment, values may be quoted.
/// Throws ParseError naming `origin` and the line on malformed input or a
/// repeated key.
std::map<std::string, std::string> parse_key_values(const std::string& text,
                                                    const std::string& origin);

/// Throws ConfigError on an unknown key or a value of the wrong type.
void apply_setting(RunConfig& config, const std::string& key, const std::string& value);

/// Reads and applies a config file. Relative paths inside it resolve against
/// the file's directory. Throws IoError when unreadable.
RunConfig load_run_config(const std::filesystem::path& path);

/// The config rendered back as a key/value document.
std::string to_config_text(const RunConfig& config);

}  // namespace smoky
