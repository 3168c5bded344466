#include "smoky/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "smoky/errors.hpp"

namespace smoky {

void RunConfig::validate() const {
  cascade.validate();
  if (!(nms_iou > 0.0 && nms_iou <= 1.0)) throw ConfigError("nms_iou must be in (0,1]");
  if (refiner_width < 1) throw ConfigError("refiner_width must be >= 1");
  if (jobs < 1) throw ConfigError("jobs must be >= 1");
  if (schedule.epochs < 0 || schedule.batch_size < 1 || schedule.step_epochs < 0 ||
      !(schedule.learning_rate > 0.0)) {
    throw ConfigError("invalid training schedule");
  }
}

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = {
      {"smoke_threshold", "0.2", "stage-1 smoke detection score threshold"},
      {"vehicle_threshold", "0.25", "vehicle detection score threshold"},
      {"nms_iou", "0.45", "class-wise NMS IoU threshold"},
      {"l_dist", "50", "proximity matching distance limit in pixels"},
      {"front_filter", "true", "only match vehicles whose centre is above the smoke centre"},
      {"min_overlap_iou", "0", "IoU above which the overlap case applies"},
      {"matching_enabled", "true", "drop smoke detections without a matched vehicle"},
      {"refiner_enabled", "true", "drop detections the clip classifier rejects"},
      {"refine_threshold", "0.5", "smoke probability needed to keep a detection"},
      {"k", "3", "clip length in frames"},
      {"min_side", "112", "minimum side of the square clip region"},
      {"train_resize", "128", "patch size stored for training clips"},
      {"train_crop", "112", "random crop size during training"},
      {"eval_size", "112", "patch size at inference"},
      {"smoke_detector", "oracle", "oracle | stream:<file> | yolo:<checkpoint>"},
      {"vehicle_detector", "oracle", "oracle | stream:<file> | yolo:<checkpoint>"},
      {"refiner_checkpoint", "", "trained refiner checkpoint"},
      {"refiner_variant", "suffix3d", "prefix3d | suffix3d | avg2d | cat2d"},
      {"refiner_width", "64", "base channel width of the residual backbone"},
      {"epochs", "10", "refiner training epochs"},
      {"batch_size", "8", "refiner training batch size"},
      {"learning_rate", "0.01", "initial learning rate"},
      {"lr_step_epochs", "4", "epochs between learning-rate decays"},
      {"lr_gamma", "0.1", "learning-rate decay factor"},
      {"momentum", "0.9", "SGD momentum"},
      {"weight_decay", "0.0005", "SGD weight decay"},
      {"seed", "0", "seed for every random choice"},
      {"jobs", "1", "videos processed in parallel"},
  };
  return keys;
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto* end = v.data() + v.size();
  const auto r = std::from_chars(v.data(), end, out);
  if (r.ec != std::errc() || r.ptr != end) {
    throw ConfigError(key + ": expected a number, got '" + v + "'");
  }
  return out;
}

long long to_int(const std::string& key, const std::string& v) {
  long long out = 0;
  const auto* end = v.data() + v.size();
  const auto r = std::from_chars(v.data(), end, out);
  if (r.ec != std::errc() || r.ptr != end) {
    throw ConfigError(key + ": expected an integer, got '" + v + "'");
  }
  return out;
}

int to_int32(const std::string& key, const std::string& v) {
  const long long x = to_int(key, v);
  if (x < -2147483647LL || x > 2147483647LL) throw ConfigError(key + ": value out of range");
  return static_cast<int>(x);
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true") return true;
  if (v == "false") return false;
  throw ConfigError(key + ": expected true or false, got '" + v + "'");
}

}  // namespace

std::map<std::string, std::string> parse_key_values(const std::string& text,
                                                    const std::string& origin) {
  std::map<std::string, std::string> out;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto where = origin + ":" + std::to_string(lineno) + ": ";
    std::string content;
    bool quoted = false;
    for (char c : line) {
      if (c == '"') quoted = !quoted;
      if (c == '#' && !quoted) break;
      content += c;
    }
    if (quoted) throw ParseError(where + "unterminated string");
    content = trim(content);
    if (content.empty()) continue;
    const auto eq = content.find('=');
    if (eq == std::string::npos) throw ParseError(where + "expected key = value");
    const std::string key = trim(content.substr(0, eq));
    std::string value = trim(content.substr(eq + 1));
    if (key.empty()) throw ParseError(where + "missing key");
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') {
      value = value.substr(1, value.size() - 2);
    }
    if (!out.emplace(key, value).second) throw ParseError(where + "duplicate key '" + key + "'");
  }
  return out;
}

void apply_setting(RunConfig& c, const std::string& key, const std::string& v) {
  auto& cc = c.cascade;
  if (key == "smoke_threshold") cc.smoke_threshold = to_double(key, v);
  else if (key == "vehicle_threshold") cc.vehicle_threshold = to_double(key, v);
  else if (key == "nms_iou") c.nms_iou = to_double(key, v);
  else if (key == "l_dist") cc.match.l_dist = to_double(key, v);
  else if (key == "front_filter") cc.match.front_filter_enabled = to_bool(key, v);
  else if (key == "min_overlap_iou") cc.match.min_overlap_iou = to_double(key, v);
  else if (key == "matching_enabled") cc.matching_enabled = to_bool(key, v);
  else if (key == "refiner_enabled") cc.refiner_enabled = to_bool(key, v);
  else if (key == "refine_threshold") cc.refine_threshold = to_double(key, v);
  else if (key == "k") cc.clip.k = to_int32(key, v);
  else if (key == "min_side") cc.clip.min_side = to_int32(key, v);
  else if (key == "train_resize") cc.clip.train_resize = to_int32(key, v);
  else if (key == "train_crop") cc.clip.train_crop = to_int32(key, v);
  else if (key == "eval_size") cc.clip.eval_size = to_int32(key, v);
  else if (key == "smoke_detector") c.smoke_detector = v;
  else if (key == "vehicle_detector") c.vehicle_detector = v;
  else if (key == "refiner_checkpoint") c.refiner_checkpoint = v;
  else if (key == "refiner_variant") c.refiner_variant = parse_head_variant(v);
  else if (key == "refiner_width") c.refiner_width = to_int32(key, v);
  else if (key == "epochs") c.schedule.epochs = to_int32(key, v);
  else if (key == "batch_size") c.schedule.batch_size = to_int32(key, v);
  else if (key == "learning_rate") c.schedule.learning_rate = to_double(key, v);
  else if (key == "lr_step_epochs") c.schedule.step_epochs = to_int32(key, v);
  else if (key == "lr_gamma") c.schedule.gamma = to_double(key, v);
  else if (key == "momentum") c.schedule.momentum = to_double(key, v);
  else if (key == "weight_decay") c.schedule.weight_decay = to_double(key, v);
  else if (key == "seed") {
    const long long s = to_int(key, v);
    if (s < 0) throw ConfigError("seed must be non-negative");
    c.seed = static_cast<std::uint64_t>(s);
    c.schedule.seed = c.seed;
  } else if (key == "jobs") c.jobs = to_int32(key, v);
  else throw ConfigError("unknown config key '" + key + "'");
}

namespace {

std::string resolve(const std::filesystem::path& base, const std::string& value,
                    const std::string& prefix = "") {
  if (value.rfind(prefix, 0) != 0) return value;
  const std::filesystem::path p = value.substr(prefix.size());
  if (p.empty() || p.is_absolute()) return value;
  return prefix + (base / p).lexically_normal().string();
}

}  // namespace

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  RunConfig c;
  const auto base = path.parent_path();
  for (const auto& [key, value] : parse_key_values(buf.str(), path.string())) {
    try {
      apply_setting(c, key, value);
    } catch (const ConfigError& e) {
      throw ConfigError(path.string() + ": " + e.what());
    }
  }
  c.smoke_detector = resolve(base, resolve(base, c.smoke_detector, "stream:"), "yolo:");
  c.vehicle_detector = resolve(base, resolve(base, c.vehicle_detector, "stream:"), "yolo:");
  if (!c.refiner_checkpoint.empty()) c.refiner_checkpoint = resolve(base, c.refiner_checkpoint);
  c.validate();
  return c;
}

std::string to_config_text(const RunConfig& c) {
  std::ostringstream os;
  os.precision(17);
  const auto& cc = c.cascade;
  const auto b = [](bool v) { return v ? "true" : "false"; };
  os << "smoke_threshold = " << cc.smoke_threshold << "\n"
     << "vehicle_threshold = " << cc.vehicle_threshold << "\n"
     << "nms_iou = " << c.nms_iou << "\n"
     << "l_dist = " << cc.match.l_dist << "\n"
     << "front_filter = " << b(cc.match.front_filter_enabled) << "\n"
     << "min_overlap_iou = " << cc.match.min_overlap_iou << "\n"
     << "matching_enabled = " << b(cc.matching_enabled) << "\n"
     << "refiner_enabled = " << b(cc.refiner_enabled) << "\n"
     << "refine_threshold = " << cc.refine_threshold << "\n"
     << "k = " << cc.clip.k << "\n"
     << "min_side = " << cc.clip.min_side << "\n"
     << "train_resize = " << cc.clip.train_resize << "\n"
     << "train_crop = " << cc.clip.train_crop << "\n"
     << "eval_size = " << cc.clip.eval_size << "\n"
     << "smoke_detector = \"" << c.smoke_detector << "\"\n"
     << "vehicle_detector = \"" << c.vehicle_detector << "\"\n"
     << "refiner_checkpoint = \"" << c.refiner_checkpoint << "\"\n"
     << "refiner_variant = " << to_string(c.refiner_variant) << "\n"
     << "refiner_width = " << c.refiner_width << "\n"
     << "epochs = " << c.schedule.epochs << "\n"
     << "batch_size = " << c.schedule.batch_size << "\n"
     << "learning_rate = " << c.schedule.learning_rate << "\n"
     << "lr_step_epochs = " << c.schedule.step_epochs << "\n"
     << "lr_gamma = " << c.schedule.gamma << "\n"
     << "momentum = " << c.schedule.momentum << "\n"
     << "weight_decay = " << c.schedule.weight_decay << "\n"
     << "seed = " << c.seed << "\n"
     << "jobs = " << c.jobs << "\n";
  return os.str();
}

}  // namespace smoky
