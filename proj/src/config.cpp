#include <fstream>
#include <sstream>
#include <string>

#include "fuse/errors.hpp"
#include "fuse/pipeline.hpp"

namespace fuse {

void PipelineConfig::validate() const {
  backend.validate();
  imu_noise.validate();
  if (!(meas_sigma > 0.0)) throw ConfigError("meas.sigma must be positive");
  if (!(horizon > 0.0)) throw ConfigError("history.horizon must be positive");
  if (!(map_voxel > 0.0)) throw ConfigError("map.voxel_size must be positive");
  if (map_cap < 1) throw ConfigError("map.cap must be >= 1");
  if (assoc.knn < 1) throw ConfigError("assoc.knn must be >= 1");
  if (!(screening.tau_q >= 0.0 && screening.tau_q <= 1.0)) {
    throw ConfigError("screening.tau_q must lie in [0, 1]");
  }
  if (!(screening.tau_r > 0.0)) throw ConfigError("screening.tau_r must be positive");
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string unquote(const std::string& s) {
  if (s.size() >= 2 && ((s.front() == '"' && s.back() == '"') ||
                        (s.front() == '\'' && s.back() == '\''))) {
    return s.substr(1, s.size() - 2);
  }
  return s;
}

bool parse_bool(const std::string& v, const std::string& key) {
  if (v == "true" || v == "on" || v == "1") return true;
  if (v == "false" || v == "off" || v == "0") return false;
  throw ConfigError("expected a boolean for " + key + ", got '" + v + "'");
}

double parse_num(const std::string& v, const std::string& key) {
  try {
    std::size_t pos = 0;
    const double d = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError("expected a number for " + key + ", got '" + v + "'");
  }
}

void apply_key(PipelineConfig& cfg, const std::string& key, const std::string& raw) {
  const std::string v = unquote(raw);
  if (key == "screening.tau_q") cfg.screening.tau_q = parse_num(v, key);
  else if (key == "screening.tau_r") cfg.screening.tau_r = parse_num(v, key);
  else if (key == "screening.enabled") cfg.screening.enabled = parse_bool(v, key);
  else if (key == "gate.enabled") cfg.gate.enabled = parse_bool(v, key);
  else if (key == "gate.mode") {
    if (v == "hard") cfg.gate.mode = GateMode::kHard;
    else if (v == "linear") cfg.gate.mode = GateMode::kLinear;
    else throw ConfigError("gate.mode must be hard|linear, got '" + v + "'");
  } else if (key == "gate.lambda_thresh") {
    cfg.gate.lambda_thresh = v == "auto" ? 0.0 : parse_num(v, key);
  } else if (key == "backend.kind") cfg.backend.kind = backend_kind_from_string(v);
  else if (key == "backend.max_iters") cfg.backend.max_iters = static_cast<int>(parse_num(v, key));
  else if (key == "backend.conv_tol") cfg.backend.conv_tol = parse_num(v, key);
  else if (key == "backend.nano_step") cfg.backend.nano_step = parse_num(v, key);
  else if (key == "backend.estimate_extrinsics") {
    const bool estimate = parse_bool(v, key);
    cfg.backend.freeze[static_cast<int>(StateBlock::kExtrinsicPos)] = !estimate;
    cfg.backend.freeze[static_cast<int>(StateBlock::kExtrinsicRot)] = !estimate;
  } else if (key == "meas.sigma") cfg.meas_sigma = parse_num(v, key);
  else if (key == "index.kind") cfg.index_kind = index_kind_from_string(v);
  else if (key == "map.mode") cfg.mode = map_mode_from_string(v);
  else if (key == "map.voxel_size") cfg.map_voxel = parse_num(v, key);
  else if (key == "map.cap") cfg.map_cap = static_cast<int>(parse_num(v, key));
  else if (key == "imu.sigma_g") cfg.imu_noise.sigma_g = parse_num(v, key);
  else if (key == "imu.sigma_a") cfg.imu_noise.sigma_a = parse_num(v, key);
  else if (key == "imu.sigma_bg") cfg.imu_noise.sigma_bg = parse_num(v, key);
  else if (key == "imu.sigma_ba") cfg.imu_noise.sigma_ba = parse_num(v, key);
  else if (key == "history.horizon") cfg.horizon = parse_num(v, key);
  else if (key == "assoc.knn") cfg.assoc.knn = static_cast<int>(parse_num(v, key));
  else if (key == "assoc.min_planarity") cfg.assoc.fit.min_planarity = parse_num(v, key);
  else if (key == "assoc.max_point_dist") cfg.assoc.fit.max_point_dist = parse_num(v, key);
  else if (key == "assoc.min_points") cfg.assoc.fit.min_points = static_cast<int>(parse_num(v, key));
  else if (key == "ablation.no_covprop") cfg.no_covprop = parse_bool(v, key);
  else if (key == "gravity.magnitude") cfg.gravity_magnitude = parse_num(v, key);
  else if (key == "init.window") cfg.init_window = parse_num(v, key);
  else throw ConfigError("unknown config key: " + key);
}

}  // namespace

PipelineConfig parse_config(const std::string& text) {
  PipelineConfig cfg;
  std::istringstream is(text);
  std::string line;
  std::string section;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError("malformed section header: " + line);
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("malformed config line " + std::to_string(line_no) + ": " + line);
    }
    std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (!section.empty()) key = section + "." + key;
    apply_key(cfg, key, value);
  }
  cfg.validate();
  return cfg;
}

PipelineConfig parse_config_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config file: " + path);
  std::ostringstream ss;
  ss << is.rdbuf();
  return parse_config(ss.str());
}

}  // namespace fuse
