#include "relnav/config.hpp"

#include <fstream>
#include <functional>
#include <sstream>

#include "relnav/error.hpp"

namespace relnav {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double x = std::stod(v, &used);
    if (used == v.size()) return x;
  } catch (const std::exception&) {
  }
  throw Error(ErrorKind::InvalidArgument, key + ": not a number: '" + v + "'");
}

long to_int(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const long x = std::stol(v, &used);
    if (used == v.size()) return x;
  } catch (const std::exception&) {
  }
  throw Error(ErrorKind::InvalidArgument, key + ": not an integer: '" + v + "'");
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw Error(ErrorKind::InvalidArgument, key + ": not a boolean: '" + v + "'");
}

std::vector<double> to_list(const std::string& key, const std::string& v) {
  std::vector<double> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(to_double(key, trim(item)));
  if (out.empty()) throw Error(ErrorKind::InvalidArgument, key + ": empty list");
  return out;
}

using Setter = std::function<void(RunConfig&, const std::string&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"lambda", [](RunConfig& c, auto& k, auto& v) { c.scenario.lambda = to_double(k, v); }},
      {"gamma", [](RunConfig& c, auto& k, auto& v) { c.scenario.gamma = to_double(k, v); }},
      {"seed", [](RunConfig& c, auto& k, auto& v) { c.scenario.seed = static_cast<std::uint64_t>(to_int(k, v)); }},
      {"imu_rate", [](RunConfig& c, auto& k, auto& v) { c.scenario.imu_rate = to_double(k, v); }},
      {"frame_rate", [](RunConfig& c, auto& k, auto& v) { c.scenario.frame_rate = to_double(k, v); }},
      {"num_segments", [](RunConfig& c, auto& k, auto& v) { c.scenario.num_segments = static_cast<int>(to_int(k, v)); }},
      {"imu_noise", [](RunConfig& c, auto& k, auto& v) { c.scenario.imu_noise = to_bool(k, v); }},
      {"pixel_noise", [](RunConfig& c, auto& k, auto& v) { c.scenario.pixel_noise = to_bool(k, v); }},
      {"pixel_sigma", [](RunConfig& c, auto& k, auto& v) { c.scenario.pixel_sigma = to_double(k, v); }},
      {"tag_side", [](RunConfig& c, auto& k, auto& v) { c.scenario.tag_side = to_double(k, v); }},
      {"landmark_sigma", [](RunConfig& c, auto& k, auto& v) { c.scenario.landmark_sigma = to_double(k, v); }},
      {"camera_tilt", [](RunConfig& c, auto& k, auto& v) {
         const CameraModel old = c.scenario.cam;
         c.scenario.cam = ScenarioConfig::default_camera(to_double(k, v));
         c.scenario.cam.fx = old.fx;
         c.scenario.cam.fy = old.fy;
         c.scenario.cam.cx = old.cx;
         c.scenario.cam.cy = old.cy;
         c.scenario.cam.width = old.width;
         c.scenario.cam.height = old.height;
       }},
      {"fx", [](RunConfig& c, auto& k, auto& v) { c.scenario.cam.fx = to_double(k, v); }},
      {"fy", [](RunConfig& c, auto& k, auto& v) { c.scenario.cam.fy = to_double(k, v); }},
      {"cx", [](RunConfig& c, auto& k, auto& v) { c.scenario.cam.cx = to_double(k, v); }},
      {"cy", [](RunConfig& c, auto& k, auto& v) { c.scenario.cam.cy = to_double(k, v); }},
      {"width", [](RunConfig& c, auto& k, auto& v) { c.scenario.cam.width = static_cast<int>(to_int(k, v)); }},
      {"height", [](RunConfig& c, auto& k, auto& v) { c.scenario.cam.height = static_cast<int>(to_int(k, v)); }},
      {"bias_sigma_g_F", [](RunConfig& c, auto& k, auto& v) { c.scenario.bias_sigma_g_F = to_double(k, v); }},
      {"bias_sigma_a_F", [](RunConfig& c, auto& k, auto& v) { c.scenario.bias_sigma_a_F = to_double(k, v); }},
      {"bias_sigma_g_L", [](RunConfig& c, auto& k, auto& v) { c.scenario.bias_sigma_g_L = to_double(k, v); }},
      {"bias_sigma_a_L", [](RunConfig& c, auto& k, auto& v) { c.scenario.bias_sigma_a_L = to_double(k, v); }},
      {"init_att", [](RunConfig& c, auto& k, auto& v) { c.scenario.initial_error.att = to_double(k, v); }},
      {"init_trans", [](RunConfig& c, auto& k, auto& v) { c.scenario.initial_error.trans = to_double(k, v); }},
      {"init_vel", [](RunConfig& c, auto& k, auto& v) { c.scenario.initial_error.vel = to_double(k, v); }},
      {"init_bg", [](RunConfig& c, auto& k, auto& v) { c.scenario.initial_error.bg = to_double(k, v); }},
      {"init_ba", [](RunConfig& c, auto& k, auto& v) { c.scenario.initial_error.ba = to_double(k, v); }},
      {"mode", [](RunConfig& c, auto& k, auto& v) {
         if (v == "full") c.mode.opt = OptMode::FullOpt;
         else if (v == "minor") c.mode.opt = OptMode::MinorOpt;
         else throw Error(ErrorKind::InvalidArgument, k + ": expected full or minor, got '" + v + "'");
       }},
      {"smoother", [](RunConfig& c, auto& k, auto& v) { c.mode.smoother_enabled = to_bool(k, v); }},
      {"estimate_landmarks", [](RunConfig& c, auto& k, auto& v) { c.mode.estimate_landmarks = to_bool(k, v); }},
      {"runs", [](RunConfig& c, auto& k, auto& v) { c.runs = static_cast<int>(to_int(k, v)); }},
      {"gn_iterations", [](RunConfig& c, auto& k, auto& v) { c.gn_iterations = static_cast<int>(to_int(k, v)); }},
      {"steady_state_start", [](RunConfig& c, auto& k, auto& v) { c.steady_state_start = to_double(k, v); }},
      {"reset_timeout", [](RunConfig& c, auto& k, auto& v) { c.reset_timeout = to_double(k, v); }},
      {"lambdas", [](RunConfig& c, auto& k, auto& v) { c.lambdas = to_list(k, v); }},
      {"gammas", [](RunConfig& c, auto& k, auto& v) { c.gammas = to_list(k, v); }},
  };
  return table;
}

}  // namespace

std::map<std::string, std::string> parse_key_values(std::istream& in, const std::string& origin) {
  std::map<std::string, std::string> kv;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorKind::InvalidArgument, origin + ":" + std::to_string(lineno) + ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw Error(ErrorKind::InvalidArgument, origin + ":" + std::to_string(lineno) + ": empty key");
    kv[key] = trim(line.substr(eq + 1));
  }
  return kv;
}

void apply_config(RunConfig& cfg, const std::map<std::string, std::string>& kv, const std::string& origin) {
  for (const auto& [k, v] : kv) {
    auto it = setters().find(k);
    if (it == setters().end()) throw Error(ErrorKind::InvalidArgument, origin + ": unknown key '" + k + "'");
    try {
      it->second(cfg, k, v);
    } catch (const Error& e) {
      throw Error(ErrorKind::InvalidArgument, origin + ": " + e.what());
    }
  }
}

RunConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw Error(ErrorKind::Io, "cannot open config " + path);
  RunConfig cfg;
  apply_config(cfg, parse_key_values(f, path), path);
  return cfg;
}

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const auto& [k, v] : setters()) keys.push_back(k);
  return keys;
}

TrackerConfig tracker_config(const RunConfig& cfg) {
  TrackerConfig tc;
  tc.mode = cfg.mode;
  tc.cam = cfg.scenario.cam;
  tc.noise_F = cfg.scenario.noise_F;
  tc.noise_L = cfg.scenario.noise_L;
  tc.imu_rate = cfg.scenario.imu_rate;
  tc.gn_iterations = cfg.gn_iterations;
  tc.reset_timeout = cfg.reset_timeout;
  return tc;
}

MonteCarloConfig monte_carlo_config(const RunConfig& cfg) {
  MonteCarloConfig mc;
  mc.scenario = cfg.scenario;
  mc.n_runs = cfg.runs;
  mc.mode = cfg.mode;
  mc.gn_iterations = cfg.gn_iterations;
  mc.steady_state_start = cfg.steady_state_start;
  return mc;
}

}  // namespace relnav
