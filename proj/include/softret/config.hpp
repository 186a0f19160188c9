// config.hpp - retargeting parameters and the flat key=value run config file.
// Validation is explicit (validate_*) rather than enforced on construction so
// tests can probe edge values like lambda = 0.
#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>

#include "softret/geometry.hpp"
#include "softret/util.hpp"

namespace softret {

// Which vertex positions geodesic distances are evaluated on.
enum class GeodesicPose { kRest, kPerFrame };

inline GeodesicPose geodesic_pose_from_name(const std::string& name) {
  if (name == "rest") return GeodesicPose::kRest;
  if (name == "per_frame") return GeodesicPose::kPerFrame;
  throw std::invalid_argument("geodesic_pose must be 'rest' or 'per_frame', got: " + name);
}

inline const char* geodesic_pose_name(GeodesicPose p) {
  return p == GeodesicPose::kRest ? "rest" : "per_frame";
}

struct RetargetConfig {
  double lambda = 50.0;      // geodesic decay of contact influence (1/m)
  double beta = 1.0;         // workspace-disjoint penalty in the matching cost (m)
  double epsilon = 1e-9;     // denominator guard for the weighted mean
  double delta_max = 0.01;   // fingertip adjustment clamp radius (m)
  double p_min_kpa = 0.0;    // chamber pressure limits
  double p_max_kpa = 50.0;
  GeodesicPose geodesic_pose = GeodesicPose::kRest;
  int workspace_samples = 256;          // robot workspace estimation samples
  Vec3 fingertip_rest{0.0, 0.0, 0.08};  // straight-finger tip in the EE frame
  Pose ee_offset;                       // fixed hand-to-robot EE frame offset
};

inline void validate_config(const RetargetConfig& c) {
  if (!(c.lambda > 0.0)) throw std::invalid_argument("config: lambda must be > 0");
  if (!(c.beta >= 0.0)) throw std::invalid_argument("config: beta must be >= 0");
  if (!(c.epsilon > 0.0)) throw std::invalid_argument("config: epsilon must be > 0");
  if (!(c.delta_max > 0.0)) throw std::invalid_argument("config: delta_max must be > 0");
  if (!(c.p_min_kpa < c.p_max_kpa)) throw std::invalid_argument("config: need p_min < p_max");
  if (c.workspace_samples < 1) throw std::invalid_argument("config: workspace_samples must be >= 1");
}

// ---------------------------------------------------------------------------
// Flat key = value config file ('#' comments). One source of truth per run;
// CLI flags override file values.

using ConfigMap = std::map<std::string, std::string>;

inline ConfigMap parse_config_text(const std::string& text) {
  ConfigMap out;
  size_t pos = 0;
  int line_no = 0;
  while (pos <= text.size()) {
    size_t end = text.find('\n', pos);
    if (end == std::string::npos) end = text.size();
    std::string line = trim(text.substr(pos, end - pos));
    ++line_no;
    pos = end + 1;
    if (line.empty() || line[0] == '#') continue;
    size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config line " + std::to_string(line_no) + ": expected key = value");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw std::invalid_argument("config line " + std::to_string(line_no) + ": empty key");
    out[key] = value;
  }
  return out;
}

inline ConfigMap load_config_file(const std::filesystem::path& path) {
  return parse_config_text(read_file(path));
}

inline double config_double(const ConfigMap& m, const std::string& key, double fallback) {
  auto it = m.find(key);
  if (it == m.end()) return fallback;
  try {
    size_t used = 0;
    double v = std::stod(it->second, &used);
    if (used != it->second.size()) throw std::invalid_argument("trailing chars");
    return v;
  } catch (const std::exception&) {
    throw std::invalid_argument("config: key '" + key + "': not a number: " + it->second);
  }
}

inline int config_int(const ConfigMap& m, const std::string& key, int fallback) {
  auto it = m.find(key);
  if (it == m.end()) return fallback;
  try {
    size_t used = 0;
    int v = std::stoi(it->second, &used);
    if (used != it->second.size()) throw std::invalid_argument("trailing chars");
    return v;
  } catch (const std::exception&) {
    throw std::invalid_argument("config: key '" + key + "': not an integer: " + it->second);
  }
}

inline std::string config_string(const ConfigMap& m, const std::string& key, const std::string& fallback) {
  auto it = m.find(key);
  return it == m.end() ? fallback : it->second;
}

inline RetargetConfig retarget_config_from_map(const ConfigMap& m) {
  RetargetConfig c;
  c.lambda = config_double(m, "lambda", c.lambda);
  c.beta = config_double(m, "beta", c.beta);
  c.epsilon = config_double(m, "epsilon", c.epsilon);
  c.delta_max = config_double(m, "delta_max", c.delta_max);
  c.p_min_kpa = config_double(m, "p_min_kpa", c.p_min_kpa);
  c.p_max_kpa = config_double(m, "p_max_kpa", c.p_max_kpa);
  c.geodesic_pose = geodesic_pose_from_name(config_string(m, "geodesic_pose", geodesic_pose_name(c.geodesic_pose)));
  c.workspace_samples = config_int(m, "workspace_samples", c.workspace_samples);
  c.fingertip_rest = Vec3(config_double(m, "fingertip_rest_x", c.fingertip_rest.x()),
                          config_double(m, "fingertip_rest_y", c.fingertip_rest.y()),
                          config_double(m, "fingertip_rest_z", c.fingertip_rest.z()));
  return c;
}

}  // namespace softret
