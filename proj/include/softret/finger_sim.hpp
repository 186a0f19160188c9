// finger_sim.hpp - quasi-static articulated-spine model of one pneumatic soft
// finger. Three chambers at 120 degree spacing produce a bending moment; every
// joint of the capsule chain equilibrates that moment against a linear spring,
// giving a constant-curvature arc. Stands in for both the FEM simulator and
// the physical finger: supplies workspace sampling and controller training data.
#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "softret/geometry.hpp"
#include "softret/util.hpp"

namespace softret {

struct SpineConfig {
  int n_segments = 8;
  double segment_length = 0.010;      // m
  double joint_stiffness = 0.2;       // N*m/rad
  double joint_damping = 0.02;        // N*m*s/rad; accepted but unused in quasi-statics
  double chamber_radius = 0.006;      // moment arm (m)
  double piston_area = 2e-4;          // effective piston area (m^2)
  double max_bend_per_joint = 0.35;   // rad
};

inline void validate_spine(const SpineConfig& c) {
  if (c.n_segments < 1) throw std::invalid_argument("spine: n_segments must be >= 1");
  if (!(c.segment_length > 0)) throw std::invalid_argument("spine: segment_length must be > 0");
  if (!(c.joint_stiffness > 0)) throw std::invalid_argument("spine: joint_stiffness must be > 0");
  if (!(c.chamber_radius > 0)) throw std::invalid_argument("spine: chamber_radius must be > 0");
  if (!(c.piston_area > 0)) throw std::invalid_argument("spine: piston_area must be > 0");
  if (!(c.max_bend_per_joint > 0)) throw std::invalid_argument("spine: max_bend_per_joint must be > 0");
}

inline double finger_length(const SpineConfig& c) { return c.n_segments * c.segment_length; }

struct PressureCommand {
  Eigen::Vector3d kpa{Eigen::Vector3d::Zero()};
};

struct PressureLimits {
  double min_kpa = 0.0;
  double max_kpa = 50.0;
};

// Chamber axes in the base xy-plane, 120 degrees apart, chamber 1 along +x.
inline Vec2 chamber_axis(int k) {
  switch (k) {
    case 0: return Vec2(1.0, 0.0);
    case 1: return Vec2(-0.5, std::sqrt(3.0) / 2.0);
    case 2: return Vec2(-0.5, -std::sqrt(3.0) / 2.0);
    default: throw std::invalid_argument("chamber_axis: index out of range");
  }
}

// Bending moment from differential pressurization, as a 2D vector in the base
// plane pointing toward the dominant chamber. Pressures in kPa, result in N*m.
// Equal pressures cancel exactly.
inline Vec2 pressures_to_torques(const PressureCommand& p, const SpineConfig& cfg) {
  const double mean = (p.kpa[0] + p.kpa[1] + p.kpa[2]) / 3.0;
  Vec2 tau = Vec2::Zero();
  for (int k = 0; k < 3; ++k) {
    const double differential_pa = (p.kpa[k] - mean) * 1000.0;
    tau += cfg.chamber_radius * cfg.piston_area * differential_pa * chamber_axis(k);
  }
  return tau;
}

// Joint state: bend direction in the base plane scaled by bend angle (rad).
// The first capsule is rigidly fixed, so a chain of n segments has n-1 joints.
struct FingerPose {
  std::vector<Vec2> joint_bends;
  Vec3 tip_displacement{Vec3::Zero()};  // relative to the straight pose (0,0,L)
};

// Fingertip position from per-joint bend vectors via the capsule chain.
inline Vec3 chain_tip(std::span<const Vec2> joint_bends, const SpineConfig& cfg) {
  if (static_cast<int>(joint_bends.size()) != cfg.n_segments - 1)
    throw std::invalid_argument("chain_tip: expected " + std::to_string(cfg.n_segments - 1) +
                                " joint bends, got " + std::to_string(joint_bends.size()));
  Vec3 tip = Vec3::Zero();
  Eigen::Matrix3d orientation = Eigen::Matrix3d::Identity();
  tip += cfg.segment_length * (orientation * Vec3::UnitZ());  // fixed base capsule
  for (const Vec2& bend : joint_bends) {
    const double angle = bend.norm();
    if (angle > 0.0) {
      const Vec3 bend_dir(bend.x() / angle, bend.y() / angle, 0.0);
      const Vec3 axis = Vec3::UnitZ().cross(bend_dir).normalized();
      orientation = orientation * Eigen::AngleAxisd(angle, axis).toRotationMatrix();
    }
    tip += cfg.segment_length * (orientation * Vec3::UnitZ());
  }
  return tip;
}

// Quasi-static equilibrium: uniform torque bends every joint by tau/k, clamped
// per joint, yielding a constant-curvature arc.
inline FingerPose forward(const PressureCommand& p, const SpineConfig& cfg) {
  const Vec2 tau = pressures_to_torques(p, cfg);
  const double magnitude = tau.norm();
  FingerPose pose;
  pose.joint_bends.assign(static_cast<size_t>(cfg.n_segments - 1), Vec2::Zero());
  if (magnitude > 0.0) {
    const double angle = std::min(magnitude / cfg.joint_stiffness, cfg.max_bend_per_joint);
    const Vec2 bend = (angle / magnitude) * tau;
    for (Vec2& b : pose.joint_bends) b = bend;
  }
  const Vec3 straight = chain_tip(std::vector<Vec2>(static_cast<size_t>(cfg.n_segments - 1), Vec2::Zero()), cfg);
  pose.tip_displacement = chain_tip(pose.joint_bends, cfg) - straight;
  return pose;
}

inline Vec3 tip_position(const PressureCommand& p, const SpineConfig& cfg) {
  return Vec3(0.0, 0.0, finger_length(cfg)) + forward(p, cfg).tip_displacement;
}

// ---------------------------------------------------------------------------
// Training data generation.

struct PressureSample {
  Eigen::Vector3d pressure_kpa{Eigen::Vector3d::Zero()};
  Vec3 displacement{Vec3::Zero()};
};

inline std::vector<PressureSample> sample_dataset(const SpineConfig& cfg, const PressureLimits& limits,
                                                  int n, std::uint64_t seed, double noise_std = 0.0) {
  if (n < 1) throw std::invalid_argument("sample_dataset: n must be >= 1");
  if (!(limits.min_kpa < limits.max_kpa))
    throw std::invalid_argument("sample_dataset: need p_min < p_max");
  if (noise_std < 0.0) throw std::invalid_argument("sample_dataset: noise_std must be >= 0");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> pressure(limits.min_kpa, limits.max_kpa);
  std::normal_distribution<double> noise(0.0, noise_std > 0.0 ? noise_std : 1.0);
  std::vector<PressureSample> samples;
  samples.reserve(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    PressureSample s;
    for (int k = 0; k < 3; ++k) s.pressure_kpa[k] = pressure(rng);
    s.displacement = forward(PressureCommand{s.pressure_kpa}, cfg).tip_displacement;
    if (noise_std > 0.0)
      for (int k = 0; k < 3; ++k) s.displacement[k] += noise(rng);
    samples.push_back(s);
  }
  return samples;
}

inline std::string dataset_to_csv(std::span<const PressureSample> samples) {
  std::string out = "p1_kpa,p2_kpa,p3_kpa,dx_m,dy_m,dz_m\n";
  for (const PressureSample& s : samples) {
    out += format_double(s.pressure_kpa[0]) + "," + format_double(s.pressure_kpa[1]) + "," +
           format_double(s.pressure_kpa[2]) + "," + format_double(s.displacement[0]) + "," +
           format_double(s.displacement[1]) + "," + format_double(s.displacement[2]) + "\n";
  }
  return out;
}

inline std::vector<PressureSample> dataset_from_csv(const std::string& csv) {
  std::vector<PressureSample> samples;
  size_t pos = 0;
  int line_no = 0;
  while (pos < csv.size()) {
    size_t end = csv.find('\n', pos);
    if (end == std::string::npos) end = csv.size();
    std::string line = trim(csv.substr(pos, end - pos));
    pos = end + 1;
    ++line_no;
    if (line.empty()) continue;
    if (line_no == 1 && line.rfind("p1_kpa", 0) == 0) continue;  // header
    std::array<double, 6> vals{};
    size_t field_start = 0;
    for (int f = 0; f < 6; ++f) {
      size_t comma = line.find(',', field_start);
      std::string field = (comma == std::string::npos) ? line.substr(field_start)
                                                       : line.substr(field_start, comma - field_start);
      if (f < 5 && comma == std::string::npos)
        throw std::invalid_argument("dataset csv line " + std::to_string(line_no) + ": expected 6 fields");
      try {
        vals[static_cast<size_t>(f)] = std::stod(field);
      } catch (const std::exception&) {
        throw std::invalid_argument("dataset csv line " + std::to_string(line_no) + ": bad number: " + field);
      }
      field_start = (comma == std::string::npos) ? line.size() : comma + 1;
    }
    PressureSample s;
    s.pressure_kpa = Eigen::Vector3d(vals[0], vals[1], vals[2]);
    s.displacement = Vec3(vals[3], vals[4], vals[5]);
    samples.push_back(s);
  }
  if (samples.empty()) throw std::invalid_argument("dataset csv: no samples");
  return samples;
}

}  // namespace softret
