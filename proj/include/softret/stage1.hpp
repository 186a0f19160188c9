// stage1.hpp - offline force-balanced finger assignment. Demonstrated contact
// forces are diffused over the hand surface with a geodesic heat kernel,
// summed into per-finger loads, balanced into an integer allocation of robot
// fingers, and matched to human fingertips by workspace proximity.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <queue>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "softret/config.hpp"
#include "softret/demo.hpp"
#include "softret/finger_sim.hpp"
#include "softret/hungarian.hpp"
#include "softret/mesh.hpp"

namespace softret {

// Accumulated per-vertex heat. Zero everywhere when no contact ever occurs.
struct HeatField {
  std::vector<double> values;
  // Per-timestep fields, populated only when requested (diagnostics).
  std::vector<std::vector<double>> per_timestep;
};

// h_v += |f| * exp(-lambda * d_geo(v, c)), accumulated over frames and contacts.
inline HeatField diffuse_forces(const Demonstration& demo, const RetargetConfig& config,
                                bool keep_per_timestep = false) {
  const HandMesh& mesh = *demo.mesh;
  const int n = mesh.vertex_count();
  HeatField heat;
  heat.values.assign(static_cast<size_t>(n), 0.0);
  for (const DemoFrame& frame : demo.frames) {
    std::vector<double> step;
    if (keep_per_timestep) step.assign(static_cast<size_t>(n), 0.0);
    for (const ContactEvent& contact : frame.contacts) {
      const double force_norm = contact.force.norm();
      std::vector<double> frame_distances;
      const std::vector<double>* distances = nullptr;
      if (config.geodesic_pose == GeodesicPose::kPerFrame) {
        int cv = project_to_vertex(contact.position, frame.vertices);
        frame_distances = mesh.geodesic_field_at(cv, frame.vertices).distances;
        distances = &frame_distances;
      } else {
        distances = &mesh.geodesic_field(contact.vertex).distances;
      }
      for (int v = 0; v < n; ++v) {
        const double term = force_norm * std::exp(-config.lambda * (*distances)[static_cast<size_t>(v)]);
        heat.values[static_cast<size_t>(v)] += term;
        if (keep_per_timestep) step[static_cast<size_t>(v)] += term;
      }
    }
    if (keep_per_timestep) heat.per_timestep.push_back(std::move(step));
  }
  return heat;
}

// Heat mass per finger region. Palm-labeled vertices are tracked separately:
// the palm is not an allocatable finger, but its mass keeps the total
// conserved for diagnostics.
struct FingerLoads {
  std::array<double, kNumFingers> finger{};
  double palm = 0.0;

  double total() const {
    double t = palm;
    for (double f : finger) t += f;
    return t;
  }
};

inline FingerLoads finger_loads(const HeatField& heat, const HandMesh& mesh) {
  if (heat.values.size() != static_cast<size_t>(mesh.vertex_count()))
    throw std::invalid_argument("finger_loads: heat field size does not match mesh");
  FingerLoads loads;
  for (int v = 0; v < mesh.vertex_count(); ++v) {
    int label = mesh.finger_labels()[static_cast<size_t>(v)];
    if (label == kPalm)
      loads.palm += heat.values[static_cast<size_t>(v)];
    else
      loads.finger[static_cast<size_t>(label - 1)] += heat.values[static_cast<size_t>(v)];
  }
  return loads;
}

// ---------------------------------------------------------------------------
// Min-max load-balanced allocation: minimize max_r F_r / n_r subject to
// sum n_r = N_f, n_r >= 1 for active fingers.

struct AllocationResult {
  std::vector<int> counts;       // aligned with the input loads; 0 for inactive/dropped
  double objective = 0.0;        // achieved max_r F_r / n_r
  std::vector<int> dropped;      // finger indices dropped when N_f < #active
  std::vector<std::string> warnings;
};

// Exact optimum via greedy increments (give the next robot finger to the
// currently worst-loaded finger); ties and slack resolve toward lower finger
// indices, so equal-objective allocations are deterministic.
inline AllocationResult allocate_fingers(std::span<const double> loads, int n_robot) {
  if (n_robot < 1) throw std::invalid_argument("allocate_fingers: need at least one robot finger");
  for (double f : loads)
    if (!(f >= 0.0) || !std::isfinite(f))
      throw std::invalid_argument("allocate_fingers: loads must be finite and non-negative");

  std::vector<int> active;
  for (size_t r = 0; r < loads.size(); ++r)
    if (loads[r] > 0.0) active.push_back(static_cast<int>(r));
  if (active.empty()) throw std::invalid_argument("allocate_fingers: all loads are zero");

  AllocationResult result;
  result.counts.assign(loads.size(), 0);

  if (n_robot < static_cast<int>(active.size())) {
    // Keep the top-N_f fingers by load (ties keep the lower finger index).
    std::vector<int> by_load = active;
    std::stable_sort(by_load.begin(), by_load.end(), [&](int a, int b) {
      if (loads[static_cast<size_t>(a)] != loads[static_cast<size_t>(b)])
        return loads[static_cast<size_t>(a)] > loads[static_cast<size_t>(b)];
      return a < b;
    });
    std::string dropped_names;
    for (size_t i = static_cast<size_t>(n_robot); i < by_load.size(); ++i) {
      result.dropped.push_back(by_load[i]);
      dropped_names += (dropped_names.empty() ? "" : ", ") + std::to_string(by_load[i]);
    }
    std::sort(result.dropped.begin(), result.dropped.end());
    result.warnings.push_back("allocate_fingers: fewer robot fingers (" + std::to_string(n_robot) +
                              ") than active human fingers (" + std::to_string(active.size()) +
                              "); dropped lowest-load fingers [" + dropped_names + "]");
    by_load.resize(static_cast<size_t>(n_robot));
    std::sort(by_load.begin(), by_load.end());
    active = std::move(by_load);
  }

  // Greedy: start at one finger each, repeatedly relieve the worst ratio.
  std::vector<int> counts(active.size(), 1);
  auto ratio = [&](size_t i) { return loads[static_cast<size_t>(active[i])] / counts[i]; };
  for (int extra = static_cast<int>(active.size()); extra < n_robot; ++extra) {
    size_t worst = 0;
    for (size_t i = 1; i < active.size(); ++i)
      if (ratio(i) > ratio(worst)) worst = i;
    ++counts[worst];
  }
  double objective = 0.0;
  for (size_t i = 0; i < active.size(); ++i) objective = std::max(objective, ratio(i));

  // Canonical allocation: minimal counts achieving the optimum, remaining
  // slack on the lowest active finger (lexicographically greatest optimum).
  int used = 0;
  for (size_t i = 0; i < active.size(); ++i) {
    int k = 1;
    while (loads[static_cast<size_t>(active[i])] / k > objective) ++k;
    counts[i] = k;
    used += k;
  }
  counts[0] += n_robot - used;

  for (size_t i = 0; i < active.size(); ++i)
    result.counts[static_cast<size_t>(active[i])] = counts[i];
  result.objective = 0.0;
  for (size_t i = 0; i < active.size(); ++i) result.objective = std::max(result.objective, ratio(i));
  return result;
}

// ---------------------------------------------------------------------------
// Workspace envelopes and workspace-aware matching.

struct WorkspaceEnvelope {
  Vec3 centroid{Vec3::Zero()};
  std::vector<Vec3> points;
  Vec3 box_min{Vec3::Zero()};
  Vec3 box_max{Vec3::Zero()};
  bool degenerate = false;
};

inline WorkspaceEnvelope make_envelope(std::vector<Vec3> points) {
  if (points.empty()) throw std::invalid_argument("make_envelope: no points");
  WorkspaceEnvelope env;
  env.centroid = Vec3::Zero();
  env.box_min = env.box_max = points.front();
  for (const Vec3& p : points) {
    env.centroid += p;
    env.box_min = env.box_min.cwiseMin(p);
    env.box_max = env.box_max.cwiseMax(p);
  }
  env.centroid /= static_cast<double>(points.size());
  env.points = std::move(points);
  env.degenerate = (env.box_max - env.box_min).norm() < 1e-12;
  return env;
}

inline bool envelopes_overlap(const WorkspaceEnvelope& a, const WorkspaceEnvelope& b) {
  for (int k = 0; k < 3; ++k)
    if (a.box_max[k] < b.box_min[k] || b.box_max[k] < a.box_min[k]) return false;
  return true;
}

// Demonstrated fingertip trajectory in the EE-local frame, rotated so its
// best-fit plane coincides with the EE xy-plane (rigid Procrustes about the
// centroid, no scaling).
inline WorkspaceEnvelope workspace_envelope_human(const Demonstration& demo, int finger) {
  if (finger < 0 || finger >= kNumFingers)
    throw std::invalid_argument("workspace_envelope_human: finger id out of range");
  std::vector<Vec3> pts;
  pts.reserve(demo.frames.size());
  for (const DemoFrame& frame : demo.frames)
    pts.push_back(frame.ee_pose.to_local(frame.bones[static_cast<size_t>(finger)].pos));

  Vec3 centroid = Vec3::Zero();
  for (const Vec3& p : pts) centroid += p;
  centroid /= static_cast<double>(pts.size());

  double spread = 0.0;
  for (const Vec3& p : pts) spread = std::max(spread, (p - centroid).norm());
  if (spread < 1e-12) {
    WorkspaceEnvelope env = make_envelope(std::move(pts));
    env.degenerate = true;
    return env;
  }

  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (const Vec3& p : pts) cov += (p - centroid) * (p - centroid).transpose();
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(cov);
  // Eigenvalues ascending: columns 2,1 span the plane, column 0 is the normal.
  const Vec3 e1 = eig.eigenvectors().col(2);
  const Vec3 e2 = eig.eigenvectors().col(1);

  Eigen::Matrix3d h = Eigen::Matrix3d::Zero();
  for (const Vec3& p : pts) {
    const Vec3 a = p - centroid;
    const Vec3 b(a.dot(e1), a.dot(e2), 0.0);
    h += a * b.transpose();
  }
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix3d d = Eigen::Matrix3d::Identity();
  d(2, 2) = (svd.matrixV() * svd.matrixU().transpose()).determinant();
  const Eigen::Matrix3d rot = svd.matrixV() * d * svd.matrixU().transpose();

  for (Vec3& p : pts) p = centroid + rot * (p - centroid);
  return make_envelope(std::move(pts));
}

// Robot finger workspace from random pressure sampling through the simulator.
// Points are fingertip positions in the finger's own frame. The finger index
// only decorrelates the sampling stream between fingers.
inline WorkspaceEnvelope workspace_envelope_robot(int finger, const SpineConfig& spine,
                                                  const RetargetConfig& config, int n_samples,
                                                  std::uint64_t seed) {
  if (n_samples < 1) throw std::invalid_argument("workspace_envelope_robot: n_samples must be >= 1");
  std::mt19937_64 rng(seed + 0x9e3779b97f4a7c15ull * static_cast<std::uint64_t>(finger + 1));
  std::uniform_real_distribution<double> pressure(config.p_min_kpa, config.p_max_kpa);
  std::vector<Vec3> pts;
  pts.reserve(static_cast<size_t>(n_samples));
  for (int i = 0; i < n_samples; ++i) {
    PressureCommand cmd;
    for (int k = 0; k < 3; ++k) cmd.kpa[k] = pressure(rng);
    pts.push_back(tip_position(cmd, spine));
  }
  return make_envelope(std::move(pts));
}

// ---------------------------------------------------------------------------
// Workspace-aware matching: Hungarian assignment of robot fingers to human
// fingertip slots (finger r appears n_r times), cost = centroid distance plus
// a penalty when the bounding boxes are disjoint.

struct MatchResult {
  std::vector<int> robot_to_finger;  // pi(i): robot finger -> human finger id
  double total_cost = 0.0;
};

inline MatchResult match_fingers(const std::vector<WorkspaceEnvelope>& robot_ws,
                                 const std::vector<WorkspaceEnvelope>& human_ws,
                                 std::span<const int> allocation, const RetargetConfig& config) {
  if (human_ws.size() != allocation.size())
    throw std::invalid_argument("match_fingers: human envelope count does not match allocation size");
  std::vector<int> slot_finger;
  for (size_t r = 0; r < allocation.size(); ++r) {
    if (allocation[r] < 0) throw std::invalid_argument("match_fingers: negative allocation");
    for (int k = 0; k < allocation[r]; ++k) slot_finger.push_back(static_cast<int>(r));
  }
  if (slot_finger.size() != robot_ws.size())
    throw std::invalid_argument("match_fingers: allocation total " + std::to_string(slot_finger.size()) +
                                " does not match robot finger count " + std::to_string(robot_ws.size()));

  const size_t n = robot_ws.size();
  CostMatrix cost(n, std::vector<double>(n, 0.0));
  for (size_t i = 0; i < n; ++i) {
    for (size_t s = 0; s < n; ++s) {
      const WorkspaceEnvelope& human = human_ws[static_cast<size_t>(slot_finger[s])];
      double c = (robot_ws[i].centroid - human.centroid).norm();
      if (!envelopes_overlap(robot_ws[i], human)) c += config.beta;
      cost[i][s] = c;
    }
  }
  AssignmentResult assignment = solve_assignment(cost);
  MatchResult result;
  result.total_cost = assignment.total_cost;
  result.robot_to_finger.resize(n);
  for (size_t i = 0; i < n; ++i)
    result.robot_to_finger[i] = slot_finger[static_cast<size_t>(assignment.row_to_col[i])];
  return result;
}

// ---------------------------------------------------------------------------
// Stage-1 driver and its artifact.

struct FingerAssignment {
  FingerLoads loads;
  std::array<int, kNumFingers> allocation{};
  std::vector<int> mapping;  // robot finger -> human finger id, fixed thereafter
  double objective = 0.0;
  double match_cost = 0.0;
  std::vector<std::string> warnings;
};

inline FingerAssignment run_stage1(const Demonstration& demo, int n_robot, const SpineConfig& spine,
                                   const RetargetConfig& config, std::uint64_t seed = 0) {
  FingerAssignment out;
  HeatField heat = diffuse_forces(demo, config);
  out.loads = finger_loads(heat, *demo.mesh);

  AllocationResult alloc = allocate_fingers(out.loads.finger, n_robot);
  std::copy(alloc.counts.begin(), alloc.counts.end(), out.allocation.begin());
  out.objective = alloc.objective;
  out.warnings = alloc.warnings;

  std::vector<WorkspaceEnvelope> human_ws;
  for (int f = 0; f < kNumFingers; ++f) {
    if (out.allocation[static_cast<size_t>(f)] > 0)
      human_ws.push_back(workspace_envelope_human(demo, f));
    else
      human_ws.push_back(WorkspaceEnvelope{});  // placeholder; zero slots
  }
  std::vector<WorkspaceEnvelope> robot_ws;
  for (int i = 0; i < n_robot; ++i)
    robot_ws.push_back(workspace_envelope_robot(i, spine, config, config.workspace_samples, seed));

  MatchResult match = match_fingers(robot_ws, human_ws,
                                    std::span<const int>(out.allocation.data(), kNumFingers), config);
  out.mapping = match.robot_to_finger;
  out.match_cost = match.total_cost;
  return out;
}

inline json retarget_config_to_json(const RetargetConfig& c) {
  return json{{"lambda", c.lambda},
              {"beta", c.beta},
              {"epsilon", c.epsilon},
              {"delta_max", c.delta_max},
              {"p_min_kpa", c.p_min_kpa},
              {"p_max_kpa", c.p_max_kpa},
              {"geodesic_pose", geodesic_pose_name(c.geodesic_pose)},
              {"workspace_samples", c.workspace_samples},
              {"fingertip_rest", json::array({c.fingertip_rest.x(), c.fingertip_rest.y(), c.fingertip_rest.z()})}};
}

inline json assignment_to_json(const FingerAssignment& a, const RetargetConfig& config) {
  json loads = json::object();
  json alloc = json::object();
  for (int f = 0; f < kNumFingers; ++f) {
    loads[finger_name(f)] = a.loads.finger[static_cast<size_t>(f)];
    alloc[finger_name(f)] = a.allocation[static_cast<size_t>(f)];
  }
  loads["palm"] = a.loads.palm;
  json mapping = json::array();
  for (size_t i = 0; i < a.mapping.size(); ++i)
    mapping.push_back(json{{"robot", i}, {"human", finger_name(a.mapping[i])}});
  return json{{"loads", loads},
              {"allocation", alloc},
              {"mapping", mapping},
              {"objective", a.objective},
              {"match_cost", a.match_cost},
              {"warnings", a.warnings},
              {"config", retarget_config_to_json(config)}};
}

inline FingerAssignment assignment_from_json(const json& j) {
  FingerAssignment a;
  for (int f = 0; f < kNumFingers; ++f) {
    a.loads.finger[static_cast<size_t>(f)] = j.at("loads").value(finger_name(f), 0.0);
    a.allocation[static_cast<size_t>(f)] = j.at("allocation").value(finger_name(f), 0);
  }
  a.loads.palm = j.at("loads").value("palm", 0.0);
  for (const json& jm : j.at("mapping")) {
    size_t robot = jm.at("robot").get<size_t>();
    if (robot != a.mapping.size())
      throw std::invalid_argument("assignment: mapping entries must be ordered by robot index");
    a.mapping.push_back(finger_id_from_name(jm.at("human").get<std::string>()));
  }
  a.objective = j.value("objective", 0.0);
  a.match_cost = j.value("match_cost", 0.0);
  return a;
}

}  // namespace softret
