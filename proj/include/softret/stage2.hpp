// stage2.hpp - online retargeting. The robot tracks the demonstrated EE pose
// while each robot finger follows its assigned human fingertip, nudged per
// timestep by a geodesic- and force-weighted average of contact offsets,
// clamped to delta_max. Frame t depends only on frames <= t.
#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "softret/config.hpp"
#include "softret/demo.hpp"
#include "softret/mesh.hpp"
#include "softret/stage1.hpp"

namespace softret {

// Influence of one contact on a fingertip at position s (hand/EE frame, the
// frame contacts are stored in): w = |f| * exp(-lambda * d_geo(s, c)).
// Distances are evaluated on the human hand mesh; per-frame vertex positions
// are used when configured.
inline double contact_weight(const Vec3& s, const ContactEvent& contact, const HandMesh& mesh,
                             const RetargetConfig& config, std::span<const Vec3> frame_vertices = {}) {
  const double force_norm = contact.force.norm();
  double distance = 0.0;
  if (config.geodesic_pose == GeodesicPose::kPerFrame && !frame_vertices.empty()) {
    int sv = project_to_vertex(s, frame_vertices);
    int cv = project_to_vertex(contact.position, frame_vertices);
    distance = mesh.geodesic_field_at(sv, frame_vertices).distances[static_cast<size_t>(cv)];
    if (!std::isfinite(distance))
      throw UnreachableError("contact_weight: contact vertex unreachable");
  } else {
    distance = mesh.vertex_distance(mesh.project_to_vertex(s), contact.vertex);
  }
  return force_norm * std::exp(-config.lambda * distance);
}

struct AdjustmentTerms {
  Vec3 raw{Vec3::Zero()};  // unclamped weighted mean of contact offsets
  double weight_sum = 0.0;
};

inline AdjustmentTerms adjustment_terms(const Vec3& s, std::span<const ContactEvent> contacts,
                                        const HandMesh& mesh, const RetargetConfig& config,
                                        std::span<const Vec3> frame_vertices = {}) {
  AdjustmentTerms terms;
  if (contacts.empty()) return terms;
  Vec3 numerator = Vec3::Zero();
  for (const ContactEvent& contact : contacts) {
    const double w = contact_weight(s, contact, mesh, config, frame_vertices);
    numerator += w * (contact.position - s);
    terms.weight_sum += w;
  }
  terms.raw = numerator / (terms.weight_sum + config.epsilon);
  return terms;
}

// Weighted average of contact offsets, rescaled to delta_max when exceeded.
// s and contacts share the hand/EE frame; so does the returned offset.
inline Vec3 fingertip_adjustment(const Vec3& s, std::span<const ContactEvent> contacts,
                                 const HandMesh& mesh, const RetargetConfig& config,
                                 std::span<const Vec3> frame_vertices = {}) {
  return clamp_norm(adjustment_terms(s, contacts, mesh, config, frame_vertices).raw,
                    config.delta_max);
}

struct FingerTargetFrame {
  int robot = 0;
  int human = 0;             // pi(robot)
  Vec3 base{Vec3::Zero()};   // assigned human fingertip, EE-local
  Vec3 delta{Vec3::Zero()};  // clamped adjustment, EE-local
  Vec3 target{Vec3::Zero()}; // base + delta
  double weight_sum = 0.0;   // sum_j w_ij diagnostic
};

struct RetargetedFrame {
  double time = 0.0;
  Pose ee_target;
  std::vector<FingerTargetFrame> fingers;
};

struct RetargetedTrajectory {
  std::vector<RetargetedFrame> frames;
};

// Streams through the demonstration. The fingertip position used for contact
// weighting is the previous timestep's adjusted target (straight-finger pose
// at t = 0). Contacts are stored in the hand frame, which coincides with the
// EE frame, so adjustments come out EE-local directly.
inline RetargetedTrajectory run_stage2(const Demonstration& demo, const FingerAssignment& assignment,
                                       const RetargetConfig& config) {
  const HandMesh& mesh = *demo.mesh;
  const int n_robot = static_cast<int>(assignment.mapping.size());
  if (n_robot == 0) throw std::invalid_argument("run_stage2: assignment has no robot fingers");
  for (int human : assignment.mapping)
    if (human < 0 || human >= kNumFingers)
      throw std::invalid_argument("run_stage2: mapping references unknown human finger " + std::to_string(human));

  RetargetedTrajectory out;
  out.frames.reserve(demo.frames.size());
  std::vector<Vec3> tracked(static_cast<size_t>(n_robot), config.fingertip_rest);  // EE-local s_i

  for (const DemoFrame& frame : demo.frames) {
    RetargetedFrame rf;
    rf.time = frame.time;
    rf.ee_target = frame.ee_pose.compose(config.ee_offset);

    std::span<const Vec3> frame_vertices =
        (config.geodesic_pose == GeodesicPose::kPerFrame)
            ? std::span<const Vec3>(frame.vertices)
            : std::span<const Vec3>{};

    for (int i = 0; i < n_robot; ++i) {
      FingerTargetFrame ft;
      ft.robot = i;
      ft.human = assignment.mapping[static_cast<size_t>(i)];
      ft.base = frame.ee_pose.to_local(frame.bones[static_cast<size_t>(ft.human)].pos);

      const AdjustmentTerms terms =
          adjustment_terms(tracked[static_cast<size_t>(i)], frame.contacts, mesh, config, frame_vertices);
      ft.weight_sum = terms.weight_sum;
      ft.delta = clamp_norm(terms.raw, config.delta_max);
      ft.target = ft.base + ft.delta;
      tracked[static_cast<size_t>(i)] = ft.target;
      rf.fingers.push_back(ft);
    }
    out.frames.push_back(std::move(rf));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Artifact serialization: JSON plus a flat CSV for plotting.

inline json trajectory_to_json(const RetargetedTrajectory& traj) {
  json j;
  j["frames"] = json::array();
  for (const RetargetedFrame& f : traj.frames) {
    json jf;
    jf["t"] = f.time;
    jf["ee_target"] = json{{"pos", json::array({f.ee_target.pos.x(), f.ee_target.pos.y(), f.ee_target.pos.z()})},
                           {"quat", json::array({f.ee_target.rot.w(), f.ee_target.rot.x(),
                                                 f.ee_target.rot.y(), f.ee_target.rot.z()})}};
    jf["fingers"] = json::array();
    for (const FingerTargetFrame& ft : f.fingers) {
      jf["fingers"].push_back(json{
          {"robot", ft.robot},
          {"human", finger_name(ft.human)},
          {"base", json::array({ft.base.x(), ft.base.y(), ft.base.z()})},
          {"delta", json::array({ft.delta.x(), ft.delta.y(), ft.delta.z()})},
          {"target", json::array({ft.target.x(), ft.target.y(), ft.target.z()})},
          {"sum_w", ft.weight_sum}});
    }
    j["frames"].push_back(std::move(jf));
  }
  return j;
}

inline std::string trajectory_to_csv(const RetargetedTrajectory& traj) {
  std::string out =
      "t,finger,base_x,base_y,base_z,delta_x,delta_y,delta_z,target_x,target_y,target_z,sum_w\n";
  for (const RetargetedFrame& f : traj.frames) {
    for (const FingerTargetFrame& ft : f.fingers) {
      out += format_double(f.time) + "," + std::to_string(ft.robot) + "," + format_double(ft.base.x()) +
             "," + format_double(ft.base.y()) + "," + format_double(ft.base.z()) + "," +
             format_double(ft.delta.x()) + "," + format_double(ft.delta.y()) + "," +
             format_double(ft.delta.z()) + "," + format_double(ft.target.x()) + "," +
             format_double(ft.target.y()) + "," + format_double(ft.target.z()) + "," +
             format_double(ft.weight_sum) + "\n";
    }
  }
  return out;
}

}  // namespace softret
