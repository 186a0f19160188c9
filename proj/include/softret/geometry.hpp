// geometry.hpp - basic 3D types. Positions are meters, quaternions are [w,x,y,z]
// in file formats and Eigen's (w,x,y,z) constructor order internally.
#pragma once

#include <Eigen/Dense>
#include <Eigen/Geometry>

namespace softret {

using Vec3 = Eigen::Vector3d;
using Vec2 = Eigen::Vector2d;
using Quat = Eigen::Quaterniond;

// Rigid pose: rotation + translation.
struct Pose {
  Vec3 pos{Vec3::Zero()};
  Quat rot{Quat::Identity()};

  // Map a world-frame point into this pose's local frame.
  Vec3 to_local(const Vec3& world) const { return rot.conjugate() * (world - pos); }
  // Map a local-frame point into the world frame.
  Vec3 to_world(const Vec3& local) const { return pos + rot * local; }

  Pose compose(const Pose& other) const {
    return Pose{pos + rot * other.pos, (rot * other.rot).normalized()};
  }
};

// Rescale v so its norm does not exceed max_norm, preserving direction.
// Guarantees norm(result) <= max_norm exactly, including rounding at the boundary.
inline Vec3 clamp_norm(const Vec3& v, double max_norm) {
  double n = v.norm();
  if (!(n > max_norm)) return v;
  Vec3 out = v * (max_norm / n);
  for (int i = 0; i < 3 && out.norm() > max_norm; ++i) {
    out *= max_norm / out.norm();
  }
  if (out.norm() > max_norm) out *= 1.0 - 4e-16;
  return out;
}

}  // namespace softret
