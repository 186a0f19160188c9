// demo.hpp - demonstration dataset: per-frame hand skeleton poses, deformed
// mesh vertices and hand-object contact events, plus JSON (de)serialization
// and a synthetic demonstration generator used in place of motion capture.
//
// Frame conventions: mesh vertices (rest and per-frame) and contact positions
// are expressed in the hand-root frame, which coincides with the EE frame
// (the hand rides the wrist). Bone fingertip poses, ee_pose and object_pose
// are world-frame.
#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <memory>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "softret/geometry.hpp"
#include "softret/mesh.hpp"
#include "softret/util.hpp"

namespace softret {

using json = nlohmann::json;

// One hand-object contact: position on the hand surface, force vector, and
// the nearest mesh vertex (derived at load). Only the force norm feeds the
// retargeting math; the direction is carried through for completeness.
struct ContactEvent {
  Vec3 position{Vec3::Zero()};
  Vec3 force{Vec3::Zero()};
  int vertex = -1;
};

struct DemoFrame {
  double time = 0.0;
  std::array<Pose, kNumFingers> bones{};  // fingertip poses, thumb..pinky
  std::vector<Vec3> vertices;             // deformed mesh vertices
  std::vector<ContactEvent> contacts;
  Pose ee_pose;
  Pose object_pose;
};

struct DemoMetadata {
  std::string task;
  double rate_hz = 0.0;
};

struct Demonstration {
  std::shared_ptr<const HandMesh> mesh;
  std::vector<DemoFrame> frames;
  DemoMetadata metadata;
  std::vector<std::string> warnings;  // non-fatal issues found at load/synthesis
};

// ---------------------------------------------------------------------------
// JSON serialization. Units SI, quaternion order [w,x,y,z].

namespace detail {

inline Vec3 vec3_from_json(const json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 3)
    throw std::invalid_argument(where + ": expected array of 3 numbers");
  for (const json& e : j)
    if (!e.is_number())
      throw std::invalid_argument(where + ": expected number, got " + std::string(e.type_name()));
  return Vec3(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
}

inline json vec3_to_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

inline Quat quat_from_json(const json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 4)
    throw std::invalid_argument(where + ": expected quaternion array [w,x,y,z]");
  for (const json& e : j)
    if (!e.is_number())
      throw std::invalid_argument(where + ": expected number, got " + std::string(e.type_name()));
  return Quat(j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>());
}

inline json quat_to_json(const Quat& q) { return json::array({q.w(), q.x(), q.y(), q.z()}); }

inline Pose pose_from_json(const json& j, const std::string& where) {
  if (!j.is_object() || !j.contains("pos") || !j.contains("quat"))
    throw std::invalid_argument(where + ": expected {\"pos\":[3],\"quat\":[4]}");
  Pose p;
  p.pos = vec3_from_json(j.at("pos"), where + ".pos");
  p.rot = quat_from_json(j.at("quat"), where + ".quat");
  double n = p.rot.norm();
  if (std::abs(n - 1.0) > 1e-6)
    throw std::invalid_argument(where + ".quat: not unit norm (|q| = " + format_double(n) + ")");
  return p;
}

inline json pose_to_json(const Pose& p) {
  return json{{"pos", vec3_to_json(p.pos)}, {"quat", quat_to_json(p.rot)}};
}

// Assign each unlabeled vertex to the nearest skeleton fingertip.
inline std::vector<int> labels_from_bone_proximity(const std::vector<Vec3>& vertices,
                                                   const std::array<Pose, kNumFingers>& bones) {
  std::vector<int> labels(vertices.size(), kPalm);
  for (size_t v = 0; v < vertices.size(); ++v) {
    double best = std::numeric_limits<double>::infinity();
    for (int f = 0; f < kNumFingers; ++f) {
      double d = (vertices[v] - bones[static_cast<size_t>(f)].pos).squaredNorm();
      if (d < best) {
        best = d;
        labels[v] = f + 1;
      }
    }
  }
  return labels;
}

}  // namespace detail

// Standalone mesh schema: {"vertices": [[x,y,z],...], "triangles": [[i,j,k],...],
// "finger_labels": [int,...]}. Labels may be omitted in demo files, in which
// case vertices are attributed to the nearest skeleton finger of the first frame.
inline json mesh_to_json(const HandMesh& mesh) {
  json j;
  j["vertices"] = json::array();
  for (const Vec3& v : mesh.vertices()) j["vertices"].push_back(detail::vec3_to_json(v));
  j["triangles"] = json::array();
  for (const Triangle& t : mesh.triangles()) j["triangles"].push_back(json::array({t[0], t[1], t[2]}));
  j["finger_labels"] = mesh.finger_labels();
  if (!mesh.skeleton_fingertips().empty()) {
    j["skeleton_fingertips"] = json::array();
    for (const Vec3& v : mesh.skeleton_fingertips()) j["skeleton_fingertips"].push_back(detail::vec3_to_json(v));
  }
  return j;
}

inline json demonstration_to_json(const Demonstration& demo) {
  json j;
  j["mesh"] = mesh_to_json(*demo.mesh);
  j["metadata"] = json{{"task", demo.metadata.task}, {"rate_hz", demo.metadata.rate_hz}};
  j["frames"] = json::array();
  for (const DemoFrame& frame : demo.frames) {
    json jf;
    jf["t"] = frame.time;
    jf["bones"] = json::array();
    for (int f = 0; f < kNumFingers; ++f) {
      json jb = detail::pose_to_json(frame.bones[static_cast<size_t>(f)]);
      jb["finger"] = finger_name(f);
      jf["bones"].push_back(jb);
    }
    jf["vertices"] = json::array();
    for (const Vec3& v : frame.vertices) jf["vertices"].push_back(detail::vec3_to_json(v));
    jf["contacts"] = json::array();
    for (const ContactEvent& c : frame.contacts)
      jf["contacts"].push_back(json{{"pos", detail::vec3_to_json(c.position)},
                                    {"force", detail::vec3_to_json(c.force)}});
    jf["ee_pose"] = detail::pose_to_json(frame.ee_pose);
    jf["object_pose"] = detail::pose_to_json(frame.object_pose);
    j["frames"].push_back(std::move(jf));
  }
  return j;
}

inline Demonstration demonstration_from_json(const json& j) {
  if (!j.is_object() || !j.contains("mesh") || !j.contains("frames"))
    throw std::invalid_argument("demo: expected top-level object with \"mesh\" and \"frames\"");
  const json& jm = j.at("mesh");
  if (!jm.contains("vertices") || !jm.contains("triangles"))
    throw std::invalid_argument("demo: mesh: missing \"vertices\" or \"triangles\"");

  std::vector<Vec3> verts;
  for (size_t i = 0; i < jm.at("vertices").size(); ++i)
    verts.push_back(detail::vec3_from_json(jm.at("vertices")[i], "mesh.vertices[" + std::to_string(i) + "]"));
  std::vector<Triangle> tris;
  for (size_t i = 0; i < jm.at("triangles").size(); ++i) {
    const json& jt = jm.at("triangles")[i];
    if (!jt.is_array() || jt.size() != 3)
      throw std::invalid_argument("mesh.triangles[" + std::to_string(i) + "]: expected 3 indices");
    tris.push_back({jt[0].get<int>(), jt[1].get<int>(), jt[2].get<int>()});
  }

  Demonstration demo;
  if (j.at("frames").size() < 2)
    throw std::invalid_argument("demo: needs at least 2 frames, got " + std::to_string(j.at("frames").size()));

  // Parse frames first: labels may need bone positions from frame 0.
  std::vector<DemoFrame> frames;
  double prev_t = -std::numeric_limits<double>::infinity();
  for (size_t k = 0; k < j.at("frames").size(); ++k) {
    const std::string where = "frame " + std::to_string(k);
    const json& jf = j.at("frames")[k];
    DemoFrame frame;
    if (!jf.contains("t")) throw std::invalid_argument(where + ": missing \"t\"");
    frame.time = jf.at("t").get<double>();
    if (!std::isfinite(frame.time)) throw std::invalid_argument(where + ": t: non-finite");
    if (!(frame.time > prev_t))
      throw std::invalid_argument(where + ": t: timestamps must be strictly increasing");
    prev_t = frame.time;

    if (!jf.contains("bones") || jf.at("bones").size() != kNumFingers)
      throw std::invalid_argument(where + ": bones: expected " + std::to_string(kNumFingers) + " entries");
    std::array<bool, kNumFingers> seen{};
    for (const json& jb : jf.at("bones")) {
      if (!jb.contains("finger")) throw std::invalid_argument(where + ": bones: missing \"finger\"");
      int f = finger_id_from_name(jb.at("finger").get<std::string>());
      if (seen[static_cast<size_t>(f)])
        throw std::invalid_argument(where + ": bones: duplicate finger " + std::string(finger_name(f)));
      seen[static_cast<size_t>(f)] = true;
      frame.bones[static_cast<size_t>(f)] = detail::pose_from_json(jb, where + ".bones[" + finger_name(f) + "]");
    }

    if (!jf.contains("vertices") || jf.at("vertices").size() != verts.size())
      throw std::invalid_argument(where + ": vertices: expected " + std::to_string(verts.size()) + " entries");
    for (size_t i = 0; i < jf.at("vertices").size(); ++i)
      frame.vertices.push_back(detail::vec3_from_json(jf.at("vertices")[i],
                                                      where + ".vertices[" + std::to_string(i) + "]"));

    if (jf.contains("contacts")) {
      for (size_t i = 0; i < jf.at("contacts").size(); ++i) {
        const json& jc = jf.at("contacts")[i];
        const std::string cwhere = where + ".contacts[" + std::to_string(i) + "]";
        ContactEvent c;
        c.position = detail::vec3_from_json(jc.at("pos"), cwhere + ".pos");
        c.force = detail::vec3_from_json(jc.at("force"), cwhere + ".force");
        if (!c.position.allFinite()) throw std::invalid_argument(cwhere + ".pos: non-finite");
        if (!c.force.allFinite()) throw std::invalid_argument(cwhere + ".force: non-finite");
        frame.contacts.push_back(c);
      }
    }
    frame.ee_pose = detail::pose_from_json(jf.at("ee_pose"), where + ".ee_pose");
    frame.object_pose = detail::pose_from_json(jf.at("object_pose"), where + ".object_pose");
    frames.push_back(std::move(frame));
  }

  // Bones are world-frame; bring them into the hand frame before comparing
  // with vertices.
  std::array<Pose, kNumFingers> bones_local = frames.front().bones;
  for (Pose& b : bones_local) b.pos = frames.front().ee_pose.to_local(b.pos);

  std::vector<int> labels;
  if (jm.contains("finger_labels")) {
    labels = jm.at("finger_labels").get<std::vector<int>>();
  } else {
    labels = detail::labels_from_bone_proximity(verts, bones_local);
    demo.warnings.push_back("mesh: finger_labels absent; attributed vertices to nearest skeleton finger");
  }
  std::vector<Vec3> fingertips;
  for (int f = 0; f < kNumFingers; ++f) fingertips.push_back(bones_local[static_cast<size_t>(f)].pos);
  demo.mesh = std::make_shared<HandMesh>(std::move(verts), std::move(tris), std::move(labels),
                                         std::move(fingertips));

  // Project contact positions onto the rest mesh.
  for (DemoFrame& frame : frames)
    for (ContactEvent& c : frame.contacts) c.vertex = demo.mesh->project_to_vertex(c.position);
  demo.frames = std::move(frames);

  if (j.contains("metadata")) {
    demo.metadata.task = j.at("metadata").value("task", std::string{});
    demo.metadata.rate_hz = j.at("metadata").value("rate_hz", 0.0);
  }
  if (demo.metadata.rate_hz > 0.0) {
    const double dt_nominal = 1.0 / demo.metadata.rate_hz;
    for (size_t k = 1; k < demo.frames.size(); ++k) {
      double dt = demo.frames[k].time - demo.frames[k - 1].time;
      if (std::abs(dt - dt_nominal) > 0.1 * dt_nominal) {
        demo.warnings.push_back("irregular timestamps: frame " + std::to_string(k) + " dt " +
                                format_double(dt) + " vs nominal " + format_double(dt_nominal));
        break;
      }
    }
  }
  return demo;
}

inline Demonstration load_demonstration(const std::filesystem::path& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw std::invalid_argument("demo: " + path.string() + ": " + e.what());
  }
  return demonstration_from_json(j);
}

inline void save_demonstration(const Demonstration& demo, const std::filesystem::path& path) {
  write_file(path, demonstration_to_json(demo).dump(2) + "\n");
}

// Keep only the first `k` frames. Used for the online/causality checks.
inline Demonstration truncate_demonstration(const Demonstration& demo, size_t k) {
  if (k < 2) throw std::invalid_argument("truncate_demonstration: need at least 2 frames");
  Demonstration out = demo;
  if (k < out.frames.size()) out.frames.resize(k);
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic demonstration generator. Replaces motion-capture input with a
// deterministic low-poly hand (palm slab + five finger strips), a smooth EE
// trajectory and template-specific contact force profiles.

enum class DemoTemplate { kPinchLift, kTwist, kPour };

inline DemoTemplate demo_template_from_name(const std::string& name) {
  if (name == "pinch_lift") return DemoTemplate::kPinchLift;
  if (name == "twist") return DemoTemplate::kTwist;
  if (name == "pour") return DemoTemplate::kPour;
  throw std::invalid_argument("unknown demo template: " + name +
                              " (expected pinch_lift, twist or pour)");
}

inline const char* demo_template_name(DemoTemplate t) {
  switch (t) {
    case DemoTemplate::kPinchLift: return "pinch_lift";
    case DemoTemplate::kTwist: return "twist";
    case DemoTemplate::kPour: return "pour";
  }
  throw std::invalid_argument("bad demo template enum");
}

// The palm is a fixed 2x5 vertex slab; each finger adds `resolution` chain
// vertices fanned against its palm anchor.
inline constexpr int kPalmVertexCount = 10;

namespace detail {

struct SynthHand {
  std::vector<Vec3> vertices;
  std::vector<Triangle> triangles;
  std::vector<int> labels;
  std::array<int, kNumFingers> base_vertex{};   // palm anchor per finger
  std::array<int, kNumFingers> tip_vertex{};    // last chain vertex per finger
  std::array<Vec3, kNumFingers> direction{};    // finger axis (unit)
};

inline SynthHand build_synth_hand(int resolution) {
  if (resolution < 2) throw std::invalid_argument("synth_demo: mesh_resolution must be >= 2");
  SynthHand hand;
  const double col_spacing = 0.022;
  const double seg = 0.016;
  // Palm rows: knuckle row y=0, heel row y=-0.035.
  for (int f = 0; f < kNumFingers; ++f) {
    double x = col_spacing * (f - 2);
    hand.vertices.emplace_back(x, 0.0, 0.0);
    hand.labels.push_back(kPalm);
  }
  for (int f = 0; f < kNumFingers; ++f) {
    double x = col_spacing * (f - 2);
    hand.vertices.emplace_back(x, -0.035, 0.0);
    hand.labels.push_back(kPalm);
  }
  for (int f = 0; f + 1 < kNumFingers; ++f) {
    int a = f, b = f + 1, c = kNumFingers + f, d = kNumFingers + f + 1;
    hand.triangles.push_back({a, b, c});
    hand.triangles.push_back({b, d, c});
  }
  for (int f = 0; f < kNumFingers; ++f) {
    hand.base_vertex[static_cast<size_t>(f)] = f;
    Vec3 dir = (f == 0) ? Vec3(-0.55, 0.835, 0.0).normalized() : Vec3(0.0, 1.0, 0.0);
    hand.direction[static_cast<size_t>(f)] = dir;
    const Vec3 base = hand.vertices[static_cast<size_t>(f)];
    int prev = f;
    for (int jv = 1; jv <= resolution; ++jv) {
      // Slight out-of-plane bow keeps the fan triangles non-degenerate.
      Vec3 p = base + dir * (seg * jv) +
               Vec3(0, 0, 0.003 * std::sin(std::numbers::pi * jv / (resolution + 1.0)));
      int idx = static_cast<int>(hand.vertices.size());
      hand.vertices.push_back(p);
      hand.labels.push_back(f + 1);
      if (jv == 1) {
        // Anchor the chain against the heel row; (base, base, v1) would be degenerate.
        hand.triangles.push_back({f, f + kNumFingers, idx});
      } else {
        hand.triangles.push_back({hand.base_vertex[static_cast<size_t>(f)], prev, idx});
      }
      prev = idx;
    }
    hand.tip_vertex[static_cast<size_t>(f)] = prev;
  }
  return hand;
}

struct TemplateProfile {
  std::array<double, kNumFingers> force_share{};  // thumb..pinky
  double peak_force = 6.0;                        // newtons
};

inline TemplateProfile template_profile(DemoTemplate t) {
  TemplateProfile p;
  switch (t) {
    case DemoTemplate::kPinchLift:
      p.force_share = {0.45, 0.35, 0.20, 0.0, 0.0};
      break;
    case DemoTemplate::kTwist:
      p.force_share = {0.50, 0.45, 0.05, 0.0, 0.0};
      break;
    case DemoTemplate::kPour:
      p.force_share = {0.35, 0.30, 0.20, 0.15, 0.0};
      break;
  }
  return p;
}

inline double smoothstep01(double x) {
  x = std::clamp(x, 0.0, 1.0);
  return x * x * (3.0 - 2.0 * x);
}

inline Pose template_ee_pose(DemoTemplate t, double s) {
  Pose ee;
  switch (t) {
    case DemoTemplate::kPinchLift:
      ee.pos = Vec3(0.0, -0.04, 0.05 * smoothstep01(s));
      break;
    case DemoTemplate::kTwist:
      ee.pos = Vec3(0.0, -0.04, 0.02);
      ee.rot = Quat(Eigen::AngleAxisd(0.5 * std::numbers::pi * smoothstep01(s), Vec3::UnitZ()));
      break;
    case DemoTemplate::kPour:
      ee.pos = Vec3(0.02 * smoothstep01(s), -0.04, 0.03);
      ee.rot = Quat(Eigen::AngleAxisd(1.0 * smoothstep01(s), Vec3::UnitX()));
      break;
  }
  ee.rot.normalize();
  return ee;
}

}  // namespace detail

inline Demonstration synth_demo(DemoTemplate tmpl, std::uint64_t seed, int mesh_resolution = 6,
                                int n_frames = 60, double rate_hz = 30.0) {
  if (n_frames < 2) throw std::invalid_argument("synth_demo: need at least 2 frames");
  detail::SynthHand hand = detail::build_synth_hand(mesh_resolution);
  detail::TemplateProfile profile = detail::template_profile(tmpl);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);

  Demonstration demo;
  demo.metadata.task = demo_template_name(tmpl);
  demo.metadata.rate_hz = rate_hz;

  const int contact_begin = static_cast<int>(0.30 * n_frames);
  const int contact_end = static_cast<int>(0.85 * n_frames);
  const double curl_amplitude = 0.03;  // rad; keeps vertex motion well under spacing

  std::vector<Vec3> rest_tips(kNumFingers);
  for (int f = 0; f < kNumFingers; ++f)
    rest_tips[static_cast<size_t>(f)] = hand.vertices[static_cast<size_t>(hand.tip_vertex[static_cast<size_t>(f)])];

  Pose object_start;
  object_start.pos = Vec3(0.0, 0.06, 0.01);
  Pose grasp_offset;  // object pose relative to EE, frozen at contact start
  bool grasp_frozen = false;

  for (int k = 0; k < n_frames; ++k) {
    DemoFrame frame;
    const double s = (n_frames > 1) ? static_cast<double>(k) / (n_frames - 1) : 0.0;
    frame.time = k / rate_hz;
    frame.ee_pose = detail::template_ee_pose(tmpl, s);

    // Deformed vertices: progressive curl of each finger chain about its base.
    frame.vertices = hand.vertices;
    for (int f = 0; f < kNumFingers; ++f) {
      const double curl = curl_amplitude * std::sin(std::numbers::pi * s) * (1.0 + 0.15 * f);
      const Vec3 base = hand.vertices[static_cast<size_t>(hand.base_vertex[static_cast<size_t>(f)])];
      const Vec3 axis = hand.direction[static_cast<size_t>(f)].cross(Vec3::UnitZ()).normalized();
      for (int jv = 1; jv <= mesh_resolution; ++jv) {
        int idx = kPalmVertexCount + f * mesh_resolution + (jv - 1);
        double angle = curl * jv / mesh_resolution;
        Eigen::AngleAxisd rot(angle, axis);
        frame.vertices[static_cast<size_t>(idx)] =
            base + rot * (hand.vertices[static_cast<size_t>(idx)] - base);
      }
    }

    for (int f = 0; f < kNumFingers; ++f) {
      Pose bone;
      // The hand rides the wrist: fingertip world pose = EE pose composed with
      // the hand-frame tip position.
      bone.pos = frame.ee_pose.to_world(
          frame.vertices[static_cast<size_t>(hand.tip_vertex[static_cast<size_t>(f)])]);
      bone.rot = frame.ee_pose.rot;
      frame.bones[static_cast<size_t>(f)] = bone;
    }

    const bool active = k >= contact_begin && k < contact_end;
    if (active) {
      const double phase = static_cast<double>(k - contact_begin) / (contact_end - contact_begin);
      const double bump = std::sin(std::numbers::pi * phase);
      const Vec3 palm_center(0.0, -0.0175, 0.0);
      for (int f = 0; f < kNumFingers; ++f) {
        const double share = profile.force_share[static_cast<size_t>(f)];
        if (share <= 0.0) continue;
        ContactEvent c;
        // Contacts live on the hand surface, in the hand frame.
        const Vec3 tip = frame.vertices[static_cast<size_t>(hand.tip_vertex[static_cast<size_t>(f)])];
        Vec3 jitter(unit(rng), unit(rng), unit(rng));
        c.position = tip + 0.001 * jitter;
        Vec3 dir = (palm_center - tip).normalized() + 0.1 * Vec3(unit(rng), unit(rng), unit(rng));
        dir.normalize();
        const double mag = share * profile.peak_force * bump * (1.0 + 0.05 * unit(rng));
        c.force = mag * dir;
        frame.contacts.push_back(c);
      }
      if (!grasp_frozen) {
        grasp_offset.pos = frame.ee_pose.to_local(object_start.pos);
        grasp_offset.rot = (frame.ee_pose.rot.conjugate() * object_start.rot).normalized();
        grasp_frozen = true;
      }
    }
    if (grasp_frozen) {
      frame.object_pose.pos = frame.ee_pose.to_world(grasp_offset.pos);
      frame.object_pose.rot = (frame.ee_pose.rot * grasp_offset.rot).normalized();
    } else {
      frame.object_pose = object_start;
    }
    demo.frames.push_back(std::move(frame));
  }

  demo.mesh = std::make_shared<HandMesh>(hand.vertices, hand.triangles, hand.labels, rest_tips);
  for (DemoFrame& frame : demo.frames)
    for (ContactEvent& c : frame.contacts) c.vertex = demo.mesh->project_to_vertex(c.position);
  return demo;
}

inline Demonstration synth_demo(const std::string& template_name, std::uint64_t seed,
                                int mesh_resolution = 6, int n_frames = 60, double rate_hz = 30.0) {
  return synth_demo(demo_template_from_name(template_name), seed, mesh_resolution, n_frames, rate_hz);
}

}  // namespace softret
