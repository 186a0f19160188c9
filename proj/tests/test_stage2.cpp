#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "oracles.hpp"
#include "softret/demo.hpp"
#include "softret/stage1.hpp"
#include "softret/stage2.hpp"

using namespace softret;

namespace {

// One huge triangle: every nearby point projects to vertex 0, so contact
// weights reduce to the raw force norms (d_geo = 0).
HandMesh huge_triangle() {
  std::vector<Vec3> v = {{0, 0, 0}, {100, 0, 0}, {0, 100, 0}};
  return HandMesh(v, {{0, 1, 2}}, {kPalm, kPalm, kPalm});
}

// Chain of vertices 0.02 m apart for controlled geodesic distances.
HandMesh chain_mesh(int n) {
  std::vector<Vec3> v;
  for (int i = 0; i < n; ++i) v.emplace_back(0.02 * i, 0.0, 0.0);
  v.emplace_back(0.02 * (n - 1) / 2.0, 2.0, 0.0);
  std::vector<Triangle> t;
  for (int i = 0; i + 1 < n; ++i) t.push_back({i, i + 1, n});
  return HandMesh(std::move(v), std::move(t), std::vector<int>(static_cast<size_t>(n) + 1, kPalm));
}

ContactEvent contact_at(const HandMesh& mesh, const Vec3& pos, const Vec3& force) {
  ContactEvent c;
  c.position = pos;
  c.force = force;
  c.vertex = mesh.project_to_vertex(pos);
  return c;
}

}  // namespace

TEST_CASE("contact_weight", "[stage2]") {
  RetargetConfig config;

  SECTION("zero geodesic distance gives the bare force norm") {
    HandMesh mesh = huge_triangle();
    Vec3 s(0.001, 0.001, 0.0);
    ContactEvent c = contact_at(mesh, Vec3(0.002, 0.0, 0.0), Vec3(0, 0, 3.0));
    REQUIRE(mesh.project_to_vertex(s) == c.vertex);
    CHECK(contact_weight(s, c, mesh, config) == 3.0);
  }

  SECTION("zero force gives zero weight") {
    HandMesh mesh = huge_triangle();
    ContactEvent c = contact_at(mesh, Vec3(0.002, 0.0, 0.0), Vec3::Zero());
    CHECK(contact_weight(Vec3::Zero(), c, mesh, config) == 0.0);
  }

  SECTION("matches the formula at distance 0.02 and lambda 50") {
    HandMesh mesh = chain_mesh(4);
    ContactEvent c = contact_at(mesh, mesh.vertices()[1], Vec3(2.0, 0, 0));
    const double w = contact_weight(mesh.vertices()[0], c, mesh, config);
    const long double expected = 2.0L * std::exp(-50.0L * 0.02L);
    CHECK(w == Catch::Approx(static_cast<double>(expected)).epsilon(1e-12));
    CHECK(w == Catch::Approx(2.0 * std::exp(-1.0)).epsilon(1e-12));
  }

  SECTION("monotone decreasing in geodesic distance") {
    HandMesh mesh = chain_mesh(8);
    Vec3 force(0, 1.5, 0);
    double prev = std::numeric_limits<double>::infinity();
    for (int v = 1; v < 8; ++v) {
      ContactEvent c = contact_at(mesh, mesh.vertices()[static_cast<size_t>(v)], force);
      double w = contact_weight(mesh.vertices()[0], c, mesh, config);
      CHECK(w < prev);
      prev = w;
    }
  }
}

TEST_CASE("fingertip_adjustment", "[stage2]") {
  RetargetConfig config;
  HandMesh mesh = huge_triangle();

  SECTION("empty contact set gives the zero vector") {
    CHECK(fingertip_adjustment(Vec3(0.001, 0, 0), {}, mesh, config) == Vec3::Zero());
  }

  SECTION("single contact exactly at the fingertip gives zero") {
    Vec3 s(0.002, 0.001, 0.0);
    std::vector<ContactEvent> contacts = {contact_at(mesh, s, Vec3(0, 0, 5.0))};
    CHECK(fingertip_adjustment(s, contacts, mesh, config) == Vec3::Zero());
  }

  SECTION("hand-computed two-contact weighted mean") {
    // Weights reduce to force norms (both contacts project to the same vertex
    // as s). w1 = 2 with offset +x 4 mm, w2 = 1 with offset +y 4 mm.
    Vec3 s(0.001, 0.001, 0.0);
    std::vector<ContactEvent> contacts = {
        contact_at(mesh, s + Vec3(0.004, 0, 0), Vec3(2.0, 0, 0)),
        contact_at(mesh, s + Vec3(0, 0.004, 0), Vec3(0, 1.0, 0))};
    Vec3 delta = fingertip_adjustment(s, contacts, mesh, config);
    CHECK(delta.x() == Catch::Approx(0.002667).margin(1e-6));
    CHECK(delta.y() == Catch::Approx(0.001333).margin(1e-6));
    CHECK(delta.z() == Catch::Approx(0.0).margin(1e-12));

    RetargetConfig tight = config;
    tight.delta_max = 0.001;
    Vec3 clamped = fingertip_adjustment(s, contacts, mesh, tight);
    CHECK(clamped.norm() == Catch::Approx(0.001).margin(1e-15));
    CHECK(clamped.normalized().dot(delta.normalized()) == Catch::Approx(1.0).margin(1e-12));
  }

  SECTION("clamp preserves direction") {
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> u(-0.05, 0.05);
    for (int trial = 0; trial < 50; ++trial) {
      Vec3 raw(u(rng), u(rng), u(rng));
      Vec3 clamped = clamp_norm(raw, 0.01);
      CHECK(clamped.norm() <= 0.01);
      if (raw.norm() > 1e-12) {
        double cosine = clamped.normalized().dot(raw.normalized());
        CHECK(cosine == Catch::Approx(1.0).margin(1e-12));
      }
    }
  }

  SECTION("translation equivariance") {
    const Vec3 shift(0.5, -0.25, 0.125);
    std::vector<Vec3> moved_verts;
    for (const Vec3& v : mesh.vertices()) moved_verts.push_back(v + shift);
    HandMesh moved(moved_verts, mesh.triangles(), mesh.finger_labels());

    Vec3 s(0.001, 0.002, 0.0);
    std::vector<ContactEvent> contacts = {
        contact_at(mesh, Vec3(0.004, 0.001, 0), Vec3(1.0, 0.5, 0)),
        contact_at(mesh, Vec3(0.0, 0.003, 0.001), Vec3(0, 2.0, 0))};
    std::vector<ContactEvent> moved_contacts;
    for (ContactEvent c : contacts) {
      c.position += shift;
      c.vertex = moved.project_to_vertex(c.position);
      moved_contacts.push_back(c);
    }
    Vec3 a = fingertip_adjustment(s, contacts, mesh, config);
    Vec3 b = fingertip_adjustment(s + shift, moved_contacts, moved, config);
    CHECK((a - b).norm() < 1e-12);
  }

  SECTION("force scaling invariance at epsilon = 0") {
    RetargetConfig raw_cfg = config;
    raw_cfg.epsilon = 0.0;
    Vec3 s(0.002, 0.001, 0.0);
    std::vector<ContactEvent> contacts = {
        contact_at(mesh, s + Vec3(0.003, 0.001, 0), Vec3(1.0, 0, 0.5)),
        contact_at(mesh, s + Vec3(-0.002, 0.002, 0), Vec3(0, 0.75, 0))};
    std::vector<ContactEvent> scaled = contacts;
    for (ContactEvent& c : scaled) c.force *= 4.0;  // power of two keeps this exact
    Vec3 a = fingertip_adjustment(s, contacts, mesh, raw_cfg);
    Vec3 b = fingertip_adjustment(s, scaled, mesh, raw_cfg);
    CHECK(a == b);
  }

  SECTION("moving a contact farther never raises its normalized share") {
    HandMesh chain = chain_mesh(8);
    Vec3 s = chain.vertices()[0];
    ContactEvent near = contact_at(chain, chain.vertices()[1], Vec3(0, 0, 1.0));
    double prev_share = 1.0;
    for (int v = 2; v < 8; ++v) {
      ContactEvent other = contact_at(chain, chain.vertices()[static_cast<size_t>(v)], Vec3(0, 0, 2.0));
      double w_near = contact_weight(s, near, chain, config);
      double w_other = contact_weight(s, other, chain, config);
      double share = w_other / (w_near + w_other + config.epsilon);
      CHECK(share < prev_share);
      prev_share = share;
    }
  }
}

TEST_CASE("run_stage2", "[stage2]") {
  RetargetConfig config;
  SpineConfig spine;

  SECTION("contact-free demo passes the baseline through") {
    Demonstration demo = synth_demo(DemoTemplate::kPinchLift, 3, 4, 20);
    for (DemoFrame& f : demo.frames) f.contacts.clear();
    FingerAssignment assignment;
    assignment.mapping = {0, 1, 2, 3};
    RetargetedTrajectory traj = run_stage2(demo, assignment, config);
    REQUIRE(traj.frames.size() == demo.frames.size());
    for (size_t k = 0; k < traj.frames.size(); ++k) {
      const RetargetedFrame& rf = traj.frames[k];
      CHECK((rf.ee_target.pos - demo.frames[k].ee_pose.pos).norm() < 1e-15);
      for (const FingerTargetFrame& ft : rf.fingers) {
        CHECK(ft.delta == Vec3::Zero());
        CHECK(ft.target == ft.base);
        CHECK(ft.weight_sum == 0.0);
        Vec3 expected = demo.frames[k].ee_pose.to_local(
            demo.frames[k].bones[static_cast<size_t>(ft.human)].pos);
        CHECK((ft.base - expected).norm() == 0.0);
      }
    }
  }

  SECTION("twist output respects the clamp and engages mapped fingers") {
    Demonstration demo = synth_demo(DemoTemplate::kTwist, 19, 4, 30);
    FingerAssignment assignment = run_stage1(demo, 4, spine, config, 3);
    RetargetedTrajectory traj = run_stage2(demo, assignment, config);
    REQUIRE(traj.frames.size() == demo.frames.size());

    bool thumb_engaged = false;
    for (size_t k = 0; k < traj.frames.size(); ++k) {
      for (const FingerTargetFrame& ft : traj.frames[k].fingers) {
        CHECK(ft.delta.norm() <= config.delta_max);
        if (demo.frames[k].contacts.empty()) {
          CHECK(ft.delta == Vec3::Zero());
        } else if (ft.human == kThumb - 1 && ft.weight_sum > 0.0) {
          thumb_engaged = true;
        }
      }
    }
    CHECK(thumb_engaged);
  }

  SECTION("prefix truncation reproduces the prefix exactly") {
    Demonstration demo = synth_demo(DemoTemplate::kPour, 23, 4, 30);
    FingerAssignment assignment = run_stage1(demo, 4, spine, config, 3);
    RetargetedTrajectory full = run_stage2(demo, assignment, config);
    for (size_t k : {size_t{2}, size_t{13}, size_t{29}}) {
      Demonstration prefix = truncate_demonstration(demo, k);
      RetargetedTrajectory partial = run_stage2(prefix, assignment, config);
      REQUIRE(partial.frames.size() == k);
      for (size_t t = 0; t < k; ++t) {
        for (size_t i = 0; i < partial.frames[t].fingers.size(); ++i) {
          const FingerTargetFrame& a = partial.frames[t].fingers[i];
          const FingerTargetFrame& b = full.frames[t].fingers[i];
          CHECK(a.base == b.base);
          CHECK(a.delta == b.delta);
          CHECK(a.target == b.target);
          CHECK(a.weight_sum == b.weight_sum);
        }
      }
    }
  }

  SECTION("unknown human finger in the mapping is rejected") {
    Demonstration demo = synth_demo(DemoTemplate::kTwist, 3, 4, 10);
    FingerAssignment assignment;
    assignment.mapping = {0, 7};
    CHECK_THROWS_AS(run_stage2(demo, assignment, config), std::invalid_argument);
  }

  SECTION("per-frame geodesic mode runs and clamps") {
    Demonstration demo = synth_demo(DemoTemplate::kTwist, 41, 4, 12);
    FingerAssignment assignment = run_stage1(demo, 3, spine, config, 1);
    RetargetConfig per_frame = config;
    per_frame.geodesic_pose = GeodesicPose::kPerFrame;
    RetargetedTrajectory traj = run_stage2(demo, assignment, per_frame);
    REQUIRE(traj.frames.size() == demo.frames.size());
    for (const RetargetedFrame& rf : traj.frames)
      for (const FingerTargetFrame& ft : rf.fingers) CHECK(ft.delta.norm() <= per_frame.delta_max);
  }

  SECTION("CSV and JSON artifacts have one row per finger per frame") {
    Demonstration demo = synth_demo(DemoTemplate::kTwist, 3, 4, 10);
    FingerAssignment assignment = run_stage1(demo, 4, spine, config, 1);
    RetargetedTrajectory traj = run_stage2(demo, assignment, config);
    std::string csv = trajectory_to_csv(traj);
    size_t rows = std::count(csv.begin(), csv.end(), '\n') - 1;  // minus header
    CHECK(rows == demo.frames.size() * assignment.mapping.size());
    json j = trajectory_to_json(traj);
    CHECK(j.at("frames").size() == demo.frames.size());
  }
}
