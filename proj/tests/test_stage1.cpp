#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "oracles.hpp"
#include "softret/demo.hpp"
#include "softret/stage1.hpp"

using namespace softret;

namespace {

// Triangle with a 0.5 m edge between v0 and v1; v2 far enough that no shortcut
// through it beats the direct edge.
HandMesh wide_triangle() {
  std::vector<Vec3> v = {{0, 0, 0}, {0.5, 0, 0}, {0.25, 5.0, 0}};
  return HandMesh(v, {{0, 1, 2}}, {kThumb, kIndex, kPalm});
}

Demonstration single_contact_demo(const Vec3& contact_pos, const Vec3& force) {
  Demonstration demo;
  demo.mesh = std::make_shared<HandMesh>(wide_triangle());
  for (int k = 0; k < 2; ++k) {
    DemoFrame frame;
    frame.time = 0.1 * k;
    frame.vertices = demo.mesh->vertices();
    for (auto& bone : frame.bones) bone = Pose{};
    if (k == 0) {
      ContactEvent c;
      c.position = contact_pos;
      c.force = force;
      c.vertex = demo.mesh->project_to_vertex(contact_pos);
      frame.contacts.push_back(c);
    }
    demo.frames.push_back(std::move(frame));
  }
  demo.metadata.task = "manual";
  demo.metadata.rate_hz = 10.0;
  return demo;
}

Demonstration strip_contacts(Demonstration demo) {
  for (DemoFrame& f : demo.frames) f.contacts.clear();
  return demo;
}

}  // namespace

TEST_CASE("diffuse_forces basics", "[stage1]") {
  RetargetConfig config;

  SECTION("no contacts anywhere gives an all-zero field") {
    Demonstration demo = strip_contacts(synth_demo(DemoTemplate::kTwist, 3, 4, 10));
    HeatField heat = diffuse_forces(demo, config);
    for (double v : heat.values) CHECK(v == 0.0);
  }

  SECTION("lambda = 0 spreads a contact uniformly") {
    Demonstration demo = single_contact_demo(Vec3(0, 0, 0), Vec3(0, 0, 2.0));
    RetargetConfig flat = config;
    flat.lambda = 0.0;  // exp(0) = 1 everywhere
    HeatField heat = diffuse_forces(demo, flat);
    for (double v : heat.values) CHECK(v == Catch::Approx(2.0).margin(1e-12));
  }

  SECTION("neighbor at 0.5 m with lambda 1 sees 2 e^-0.5") {
    Demonstration demo = single_contact_demo(Vec3(0, 0, 0), Vec3(0, 0, 2.0));
    RetargetConfig cfg = config;
    cfg.lambda = 1.0;
    HeatField heat = diffuse_forces(demo, cfg);
    CHECK(heat.values[0] == Catch::Approx(2.0).margin(1e-12));
    CHECK(heat.values[1] == Catch::Approx(2.0 * std::exp(-0.5)).margin(1e-12));
  }

  SECTION("matches a dense matrix evaluation on a synthetic demo") {
    Demonstration demo = synth_demo(DemoTemplate::kPinchLift, 11, 4, 16);
    HeatField heat = diffuse_forces(demo, config);
    auto fw = oracles::floyd_warshall(*demo.mesh);
    const int n = demo.mesh->vertex_count();
    std::vector<double> expected(static_cast<size_t>(n), 0.0);
    for (const DemoFrame& frame : demo.frames)
      for (const ContactEvent& c : frame.contacts)
        for (int v = 0; v < n; ++v)
          expected[static_cast<size_t>(v)] +=
              c.force.norm() *
              std::exp(-config.lambda * fw[static_cast<size_t>(c.vertex)][static_cast<size_t>(v)]);
    for (int v = 0; v < n; ++v)
      CHECK(heat.values[static_cast<size_t>(v)] ==
            Catch::Approx(expected[static_cast<size_t>(v)]).margin(1e-9));
  }

  SECTION("field is additive across demonstration segments") {
    Demonstration demo = synth_demo(DemoTemplate::kTwist, 5, 4, 20);
    Demonstration head = demo, tail = demo;
    head.frames.assign(demo.frames.begin(), demo.frames.begin() + 10);
    tail.frames.assign(demo.frames.begin() + 10, demo.frames.end());
    HeatField full = diffuse_forces(demo, config);
    HeatField a = diffuse_forces(head, config);
    HeatField b = diffuse_forces(tail, config);
    for (size_t v = 0; v < full.values.size(); ++v)
      CHECK(full.values[v] == Catch::Approx(a.values[v] + b.values[v]).margin(1e-12));
  }

  SECTION("per-timestep diagnostics sum to the accumulated field") {
    Demonstration demo = synth_demo(DemoTemplate::kPour, 2, 4, 12);
    HeatField heat = diffuse_forces(demo, config, true);
    REQUIRE(heat.per_timestep.size() == demo.frames.size());
    for (size_t v = 0; v < heat.values.size(); ++v) {
      double sum = 0.0;
      for (const auto& step : heat.per_timestep) sum += step[v];
      CHECK(heat.values[v] == Catch::Approx(sum).margin(1e-12));
    }
  }
}

TEST_CASE("finger_loads", "[stage1]") {
  SECTION("zero field gives zero loads") {
    Demonstration demo = single_contact_demo(Vec3(0, 0, 0), Vec3::Zero());
    HeatField heat = diffuse_forces(demo, RetargetConfig{});
    FingerLoads loads = finger_loads(heat, *demo.mesh);
    for (double f : loads.finger) CHECK(f == 0.0);
    CHECK(loads.palm == 0.0);
  }

  SECTION("heat on a single labeled vertex loads only that finger") {
    HandMesh mesh = wide_triangle();  // labels: thumb, index, palm
    HeatField heat;
    heat.values = {0.0, 3.5, 0.0};
    FingerLoads loads = finger_loads(heat, mesh);
    CHECK(loads.finger[kIndex - 1] == 3.5);
    CHECK(loads.finger[kThumb - 1] == 0.0);
    CHECK(loads.palm == 0.0);
  }

  SECTION("total mass is conserved across fingers plus palm") {
    Demonstration demo = synth_demo(DemoTemplate::kPour, 9, 4, 16);
    HeatField heat = diffuse_forces(demo, RetargetConfig{});
    FingerLoads loads = finger_loads(heat, *demo.mesh);
    double field_mass = 0.0;
    for (double v : heat.values) field_mass += v;
    CHECK(loads.total() == Catch::Approx(field_mass).margin(1e-9 * (1 + field_mass)));
  }

  SECTION("twist loads concentrate on thumb and index") {
    Demonstration demo = synth_demo(DemoTemplate::kTwist, 21);
    HeatField heat = diffuse_forces(demo, RetargetConfig{});
    FingerLoads loads = finger_loads(heat, *demo.mesh);
    double finger_total = 0.0;
    for (double f : loads.finger) finger_total += f;
    REQUIRE(finger_total > 0.0);
    CHECK((loads.finger[kThumb - 1] + loads.finger[kIndex - 1]) / finger_total >= 0.80);
  }

  SECTION("scaling forces scales loads and keeps the allocation") {
    Demonstration demo = synth_demo(DemoTemplate::kTwist, 33, 4, 20);
    Demonstration scaled = demo;
    for (DemoFrame& f : scaled.frames)
      for (ContactEvent& c : f.contacts) c.force *= 4.0;  // power of two: exact
    RetargetConfig config;
    FingerLoads a = finger_loads(diffuse_forces(demo, config), *demo.mesh);
    FingerLoads b = finger_loads(diffuse_forces(scaled, config), *scaled.mesh);
    for (int f = 0; f < kNumFingers; ++f)
      CHECK(b.finger[static_cast<size_t>(f)] ==
            Catch::Approx(4.0 * a.finger[static_cast<size_t>(f)]).margin(1e-12));
    AllocationResult alloc_a = allocate_fingers(a.finger, 4);
    AllocationResult alloc_b = allocate_fingers(b.finger, 4);
    CHECK(alloc_a.counts == alloc_b.counts);
    CHECK(alloc_b.objective == Catch::Approx(4.0 * alloc_a.objective));
  }
}

TEST_CASE("allocate_fingers examples", "[stage1]") {
  SECTION("F = [6,3,1], N = 4") {
    std::vector<double> loads = {6, 3, 1};
    AllocationResult r = allocate_fingers(loads, 4);
    CHECK(r.counts == std::vector<int>{2, 1, 1});
    CHECK(r.objective == Catch::Approx(3.0));
    auto oracle = oracles::allocation_by_enumeration(loads, 4);
    CHECK(r.counts == oracle.counts);
    CHECK(r.objective == oracle.objective);
  }

  SECTION("equal loads split evenly") {
    std::vector<double> loads = {1, 1};
    CHECK(allocate_fingers(loads, 4).counts == std::vector<int>{2, 2});
  }

  SECTION("single active finger takes everything") {
    std::vector<double> loads = {0, 2.5, 0};
    CHECK(allocate_fingers(loads, 3).counts == std::vector<int>{0, 3, 0});
  }

  SECTION("all-zero loads are rejected") {
    std::vector<double> loads = {0, 0};
    CHECK_THROWS_AS(allocate_fingers(loads, 2), std::invalid_argument);
  }

  SECTION("negative or non-finite loads are rejected") {
    CHECK_THROWS_AS(allocate_fingers(std::vector<double>{1, -2}, 2), std::invalid_argument);
    CHECK_THROWS_AS(allocate_fingers(std::vector<double>{1, std::nan("")}, 2), std::invalid_argument);
  }

  SECTION("too few robot fingers drops the lowest loads with a warning") {
    std::vector<double> loads = {5, 1, 3};
    AllocationResult r = allocate_fingers(loads, 2);
    CHECK(r.counts == std::vector<int>{1, 0, 1});
    CHECK(r.dropped == std::vector<int>{1});
    REQUIRE_FALSE(r.warnings.empty());
    CHECK(r.objective == Catch::Approx(5.0));
  }
}

TEST_CASE("allocate_fingers matches enumeration on random instances", "[stage1][property]") {
  std::mt19937_64 rng(4242);
  std::uniform_int_distribution<int> n_fingers(1, 6);
  std::uniform_real_distribution<double> load(0.0, 10.0);
  for (int trial = 0; trial < 300; ++trial) {
    const int k = n_fingers(rng);
    std::vector<double> loads(static_cast<size_t>(k));
    int active = 0;
    for (double& f : loads) {
      f = load(rng);
      if (trial % 3 == 0 && f < 2.0) f = 0.0;  // sprinkle inactive fingers
      if (f > 0.0) ++active;
    }
    if (active == 0) continue;
    std::uniform_int_distribution<int> robots(active, 8);
    const int n_robot = robots(rng);
    AllocationResult mine = allocate_fingers(loads, n_robot);
    auto oracle = oracles::allocation_by_enumeration(loads, n_robot);
    CHECK(mine.objective == oracle.objective);
    CHECK(mine.counts == oracle.counts);
  }
}

TEST_CASE("workspace_envelope_human", "[stage1]") {
  auto make_circle_demo = [](bool xz_plane) {
    Demonstration demo;
    demo.mesh = std::make_shared<HandMesh>(wide_triangle());
    const int n = 24;
    for (int k = 0; k < n; ++k) {
      DemoFrame frame;
      frame.time = 0.1 * k;
      frame.vertices = demo.mesh->vertices();
      const double a = 2.0 * std::numbers::pi * k / n;
      Vec3 p = xz_plane ? Vec3(0.03 * std::cos(a), 0.01, 0.03 * std::sin(a))
                        : Vec3(0.03 * std::cos(a), 0.03 * std::sin(a), 0.02);
      for (auto& bone : frame.bones) bone = Pose{};
      frame.bones[0].pos = p;
      demo.frames.push_back(std::move(frame));
    }
    return demo;
  };

  SECTION("xy circle is preserved up to in-plane rotation") {
    Demonstration demo = make_circle_demo(false);
    WorkspaceEnvelope env = workspace_envelope_human(demo, 0);
    CHECK_FALSE(env.degenerate);
    CHECK(env.centroid.x() == Catch::Approx(0.0).margin(1e-12));
    CHECK(env.centroid.z() == Catch::Approx(0.02).margin(1e-12));
    for (const Vec3& p : env.points) {
      CHECK(p.z() == Catch::Approx(0.02).margin(1e-9));
      CHECK((p - env.centroid).norm() == Catch::Approx(0.03).margin(1e-9));
    }
  }

  SECTION("xz circle aligns into the xy plane with the radius intact") {
    Demonstration demo = make_circle_demo(true);
    WorkspaceEnvelope env = workspace_envelope_human(demo, 0);
    CHECK_FALSE(env.degenerate);
    for (const Vec3& p : env.points) {
      CHECK(std::abs(p.z() - env.centroid.z()) < 1e-9);  // residual plane distance
      CHECK((p - env.centroid).norm() == Catch::Approx(0.03).margin(1e-9));
    }
  }

  SECTION("repeated single point is flagged degenerate") {
    Demonstration demo;
    demo.mesh = std::make_shared<HandMesh>(wide_triangle());
    for (int k = 0; k < 3; ++k) {
      DemoFrame frame;
      frame.time = 0.1 * k;
      frame.vertices = demo.mesh->vertices();
      for (auto& bone : frame.bones) bone = Pose{};
      frame.bones[0].pos = Vec3(0.01, 0.02, 0.03);
      demo.frames.push_back(std::move(frame));
    }
    WorkspaceEnvelope env = workspace_envelope_human(demo, 0);
    CHECK(env.degenerate);
    CHECK((env.box_max - env.box_min).norm() == 0.0);
  }
}

TEST_CASE("workspace_envelope_robot", "[stage1]") {
  SpineConfig spine;
  RetargetConfig config;

  SECTION("one sample gives a one-point envelope") {
    WorkspaceEnvelope env = workspace_envelope_robot(0, spine, config, 1, 3);
    CHECK(env.points.size() == 1);
    CHECK(env.degenerate);
  }

  SECTION("large sample boxes contain the straight-pose tip") {
    const double L = finger_length(spine);
    WorkspaceEnvelope env = workspace_envelope_robot(0, spine, config, 500, 3);
    CHECK(env.box_min.x() <= 0.0);
    CHECK(env.box_max.x() >= 0.0);
    CHECK(env.box_min.y() <= 0.0);
    CHECK(env.box_max.y() >= 0.0);
    CHECK(env.box_min.z() <= L);
    // Bent tips always sit below L; near-zero differentials approach it.
    CHECK(env.box_max.z() >= L - 1e-3);
  }

  SECTION("different seeds overlap in the box sense") {
    WorkspaceEnvelope a = workspace_envelope_robot(0, spine, config, 200, 3);
    WorkspaceEnvelope b = workspace_envelope_robot(0, spine, config, 200, 4);
    bool identical = true;
    for (size_t i = 0; i < std::min(a.points.size(), b.points.size()); ++i)
      identical = identical && a.points[i] == b.points[i];
    CHECK_FALSE(identical);
    CHECK(envelopes_overlap(a, b));
  }
}

TEST_CASE("match_fingers", "[stage1]") {
  RetargetConfig config;

  auto point_env = [](const Vec3& c, double half = 0.01) {
    WorkspaceEnvelope env;
    env.centroid = c;
    env.points = {c};
    env.box_min = c - Vec3(half, half, half);
    env.box_max = c + Vec3(half, half, half);
    return env;
  };

  SECTION("identical centroids break ties to the identity mapping") {
    WorkspaceEnvelope e = point_env(Vec3(0, 0, 0.08));
    std::vector<WorkspaceEnvelope> robot(3, e), human(3, e);
    std::vector<int> allocation = {1, 1, 1};
    MatchResult m = match_fingers(robot, human, allocation, config);
    CHECK(m.robot_to_finger == std::vector<int>{0, 1, 2});
  }

  SECTION("3x3 example matches permutation enumeration") {
    CostMatrix cost = {{1, 2, 3}, {2, 4, 6}, {3, 6, 9}};
    AssignmentResult r = solve_assignment(cost);
    CHECK(r.total_cost == Catch::Approx(oracles::assignment_min_by_enumeration(cost)));
  }

  SECTION("large beta avoids disjoint pairs when an overlapping assignment exists") {
    RetargetConfig heavy = config;
    heavy.beta = 1e6;
    // Robot 0 overlaps only human 0; robot 1 overlaps both. Centroid distances
    // alone would pair robot 0 with human 1.
    std::vector<WorkspaceEnvelope> robot = {point_env(Vec3(0, 0, 0), 0.02),
                                            point_env(Vec3(0.1, 0, 0), 0.2)};
    std::vector<WorkspaceEnvelope> human;
    human.push_back(point_env(Vec3(0.03, 0, 0), 0.02));   // overlaps robot 0
    human.push_back(point_env(Vec3(0.011, 0.05, 0), 0.002));  // disjoint from robot 0
    std::vector<int> allocation = {1, 1};
    CHECK_FALSE(envelopes_overlap(robot[0], human[1]));
    REQUIRE(envelopes_overlap(robot[0], human[0]));
    REQUIRE(envelopes_overlap(robot[1], human[1]));
    MatchResult m = match_fingers(robot, human, allocation, heavy);
    CHECK(m.robot_to_finger == std::vector<int>{0, 1});
  }

  SECTION("non-finite costs are rejected") {
    CostMatrix bad = {{1.0, std::nan("")}, {1.0, 1.0}};
    CHECK_THROWS_AS(solve_assignment(bad), std::invalid_argument);
  }

  SECTION("allocation total must match the robot finger count") {
    std::vector<WorkspaceEnvelope> robot(2, point_env(Vec3::Zero()));
    std::vector<WorkspaceEnvelope> human(2, point_env(Vec3::Zero()));
    std::vector<int> allocation = {1, 2};
    CHECK_THROWS_AS(match_fingers(robot, human, allocation, config), std::invalid_argument);
  }
}

TEST_CASE("assignment cost equals enumeration on random instances", "[stage1][property]") {
  std::mt19937_64 rng(777);
  std::uniform_int_distribution<int> size(2, 7);
  std::uniform_real_distribution<double> cost(0.0, 10.0);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = size(rng);
    CostMatrix m(static_cast<size_t>(n), std::vector<double>(static_cast<size_t>(n)));
    for (auto& row : m)
      for (double& c : row) c = cost(rng);
    AssignmentResult r = solve_assignment(m);
    CHECK(r.total_cost == Catch::Approx(oracles::assignment_min_by_enumeration(m)).margin(1e-9));
  }
}

TEST_CASE("run_stage1", "[stage1]") {
  SpineConfig spine;
  RetargetConfig config;

  SECTION("twist assigns the thumb at least one robot finger") {
    Demonstration demo = synth_demo(DemoTemplate::kTwist, 17, 4, 24);
    FingerAssignment a = run_stage1(demo, 4, spine, config, 5);
    CHECK(a.allocation[kThumb - 1] >= 1);
    // The max-load finger receives the largest allocation.
    int argmax_load = 0, argmax_alloc = 0;
    for (int f = 1; f < kNumFingers; ++f) {
      if (a.loads.finger[static_cast<size_t>(f)] > a.loads.finger[static_cast<size_t>(argmax_load)])
        argmax_load = f;
      if (a.allocation[static_cast<size_t>(f)] > a.allocation[static_cast<size_t>(argmax_alloc)])
        argmax_alloc = f;
    }
    CHECK(a.allocation[static_cast<size_t>(argmax_load)] >=
          a.allocation[static_cast<size_t>(argmax_alloc)]);
    CHECK(static_cast<int>(a.mapping.size()) == 4);
    // Every robot finger maps to an allocated finger; counts agree.
    std::array<int, kNumFingers> counted{};
    for (int human : a.mapping) ++counted[static_cast<size_t>(human)];
    CHECK(counted == a.allocation);
  }

  SECTION("zero-contact demo is rejected") {
    Demonstration demo = strip_contacts(synth_demo(DemoTemplate::kTwist, 17, 4, 12));
    CHECK_THROWS_AS(run_stage1(demo, 4, spine, config, 5), std::invalid_argument);
  }

  SECTION("identical runs produce identical assignments") {
    Demonstration demo = synth_demo(DemoTemplate::kPour, 29, 4, 24);
    FingerAssignment a = run_stage1(demo, 5, spine, config, 9);
    FingerAssignment b = run_stage1(demo, 5, spine, config, 9);
    CHECK(a.mapping == b.mapping);
    CHECK(a.allocation == b.allocation);
    CHECK(a.objective == b.objective);
    CHECK(a.loads.finger == b.loads.finger);
  }

  SECTION("assignment JSON round-trips") {
    Demonstration demo = synth_demo(DemoTemplate::kTwist, 13, 4, 20);
    FingerAssignment a = run_stage1(demo, 4, spine, config, 2);
    FingerAssignment b = assignment_from_json(assignment_to_json(a, config));
    CHECK(a.mapping == b.mapping);
    CHECK(a.allocation == b.allocation);
    CHECK(a.objective == b.objective);
    CHECK(a.loads.finger == b.loads.finger);
    CHECK(a.loads.palm == b.loads.palm);
  }
}
