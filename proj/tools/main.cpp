// softret CLI: synthetic demonstrations, two-stage retargeting, simulator
// sampling, controller training/tracking, and the end-to-end pipeline.
//
// Exit codes: 0 success, 2 input error, 3 numerical failure.

#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <map>
#include <string>

#include "softret/benchmark.hpp"
#include "softret/config.hpp"
#include "softret/demo.hpp"
#include "softret/stage1.hpp"
#include "softret/stage2.hpp"
#include "softret/svg.hpp"

namespace fs = std::filesystem;
using namespace softret;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 2;
constexpr int kExitNumerical = 3;

// Effective per-run settings: config file values overridden by CLI flags.
struct RunSettings {
  RetargetConfig retarget;
  SpineConfig spine;
  TrainOptions train;
  InvertOptions invert;
  int dataset_n = 2000;
  double noise_std = 0.0003;
  int knn_k = 5;
  double shape_scale = 0.03;
  int waypoints = 40;
  int loops = 3;
  std::uint64_t seed = 1;
};

RunSettings settings_from_map(const ConfigMap& m) {
  RunSettings s;
  s.retarget = retarget_config_from_map(m);
  s.spine.n_segments = config_int(m, "n_segments", s.spine.n_segments);
  s.spine.segment_length = config_double(m, "segment_length", s.spine.segment_length);
  s.spine.joint_stiffness = config_double(m, "joint_stiffness", s.spine.joint_stiffness);
  s.spine.joint_damping = config_double(m, "joint_damping", s.spine.joint_damping);
  s.spine.chamber_radius = config_double(m, "chamber_radius", s.spine.chamber_radius);
  s.spine.piston_area = config_double(m, "piston_area", s.spine.piston_area);
  s.spine.max_bend_per_joint = config_double(m, "max_bend_per_joint", s.spine.max_bend_per_joint);
  s.train.epochs = config_int(m, "epochs", s.train.epochs);
  s.train.batch_size = config_int(m, "batch", s.train.batch_size);
  s.train.lr = config_double(m, "lr", s.train.lr);
  s.train.lr_decay = config_double(m, "lr_decay", s.train.lr_decay);
  s.train.hidden = config_int(m, "hidden", s.train.hidden);
  s.train.val_fraction = config_double(m, "val_fraction", s.train.val_fraction);
  s.invert.iters = config_int(m, "invert_iters", s.invert.iters);
  s.invert.lr = config_double(m, "invert_lr", s.invert.lr);
  s.dataset_n = config_int(m, "dataset_n", s.dataset_n);
  s.noise_std = config_double(m, "noise_std", s.noise_std);
  s.knn_k = config_int(m, "knn_k", s.knn_k);
  s.shape_scale = config_double(m, "shape_scale", s.shape_scale);
  s.waypoints = config_int(m, "waypoints", s.waypoints);
  s.loops = config_int(m, "loops", s.loops);
  return s;
}

// Canonical flat dump of the effective settings. Hashed into every artifact.
std::string settings_canonical(const RunSettings& s) {
  std::map<std::string, std::string> kv;
  kv["lambda"] = format_double(s.retarget.lambda);
  kv["beta"] = format_double(s.retarget.beta);
  kv["epsilon"] = format_double(s.retarget.epsilon);
  kv["delta_max"] = format_double(s.retarget.delta_max);
  kv["p_min_kpa"] = format_double(s.retarget.p_min_kpa);
  kv["p_max_kpa"] = format_double(s.retarget.p_max_kpa);
  kv["geodesic_pose"] = geodesic_pose_name(s.retarget.geodesic_pose);
  kv["workspace_samples"] = std::to_string(s.retarget.workspace_samples);
  kv["fingertip_rest_x"] = format_double(s.retarget.fingertip_rest.x());
  kv["fingertip_rest_y"] = format_double(s.retarget.fingertip_rest.y());
  kv["fingertip_rest_z"] = format_double(s.retarget.fingertip_rest.z());
  kv["n_segments"] = std::to_string(s.spine.n_segments);
  kv["segment_length"] = format_double(s.spine.segment_length);
  kv["joint_stiffness"] = format_double(s.spine.joint_stiffness);
  kv["joint_damping"] = format_double(s.spine.joint_damping);
  kv["chamber_radius"] = format_double(s.spine.chamber_radius);
  kv["piston_area"] = format_double(s.spine.piston_area);
  kv["max_bend_per_joint"] = format_double(s.spine.max_bend_per_joint);
  kv["epochs"] = std::to_string(s.train.epochs);
  kv["batch"] = std::to_string(s.train.batch_size);
  kv["lr"] = format_double(s.train.lr);
  kv["lr_decay"] = format_double(s.train.lr_decay);
  kv["hidden"] = std::to_string(s.train.hidden);
  kv["val_fraction"] = format_double(s.train.val_fraction);
  kv["invert_iters"] = std::to_string(s.invert.iters);
  kv["invert_lr"] = format_double(s.invert.lr);
  kv["dataset_n"] = std::to_string(s.dataset_n);
  kv["noise_std"] = format_double(s.noise_std);
  kv["knn_k"] = std::to_string(s.knn_k);
  kv["shape_scale"] = format_double(s.shape_scale);
  kv["waypoints"] = std::to_string(s.waypoints);
  kv["loops"] = std::to_string(s.loops);
  kv["seed"] = std::to_string(s.seed);
  std::string out;
  for (const auto& [k, v] : kv) out += k + " = " + v + "\n";
  return out;
}

std::string settings_hash(const RunSettings& s) { return to_hex(fnv1a64(settings_canonical(s))); }

PressureLimits limits_of(const RunSettings& s) {
  return PressureLimits{s.retarget.p_min_kpa, s.retarget.p_max_kpa};
}

// Artifact bookkeeping for the run manifest.
struct ArtifactLog {
  fs::path out_dir;
  json entries = json::array();

  void write(const std::string& name, const std::string& content) {
    write_file(out_dir / name, content);
    entries.push_back(json{{"path", name}, {"fnv64", to_hex(fnv1a64(content))}});
  }

  void write_json(const std::string& name, json j, const std::string& config_hash) {
    j["config_hash"] = config_hash;
    write(name, j.dump(2) + "\n");
  }
};

BenchmarkOptions benchmark_options(const RunSettings& s) {
  BenchmarkOptions bo;
  bo.dataset_n = s.dataset_n;
  bo.noise_std = s.noise_std;
  bo.waypoints = s.waypoints;
  bo.loops = s.loops;
  bo.shape_scale = s.shape_scale;
  bo.seed = s.seed;
  bo.knn_k = s.knn_k;
  bo.train = s.train;
  bo.train.seed = s.seed;
  bo.invert = s.invert;
  return bo;
}

std::string delta_svg(const RetargetedTrajectory& traj) {
  SvgPlot plot("fingertip adjustment magnitude", "t (s)", "|delta| (m)");
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};
  if (traj.frames.empty()) return plot.render();
  const size_t n_fingers = traj.frames.front().fingers.size();
  for (size_t i = 0; i < n_fingers; ++i) {
    std::vector<std::pair<double, double>> pts;
    for (const RetargetedFrame& f : traj.frames)
      pts.emplace_back(f.time, f.fingers[i].delta.norm());
    plot.add_polyline(pts, colors[i % 6], "finger " + std::to_string(i));
  }
  return plot.render();
}

// Track each robot finger's retargeted planar motion (relative to its first
// target) with the inverse-optimization controller on the simulated finger.
json pipeline_tracking(const RetargetedTrajectory& traj, const ForwardModel& model,
                       const RunSettings& s, ArtifactLog& log, const std::string& hash) {
  json summary = json::object();
  if (traj.frames.empty()) return summary;
  const size_t n_fingers = traj.frames.front().fingers.size();
  for (size_t i = 0; i < n_fingers; ++i) {
    std::vector<Vec2> reference;
    const Vec3 origin = traj.frames.front().fingers[i].target;
    for (const RetargetedFrame& f : traj.frames)
      reference.push_back((f.fingers[i].target - origin).head<2>());
    InverseOptController controller(model, limits_of(s), s.invert);
    TrackingReport report = track(controller, reference, s.spine, 1);
    report.shape = "retargeted-finger-" + std::to_string(i);
    const std::string stem = "track_finger_" + std::to_string(i);
    log.write_json(stem + ".json", report_to_json(report), hash);
    log.write(stem + ".csv", report_to_csv(report));
    summary[report.shape] = json{{"rmse_mm", report.rmse_mm}, {"max_mm", report.max_mm}};
  }
  return summary;
}

struct CommonArgs {
  std::string config_path;
  std::uint64_t seed = 1;
  bool seed_set = false;

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", config_path, "key = value config file");
    cmd->add_option("--seed", seed, "RNG seed for all stages")->each([this](const std::string&) {
      seed_set = true;
    });
  }

  RunSettings load() const {
    ConfigMap map;
    if (!config_path.empty()) map = load_config_file(config_path);
    RunSettings s = settings_from_map(map);
    s.seed = seed_set ? seed : static_cast<std::uint64_t>(config_int(map, "seed", 1));
    return s;
  }
};

int run_cli(int argc, char** argv) {
  CLI::App app{"force-aware demonstration retargeting and soft-finger control"};
  app.require_subcommand(1);

  // --- synth-demo ---------------------------------------------------------
  auto* synth = app.add_subcommand("synth-demo", "generate a synthetic demonstration");
  CommonArgs synth_common;
  synth_common.attach(synth);
  std::string synth_template = "twist";
  int synth_resolution = 6, synth_frames = 60;
  double synth_rate = 30.0;
  std::string synth_out_dir;
  synth->add_option("--template", synth_template, "pinch_lift | twist | pour");
  synth->add_option("--resolution", synth_resolution, "vertices per finger");
  synth->add_option("--frames", synth_frames, "frame count");
  synth->add_option("--rate", synth_rate, "frame rate (Hz)");
  synth->add_option("--out-dir", synth_out_dir, "output directory")->required();
  synth->callback([&] {
    RunSettings s = synth_common.load();
    Demonstration demo = synth_demo(synth_template, s.seed, synth_resolution, synth_frames, synth_rate);
    ArtifactLog log{fs::path(synth_out_dir)};
    log.write("demo.json", demonstration_to_json(demo).dump(2) + "\n");
    std::cout << "wrote " << (fs::path(synth_out_dir) / "demo.json").string() << " ("
              << demo.frames.size() << " frames, " << demo.mesh->vertex_count() << " vertices)\n";
  });

  // --- assign --------------------------------------------------------------
  auto* assign = app.add_subcommand("assign", "stage 1: force-balanced finger assignment");
  CommonArgs assign_common;
  assign_common.attach(assign);
  std::string assign_demo, assign_out_dir;
  int assign_fingers = 4;
  assign->add_option("--demo", assign_demo, "demonstration JSON")->required();
  assign->add_option("--fingers", assign_fingers, "number of robot fingers");
  assign->add_option("--out-dir", assign_out_dir, "output directory")->required();
  assign->callback([&] {
    RunSettings s = assign_common.load();
    validate_config(s.retarget);
    validate_spine(s.spine);
    Demonstration demo = load_demonstration(assign_demo);
    FingerAssignment a = run_stage1(demo, assign_fingers, s.spine, s.retarget, s.seed);
    ArtifactLog log{fs::path(assign_out_dir)};
    log.write_json("assignment.json", assignment_to_json(a, s.retarget), settings_hash(s));
    for (const std::string& w : demo.warnings) std::cerr << "softret: assign: warning: " << w << "\n";
    for (const std::string& w : a.warnings) std::cerr << "softret: assign: warning: " << w << "\n";
    std::cout << "objective " << format_double(a.objective) << ", mapping:";
    for (size_t i = 0; i < a.mapping.size(); ++i)
      std::cout << " " << i << "->" << finger_name(a.mapping[i]);
    std::cout << "\n";
  });

  // --- retarget -------------------------------------------------------------
  auto* retarget = app.add_subcommand("retarget", "stage 2: contact-informed refinement");
  CommonArgs retarget_common;
  retarget_common.attach(retarget);
  std::string retarget_demo, retarget_assignment, retarget_out_dir;
  bool retarget_svg = false;
  retarget->add_option("--demo", retarget_demo, "demonstration JSON")->required();
  retarget->add_option("--assignment", retarget_assignment, "assignment JSON from `assign`")->required();
  retarget->add_option("--out-dir", retarget_out_dir, "output directory")->required();
  retarget->add_flag("--svg", retarget_svg, "emit an SVG plot of |delta| over time");
  retarget->callback([&] {
    RunSettings s = retarget_common.load();
    validate_config(s.retarget);
    Demonstration demo = load_demonstration(retarget_demo);
    FingerAssignment a;
    try {
      a = assignment_from_json(json::parse(read_file(retarget_assignment)));
    } catch (const json::exception& e) {
      throw std::invalid_argument("assignment file " + retarget_assignment + ": " + e.what());
    }
    RetargetedTrajectory traj = run_stage2(demo, a, s.retarget);
    ArtifactLog log{fs::path(retarget_out_dir)};
    log.write_json("trajectory.json", trajectory_to_json(traj), settings_hash(s));
    log.write("trajectory.csv", trajectory_to_csv(traj));
    if (retarget_svg) log.write("delta.svg", delta_svg(traj));
    std::cout << "retargeted " << traj.frames.size() << " frames for " << a.mapping.size()
              << " robot fingers\n";
  });

  // --- sim-sample ------------------------------------------------------------
  auto* sample = app.add_subcommand("sim-sample", "sample the finger simulator into a dataset CSV");
  CommonArgs sample_common;
  sample_common.attach(sample);
  std::string sample_out_dir;
  int sample_n = -1;
  double sample_noise = -1.0;
  sample->add_option("--n", sample_n, "sample count (default from config: dataset_n)");
  sample->add_option("--noise-std", sample_noise, "measurement noise stddev (m)");
  sample->add_option("--out-dir", sample_out_dir, "output directory")->required();
  sample->callback([&] {
    RunSettings s = sample_common.load();
    validate_spine(s.spine);
    const int n = sample_n > 0 ? sample_n : s.dataset_n;
    const double noise = sample_noise >= 0 ? sample_noise : s.noise_std;
    auto samples = sample_dataset(s.spine, limits_of(s), n, s.seed, noise);
    ArtifactLog log{fs::path(sample_out_dir)};
    log.write("dataset.csv", dataset_to_csv(samples));
    std::cout << "wrote " << n << " samples\n";
  });

  // --- train-fwd --------------------------------------------------------------
  auto* trainf = app.add_subcommand("train-fwd", "train the forward model on a dataset CSV");
  CommonArgs train_common;
  train_common.attach(trainf);
  std::string train_dataset, train_out_dir;
  trainf->add_option("--dataset", train_dataset, "dataset CSV from `sim-sample`")->required();
  trainf->add_option("--out-dir", train_out_dir, "output directory")->required();
  trainf->callback([&] {
    RunSettings s = train_common.load();
    const std::string csv = read_file(train_dataset);
    auto samples = dataset_from_csv(csv);
    TrainOptions opts = s.train;
    opts.seed = s.seed;
    ForwardModel model = train_forward(samples, opts);
    model.dataset_hash = to_hex(fnv1a64(csv));
    ArtifactLog log{fs::path(train_out_dir)};
    log.write_json("model.json", model_to_json(model), settings_hash(s));
    std::cout << "train_loss " << format_double(model.train_loss) << " val_loss "
              << format_double(model.val_loss) << " val_planar_rmse_mm "
              << format_double(model.val_planar_rmse_m * 1000.0) << "\n";
  });

  // --- track -------------------------------------------------------------------
  auto* trackc = app.add_subcommand("track", "track a reference shape with one controller");
  CommonArgs track_common;
  track_common.attach(trackc);
  std::string track_model, track_dataset, track_controller = "inv-opt", track_shape = "circle";
  std::string track_out_dir;
  bool track_svg = false;
  trackc->add_option("--model", track_model, "forward model JSON (inv-opt)");
  trackc->add_option("--dataset", track_dataset, "dataset CSV (baselines)");
  trackc->add_option("--controller", track_controller, "inv-opt | linear | knn | direct-mlp");
  trackc->add_option("--shape", track_shape, "square | circle | triangle | rectangle");
  trackc->add_option("--out-dir", track_out_dir, "output directory")->required();
  trackc->add_flag("--svg", track_svg, "emit reference vs executed SVG");
  trackc->callback([&] {
    RunSettings s = track_common.load();
    validate_spine(s.spine);
    std::unique_ptr<Controller> controller;
    std::vector<PressureSample> samples;
    if (!track_dataset.empty()) samples = dataset_from_csv(read_file(track_dataset));
    if (track_controller == "inv-opt") {
      if (track_model.empty()) throw std::invalid_argument("track: inv-opt needs --model");
      ForwardModel model = model_from_json(json::parse(read_file(track_model)));
      controller = std::make_unique<InverseOptController>(model, limits_of(s), s.invert);
    } else if (track_controller == "linear") {
      if (samples.empty()) throw std::invalid_argument("track: linear needs --dataset");
      controller = std::make_unique<LinearBaseline>(samples, limits_of(s));
    } else if (track_controller == "knn") {
      if (samples.empty()) throw std::invalid_argument("track: knn needs --dataset");
      controller = std::make_unique<KnnBaseline>(samples, s.knn_k);
    } else if (track_controller == "direct-mlp") {
      if (samples.empty()) throw std::invalid_argument("track: direct-mlp needs --dataset");
      TrainOptions opts = s.train;
      opts.seed = s.seed;
      controller = std::make_unique<DirectMlpBaseline>(samples, limits_of(s), opts);
    } else {
      throw std::invalid_argument("track: unknown controller: " + track_controller);
    }
    std::vector<Vec2> reference = shape_waypoints(track_shape, s.waypoints, s.shape_scale);
    TrackingReport report = track(*controller, reference, s.spine, s.loops);
    report.shape = track_shape;
    ArtifactLog log{fs::path(track_out_dir)};
    log.write_json("report.json", report_to_json(report), settings_hash(s));
    log.write("report.csv", report_to_csv(report));
    if (track_svg) log.write("report.svg", report_to_svg(report));
    std::cout << track_controller << " on " << track_shape << ": rmse_mm "
              << format_double(report.rmse_mm) << " mean_mm " << format_double(report.mean_mm)
              << " max_mm " << format_double(report.max_mm) << "\n";
  });

  // --- eval-controllers ----------------------------------------------------------
  auto* evalc = app.add_subcommand("eval-controllers", "four-controller tracking benchmark");
  CommonArgs eval_common;
  eval_common.attach(evalc);
  std::string eval_out_dir;
  bool eval_svg = false;
  evalc->add_option("--out-dir", eval_out_dir, "output directory")->required();
  evalc->add_flag("--svg", eval_svg, "emit per-run SVG overlays");
  evalc->callback([&] {
    RunSettings s = eval_common.load();
    validate_config(s.retarget);
    validate_spine(s.spine);
    BenchmarkResult result = run_controller_benchmark(s.spine, limits_of(s), benchmark_options(s));
    ArtifactLog log{fs::path(eval_out_dir)};
    const std::string hash = settings_hash(s);
    for (const auto& [controller, shapes] : result.reports) {
      for (const auto& [shape, report] : shapes) {
        const std::string stem = "report_" + controller + "_" + shape;
        log.write_json(stem + ".json", report_to_json(report), hash);
        log.write(stem + ".csv", report_to_csv(report));
        if (eval_svg) log.write(stem + ".svg", report_to_svg(report));
      }
    }
    log.write_json("summary.json", benchmark_summary_json(result), hash);
    for (const auto& [controller, rmse] : result.pooled_rmse_mm)
      std::cout << controller << " pooled rmse_mm " << format_double(rmse) << "\n";
  });

  // --- pipeline ---------------------------------------------------------------------
  auto* pipeline = app.add_subcommand("pipeline", "synth -> assign -> retarget -> train -> track");
  CommonArgs pipeline_common;
  pipeline_common.attach(pipeline);
  std::string pipeline_template = "twist", pipeline_demo, pipeline_out_dir;
  int pipeline_fingers = 4, pipeline_resolution = 6, pipeline_frames = 60;
  bool pipeline_svg = false;
  pipeline->add_option("--template", pipeline_template, "synthetic template (ignored with --demo)");
  pipeline->add_option("--demo", pipeline_demo, "use an existing demonstration JSON");
  pipeline->add_option("--fingers", pipeline_fingers, "number of robot fingers");
  pipeline->add_option("--resolution", pipeline_resolution, "synthetic mesh resolution");
  pipeline->add_option("--frames", pipeline_frames, "synthetic frame count");
  pipeline->add_option("--out-dir", pipeline_out_dir, "run directory")->required();
  pipeline->add_flag("--svg", pipeline_svg, "emit SVG plots");
  pipeline->callback([&] {
    RunSettings s = pipeline_common.load();
    ArtifactLog log{fs::path(pipeline_out_dir)};
    const std::string hash = settings_hash(s);
    std::vector<std::string> warnings;
    std::string stage = "config";
    try {
      validate_config(s.retarget);
      validate_spine(s.spine);

      stage = "synth";
      Demonstration demo;
      if (!pipeline_demo.empty()) {
        demo = load_demonstration(pipeline_demo);
      } else {
        demo = synth_demo(pipeline_template, s.seed, pipeline_resolution, pipeline_frames);
      }
      log.write("demo.json", demonstration_to_json(demo).dump(2) + "\n");
      warnings.insert(warnings.end(), demo.warnings.begin(), demo.warnings.end());

      stage = "assign";
      FingerAssignment assignment = run_stage1(demo, pipeline_fingers, s.spine, s.retarget, s.seed);
      log.write_json("assignment.json", assignment_to_json(assignment, s.retarget), hash);
      warnings.insert(warnings.end(), assignment.warnings.begin(), assignment.warnings.end());

      stage = "retarget";
      RetargetedTrajectory traj = run_stage2(demo, assignment, s.retarget);
      log.write_json("trajectory.json", trajectory_to_json(traj), hash);
      log.write("trajectory.csv", trajectory_to_csv(traj));
      if (pipeline_svg) log.write("delta.svg", delta_svg(traj));

      stage = "train";
      auto samples = sample_dataset(s.spine, limits_of(s), s.dataset_n, s.seed, s.noise_std);
      const std::string dataset_csv = dataset_to_csv(samples);
      log.write("dataset.csv", dataset_csv);
      TrainOptions opts = s.train;
      opts.seed = s.seed;
      ForwardModel model = train_forward(samples, opts);
      model.dataset_hash = to_hex(fnv1a64(dataset_csv));
      log.write_json("model.json", model_to_json(model), hash);

      stage = "track";
      json tracking = pipeline_tracking(traj, model, s, log, hash);

      stage = "manifest";
      json manifest;
      manifest["config_hash"] = hash;
      manifest["config"] = json::object();
      manifest["seed"] = s.seed;
      {
        // Embed the canonical settings dump, one key per entry.
        ConfigMap canon = parse_config_text(settings_canonical(s));
        for (const auto& [k, v] : canon) manifest["config"][k] = v;
      }
      manifest["tracking"] = tracking;
      manifest["warnings"] = warnings;
      manifest["artifacts"] = log.entries;
      write_file(fs::path(pipeline_out_dir) / "manifest.json", manifest.dump(2) + "\n");
      for (const std::string& w : warnings) std::cerr << "softret: pipeline: warning: " << w << "\n";
      std::cout << "pipeline complete: " << log.entries.size() + 1 << " artifacts in "
                << pipeline_out_dir << "\n";
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument("pipeline[" + stage + "]: " + e.what());
    } catch (const NumericalError& e) {
      throw NumericalError("pipeline[" + stage + "]: " + e.what());
    } catch (const std::exception& e) {
      throw NumericalError("pipeline[" + stage + "]: " + e.what());
    }
  });

  CLI11_PARSE(app, argc, argv);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run_cli(argc, argv);
  } catch (const std::invalid_argument& e) {
    std::cerr << "softret: input error: " << e.what() << "\n";
    return kExitInput;
  } catch (const NumericalError& e) {
    std::cerr << "softret: numerical error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "softret: error: " << e.what() << "\n";
    return kExitNumerical;
  }
}
