// benchmark.hpp - the four-controller tracking comparison on the simulated
// finger: one shared dataset, four planar reference shapes, waypoint-indexed
// planar errors pooled across shapes.
#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "softret/controllers.hpp"
#include "softret/finger_sim.hpp"

namespace softret {

struct BenchmarkOptions {
  int dataset_n = 2000;
  double noise_std = 0.0003;  // m
  int waypoints = 40;
  int loops = 3;
  double shape_scale = 0.03;  // m
  Vec2 shape_center{0.0, 0.0};
  std::uint64_t seed = 1;
  int knn_k = 5;
  TrainOptions train;
  InvertOptions invert;
};

struct BenchmarkResult {
  // reports[controller][shape]
  std::map<std::string, std::map<std::string, TrackingReport>> reports;
  std::map<std::string, double> pooled_rmse_mm;  // over all shapes, loops and waypoints
  std::string dataset_hash;
};

inline const std::vector<std::string>& benchmark_controllers() {
  static const std::vector<std::string> names = {"inv-opt", "linear", "knn", "direct-mlp"};
  return names;
}

inline BenchmarkResult run_controller_benchmark(const SpineConfig& spine, const PressureLimits& limits,
                                                const BenchmarkOptions& opts) {
  std::vector<PressureSample> dataset =
      sample_dataset(spine, limits, opts.dataset_n, opts.seed, opts.noise_std);

  TrainOptions train_opts = opts.train;
  train_opts.seed = opts.seed;
  ForwardModel model = train_forward(dataset, train_opts);
  model.dataset_hash = to_hex(fnv1a64(dataset_to_csv(dataset)));

  std::vector<std::unique_ptr<Controller>> controllers;
  controllers.push_back(std::make_unique<InverseOptController>(model, limits, opts.invert));
  controllers.push_back(std::make_unique<LinearBaseline>(dataset, limits));
  controllers.push_back(std::make_unique<KnnBaseline>(dataset, opts.knn_k));
  controllers.push_back(std::make_unique<DirectMlpBaseline>(dataset, limits, train_opts));

  BenchmarkResult result;
  result.dataset_hash = model.dataset_hash;
  for (auto& controller : controllers) {
    double sum_sq = 0.0;
    size_t count = 0;
    for (const std::string& shape : benchmark_shapes()) {
      std::vector<Vec2> reference =
          shape_waypoints(shape, opts.waypoints, opts.shape_scale, opts.shape_center);
      TrackingReport report = track(*controller, reference, spine, opts.loops);
      report.shape = shape;
      for (double e : report.errors_mm) {
        sum_sq += e * e;
        ++count;
      }
      result.reports[controller->name()][shape] = std::move(report);
    }
    result.pooled_rmse_mm[controller->name()] = std::sqrt(sum_sq / static_cast<double>(count));
  }
  return result;
}

inline nlohmann::json benchmark_summary_json(const BenchmarkResult& result) {
  nlohmann::json per_shape = nlohmann::json::object();
  for (const auto& [controller, shapes] : result.reports) {
    nlohmann::json row = nlohmann::json::object();
    for (const auto& [shape, report] : shapes) {
      row[shape] = nlohmann::json{{"rmse_mm", report.rmse_mm},
                                  {"mean_mm", report.mean_mm},
                                  {"std_mm", report.std_mm},
                                  {"max_mm", report.max_mm}};
    }
    per_shape[controller] = row;
  }
  return nlohmann::json{{"dataset_hash", result.dataset_hash},
                        {"pooled_rmse_mm", result.pooled_rmse_mm},
                        {"per_shape", per_shape}};
}

}  // namespace softret
