// controllers.hpp - low-level fingertip pressure controllers and their
// tracking benchmark. The primary controller inverts a learned forward model
// (pressure -> displacement MLP) by gradient descent through a sigmoid
// reparameterization of the pressure box; three baselines (linear least
// squares, k-nearest-neighbor, direct inverse MLP) share the same dataset.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <numbers>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "softret/finger_sim.hpp"
#include "softret/mlp.hpp"
#include "softret/svg.hpp"
#include "softret/util.hpp"

namespace softret {

// ---------------------------------------------------------------------------
// Learned forward model with per-component normalization.

struct ForwardModel {
  Mlp net;  // maps normalized pressures to normalized displacements
  Eigen::Vector3d mu_p{Eigen::Vector3d::Zero()}, sigma_p{Eigen::Vector3d::Ones()};
  Eigen::Vector3d mu_d{Eigen::Vector3d::Zero()}, sigma_d{Eigen::Vector3d::Ones()};
  std::uint64_t seed = 0;
  std::string dataset_hash;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double val_planar_rmse_m = 0.0;
};

inline Vec3 model_predict(const ForwardModel& m, const Eigen::Vector3d& pressure_kpa) {
  Eigen::Vector3d x = (pressure_kpa - m.mu_p).cwiseQuotient(m.sigma_p);
  Eigen::Vector3d y = m.net.forward(Eigen::VectorXd(x));
  return m.mu_d + m.sigma_d.cwiseProduct(y);
}

// d(prediction)/d(pressure), 3x3, in metric units.
inline Eigen::Matrix3d model_input_jacobian(const ForwardModel& m, const Eigen::Vector3d& pressure_kpa) {
  Eigen::Vector3d x = (pressure_kpa - m.mu_p).cwiseQuotient(m.sigma_p);
  Eigen::Matrix3d j = m.net.input_jacobian(Eigen::VectorXd(x));
  return m.sigma_d.asDiagonal() * j * m.sigma_p.cwiseInverse().asDiagonal();
}

inline ForwardModel train_forward(std::span<const PressureSample> dataset, const TrainOptions& opts) {
  if (dataset.size() < 50)
    throw std::invalid_argument("train_forward: need at least 50 samples, got " +
                                std::to_string(dataset.size()));
  const int n = static_cast<int>(dataset.size());
  Matrix p(3, n), d(3, n);
  for (int i = 0; i < n; ++i) {
    p.col(i) = dataset[static_cast<size_t>(i)].pressure_kpa;
    d.col(i) = dataset[static_cast<size_t>(i)].displacement;
  }
  ForwardModel model;
  model.seed = opts.seed;
  model.mu_p = p.rowwise().mean();
  model.mu_d = d.rowwise().mean();
  for (int k = 0; k < 3; ++k) {
    model.sigma_p[k] = std::sqrt((p.row(k).array() - model.mu_p[k]).square().mean());
    model.sigma_d[k] = std::sqrt((d.row(k).array() - model.mu_d[k]).square().mean());
    if (!(model.sigma_p[k] > 0.0))
      throw std::invalid_argument("train_forward: pressure component " + std::to_string(k + 1) +
                                  " has zero variance");
    if (!(model.sigma_d[k] > 0.0)) model.sigma_d[k] = 1.0;  // flat output component
  }
  Matrix pn = model.sigma_p.cwiseInverse().asDiagonal() * (p.colwise() - model.mu_p);
  Matrix dn = model.sigma_d.cwiseInverse().asDiagonal() * (d.colwise() - model.mu_d);

  model.net = Mlp(3, opts.hidden, 3, opts.seed);
  TrainReport report = mlp_train(model.net, pn, dn, opts);
  model.train_loss = report.train_loss;
  model.val_loss = report.val_loss;

  double planar_sq = 0.0;
  for (int idx : report.val_indices) {
    Vec3 pred = model_predict(model, p.col(idx));
    planar_sq += (pred.head<2>() - d.col(idx).head<2>()).squaredNorm();
  }
  model.val_planar_rmse_m = std::sqrt(planar_sq / std::max<size_t>(1, report.val_indices.size()));
  return model;
}

inline nlohmann::json model_to_json(const ForwardModel& m) {
  return nlohmann::json{
      {"net", mlp_to_json(m.net)},
      {"normalization",
       {{"mu_p", {m.mu_p[0], m.mu_p[1], m.mu_p[2]}},
        {"sigma_p", {m.sigma_p[0], m.sigma_p[1], m.sigma_p[2]}},
        {"mu_d", {m.mu_d[0], m.mu_d[1], m.mu_d[2]}},
        {"sigma_d", {m.sigma_d[0], m.sigma_d[1], m.sigma_d[2]}}}},
      {"metadata",
       {{"seed", m.seed},
        {"dataset_hash", m.dataset_hash},
        {"train_loss", m.train_loss},
        {"val_loss", m.val_loss},
        {"val_planar_rmse_m", m.val_planar_rmse_m}}}};
}

inline ForwardModel model_from_json(const nlohmann::json& j) {
  ForwardModel m;
  m.net = mlp_from_json(j.at("net"));
  auto vec3 = [](const nlohmann::json& arr) {
    return Eigen::Vector3d(arr[0].get<double>(), arr[1].get<double>(), arr[2].get<double>());
  };
  m.mu_p = vec3(j.at("normalization").at("mu_p"));
  m.sigma_p = vec3(j.at("normalization").at("sigma_p"));
  m.mu_d = vec3(j.at("normalization").at("mu_d"));
  m.sigma_d = vec3(j.at("normalization").at("sigma_d"));
  const auto& meta = j.at("metadata");
  m.seed = meta.value("seed", 0ull);
  m.dataset_hash = meta.value("dataset_hash", std::string{});
  m.train_loss = meta.value("train_loss", 0.0);
  m.val_loss = meta.value("val_loss", 0.0);
  m.val_planar_rmse_m = meta.value("val_planar_rmse_m", 0.0);
  return m;
}

// ---------------------------------------------------------------------------
// Inverse optimization: minimize the planar residual of the forward model over
// pressures, reparameterized through an elementwise sigmoid so iterates stay
// strictly inside the limits.

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline Eigen::Vector3d pressure_from_u(const Eigen::Vector3d& u, const PressureLimits& limits) {
  Eigen::Vector3d p;
  for (int k = 0; k < 3; ++k) p[k] = limits.min_kpa + (limits.max_kpa - limits.min_kpa) * sigmoid(u[k]);
  return p;
}

struct InvertOptions {
  int iters = 200;
  double lr = 0.05;
};

struct InvertResult {
  Eigen::Vector3d pressure_kpa{Eigen::Vector3d::Zero()};
  Eigen::Vector3d u{Eigen::Vector3d::Zero()};
  double objective = 0.0;  // squared planar residual at the returned pressures
};

// Gradient of |Pi_xy(f(p(u))) - target|^2 with respect to u.
inline Eigen::Vector3d invert_objective_gradient(const ForwardModel& model, const PressureLimits& limits,
                                                 const Vec2& target_xy, const Eigen::Vector3d& u,
                                                 double* objective_out = nullptr) {
  const Eigen::Vector3d p = pressure_from_u(u, limits);
  const Vec3 pred = model_predict(model, p);
  const Vec2 residual = pred.head<2>() - target_xy;
  if (objective_out) *objective_out = residual.squaredNorm();
  const Eigen::Matrix3d jac = model_input_jacobian(model, p);
  const Eigen::Vector3d grad_p = jac.topRows<2>().transpose() * (2.0 * residual);
  Eigen::Vector3d grad_u;
  for (int k = 0; k < 3; ++k) {
    const double s = sigmoid(u[k]);
    grad_u[k] = grad_p[k] * (limits.max_kpa - limits.min_kpa) * s * (1.0 - s);
  }
  return grad_u;
}

inline InvertResult invert(const ForwardModel& model, const PressureLimits& limits, const Vec2& target_xy,
                           const Eigen::Vector3d& warm_start_u = Eigen::Vector3d::Zero(),
                           const InvertOptions& opts = {}) {
  if (!target_xy.allFinite()) throw std::invalid_argument("invert: non-finite target");
  Eigen::Vector3d u = warm_start_u;
  Adam adam(opts.lr);
  Matrix m, v;
  for (int it = 0; it < opts.iters; ++it) {
    Eigen::Vector3d grad = invert_objective_gradient(model, limits, target_xy, u);
    Matrix gm = grad;
    Matrix um = u;
    adam.step(um, gm, m, v);
    adam.advance();
    u = um;
  }
  InvertResult result;
  result.u = u;
  result.pressure_kpa = pressure_from_u(u, limits);
  const Vec3 pred = model_predict(model, result.pressure_kpa);
  result.objective = (pred.head<2>() - target_xy).squaredNorm();
  return result;
}

// ---------------------------------------------------------------------------
// Controller interface shared by the benchmark.

class Controller {
 public:
  virtual ~Controller() = default;
  virtual std::string name() const = 0;
  virtual void reset() {}
  virtual PressureCommand command(const Vec2& target_xy) = 0;
};

// The inverse-optimization controller; warm-starts each solve from the
// previous waypoint's solution.
class InverseOptController : public Controller {
 public:
  InverseOptController(ForwardModel model, PressureLimits limits, InvertOptions opts = {})
      : model_(std::move(model)), limits_(limits), opts_(opts) {}

  std::string name() const override { return "inv-opt"; }
  void reset() override { last_u_ = Eigen::Vector3d::Zero(); }

  PressureCommand command(const Vec2& target_xy) override {
    InvertResult r = invert(model_, limits_, target_xy, last_u_, opts_);
    last_u_ = r.u;
    return PressureCommand{r.pressure_kpa};
  }

  const ForwardModel& model() const { return model_; }

 private:
  ForwardModel model_;
  PressureLimits limits_;
  InvertOptions opts_;
  Eigen::Vector3d last_u_{Eigen::Vector3d::Zero()};
};

// Least-squares linear map from planar displacement to pressures, clamped.
class LinearBaseline : public Controller {
 public:
  LinearBaseline(std::span<const PressureSample> dataset, PressureLimits limits) : limits_(limits) {
    if (dataset.empty()) throw std::invalid_argument("linear baseline: empty dataset");
    const int n = static_cast<int>(dataset.size());
    Matrix features(n, 3);  // [dx, dy, 1]
    Matrix targets(n, 3);
    for (int i = 0; i < n; ++i) {
      features(i, 0) = dataset[static_cast<size_t>(i)].displacement.x();
      features(i, 1) = dataset[static_cast<size_t>(i)].displacement.y();
      features(i, 2) = 1.0;
      targets.row(i) = dataset[static_cast<size_t>(i)].pressure_kpa.transpose();
    }
    coef_ = features.colPivHouseholderQr().solve(targets);
  }

  std::string name() const override { return "linear"; }

  PressureCommand command(const Vec2& target_xy) override {
    Eigen::RowVector3d f(target_xy.x(), target_xy.y(), 1.0);
    Eigen::Vector3d p = (f * coef_).transpose();
    for (int k = 0; k < 3; ++k) p[k] = std::clamp(p[k], limits_.min_kpa, limits_.max_kpa);
    return PressureCommand{p};
  }

  const Eigen::Matrix3d& coefficients() const { return coef_; }

 private:
  Eigen::Matrix3d coef_;  // rows: dx, dy, 1; cols: p1, p2, p3
  PressureLimits limits_;
};

// Mean pressure of the k nearest dataset displacements (planar metric).
// Distance ties break toward the lower dataset index.
class KnnBaseline : public Controller {
 public:
  KnnBaseline(std::vector<PressureSample> dataset, int k) : dataset_(std::move(dataset)), k_(k) {
    if (dataset_.empty()) throw std::invalid_argument("knn baseline: empty dataset");
    if (k_ < 1) throw std::invalid_argument("knn baseline: k must be >= 1");
    k_ = std::min<int>(k_, static_cast<int>(dataset_.size()));
  }

  std::string name() const override { return "knn"; }

  PressureCommand command(const Vec2& target_xy) override {
    std::vector<std::pair<double, int>> order;
    order.reserve(dataset_.size());
    for (size_t i = 0; i < dataset_.size(); ++i) {
      const Vec3& d = dataset_[i].displacement;
      order.emplace_back((Vec2(d.x(), d.y()) - target_xy).squaredNorm(), static_cast<int>(i));
    }
    std::nth_element(order.begin(), order.begin() + (k_ - 1), order.end());
    Eigen::Vector3d mean = Eigen::Vector3d::Zero();
    std::sort(order.begin(), order.begin() + k_);
    for (int i = 0; i < k_; ++i)
      mean += dataset_[static_cast<size_t>(order[static_cast<size_t>(i)].second)].pressure_kpa;
    return PressureCommand{mean / k_};
  }

 private:
  std::vector<PressureSample> dataset_;
  int k_;
};

// Direct inverse regression: planar displacement -> pressures through an MLP
// trained with the same machinery as the forward model, output clamped.
class DirectMlpBaseline : public Controller {
 public:
  DirectMlpBaseline(std::span<const PressureSample> dataset, PressureLimits limits, TrainOptions opts)
      : limits_(limits) {
    if (dataset.size() < 50)
      throw std::invalid_argument("direct-mlp baseline: need at least 50 samples");
    const int n = static_cast<int>(dataset.size());
    Matrix d(2, n), p(3, n);
    for (int i = 0; i < n; ++i) {
      d.col(i) = dataset[static_cast<size_t>(i)].displacement.head<2>();
      p.col(i) = dataset[static_cast<size_t>(i)].pressure_kpa;
    }
    mu_d_ = d.rowwise().mean();
    mu_p_ = p.rowwise().mean();
    for (int k = 0; k < 2; ++k) {
      sigma_d_[k] = std::sqrt((d.row(k).array() - mu_d_[k]).square().mean());
      if (!(sigma_d_[k] > 0.0))
        throw std::invalid_argument("direct-mlp baseline: displacement component has zero variance");
    }
    for (int k = 0; k < 3; ++k) {
      sigma_p_[k] = std::sqrt((p.row(k).array() - mu_p_[k]).square().mean());
      if (!(sigma_p_[k] > 0.0)) sigma_p_[k] = 1.0;
    }
    Matrix dn = sigma_d_.cwiseInverse().asDiagonal() * (d.colwise() - mu_d_);
    Matrix pn = sigma_p_.cwiseInverse().asDiagonal() * (p.colwise() - mu_p_);
    net_ = Mlp(2, opts.hidden, 3, opts.seed);
    TrainReport report = mlp_train(net_, dn, pn, opts);
    train_loss_ = report.train_loss;
    val_loss_ = report.val_loss;
  }

  std::string name() const override { return "direct-mlp"; }

  PressureCommand command(const Vec2& target_xy) override {
    Eigen::Vector2d x = (target_xy - mu_d_).cwiseQuotient(sigma_d_);
    Eigen::Vector3d y = net_.forward(Eigen::VectorXd(x));
    Eigen::Vector3d p = mu_p_ + sigma_p_.cwiseProduct(y);
    for (int k = 0; k < 3; ++k) p[k] = std::clamp(p[k], limits_.min_kpa, limits_.max_kpa);
    return PressureCommand{p};
  }

  double val_loss() const { return val_loss_; }
  double train_loss() const { return train_loss_; }

 private:
  Mlp net_;
  Eigen::Vector2d mu_d_{Eigen::Vector2d::Zero()}, sigma_d_{Eigen::Vector2d::Ones()};
  Eigen::Vector3d mu_p_{Eigen::Vector3d::Zero()}, sigma_p_{Eigen::Vector3d::Ones()};
  PressureLimits limits_;
  double train_loss_ = 0.0, val_loss_ = 0.0;
};

// ---------------------------------------------------------------------------
// Tracking benchmark.

struct TrackingReport {
  std::string controller;
  std::string shape;
  std::vector<double> errors_mm;          // per waypoint, loops concatenated
  std::vector<Vec2> reference;            // one loop
  std::vector<Vec2> executed;             // all loops
  double rmse_mm = 0.0;
  double mean_mm = 0.0;
  double std_mm = 0.0;
  double max_mm = 0.0;
  double dwell_time_s = 0.5;  // metadata only; the plant is quasi-static
};

inline void finalize_report(TrackingReport& report) {
  const size_t n = report.errors_mm.size();
  if (n == 0) throw std::invalid_argument("tracking report: no samples");
  double sum = 0.0, sum_sq = 0.0, max = 0.0;
  for (double e : report.errors_mm) {
    sum += e;
    sum_sq += e * e;
    max = std::max(max, e);
  }
  report.mean_mm = sum / static_cast<double>(n);
  report.rmse_mm = std::sqrt(sum_sq / static_cast<double>(n));
  report.max_mm = max;
  double var = 0.0;
  for (double e : report.errors_mm) var += (e - report.mean_mm) * (e - report.mean_mm);
  report.std_mm = std::sqrt(var / static_cast<double>(n));
}

// Execute a planar waypoint list on the simulated finger for a number of
// loops. Errors are waypoint-indexed planar distances in millimeters.
inline TrackingReport track(Controller& controller, std::span<const Vec2> reference,
                            const SpineConfig& plant, int loops = 1) {
  if (reference.empty()) throw std::invalid_argument("track: empty reference");
  if (loops < 1) throw std::invalid_argument("track: loops must be >= 1");
  TrackingReport report;
  report.controller = controller.name();
  report.reference.assign(reference.begin(), reference.end());
  controller.reset();
  for (int loop = 0; loop < loops; ++loop) {
    for (const Vec2& waypoint : reference) {
      PressureCommand cmd = controller.command(waypoint);
      const Vec3 executed = forward(cmd, plant).tip_displacement;
      report.executed.emplace_back(executed.x(), executed.y());
      report.errors_mm.push_back((executed.head<2>() - waypoint).norm() * 1000.0);
    }
  }
  finalize_report(report);
  return report;
}

// Planar reference shapes, n waypoints along the closed path.
inline std::vector<Vec2> shape_waypoints(const std::string& shape, int n, double scale,
                                         const Vec2& center = Vec2::Zero()) {
  if (n < 3) throw std::invalid_argument("shape_waypoints: need at least 3 waypoints");
  if (!(scale > 0.0)) throw std::invalid_argument("shape_waypoints: scale must be > 0");
  std::vector<Vec2> poly;
  if (shape == "circle") {
    std::vector<Vec2> pts;
    for (int i = 0; i < n; ++i) {
      const double a = 2.0 * std::numbers::pi * i / n;
      pts.push_back(center + scale * Vec2(std::cos(a), std::sin(a)));
    }
    return pts;
  } else if (shape == "square") {
    poly = {center + scale * Vec2(-1, -1), center + scale * Vec2(1, -1), center + scale * Vec2(1, 1),
            center + scale * Vec2(-1, 1)};
  } else if (shape == "rectangle") {
    poly = {center + scale * Vec2(-1, -0.5), center + scale * Vec2(1, -0.5),
            center + scale * Vec2(1, 0.5), center + scale * Vec2(-1, 0.5)};
  } else if (shape == "triangle") {
    poly = {center + scale * Vec2(0, 1), center + scale * Vec2(-0.866, -0.5),
            center + scale * Vec2(0.866, -0.5)};
  } else {
    throw std::invalid_argument("shape_waypoints: unknown shape: " + shape);
  }
  // Walk the polygon perimeter at uniform arc length.
  double perimeter = 0.0;
  for (size_t i = 0; i < poly.size(); ++i)
    perimeter += (poly[(i + 1) % poly.size()] - poly[i]).norm();
  std::vector<Vec2> pts;
  for (int i = 0; i < n; ++i) {
    double s = perimeter * i / n;
    size_t edge = 0;
    while (true) {
      double len = (poly[(edge + 1) % poly.size()] - poly[edge]).norm();
      if (s <= len || edge + 1 == poly.size()) {
        double t = std::min(1.0, s / len);
        pts.push_back(poly[edge] + t * (poly[(edge + 1) % poly.size()] - poly[edge]));
        break;
      }
      s -= len;
      ++edge;
    }
  }
  return pts;
}

inline const std::vector<std::string>& benchmark_shapes() {
  static const std::vector<std::string> shapes = {"square", "circle", "triangle", "rectangle"};
  return shapes;
}

// ---------------------------------------------------------------------------
// Report serialization.

inline nlohmann::json report_to_json(const TrackingReport& r) {
  nlohmann::json je = nlohmann::json::array();
  for (double e : r.errors_mm) je.push_back(e);
  nlohmann::json jref = nlohmann::json::array();
  for (const Vec2& p : r.reference) jref.push_back({p.x(), p.y()});
  nlohmann::json jexe = nlohmann::json::array();
  for (const Vec2& p : r.executed) jexe.push_back({p.x(), p.y()});
  return nlohmann::json{{"controller", r.controller}, {"shape", r.shape},
                        {"rmse_mm", r.rmse_mm},       {"mean_mm", r.mean_mm},
                        {"std_mm", r.std_mm},         {"max_mm", r.max_mm},
                        {"dwell_time_s", r.dwell_time_s},
                        {"errors_mm", je},            {"reference_m", jref},
                        {"executed_m", jexe}};
}

inline std::string report_to_csv(const TrackingReport& r) {
  std::string out = "index,ref_x_m,ref_y_m,exec_x_m,exec_y_m,error_mm\n";
  for (size_t i = 0; i < r.executed.size(); ++i) {
    const Vec2& ref = r.reference[i % r.reference.size()];
    out += std::to_string(i) + "," + format_double(ref.x()) + "," + format_double(ref.y()) + "," +
           format_double(r.executed[i].x()) + "," + format_double(r.executed[i].y()) + "," +
           format_double(r.errors_mm[i]) + "\n";
  }
  return out;
}

inline std::string report_to_svg(const TrackingReport& r) {
  SvgPlot plot(r.controller + " on " + r.shape, "x (m)", "y (m)");
  std::vector<std::pair<double, double>> ref;
  for (const Vec2& p : r.reference) ref.emplace_back(p.x(), p.y());
  if (!r.reference.empty()) ref.emplace_back(r.reference.front().x(), r.reference.front().y());
  plot.add_polyline(ref, "black", "reference");
  std::vector<std::pair<double, double>> exe;
  for (const Vec2& p : r.executed) exe.emplace_back(p.x(), p.y());
  plot.add_polyline(exe, "#d62728", "executed");
  return plot.render();
}

}  // namespace softret
