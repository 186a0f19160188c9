// mlp.hpp - small dense multilayer perceptron (two tanh hidden layers) with
// analytic backpropagation and an Adam optimizer. Training is single-threaded
// and fully determined by the seed.
#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

namespace softret {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

struct Mlp {
  Matrix w1, w2, w3;
  Vector b1, b2, b3;

  Mlp() = default;

  Mlp(int in_dim, int hidden, int out_dim, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    auto init = [&rng](Matrix& w, int rows, int cols) {
      const double a = std::sqrt(6.0 / (rows + cols));
      std::uniform_real_distribution<double> dist(-a, a);
      w.resize(rows, cols);
      for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) w(i, j) = dist(rng);
    };
    init(w1, hidden, in_dim);
    init(w2, hidden, hidden);
    init(w3, out_dim, hidden);
    b1 = Vector::Zero(hidden);
    b2 = Vector::Zero(hidden);
    b3 = Vector::Zero(out_dim);
  }

  int in_dim() const { return static_cast<int>(w1.cols()); }
  int hidden_dim() const { return static_cast<int>(w1.rows()); }
  int out_dim() const { return static_cast<int>(w3.rows()); }

  // Columns of x are samples.
  Matrix forward(const Matrix& x) const {
    Matrix a1 = ((w1 * x).colwise() + b1).array().tanh().matrix();
    Matrix a2 = ((w2 * a1).colwise() + b2).array().tanh().matrix();
    return (w3 * a2).colwise() + b3;
  }

  Vector forward(const Vector& x) const {
    Vector a1 = (w1 * x + b1).array().tanh().matrix();
    Vector a2 = (w2 * a1 + b2).array().tanh().matrix();
    return w3 * a2 + b3;
  }

  // Jacobian of the output with respect to the input at x (out_dim x in_dim).
  Matrix input_jacobian(const Vector& x) const {
    Vector a1 = (w1 * x + b1).array().tanh().matrix();
    Vector a2 = (w2 * a1 + b2).array().tanh().matrix();
    Matrix d1 = (1.0 - a1.array().square()).matrix().asDiagonal();
    Matrix d2 = (1.0 - a2.array().square()).matrix().asDiagonal();
    return w3 * d2 * w2 * d1 * w1;
  }
};

struct MlpGradients {
  Matrix w1, w2, w3;
  Vector b1, b2, b3;
};

// Mean squared error over the batch: (1/B) sum_i |y_i - t_i|^2.
inline double mlp_loss(const Mlp& net, const Matrix& x, const Matrix& t) {
  return (net.forward(x) - t).squaredNorm() / static_cast<double>(x.cols());
}

inline MlpGradients mlp_backprop(const Mlp& net, const Matrix& x, const Matrix& t, double* loss_out = nullptr) {
  const double batch = static_cast<double>(x.cols());
  Matrix z1 = (net.w1 * x).colwise() + net.b1;
  Matrix a1 = z1.array().tanh().matrix();
  Matrix z2 = (net.w2 * a1).colwise() + net.b2;
  Matrix a2 = z2.array().tanh().matrix();
  Matrix y = (net.w3 * a2).colwise() + net.b3;

  Matrix dy = 2.0 * (y - t) / batch;
  if (loss_out) *loss_out = (y - t).squaredNorm() / batch;

  MlpGradients g;
  g.w3 = dy * a2.transpose();
  g.b3 = dy.rowwise().sum();
  Matrix da2 = net.w3.transpose() * dy;
  Matrix dz2 = (da2.array() * (1.0 - a2.array().square())).matrix();
  g.w2 = dz2 * a1.transpose();
  g.b2 = dz2.rowwise().sum();
  Matrix da1 = net.w2.transpose() * dz2;
  Matrix dz1 = (da1.array() * (1.0 - a1.array().square())).matrix();
  g.w1 = dz1 * x.transpose();
  g.b1 = dz1.rowwise().sum();
  return g;
}

// Adam with bias correction.
class Adam {
 public:
  explicit Adam(double lr = 1e-3, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void step(Eigen::Ref<Matrix> param, const Matrix& grad, Matrix& m, Matrix& v) {
    if (m.size() == 0) {
      m = Matrix::Zero(param.rows(), param.cols());
      v = Matrix::Zero(param.rows(), param.cols());
    }
    m = beta1_ * m + (1.0 - beta1_) * grad;
    v = beta2_ * v + (1.0 - beta2_) * grad.array().square().matrix();
    const double bc1 = 1.0 - std::pow(beta1_, t_);
    const double bc2 = 1.0 - std::pow(beta2_, t_);
    param.array() -= lr_ * (m.array() / bc1) / ((v.array() / bc2).sqrt() + eps_);
  }

  void advance() { ++t_; }
  void set_lr(double lr) { lr_ = lr; }

 private:
  double lr_, beta1_, beta2_, eps_;
  double t_ = 1.0;
};

struct TrainOptions {
  int epochs = 600;
  int batch_size = 64;
  double lr = 3e-3;
  double lr_decay = 25.0;  // cosine decay down to lr / lr_decay; 1 disables
  std::uint64_t seed = 0;
  int hidden = 64;
  double val_fraction = 0.1;
};

struct TrainReport {
  double train_loss = 0.0;  // final epoch mean batch loss (normalized space)
  double val_loss = 0.0;    // final validation MSE (normalized space)
  std::vector<int> val_indices;
};

// Train on normalized data; columns of x/t are samples. Splits off a
// validation set, shuffles per epoch, runs minibatch Adam.
inline TrainReport mlp_train(Mlp& net, const Matrix& x, const Matrix& t, const TrainOptions& opts) {
  const int n = static_cast<int>(x.cols());
  if (n < 2) throw std::invalid_argument("mlp_train: need at least 2 samples");
  if (t.cols() != n) throw std::invalid_argument("mlp_train: target count mismatch");

  std::mt19937_64 rng(opts.seed ^ 0x5eedf00ddeadbeefull);
  std::vector<int> order(static_cast<size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);

  int n_val = std::min(n - 1, std::max(1, static_cast<int>(std::round(opts.val_fraction * n))));
  TrainReport report;
  report.val_indices.assign(order.begin(), order.begin() + n_val);
  std::vector<int> train_idx(order.begin() + n_val, order.end());

  Matrix xv(x.rows(), n_val), tv(t.rows(), n_val);
  for (int i = 0; i < n_val; ++i) {
    xv.col(i) = x.col(report.val_indices[static_cast<size_t>(i)]);
    tv.col(i) = t.col(report.val_indices[static_cast<size_t>(i)]);
  }

  Adam adam(opts.lr);
  Matrix mw1, vw1, mw2, vw2, mw3, vw3, mb1, vb1, mb2, vb2, mb3, vb3;
  const int n_train = static_cast<int>(train_idx.size());
  const int batch = std::max(1, std::min(opts.batch_size, n_train));

  const double lr_floor = opts.lr / std::max(1.0, opts.lr_decay);
  for (int epoch = 0; epoch < opts.epochs; ++epoch) {
    if (opts.lr_decay > 1.0 && opts.epochs > 1) {
      const double phase = static_cast<double>(epoch) / (opts.epochs - 1);
      adam.set_lr(lr_floor + 0.5 * (opts.lr - lr_floor) * (1.0 + std::cos(phase * 3.14159265358979323846)));
    }
    std::shuffle(train_idx.begin(), train_idx.end(), rng);
    double epoch_loss = 0.0;
    int n_batches = 0;
    for (int start = 0; start < n_train; start += batch) {
      const int count = std::min(batch, n_train - start);
      Matrix xb(x.rows(), count), tb(t.rows(), count);
      for (int i = 0; i < count; ++i) {
        xb.col(i) = x.col(train_idx[static_cast<size_t>(start + i)]);
        tb.col(i) = t.col(train_idx[static_cast<size_t>(start + i)]);
      }
      double loss = 0.0;
      MlpGradients g = mlp_backprop(net, xb, tb, &loss);
      epoch_loss += loss;
      ++n_batches;
      adam.step(net.w1, g.w1, mw1, vw1);
      adam.step(net.w2, g.w2, mw2, vw2);
      adam.step(net.w3, g.w3, mw3, vw3);
      adam.step(net.b1, g.b1, mb1, vb1);
      adam.step(net.b2, g.b2, mb2, vb2);
      adam.step(net.b3, g.b3, mb3, vb3);
      adam.advance();
    }
    report.train_loss = epoch_loss / std::max(1, n_batches);
  }
  report.val_loss = mlp_loss(net, xv, tv);
  return report;
}

// ---------------------------------------------------------------------------
// Serialization (row-major weight arrays).

inline nlohmann::json matrix_to_json(const Matrix& m) {
  nlohmann::json arr = nlohmann::json::array();
  for (int i = 0; i < m.rows(); ++i)
    for (int j = 0; j < m.cols(); ++j) arr.push_back(m(i, j));
  return arr;
}

inline Matrix matrix_from_json(const nlohmann::json& arr, int rows, int cols) {
  if (static_cast<int>(arr.size()) != rows * cols)
    throw std::invalid_argument("model: weight array size mismatch");
  Matrix m(rows, cols);
  int k = 0;
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = arr[static_cast<size_t>(k++)].get<double>();
  return m;
}

inline nlohmann::json mlp_to_json(const Mlp& net) {
  return nlohmann::json{
      {"shape", {{"in", net.in_dim()}, {"hidden", net.hidden_dim()}, {"out", net.out_dim()}}},
      {"w1", matrix_to_json(net.w1)}, {"b1", matrix_to_json(net.b1)},
      {"w2", matrix_to_json(net.w2)}, {"b2", matrix_to_json(net.b2)},
      {"w3", matrix_to_json(net.w3)}, {"b3", matrix_to_json(net.b3)}};
}

inline Mlp mlp_from_json(const nlohmann::json& j) {
  const int in = j.at("shape").at("in").get<int>();
  const int hidden = j.at("shape").at("hidden").get<int>();
  const int out = j.at("shape").at("out").get<int>();
  Mlp net;
  net.w1 = matrix_from_json(j.at("w1"), hidden, in);
  net.b1 = matrix_from_json(j.at("b1"), hidden, 1);
  net.w2 = matrix_from_json(j.at("w2"), hidden, hidden);
  net.b2 = matrix_from_json(j.at("b2"), hidden, 1);
  net.w3 = matrix_from_json(j.at("w3"), out, hidden);
  net.b3 = matrix_from_json(j.at("b3"), out, 1);
  return net;
}

}  // namespace softret
