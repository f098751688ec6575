#pragma once

// Fully connected binary classifier trained with mini-batch gradient descent.
//
// Hidden layer:  z = W a + b -> batch norm (optional) -> ReLU -> dropout
// Output layer:  z = W a + b -> sigmoid
//
// The loss is the mean binary cross-entropy over a batch. Sgd applies
// W -= lr * (summed per-sample gradient) / batch size; Adam applies the same
// gradient through first/second moment estimates.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "regionscan/classifier/matrix.hpp"
#include "regionscan/error.hpp"

namespace regionscan::nn {

/// Output widths of the thirteen-layer reference network.
inline const std::vector<std::size_t> kReferenceWidths{5608, 5096, 4584, 4072, 3560, 3048, 2536,
                                                   2024, 1012, 512,  256,  128,  1};

inline constexpr double kBatchNormEpsilon = 1e-5;
inline constexpr double kBatchNormMomentum = 0.1;
inline constexpr double kLossEpsilon = 1e-12;

enum class Optimizer { Sgd, Adam };
enum class Mode { Train, Infer };

/// How the output-layer error term is formed. Exact is d(BCE)/dz = a - y;
/// Literal multiplies that by sigmoid'(z) as the textbook update rule is
/// sometimes written.
enum class OutputDelta { Exact, Literal };

struct NetworkConfig {
  std::vector<std::size_t> widths = kReferenceWidths;
  bool batch_norm = true;
  double dropout = 0.2;
};

struct TrainConfig {
  std::size_t epochs = 12;
  std::size_t batch_size = 200;
  double learning_rate = 1e-3;
  Optimizer optimizer = Optimizer::Adam;
  std::uint64_t seed = 1;
  OutputDelta output_delta = OutputDelta::Exact;
  /// After training, replace the running batch-norm statistics with exact
  /// population statistics over the training set.
  bool recalibrate_batch_norm = true;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
};

struct BatchNorm {
  std::vector<double> gamma;
  std::vector<double> beta;
  std::vector<double> running_mean;
  std::vector<double> running_var;

  bool operator==(const BatchNorm&) const = default;
};

struct DenseLayer {
  std::size_t in = 0;
  std::size_t out = 0;
  std::vector<double> weight;  // out x in, row-major
  std::vector<double> bias;
  std::optional<BatchNorm> bn;

  double w(std::size_t j, std::size_t k) const { return weight[j * in + k]; }

  bool operator==(const DenseLayer&) const = default;
};

struct ModelParams {
  std::size_t input_width = 0;
  std::vector<DenseLayer> layers;
  double dropout = 0.0;

  std::vector<std::size_t> widths() const {
    std::vector<std::size_t> w;
    for (const auto& l : layers) w.push_back(l.out);
    return w;
  }

  bool operator==(const ModelParams&) const = default;
};

/// He-uniform weights (limit sqrt(6 / fan_in)), zero biases, identity batch norm.
inline ModelParams init_model(std::size_t input_width, const NetworkConfig& cfg, Rng& rng) {
  if (cfg.widths.empty() || cfg.widths.back() != 1) throw ShapeError("network: last layer width must be 1");
  if (input_width == 0) throw ShapeError("network: input width must be positive");
  if (!(cfg.dropout >= 0.0 && cfg.dropout < 1.0)) throw ShapeError("network: dropout must lie in [0, 1)");
  ModelParams p;
  p.input_width = input_width;
  p.dropout = cfg.dropout;
  std::size_t in = input_width;
  for (std::size_t i = 0; i < cfg.widths.size(); ++i) {
    const std::size_t out = cfg.widths[i];
    if (out == 0) throw ShapeError("network: zero-width layer");
    DenseLayer l;
    l.in = in;
    l.out = out;
    l.weight.resize(in * out);
    const double limit = std::sqrt(6.0 / static_cast<double>(in));
    for (auto& w : l.weight) w = rng.uniform(-limit, limit);
    l.bias.assign(out, 0.0);
    const bool hidden = i + 1 < cfg.widths.size();
    if (hidden && cfg.batch_norm) {
      l.bn = BatchNorm{std::vector<double>(out, 1.0), std::vector<double>(out, 0.0), std::vector<double>(out, 0.0),
                       std::vector<double>(out, 1.0)};
    }
    p.layers.push_back(std::move(l));
    in = out;
  }
  return p;
}

inline double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

/// Intermediate values of one layer for a batch.
struct LayerCache {
  Matrix input;   // activations entering the layer
  Matrix z;       // affine output
  Matrix xhat;    // normalized z (batch norm only)
  std::vector<double> batch_var;
  Matrix u;       // value fed to the activation
  Matrix mask;    // dropout keep-mask, already scaled by 1 / (1 - p)
  Matrix output;  // layer activation
};

struct ForwardResult {
  std::vector<LayerCache> layers;
  std::vector<double> predictions;
};

namespace detail {

/// out = in * W^T + b
inline Matrix affine(const Matrix& in, const DenseLayer& l) {
  Matrix out(in.rows, l.out);
  for (std::size_t r = 0; r < in.rows; ++r) {
    const double* x = in.data.data() + r * in.cols;
    for (std::size_t j = 0; j < l.out; ++j) {
      const double* w = l.weight.data() + j * l.in;
      double s = l.bias[j];
      for (std::size_t k = 0; k < l.in; ++k) s += w[k] * x[k];
      out(r, j) = s;
    }
  }
  return out;
}

}  // namespace detail

/// Batch forward pass. In Train mode batch norm uses batch statistics (and
/// updates the running ones when `params` is mutable via `update_running`),
/// and dropout draws masks from `rng`.
inline ForwardResult forward(const Matrix& x, const ModelParams& params, Mode mode, Rng* rng = nullptr,
                             ModelParams* update_running = nullptr) {
  if (x.cols != params.input_width) {
    throw ShapeError("forward: input width " + std::to_string(x.cols) + " does not match model input width " +
                     std::to_string(params.input_width));
  }
  if (x.rows == 0) throw EmptyDatasetError("forward: empty batch");
  ForwardResult res;
  res.layers.reserve(params.layers.size());
  const Matrix* in = &x;
  const double n = static_cast<double>(x.rows);
  for (std::size_t i = 0; i < params.layers.size(); ++i) {
    const DenseLayer& l = params.layers[i];
    const bool last = i + 1 == params.layers.size();
    LayerCache c;
    c.input = *in;
    c.z = detail::affine(*in, l);
    if (last) {
      c.output = Matrix(c.z.rows, c.z.cols);
      for (std::size_t k = 0; k < c.z.data.size(); ++k) c.output.data[k] = sigmoid(c.z.data[k]);
      res.layers.push_back(std::move(c));
      break;
    }
    if (l.bn) {
      c.xhat = Matrix(c.z.rows, c.z.cols);
      c.u = Matrix(c.z.rows, c.z.cols);
      c.batch_var.assign(l.out, 0.0);
      for (std::size_t j = 0; j < l.out; ++j) {
        double mean = 0.0, var = 0.0;
        if (mode == Mode::Train) {
          for (std::size_t r = 0; r < c.z.rows; ++r) mean += c.z(r, j);
          mean /= n;
          for (std::size_t r = 0; r < c.z.rows; ++r) var += (c.z(r, j) - mean) * (c.z(r, j) - mean);
          var /= n;
          if (update_running) {
            auto& bn = *update_running->layers[i].bn;
            const double unbiased = c.z.rows > 1 ? var * n / (n - 1.0) : var;
            bn.running_mean[j] = (1.0 - kBatchNormMomentum) * bn.running_mean[j] + kBatchNormMomentum * mean;
            bn.running_var[j] = (1.0 - kBatchNormMomentum) * bn.running_var[j] + kBatchNormMomentum * unbiased;
          }
        } else {
          mean = l.bn->running_mean[j];
          var = l.bn->running_var[j];
        }
        c.batch_var[j] = var;
        const double inv = 1.0 / std::sqrt(var + kBatchNormEpsilon);
        for (std::size_t r = 0; r < c.z.rows; ++r) {
          c.xhat(r, j) = (c.z(r, j) - mean) * inv;
          c.u(r, j) = l.bn->gamma[j] * c.xhat(r, j) + l.bn->beta[j];
        }
      }
    } else {
      c.u = c.z;
    }
    c.output = Matrix(c.u.rows, c.u.cols);
    for (std::size_t k = 0; k < c.u.data.size(); ++k) c.output.data[k] = std::max(0.0, c.u.data[k]);
    if (mode == Mode::Train && params.dropout > 0.0) {
      if (!rng) throw Error("forward: dropout in train mode needs a generator");
      const double keep = 1.0 - params.dropout;
      c.mask = Matrix(c.u.rows, c.u.cols);
      for (std::size_t k = 0; k < c.mask.data.size(); ++k) {
        c.mask.data[k] = rng->uniform01() < keep ? 1.0 / keep : 0.0;
        c.output.data[k] *= c.mask.data[k];
      }
    }
    res.layers.push_back(std::move(c));
    in = &res.layers.back().output;
  }
  const Matrix& out = res.layers.back().output;
  res.predictions.assign(out.data.begin(), out.data.end());
  return res;
}

/// Inference for one feature row (already scaled).
inline double predict(std::span<const double> x, const ModelParams& params) {
  Matrix m(1, x.size());
  std::copy(x.begin(), x.end(), m.data.begin());
  return forward(m, params, Mode::Infer).predictions.front();
}

inline std::vector<double> predict(const Matrix& x, const ModelParams& params) {
  return forward(x, params, Mode::Infer).predictions;
}

/// Mean binary cross-entropy with predictions clamped to [eps, 1 - eps].
inline double bce_loss(std::span<const double> predictions, std::span<const int> labels) {
  if (predictions.size() != labels.size()) throw ShapeError("bce_loss: length mismatch");
  if (predictions.empty()) return 0.0;
  double sum = 0.0;
  for (std::size_t k = 0; k < predictions.size(); ++k) {
    const double a = std::clamp(predictions[k], kLossEpsilon, 1.0 - kLossEpsilon);
    sum += labels[k] ? std::log(a) : std::log(1.0 - a);
  }
  return -sum / static_cast<double>(predictions.size());
}

/// Gradient of the batch loss, shaped like ModelParams.
struct Gradients {
  struct Layer {
    std::vector<double> weight;
    std::vector<double> bias;
    std::vector<double> gamma;
    std::vector<double> beta;
  };
  std::vector<Layer> layers;
};

/// Back-propagates the mean batch loss through the cached forward pass.
inline Gradients backward(const ForwardResult& fwd, std::span<const int> labels, const ModelParams& params,
                          OutputDelta output_delta = OutputDelta::Exact) {
  const std::size_t L = params.layers.size();
  const std::size_t rows = fwd.predictions.size();
  if (labels.size() != rows) throw ShapeError("backward: label count does not match batch size");
  const double n = static_cast<double>(rows);
  Gradients g;
  g.layers.resize(L);

  // dL/dz of the output layer.
  Matrix dz(rows, 1);
  for (std::size_t r = 0; r < rows; ++r) {
    const double a = fwd.predictions[r];
    double d = a - static_cast<double>(labels[r]);
    if (output_delta == OutputDelta::Literal) d *= a * (1.0 - a);
    dz(r, 0) = d / n;
  }

  for (std::size_t ii = L; ii-- > 0;) {
    const DenseLayer& l = params.layers[ii];
    const LayerCache& c = fwd.layers[ii];
    auto& gl = g.layers[ii];

    if (ii + 1 < L) {
      // dz currently holds dL/d(output) of this hidden layer.
      Matrix du(rows, l.out);
      for (std::size_t k = 0; k < du.data.size(); ++k) {
        double d = dz.data[k];
        if (!c.mask.data.empty()) d *= c.mask.data[k];
        du.data[k] = c.u.data[k] > 0.0 ? d : 0.0;
      }
      if (l.bn) {
        gl.gamma.assign(l.out, 0.0);
        gl.beta.assign(l.out, 0.0);
        Matrix dzz(rows, l.out);
        for (std::size_t j = 0; j < l.out; ++j) {
          double sum_dx = 0.0, sum_dx_xhat = 0.0;
          for (std::size_t r = 0; r < rows; ++r) {
            gl.gamma[j] += du(r, j) * c.xhat(r, j);
            gl.beta[j] += du(r, j);
            const double dx = du(r, j) * l.bn->gamma[j];
            sum_dx += dx;
            sum_dx_xhat += dx * c.xhat(r, j);
          }
          const double inv = 1.0 / std::sqrt(c.batch_var[j] + kBatchNormEpsilon);
          for (std::size_t r = 0; r < rows; ++r) {
            const double dx = du(r, j) * l.bn->gamma[j];
            dzz(r, j) = inv / n * (n * dx - sum_dx - c.xhat(r, j) * sum_dx_xhat);
          }
        }
        dz = std::move(dzz);
      } else {
        dz = std::move(du);
      }
    }

    gl.weight.assign(l.out * l.in, 0.0);
    gl.bias.assign(l.out, 0.0);
    for (std::size_t r = 0; r < rows; ++r) {
      const double* a = c.input.data.data() + r * l.in;
      for (std::size_t j = 0; j < l.out; ++j) {
        const double d = dz(r, j);
        if (d == 0.0) continue;
        gl.bias[j] += d;
        double* gw = gl.weight.data() + j * l.in;
        for (std::size_t k = 0; k < l.in; ++k) gw[k] += d * a[k];
      }
    }
    if (ii == 0) break;
    Matrix da(rows, l.in);
    for (std::size_t r = 0; r < rows; ++r) {
      double* out = da.data.data() + r * l.in;
      for (std::size_t j = 0; j < l.out; ++j) {
        const double d = dz(r, j);
        if (d == 0.0) continue;
        const double* w = l.weight.data() + j * l.in;
        for (std::size_t k = 0; k < l.in; ++k) out[k] += d * w[k];
      }
    }
    dz = std::move(da);
  }
  return g;
}

namespace detail {

/// Visits (parameter, gradient) vector pairs in a fixed order.
template <typename F>
void for_each_param(ModelParams& p, Gradients& g, F&& f) {
  for (std::size_t i = 0; i < p.layers.size(); ++i) {
    auto& l = p.layers[i];
    auto& gl = g.layers[i];
    f(l.weight, gl.weight);
    f(l.bias, gl.bias);
    if (l.bn) {
      f(l.bn->gamma, gl.gamma);
      f(l.bn->beta, gl.beta);
    }
  }
}

}  // namespace detail

/// Replaces running batch-norm statistics with exact population statistics
/// of `x` (layer by layer, each layer seeing the recalibrated layers below).
inline void recalibrate_batch_norm(ModelParams& params, const Matrix& x) {
  Matrix a = x;
  const double n = static_cast<double>(x.rows);
  for (std::size_t i = 0; i + 1 < params.layers.size(); ++i) {
    DenseLayer& l = params.layers[i];
    Matrix z = detail::affine(a, l);
    if (l.bn) {
      for (std::size_t j = 0; j < l.out; ++j) {
        double mean = 0.0, var = 0.0;
        for (std::size_t r = 0; r < z.rows; ++r) mean += z(r, j);
        mean /= n;
        for (std::size_t r = 0; r < z.rows; ++r) var += (z(r, j) - mean) * (z(r, j) - mean);
        var /= n;
        l.bn->running_mean[j] = mean;
        l.bn->running_var[j] = var;
        const double inv = 1.0 / std::sqrt(var + kBatchNormEpsilon);
        for (std::size_t r = 0; r < z.rows; ++r) z(r, j) = l.bn->gamma[j] * (z(r, j) - mean) * inv + l.bn->beta[j];
      }
    }
    for (auto& v : z.data) v = std::max(0.0, v);
    a = std::move(z);
  }
}

/// Optimizer state carried across batches.
class Trainer {
 public:
  Trainer(ModelParams& params, const TrainConfig& cfg) : params_(params), cfg_(cfg), rng_(cfg.seed ^ 0x9e3779b97f4a7c15ULL) {}

  /// One update on a batch; returns the batch loss before the update.
  double step(const Matrix& x, std::span<const int> y) {
    auto fwd = forward(x, params_, Mode::Train, &rng_, &params_);
    const double loss = bce_loss(fwd.predictions, y);
    auto grads = backward(fwd, y, params_, cfg_.output_delta);
    apply(grads);
    return loss;
  }

  /// Full training run over (x, y); returns mean loss per epoch.
  std::vector<double> fit(const Matrix& x, std::span<const int> y) {
    if (x.rows == 0) throw EmptyDatasetError("train: no samples");
    if (y.size() != x.rows) throw ShapeError("train: label count does not match sample count");
    if (cfg_.batch_size == 0) throw ShapeError("train: batch size must be positive");
    for (int label : y)
      if (label != 0 && label != 1) throw DataError("train: labels must be 0 or 1");
    std::vector<double> epoch_loss;
    std::vector<std::size_t> order(x.rows);
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t e = 0; e < cfg_.epochs; ++e) {
      rng_.shuffle(order);
      double total = 0.0;
      for (std::size_t start = 0; start < order.size(); start += cfg_.batch_size) {
        const std::size_t end = std::min(order.size(), start + cfg_.batch_size);
        std::span<const std::size_t> idx(order.data() + start, end - start);
        const Matrix xb = x.select_rows(idx);
        std::vector<int> yb;
        yb.reserve(idx.size());
        for (std::size_t k : idx) yb.push_back(y[k]);
        total += step(xb, yb) * static_cast<double>(idx.size());
      }
      epoch_loss.push_back(total / static_cast<double>(x.rows));
    }
    if (cfg_.recalibrate_batch_norm) recalibrate_batch_norm(params_, x);
    return epoch_loss;
  }

 private:
  void apply(Gradients& g) {
    const double lr = cfg_.learning_rate;
    if (cfg_.optimizer == Optimizer::Sgd) {
      detail::for_each_param(params_, g, [&](std::vector<double>& p, std::vector<double>& d) {
        for (std::size_t k = 0; k < p.size(); ++k) p[k] -= lr * d[k];
      });
      return;
    }
    ++t_;
    std::size_t slot = 0;
    const double b1 = cfg_.adam_beta1, b2 = cfg_.adam_beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
    detail::for_each_param(params_, g, [&](std::vector<double>& p, std::vector<double>& d) {
      if (slot == m_.size()) {
        m_.emplace_back(p.size(), 0.0);
        v_.emplace_back(p.size(), 0.0);
      }
      auto& m = m_[slot];
      auto& v = v_[slot];
      for (std::size_t k = 0; k < p.size(); ++k) {
        m[k] = b1 * m[k] + (1.0 - b1) * d[k];
        v[k] = b2 * v[k] + (1.0 - b2) * d[k] * d[k];
        p[k] -= lr * (m[k] / c1) / (std::sqrt(v[k] / c2) + cfg_.adam_epsilon);
      }
      ++slot;
    });
  }

  ModelParams& params_;
  TrainConfig cfg_;
  Rng rng_;
  std::uint64_t t_ = 0;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
};

/// Initializes a network from `train.seed` and trains it on (x, y).
inline ModelParams train(const Matrix& x, std::span<const int> y, const NetworkConfig& net, const TrainConfig& cfg,
                         std::vector<double>* epoch_loss = nullptr) {
  if (x.rows == 0) throw EmptyDatasetError("train: no samples");
  Rng init(cfg.seed);
  ModelParams params = init_model(x.cols, net, init);
  Trainer trainer(params, cfg);
  auto losses = trainer.fit(x, y);
  if (epoch_loss) *epoch_loss = std::move(losses);
  return params;
}

}  // namespace regionscan::nn
