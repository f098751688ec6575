#include <gtest/gtest.h>

#include <cmath>

#include "support.hpp"

using namespace regionscan;
using namespace regionscan::nn;

namespace {

Matrix random_matrix(Rng& rng, std::size_t r, std::size_t c) {
  Matrix m(r, c);
  for (auto& v : m.data) v = rng.uniform(-2.0, 2.0);
  return m;
}

std::vector<int> random_labels(Rng& rng, std::size_t n) {
  std::vector<int> y(n);
  for (auto& v : y) v = static_cast<int>(rng.below(2));
  return y;
}

double loss_of(const Matrix& x, const std::vector<int>& y, const ModelParams& p) {
  return bce_loss(forward(x, p, Mode::Train).predictions, y);
}

/// Max relative error between analytic and central-difference gradients.
double gradient_check(bool batch_norm) {
  Rng rng(batch_norm ? 11 : 12);
  const Matrix x = random_matrix(rng, 20, 8);
  const auto y = random_labels(rng, 20);
  NetworkConfig net{{8, 4, 1}, batch_norm, 0.0};
  ModelParams p = init_model(8, net, rng);
  if (batch_norm) {
    for (auto& l : p.layers) {
      if (!l.bn) continue;
      for (auto& g : l.bn->gamma) g = rng.uniform(0.5, 1.5);
      for (auto& b : l.bn->beta) b = rng.uniform(-0.5, 0.5);
    }
  }
  for (auto& l : p.layers)
    for (auto& b : l.bias) b = rng.uniform(-0.1, 0.1);
  const auto fwd = forward(x, p, Mode::Train);
  Gradients g = backward(fwd, y, p);

  const double h = 1e-5;
  double worst = 0.0;
  ModelParams probe = p;
  auto check = [&](std::vector<double>& param, const std::vector<double>& grad) {
    for (std::size_t k = 0; k < param.size(); ++k) {
      const double keep = param[k];
      param[k] = keep + h;
      const double up = loss_of(x, y, probe);
      param[k] = keep - h;
      const double down = loss_of(x, y, probe);
      param[k] = keep;
      const double numeric = (up - down) / (2 * h);
      const double denom = std::max({std::abs(numeric), std::abs(grad[k]), 1e-6});
      worst = std::max(worst, std::abs(numeric - grad[k]) / denom);
    }
  };
  for (std::size_t i = 0; i < probe.layers.size(); ++i) {
    auto& l = probe.layers[i];
    check(l.weight, g.layers[i].weight);
    check(l.bias, g.layers[i].bias);
    if (l.bn) {
      check(l.bn->gamma, g.layers[i].gamma);
      check(l.bn->beta, g.layers[i].beta);
    }
  }
  return worst;
}

}  // namespace

TEST(Scaler, StandardizesTrainingColumns) {
  Rng rng(1);
  Matrix x = random_matrix(rng, 50, 6);
  for (std::size_t r = 0; r < x.rows; ++r) x(r, 3) = 7.0;
  const auto s = fit_scaler(x);
  EXPECT_EQ(s.std[3], 1.0);
  const Matrix z = s.transform(x);
  for (std::size_t c = 0; c < 6; ++c) {
    double mean = 0, var = 0;
    for (std::size_t r = 0; r < z.rows; ++r) mean += z(r, c);
    mean /= 50;
    for (std::size_t r = 0; r < z.rows; ++r) var += (z(r, c) - mean) * (z(r, c) - mean);
    var /= 50;
    EXPECT_NEAR(mean, 0.0, 1e-12);
    EXPECT_NEAR(var, c == 3 ? 0.0 : 1.0, 1e-9);
  }
  EXPECT_THROW(fit_scaler(Matrix(0, 3)), EmptyDatasetError);
  EXPECT_THROW(s.transform(Matrix(1, 5)), ShapeError);
}

TEST(Network, ForwardMatchesHandComputation) {
  ModelParams p;
  p.input_width = 2;
  DenseLayer h{2, 2, {1.0, -1.0, 0.5, 2.0}, {0.0, -3.0}, std::nullopt};
  DenseLayer o{2, 1, {2.0, -1.0}, {0.25}, std::nullopt};
  p.layers = {h, o};
  const std::vector<double> x{3.0, 1.0};
  // hidden: relu(3-1)=2, relu(1.5+2-3)=0.5; output: sigmoid(4 - 0.5 + 0.25)
  EXPECT_NEAR(predict(x, p), 1.0 / (1.0 + std::exp(-3.75)), 1e-15);
  EXPECT_THROW(predict(std::vector<double>{1.0}, p), ShapeError);
}

TEST(Network, InferenceBatchNormUsesRunningStatistics) {
  ModelParams p;
  p.input_width = 1;
  DenseLayer h{1, 1, {1.0}, {0.0}, BatchNorm{{2.0}, {0.5}, {1.0}, {4.0}}};
  DenseLayer o{1, 1, {1.0}, {0.0}, std::nullopt};
  p.layers = {h, o};
  const double u = 2.0 * (5.0 - 1.0) / std::sqrt(4.0 + kBatchNormEpsilon) + 0.5;
  EXPECT_NEAR(predict(std::vector<double>{5.0}, p), sigmoid(u), 1e-15);
}

TEST(Network, BceAtOneHalfIsLn2) {
  const std::vector<double> a{0.5};
  const std::vector<int> y{1};
  EXPECT_NEAR(bce_loss(a, y), std::log(2.0), 1e-9);
  const std::vector<double> sure{1.0, 0.0};
  const std::vector<int> wrong{0, 1};
  EXPECT_TRUE(std::isfinite(bce_loss(sure, wrong)));
}

TEST(Network, GradientsMatchFiniteDifferences) {
  EXPECT_LT(gradient_check(false), 1e-4);
  EXPECT_LT(gradient_check(true), 1e-4);
}

TEST(Network, LiteralOutputDeltaScalesBySigmoidDerivative) {
  Rng rng(2);
  const Matrix x = random_matrix(rng, 5, 3);
  const auto y = random_labels(rng, 5);
  const ModelParams p = init_model(3, {{1}, false, 0.0}, rng);
  const auto fwd = forward(x, p, Mode::Train);
  const auto exact = backward(fwd, y, p, OutputDelta::Exact);
  const auto literal = backward(fwd, y, p, OutputDelta::Literal);
  double expect_exact = 0, expect_literal = 0;
  for (std::size_t r = 0; r < 5; ++r) {
    const double a = fwd.predictions[r];
    expect_exact += (a - y[r]) / 5.0;
    expect_literal += (a - y[r]) * a * (1 - a) / 5.0;
  }
  EXPECT_NEAR(exact.layers[0].bias[0], expect_exact, 1e-15);
  EXPECT_NEAR(literal.layers[0].bias[0], expect_literal, 1e-15);
}

TEST(Training, ZeroLearningRateLeavesWeightsUnchanged) {
  Rng rng(3);
  const Matrix x = random_matrix(rng, 40, 5);
  const auto y = random_labels(rng, 40);
  for (auto opt : {Optimizer::Sgd, Optimizer::Adam}) {
    TrainConfig cfg;
    cfg.learning_rate = 0.0;
    cfg.optimizer = opt;
    cfg.epochs = 3;
    cfg.batch_size = 16;
    const NetworkConfig net{{6, 1}, false, 0.2};
    Rng init(cfg.seed);
    const ModelParams before = init_model(5, net, init);
    EXPECT_TRUE(train(x, y, net, cfg) == before);
  }
}

TEST(Training, SingleSgdStepFollowsTheGradient) {
  Rng rng(4);
  const Matrix x = random_matrix(rng, 10, 4);
  const auto y = random_labels(rng, 10);
  ModelParams p = init_model(4, {{3, 1}, true, 0.0}, rng);
  const ModelParams before = p;
  const auto g = backward(forward(x, before, Mode::Train), y, before);
  TrainConfig cfg;
  cfg.optimizer = Optimizer::Sgd;
  cfg.learning_rate = 0.1;
  Trainer t(p, cfg);
  const double loss = t.step(x, y);
  EXPECT_NEAR(loss, loss_of(x, y, before), 1e-15);
  for (std::size_t i = 0; i < p.layers.size(); ++i) {
    for (std::size_t k = 0; k < p.layers[i].weight.size(); ++k)
      EXPECT_NEAR(p.layers[i].weight[k], before.layers[i].weight[k] - 0.1 * g.layers[i].weight[k], 1e-15);
    if (p.layers[i].bn) {
      for (std::size_t k = 0; k < p.layers[i].out; ++k) {
        EXPECT_NEAR(p.layers[i].bn->gamma[k], before.layers[i].bn->gamma[k] - 0.1 * g.layers[i].gamma[k], 1e-15);
        EXPECT_NE(p.layers[i].bn->running_mean[k], before.layers[i].bn->running_mean[k]);
      }
    }
  }
}

TEST(Training, SeparableToySetIsLearned) {
  Rng rng(5);
  Matrix x(200, 4);
  std::vector<int> y(200);
  for (std::size_t r = 0; r < 200; ++r) {
    y[r] = static_cast<int>(r % 2);
    for (std::size_t c = 0; c < 4; ++c) x(r, c) = rng.uniform(-1, 1) + (y[r] ? 2.0 : -2.0) * (c == 0);
  }
  for (auto opt : {Optimizer::Adam, Optimizer::Sgd}) {
    TrainConfig cfg;
    cfg.optimizer = opt;
    cfg.learning_rate = opt == Optimizer::Adam ? 0.01 : 0.5;
    cfg.epochs = 40;
    cfg.batch_size = 20;
    std::vector<double> losses;
    const auto p = train(x, y, {{8, 1}, true, 0.1}, cfg, &losses);
    EXPECT_LT(losses.back(), losses.front());
    const auto m = compute_metrics(predict(x, p), y);
    EXPECT_EQ(m.accuracy, 1.0);
  }
}

TEST(Training, SameSeedSameModel) {
  Rng rng(6);
  const Matrix x = random_matrix(rng, 60, 5);
  const auto y = random_labels(rng, 60);
  TrainConfig cfg;
  cfg.epochs = 4;
  cfg.batch_size = 16;
  const NetworkConfig net{{7, 3, 1}, true, 0.3};
  EXPECT_TRUE(train(x, y, net, cfg) == train(x, y, net, cfg));
  TrainConfig other = cfg;
  other.seed = 2;
  EXPECT_FALSE(train(x, y, net, other) == train(x, y, net, cfg));
}

TEST(Training, RejectsBadInput) {
  const NetworkConfig net{{2, 1}, false, 0.0};
  EXPECT_THROW(train(Matrix(0, 3), std::vector<int>{}, net, {}), EmptyDatasetError);
  EXPECT_THROW(train(Matrix(2, 3), std::vector<int>{0}, net, {}), ShapeError);
  EXPECT_THROW(train(Matrix(2, 3), std::vector<int>{0, 2}, net, {}), DataError);
  Rng rng(1);
  EXPECT_THROW(init_model(3, {{2, 2}, false, 0.0}, rng), ShapeError);
}

TEST(Metrics, ConfusionOracle) {
  std::vector<double> scores;
  std::vector<int> labels;
  auto add = [&](int n, double s, int y) {
    for (int k = 0; k < n; ++k) {
      scores.push_back(s);
      labels.push_back(y);
    }
  };
  add(9, 0.9, 1);  // TP
  add(1, 0.1, 1);  // FN
  add(1, 0.5, 0);  // FP (threshold is inclusive)
  add(9, 0.2, 0);  // TN
  const auto m = compute_metrics(scores, labels);
  EXPECT_EQ(m.tp, 9u);
  EXPECT_EQ(m.fp, 1u);
  EXPECT_EQ(m.fn, 1u);
  EXPECT_EQ(m.tn, 9u);
  EXPECT_DOUBLE_EQ(m.precision, 0.9);
  EXPECT_DOUBLE_EQ(m.recall, 0.9);
  EXPECT_DOUBLE_EQ(m.accuracy, 0.9);
  EXPECT_DOUBLE_EQ(m.fpr, 0.1);
  EXPECT_DOUBLE_EQ(m.f1, 0.9);
  const auto empty = compute_metrics(std::vector<double>{0.1}, std::vector<int>{0});
  EXPECT_EQ(empty.precision, 0.0);
  EXPECT_EQ(empty.recall, 0.0);
  EXPECT_EQ(empty.auc, 0.0);
}

TEST(Metrics, AucMatchesConcordanceOracle) {
  Rng rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 + rng.below(200);
    std::vector<double> s(n);
    std::vector<int> y(n);
    for (std::size_t k = 0; k < n; ++k) {
      s[k] = trial % 2 ? static_cast<double>(rng.below(5)) / 4.0 : rng.uniform01();
      y[k] = static_cast<int>(rng.below(2));
    }
    double concordant = 0, pairs = 0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        if (y[i] != 1 || y[j] != 0) continue;
        pairs += 1;
        concordant += s[i] > s[j] ? 1.0 : s[i] == s[j] ? 0.5 : 0.0;
      }
    }
    const double expected = pairs == 0 ? 0.0 : concordant / pairs;
    ASSERT_NEAR(roc_auc(s, y), expected, 1e-9) << "trial " << trial;
  }
}

TEST(ModelIo, RoundTripsAndValidates) {
  Rng rng(8);
  StoredModel m;
  m.params = init_model(5, {{4, 2, 1}, true, 0.2}, rng);
  m.scaler = fit_scaler(random_matrix(rng, 10, 5));
  m.network = {{4, 2, 1}, true, 0.2};
  const auto back = model_from_json(to_json(m));
  EXPECT_TRUE(back.params == m.params);
  EXPECT_TRUE(back.scaler == m.scaler);

  auto j = to_json(m);
  j["layers"][1]["in"] = 3;
  EXPECT_THROW(model_from_json(j), ShapeError);
  j = to_json(m);
  j["scaler"]["mean"].erase(0);
  EXPECT_THROW(model_from_json(j), ShapeError);
  j = to_json(m);
  j["format"] = "other";
  EXPECT_THROW(model_from_json(j), DataError);
  EXPECT_THROW(optimizer_from_string("rmsprop"), DataError);
}
