#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "mmhs/emotion_mtl.hpp"
#include "mmhs/errors.hpp"

using namespace mmhs;
using namespace mmhs::emotion;

namespace {

MtlConfig small_config(int input_dim, std::uint64_t seed = 7) {
  auto c = MtlConfig::defaults(features::RepresentationKind::F1);
  c.input_dim = input_dim;
  c.shared_layer_sizes = {24, 16};
  c.head_size = 10;
  c.rng_seed = seed;
  return c;
}

features::FeatureScaler identity_scaler(int dim) {
  return features::FeatureScaler(std::vector<double>(static_cast<std::size_t>(dim), -1.0),
                                 std::vector<double>(static_cast<std::size_t>(dim), 1.0));
}

Eigen::MatrixXd random_matrix(Eigen::Index r, Eigen::Index c, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> d(lo, hi);
  Eigen::MatrixXd m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = d(rng);
  return m;
}

std::vector<LabeledFeatures> linear_dataset(int n, int dim, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  std::vector<LabeledFeatures> out;
  for (int i = 0; i < n; ++i) {
    LabeledFeatures s;
    s.id = "s" + std::to_string(i);
    s.features.resize(static_cast<std::size_t>(dim));
    for (double& v : s.features) v = d(rng);
    const double a = s.features[0], b = s.features[1], c = s.features[2];
    s.target = {0.5 + 0.2 * a, 0.5 + 0.15 * b - 0.1 * a, 0.5 + 0.1 * c + 0.1 * b};
    out.push_back(std::move(s));
  }
  return out;
}

// Slot-wise flatten of gradients into one vector.
double max_abs(const nn::LayerGradients& g) {
  return std::max(g.weights.cwiseAbs().maxCoeff(), g.biases.cwiseAbs().maxCoeff());
}

}  // namespace

TEST(MtlLoss, PerfectPredictionIsZero) {
  const EmotionAttributes p{0.3, 0.6, 0.9};
  const auto l = mtl_loss(p, p, LossWeights{});
  EXPECT_EQ(l.total, 0.0);
  EXPECT_EQ(l.valence, 0.0);
  EXPECT_EQ(l.arousal, 0.0);
  EXPECT_EQ(l.dominance, 0.0);
}

TEST(MtlLoss, EqualTaskLossesScaleBySumOfWeights) {
  const auto l = mtl_loss(EmotionAttributes{0.5, 0.5, 0.5}, EmotionAttributes{0.2, 0.8, 0.2}, LossWeights{0.3, 0.3, 0.3});
  EXPECT_NEAR(l.total, 0.9 * 0.09, 1e-15);
}

TEST(MtlLoss, TableWeightsOnGivenTaskLosses) {
  // Errors of 1, sqrt(2), sqrt(3) give per-task losses 1, 2, 3.
  const EmotionAttributes target{0.0, 0.0, 0.0};
  const EmotionAttributes pred{1.0, std::sqrt(2.0), std::sqrt(3.0)};
  const auto l = mtl_loss(pred, target, LossWeights{0.2, 0.1, 0.2});
  EXPECT_NEAR(l.valence, 1.0, 1e-15);
  EXPECT_NEAR(l.arousal, 2.0, 1e-15);
  EXPECT_NEAR(l.dominance, 3.0, 1e-15);
  EXPECT_NEAR(l.total, 1.0, 1e-15);
}

TEST(MtlLoss, DecompositionIsExactOnRandomBatches) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> d(0.0, 1.0);
  for (const auto& w : loss_weight_grid()) {
    std::vector<EmotionAttributes> p(7), t(7);
    for (int i = 0; i < 7; ++i) {
      p[i] = {d(rng), d(rng), d(rng)};
      t[i] = {d(rng), d(rng), d(rng)};
    }
    const auto l = mtl_loss(p, t, w);
    EXPECT_EQ(l.total, w.alpha * l.valence + w.beta * l.arousal + w.gamma * l.dominance);
  }
}

TEST(LossWeights, GridEnumeration) {
  int count = 0;
  for (int a = 1; a <= 10; ++a)
    for (int b = 1; b <= 10; ++b)
      for (int c = 1; c <= 10; ++c) count += a + b + c <= 10;
  const auto grid = loss_weight_grid();
  EXPECT_EQ(static_cast<int>(grid.size()), count);
  EXPECT_EQ(count, 120);
  for (const auto& w : grid) {
    EXPECT_LE(w.alpha + w.beta + w.gamma, 1.0 + 1e-12);
    EXPECT_NO_THROW(w.validate());
  }
  EXPECT_THROW((LossWeights{0.5, 0.5, 0.5}.validate()), ValidationError);
  EXPECT_THROW((LossWeights{0.0, 0.5, 0.5}.validate()), ValidationError);
  EXPECT_THROW((LossWeights{0.15, 0.1, 0.1}.validate()), ValidationError);
}

TEST(MtlModel, DefaultsCarryTunedHyperparameters) {
  const auto f1 = MtlConfig::defaults(features::RepresentationKind::F1);
  EXPECT_EQ(f1.max_epochs, 30);
  EXPECT_EQ(f1.learning_rate, 1e-4);
  EXPECT_EQ(f1.learning_decay, 0.99);
  EXPECT_EQ(f1.l2_coefficient, 1e-7);
  EXPECT_EQ(f1.batch_size, 32);
  EXPECT_EQ(f1.weights.alpha, 0.2);
  EXPECT_EQ(f1.weights.beta, 0.1);
  EXPECT_EQ(f1.weights.gamma, 0.2);
  EXPECT_EQ(f1.resolved_input_dim(), 136);
  const auto f2 = MtlConfig::defaults(features::RepresentationKind::F2);
  EXPECT_EQ(f2.max_epochs, 18);
  EXPECT_EQ(f2.learning_rate, 1e-3);
  EXPECT_EQ(f2.learning_decay, 0.96);
  EXPECT_EQ(f2.l2_coefficient, 1e-9);
  EXPECT_EQ(f2.batch_size, 128);
  EXPECT_EQ(f2.weights.alpha, 0.1);
  EXPECT_EQ(f2.weights.beta, 0.1);
  EXPECT_EQ(f2.weights.gamma, 0.2);
  EXPECT_EQ(f2.resolved_input_dim(), 1360);
  EXPECT_EQ(f2.head_size, 170);
  EXPECT_EQ(f2.dropout_rate, 0.2);
}

TEST(MtlModel, EmbeddingIs510AtDefaultHeadSize) {
  auto c = MtlConfig::defaults(features::RepresentationKind::F2);
  c.shared_layer_sizes = {32, 16};
  MtlModel model(c, identity_scaler(1360));
  const features::FeatureRepresentation rep{features::RepresentationKind::F2, std::vector<double>(1360, 0.3)};
  const auto e = extract_speech_embedding(model, rep);
  EXPECT_EQ(e.values.size(), 510u);
  for (double v : e.values) EXPECT_GE(v, 0.0);
  const features::FeatureRepresentation bad{features::RepresentationKind::F2, std::vector<double>(136, 0.0)};
  EXPECT_THROW(extract_speech_embedding(model, bad), DimensionError);
  EXPECT_THROW(predict_attributes(model, bad), DimensionError);
}

TEST(MtlModel, EmbeddingMatchesHeadActivationsInOrder) {
  MtlModel model(small_config(6), identity_scaler(6));
  const std::vector<double> x{0.1, -0.2, 0.3, 0.9, -0.5, 0.0};
  const auto e = model.embed(x);
  const Eigen::VectorXd in = Eigen::Map<const Eigen::VectorXd>(x.data(), 6);
  const auto& L = model.layers();
  Eigen::VectorXd h = (L[0].weights * in + L[0].biases).cwiseMax(0.0);
  h = (L[1].weights * h + L[1].biases).cwiseMax(0.0);
  for (std::size_t t = 0; t < 3; ++t) {
    const Eigen::VectorXd head = (L[MtlModel::head_index(t)].weights * h + L[MtlModel::head_index(t)].biases).cwiseMax(0.0);
    for (Eigen::Index j = 0; j < head.size(); ++j) EXPECT_NEAR(e.values[t * 10 + static_cast<std::size_t>(j)], head(j), 1e-12);
  }
}

TEST(MtlModel, ZeroWeightsPredictOneHalfAndEmbedZero) {
  MtlModel model(small_config(5), identity_scaler(5));
  for (auto& l : model.mutable_layers()) {
    l.weights.setZero();
    l.biases.setZero();
  }
  const auto p = model.predict(std::vector<double>{1, 2, 3, 4, 5});
  EXPECT_EQ(p.valence, 0.5);
  EXPECT_EQ(p.arousal, 0.5);
  EXPECT_EQ(p.dominance, 0.5);
  for (double v : model.embed(std::vector<double>{1, 2, 3, 4, 5}).values) EXPECT_EQ(v, 0.0);
}

TEST(MtlModel, OutputsStayInsideUnitInterval) {
  MtlModel model(small_config(4, 99), identity_scaler(4));
  const auto x = random_matrix(4, 50, 5, -30.0, 30.0);
  for (Eigen::Index i = 0; i < x.cols(); ++i) {
    const auto p = model.predict(std::vector<double>(x.col(i).data(), x.col(i).data() + 4));
    for (double v : p.as_array()) {
      EXPECT_GT(v, 0.0);
      EXPECT_LT(v, 1.0);
    }
  }
}

TEST(MtlModel, HardParameterSharing) {
  MtlModel model(small_config(6, 3), identity_scaler(6));
  const std::vector<double> x{0.4, -0.1, 0.2, 0.7, -0.6, 0.3};
  const auto base = model.predict(x);

  MtlModel head_perturbed = model;
  head_perturbed.mutable_layers()[MtlModel::head_index(0)].weights.array() += 0.5;
  const auto p1 = head_perturbed.predict(x);
  EXPECT_NE(p1.valence, base.valence);
  EXPECT_EQ(p1.arousal, base.arousal);
  EXPECT_EQ(p1.dominance, base.dominance);

  MtlModel trunk_perturbed = model;
  trunk_perturbed.mutable_layers()[1].weights.array() += 0.5;
  const auto p2 = trunk_perturbed.predict(x);
  EXPECT_NE(p2.valence, base.valence);
  EXPECT_NE(p2.arousal, base.arousal);
  EXPECT_NE(p2.dominance, base.dominance);
}

TEST(MtlGradients, ZeroGammaLeavesDominanceHeadUntouched) {
  MtlModel model(small_config(5, 4), identity_scaler(5));
  const auto x = random_matrix(5, 8, 6);
  const auto y = random_matrix(3, 8, 7, 0.0, 1.0);
  const auto pass = mtl_loss_and_gradients(model.layers(), x, y, LossWeights{0.5, 0.5, 0.0}, 0.0);
  EXPECT_EQ(max_abs(pass.gradients[MtlModel::head_index(2)]), 0.0);
  EXPECT_EQ(max_abs(pass.gradients[MtlModel::output_index(2)]), 0.0);
  EXPECT_GT(max_abs(pass.gradients[MtlModel::head_index(0)]), 0.0);
  EXPECT_GT(max_abs(pass.gradients[0]), 0.0);
}

TEST(MtlGradients, FiniteDifferenceCheck) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    MtlModel model(small_config(5, 50 + seed), identity_scaler(5));
    auto layers = model.layers();
    const auto x = random_matrix(5, 6, 60 + seed);
    const auto y = random_matrix(3, 6, 70 + seed, 0.0, 1.0);
    const LossWeights w{0.2, 0.1, 0.2};
    const double l2 = 1e-3;
    const auto pass = mtl_loss_and_gradients(layers, x, y, w, l2);
    EXPECT_NEAR(pass.loss, mtl_objective(layers, x, y, w, l2), 1e-14);
    const double err = nn::grad_check(
        layers, [&](std::span<const nn::DenseLayer> p) { return mtl_objective(p, x, y, w, l2); }, pass.gradients);
    EXPECT_LT(err, 1e-4) << "seed " << seed;
  }
}

TEST(TrainMtl, MemorizesSingleSample) {
  auto c = small_config(8, 11);
  c.max_epochs = 400;
  c.learning_rate = 1e-3;
  c.learning_decay = 1.0;
  LabeledFeatures s{"only", {0.1, -0.4, 0.8, 0.0, 0.3, -0.9, 0.5, 0.2}, {0.3, 0.6, 0.8}};
  const std::vector<LabeledFeatures> data{s};
  const auto result = train_mtl(c, identity_scaler(8), data, data);
  const Eigen::MatrixXd x = Eigen::Map<const Eigen::VectorXd>(s.features.data(), 8);
  const Eigen::MatrixXd y = Eigen::Vector3d(0.3, 0.6, 0.8);
  EXPECT_LT(mtl_objective(result.model.layers(), x, y, c.weights, 0.0), 1e-4);
  const auto p = result.model.predict(s.features);
  EXPECT_NEAR(p.valence, 0.3, 0.01);
  EXPECT_NEAR(p.arousal, 0.6, 0.01);
  EXPECT_NEAR(p.dominance, 0.8, 0.01);
}

TEST(TrainMtl, FitsLinearTargets) {
  auto c = small_config(6, 12);
  c.shared_layer_sizes = {32, 32};
  c.batch_size = 32;
  c.max_epochs = 500;
  c.learning_rate = 3e-3;
  c.learning_decay = 1.0;
  const auto data = linear_dataset(32, 6, 13);
  const auto result = train_mtl(c, identity_scaler(6), data, data);
  const auto r = evaluate_rmse(result.model, data);
  for (double v : r) EXPECT_LT(v, 0.05);
}

TEST(TrainMtl, DeterministicAndReturnsValidationBest) {
  auto c = small_config(6, 14);
  c.max_epochs = 20;
  c.batch_size = 8;
  const auto train = linear_dataset(40, 6, 15);
  const auto val = linear_dataset(10, 6, 16);
  const auto a = train_mtl(c, identity_scaler(6), train, val);
  const auto b = train_mtl(c, identity_scaler(6), train, val);
  for (std::size_t i = 0; i < a.model.layers().size(); ++i) {
    EXPECT_EQ(a.model.layers()[i].weights, b.model.layers()[i].weights);
    EXPECT_EQ(a.model.layers()[i].biases, b.model.layers()[i].biases);
  }

  Eigen::MatrixXd x(6, 10), y(3, 10);
  for (int i = 0; i < 10; ++i) {
    x.col(i) = Eigen::Map<const Eigen::VectorXd>(val[i].features.data(), 6);
    y.col(i) = Eigen::Vector3d(val[i].target.valence, val[i].target.arousal, val[i].target.dominance);
  }
  const double returned = mtl_objective(a.model.layers(), x, y, c.weights, 0.0);
  for (const auto& e : a.trace) EXPECT_LE(returned, e.validation_loss + 1e-15);
  EXPECT_GE(a.best_epoch, 1);
  EXPECT_EQ(a.trace.size(), 20u);
  EXPECT_NEAR(a.trace[1].learning_rate, a.trace[0].learning_rate * c.learning_decay, 1e-18);
}

TEST(TrainMtl, EmptyOrMismatchedInputsThrow) {
  auto c = small_config(6);
  const auto data = linear_dataset(4, 6, 1);
  EXPECT_THROW(train_mtl(c, identity_scaler(6), {}, data), ValidationError);
  const auto wrong = linear_dataset(4, 5, 1);
  EXPECT_THROW(train_mtl(c, identity_scaler(6), wrong, data), DimensionError);
}

TEST(Rmse, PerfectOffsetAndRecomputation) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> d(0.0, 1.0);
  std::vector<EmotionAttributes> p(30), t(30), off(30);
  for (int i = 0; i < 30; ++i) {
    t[i] = {d(rng), d(rng), d(rng)};
    p[i] = {d(rng), d(rng), d(rng)};
    off[i] = {t[i].valence + 0.125, t[i].arousal - 0.125, t[i].dominance + 0.125};
  }
  for (double v : rmse(t, t)) EXPECT_EQ(v, 0.0);
  for (double v : rmse(off, t)) EXPECT_NEAR(v, 0.125, 1e-12);
  const auto r = rmse(p, t);
  for (int a = 0; a < 3; ++a) {
    double s = 0.0;
    for (int i = 0; i < 30; ++i) s += std::pow(p[i].as_array()[a] - t[i].as_array()[a], 2);
    EXPECT_NEAR(r[a], std::sqrt(s / 30.0), 1e-9);
  }
  EXPECT_THROW(rmse({}, {}), ValidationError);
}

TEST(TuneLossWeights, ReportHasOneRowPerGridPoint) {
  auto c = small_config(4, 21);
  c.shared_layer_sizes = {8, 6};
  c.head_size = 4;
  c.max_epochs = 3;
  const auto train = linear_dataset(12, 4, 22);
  const auto val = linear_dataset(6, 4, 23);
  const auto result = tune_loss_weights(c, identity_scaler(4), train, val);
  ASSERT_EQ(result.report.size(), 120u);
  double best = 1e9;
  for (const auto& row : result.report) {
    EXPECT_NEAR(row.mean_rmse, (row.validation_rmse[0] + row.validation_rmse[1] + row.validation_rmse[2]) / 3.0, 1e-15);
    best = std::min(best, row.mean_rmse);
  }
  bool found = false;
  for (const auto& row : result.report)
    found |= row.mean_rmse == best && row.weights.alpha == result.best.alpha && row.weights.beta == result.best.beta &&
             row.weights.gamma == result.best.gamma;
  EXPECT_TRUE(found);
}
