#include "mmhs/emotion_mtl.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "mmhs/errors.hpp"

namespace mmhs::emotion {
namespace {

using nn::DenseLayer;

std::span<const DenseLayer> trunk(std::span<const DenseLayer> layers) { return layers.first(MtlModel::kShared); }

std::span<const DenseLayer> branch(std::span<const DenseLayer> layers, std::size_t task) {
  return layers.subspan(MtlModel::head_index(task), 2);
}

void check_layout(std::span<const DenseLayer> layers) {
  if (layers.size() != MtlModel::kLayerCount)
    throw DimensionError("MTL model expects " + std::to_string(MtlModel::kLayerCount) + " layers, got " +
                         std::to_string(layers.size()));
  const auto trunk_out = layers[MtlModel::kShared - 1].out_dim();
  bool ok = layers[1].in_dim() == layers[0].out_dim();
  for (std::size_t t = 0; t < MtlModel::kTasks; ++t) {
    const auto& head = layers[MtlModel::head_index(t)];
    const auto& out = layers[MtlModel::output_index(t)];
    ok = ok && head.in_dim() == trunk_out && out.in_dim() == head.out_dim() && out.out_dim() == 1;
  }
  if (!ok) throw DimensionError("MTL layer shapes do not form a shared trunk with three scalar heads");
}

std::array<double, 3> weight_array(const LossWeights& w) { return {w.alpha, w.beta, w.gamma}; }

bool is_tenth_step(double w) {
  const double scaled = w * 10.0;
  const double rounded = std::round(scaled);
  return std::abs(scaled - rounded) < 1e-9 && rounded >= 1.0 && rounded <= 10.0;
}

// 3 x B predictions for scaled inputs in columns.
Eigen::MatrixXd predict_columns(std::span<const DenseLayer> layers, const Eigen::MatrixXd& inputs) {
  const auto shared = nn::forward(trunk(layers), inputs);
  Eigen::MatrixXd out(3, inputs.cols());
  for (std::size_t t = 0; t < MtlModel::kTasks; ++t)
    out.row(static_cast<Eigen::Index>(t)) = nn::forward(branch(layers, t), shared.output).output;
  return out;
}

Eigen::MatrixXd columns_of(std::span<const LabeledFeatures> samples, int dim) {
  Eigen::MatrixXd x(dim, static_cast<Eigen::Index>(samples.size()));
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (samples[i].features.size() != static_cast<std::size_t>(dim))
      throw DimensionError("sample '" + samples[i].id + "' has " + std::to_string(samples[i].features.size()) +
                           " features, model expects " + std::to_string(dim));
    x.col(static_cast<Eigen::Index>(i)) = Eigen::Map<const Eigen::VectorXd>(samples[i].features.data(), dim);
  }
  return x;
}

Eigen::MatrixXd targets_of(std::span<const LabeledFeatures> samples) {
  Eigen::MatrixXd y(3, static_cast<Eigen::Index>(samples.size()));
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& t = samples[i].target;
    y.col(static_cast<Eigen::Index>(i)) << t.valence, t.arousal, t.dominance;
  }
  return y;
}

void check_input(const MtlModel& model, const features::FeatureRepresentation& rep) {
  if (rep.values.size() != static_cast<std::size_t>(model.input_dim()))
    throw DimensionError("MTL model expects " + std::to_string(model.input_dim()) + " input features, got " +
                         std::to_string(rep.values.size()));
}

}  // namespace

void LossWeights::validate() const {
  for (double w : {alpha, beta, gamma})
    if (!is_tenth_step(w))
      throw ValidationError("loss weights must be multiples of 0.1 in [0.1, 1], got " + std::to_string(w));
  if (alpha + beta + gamma > 1.0 + 1e-12) throw ValidationError("loss weights must satisfy alpha + beta + gamma <= 1");
}

MtlConfig MtlConfig::defaults(features::RepresentationKind kind) {
  MtlConfig c;
  c.kind = kind;
  if (kind == features::RepresentationKind::F1) {
    c.shared_layer_sizes = {256, 128};
    c.weights = {0.2, 0.1, 0.2};
    c.learning_rate = 1e-4;
    c.learning_decay = 0.99;
    c.l2_coefficient = 1e-7;
    c.batch_size = 32;
    c.max_epochs = 30;
  } else {
    c.shared_layer_sizes = {1024, 512};
    c.weights = {0.1, 0.1, 0.2};
    c.learning_rate = 1e-3;
    c.learning_decay = 0.96;
    c.l2_coefficient = 1e-9;
    c.batch_size = 128;
    c.max_epochs = 18;
  }
  return c;
}

int MtlConfig::resolved_input_dim() const {
  return input_dim > 0 ? input_dim : static_cast<int>(features::representation_length(kind));
}

void MtlConfig::validate() const {
  if (shared_layer_sizes[0] < 1 || shared_layer_sizes[1] < 1) throw ValidationError("shared layer sizes must be >= 1");
  if (head_size < 1) throw ValidationError("head_size must be >= 1");
  if (dropout_rate < 0.0 || dropout_rate >= 1.0) throw ValidationError("dropout_rate must be in [0, 1)");
  weights.validate();
  if (!(learning_rate > 0.0)) throw ValidationError("learning_rate must be positive");
  if (!(learning_decay > 0.0 && learning_decay <= 1.0)) throw ValidationError("learning_decay must be in (0, 1]");
  if (l2_coefficient < 0.0) throw ValidationError("l2_coefficient must be >= 0");
  if (batch_size < 1 || max_epochs < 1) throw ValidationError("batch_size and max_epochs must be >= 1");
}

MtlLoss mtl_loss(const EmotionAttributes& pred, const EmotionAttributes& target, const LossWeights& weights) {
  return mtl_loss(std::span(&pred, 1), std::span(&target, 1), weights);
}

MtlLoss mtl_loss(std::span<const EmotionAttributes> pred, std::span<const EmotionAttributes> target,
                 const LossWeights& weights) {
  if (pred.size() != target.size() || pred.empty())
    throw DimensionError("mtl_loss: prediction and target batches must be equal and non-empty");
  MtlLoss loss;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    loss.valence += std::pow(pred[i].valence - target[i].valence, 2);
    loss.arousal += std::pow(pred[i].arousal - target[i].arousal, 2);
    loss.dominance += std::pow(pred[i].dominance - target[i].dominance, 2);
  }
  const double n = static_cast<double>(pred.size());
  loss.valence /= n;
  loss.arousal /= n;
  loss.dominance /= n;
  loss.total = weights.alpha * loss.valence + weights.beta * loss.arousal + weights.gamma * loss.dominance;
  return loss;
}

MtlModel::MtlModel(MtlConfig config, features::FeatureScaler scaler)
    : config_(std::move(config)), scaler_(std::move(scaler)) {
  std::mt19937_64 rng(config_.rng_seed);
  const int in = config_.resolved_input_dim();
  const auto [s1, s2] = config_.shared_layer_sizes;
  layers_.reserve(kLayerCount);
  layers_.push_back(nn::make_dense(in, s1, nn::Activation::ReLU, rng));
  layers_.push_back(nn::make_dense(s1, s2, nn::Activation::ReLU, rng));
  for (std::size_t t = 0; t < kTasks; ++t) {
    layers_.push_back(nn::make_dense(s2, config_.head_size, nn::Activation::ReLU, rng));
    layers_.push_back(nn::make_dense(config_.head_size, 1, nn::Activation::Sigmoid, rng));
  }
}

MtlModel::MtlModel(MtlConfig config, features::FeatureScaler scaler, std::vector<nn::DenseLayer> layers)
    : config_(std::move(config)), scaler_(std::move(scaler)), layers_(std::move(layers)) {
  check_layout(layers_);
}

EmotionAttributes MtlModel::predict(std::span<const double> scaled) const {
  if (scaled.size() != static_cast<std::size_t>(input_dim()))
    throw DimensionError("MTL model expects " + std::to_string(input_dim()) + " input features, got " +
                         std::to_string(scaled.size()));
  const Eigen::MatrixXd x = Eigen::Map<const Eigen::VectorXd>(scaled.data(), input_dim());
  const Eigen::MatrixXd p = predict_columns(layers_, x);
  return {p(0, 0), p(1, 0), p(2, 0)};
}

SpeechEmbedding MtlModel::embed(std::span<const double> scaled) const {
  if (scaled.size() != static_cast<std::size_t>(input_dim()))
    throw DimensionError("MTL model expects " + std::to_string(input_dim()) + " input features, got " +
                         std::to_string(scaled.size()));
  const Eigen::MatrixXd x = Eigen::Map<const Eigen::VectorXd>(scaled.data(), input_dim());
  const auto shared = nn::forward(trunk(layers_), x);
  SpeechEmbedding e;
  e.values.reserve(kTasks * static_cast<std::size_t>(layers_[head_index(0)].out_dim()));
  for (std::size_t t = 0; t < kTasks; ++t) {
    const auto head = nn::forward(std::span(layers_).subspan(head_index(t), 1), shared.output);
    e.values.insert(e.values.end(), head.output.data(), head.output.data() + head.output.size());
  }
  return e;
}

features::FeatureRepresentation MtlModel::scale(const features::FeatureRepresentation& raw) const {
  return features::apply_scaler(scaler_, raw);
}

MtlPass mtl_loss_and_gradients(std::span<const DenseLayer> layers, const Eigen::MatrixXd& inputs,
                               const Eigen::MatrixXd& targets, const LossWeights& weights, double l2_coefficient,
                               std::span<const Eigen::MatrixXd> trunk_masks) {
  check_layout(layers);
  if (targets.rows() != 3 || targets.cols() != inputs.cols())
    throw DimensionError("MTL targets must be 3 x batch");
  const nn::RegularizationSpec reg{l2_coefficient};
  const double n = static_cast<double>(inputs.cols());
  const auto w = weight_array(weights);

  const auto shared = nn::forward(trunk(layers), inputs, trunk_masks);
  MtlPass pass;
  pass.gradients.resize(layers.size());
  Eigen::MatrixXd shared_grad = Eigen::MatrixXd::Zero(shared.output.rows(), shared.output.cols());
  std::array<double, 3> task_loss{};
  for (std::size_t t = 0; t < MtlModel::kTasks; ++t) {
    const auto rec = nn::forward(branch(layers, t), shared.output);
    const Eigen::MatrixXd diff = rec.output - targets.row(static_cast<Eigen::Index>(t));
    task_loss[t] = diff.squaredNorm() / n;
    const Eigen::MatrixXd grad_out = (2.0 * w[t] / n) * diff;
    auto back = nn::backward(branch(layers, t), rec, grad_out, reg);
    shared_grad += back.input_gradient;
    pass.gradients[MtlModel::head_index(t)] = std::move(back.gradients[0]);
    pass.gradients[MtlModel::output_index(t)] = std::move(back.gradients[1]);
  }
  auto trunk_back = nn::backward(trunk(layers), shared, shared_grad, reg);
  for (std::size_t i = 0; i < MtlModel::kShared; ++i) pass.gradients[i] = std::move(trunk_back.gradients[i]);

  pass.parts = {w[0] * task_loss[0] + w[1] * task_loss[1] + w[2] * task_loss[2], task_loss[0], task_loss[1],
                task_loss[2]};
  pass.loss = pass.parts.total + nn::l2_penalty(layers, reg);
  return pass;
}

double mtl_objective(std::span<const DenseLayer> layers, const Eigen::MatrixXd& inputs, const Eigen::MatrixXd& targets,
                     const LossWeights& weights, double l2_coefficient) {
  check_layout(layers);
  const Eigen::MatrixXd pred = predict_columns(layers, inputs);
  const double n = static_cast<double>(inputs.cols());
  const auto w = weight_array(weights);
  double loss = 0.0;
  for (Eigen::Index t = 0; t < 3; ++t) loss += w[static_cast<std::size_t>(t)] * (pred.row(t) - targets.row(t)).squaredNorm() / n;
  return loss + nn::l2_penalty(layers, nn::RegularizationSpec{l2_coefficient});
}

MtlTrainResult train_mtl(const MtlConfig& config, const features::FeatureScaler& scaler,
                         std::span<const LabeledFeatures> train, std::span<const LabeledFeatures> validation) {
  config.validate();
  if (train.empty() || validation.empty()) throw ValidationError("train_mtl: training and validation splits must be non-empty");
  const int dim = config.resolved_input_dim();
  const Eigen::MatrixXd x_train = columns_of(train, dim);
  const Eigen::MatrixXd y_train = targets_of(train);
  const Eigen::MatrixXd x_val = columns_of(validation, dim);
  const Eigen::MatrixXd y_val = targets_of(validation);

  MtlTrainResult result{MtlModel(config, scaler), {}, 0};
  auto& layers = result.model.mutable_layers();
  nn::OptimizerState optimizer(layers, config.learning_rate, config.learning_decay);
  std::mt19937_64 rng(config.rng_seed ^ 0x9E3779B97F4A7C15ULL);

  std::vector<Eigen::Index> order(static_cast<std::size_t>(train.size()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::vector<nn::DenseLayer> best = layers;
  double best_val = std::numeric_limits<double>::infinity();
  const auto batch = static_cast<std::size_t>(config.batch_size);

  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t count = std::min(batch, order.size() - start);
      Eigen::MatrixXd xb(x_train.rows(), static_cast<Eigen::Index>(count));
      Eigen::MatrixXd yb(3, static_cast<Eigen::Index>(count));
      for (std::size_t j = 0; j < count; ++j) {
        xb.col(static_cast<Eigen::Index>(j)) = x_train.col(order[start + j]);
        yb.col(static_cast<Eigen::Index>(j)) = y_train.col(order[start + j]);
      }
      std::array<Eigen::MatrixXd, MtlModel::kShared> masks;
      if (config.dropout_rate > 0.0)
        for (std::size_t i = 0; i < MtlModel::kShared; ++i)
          masks[i] = nn::dropout_mask(layers[i].out_dim(), xb.cols(), config.dropout_rate, rng);
      const auto pass = mtl_loss_and_gradients(layers, xb, yb, config.weights, config.l2_coefficient, masks);
      if (!std::isfinite(pass.loss)) throw NumericError("train_mtl: non-finite loss at epoch " + std::to_string(epoch));
      nn::adam_step(optimizer, layers, pass.gradients);
    }
    MtlEpoch record;
    record.epoch = epoch;
    record.learning_rate = optimizer.learning_rate;
    record.train_loss = mtl_objective(layers, x_train, y_train, config.weights, 0.0);
    record.validation_loss = mtl_objective(layers, x_val, y_val, config.weights, 0.0);
    if (!std::isfinite(record.validation_loss) || !nn::all_finite(layers))
      throw NumericError("train_mtl: non-finite parameters at epoch " + std::to_string(epoch));
    optimizer.end_epoch();
    if (record.validation_loss < best_val) {
      best_val = record.validation_loss;
      best = layers;
      result.best_epoch = epoch;
    }
    result.trace.push_back(record);
  }
  layers = std::move(best);
  return result;
}

EmotionAttributes predict_attributes(const MtlModel& model, const features::FeatureRepresentation& scaled) {
  check_input(model, scaled);
  return model.predict(scaled.values);
}

SpeechEmbedding extract_speech_embedding(const MtlModel& model, const features::FeatureRepresentation& scaled) {
  check_input(model, scaled);
  return model.embed(scaled.values);
}

std::array<double, 3> rmse(std::span<const EmotionAttributes> pred, std::span<const EmotionAttributes> target) {
  if (pred.empty()) throw ValidationError("rmse: empty set");
  const auto loss = mtl_loss(pred, target, LossWeights{});
  return {std::sqrt(loss.valence), std::sqrt(loss.arousal), std::sqrt(loss.dominance)};
}

std::array<double, 3> evaluate_rmse(const MtlModel& model, std::span<const LabeledFeatures> samples) {
  if (samples.empty()) throw ValidationError("evaluate_rmse: empty labeled set");
  const Eigen::MatrixXd x = columns_of(samples, model.input_dim());
  const Eigen::MatrixXd p = predict_columns(model.layers(), x);
  std::vector<EmotionAttributes> pred(samples.size());
  std::vector<EmotionAttributes> target(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto c = static_cast<Eigen::Index>(i);
    pred[i] = {p(0, c), p(1, c), p(2, c)};
    target[i] = samples[i].target;
  }
  return rmse(pred, target);
}

std::vector<LossWeights> loss_weight_grid() {
  std::vector<LossWeights> grid;
  for (int a = 1; a <= 10; ++a)
    for (int b = 1; a + b <= 10; ++b)
      for (int c = 1; a + b + c <= 10; ++c) grid.push_back({a / 10.0, b / 10.0, c / 10.0});
  return grid;
}

TuneResult tune_loss_weights(const MtlConfig& base, const features::FeatureScaler& scaler,
                             std::span<const LabeledFeatures> train, std::span<const LabeledFeatures> validation) {
  if (train.empty() || validation.empty()) throw ValidationError("tune_loss_weights: splits must be non-empty");
  TuneResult result;
  double best = std::numeric_limits<double>::infinity();
  const auto grid = loss_weight_grid();
  for (std::size_t i = 0; i < grid.size(); ++i) {
    MtlConfig cfg = base;
    cfg.weights = grid[i];
    cfg.max_epochs = std::max(3, base.max_epochs / 3);
    cfg.rng_seed = base.rng_seed + 1 + i;
    const auto trained = train_mtl(cfg, scaler, train, validation);
    GridRow row{grid[i], evaluate_rmse(trained.model, validation), 0.0};
    row.mean_rmse = (row.validation_rmse[0] + row.validation_rmse[1] + row.validation_rmse[2]) / 3.0;
    if (row.mean_rmse < best) {
      best = row.mean_rmse;
      result.best = grid[i];
    }
    result.report.push_back(row);
  }
  return result;
}

}  // namespace mmhs::emotion
