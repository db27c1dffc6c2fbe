#include "mmhs/fusion_mml.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "mmhs/errors.hpp"

namespace mmhs::fusion {
namespace {

void check_layout(std::span<const nn::DenseLayer> layers) {
  if (layers.size() != FusionModel::kLayerCount || layers.back().out_dim() != 1)
    throw DimensionError("fusion model expects three hidden layers and one output unit");
}

Eigen::MatrixXd columns_of(std::span<const LabeledEmbedding> samples, int dim) {
  Eigen::MatrixXd x(dim, static_cast<Eigen::Index>(samples.size()));
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (samples[i].values.size() != static_cast<std::size_t>(dim))
      throw DimensionError("embedding '" + samples[i].id + "' has length " + std::to_string(samples[i].values.size()) +
                           ", expected " + std::to_string(dim));
    x.col(static_cast<Eigen::Index>(i)) = Eigen::Map<const Eigen::VectorXd>(samples[i].values.data(), dim);
  }
  return x;
}

std::vector<int> labels_of(std::span<const LabeledEmbedding> samples) {
  std::vector<int> y;
  y.reserve(samples.size());
  for (const auto& s : samples) {
    if (s.label != 0 && s.label != 1) throw ValidationError("label of '" + s.id + "' must be 0 or 1");
    y.push_back(s.label);
  }
  return y;
}

double clamp_probability(double p) { return std::clamp(p, kBceEpsilon, 1.0 - kBceEpsilon); }

}  // namespace

FusedEmbedding fuse(const text::TextEmbedding& text, const emotion::SpeechEmbedding& speech) {
  if (text.values.size() != kTextDim)
    throw DimensionError("text embedding has length " + std::to_string(text.values.size()) + ", expected " +
                         std::to_string(kTextDim));
  if (speech.values.size() != kSpeechDim)
    throw DimensionError("speech embedding has length " + std::to_string(speech.values.size()) + ", expected " +
                         std::to_string(kSpeechDim));
  FusedEmbedding e;
  e.values.reserve(kFusedDim);
  e.values.insert(e.values.end(), text.values.begin(), text.values.end());
  e.values.insert(e.values.end(), speech.values.begin(), speech.values.end());
  return e;
}

Label classify(double probability, double threshold) {
  return probability >= threshold ? Label::HateSpeech : Label::NotHateSpeech;
}

void FusionConfig::validate() const {
  for (int h : hidden_sizes)
    if (h < 1) throw ValidationError("fusion hidden sizes must be >= 1");
  for (double d : dropout_rates)
    if (d < 0.0 || d >= 1.0) throw ValidationError("fusion dropout rates must be in [0, 1)");
  if (l2_coefficient < 0.0) throw ValidationError("l2_coefficient must be >= 0");
  if (!(threshold > 0.0 && threshold < 1.0)) throw ValidationError("threshold must be in (0, 1)");
  if (!(learning_rate > 0.0)) throw ValidationError("learning_rate must be positive");
  if (!(learning_decay > 0.0 && learning_decay <= 1.0)) throw ValidationError("learning_decay must be in (0, 1]");
  if (patience < 1) throw ValidationError("patience must be >= 1");
  if (batch_size < 1 || max_epochs < 1) throw ValidationError("batch_size and max_epochs must be >= 1");
  if (input_dim < 1) throw ValidationError("input_dim must be >= 1");
}

FusionModel::FusionModel(FusionConfig config) : config_(std::move(config)) {
  std::mt19937_64 rng(config_.rng_seed);
  int in = config_.input_dim;
  for (int h : config_.hidden_sizes) {
    layers_.push_back(nn::make_dense(in, h, nn::Activation::ReLU, rng));
    in = h;
  }
  layers_.push_back(nn::make_dense(in, 1, nn::Activation::Sigmoid, rng));
}

FusionModel::FusionModel(FusionConfig config, std::vector<nn::DenseLayer> layers)
    : config_(std::move(config)), layers_(std::move(layers)) {
  check_layout(layers_);
}

double FusionModel::probability(std::span<const double> fused) const {
  if (fused.size() != static_cast<std::size_t>(layers_.front().in_dim()))
    throw DimensionError("fusion model expects input length " + std::to_string(layers_.front().in_dim()) + ", got " +
                         std::to_string(fused.size()));
  const Eigen::MatrixXd x = Eigen::Map<const Eigen::VectorXd>(fused.data(), static_cast<Eigen::Index>(fused.size()));
  return nn::forward(layers_, x).output(0, 0);
}

std::vector<double> FusionModel::probabilities(const Eigen::MatrixXd& columns) const {
  const auto out = nn::forward(layers_, columns).output;
  return std::vector<double>(out.data(), out.data() + out.size());
}

double bce_l2_loss(std::span<const double> probabilities, std::span<const int> targets,
                   std::span<const nn::DenseLayer> layers, double l2_coefficient) {
  if (probabilities.empty() || probabilities.size() != targets.size())
    throw DimensionError("bce_l2_loss: need equal, non-empty prediction and target lists");
  double sum = 0.0;
  for (std::size_t i = 0; i < probabilities.size(); ++i) {
    const double p = clamp_probability(probabilities[i]);
    const double y = targets[i];
    sum += y * std::log(p) + (1.0 - y) * std::log(1.0 - p);
  }
  return -sum / static_cast<double>(probabilities.size()) +
         nn::l2_penalty(layers, nn::RegularizationSpec{l2_coefficient});
}

FusionPass fusion_loss_and_gradients(std::span<const nn::DenseLayer> layers, const Eigen::MatrixXd& inputs,
                                     std::span<const int> targets, double l2_coefficient,
                                     std::span<const Eigen::MatrixXd> dropout_masks) {
  check_layout(layers);
  if (static_cast<std::size_t>(inputs.cols()) != targets.size())
    throw DimensionError("fusion batch and label counts differ");
  const auto rec = nn::forward(layers, inputs, dropout_masks);
  const double n = static_cast<double>(inputs.cols());
  Eigen::MatrixXd grad(1, inputs.cols());
  std::vector<double> probs(static_cast<std::size_t>(inputs.cols()));
  for (Eigen::Index i = 0; i < inputs.cols(); ++i) {
    const double p = clamp_probability(rec.output(0, i));
    const double y = targets[static_cast<std::size_t>(i)];
    grad(0, i) = -(y / p - (1.0 - y) / (1.0 - p)) / n;
    probs[static_cast<std::size_t>(i)] = rec.output(0, i);
  }
  FusionPass pass;
  pass.loss = bce_l2_loss(probs, targets, layers, l2_coefficient);
  pass.gradients = nn::backward(layers, rec, grad, nn::RegularizationSpec{l2_coefficient}).gradients;
  return pass;
}

double fusion_objective(std::span<const nn::DenseLayer> layers, const Eigen::MatrixXd& inputs,
                        std::span<const int> targets, double l2_coefficient) {
  check_layout(layers);
  const auto out = nn::forward(layers, inputs).output;
  return bce_l2_loss(std::span<const double>(out.data(), static_cast<std::size_t>(out.size())), targets, layers,
                     l2_coefficient);
}

EarlyStopping::EarlyStopping(int patience)
    : patience_(patience), best_loss_(std::numeric_limits<double>::infinity()) {
  if (patience < 1) throw ValidationError("patience must be >= 1");
}

bool EarlyStopping::observe(double validation_loss) {
  ++epochs_;
  if (validation_loss < best_loss_) {
    best_loss_ = validation_loss;
    best_epoch_ = epochs_;
    stale_epochs_ = 0;
    return true;
  }
  ++stale_epochs_;
  return false;
}

FusionTrainResult train_fusion(const FusionConfig& config, std::span<const LabeledEmbedding> train,
                               std::span<const LabeledEmbedding> validation) {
  config.validate();
  if (train.empty() || validation.empty())
    throw ValidationError("train_fusion: training and validation splits must be non-empty");
  const Eigen::MatrixXd x_train = columns_of(train, config.input_dim);
  const auto y_train = labels_of(train);
  const Eigen::MatrixXd x_val = columns_of(validation, config.input_dim);
  const auto y_val = labels_of(validation);

  FusionTrainResult result{FusionModel(config), {}, 0, 0};
  auto& layers = result.model.mutable_layers();
  nn::OptimizerState optimizer(layers, config.learning_rate, config.learning_decay);
  std::mt19937_64 rng(config.rng_seed ^ 0xD1B54A32D192ED03ULL);
  EarlyStopping stopping(config.patience);
  std::vector<nn::DenseLayer> best = layers;

  std::vector<Eigen::Index> order(train.size());
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  const auto batch = static_cast<std::size_t>(config.batch_size);

  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t count = std::min(batch, order.size() - start);
      Eigen::MatrixXd xb(x_train.rows(), static_cast<Eigen::Index>(count));
      std::vector<int> yb(count);
      for (std::size_t j = 0; j < count; ++j) {
        xb.col(static_cast<Eigen::Index>(j)) = x_train.col(order[start + j]);
        yb[j] = y_train[static_cast<std::size_t>(order[start + j])];
      }
      std::array<Eigen::MatrixXd, FusionModel::kLayerCount> masks;
      for (std::size_t i = 0; i < config.dropout_rates.size(); ++i)
        if (config.dropout_rates[i] > 0.0)
          masks[i] = nn::dropout_mask(layers[i].out_dim(), xb.cols(), config.dropout_rates[i], rng);
      const auto pass = fusion_loss_and_gradients(layers, xb, yb, config.l2_coefficient, masks);
      if (!std::isfinite(pass.loss)) throw NumericError("train_fusion: non-finite loss at epoch " + std::to_string(epoch));
      nn::adam_step(optimizer, layers, pass.gradients);
    }
    FusionEpoch record;
    record.epoch = epoch;
    record.learning_rate = optimizer.learning_rate;
    record.train_loss = fusion_objective(layers, x_train, y_train, config.l2_coefficient);
    record.validation_loss = fusion_objective(layers, x_val, y_val, config.l2_coefficient);
    if (!std::isfinite(record.validation_loss) || !nn::all_finite(layers))
      throw NumericError("train_fusion: non-finite parameters at epoch " + std::to_string(epoch));
    optimizer.end_epoch();
    result.trace.push_back(record);
    if (stopping.observe(record.validation_loss)) best = layers;
    result.stopped_epoch = epoch;
    if (stopping.should_stop()) break;
  }
  result.best_epoch = stopping.best_epoch();
  layers = std::move(best);
  return result;
}

Prediction predict(const FusionModel& model, std::span<const double> fused) {
  Prediction p;
  p.probability = model.probability(fused);
  p.label = classify(p.probability, model.config().threshold);
  return p;
}

Prediction predict(const FusionModel& model, const FusedEmbedding& embedding) {
  return predict(model, std::span<const double>(embedding.values));
}

}  // namespace mmhs::fusion
