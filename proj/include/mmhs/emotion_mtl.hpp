#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mmhs/audio_features.hpp"
#include "mmhs/neural_core.hpp"

namespace mmhs::emotion {

struct EmotionAttributes {
  double valence = 0.0;
  double arousal = 0.0;
  double dominance = 0.0;

  std::array<double, 3> as_array() const { return {valence, arousal, dominance}; }
};

// Loss weights for valence, arousal, dominance.
struct LossWeights {
  double alpha = 0.1;
  double beta = 0.1;
  double gamma = 0.2;

  // Each weight a multiple of 0.1 in [0.1, 1] and alpha + beta + gamma <= 1.
  void validate() const;
};

struct MtlConfig {
  features::RepresentationKind kind = features::RepresentationKind::F2;
  std::array<int, 2> shared_layer_sizes{1024, 512};
  int head_size = 170;
  double dropout_rate = 0.2;
  LossWeights weights;
  double learning_rate = 1e-3;
  double learning_decay = 0.96;
  double l2_coefficient = 1e-9;
  int batch_size = 128;
  int max_epochs = 18;
  std::uint64_t rng_seed = 42;
  // Input width; 0 means "derive from kind" (136 or 1360).
  int input_dim = 0;

  // Tuned settings for each representation (MTL_f1 / MTL_f2).
  static MtlConfig defaults(features::RepresentationKind kind);

  int resolved_input_dim() const;
  void validate() const;
};

struct MtlLoss {
  double total = 0.0;
  double valence = 0.0;
  double arousal = 0.0;
  double dominance = 0.0;
};

MtlLoss mtl_loss(const EmotionAttributes& pred, const EmotionAttributes& target, const LossWeights& weights);
// Per-task losses are batch means of squared error.
MtlLoss mtl_loss(std::span<const EmotionAttributes> pred, std::span<const EmotionAttributes> target,
                 const LossWeights& weights);

struct SpeechEmbedding {
  std::vector<double> values;  // valence head || arousal head || dominance head
};

// Layer layout inside MtlModel::layers():
//   0, 1         shared trunk (ReLU, dropout after each while training)
//   2 + 2t       attribute head t (ReLU, head_size units), t = V, A, D
//   3 + 2t       scalar output t (sigmoid)
class MtlModel {
 public:
  static constexpr std::size_t kShared = 2;
  static constexpr std::size_t kTasks = 3;
  static constexpr std::size_t kLayerCount = kShared + 2 * kTasks;
  static constexpr std::size_t head_index(std::size_t task) { return kShared + 2 * task; }
  static constexpr std::size_t output_index(std::size_t task) { return kShared + 2 * task + 1; }

  MtlModel() = default;
  // He-initialized parameters from config.rng_seed.
  MtlModel(MtlConfig config, features::FeatureScaler scaler);
  MtlModel(MtlConfig config, features::FeatureScaler scaler, std::vector<nn::DenseLayer> layers);

  const MtlConfig& config() const { return config_; }
  const features::FeatureScaler& scaler() const { return scaler_; }
  const std::vector<nn::DenseLayer>& layers() const { return layers_; }
  std::vector<nn::DenseLayer>& mutable_layers() { return layers_; }

  int input_dim() const { return static_cast<int>(layers_.front().in_dim()); }

  // Inputs must already be scaled.
  EmotionAttributes predict(std::span<const double> scaled) const;
  SpeechEmbedding embed(std::span<const double> scaled) const;

  features::FeatureRepresentation scale(const features::FeatureRepresentation& raw) const;

 private:
  MtlConfig config_;
  features::FeatureScaler scaler_;
  std::vector<nn::DenseLayer> layers_;
};

// Batch forward/backward over columns of `inputs` (scaled features).
struct MtlPass {
  double loss = 0.0;  // weighted data loss + L2 penalty
  MtlLoss parts;
  std::vector<nn::LayerGradients> gradients;
};
MtlPass mtl_loss_and_gradients(std::span<const nn::DenseLayer> layers, const Eigen::MatrixXd& inputs,
                               const Eigen::MatrixXd& targets, const LossWeights& weights,
                               double l2_coefficient, std::span<const Eigen::MatrixXd> trunk_masks = {});
// Loss only, no dropout.
double mtl_objective(std::span<const nn::DenseLayer> layers, const Eigen::MatrixXd& inputs,
                     const Eigen::MatrixXd& targets, const LossWeights& weights, double l2_coefficient);

struct LabeledFeatures {
  std::string id;
  std::vector<double> features;  // scaled
  EmotionAttributes target;
};

struct MtlEpoch {
  int epoch = 0;
  double train_loss = 0.0;       // weighted loss on the training split, inference mode
  double validation_loss = 0.0;  // weighted loss on the validation split
  double learning_rate = 0.0;
};

struct MtlTrainResult {
  MtlModel model;
  std::vector<MtlEpoch> trace;
  int best_epoch = 0;
};

// Samples must already be scaled with `scaler`, which is stored in the model.
MtlTrainResult train_mtl(const MtlConfig& config, const features::FeatureScaler& scaler,
                         std::span<const LabeledFeatures> train, std::span<const LabeledFeatures> validation);

EmotionAttributes predict_attributes(const MtlModel& model, const features::FeatureRepresentation& scaled);
SpeechEmbedding extract_speech_embedding(const MtlModel& model, const features::FeatureRepresentation& scaled);

// Root mean squared error per attribute (valence, arousal, dominance).
std::array<double, 3> evaluate_rmse(const MtlModel& model, std::span<const LabeledFeatures> samples);
std::array<double, 3> rmse(std::span<const EmotionAttributes> pred, std::span<const EmotionAttributes> target);

// All (alpha, beta, gamma) in {0.1, ..., 1.0}^3 with sum <= 1.
std::vector<LossWeights> loss_weight_grid();

struct GridRow {
  LossWeights weights;
  std::array<double, 3> validation_rmse{};
  double mean_rmse = 0.0;
};

struct TuneResult {
  LossWeights best;
  std::vector<GridRow> report;
};

// Each grid point trains for max(3, max_epochs / 3) epochs with a seed derived
// from the base seed and the grid index.
TuneResult tune_loss_weights(const MtlConfig& base, const features::FeatureScaler& scaler,
                             std::span<const LabeledFeatures> train, std::span<const LabeledFeatures> validation);

}  // namespace mmhs::emotion
