#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mmhs/emotion_mtl.hpp"
#include "mmhs/neural_core.hpp"
#include "mmhs/text_pipeline.hpp"

namespace mmhs::fusion {

inline constexpr std::size_t kTextDim = text::kEmbeddingDim;
inline constexpr std::size_t kSpeechDim = 510;
inline constexpr std::size_t kFusedDim = kTextDim + kSpeechDim;

// Text embedding followed by speech embedding.
struct FusedEmbedding {
  std::vector<double> values;
};

FusedEmbedding fuse(const text::TextEmbedding& text, const emotion::SpeechEmbedding& speech);

enum class Label { NotHateSpeech = 0, HateSpeech = 1 };

struct Prediction {
  double probability = 0.5;
  Label label = Label::NotHateSpeech;
};

// HateSpeech iff probability >= threshold.
Label classify(double probability, double threshold);

struct FusionConfig {
  std::array<int, 3> hidden_sizes{512, 128, 32};
  std::array<double, 2> dropout_rates{0.3, 0.3};
  double l2_coefficient = 1e-5;
  double threshold = 0.7;
  double learning_rate = 1e-4;
  double learning_decay = 0.99;
  int patience = 10;
  int batch_size = 32;
  int max_epochs = 200;
  std::uint64_t rng_seed = 42;
  int input_dim = static_cast<int>(kFusedDim);

  void validate() const;
};

// Layers 0..2 ReLU hidden (dropout after 0 and 1 while training), layer 3
// single sigmoid unit.
class FusionModel {
 public:
  static constexpr std::size_t kLayerCount = 4;

  FusionModel() = default;
  explicit FusionModel(FusionConfig config);
  FusionModel(FusionConfig config, std::vector<nn::DenseLayer> layers);

  const FusionConfig& config() const { return config_; }
  const std::vector<nn::DenseLayer>& layers() const { return layers_; }
  std::vector<nn::DenseLayer>& mutable_layers() { return layers_; }

  double probability(std::span<const double> fused) const;
  std::vector<double> probabilities(const Eigen::MatrixXd& columns) const;

 private:
  FusionConfig config_;
  std::vector<nn::DenseLayer> layers_;
};

inline constexpr double kBceEpsilon = 1e-12;

// -(1/N) sum[y log p + (1-y) log(1-p)] + alpha_w * sum ||W||^2, p clamped to
// [eps, 1-eps]; biases are not penalized.
double bce_l2_loss(std::span<const double> probabilities, std::span<const int> targets,
                   std::span<const nn::DenseLayer> layers, double l2_coefficient);

struct FusionPass {
  double loss = 0.0;
  std::vector<nn::LayerGradients> gradients;
};
FusionPass fusion_loss_and_gradients(std::span<const nn::DenseLayer> layers, const Eigen::MatrixXd& inputs,
                                     std::span<const int> targets, double l2_coefficient,
                                     std::span<const Eigen::MatrixXd> dropout_masks = {});
double fusion_objective(std::span<const nn::DenseLayer> layers, const Eigen::MatrixXd& inputs,
                        std::span<const int> targets, double l2_coefficient);

struct LabeledEmbedding {
  std::string id;
  std::vector<double> values;
  int label = 0;
};

// Tracks the best validation loss; a strict decrease counts as improvement.
class EarlyStopping {
 public:
  explicit EarlyStopping(int patience);

  // Returns true when this epoch improved on the best loss seen so far.
  bool observe(double validation_loss);
  bool should_stop() const { return stale_epochs_ >= patience_; }
  int best_epoch() const { return best_epoch_; }
  int epochs_observed() const { return epochs_; }
  double best_loss() const { return best_loss_; }

 private:
  int patience_;
  int epochs_ = 0;
  int best_epoch_ = 0;
  int stale_epochs_ = 0;
  double best_loss_;
};

struct FusionEpoch {
  int epoch = 0;
  double train_loss = 0.0;
  double validation_loss = 0.0;
  double learning_rate = 0.0;
};

struct FusionTrainResult {
  FusionModel model;
  std::vector<FusionEpoch> trace;
  int best_epoch = 0;
  int stopped_epoch = 0;
};

FusionTrainResult train_fusion(const FusionConfig& config, std::span<const LabeledEmbedding> train,
                               std::span<const LabeledEmbedding> validation);

Prediction predict(const FusionModel& model, const FusedEmbedding& embedding);
Prediction predict(const FusionModel& model, std::span<const double> fused);

}  // namespace mmhs::fusion
