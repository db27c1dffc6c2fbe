#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string_view>
#include <vector>

namespace mmhs::nn {

enum class Activation { ReLU, Sigmoid, Linear };

std::string_view to_string(Activation activation);
Activation parse_activation(std::string_view tag);

// y = act(W x + b). Samples are columns throughout this module.
struct DenseLayer {
  Eigen::MatrixXd weights;  // out x in
  Eigen::VectorXd biases;   // out
  Activation activation = Activation::Linear;

  Eigen::Index in_dim() const { return weights.cols(); }
  Eigen::Index out_dim() const { return weights.rows(); }
};

struct LayerGradients {
  Eigen::MatrixXd weights;
  Eigen::VectorXd biases;
};

struct RegularizationSpec {
  double l2_coefficient = 0.0;  // penalty alpha * sum(w^2); biases excluded
};

// He-normal weights, fan_out x fan_in, std = sqrt(2 / fan_in).
Eigen::MatrixXd he_init(int fan_in, int fan_out, std::uint64_t rng_seed);
Eigen::MatrixXd he_init(int fan_in, int fan_out, std::mt19937_64& rng);
DenseLayer make_dense(int fan_in, int fan_out, Activation activation, std::mt19937_64& rng);

// Inverted-dropout mask: entries are 0 (dropped) or 1 / (1 - rate).
Eigen::MatrixXd dropout_mask(Eigen::Index rows, Eigen::Index cols, double rate, std::mt19937_64& rng);

struct ForwardRecord {
  std::vector<Eigen::MatrixXd> inputs;       // input fed to layer i
  std::vector<Eigen::MatrixXd> activations;  // act(W x + b) before dropout
  std::vector<Eigen::MatrixXd> masks;        // empty when layer i has no dropout
  Eigen::MatrixXd output;                    // final layer output after its mask

  // Post-dropout output of layer i.
  Eigen::MatrixXd layer_output(std::size_t i) const;
};

// Dropout masks are optional; an empty span or an empty matrix at index i
// disables dropout after layer i (inference mode).
ForwardRecord forward(std::span<const DenseLayer> layers, const Eigen::MatrixXd& input,
                      std::span<const Eigen::MatrixXd> dropout_masks = {});
Eigen::VectorXd forward(std::span<const DenseLayer> layers, const Eigen::VectorXd& input);

struct BackwardResult {
  std::vector<LayerGradients> gradients;
  Eigen::MatrixXd input_gradient;
};

// output_gradient is dL/d(output) for the batch (already containing any 1/N).
BackwardResult backward(std::span<const DenseLayer> layers, const ForwardRecord& record,
                        const Eigen::MatrixXd& output_gradient, const RegularizationSpec& reg = {});

double l2_penalty(std::span<const DenseLayer> layers, const RegularizationSpec& reg);

std::vector<LayerGradients> zero_gradients(std::span<const DenseLayer> layers);
void accumulate(std::vector<LayerGradients>& into, std::span<const LayerGradients> from);

struct AdamSettings {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct OptimizerState {
  OptimizerState() = default;
  OptimizerState(std::span<const DenseLayer> layers, double learning_rate, double decay_rate,
                 AdamSettings settings = {});

  std::vector<LayerGradients> first_moment;
  std::vector<LayerGradients> second_moment;
  std::int64_t step_count = 0;
  double learning_rate = 1e-3;
  double decay_rate = 1.0;
  AdamSettings settings;

  // Multiplies the learning rate by decay_rate; called once per epoch.
  void end_epoch() { learning_rate *= decay_rate; }
};

void adam_step(OptimizerState& state, std::span<DenseLayer> params, std::span<const LayerGradients> grads);

// Max over parameters of |a - n| / max(|a|, |n|, 1e-12) with central
// differences of step h. `loss` is evaluated on the perturbed parameters.
using LossFunction = std::function<double(std::span<const DenseLayer>)>;
double grad_check(std::vector<DenseLayer>& params, const LossFunction& loss,
                  std::span<const LayerGradients> analytic, double h = 1e-5);

bool all_finite(std::span<const DenseLayer> layers);

}  // namespace mmhs::nn
