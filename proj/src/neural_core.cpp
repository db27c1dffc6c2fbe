#include "mmhs/neural_core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "mmhs/errors.hpp"

namespace mmhs::nn {
namespace {

Eigen::MatrixXd activate(const Eigen::MatrixXd& z, Activation activation) {
  switch (activation) {
    case Activation::ReLU:
      return z.cwiseMax(0.0);
    case Activation::Sigmoid:
      // Clamped so outputs stay strictly inside (0, 1) even when saturated.
      return (1.0 + (-z.array()).exp())
          .inverse()
          .max(std::numeric_limits<double>::min())
          .min(std::nextafter(1.0, 0.0))
          .matrix();
    case Activation::Linear:
      return z;
  }
  return z;
}

// d act / d z expressed through the activation value.
Eigen::MatrixXd activation_derivative(const Eigen::MatrixXd& a, Activation activation) {
  switch (activation) {
    case Activation::ReLU:
      return (a.array() > 0.0).cast<double>().matrix();
    case Activation::Sigmoid:
      return (a.array() * (1.0 - a.array())).matrix();
    case Activation::Linear:
      return Eigen::MatrixXd::Ones(a.rows(), a.cols());
  }
  return Eigen::MatrixXd::Ones(a.rows(), a.cols());
}

}  // namespace

std::string_view to_string(Activation activation) {
  switch (activation) {
    case Activation::ReLU:
      return "relu";
    case Activation::Sigmoid:
      return "sigmoid";
    case Activation::Linear:
      return "linear";
  }
  return "linear";
}

Activation parse_activation(std::string_view tag) {
  if (tag == "relu") return Activation::ReLU;
  if (tag == "sigmoid") return Activation::Sigmoid;
  if (tag == "linear") return Activation::Linear;
  throw FormatError("unknown activation tag '" + std::string(tag) + "'");
}

Eigen::MatrixXd he_init(int fan_in, int fan_out, std::mt19937_64& rng) {
  if (fan_in < 1 || fan_out < 1) throw ValidationError("he_init: fan_in and fan_out must be >= 1");
  std::normal_distribution<double> normal(0.0, std::sqrt(2.0 / fan_in));
  Eigen::MatrixXd w(fan_out, fan_in);
  for (Eigen::Index r = 0; r < w.rows(); ++r)
    for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = normal(rng);
  return w;
}

Eigen::MatrixXd he_init(int fan_in, int fan_out, std::uint64_t rng_seed) {
  std::mt19937_64 rng(rng_seed);
  return he_init(fan_in, fan_out, rng);
}

DenseLayer make_dense(int fan_in, int fan_out, Activation activation, std::mt19937_64& rng) {
  return DenseLayer{he_init(fan_in, fan_out, rng), Eigen::VectorXd::Zero(fan_out), activation};
}

Eigen::MatrixXd dropout_mask(Eigen::Index rows, Eigen::Index cols, double rate, std::mt19937_64& rng) {
  if (rate < 0.0 || rate >= 1.0) throw ValidationError("dropout rate must be in [0, 1)");
  const double keep = 1.0 - rate;
  std::bernoulli_distribution keep_draw(keep);
  Eigen::MatrixXd mask(rows, cols);
  for (Eigen::Index c = 0; c < cols; ++c)
    for (Eigen::Index r = 0; r < rows; ++r) mask(r, c) = keep_draw(rng) ? 1.0 / keep : 0.0;
  return mask;
}

Eigen::MatrixXd ForwardRecord::layer_output(std::size_t i) const {
  if (i + 1 == activations.size()) return output;
  return inputs[i + 1];
}

ForwardRecord forward(std::span<const DenseLayer> layers, const Eigen::MatrixXd& input,
                      std::span<const Eigen::MatrixXd> dropout_masks) {
  if (layers.empty()) throw ValidationError("forward: no layers");
  if (!dropout_masks.empty() && dropout_masks.size() != layers.size())
    throw DimensionError("forward: expected one dropout mask slot per layer");
  ForwardRecord rec;
  rec.inputs.reserve(layers.size());
  rec.activations.reserve(layers.size());
  rec.masks.reserve(layers.size());
  Eigen::MatrixXd x = input;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& layer = layers[i];
    if (x.rows() != layer.in_dim())
      throw DimensionError("forward: layer " + std::to_string(i) + " expects input dimension " +
                           std::to_string(layer.in_dim()) + ", got " + std::to_string(x.rows()));
    Eigen::MatrixXd z = layer.weights * x;
    z.colwise() += layer.biases;
    Eigen::MatrixXd a = activate(z, layer.activation);
    Eigen::MatrixXd mask;
    Eigen::MatrixXd next;
    if (!dropout_masks.empty() && dropout_masks[i].size() > 0) {
      mask = dropout_masks[i];
      if (mask.rows() != a.rows() || mask.cols() != a.cols())
        throw DimensionError("forward: dropout mask shape mismatch at layer " + std::to_string(i));
      next = a.cwiseProduct(mask);
    } else {
      next = a;
    }
    rec.inputs.push_back(std::move(x));
    rec.activations.push_back(std::move(a));
    rec.masks.push_back(std::move(mask));
    x = std::move(next);
  }
  rec.output = std::move(x);
  return rec;
}

Eigen::VectorXd forward(std::span<const DenseLayer> layers, const Eigen::VectorXd& input) {
  Eigen::MatrixXd in = input;
  return forward(layers, in).output.col(0);
}

BackwardResult backward(std::span<const DenseLayer> layers, const ForwardRecord& record,
                        const Eigen::MatrixXd& output_gradient, const RegularizationSpec& reg) {
  if (record.activations.size() != layers.size() || record.inputs.size() != layers.size())
    throw DimensionError("backward: activation record does not match the layer stack");
  if (output_gradient.rows() != record.output.rows() || output_gradient.cols() != record.output.cols())
    throw DimensionError("backward: loss gradient shape does not match the network output");

  BackwardResult result;
  result.gradients.resize(layers.size());
  Eigen::MatrixXd grad = output_gradient;
  for (std::size_t k = layers.size(); k-- > 0;) {
    const auto& layer = layers[k];
    const auto& a = record.activations[k];
    if (a.rows() != layer.out_dim() || record.inputs[k].rows() != layer.in_dim())
      throw DimensionError("backward: activation record shape mismatch at layer " + std::to_string(k));
    if (record.masks[k].size() > 0) grad = grad.cwiseProduct(record.masks[k]);
    const Eigen::MatrixXd dz = grad.cwiseProduct(activation_derivative(a, layer.activation));
    auto& g = result.gradients[k];
    g.weights = dz * record.inputs[k].transpose();
    if (reg.l2_coefficient != 0.0) g.weights += 2.0 * reg.l2_coefficient * layer.weights;
    g.biases = dz.rowwise().sum();
    grad = layer.weights.transpose() * dz;
  }
  result.input_gradient = std::move(grad);
  return result;
}

double l2_penalty(std::span<const DenseLayer> layers, const RegularizationSpec& reg) {
  if (reg.l2_coefficient == 0.0) return 0.0;
  double sum = 0.0;
  for (const auto& layer : layers) sum += layer.weights.squaredNorm();
  return reg.l2_coefficient * sum;
}

std::vector<LayerGradients> zero_gradients(std::span<const DenseLayer> layers) {
  std::vector<LayerGradients> out;
  out.reserve(layers.size());
  for (const auto& l : layers)
    out.push_back({Eigen::MatrixXd::Zero(l.out_dim(), l.in_dim()), Eigen::VectorXd::Zero(l.out_dim())});
  return out;
}

void accumulate(std::vector<LayerGradients>& into, std::span<const LayerGradients> from) {
  if (into.size() != from.size()) throw DimensionError("accumulate: gradient list size mismatch");
  for (std::size_t i = 0; i < into.size(); ++i) {
    into[i].weights += from[i].weights;
    into[i].biases += from[i].biases;
  }
}

OptimizerState::OptimizerState(std::span<const DenseLayer> layers, double lr, double decay,
                               AdamSettings adam)
    : first_moment(zero_gradients(layers)),
      second_moment(zero_gradients(layers)),
      learning_rate(lr),
      decay_rate(decay),
      settings(adam) {
  if (!(lr > 0.0)) throw ValidationError("learning rate must be positive");
  if (!(decay > 0.0 && decay <= 1.0)) throw ValidationError("decay rate must be in (0, 1]");
}

void adam_step(OptimizerState& state, std::span<DenseLayer> params, std::span<const LayerGradients> grads) {
  if (params.size() != grads.size() || params.size() != state.first_moment.size())
    throw DimensionError("adam_step: parameter, gradient and state counts differ");
  ++state.step_count;
  const auto& s = state.settings;
  const double t = static_cast<double>(state.step_count);
  const double c1 = 1.0 - std::pow(s.beta1, t);
  const double c2 = 1.0 - std::pow(s.beta2, t);
  const double lr = state.learning_rate;

  auto update = [&](auto& param, const auto& grad, auto& m, auto& v) {
    if (param.rows() != grad.rows() || param.cols() != grad.cols() || m.rows() != param.rows() ||
        m.cols() != param.cols())
      throw DimensionError("adam_step: shape mismatch");
    m = s.beta1 * m + (1.0 - s.beta1) * grad;
    v = s.beta2 * v + (1.0 - s.beta2) * grad.cwiseAbs2();
    param.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + s.epsilon);
  };
  for (std::size_t i = 0; i < params.size(); ++i) {
    update(params[i].weights, grads[i].weights, state.first_moment[i].weights, state.second_moment[i].weights);
    update(params[i].biases, grads[i].biases, state.first_moment[i].biases, state.second_moment[i].biases);
  }
}

double grad_check(std::vector<DenseLayer>& params, const LossFunction& loss,
                  std::span<const LayerGradients> analytic, double h) {
  if (analytic.size() != params.size()) throw DimensionError("grad_check: gradient count mismatch");
  double worst = 0.0;
  auto probe = [&](double& value, double analytic_value) {
    const double saved = value;
    value = saved + h;
    const double plus = loss(params);
    value = saved - h;
    const double minus = loss(params);
    value = saved;
    const double numeric = (plus - minus) / (2.0 * h);
    const double denom = std::max({std::abs(analytic_value), std::abs(numeric), 1e-12});
    worst = std::max(worst, std::abs(analytic_value - numeric) / denom);
  };
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& layer = params[i];
    for (Eigen::Index r = 0; r < layer.weights.rows(); ++r)
      for (Eigen::Index c = 0; c < layer.weights.cols(); ++c) probe(layer.weights(r, c), analytic[i].weights(r, c));
    for (Eigen::Index r = 0; r < layer.biases.size(); ++r) probe(layer.biases(r), analytic[i].biases(r));
  }
  return worst;
}

bool all_finite(std::span<const DenseLayer> layers) {
  for (const auto& l : layers)
    if (!l.weights.allFinite() || !l.biases.allFinite()) return false;
  return true;
}

}  // namespace mmhs::nn
