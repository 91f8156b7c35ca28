#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "opshape/rng.hpp"

namespace opshape {

enum class Activation : std::uint8_t { identity = 0, relu = 1, tanh = 2 };

struct Layer {
  Eigen::MatrixXd weights;  // out x in
  Eigen::VectorXd bias;     // out
  Activation activation = Activation::identity;
};

struct LayerSpec {
  std::size_t units;
  Activation activation;
};

struct Architecture {
  std::size_t inputs = 0;
  std::vector<LayerSpec> layers;
};

/// Dense feed-forward network. Batched calls take one sample per column.
struct Mlp {
  std::vector<Layer> layers;

  std::size_t input_size() const { return layers.empty() ? 0 : static_cast<std::size_t>(layers.front().weights.cols()); }
  std::size_t output_size() const { return layers.empty() ? 0 : static_cast<std::size_t>(layers.back().weights.rows()); }
  std::size_t param_count() const;
  Architecture architecture() const;

  /// Parameters in layer order: each layer's weights (column-major) then bias.
  std::vector<double> flat_params() const;
  void set_flat_params(std::span<const double> params);
};

/// Weights uniform on [-1/sqrt(fan_in), 1/sqrt(fan_in)], biases zero.
Mlp init_params(const Architecture& arch, RngStream& rng);

/// Post-activation outputs of every layer, with the input at index 0.
struct ForwardCache {
  std::vector<Eigen::MatrixXd> activations;
};

Eigen::MatrixXd forward(const Mlp& net, const Eigen::MatrixXd& inputs);
Eigen::MatrixXd forward(const Mlp& net, const Eigen::MatrixXd& inputs, ForwardCache& cache);
std::vector<double> forward(const Mlp& net, std::span<const double> input);

/// Pre-activation of the last layer for the cached forward pass.
Eigen::MatrixXd head_preactivation(const Mlp& net, const ForwardCache& cache);

/// Gradients of sum_j <output_j, output_grad_j> over the batch columns.
struct GradientBundle {
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> bias;
  Eigen::MatrixXd input;  // same shape as the forward input
};

GradientBundle backward(const Mlp& net, const ForwardCache& cache, const Eigen::MatrixXd& output_grad);
/// As above, plus `head_preactivation_grad` added directly to the gradient of
/// the last layer's pre-activation (for penalties on the pre-squash output).
GradientBundle backward(const Mlp& net, const ForwardCache& cache, const Eigen::MatrixXd& output_grad,
                        const Eigen::MatrixXd& head_preactivation_grad);
GradientBundle backward(const Mlp& net, std::span<const double> input, std::span<const double> output_grad);

struct AdamHyper {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  AdamHyper hyper;
  std::vector<Eigen::MatrixXd> m_weights, v_weights;
  std::vector<Eigen::VectorXd> m_bias, v_bias;
  std::int64_t step = 0;
};

AdamState make_adam(const Mlp& net, const AdamHyper& hyper);

/// One bias-corrected Adam descent step on `net` with gradients `grads`.
void adam_step(Mlp& net, const GradientBundle& grads, AdamState& opt);

/// target <- tau * online + (1 - tau) * target, parameter-wise.
void soft_update(Mlp& target, const Mlp& online, double tau);

bool same_architecture(const Mlp& a, const Mlp& b);

// Binary checkpoint (little-endian):
//   char[8]  magic "OPSMLP01"
//   u32      layer count L
//   L x { u32 inputs, u32 units, u8 activation }
//   f64[]    flat_params()
void save_mlp(const Mlp& net, std::ostream& os);
Mlp load_mlp(std::istream& is);

}  // namespace opshape
