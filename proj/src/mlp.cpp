#include "opshape/mlp.hpp"

#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <istream>
#include <ostream>
#include <stdexcept>

namespace opshape {

static_assert(std::endian::native == std::endian::little, "checkpoint layout assumes a little-endian host");

namespace {

void apply_activation(Eigen::MatrixXd& z, Activation act) {
  switch (act) {
    case Activation::identity:
      break;
    case Activation::relu:
      z = z.cwiseMax(0.0);
      break;
    case Activation::tanh:
      z = z.array().tanh().matrix();
      break;
  }
}

// Derivative expressed through the post-activation value a.
void scale_by_derivative(Eigen::MatrixXd& delta, const Eigen::MatrixXd& a, Activation act) {
  switch (act) {
    case Activation::identity:
      break;
    case Activation::relu:
      delta = (a.array() > 0.0).select(delta, 0.0);
      break;
    case Activation::tanh:
      delta = (delta.array() * (1.0 - a.array().square())).matrix();
      break;
  }
}

void check_shapes(const Mlp& target, const Mlp& source) {
  if (!same_architecture(target, source)) throw std::invalid_argument("mlp: architecture mismatch");
}

template <class T>
void write_pod(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T read_pod(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw std::runtime_error("mlp checkpoint: truncated stream");
  return v;
}

constexpr std::array<char, 8> kMagic = {'O', 'P', 'S', 'M', 'L', 'P', '0', '1'};

}  // namespace

std::size_t Mlp::param_count() const {
  std::size_t n = 0;
  for (const Layer& l : layers) n += static_cast<std::size_t>(l.weights.size() + l.bias.size());
  return n;
}

Architecture Mlp::architecture() const {
  Architecture arch;
  arch.inputs = input_size();
  for (const Layer& l : layers) arch.layers.push_back({static_cast<std::size_t>(l.weights.rows()), l.activation});
  return arch;
}

std::vector<double> Mlp::flat_params() const {
  std::vector<double> out;
  out.reserve(param_count());
  for (const Layer& l : layers) {
    out.insert(out.end(), l.weights.data(), l.weights.data() + l.weights.size());
    out.insert(out.end(), l.bias.data(), l.bias.data() + l.bias.size());
  }
  return out;
}

void Mlp::set_flat_params(std::span<const double> params) {
  if (params.size() != param_count()) throw std::invalid_argument("mlp: flat parameter count mismatch");
  std::size_t at = 0;
  for (Layer& l : layers) {
    std::memcpy(l.weights.data(), params.data() + at, sizeof(double) * l.weights.size());
    at += l.weights.size();
    std::memcpy(l.bias.data(), params.data() + at, sizeof(double) * l.bias.size());
    at += l.bias.size();
  }
}

Mlp init_params(const Architecture& arch, RngStream& rng) {
  if (arch.inputs == 0 || arch.layers.empty()) throw std::invalid_argument("mlp: empty architecture");
  Mlp net;
  std::size_t fan_in = arch.inputs;
  for (const LayerSpec& spec : arch.layers) {
    if (spec.units == 0) throw std::invalid_argument("mlp: layer with zero units");
    Layer layer;
    layer.activation = spec.activation;
    layer.weights.resize(static_cast<Eigen::Index>(spec.units), static_cast<Eigen::Index>(fan_in));
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (Eigen::Index j = 0; j < layer.weights.cols(); ++j)
      for (Eigen::Index i = 0; i < layer.weights.rows(); ++i) layer.weights(i, j) = rng.uniform(-bound, bound);
    layer.bias = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(spec.units));
    net.layers.push_back(std::move(layer));
    fan_in = spec.units;
  }
  return net;
}

Eigen::MatrixXd forward(const Mlp& net, const Eigen::MatrixXd& inputs) {
  if (net.layers.empty()) throw std::logic_error("mlp: network has no layers");
  if (static_cast<std::size_t>(inputs.rows()) != net.input_size())
    throw std::invalid_argument("mlp: input dimension mismatch");
  Eigen::MatrixXd a = inputs;
  for (const Layer& l : net.layers) {
    Eigen::MatrixXd z = l.weights * a;
    z.colwise() += l.bias;
    apply_activation(z, l.activation);
    a = std::move(z);
  }
  return a;
}

Eigen::MatrixXd forward(const Mlp& net, const Eigen::MatrixXd& inputs, ForwardCache& cache) {
  if (net.layers.empty()) throw std::logic_error("mlp: network has no layers");
  if (static_cast<std::size_t>(inputs.rows()) != net.input_size())
    throw std::invalid_argument("mlp: input dimension mismatch");
  cache.activations.resize(net.layers.size() + 1);
  cache.activations[0] = inputs;
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    const Layer& l = net.layers[i];
    Eigen::MatrixXd z = l.weights * cache.activations[i];
    z.colwise() += l.bias;
    apply_activation(z, l.activation);
    cache.activations[i + 1] = std::move(z);
  }
  return cache.activations.back();
}

std::vector<double> forward(const Mlp& net, std::span<const double> input) {
  const Eigen::Map<const Eigen::MatrixXd> x(input.data(), static_cast<Eigen::Index>(input.size()), 1);
  const Eigen::MatrixXd y = forward(net, Eigen::MatrixXd(x));
  return {y.data(), y.data() + y.size()};
}

namespace {

GradientBundle backward_impl(const Mlp& net, const ForwardCache& cache, const Eigen::MatrixXd& output_grad,
                             const Eigen::MatrixXd* head_preactivation_grad) {
  const std::size_t n_layers = net.layers.size();
  if (cache.activations.size() != n_layers + 1) throw std::invalid_argument("mlp: forward cache does not match network");
  const Eigen::MatrixXd& out = cache.activations.back();
  if (output_grad.rows() != out.rows() || output_grad.cols() != out.cols())
    throw std::invalid_argument("mlp: output gradient shape mismatch");
  if (head_preactivation_grad &&
      (head_preactivation_grad->rows() != out.rows() || head_preactivation_grad->cols() != out.cols()))
    throw std::invalid_argument("mlp: pre-activation gradient shape mismatch");

  GradientBundle g;
  g.weights.resize(n_layers);
  g.bias.resize(n_layers);

  Eigen::MatrixXd delta = output_grad;
  for (std::size_t i = n_layers; i-- > 0;) {
    const Layer& l = net.layers[i];
    scale_by_derivative(delta, cache.activations[i + 1], l.activation);
    if (i + 1 == n_layers && head_preactivation_grad) delta += *head_preactivation_grad;
    g.weights[i].noalias() = delta * cache.activations[i].transpose();
    g.bias[i] = delta.rowwise().sum();
    Eigen::MatrixXd upstream = l.weights.transpose() * delta;
    delta = std::move(upstream);
  }
  g.input = std::move(delta);
  return g;
}

}  // namespace

GradientBundle backward(const Mlp& net, const ForwardCache& cache, const Eigen::MatrixXd& output_grad) {
  return backward_impl(net, cache, output_grad, nullptr);
}

GradientBundle backward(const Mlp& net, const ForwardCache& cache, const Eigen::MatrixXd& output_grad,
                        const Eigen::MatrixXd& head_preactivation_grad) {
  return backward_impl(net, cache, output_grad, &head_preactivation_grad);
}

Eigen::MatrixXd head_preactivation(const Mlp& net, const ForwardCache& cache) {
  if (net.layers.empty() || cache.activations.size() != net.layers.size() + 1)
    throw std::invalid_argument("mlp: forward cache does not match network");
  Eigen::MatrixXd z = net.layers.back().weights * cache.activations[net.layers.size() - 1];
  z.colwise() += net.layers.back().bias;
  return z;
}

GradientBundle backward(const Mlp& net, std::span<const double> input, std::span<const double> output_grad) {
  const Eigen::Map<const Eigen::MatrixXd> x(input.data(), static_cast<Eigen::Index>(input.size()), 1);
  const Eigen::Map<const Eigen::MatrixXd> gy(output_grad.data(), static_cast<Eigen::Index>(output_grad.size()), 1);
  ForwardCache cache;
  forward(net, Eigen::MatrixXd(x), cache);
  return backward(net, cache, Eigen::MatrixXd(gy));
}

AdamState make_adam(const Mlp& net, const AdamHyper& hyper) {
  AdamState s;
  s.hyper = hyper;
  for (const Layer& l : net.layers) {
    s.m_weights.push_back(Eigen::MatrixXd::Zero(l.weights.rows(), l.weights.cols()));
    s.v_weights.push_back(Eigen::MatrixXd::Zero(l.weights.rows(), l.weights.cols()));
    s.m_bias.push_back(Eigen::VectorXd::Zero(l.bias.size()));
    s.v_bias.push_back(Eigen::VectorXd::Zero(l.bias.size()));
  }
  return s;
}

void adam_step(Mlp& net, const GradientBundle& grads, AdamState& opt) {
  const std::size_t n = net.layers.size();
  if (grads.weights.size() != n || grads.bias.size() != n || opt.m_weights.size() != n)
    throw std::invalid_argument("adam: shape mismatch");

  ++opt.step;
  const AdamHyper& h = opt.hyper;
  const double c1 = 1.0 - std::pow(h.beta1, static_cast<double>(opt.step));
  const double c2 = 1.0 - std::pow(h.beta2, static_cast<double>(opt.step));
  const double step_size = h.learning_rate / c1;
  const double sqrt_c2 = std::sqrt(c2);

  auto update = [&](auto& param, const auto& grad, auto& m, auto& v) {
    if (grad.rows() != param.rows() || grad.cols() != param.cols()) throw std::invalid_argument("adam: shape mismatch");
    m = h.beta1 * m + (1.0 - h.beta1) * grad;
    v = h.beta2 * v + (1.0 - h.beta2) * grad.cwiseProduct(grad);
    param.array() -= step_size * m.array() / (v.array().sqrt() / sqrt_c2 + h.epsilon);
  };

  for (std::size_t i = 0; i < n; ++i) {
    update(net.layers[i].weights, grads.weights[i], opt.m_weights[i], opt.v_weights[i]);
    update(net.layers[i].bias, grads.bias[i], opt.m_bias[i], opt.v_bias[i]);
  }
}

void soft_update(Mlp& target, const Mlp& online, double tau) {
  if (!(tau >= 0.0 && tau <= 1.0)) throw std::invalid_argument("soft_update: tau must lie in [0, 1]");
  check_shapes(target, online);
  if (tau == 1.0) {
    target = online;
    return;
  }
  for (std::size_t i = 0; i < target.layers.size(); ++i) {
    target.layers[i].weights = tau * online.layers[i].weights + (1.0 - tau) * target.layers[i].weights;
    target.layers[i].bias = tau * online.layers[i].bias + (1.0 - tau) * target.layers[i].bias;
  }
}

bool same_architecture(const Mlp& a, const Mlp& b) {
  if (a.layers.size() != b.layers.size()) return false;
  for (std::size_t i = 0; i < a.layers.size(); ++i) {
    const Layer& x = a.layers[i];
    const Layer& y = b.layers[i];
    if (x.weights.rows() != y.weights.rows() || x.weights.cols() != y.weights.cols() || x.activation != y.activation)
      return false;
  }
  return true;
}

void save_mlp(const Mlp& net, std::ostream& os) {
  os.write(kMagic.data(), kMagic.size());
  write_pod(os, static_cast<std::uint32_t>(net.layers.size()));
  for (const Layer& l : net.layers) {
    write_pod(os, static_cast<std::uint32_t>(l.weights.cols()));
    write_pod(os, static_cast<std::uint32_t>(l.weights.rows()));
    write_pod(os, static_cast<std::uint8_t>(l.activation));
  }
  const std::vector<double> params = net.flat_params();
  os.write(reinterpret_cast<const char*>(params.data()), static_cast<std::streamsize>(sizeof(double) * params.size()));
  if (!os) throw std::runtime_error("mlp checkpoint: write failed");
}

Mlp load_mlp(std::istream& is) {
  std::array<char, 8> magic{};
  is.read(magic.data(), magic.size());
  if (!is || magic != kMagic) throw std::runtime_error("mlp checkpoint: bad magic");
  const auto n_layers = read_pod<std::uint32_t>(is);
  if (n_layers == 0 || n_layers > 1024) throw std::runtime_error("mlp checkpoint: implausible layer count");

  Mlp net;
  std::uint32_t prev_units = 0;
  for (std::uint32_t i = 0; i < n_layers; ++i) {
    const auto inputs = read_pod<std::uint32_t>(is);
    const auto units = read_pod<std::uint32_t>(is);
    const auto act = read_pod<std::uint8_t>(is);
    if (act > static_cast<std::uint8_t>(Activation::tanh)) throw std::runtime_error("mlp checkpoint: unknown activation");
    if (inputs == 0 || units == 0 || (i > 0 && inputs != prev_units))
      throw std::runtime_error("mlp checkpoint: layer dimensions do not chain");
    Layer l;
    l.weights.resize(units, inputs);
    l.bias.resize(units);
    l.activation = static_cast<Activation>(act);
    net.layers.push_back(std::move(l));
    prev_units = units;
  }
  std::vector<double> params(net.param_count());
  is.read(reinterpret_cast<char*>(params.data()), static_cast<std::streamsize>(sizeof(double) * params.size()));
  if (!is) throw std::runtime_error("mlp checkpoint: truncated parameters");
  net.set_flat_params(params);
  return net;
}

}  // namespace opshape
