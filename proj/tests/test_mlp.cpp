#include <doctest.h>

#include <cmath>
#include <sstream>

#include "gradcheck.hpp"
#include "opshape/mlp.hpp"

using namespace opshape;

using gradcheck::gradient_check;
using gradcheck::random_arch;

TEST_CASE("forward: identity, bias-only and tanh range") {
  Mlp id;
  id.layers.push_back({Eigen::MatrixXd::Identity(3, 3), Eigen::VectorXd::Zero(3), Activation::identity});
  const std::vector<double> x = {0.3, -2.0, 7.5};
  CHECK(forward(id, x) == x);

  Mlp bias;
  Eigen::VectorXd b(2);
  b << 0.25, -1.5;
  bias.layers.push_back({Eigen::MatrixXd::Zero(2, 3), b, Activation::identity});
  CHECK(forward(bias, x) == std::vector<double>{0.25, -1.5});

  RngStream rng(1);
  Mlp t = init_params({4, {{8, Activation::relu}, {3, Activation::tanh}}}, rng);
  for (Layer& l : t.layers) l.weights *= 50.0;
  for (int i = 0; i < 100; ++i) {
    std::vector<double> in(4);
    for (double& v : in) v = rng.uniform(-10, 10);
    for (double y : forward(t, in)) CHECK(std::abs(y) <= 1.0);
  }
  CHECK_THROWS_AS(forward(t, std::vector<double>(5, 0.0)), std::invalid_argument);
}

TEST_CASE("backward: linear layer closed form") {
  Eigen::MatrixXd w(2, 3);
  w << 1, 2, 3, -1, 0.5, 4;
  Eigen::VectorXd b(2);
  b << 0.1, -0.2;
  Mlp net;
  net.layers.push_back({w, b, Activation::identity});
  const std::vector<double> x = {0.5, -1.0, 2.0};
  const std::vector<double> g = {1.5, -2.0};
  const GradientBundle gr = backward(net, x, g);
  const Eigen::Vector2d gv(1.5, -2.0);
  const Eigen::Vector3d xv(0.5, -1.0, 2.0);
  CHECK((gr.weights[0] - gv * xv.transpose()).norm() < 1e-15);
  CHECK((gr.bias[0] - gv).norm() < 1e-15);
  CHECK((gr.input.col(0) - w.transpose() * gv).norm() < 1e-14);
}

TEST_CASE("backward: relu blocks negative pre-activations") {
  Mlp net;
  Eigen::MatrixXd w(2, 1);
  w << 1.0, -1.0;
  net.layers.push_back({w, Eigen::VectorXd::Zero(2), Activation::relu});
  const GradientBundle gr = backward(net, std::vector<double>{2.0}, std::vector<double>{1.0, 1.0});
  CHECK(gr.weights[0](0, 0) == 2.0);
  CHECK(gr.weights[0](1, 0) == 0.0);
  CHECK(gr.bias[0](1) == 0.0);
  CHECK(gr.input(0, 0) == 1.0);
}

TEST_CASE("backward matches central finite differences on random nets") {
  RngStream rng(2025);
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const Mlp net = gradcheck::random_net(rng);
    std::vector<double> x(net.input_size()), g(net.output_size());
    for (double& v : x) v = rng.uniform(-1, 1);
    for (double& v : g) v = rng.uniform(-1, 1);
    worst = std::max(worst, gradient_check(net, x, g));
  }
  CHECK(worst < 1e-4);
}

TEST_CASE("batched backward sums per-sample gradients") {
  RngStream rng(6);
  const Mlp net = init_params({3, {{5, Activation::tanh}, {2, Activation::identity}}}, rng);
  Eigen::MatrixXd xs = Eigen::MatrixXd::Random(3, 4);
  Eigen::MatrixXd gs = Eigen::MatrixXd::Random(2, 4);
  ForwardCache cache;
  forward(net, xs, cache);
  const GradientBundle batch = backward(net, cache, gs);
  Eigen::MatrixXd w0 = Eigen::MatrixXd::Zero(5, 3);
  for (int j = 0; j < 4; ++j) {
    std::vector<double> x(xs.col(j).data(), xs.col(j).data() + 3);
    std::vector<double> g(gs.col(j).data(), gs.col(j).data() + 2);
    const GradientBundle single = backward(net, x, g);
    w0 += single.weights[0];
    CHECK((single.input.col(0) - batch.input.col(j)).norm() < 1e-14);
  }
  CHECK((w0 - batch.weights[0]).norm() < 1e-13);
}

TEST_CASE("head pre-activation gradient is added before the last layer's weights") {
  RngStream rng(8);
  const Mlp net = init_params({2, {{4, Activation::relu}, {1, Activation::tanh}}}, rng);
  Eigen::MatrixXd x(2, 1);
  x << 0.3, -0.7;
  ForwardCache cache;
  forward(net, x, cache);
  const Eigen::MatrixXd zero = Eigen::MatrixXd::Zero(1, 1);
  const Eigen::MatrixXd one = Eigen::MatrixXd::Ones(1, 1);
  const GradientBundle g = backward(net, cache, zero, one);
  // d z / d bias of the head is exactly 1.
  CHECK(g.bias[1](0) == doctest::Approx(1.0));
  const Eigen::MatrixXd z = head_preactivation(net, cache);
  CHECK(std::tanh(z(0, 0)) == doctest::Approx(cache.activations.back()(0, 0)));
}

TEST_CASE("adam: zero gradient is a no-op, first step has size lr") {
  RngStream rng(3);
  Mlp net = init_params({3, {{2, Activation::identity}}}, rng);
  const Mlp before = net;
  AdamState opt = make_adam(net, {0.01, 0.9, 0.999, 1e-8});
  GradientBundle zero{{Eigen::MatrixXd::Zero(2, 3)}, {Eigen::VectorXd::Zero(2)}, {}};
  adam_step(net, zero, opt);
  CHECK(net.flat_params() == before.flat_params());

  Mlp fresh = before;
  AdamState opt2 = make_adam(fresh, {0.01, 0.9, 0.999, 1e-8});
  GradientBundle g{{Eigen::MatrixXd::Constant(2, 3, 0.37)}, {Eigen::VectorXd::Constant(2, -4.0)}, {}};
  adam_step(fresh, g, opt2);
  const auto a = before.flat_params(), b = fresh.flat_params();
  for (std::size_t i = 0; i < 6; ++i) CHECK(b[i] - a[i] == doctest::Approx(-0.01).epsilon(1e-6));
  for (std::size_t i = 6; i < 8; ++i) CHECK(b[i] - a[i] == doctest::Approx(0.01).epsilon(1e-6));
}

TEST_CASE("adam: converges on a 1-D convex quadratic") {
  Mlp net;
  net.layers.push_back({Eigen::MatrixXd::Zero(1, 1), Eigen::VectorXd::Zero(1), Activation::identity});
  AdamState opt = make_adam(net, {1e-2, 0.9, 0.999, 1e-8});
  const double target = 1.0;
  for (int i = 0; i < 500; ++i) {
    const double w = net.layers[0].weights(0, 0);
    GradientBundle g{{Eigen::MatrixXd::Constant(1, 1, 2.0 * (w - target))}, {Eigen::VectorXd::Zero(1)}, {}};
    adam_step(net, g, opt);
  }
  CHECK(std::abs(net.layers[0].weights(0, 0) - target) < 1e-3);
}

TEST_CASE("soft_update") {
  RngStream rng(4);
  const Architecture arch{3, {{4, Activation::relu}, {1, Activation::identity}}};
  const Mlp online = init_params(arch, rng);
  Mlp target = init_params(arch, rng);
  const Mlp start = target;

  Mlp t1 = target;
  soft_update(t1, online, 1.0);
  CHECK(t1.flat_params() == online.flat_params());
  Mlp t0 = target;
  soft_update(t0, online, 0.0);
  CHECK(t0.flat_params() == start.flat_params());

  Mlp zero = online, ones = online;
  zero.set_flat_params(std::vector<double>(online.param_count(), 0.0));
  ones.set_flat_params(std::vector<double>(online.param_count(), 1.0));
  soft_update(zero, ones, 0.5);
  for (double v : zero.flat_params()) CHECK(v == 0.5);

  // Distance to the online net shrinks by (1 - tau) per call.
  auto dist = [&](const Mlp& m) {
    const auto a = m.flat_params(), b = online.flat_params();
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(s);
  };
  const double d0 = dist(target);
  for (int k = 1; k <= 20; ++k) {
    soft_update(target, online, 0.1);
    CHECK(dist(target) == doctest::Approx(d0 * std::pow(0.9, k)).epsilon(1e-9));
  }

  const Mlp other = init_params({3, {{5, Activation::relu}, {1, Activation::identity}}}, rng);
  CHECK_THROWS_AS(soft_update(target, other, 0.5), std::invalid_argument);
}

TEST_CASE("init_params: bounds, determinism, centring") {
  RngStream a(10), b(10);
  const Architecture arch{100, {{50, Activation::relu}, {2, Activation::tanh}}};
  const Mlp na = init_params(arch, a);
  const Mlp nb = init_params(arch, b);
  CHECK(na.flat_params() == nb.flat_params());
  CHECK(na.layers[0].weights.cwiseAbs().maxCoeff() <= 0.1);
  CHECK(na.layers[0].bias.isZero());

  RngStream c(11);
  const Mlp wide = init_params({1000, {{100, Activation::identity}}}, c);
  const double n = static_cast<double>(wide.layers[0].weights.size());
  const double mean = wide.layers[0].weights.mean();
  const double sigma = (1.0 / std::sqrt(1000.0)) / std::sqrt(3.0);
  CHECK(std::abs(mean) < 3.0 * sigma / std::sqrt(n));
}

TEST_CASE("forward is pure") {
  RngStream rng(12);
  const Mlp net = init_params({6, {{9, Activation::tanh}, {3, Activation::relu}}}, rng);
  const std::vector<double> x = {0.1, 0.2, -0.3, 0.4, -0.5, 0.6};
  const auto y1 = forward(net, x);
  for (int i = 0; i < 10; ++i) CHECK(forward(net, x) == y1);
}

TEST_CASE("checkpoint round trip is bit exact") {
  RngStream rng(13);
  for (int trial = 0; trial < 10; ++trial) {
    const Mlp net = init_params(random_arch(rng), rng);
    std::stringstream ss;
    save_mlp(net, ss);
    const Mlp back = load_mlp(ss);
    CHECK(same_architecture(net, back));
    CHECK(back.flat_params() == net.flat_params());
    std::stringstream again;
    save_mlp(back, again);
    std::stringstream first;
    save_mlp(net, first);
    CHECK(again.str() == first.str());
  }
}

TEST_CASE("checkpoint: corrupt input is rejected") {
  std::stringstream bad("not a checkpoint");
  CHECK_THROWS(load_mlp(bad));
  RngStream rng(14);
  const Mlp net = init_params({2, {{3, Activation::relu}}}, rng);
  std::stringstream ss;
  save_mlp(net, ss);
  std::string bytes = ss.str();
  bytes.resize(bytes.size() - 4);
  std::stringstream truncated(bytes);
  CHECK_THROWS(load_mlp(truncated));
}
