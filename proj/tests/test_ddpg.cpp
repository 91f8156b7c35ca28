#include <doctest.h>

#include <cmath>
#include <sstream>

#include "opshape/bot_env.hpp"
#include "opshape/ddpg.hpp"
#include "oracles.hpp"
#include "toy_task.hpp"

using namespace opshape;

namespace {

Transition random_transition(RngStream& rng, std::size_t obs, std::size_t act, bool done) {
  Transition t;
  for (std::size_t i = 0; i < obs; ++i) t.state.push_back(rng.uniform(-1, 1));
  for (std::size_t i = 0; i < act; ++i) t.action.push_back(rng.uniform(-1, 1));
  for (std::size_t i = 0; i < obs; ++i) t.next_state.push_back(rng.uniform(-1, 1));
  t.reward = rng.uniform(-1, 1);
  t.done = done;
  return t;
}

double q_value(const Mlp& critic, const std::vector<double>& s, const std::vector<double>& a) {
  std::vector<double> in = s;
  in.insert(in.end(), a.begin(), a.end());
  return forward(critic, in)[0];
}

double param_distance(const Mlp& a, const Mlp& b) {
  const auto x = a.flat_params(), y = b.flat_params();
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += (x[i] - y[i]) * (x[i] - y[i]);
  return std::sqrt(s);
}

DdpgConfig small_config() {
  DdpgConfig c;
  c.hidden = {16, 16};
  c.batch_size = 8;
  c.train_start = 8;
  return c;
}

}  // namespace

TEST_CASE("OU noise: sigma 0 decays geometrically") {
  OuNoise n(3, 0.15, 0.0, 1.0);
  n.state = {1.0, -2.0, 0.5};
  RngStream rng(1);
  for (int k = 1; k <= 30; ++k) {
    n.sample(rng);
    CHECK(n.state[0] == doctest::Approx(std::pow(0.85, k)).epsilon(1e-12));
    CHECK(n.state[1] == doctest::Approx(-2.0 * std::pow(0.85, k)).epsilon(1e-12));
  }
  n.reset();
  CHECK(n.state == std::vector<double>(3, 0.0));
}

TEST_CASE("OU noise: theta 0 is a Gaussian random walk") {
  const std::size_t dim = 4000;
  OuNoise n(dim, 0.0, 0.2, 1.0);
  RngStream rng(2);
  for (int k = 0; k < 100; ++k) n.sample(rng);
  double s = 0.0;
  for (double v : n.state) s += v * v;
  const double sd = std::sqrt(s / dim);
  CHECK(sd == doctest::Approx(0.2 * 10.0).epsilon(0.1));
}

TEST_CASE("OU noise: stationary variance of the discretized process") {
  const double theta = 0.15, sigma = 0.2, dt = 1.0;
  OuNoise n(1, theta, sigma, dt);
  RngStream rng(3);
  for (int k = 0; k < 1000; ++k) n.sample(rng);
  double s = 0.0;
  const int steps = 100000;
  for (int k = 0; k < steps; ++k) s += std::pow(n.sample(rng)[0], 2);
  const double expected = sigma * sigma * dt / (2 * theta * dt - theta * theta * dt * dt);
  CHECK(s / steps == doctest::Approx(expected).epsilon(0.1));
}

TEST_CASE("select_action: deterministic without noise and clipped with it") {
  DdpgAgent agent(5, 3, small_config(), 11);
  const std::vector<double> obs = {0.1, -0.2, 0.3, 0.4, -0.5};
  const auto a = agent.select_action(obs, false);
  CHECK(a.size() == 3);
  CHECK(agent.select_action(obs, false) == a);

  agent.set_exploration_sigma(50.0);
  for (int i = 0; i < 200; ++i)
    for (double v : agent.select_action(obs, true)) CHECK((v >= -1.0 && v <= 1.0));
  CHECK_THROWS_AS(agent.select_action(std::vector<double>(4, 0.0), false), std::invalid_argument);
}

TEST_CASE("replay buffer: FIFO eviction at capacity") {
  ReplayBuffer buf(3);
  for (int i = 1; i <= 4; ++i) buf.push({{double(i)}, {0.0}, double(i), {0.0}, false});
  CHECK(buf.size() == 3);
  CHECK(buf.at(0).reward == 2.0);
  CHECK(buf.at(1).reward == 3.0);
  CHECK(buf.at(2).reward == 4.0);
  CHECK_THROWS_AS(buf.at(3), std::out_of_range);
  buf.clear();
  CHECK(buf.size() == 0);
}

TEST_CASE("replay buffer: sampling is uniform") {
  ReplayBuffer buf(5);
  for (int i = 0; i < 5; ++i) buf.push({{}, {}, double(i), {}, false});
  RngStream rng(4);
  std::vector<double> counts(5, 0.0);
  for (const Transition* t : buf.sample(20000, rng)) counts[static_cast<std::size_t>(t->reward)] += 1;
  CHECK(oracle::chi_square_p(counts, std::vector<double>(5, 0.2)) > 1e-3);
}

TEST_CASE("updates wait for the warm-up threshold") {
  DdpgConfig c = small_config();
  c.train_start = 20;
  c.batch_size = 8;
  DdpgAgent agent(2, 1, c, 5);
  RngStream rng(5);
  for (int i = 0; i < 19; ++i) {
    agent.store(random_transition(rng, 2, 1, false));
    CHECK_FALSE(agent.ready());
  }
  agent.store(random_transition(rng, 2, 1, false));
  CHECK(agent.ready());
}

TEST_CASE("critic target: reward only with gamma 0 or terminal transitions") {
  RngStream rng(6);
  for (const bool use_done : {false, true}) {
    DdpgConfig c = small_config();
    c.gamma = use_done ? 0.99 : 0.0;
    DdpgAgent agent(3, 2, c, 7);
    std::vector<Transition> data;
    for (int i = 0; i < 8; ++i) data.push_back(random_transition(rng, 3, 2, use_done));
    std::vector<const Transition*> batch;
    for (const auto& t : data) batch.push_back(&t);
    double expected = 0.0;
    for (const auto& t : data) expected += std::pow(q_value(agent.critic(), t.state, t.action) - t.reward, 2);
    CHECK(agent.update_critic(batch) == doctest::Approx(expected / 8).epsilon(1e-12));
  }
}

TEST_CASE("critic target: bootstraps through the target networks") {
  RngStream rng(8);
  DdpgConfig c = small_config();
  c.reward_scale = 3.0;
  DdpgAgent agent(3, 2, c, 9);
  std::vector<Transition> data;
  for (int i = 0; i < 8; ++i) data.push_back(random_transition(rng, 3, 2, false));
  std::vector<const Transition*> batch;
  for (const auto& t : data) batch.push_back(&t);
  double expected = 0.0;
  for (const auto& t : data) {
    const auto next_a = forward(agent.actor_target(), t.next_state);
    const double y = 3.0 * t.reward + 0.99 * q_value(agent.critic_target(), t.next_state, next_a);
    expected += std::pow(q_value(agent.critic(), t.state, t.action) - y, 2);
  }
  CHECK(agent.update_critic(batch) == doctest::Approx(expected / 8).epsilon(1e-12));
}

TEST_CASE("critic loss decreases on a fixed regression batch") {
  RngStream rng(10);
  DdpgConfig c = small_config();
  c.gamma = 0.0;
  c.batch_size = 32;
  DdpgAgent agent(2, 1, c, 11);
  std::vector<Transition> data;
  for (int i = 0; i < 32; ++i) data.push_back(random_transition(rng, 2, 1, false));
  std::vector<const Transition*> batch;
  for (const auto& t : data) batch.push_back(&t);
  double prev = agent.update_critic(batch);
  const double first = prev;
  for (int k = 0; k < 50; ++k) {
    const double loss = agent.update_critic(batch);
    CHECK(loss < prev);
    prev = loss;
  }
  CHECK(prev < first);
}

TEST_CASE("actor ascent raises the critic's value of its own actions") {
  RngStream rng(12);
  DdpgAgent agent(2, 1, small_config(), 13);
  std::vector<Transition> data;
  for (int i = 0; i < 8; ++i) data.push_back(random_transition(rng, 2, 1, false));
  std::vector<const Transition*> batch;
  for (const auto& t : data) batch.push_back(&t);
  const double before = agent.update_actor(batch);
  CHECK(agent.update_actor(batch) > before);
}

TEST_CASE("targets start equal and track by (1 - tau)^k") {
  DdpgConfig c = small_config();
  c.tau = 0.05;
  DdpgAgent agent(3, 2, c, 14);
  CHECK(agent.actor_target().flat_params() == agent.actor().flat_params());
  CHECK(agent.critic_target().flat_params() == agent.critic().flat_params());

  std::vector<double> p = agent.actor().flat_params();
  for (double& v : p) v += 0.5;
  agent.actor().set_flat_params(p);
  const double d0 = param_distance(agent.actor_target(), agent.actor());
  for (int k = 1; k <= 40; ++k) {
    agent.update_targets();
    CHECK(param_distance(agent.actor_target(), agent.actor()) ==
          doctest::Approx(d0 * std::pow(0.95, k)).epsilon(1e-9));
  }
}

TEST_CASE("evaluation episodes leave the agent untouched") {
  BotEnvConfig ec;
  ec.n_users = 10;
  ec.n_bots = 3;
  ec.horizon = 15;
  BotEnv env(ec);
  DdpgAgent agent(env.observation_size(), env.action_size(), small_config(), 15);
  const auto checksum = agent.parameter_checksum();
  const RngStream rng_before = agent.rng();
  const EpisodeTrace trace = run_episode(agent, env, RunMode::eval);
  CHECK(trace.records.size() == 15);
  CHECK(agent.parameter_checksum() == checksum);
  CHECK(agent.rng() == rng_before);
  CHECK(agent.buffer().size() == 0);
}

TEST_CASE("a training episode stores one transition per step") {
  BotEnvConfig ec;
  ec.n_users = 10;
  ec.n_bots = 3;
  ec.horizon = 15;
  BotEnv env(ec);
  DdpgAgent agent(env.observation_size(), env.action_size(), small_config(), 16);
  const auto checksum = agent.parameter_checksum();
  run_episode(agent, env, RunMode::train);
  CHECK(agent.buffer().size() == 15);
  CHECK(agent.buffer().at(14).done);
  CHECK_FALSE(agent.buffer().at(13).done);
  CHECK(agent.parameter_checksum() != checksum);
}

TEST_CASE("checkpoint round trip restores identical behaviour") {
  DdpgAgent agent(4, 2, small_config(), 17);
  RngStream rng(18);
  for (int i = 0; i < 30; ++i) agent.store(random_transition(rng, 4, 2, false));
  for (int i = 0; i < 10; ++i) agent.train_step();

  std::stringstream ss;
  save_checkpoint(agent.snapshot("{\"k\":1}"), ss);
  const AgentCheckpoint back = load_checkpoint(ss);
  CHECK(back.metadata == "{\"k\":1}");

  DdpgAgent fresh(4, 2, small_config(), 99);
  fresh.restore(back);
  CHECK(fresh.parameter_checksum() == agent.parameter_checksum());
  const std::vector<double> obs = {0.3, 0.1, -0.9, 0.2};
  CHECK(fresh.select_action(obs, false) == agent.select_action(obs, false));

  DdpgAgent wrong(5, 2, small_config(), 1);
  CHECK_THROWS(wrong.restore(back));
}

TEST_CASE("invalid hyperparameters are rejected") {
  DdpgConfig c;
  c.tau = 1.5;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = DdpgConfig{};
  c.gamma = -0.1;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = DdpgConfig{};
  c.batch_size = 0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
}

TEST_CASE("learns the optimum of a one-step quadratic bandit") {
  const double a = toy::train(1, 2000);
  CHECK(std::abs(a - 0.5) < 0.05);
}
