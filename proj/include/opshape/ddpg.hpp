#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "opshape/env.hpp"
#include "opshape/mlp.hpp"
#include "opshape/rng.hpp"
#include "opshape/trace.hpp"

namespace opshape {

struct Transition {
  std::vector<double> state;
  std::vector<double> action;
  double reward = 0.0;
  std::vector<double> next_state;
  bool done = false;
};

/// Fixed-capacity FIFO experience store with uniform sampling.
class ReplayBuffer {
public:
  explicit ReplayBuffer(std::size_t capacity);

  void push(Transition t);
  std::size_t size() const { return size_; }
  std::size_t capacity() const { return capacity_; }

  /// i-th stored transition, oldest first.
  const Transition& at(std::size_t i) const;

  /// `count` transitions drawn uniformly with replacement.
  std::vector<const Transition*> sample(std::size_t count, RngStream& rng) const;

  void clear();

private:
  std::size_t capacity_;
  std::vector<Transition> storage_;
  std::size_t cursor_ = 0;
  std::size_t size_ = 0;
};

/// Discretized Ornstein-Uhlenbeck process with zero long-run mean:
/// x <- x - theta * x * dt + sigma * sqrt(dt) * N(0, 1).
struct OuNoise {
  OuNoise(std::size_t dim, double theta, double sigma, double dt);

  void reset();
  const std::vector<double>& sample(RngStream& rng);

  double theta;
  double sigma;
  double dt;
  std::vector<double> state;
};

struct DdpgConfig {
  double gamma = 0.99;
  double tau = 0.005;
  /// Multiplies rewards inside the critic's TD target only; logged rewards
  /// are unaffected.
  double reward_scale = 1.0;
  std::size_t batch_size = 128;
  std::size_t buffer_capacity = 100000;
  /// Updates start once the buffer holds max(train_start, batch_size) entries.
  std::size_t train_start = 1000;
  std::vector<std::size_t> hidden = {128, 128};
  double actor_lr = 1e-4;
  double critic_lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;
  double ou_theta = 0.15;
  double ou_sigma = 0.2;
  /// Exploration sigma reached at the last training episode (linear schedule).
  double ou_sigma_final = 0.05;
  double ou_dt = 1.0;
  /// Output-layer weights of actor and critic are redrawn from
  /// U(-final_layer_init, final_layer_init); 0 keeps the fan-in init.
  double final_layer_init = 3e-3;
  /// Weight of mean(z^2) added to the actor loss, z being the actor's
  /// pre-tanh output. Keeps the squashed action out of the flat tail of
  /// tanh where its gradient vanishes.
  double actor_preactivation_l2 = 0.0;

  void validate() const;
};

struct TrainStats {
  double critic_loss = 0.0;
  double actor_objective = 0.0;
};

/// Networks plus a free-form metadata record, as stored on disk:
///   char[8] magic "OPSDDPG1"
///   u64     metadata byte length, then the metadata bytes
///   four MLP blobs (see save_mlp): actor, critic, actor target, critic target
struct AgentCheckpoint {
  std::string metadata;
  Mlp actor, critic, actor_target, critic_target;
};

void save_checkpoint(const AgentCheckpoint& ckpt, std::ostream& os);
AgentCheckpoint load_checkpoint(std::istream& is);

class DdpgAgent {
public:
  DdpgAgent(std::size_t observation_size, std::size_t action_size, DdpgConfig config, std::uint64_t seed);

  std::size_t observation_size() const { return observation_size_; }
  std::size_t action_size() const { return action_size_; }
  const DdpgConfig& config() const { return config_; }

  /// Actor output, plus OU noise when exploring, clipped to [-1, 1].
  std::vector<double> select_action(std::span<const double> observation, bool explore);

  void store(Transition t);
  bool ready() const { return buffer_.size() >= std::max(config_.train_start, config_.batch_size); }

  /// Critic regression step, actor ascent step, then soft target updates,
  /// on a batch drawn from the replay buffer.
  TrainStats train_step();
  TrainStats train_step(std::span<const Transition* const> batch);

  /// Single Adam step of the critic toward r + gamma (1 - done) Q'(s', pi'(s')).
  /// Returns the pre-step mean squared TD error.
  double update_critic(std::span<const Transition* const> batch);
  /// Single Adam ascent step of the actor on mean Q(s, pi(s)).
  /// Returns the pre-step objective.
  double update_actor(std::span<const Transition* const> batch);
  void update_targets();

  void set_exploration_sigma(double sigma) { noise_.sigma = sigma; }
  void reset_noise() { noise_.reset(); }

  const Mlp& actor() const { return actor_; }
  const Mlp& critic() const { return critic_; }
  const Mlp& actor_target() const { return actor_target_; }
  const Mlp& critic_target() const { return critic_target_; }
  Mlp& actor() { return actor_; }
  Mlp& critic() { return critic_; }
  const ReplayBuffer& buffer() const { return buffer_; }
  const OuNoise& noise() const { return noise_; }
  RngStream& rng() { return rng_; }
  const RngStream& rng() const { return rng_; }

  /// Resets both targets to copies of the online networks.
  void sync_targets();

  /// FNV-1a over the bytes of every network parameter.
  std::uint64_t parameter_checksum() const;

  AgentCheckpoint snapshot(std::string metadata) const;
  void restore(const AgentCheckpoint& ckpt);

private:
  void require_initialized() const;

  std::size_t observation_size_;
  std::size_t action_size_;
  DdpgConfig config_;
  RngStream rng_;
  Mlp actor_, critic_, actor_target_, critic_target_;
  AdamState actor_opt_, critic_opt_;
  ReplayBuffer buffer_;
  OuNoise noise_;
};

enum class RunMode { train, eval };

/// Resets `env` and rolls one episode to completion. Training mode adds
/// exploration noise, stores every transition and runs one update per step
/// once the buffer is warm; evaluation mode touches no learner state.
template <EpisodicEnv Env>
EpisodeTrace run_episode(DdpgAgent& agent, Env& env, RunMode mode) {
  const bool train = mode == RunMode::train;
  EpisodeTrace trace;
  trace.scenario = Env::scenario;

  std::vector<double> obs = env.reset();
  if (train) agent.reset_noise();
  while (!env.done()) {
    std::vector<double> action = agent.select_action(obs, train);
    StepResult result = env.step(std::span<const double>(action));
    trace.records.push_back(env.record());
    if (train) {
      agent.store({std::move(obs), std::move(action), result.reward, result.observation, result.done});
      if (agent.ready()) agent.train_step();
    }
    obs = std::move(result.observation);
  }
  return trace;
}

}  // namespace opshape
