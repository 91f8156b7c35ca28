#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "opshape/env.hpp"
#include "opshape/rng.hpp"
#include "opshape/sbcm.hpp"
#include "opshape/trace.hpp"

namespace opshape {

struct BotEnvConfig {
  std::size_t n_users = 50;
  std::size_t n_bots = 20;
  int horizon = 100;
  SbcmParams sbcm;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Time-scaled mean shift: (t / T) * (mean_next - mean_prev).
double reward_bot(double mean_prev, double mean_next, int t, int horizon);

/// User-bot scenario. Each step the agent places every bot on the opinion
/// axis, then users take one SBCM step with bots in their candidate pool.
/// Observation: user opinions followed by t / T.
class BotEnv {
public:
  static constexpr Scenario scenario = Scenario::bot;

  explicit BotEnv(BotEnvConfig config);

  std::size_t observation_size() const { return config_.n_users + 1; }
  std::size_t action_size() const { return config_.n_bots; }

  void reseed(std::uint64_t seed) { rng_.reseed(seed); }
  std::vector<double> reset();
  /// Starts an episode from the given user opinions instead of U(-1, 1).
  std::vector<double> reset_to(std::vector<double> users);
  StepResult step(std::span<const double> action);

  /// Log record of the state reached by the last step.
  StepRecord record() const;

  const OpinionState& state() const { return state_; }
  const BotEnvConfig& config() const { return config_; }
  int time() const { return t_; }
  bool done() const { return t_ >= config_.horizon; }

private:
  std::vector<double> observation() const;

  BotEnvConfig config_;
  RngStream rng_;
  OpinionState state_;
  int t_ = 0;
  double last_reward_ = 0.0;
  bool active_ = false;
};

}  // namespace opshape
