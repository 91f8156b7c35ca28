#include "opshape/bot_env.hpp"

#include <algorithm>
#include <stdexcept>

namespace opshape {

void BotEnvConfig::validate() const {
  if (n_users < 2) throw std::invalid_argument("bot env: n_users must be >= 2");
  if (n_bots < 1) throw std::invalid_argument("bot env: n_bots must be >= 1");
  if (horizon < 1) throw std::invalid_argument("bot env: horizon must be >= 1");
  sbcm.validate();
}

double reward_bot(double mean_prev, double mean_next, int t, int horizon) {
  return (static_cast<double>(t) / static_cast<double>(horizon)) * (mean_next - mean_prev);
}

BotEnv::BotEnv(BotEnvConfig config) : config_(std::move(config)), rng_(config_.seed) {
  config_.validate();
  state_.users.assign(config_.n_users, 0.0);
  state_.bots.assign(config_.n_bots, 0.0);
}

std::vector<double> BotEnv::reset() { return reset_to(sample_uniform_opinions(config_.n_users, rng_)); }

std::vector<double> BotEnv::reset_to(std::vector<double> users) {
  if (users.size() != config_.n_users) throw std::invalid_argument("bot env: wrong number of users");
  state_.users = std::move(users);
  state_.bots.assign(config_.n_bots, 0.0);
  t_ = 0;
  last_reward_ = 0.0;
  active_ = true;
  return observation();
}

StepResult BotEnv::step(std::span<const double> action) {
  if (!active_ || done()) throw std::logic_error("episode done");
  if (action.size() != config_.n_bots) throw std::invalid_argument("bot env: action size mismatch");

  for (std::size_t i = 0; i < action.size(); ++i) state_.bots[i] = std::clamp(action[i], -1.0, 1.0);

  const double mean_prev = mean_opinion(state_);
  state_ = step_opinions(state_, config_.sbcm, rng_);
  ++t_;
  last_reward_ = reward_bot(mean_prev, mean_opinion(state_), t_, config_.horizon);
  return {observation(), last_reward_, done()};
}

StepRecord BotEnv::record() const {
  StepRecord r;
  r.t = t_;
  const OpinionStats s = opinion_stats(state_);
  r.mean = s.mean;
  r.std = s.std;
  r.reward = last_reward_;
  r.bots = state_.bots;
  r.users = state_.users;
  return r;
}

std::vector<double> BotEnv::observation() const {
  std::vector<double> obs(state_.users);
  obs.push_back(static_cast<double>(t_) / static_cast<double>(config_.horizon));
  return obs;
}

}  // namespace opshape
