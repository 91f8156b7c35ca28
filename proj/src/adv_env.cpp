#include "opshape/adv_env.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace opshape {

void AdvEnvConfig::validate() const {
  if (n_users < 2) throw std::invalid_argument("advertising env: n_users must be >= 2");
  if (horizon < 1) throw std::invalid_argument("advertising env: horizon must be >= 1");
  if (!(initial_budget >= 0.0)) throw std::invalid_argument("advertising env: initial_budget must be >= 0");
  if (!(cost_range_scale >= 0.0) || !(cost_opinion_scale >= 0.0))
    throw std::invalid_argument("advertising env: cost scales must be >= 0");
  if (!(range_exponent > 0.0) || !(opinion_exponent > 0.0))
    throw std::invalid_argument("advertising env: cost exponents must be > 0");
  sbcm.validate();
}

AdAction AdAction::clipped() const {
  return {std::clamp(location, -1.0, 1.0), std::clamp(range, 0.0, 1.0)};
}

AdAction AdAction::from_actor_output(std::span<const double> raw) {
  if (raw.size() != 2) throw std::invalid_argument("advertising env: action must have 2 components");
  return AdAction{raw[0], 0.5 * (raw[1] + 1.0)}.clipped();
}

double advertising_cost(const AdAction& action, const AdvEnvConfig& config) {
  const double range_cost = config.cost_range_scale * std::expm1(action.range * config.range_exponent);
  const double opinion_cost = config.cost_opinion_scale * std::expm1(std::abs(action.location) * config.opinion_exponent);
  return range_cost + opinion_cost;
}

OpinionState apply_advertisement(const OpinionState& state, const AdAction& action, const SbcmParams& params,
                                 RngStream& rng, std::size_t sampled_users) {
  const AdAction ad = action.clipped();
  OpinionState next = state;

  std::vector<std::size_t> reached;
  for (std::size_t u = 0; u < state.users.size(); ++u)
    if (std::abs(state.users[u] - ad.location) <= ad.range) reached.push_back(u);

  if (sampled_users > 0 && reached.size() > sampled_users) {
    std::vector<double> positions;
    positions.reserve(reached.size());
    for (std::size_t u : reached) positions.push_back(state.users[u]);
    // Weight of user u is |x_u - A_l|^(-epsilon), the ad acting as the fixed partner.
    std::vector<double> weights(positions.size());
    for (std::size_t i = 0; i < positions.size(); ++i) {
      const double d = std::max(std::abs(positions[i] - ad.location), params.distance_floor);
      weights[i] = -params.epsilon * std::log(d);
    }
    const double top = *std::max_element(weights.begin(), weights.end());
    for (double& w : weights) w = std::exp(w - top);
    std::vector<std::size_t> chosen = detail::draw_without_replacement(weights, sampled_users, rng);
    std::sort(chosen.begin(), chosen.end());
    std::vector<std::size_t> subset;
    subset.reserve(chosen.size());
    for (std::size_t i : chosen) subset.push_back(reached[i]);
    reached = std::move(subset);
  }

  for (std::size_t u : reached) {
    double x = state.users[u] + params.mu * (ad.location - state.users[u]);
    if (params.clamp_opinions) x = std::clamp(x, -1.0, 1.0);
    next.users[u] = x;
  }
  return next;
}

double reward_adv(double mean_prev, double mean_next, int t, int horizon, double budget_after, double step_cost) {
  const double base = reward_bot(mean_prev, mean_next, t, horizon);
  return budget_after >= 0.0 ? base : base - step_cost;
}

AdvEnv::AdvEnv(AdvEnvConfig config) : config_(std::move(config)), rng_(config_.seed) {
  config_.validate();
  state_.users.assign(config_.n_users, 0.0);
  budget_ = config_.initial_budget;
}

std::vector<double> AdvEnv::reset() { return reset_to(sample_uniform_opinions(config_.n_users, rng_)); }

std::vector<double> AdvEnv::reset_to(std::vector<double> users) {
  if (users.size() != config_.n_users) throw std::invalid_argument("advertising env: wrong number of users");
  state_.users = std::move(users);
  state_.bots.clear();
  t_ = 0;
  budget_ = config_.initial_budget;
  last_reward_ = 0.0;
  last_cost_ = 0.0;
  last_action_ = {};
  active_ = true;
  return observation();
}

StepResult AdvEnv::step(const AdAction& action) {
  if (!active_ || done()) throw std::logic_error("episode done");
  const AdAction ad = action.clipped();

  const double cost = advertising_cost(ad, config_);
  budget_ -= cost;

  const double mean_prev = mean_opinion(state_);
  const OpinionState advertised = apply_advertisement(state_, ad, config_.sbcm, rng_, config_.ad_sampled_users);
  state_ = step_opinions(advertised, config_.sbcm, rng_);
  ++t_;

  last_cost_ = cost;
  last_action_ = ad;
  last_reward_ = reward_adv(mean_prev, mean_opinion(state_), t_, config_.horizon, budget_, cost);
  return {observation(), last_reward_, done()};
}

StepRecord AdvEnv::record() const {
  StepRecord r;
  r.t = t_;
  const OpinionStats s = opinion_stats(state_);
  r.mean = s.mean;
  r.std = s.std;
  r.reward = last_reward_;
  r.cost = last_cost_;
  r.budget = budget_;
  r.ad_location = last_action_.location;
  r.ad_range = last_action_.range;
  return r;
}

std::vector<double> AdvEnv::observation() const {
  std::vector<double> obs(state_.users);
  obs.push_back(static_cast<double>(t_) / static_cast<double>(config_.horizon));
  obs.push_back(config_.initial_budget > 0.0 ? budget_ / config_.initial_budget : 0.0);
  return obs;
}

}  // namespace opshape
