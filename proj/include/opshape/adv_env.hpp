#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "opshape/bot_env.hpp"
#include "opshape/rng.hpp"
#include "opshape/sbcm.hpp"
#include "opshape/trace.hpp"

namespace opshape {

struct AdvEnvConfig {
  std::size_t n_users = 50;
  int horizon = 100;
  double initial_budget = 10.0;
  double cost_range_scale = 0.05;    // C_r
  double cost_opinion_scale = 0.05;  // C_o
  double range_exponent = 1.5;       // p
  double opinion_exponent = 1.5;     // q
  /// 0: every in-range user interacts with the ad. k > 0: only k in-range
  /// users, drawn with interaction weights toward the ad location.
  std::size_t ad_sampled_users = 0;
  SbcmParams sbcm;
  std::uint64_t seed = 0;

  void validate() const;
};

struct AdAction {
  double location = 0.0;  // A_l in [-1, 1]
  double range = 0.0;     // A_r in [0, 1]

  AdAction clipped() const;
  /// Maps a raw actor output in [-1, 1]^2 to an ad: location is taken as is,
  /// range is rescaled from [-1, 1] to [0, 1].
  static AdAction from_actor_output(std::span<const double> raw);
};

/// C_r (e^{A_r p} - 1) + C_o (e^{|A_l| q} - 1).
double advertising_cost(const AdAction& action, const AdvEnvConfig& config);

/// Users with |x_u - A_l| <= A_r take one update toward A_l with step mu.
/// Bots and out-of-range users are untouched.
OpinionState apply_advertisement(const OpinionState& state, const AdAction& action, const SbcmParams& params,
                                 RngStream& rng, std::size_t sampled_users = 0);

/// Time-scaled mean shift, minus `step_cost` whenever the budget left after
/// paying for this step is negative.
double reward_adv(double mean_prev, double mean_next, int t, int horizon, double budget_after, double step_cost);

/// Advertising scenario. Per step: pay for the ad, apply it to in-range
/// users, run one SBCM step, then score the mean shift against the budget.
/// Observation: user opinions, t / T, remaining budget / B_0.
class AdvEnv {
public:
  static constexpr Scenario scenario = Scenario::advertising;

  explicit AdvEnv(AdvEnvConfig config);

  std::size_t observation_size() const { return config_.n_users + 2; }
  std::size_t action_size() const { return 2; }

  void reseed(std::uint64_t seed) { rng_.reseed(seed); }
  std::vector<double> reset();
  /// Starts an episode from the given user opinions instead of U(-1, 1).
  std::vector<double> reset_to(std::vector<double> users);
  StepResult step(const AdAction& action);
  StepResult step(std::span<const double> raw_action) { return step(AdAction::from_actor_output(raw_action)); }

  StepRecord record() const;

  const OpinionState& state() const { return state_; }
  const AdvEnvConfig& config() const { return config_; }
  double budget() const { return budget_; }
  int time() const { return t_; }
  bool done() const { return t_ >= config_.horizon; }

private:
  std::vector<double> observation() const;

  AdvEnvConfig config_;
  RngStream rng_;
  OpinionState state_;
  int t_ = 0;
  double budget_ = 0.0;
  double last_reward_ = 0.0;
  double last_cost_ = 0.0;
  AdAction last_action_;
  bool active_ = false;
};

}  // namespace opshape
