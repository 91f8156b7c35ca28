#include <doctest.h>

#include <cmath>
#include <numeric>

#include "opshape/adv_env.hpp"

using namespace opshape;

namespace {

AdvEnvConfig default_costs() {
  AdvEnvConfig c;
  c.n_users = 30;
  c.horizon = 20;
  c.initial_budget = 2.0;
  c.cost_range_scale = 0.05;
  c.cost_opinion_scale = 0.05;
  c.range_exponent = 1.5;
  c.opinion_exponent = 1.5;
  return c;
}

}  // namespace

TEST_CASE("advertising cost: hand-evaluated values") {
  const AdvEnvConfig c = default_costs();
  CHECK(advertising_cost({0.0, 0.0}, c) == 0.0);
  const double full = 2.0 * 0.05 * (std::exp(1.5) - 1.0);
  CHECK(std::abs(advertising_cost({1.0, 1.0}, c) - full) < 1e-12);
  CHECK(std::abs(full - 0.34817) < 1e-5);
  const double half = 0.05 * (std::exp(0.75) - 1.0);
  CHECK(std::abs(advertising_cost({-0.5, 0.0}, c) - half) < 1e-12);
  CHECK(std::abs(half - 0.05585) < 1e-5);
}

TEST_CASE("advertising cost: monotone in range and |location|, symmetric in sign") {
  const AdvEnvConfig c = default_costs();
  RngStream rng(1);
  for (int i = 0; i < 500; ++i) {
    const double l = rng.uniform(-1, 1), r = rng.uniform(0, 1);
    const double d = rng.uniform(0.0, 0.1);
    CHECK(advertising_cost({l, r}, c) == doctest::Approx(advertising_cost({-l, r}, c)));
    if (r + d <= 1.0) CHECK(advertising_cost({l, r + d}, c) > advertising_cost({l, r}, c));
    if (std::abs(l) + d <= 1.0) {
      const double farther = l >= 0 ? l + d : l - d;
      CHECK(advertising_cost({farther, r}, c) > advertising_cost({l, r}, c));
    }
    CHECK(advertising_cost({l, r}, c) >= 0.0);
  }
}

TEST_CASE("action mapping and clipping") {
  const AdAction a = AdAction::from_actor_output(std::vector<double>{-1.0, -1.0});
  CHECK(a.location == -1.0);
  CHECK(a.range == 0.0);
  const AdAction b = AdAction::from_actor_output(std::vector<double>{0.25, 1.0});
  CHECK(b.location == 0.25);
  CHECK(b.range == 1.0);
  const AdAction c = AdAction{2.0, -0.5}.clipped();
  CHECK(c.location == 1.0);
  CHECK(c.range == 0.0);
}

TEST_CASE("apply_advertisement: in-range users step toward the ad") {
  SbcmParams p;
  p.mu = 0.1;
  RngStream rng(2);
  OpinionState s{{0.0, 0.95, -0.3, 0.37}, {0.5}};
  const auto next = apply_advertisement(s, {0.4, 0.5}, p, rng);
  CHECK(next.users[0] == doctest::Approx(0.04).epsilon(1e-14));
  CHECK(next.users[1] == 0.95);
  CHECK(next.users[2] == -0.3);
  CHECK(next.users[3] == doctest::Approx(0.37 + 0.1 * 0.03).epsilon(1e-14));
  CHECK(next.bots == s.bots);

  const auto none = apply_advertisement(s, {0.4, 0.0}, p, rng);
  CHECK(none.users == s.users);
}

TEST_CASE("apply_advertisement: never overshoots and bounds the mean shift") {
  RngStream rng(3);
  SbcmParams p;
  for (int trial = 0; trial < 300; ++trial) {
    p.mu = rng.uniform(0.0, 1.0);
    OpinionState s{sample_uniform_opinions(25, rng), {}};
    const AdAction ad{rng.uniform(-1, 1), rng.uniform(0, 1)};
    const auto next = apply_advertisement(s, ad, p, rng);
    std::size_t reached = 0;
    double max_gap = 0.0;
    for (std::size_t u = 0; u < s.users.size(); ++u) {
      const double before = s.users[u] - ad.location;
      const double after = next.users[u] - ad.location;
      CHECK(std::abs(after) <= std::abs(before) + 1e-15);
      CHECK(after * before >= 0.0);
      if (std::abs(before) <= ad.range) {
        ++reached;
        max_gap = std::max(max_gap, std::abs(before));
      }
    }
    const double shift = std::abs(mean_opinion(next) - mean_opinion(s));
    CHECK(shift <= p.mu * (static_cast<double>(reached) / 25.0) * max_gap + 1e-15);
  }
}

TEST_CASE("apply_advertisement: sampled variant moves exactly k in-range users") {
  RngStream rng(4);
  SbcmParams p;
  OpinionState s{{-0.1, 0.0, 0.05, 0.1, 0.2, 0.9}, {}};
  for (int i = 0; i < 50; ++i) {
    const auto next = apply_advertisement(s, {0.0, 0.25}, p, rng, 2);
    int moved = 0;
    for (std::size_t u = 0; u < s.users.size(); ++u) moved += next.users[u] != s.users[u];
    // The user sitting on the ad is in range but does not move.
    CHECK(moved <= 2);
    CHECK(next.users[5] == 0.9);
  }
}

TEST_CASE("reward_adv branches") {
  CHECK(reward_adv(0.0, 0.1, 10, 10, 0.5, 0.3) == doctest::Approx(0.1));
  CHECK(reward_adv(0.2, 0.2, 5, 10, -0.2, 0.3) == doctest::Approx(-0.3));
  // B_t = 0 is still within budget.
  CHECK(reward_adv(0.0, 0.1, 10, 10, 0.0, 0.3) == doctest::Approx(0.1));
  CHECK(reward_adv(0.0, 0.1, 10, 10, -1e-300, 0.3) == doctest::Approx(0.1 - 0.3));
}

TEST_CASE("zero ad reduces to a plain SBCM step with no spend") {
  AdvEnvConfig c = default_costs();
  AdvEnv env(c);
  env.reseed(99);
  env.reset();
  const StepResult r = env.step(AdAction{0.0, 0.0});
  CHECK(env.budget() == c.initial_budget);

  RngStream ref(99);
  OpinionState s{sample_uniform_opinions(c.n_users, ref), {}};
  const double m0 = mean_opinion(s);
  s = step_opinions(s, c.sbcm, ref);
  CHECK(env.state().users == s.users);
  CHECK(r.reward == reward_bot(m0, mean_opinion(s), 1, c.horizon));
}

TEST_CASE("zero budget: every priced step is penalized from the start") {
  AdvEnvConfig c = default_costs();
  c.initial_budget = 0.0;
  AdvEnv env(c);
  env.reset();
  const double m0 = mean_opinion(env.state());
  const AdAction ad{0.5, 0.3};
  const StepResult r = env.step(ad);
  const double cost = advertising_cost(ad, c);
  CHECK(r.reward == doctest::Approx(reward_bot(m0, mean_opinion(env.state()), 1, c.horizon) - cost).epsilon(1e-14));
  CHECK(r.observation.back() == 0.0);
}

TEST_CASE("constant spend of 0.05 over 200 steps halves a budget of 20") {
  AdvEnvConfig c = default_costs();
  c.horizon = 200;
  c.initial_budget = 20.0;
  AdvEnv env(c);
  env.reset();
  const AdAction ad{0.0, std::log(2.0) / 1.5};
  CHECK(advertising_cost(ad, c) == doctest::Approx(0.05).epsilon(1e-14));
  double prev = mean_opinion(env.state());
  for (int t = 1; t <= 200; ++t) {
    const StepResult r = env.step(ad);
    const double now = mean_opinion(env.state());
    CHECK(r.reward == doctest::Approx(reward_bot(prev, now, t, 200)).epsilon(1e-14));
    prev = now;
  }
  CHECK(env.budget() == doctest::Approx(10.0).epsilon(1e-12));
  CHECK(env.done());
  CHECK_THROWS_WITH(env.step(ad), "episode done");
}

TEST_CASE("budget accounting and penalty activation over random episodes") {
  AdvEnvConfig c = default_costs();
  c.initial_budget = 1.5;
  AdvEnv env(c);
  RngStream rng(12);
  for (int e = 0; e < 30; ++e) {
    env.reseed(e);
    env.reset();
    double b = c.initial_budget;
    double spent = 0.0;
    double prev = mean_opinion(env.state());
    while (!env.done()) {
      const AdAction ad{rng.uniform(-1, 1), rng.uniform(0, 1)};
      const StepResult r = env.step(ad);
      const double cost = advertising_cost(ad, c);
      b -= cost;
      spent += cost;
      const double base = reward_bot(prev, mean_opinion(env.state()), env.time(), c.horizon);
      if (b >= 0.0) CHECK(r.reward == base);
      else CHECK(r.reward == doctest::Approx(base - cost).epsilon(1e-14));
      CHECK(r.observation.back() == doctest::Approx(b / c.initial_budget).epsilon(1e-14));
      prev = mean_opinion(env.state());
    }
    CHECK(env.budget() == b);
    CHECK(std::abs(env.budget() - (c.initial_budget - spent)) < 1e-12);
  }
}

TEST_CASE("config validation") {
  AdvEnvConfig c = default_costs();
  c.initial_budget = -1.0;
  CHECK_THROWS_AS(AdvEnv{c}, std::invalid_argument);
  c = default_costs();
  c.range_exponent = 0.0;
  CHECK_THROWS_AS(AdvEnv{c}, std::invalid_argument);
  c = default_costs();
  c.cost_opinion_scale = -0.1;
  CHECK_THROWS_AS(AdvEnv{c}, std::invalid_argument);
}
