#pragma once

#include <concepts>
#include <span>
#include <vector>

#include "opshape/trace.hpp"

namespace opshape {

struct StepResult {
  std::vector<double> observation;
  double reward = 0.0;
  bool done = false;
};

/// What an episode runner needs from an environment.
template <class E>
concept EpisodicEnv = requires(E& env, const E& cenv, std::span<const double> action) {
  { env.reset() } -> std::convertible_to<std::vector<double>>;
  { env.step(action) } -> std::same_as<StepResult>;
  { cenv.record() } -> std::convertible_to<StepRecord>;
  { cenv.done() } -> std::convertible_to<bool>;
  { cenv.observation_size() } -> std::convertible_to<std::size_t>;
  { cenv.action_size() } -> std::convertible_to<std::size_t>;
  { E::scenario } -> std::convertible_to<Scenario>;
};

}  // namespace opshape
