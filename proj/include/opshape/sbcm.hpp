#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "opshape/rng.hpp"

namespace opshape {

/// Opinions of the population at one time-step. Users evolve under the
/// dynamics; bots are set externally and never updated by `step_opinions`.
struct OpinionState {
  std::vector<double> users;
  std::vector<double> bots;

  std::size_t pool_size() const { return users.size() + bots.size(); }

  /// Opinion of candidate `i` where indices [0, N) are users and
  /// [N, N + n_bots) are bots.
  double at(std::size_t i) const { return i < users.size() ? users[i] : bots[i - users.size()]; }
};

struct SbcmParams {
  double mu = 0.1;
  /// Signed exponent: the weight of a partner at distance d is d^(-epsilon).
  double epsilon = -2.0;
  std::size_t k_neighbors = 1;
  double distance_floor = 1e-6;
  bool clamp_opinions = true;

  void validate() const;
};

/// Normalized probability that an individual at `x` interacts with each
/// candidate: max(|x - c_i|, distance_floor)^(-epsilon) / sum.
/// Throws std::invalid_argument("no interaction partners") on empty input.
std::vector<double> interaction_weights(double x, std::span<const double> candidates, double epsilon,
                                        double distance_floor);

/// Draws min(k, pool) distinct partners for user `u` from every other user
/// and every bot, without replacement. Returned indices follow
/// `OpinionState::at` numbering.
std::vector<std::size_t> sample_neighbors(std::size_t u, const OpinionState& state, const SbcmParams& params,
                                          RngStream& rng);

/// One synchronous update of every user toward the mean of its sampled
/// neighbors, all read from the time-t snapshot. Bots are copied unchanged.
OpinionState step_opinions(const OpinionState& state, const SbcmParams& params, RngStream& rng);

double mean_opinion(const OpinionState& state);

struct OpinionStats {
  double mean = 0.0;
  double std = 0.0;  // population standard deviation
};

OpinionStats opinion_stats(const OpinionState& state);
OpinionStats opinion_stats(std::span<const double> values);

/// Draws `n` i.i.d. opinions from U(-1, 1).
std::vector<double> sample_uniform_opinions(std::size_t n, RngStream& rng);

namespace detail {
/// Draws `count` distinct indices from unnormalized nonnegative weights by
/// successive sampling. `weights` is consumed as scratch space.
std::vector<std::size_t> draw_without_replacement(std::vector<double>& weights, std::size_t count,
                                                  RngStream& rng);
/// Unnormalized log-domain weights, rescaled so the largest is 1.
void relative_weights(double x, std::span<const double> candidates, double epsilon, double distance_floor,
                      std::vector<double>& out);
}  // namespace detail

}  // namespace opshape
