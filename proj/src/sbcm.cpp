#include "opshape/sbcm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace opshape {

void SbcmParams::validate() const {
  if (!(mu > 0.0 && mu <= 1.0)) throw std::invalid_argument("sbcm: mu must lie in (0, 1]");
  if (k_neighbors < 1) throw std::invalid_argument("sbcm: k_neighbors must be >= 1");
  if (!(distance_floor > 0.0)) throw std::invalid_argument("sbcm: distance_floor must be > 0");
  if (!std::isfinite(epsilon)) throw std::invalid_argument("sbcm: epsilon must be finite");
}

namespace detail {

void relative_weights(double x, std::span<const double> candidates, double epsilon, double distance_floor,
                      std::vector<double>& out) {
  out.resize(candidates.size());
  if (candidates.empty()) return;
  if (epsilon == 0.0) {
    std::fill(out.begin(), out.end(), 1.0);
    return;
  }
  // Work with log-weights so extreme exponents cannot overflow.
  double max_log = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const double d = std::max(std::abs(x - candidates[i]), distance_floor);
    out[i] = -epsilon * std::log(d);
    max_log = std::max(max_log, out[i]);
  }
  for (double& w : out) w = std::exp(w - max_log);
}

std::vector<std::size_t> draw_without_replacement(std::vector<double>& weights, std::size_t count,
                                                  RngStream& rng) {
  count = std::min(count, weights.size());
  std::vector<std::size_t> picked;
  picked.reserve(count);
  double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  for (std::size_t draw = 0; draw < count; ++draw) {
    const double target = rng.uniform01() * total;
    double acc = 0.0;
    std::size_t chosen = weights.size();
    std::size_t last_positive = weights.size();
    for (std::size_t i = 0; i < weights.size(); ++i) {
      if (weights[i] <= 0.0) continue;
      last_positive = i;
      acc += weights[i];
      if (target < acc) {
        chosen = i;
        break;
      }
    }
    // Rounding can leave target just above the running sum.
    if (chosen == weights.size()) chosen = last_positive;
    if (chosen == weights.size()) break;
    picked.push_back(chosen);
    total -= weights[chosen];
    weights[chosen] = 0.0;
    if (draw + 1 < count && total <= 0.0) total = std::accumulate(weights.begin(), weights.end(), 0.0);
  }
  return picked;
}

}  // namespace detail

std::vector<double> interaction_weights(double x, std::span<const double> candidates, double epsilon,
                                        double distance_floor) {
  if (candidates.empty()) throw std::invalid_argument("no interaction partners");
  std::vector<double> w;
  detail::relative_weights(x, candidates, epsilon, distance_floor, w);
  const double total = std::accumulate(w.begin(), w.end(), 0.0);
  for (double& v : w) v /= total;
  return w;
}

std::vector<std::size_t> sample_neighbors(std::size_t u, const OpinionState& state, const SbcmParams& params,
                                          RngStream& rng) {
  const std::size_t pool = state.pool_size();
  if (u >= state.users.size()) throw std::out_of_range("sample_neighbors: user index out of range");
  if (pool < 2) throw std::invalid_argument("no interaction partners");

  // Candidate list: every participant except u itself.
  std::vector<double> candidates;
  candidates.reserve(pool - 1);
  for (std::size_t i = 0; i < pool; ++i)
    if (i != u) candidates.push_back(state.at(i));

  std::vector<double> weights;
  detail::relative_weights(state.users[u], candidates, params.epsilon, params.distance_floor, weights);
  std::vector<std::size_t> picked = detail::draw_without_replacement(weights, params.k_neighbors, rng);
  for (std::size_t& idx : picked)
    if (idx >= u) ++idx;
  return picked;
}

OpinionState step_opinions(const OpinionState& state, const SbcmParams& params, RngStream& rng) {
  OpinionState next = state;
  for (std::size_t u = 0; u < state.users.size(); ++u) {
    const std::vector<std::size_t> neighbors = sample_neighbors(u, state, params, rng);
    const double x = state.users[u];
    double pull = 0.0;
    for (std::size_t v : neighbors) pull += state.at(v) - x;
    double updated = x + params.mu / static_cast<double>(neighbors.size()) * pull;
    if (params.clamp_opinions) updated = std::clamp(updated, -1.0, 1.0);
    next.users[u] = updated;
  }
  return next;
}

double mean_opinion(const OpinionState& state) { return opinion_stats(state.users).mean; }

OpinionStats opinion_stats(const OpinionState& state) { return opinion_stats(state.users); }

OpinionStats opinion_stats(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("opinion_stats: empty population");
  const double n = static_cast<double>(values.size());
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return {mean, std::sqrt(ss / n)};
}

std::vector<double> sample_uniform_opinions(std::size_t n, RngStream& rng) {
  std::vector<double> out(n);
  for (double& x : out) x = rng.uniform(-1.0, 1.0);
  return out;
}

}  // namespace opshape
