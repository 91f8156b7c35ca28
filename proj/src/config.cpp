#include "opshape/config.hpp"

#include <fstream>
#include <set>
#include <stdexcept>

namespace opshape {

using nlohmann::json;

const SbcmParams& RunConfig::sbcm() const {
  return std::visit([](const auto& e) -> const SbcmParams& { return e.sbcm; }, env);
}

SbcmParams& RunConfig::sbcm() {
  return std::visit([](auto& e) -> SbcmParams& { return e.sbcm; }, env);
}

std::size_t RunConfig::n_users() const {
  return std::visit([](const auto& e) { return e.n_users; }, env);
}

int RunConfig::horizon() const {
  return std::visit([](const auto& e) { return e.horizon; }, env);
}

void RunConfig::validate() const {
  std::visit([](const auto& e) { e.validate(); }, env);
  ddpg.validate();
  if (episodes < 1) throw std::invalid_argument("config: episodes must be >= 1");
  if (eval_episodes < 1) throw std::invalid_argument("config: eval_episodes must be >= 1");
  if (checkpoint_every < 0) throw std::invalid_argument("config: checkpoint_every must be >= 0");
}

Preset preset_from_string(const std::string& name) {
  if (name == "desk") return Preset::desk;
  if (name == "full") return Preset::full;
  throw std::invalid_argument("unknown preset '" + name + "' (expected desk or full)");
}

RunConfig make_preset(Scenario scenario, Preset preset) {
  RunConfig c;
  SbcmParams sbcm;
  sbcm.mu = 0.1;
  sbcm.epsilon = -2.0;

  const bool full = preset == Preset::full;
  const std::size_t n_users = full ? 200 : 50;
  const int horizon = full ? 200 : 100;
  c.episodes = full ? 1700 : 300;
  c.eval_episodes = full ? 1000 : 100;

  if (scenario == Scenario::bot) {
    BotEnvConfig e;
    e.n_users = n_users;
    e.horizon = horizon;
    e.n_bots = 20;
    e.sbcm = sbcm;
    c.env = e;
  } else {
    AdvEnvConfig e;
    e.n_users = n_users;
    e.horizon = horizon;
    // Budget scales with the horizon: 20 over 200 steps.
    e.initial_budget = full ? 20.0 : 10.0;
    e.sbcm = sbcm;
    c.env = e;
  }

  // The per-step rewards sum to the final mean minus the episode-average
  // mean, so a long discount horizon pays for holding opinions down early.
  // gamma 0.9 keeps the agent pushing every step. Rewards are O(1e-3) per
  // step, hence the scale inside the TD target.
  c.ddpg.gamma = 0.9;
  c.ddpg.reward_scale = 100.0;
  c.ddpg.actor_lr = 3e-4;
  // Ads with a saturated location or zero range are never unlearned once the
  // tanh head is flat; bots want saturation at +1, so they get no penalty.
  if (scenario == Scenario::advertising) c.ddpg.actor_preactivation_l2 = 1e-2;

  if (!full) {
    // Smaller networks and batches keep a 30k-step run in the tens of seconds.
    c.ddpg.hidden = {64, 64};
    c.ddpg.batch_size = 64;
  }
  return c;
}

namespace {

void reject_unknown(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw std::invalid_argument("config: '" + where + "' must be an object");
  for (const auto& [key, value] : j.items())
    if (!allowed.contains(key)) throw std::invalid_argument("config: unknown key '" + where + key + "'");
}

template <class T>
void read(const json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw std::invalid_argument("config: bad value for '" + where + key + "': " + e.what());
  }
}

json sbcm_to_json(const SbcmParams& p) {
  return {{"mu", p.mu},
          {"epsilon", p.epsilon},
          {"k_neighbors", p.k_neighbors},
          {"distance_floor", p.distance_floor},
          {"clamp_opinions", p.clamp_opinions}};
}

void sbcm_from_json(const json& j, SbcmParams& p) {
  reject_unknown(j, {"mu", "epsilon", "k_neighbors", "distance_floor", "clamp_opinions"}, "sbcm.");
  read(j, "mu", p.mu, "sbcm.");
  read(j, "epsilon", p.epsilon, "sbcm.");
  read(j, "k_neighbors", p.k_neighbors, "sbcm.");
  read(j, "distance_floor", p.distance_floor, "sbcm.");
  read(j, "clamp_opinions", p.clamp_opinions, "sbcm.");
}

json ddpg_to_json(const DdpgConfig& d) {
  return {{"gamma", d.gamma},
          {"tau", d.tau},
          {"reward_scale", d.reward_scale},
          {"batch_size", d.batch_size},
          {"buffer_capacity", d.buffer_capacity},
          {"train_start", d.train_start},
          {"hidden", d.hidden},
          {"actor_lr", d.actor_lr},
          {"critic_lr", d.critic_lr},
          {"beta1", d.beta1},
          {"beta2", d.beta2},
          {"adam_epsilon", d.adam_epsilon},
          {"ou_theta", d.ou_theta},
          {"ou_sigma", d.ou_sigma},
          {"ou_sigma_final", d.ou_sigma_final},
          {"ou_dt", d.ou_dt},
          {"final_layer_init", d.final_layer_init},
          {"actor_preactivation_l2", d.actor_preactivation_l2}};
}

void ddpg_from_json(const json& j, DdpgConfig& d) {
  reject_unknown(j,
                 {"gamma", "tau", "reward_scale", "batch_size", "buffer_capacity", "train_start", "hidden", "actor_lr", "critic_lr",
                  "beta1", "beta2", "adam_epsilon", "ou_theta", "ou_sigma", "ou_sigma_final", "ou_dt",
                  "final_layer_init", "actor_preactivation_l2"},
                 "ddpg.");
  read(j, "gamma", d.gamma, "ddpg.");
  read(j, "tau", d.tau, "ddpg.");
  read(j, "reward_scale", d.reward_scale, "ddpg.");
  read(j, "batch_size", d.batch_size, "ddpg.");
  read(j, "buffer_capacity", d.buffer_capacity, "ddpg.");
  read(j, "train_start", d.train_start, "ddpg.");
  read(j, "hidden", d.hidden, "ddpg.");
  read(j, "actor_lr", d.actor_lr, "ddpg.");
  read(j, "critic_lr", d.critic_lr, "ddpg.");
  read(j, "beta1", d.beta1, "ddpg.");
  read(j, "beta2", d.beta2, "ddpg.");
  read(j, "adam_epsilon", d.adam_epsilon, "ddpg.");
  read(j, "ou_theta", d.ou_theta, "ddpg.");
  read(j, "ou_sigma", d.ou_sigma, "ddpg.");
  read(j, "ou_sigma_final", d.ou_sigma_final, "ddpg.");
  read(j, "ou_dt", d.ou_dt, "ddpg.");
  read(j, "final_layer_init", d.final_layer_init, "ddpg.");
  read(j, "actor_preactivation_l2", d.actor_preactivation_l2, "ddpg.");
}

}  // namespace

json to_json(const RunConfig& c) {
  json env;
  if (const auto* b = std::get_if<BotEnvConfig>(&c.env)) {
    env = {{"n_users", b->n_users}, {"n_bots", b->n_bots}, {"horizon", b->horizon}};
  } else {
    const auto& a = std::get<AdvEnvConfig>(c.env);
    env = {{"n_users", a.n_users},
           {"horizon", a.horizon},
           {"initial_budget", a.initial_budget},
           {"cost_range_scale", a.cost_range_scale},
           {"cost_opinion_scale", a.cost_opinion_scale},
           {"range_exponent", a.range_exponent},
           {"opinion_exponent", a.opinion_exponent},
           {"ad_sampled_users", a.ad_sampled_users}};
  }
  return {{"scenario", to_string(c.scenario())},
          {"seed", c.seed},
          {"episodes", c.episodes},
          {"eval_episodes", c.eval_episodes},
          {"output_dir", c.output_dir},
          {"record_timing", c.record_timing},
          {"checkpoint_every", c.checkpoint_every},
          {"env", env},
          {"sbcm", sbcm_to_json(c.sbcm())},
          {"ddpg", ddpg_to_json(c.ddpg)}};
}

RunConfig run_config_from_json(const json& j, const Scenario* fallback_scenario) {
  reject_unknown(j,
                 {"scenario", "preset", "seed", "episodes", "eval_episodes", "output_dir", "record_timing",
                  "checkpoint_every", "env", "sbcm", "ddpg"},
                 "");
  Scenario scenario;
  if (j.contains("scenario")) {
    scenario = scenario_from_string(j.at("scenario").get<std::string>());
  } else if (fallback_scenario) {
    scenario = *fallback_scenario;
  } else {
    throw std::invalid_argument("config: missing 'scenario'");
  }
  Preset preset = Preset::desk;
  if (j.contains("preset")) preset = preset_from_string(j.at("preset").get<std::string>());

  RunConfig c = make_preset(scenario, preset);
  read(j, "seed", c.seed, "");
  read(j, "episodes", c.episodes, "");
  read(j, "eval_episodes", c.eval_episodes, "");
  read(j, "output_dir", c.output_dir, "");
  read(j, "record_timing", c.record_timing, "");
  read(j, "checkpoint_every", c.checkpoint_every, "");

  if (j.contains("env")) {
    const json& e = j.at("env");
    if (auto* b = std::get_if<BotEnvConfig>(&c.env)) {
      reject_unknown(e, {"n_users", "n_bots", "horizon"}, "env.");
      read(e, "n_users", b->n_users, "env.");
      read(e, "n_bots", b->n_bots, "env.");
      read(e, "horizon", b->horizon, "env.");
    } else {
      auto& a = std::get<AdvEnvConfig>(c.env);
      reject_unknown(e,
                     {"n_users", "horizon", "initial_budget", "cost_range_scale", "cost_opinion_scale",
                      "range_exponent", "opinion_exponent", "ad_sampled_users"},
                     "env.");
      read(e, "n_users", a.n_users, "env.");
      read(e, "horizon", a.horizon, "env.");
      read(e, "initial_budget", a.initial_budget, "env.");
      read(e, "cost_range_scale", a.cost_range_scale, "env.");
      read(e, "cost_opinion_scale", a.cost_opinion_scale, "env.");
      read(e, "range_exponent", a.range_exponent, "env.");
      read(e, "opinion_exponent", a.opinion_exponent, "env.");
      read(e, "ad_sampled_users", a.ad_sampled_users, "env.");
    }
  }
  if (j.contains("sbcm")) sbcm_from_json(j.at("sbcm"), c.sbcm());
  if (j.contains("ddpg")) ddpg_from_json(j.at("ddpg"), c.ddpg);
  c.validate();
  return c;
}

RunConfig load_run_config(const std::string& path, const Scenario* fallback_scenario) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open config file " + path);
  json j;
  try {
    j = json::parse(is);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument("config: " + path + ": " + e.what());
  }
  return run_config_from_json(j, fallback_scenario);
}

std::string config_echo(const RunConfig& config) { return to_json(config).dump(); }

}  // namespace opshape
