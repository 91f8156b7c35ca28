#pragma once

#include <cstdint>
#include <string>
#include <variant>

#include <json.hpp>

#include "opshape/adv_env.hpp"
#include "opshape/bot_env.hpp"
#include "opshape/ddpg.hpp"
#include "opshape/trace.hpp"

namespace opshape {

/// Everything needed to reproduce a training or evaluation run.
struct RunConfig {
  std::variant<BotEnvConfig, AdvEnvConfig> env;
  DdpgConfig ddpg;
  int episodes = 300;
  int eval_episodes = 100;
  std::uint64_t seed = 1;
  std::string output_dir;
  /// When false every wall-clock field is written as 0 so that repeated
  /// runs produce byte-identical artifacts.
  bool record_timing = true;
  /// Periodic checkpoint interval in episodes; 0 writes only the final one.
  int checkpoint_every = 50;

  Scenario scenario() const { return std::holds_alternative<BotEnvConfig>(env) ? Scenario::bot : Scenario::advertising; }
  const SbcmParams& sbcm() const;
  SbcmParams& sbcm();
  std::size_t n_users() const;
  int horizon() const;

  void validate() const;
};

enum class Preset { desk, full };

Preset preset_from_string(const std::string& name);

/// Desk preset: N=50, T=100, M=300, 100 eval episodes.
/// Full preset: N=200, T=200, M=1700, 1000 eval episodes.
RunConfig make_preset(Scenario scenario, Preset preset);

nlohmann::json to_json(const RunConfig& config);

/// Builds a config from a JSON tree. The scenario comes from the `scenario`
/// key (or `fallback_scenario` if absent); unspecified fields take the
/// preset's values. Unknown keys are rejected with std::invalid_argument.
RunConfig run_config_from_json(const nlohmann::json& j, const Scenario* fallback_scenario = nullptr);

RunConfig load_run_config(const std::string& path, const Scenario* fallback_scenario = nullptr);

/// Compact single-line JSON used as the config echo in every artifact.
std::string config_echo(const RunConfig& config);

}  // namespace opshape
