#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "opshape/config.hpp"
#include "opshape/ddpg.hpp"
#include "opshape/trace.hpp"

namespace opshape {

// Seed fan-out. Every stream is derive_seed(master, {stream, index}):
//   agent init / noise / replay sampling   {1}
//   training episode e                     {2, e}
//   evaluation and baseline episode e      {3, e}
// Evaluation and baseline share episode seeds, so both start from the same
// initial opinions.
std::uint64_t agent_seed(std::uint64_t master);
std::uint64_t train_episode_seed(std::uint64_t master, int episode);
std::uint64_t eval_episode_seed(std::uint64_t master, int episode);

struct TrainLogRow {
  int episode = 0;
  double episode_return = 0.0;
  double final_mean = 0.0;
  double final_std = 0.0;
  double wall_ms = 0.0;
};

struct TrainResult {
  DdpgAgent agent;
  std::vector<TrainLogRow> log;
  EpisodeTrace last_trace;
};

/// Agent shaped for the config's environment and network settings.
DdpgAgent make_agent(const RunConfig& config);

/// Exploration sigma for a training episode: linear from ou_sigma at the
/// first episode to ou_sigma_final at the last.
double exploration_sigma(const DdpgConfig& ddpg, int episode, int episodes);

/// Runs `config.episodes` training episodes. When `config.output_dir` is set,
/// writes config.json, train_log.csv, last_train_trace.csv, periodic
/// checkpoints under checkpoints/ and the final checkpoint.bin.
TrainResult train(const RunConfig& config, const std::function<void(const TrainLogRow&)>& on_episode = {});

/// Statistics of final user opinions over a set of episodes.
///   mean               mean over episodes of the final population mean
///   std_across         population std of those per-episode final means
///   std_within_pooled  sqrt of the average within-episode final variance
struct OpinionSummary {
  double mean = 0.0;
  double std_across = 0.0;
  double std_within_pooled = 0.0;
  std::vector<double> final_means;
  std::vector<double> final_stds;
};

OpinionSummary summarize(const std::vector<EpisodeTrace>& traces);
OpinionSummary summarize_finals(std::vector<double> final_means, std::vector<double> final_stds);

struct EvalReport {
  Scenario scenario = Scenario::bot;
  int episodes = 0;
  OpinionSummary policy;
  OpinionSummary baseline;
  /// Advertising only: mean total spend and mean final budget per episode.
  double mean_spend = 0.0;
  double mean_final_budget = 0.0;
  std::string config;
  double wall_ms = 0.0;
};

nlohmann::json to_json(const EvalReport& report);

struct EvalResult {
  EvalReport report;
  std::vector<EpisodeTrace> traces;
};

/// Noise-free episodes of `agent` on the evaluation seeds, alongside the
/// no-intervention baseline on the same seeds. Does not mutate the agent.
EvalResult evaluate(DdpgAgent& agent, const RunConfig& config);

/// Loads a checkpoint, rebuilds the agent for `config` and evaluates it.
/// Throws if the checkpoint's networks do not fit the config.
EvalResult evaluate_checkpoint(const std::filesystem::path& checkpoint, const RunConfig& config);

/// Config stored in a checkpoint's metadata.
RunConfig checkpoint_config(const std::filesystem::path& checkpoint);

/// No-intervention episodes: bots absent from the pool, or a zero-cost
/// zero-range ad every step.
EpisodeTrace null_episode(const RunConfig& config, std::uint64_t seed);
EvalReport baseline(const RunConfig& config);

void write_train_log(const std::vector<TrainLogRow>& log, const std::filesystem::path& path, const std::string& config_echo);
std::vector<TrainLogRow> load_train_log(const std::filesystem::path& path);

void write_checkpoint(const DdpgAgent& agent, const RunConfig& config, int episodes_trained,
                      const std::filesystem::path& path);

/// Writes eval_report.json and eval traces (first episode only unless
/// `all_traces`) into `dir`.
void write_eval_outputs(const EvalResult& result, const std::filesystem::path& dir, bool all_traces);

void write_json(const nlohmann::json& j, const std::filesystem::path& path);

}  // namespace opshape
