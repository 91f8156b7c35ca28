// opshape: train, evaluate and baseline runs for the bot and advertising
// opinion-shaping scenarios.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "opshape/config.hpp"
#include "opshape/harness.hpp"

namespace {

struct Overrides {
  std::optional<std::size_t> n_users;
  std::optional<int> horizon;
  std::optional<int> episodes;
  std::optional<int> eval_episodes;
  std::optional<std::size_t> n_bots;
  std::optional<double> budget;
  std::optional<double> mu;
  std::optional<double> epsilon;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  bool no_timing = false;
};

struct CommonArgs {
  std::string scenario;
  std::string preset = "desk";
  std::string config_path;
  Overrides over;
};

void add_common(CLI::App* cmd, CommonArgs& a) {
  cmd->add_option("--scenario", a.scenario, "bot or advertising")->check(CLI::IsMember({"bot", "advertising"}));
  cmd->add_option("--preset", a.preset, "desk or full defaults")->check(CLI::IsMember({"desk", "full"}));
  cmd->add_option("--config", a.config_path, "JSON config file")->check(CLI::ExistingFile);
  cmd->add_option("--seed", a.over.seed, "master seed");
  cmd->add_option("--out", a.over.out, "output directory");
  cmd->add_option("--n-users", a.over.n_users, "number of users N");
  cmd->add_option("--horizon", a.over.horizon, "time-steps per episode T");
  cmd->add_option("--episodes", a.over.episodes, "training episodes M");
  cmd->add_option("--eval-episodes", a.over.eval_episodes, "evaluation episodes");
  cmd->add_option("--n-bots", a.over.n_bots, "number of bots (bot scenario)");
  cmd->add_option("--budget", a.over.budget, "initial budget B_0 (advertising scenario)");
  cmd->add_option("--mu", a.over.mu, "SBCM step size");
  cmd->add_option("--epsilon", a.over.epsilon, "SBCM sampling exponent");
  cmd->add_flag("--no-timing", a.over.no_timing, "write wall-clock fields as 0 for byte-reproducible outputs");
}

void apply(const Overrides& o, opshape::RunConfig& c) {
  if (o.seed) c.seed = *o.seed;
  if (o.out) c.output_dir = *o.out;
  if (o.episodes) c.episodes = *o.episodes;
  if (o.eval_episodes) c.eval_episodes = *o.eval_episodes;
  if (o.no_timing) c.record_timing = false;
  std::visit(
      [&](auto& env) {
        if (o.n_users) env.n_users = *o.n_users;
        if (o.horizon) env.horizon = *o.horizon;
      },
      c.env);
  if (o.mu) c.sbcm().mu = *o.mu;
  if (o.epsilon) c.sbcm().epsilon = *o.epsilon;
  if (o.n_bots) {
    auto* b = std::get_if<opshape::BotEnvConfig>(&c.env);
    if (!b) throw std::invalid_argument("--n-bots applies to the bot scenario only");
    b->n_bots = *o.n_bots;
  }
  if (o.budget) {
    auto* a = std::get_if<opshape::AdvEnvConfig>(&c.env);
    if (!a) throw std::invalid_argument("--budget applies to the advertising scenario only");
    a->initial_budget = *o.budget;
  }
  c.validate();
}

opshape::RunConfig resolve(const CommonArgs& a) {
  opshape::RunConfig c;
  std::optional<opshape::Scenario> scenario;
  if (!a.scenario.empty()) scenario = opshape::scenario_from_string(a.scenario);
  if (!a.config_path.empty()) {
    c = opshape::load_run_config(a.config_path, scenario ? &*scenario : nullptr);
    if (scenario && c.scenario() != *scenario) throw std::invalid_argument("--scenario disagrees with the config file");
  } else {
    if (!scenario) throw std::invalid_argument("either --scenario or --config is required");
    c = opshape::make_preset(*scenario, opshape::preset_from_string(a.preset));
  }
  apply(a.over, c);
  return c;
}

void print_report(const opshape::EvalReport& r, bool with_policy = true) {
  std::printf("scenario %s, %d episodes\n", opshape::to_string(r.scenario), r.episodes);
  if (with_policy)
    std::printf("  policy   mean %.4f  std(across) %.4f  std(within, pooled) %.4f\n", r.policy.mean, r.policy.std_across,
                r.policy.std_within_pooled);
  std::printf("  baseline mean %.4f  std(across) %.4f  std(within, pooled) %.4f\n", r.baseline.mean,
              r.baseline.std_across, r.baseline.std_within_pooled);
  if (r.scenario == opshape::Scenario::advertising)
    std::printf("  mean spend %.4f  mean final budget %.4f\n", r.mean_spend, r.mean_final_budget);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Opinion shaping with DDPG in a stochastic bounded confidence model"};
  app.require_subcommand(1);

  CommonArgs train_args;
  auto* train_cmd = app.add_subcommand("train", "train an agent and write logs, traces and checkpoints");
  add_common(train_cmd, train_args);
  bool quiet = false;
  bool eval_after = false;
  train_cmd->add_flag("--quiet", quiet, "no per-episode progress");
  train_cmd->add_flag("--eval", eval_after, "evaluate the final policy after training");

  CommonArgs eval_args;
  std::string checkpoint;
  bool dump_traces = false;
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint with exploration disabled");
  add_common(eval_cmd, eval_args);
  eval_cmd->add_option("--checkpoint", checkpoint, "checkpoint file")->required()->check(CLI::ExistingFile);
  eval_cmd->add_flag("--dump-traces", dump_traces, "write every evaluation episode trace");

  CommonArgs base_args;
  auto* base_cmd = app.add_subcommand("baseline", "run the no-intervention control");
  add_common(base_cmd, base_args);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train_cmd) {
      opshape::RunConfig c = resolve(train_args);
      if (c.output_dir.empty()) c.output_dir = "runs/" + std::string(opshape::to_string(c.scenario()));
      auto progress = [&](const opshape::TrainLogRow& r) {
        if (!quiet)
          std::printf("episode %5d  return %+.5f  final mean %+.4f  final std %.4f  %.0f ms\n", r.episode,
                      r.episode_return, r.final_mean, r.final_std, r.wall_ms);
      };
      opshape::TrainResult result = opshape::train(c, progress);
      std::printf("wrote %s\n", c.output_dir.c_str());
      if (eval_after) {
        opshape::EvalResult ev = opshape::evaluate(result.agent, c);
        opshape::write_eval_outputs(ev, c.output_dir, false);
        print_report(ev.report);
      }
    } else if (*eval_cmd) {
      opshape::RunConfig c;
      if (eval_args.config_path.empty() && eval_args.scenario.empty()) {
        c = opshape::checkpoint_config(checkpoint);
        apply(eval_args.over, c);
      } else {
        c = resolve(eval_args);
      }
      if (c.output_dir.empty()) c.output_dir = ".";
      opshape::EvalResult ev = opshape::evaluate_checkpoint(checkpoint, c);
      opshape::write_eval_outputs(ev, c.output_dir, dump_traces);
      print_report(ev.report);
    } else if (*base_cmd) {
      opshape::RunConfig c = resolve(base_args);
      opshape::EvalReport r = opshape::baseline(c);
      if (!c.output_dir.empty()) {
        std::filesystem::create_directories(c.output_dir);
        opshape::write_json(opshape::to_json(r), std::filesystem::path(c.output_dir) / "baseline_report.json");
      }
      print_report(r, false);
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
