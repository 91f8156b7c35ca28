#include "opshape/harness.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "opshape/adv_env.hpp"
#include "opshape/bot_env.hpp"

namespace opshape {

namespace fs = std::filesystem;
using nlohmann::json;

std::uint64_t agent_seed(std::uint64_t master) { return derive_seed(master, {1}); }

std::uint64_t train_episode_seed(std::uint64_t master, int episode) {
  return derive_seed(master, {2, static_cast<std::uint64_t>(episode)});
}

std::uint64_t eval_episode_seed(std::uint64_t master, int episode) {
  return derive_seed(master, {3, static_cast<std::uint64_t>(episode)});
}

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

/// Builds the environment matching the config and hands it to `f`.
template <class F>
decltype(auto) with_env(const RunConfig& config, F&& f) {
  if (const auto* b = std::get_if<BotEnvConfig>(&config.env)) {
    BotEnv env(*b);
    return f(env);
  }
  AdvEnv env(std::get<AdvEnvConfig>(config.env));
  return f(env);
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw std::runtime_error("cannot create output directory " + dir.string());
}

std::string checkpoint_metadata(const DdpgAgent& agent, const RunConfig& config, int episodes_trained) {
  json meta = {{"format", 1},
               {"config", to_json(config)},
               {"episodes_trained", episodes_trained},
               {"rng_state", agent.rng().serialize()},
               {"observation_size", agent.observation_size()},
               {"action_size", agent.action_size()}};
  return meta.dump();
}

}  // namespace

DdpgAgent make_agent(const RunConfig& config) {
  return with_env(config, [&](auto& env) {
    return DdpgAgent(env.observation_size(), env.action_size(), config.ddpg, agent_seed(config.seed));
  });
}

double exploration_sigma(const DdpgConfig& ddpg, int episode, int episodes) {
  if (episodes <= 1) return ddpg.ou_sigma;
  const double frac = static_cast<double>(episode) / static_cast<double>(episodes - 1);
  return ddpg.ou_sigma + (ddpg.ou_sigma_final - ddpg.ou_sigma) * frac;
}

TrainResult train(const RunConfig& config, const std::function<void(const TrainLogRow&)>& on_episode) {
  config.validate();
  const bool write = !config.output_dir.empty();
  const fs::path out = config.output_dir;
  const std::string echo = config_echo(config);
  if (write) {
    ensure_dir(out);
    write_json(to_json(config), out / "config.json");
  }

  TrainResult result{make_agent(config), {}, {}};
  DdpgAgent& agent = result.agent;

  with_env(config, [&](auto& env) {
    for (int e = 0; e < config.episodes; ++e) {
      const auto start = Clock::now();
      env.reseed(train_episode_seed(config.seed, e));
      agent.set_exploration_sigma(exploration_sigma(config.ddpg, e, config.episodes));
      EpisodeTrace trace = run_episode(agent, env, RunMode::train);

      TrainLogRow row;
      row.episode = e + 1;
      row.episode_return = trace.episode_return();
      row.final_mean = trace.final_mean();
      row.final_std = trace.final_std();
      row.wall_ms = config.record_timing ? elapsed_ms(start) : 0.0;
      result.log.push_back(row);
      if (on_episode) on_episode(row);

      if (write && config.checkpoint_every > 0 && (e + 1) % config.checkpoint_every == 0 && e + 1 < config.episodes) {
        ensure_dir(out / "checkpoints");
        char name[64];
        std::snprintf(name, sizeof name, "episode_%06d.bin", e + 1);
        write_checkpoint(agent, config, e + 1, out / "checkpoints" / name);
      }
      if (e + 1 == config.episodes) result.last_trace = std::move(trace);
    }
  });

  if (write) {
    write_train_log(result.log, out / "train_log.csv", echo);
    emit_trace(result.last_trace, out / "last_train_trace.csv", echo);
    write_checkpoint(agent, config, config.episodes, out / "checkpoint.bin");
  }
  return result;
}

OpinionSummary summarize_finals(std::vector<double> final_means, std::vector<double> final_stds) {
  if (final_means.empty() || final_means.size() != final_stds.size())
    throw std::invalid_argument("summarize: need matching, non-empty final statistics");
  OpinionSummary s;
  const double n = static_cast<double>(final_means.size());
  s.mean = std::accumulate(final_means.begin(), final_means.end(), 0.0) / n;
  double ss = 0.0;
  for (double m : final_means) ss += (m - s.mean) * (m - s.mean);
  s.std_across = std::sqrt(ss / n);
  double var = 0.0;
  for (double sd : final_stds) var += sd * sd;
  s.std_within_pooled = std::sqrt(var / n);
  s.final_means = std::move(final_means);
  s.final_stds = std::move(final_stds);
  return s;
}

OpinionSummary summarize(const std::vector<EpisodeTrace>& traces) {
  std::vector<double> means, stds;
  for (const EpisodeTrace& t : traces) {
    means.push_back(t.final_mean());
    stds.push_back(t.final_std());
  }
  return summarize_finals(std::move(means), std::move(stds));
}

EpisodeTrace null_episode(const RunConfig& config, std::uint64_t seed) {
  if (const auto* b = std::get_if<BotEnvConfig>(&config.env)) {
    b->validate();
    RngStream rng(seed);
    EpisodeTrace trace;
    trace.scenario = Scenario::bot;
    // Same draw as BotEnv::reset, so baseline and policy episodes share u_0.
    OpinionState state{sample_uniform_opinions(b->n_users, rng), {}};
    for (int t = 1; t <= b->horizon; ++t) {
      const double prev = mean_opinion(state);
      state = step_opinions(state, b->sbcm, rng);
      StepRecord r;
      r.t = t;
      const OpinionStats s = opinion_stats(state);
      r.mean = s.mean;
      r.std = s.std;
      r.reward = reward_bot(prev, s.mean, t, b->horizon);
      r.users = state.users;
      trace.records.push_back(std::move(r));
    }
    return trace;
  }
  AdvEnv env(std::get<AdvEnvConfig>(config.env));
  env.reseed(seed);
  env.reset();
  EpisodeTrace trace;
  trace.scenario = Scenario::advertising;
  while (!env.done()) {
    env.step(AdAction{0.0, 0.0});
    trace.records.push_back(env.record());
  }
  return trace;
}

EvalReport baseline(const RunConfig& config) {
  config.validate();
  const auto start = Clock::now();
  std::vector<EpisodeTrace> traces;
  for (int e = 0; e < config.eval_episodes; ++e) traces.push_back(null_episode(config, eval_episode_seed(config.seed, e)));
  EvalReport report;
  report.scenario = config.scenario();
  report.episodes = config.eval_episodes;
  report.baseline = summarize(traces);
  report.policy = report.baseline;
  if (report.scenario == Scenario::advertising)
    report.mean_final_budget = std::get<AdvEnvConfig>(config.env).initial_budget;
  report.config = config_echo(config);
  report.wall_ms = config.record_timing ? elapsed_ms(start) : 0.0;
  return report;
}

EvalResult evaluate(DdpgAgent& agent, const RunConfig& config) {
  config.validate();
  const auto start = Clock::now();
  EvalResult result;
  with_env(config, [&](auto& env) {
    if (env.observation_size() != agent.observation_size() || env.action_size() != agent.action_size())
      throw std::invalid_argument("evaluate: agent does not fit the configured environment");
    for (int e = 0; e < config.eval_episodes; ++e) {
      env.reseed(eval_episode_seed(config.seed, e));
      result.traces.push_back(run_episode(agent, env, RunMode::eval));
    }
  });

  std::vector<EpisodeTrace> null_traces;
  for (int e = 0; e < config.eval_episodes; ++e)
    null_traces.push_back(null_episode(config, eval_episode_seed(config.seed, e)));

  EvalReport& report = result.report;
  report.scenario = config.scenario();
  report.episodes = config.eval_episodes;
  report.policy = summarize(result.traces);
  report.baseline = summarize(null_traces);
  if (report.scenario == Scenario::advertising) {
    double spend = 0.0, final_budget = 0.0;
    for (const EpisodeTrace& t : result.traces) {
      for (const StepRecord& r : t.records) spend += r.cost;
      final_budget += t.records.back().budget;
    }
    report.mean_spend = spend / config.eval_episodes;
    report.mean_final_budget = final_budget / config.eval_episodes;
  }
  report.config = config_echo(config);
  report.wall_ms = config.record_timing ? elapsed_ms(start) : 0.0;
  return result;
}

RunConfig checkpoint_config(const fs::path& checkpoint) {
  std::ifstream is(checkpoint, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open checkpoint " + checkpoint.string());
  const AgentCheckpoint ckpt = load_checkpoint(is);
  const json meta = json::parse(ckpt.metadata);
  return run_config_from_json(meta.at("config"));
}

EvalResult evaluate_checkpoint(const fs::path& checkpoint, const RunConfig& config) {
  std::ifstream is(checkpoint, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open checkpoint " + checkpoint.string());
  const AgentCheckpoint ckpt = load_checkpoint(is);
  DdpgAgent agent = make_agent(config);
  agent.restore(ckpt);
  return evaluate(agent, config);
}

json to_json(const EvalReport& r) {
  auto summary = [](const OpinionSummary& s) {
    return json{{"mean_of_final_means", s.mean},
                {"std_across_episodes", s.std_across},
                {"std_within_episode_pooled", s.std_within_pooled},
                {"final_means", s.final_means},
                {"final_stds", s.final_stds}};
  };
  json j = {{"scenario", to_string(r.scenario)},
            {"episodes", r.episodes},
            {"policy", summary(r.policy)},
            {"baseline", summary(r.baseline)},
            {"config", json::parse(r.config)},
            {"wall_ms", r.wall_ms}};
  if (r.scenario == Scenario::advertising) {
    j["mean_spend"] = r.mean_spend;
    j["mean_final_budget"] = r.mean_final_budget;
  }
  return j;
}

void write_json(const json& j, const fs::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
  os << j.dump(2) << '\n';
  if (!os) throw std::runtime_error("write failed: " + path.string());
}

void write_train_log(const std::vector<TrainLogRow>& log, const fs::path& path, const std::string& echo) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
  if (!echo.empty()) os << "# config=" << echo << '\n';
  os << "episode,return,final_mean,final_std,wall_ms\n";
  for (const TrainLogRow& r : log)
    os << r.episode << ',' << format_double(r.episode_return) << ',' << format_double(r.final_mean) << ','
       << format_double(r.final_std) << ',' << format_double(r.wall_ms) << '\n';
  if (!os) throw std::runtime_error("write failed: " + path.string());
}

std::vector<TrainLogRow> load_train_log(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path.string());
  std::vector<TrainLogRow> rows;
  std::string line;
  std::size_t line_no = 0;
  bool header = false;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty() || line.front() == '#') continue;
    if (!header) {
      if (line != "episode,return,final_mean,final_std,wall_ms") throw TraceParseError(line_no, "unrecognized log header");
      header = true;
      continue;
    }
    std::istringstream ls(line);
    TrainLogRow r;
    char c1, c2, c3, c4;
    if (!(ls >> r.episode >> c1 >> r.episode_return >> c2 >> r.final_mean >> c3 >> r.final_std >> c4 >> r.wall_ms) ||
        c1 != ',' || c2 != ',' || c3 != ',' || c4 != ',')
      throw TraceParseError(line_no, "malformed log row");
    rows.push_back(r);
  }
  return rows;
}

void write_checkpoint(const DdpgAgent& agent, const RunConfig& config, int episodes_trained, const fs::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
  save_checkpoint(agent.snapshot(checkpoint_metadata(agent, config, episodes_trained)), os);
}

void write_eval_outputs(const EvalResult& result, const fs::path& dir, bool all_traces) {
  ensure_dir(dir);
  write_json(to_json(result.report), dir / "eval_report.json");
  if (result.traces.empty()) return;
  emit_trace(result.traces.front(), dir / "eval_trace.csv", result.report.config);
  if (all_traces) {
    ensure_dir(dir / "eval_traces");
    for (std::size_t i = 0; i < result.traces.size(); ++i) {
      char name[64];
      std::snprintf(name, sizeof name, "episode_%06zu.csv", i + 1);
      emit_trace(result.traces[i], dir / "eval_traces" / name, result.report.config);
    }
  }
}

}  // namespace opshape
