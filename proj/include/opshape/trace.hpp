#pragma once

#include <cstddef>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace opshape {

enum class Scenario { bot, advertising };

const char* to_string(Scenario s);
Scenario scenario_from_string(const std::string& name);

/// One logged time-step. Bot traces fill `bots` and `users`; advertising
/// traces fill `cost`, `budget`, `ad_location` and `ad_range`.
struct StepRecord {
  int t = 0;
  double mean = 0.0;
  double std = 0.0;
  double reward = 0.0;
  double cost = 0.0;
  double budget = 0.0;
  double ad_location = 0.0;
  double ad_range = 0.0;
  std::vector<double> bots;
  std::vector<double> users;

  friend bool operator==(const StepRecord&, const StepRecord&) = default;
};

struct EpisodeTrace {
  Scenario scenario = Scenario::bot;
  std::vector<StepRecord> records;

  double episode_return() const;
  double final_mean() const;
  double final_std() const;

  friend bool operator==(const EpisodeTrace&, const EpisodeTrace&) = default;
};

class TraceParseError : public std::runtime_error {
public:
  TraceParseError(std::size_t line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

private:
  std::size_t line_;
};

/// Column header for a trace; bot traces depend on the bot and user counts.
std::string trace_header(const EpisodeTrace& trace);

/// Writes the trace as CSV. When `config_echo` is non-empty it is written
/// first as a `# config=` comment line.
void emit_trace(const EpisodeTrace& trace, const std::filesystem::path& path, const std::string& config_echo = {});
EpisodeTrace load_trace(const std::filesystem::path& path);

/// Shortest decimal text that parses back to the same double.
std::string format_double(double v);

}  // namespace opshape
