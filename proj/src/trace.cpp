#include "opshape/trace.hpp"

#include <charconv>
#include <fstream>
#include <numeric>
#include <sstream>
#include <system_error>

namespace opshape {

const char* to_string(Scenario s) { return s == Scenario::bot ? "bot" : "advertising"; }

Scenario scenario_from_string(const std::string& name) {
  if (name == "bot") return Scenario::bot;
  if (name == "advertising") return Scenario::advertising;
  throw std::invalid_argument("unknown scenario '" + name + "' (expected bot or advertising)");
}

double EpisodeTrace::episode_return() const {
  return std::accumulate(records.begin(), records.end(), 0.0,
                         [](double acc, const StepRecord& r) { return acc + r.reward; });
}

double EpisodeTrace::final_mean() const {
  if (records.empty()) throw std::logic_error("trace: no records");
  return records.back().mean;
}

double EpisodeTrace::final_std() const {
  if (records.empty()) throw std::logic_error("trace: no records");
  return records.back().std;
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

namespace {

std::vector<std::string> header_columns(Scenario scenario, std::size_t n_bots, std::size_t n_users) {
  std::vector<std::string> cols = {"t", "mean", "std", "reward"};
  if (scenario == Scenario::advertising) {
    cols.insert(cols.end(), {"cost", "budget", "ad_location", "ad_range"});
    return cols;
  }
  for (std::size_t i = 1; i <= n_bots; ++i) cols.push_back("bot_" + std::to_string(i));
  for (std::size_t i = 1; i <= n_users; ++i) cols.push_back("user_" + std::to_string(i));
  return cols;
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

template <class T>
T parse_number(const std::string& text, std::size_t line, const std::string& column) {
  T v{};
  const char* first = text.data();
  const char* last = text.data() + text.size();
  const auto res = std::from_chars(first, last, v);
  if (res.ec != std::errc() || res.ptr != last)
    throw TraceParseError(line, "cannot parse '" + text + "' in column " + column);
  return v;
}

}  // namespace

std::string trace_header(const EpisodeTrace& trace) {
  const std::size_t n_bots = trace.records.empty() ? 0 : trace.records.front().bots.size();
  const std::size_t n_users = trace.records.empty() ? 0 : trace.records.front().users.size();
  const auto cols = header_columns(trace.scenario, n_bots, n_users);
  std::string out;
  for (std::size_t i = 0; i < cols.size(); ++i) {
    if (i) out += ',';
    out += cols[i];
  }
  return out;
}

void emit_trace(const EpisodeTrace& trace, const std::filesystem::path& path, const std::string& config_echo) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
  if (!config_echo.empty()) os << "# config=" << config_echo << '\n';
  os << trace_header(trace) << '\n';
  for (const StepRecord& r : trace.records) {
    os << r.t << ',' << format_double(r.mean) << ',' << format_double(r.std) << ',' << format_double(r.reward);
    if (trace.scenario == Scenario::advertising) {
      os << ',' << format_double(r.cost) << ',' << format_double(r.budget) << ',' << format_double(r.ad_location)
         << ',' << format_double(r.ad_range);
    } else {
      for (double b : r.bots) os << ',' << format_double(b);
      for (double u : r.users) os << ',' << format_double(u);
    }
    os << '\n';
  }
  if (!os) throw std::runtime_error("write failed: " + path.string());
}

EpisodeTrace load_trace(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path.string());

  EpisodeTrace trace;
  std::vector<std::string> header;
  std::size_t n_bots = 0;
  std::size_t n_users = 0;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    const std::vector<std::string> cells = split(line);

    if (header.empty()) {
      header = cells;
      if (header.size() >= 5 && header[4] == "cost") {
        trace.scenario = Scenario::advertising;
      } else {
        trace.scenario = Scenario::bot;
        for (std::size_t i = 4; i < header.size(); ++i) {
          if (header[i].starts_with("bot_")) ++n_bots;
          else if (header[i].starts_with("user_")) ++n_users;
        }
      }
      if (header != header_columns(trace.scenario, n_bots, n_users))
        throw TraceParseError(line_no, "unrecognized trace header");
      continue;
    }

    if (cells.size() != header.size())
      throw TraceParseError(line_no, "expected " + std::to_string(header.size()) + " columns, found " +
                                         std::to_string(cells.size()));
    StepRecord r;
    r.t = parse_number<int>(cells[0], line_no, header[0]);
    r.mean = parse_number<double>(cells[1], line_no, header[1]);
    r.std = parse_number<double>(cells[2], line_no, header[2]);
    r.reward = parse_number<double>(cells[3], line_no, header[3]);
    if (trace.scenario == Scenario::advertising) {
      r.cost = parse_number<double>(cells[4], line_no, header[4]);
      r.budget = parse_number<double>(cells[5], line_no, header[5]);
      r.ad_location = parse_number<double>(cells[6], line_no, header[6]);
      r.ad_range = parse_number<double>(cells[7], line_no, header[7]);
    } else {
      for (std::size_t i = 0; i < n_bots; ++i) r.bots.push_back(parse_number<double>(cells[4 + i], line_no, header[4 + i]));
      for (std::size_t i = 0; i < n_users; ++i)
        r.users.push_back(parse_number<double>(cells[4 + n_bots + i], line_no, header[4 + n_bots + i]));
    }
    trace.records.push_back(std::move(r));
  }
  if (header.empty()) throw TraceParseError(line_no, "missing header");
  return trace;
}

}  // namespace opshape
