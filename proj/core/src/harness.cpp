#include "ccgym/harness.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <exception>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include "ccgym/error.hpp"

namespace ccgym {

namespace fs = std::filesystem;

namespace {

void append_double(std::string& out, double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  out.append(buf, ec == std::errc() ? ptr : buf);
}

void append_int(std::string& out, std::int64_t v) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  out.append(buf, ec == std::errc() ? ptr : buf);
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
}

std::string run_label(const ExperimentConfig& c) {
  if (c.agent.kind == AgentKind::kNone) {
    return std::string(to_string(c.env.transport)) + " baseline";
  }
  std::string label(to_string(c.agent.kind));
  if (c.env.transport != TransportKind::kUdp) {
    label += "/" + std::string(to_string(c.env.transport));
  }
  return label;
}

nn::Vec flatten(const StateMatrix& s) {
  return Eigen::Map<const nn::Vec>(s.values.data(), static_cast<Eigen::Index>(s.values.size()));
}

void append_stats(std::string& out, std::string_view prefix, const RewardStats& s) {
  out += prefix;
  out += "_mean = ";
  append_double(out, s.mean);
  out += "\n";
  out += prefix;
  out += "_min = ";
  append_double(out, s.min);
  out += "\n";
  out += prefix;
  out += "_max = ";
  append_double(out, s.max);
  out += "\n";
  out += prefix;
  out += "_count = ";
  append_int(out, s.count);
  out += "\n";
}

}  // namespace

std::vector<std::string> trace_columns(const Topology& topo) {
  std::vector<std::string> cols{"step", "sim_time_s", "reward", "bw_term", "queue_term", "std_term"};
  for (int h = 0; h < topo.num_hosts(); ++h) {
    cols.push_back("bw_" + topo.node_name(NodeRef{NodeKind::kHost, h}));
  }
  for (PortId p : topo.monitored_ports()) cols.push_back("qmean_" + topo.port_name(p));
  for (PortId p : topo.monitored_ports()) cols.push_back("qmax_" + topo.port_name(p));
  cols.push_back("drops_bytes");
  for (int h = 0; h < topo.num_hosts(); ++h) {
    cols.push_back("action_" + topo.node_name(NodeRef{NodeKind::kHost, h}));
  }
  return cols;
}

std::string format_trace_row(const TraceRecord& r) {
  std::string out;
  out.reserve(64 + 24 * (r.host_bw_bps.size() * 2 + r.port_queue_mean.size() * 2));
  append_int(out, r.step);
  for (double v : {r.sim_time_s, r.reward.total, r.reward.bw_term, r.reward.queue_term,
                   r.reward.std_term}) {
    out += ',';
    append_double(out, v);
  }
  for (double v : r.host_bw_bps) {
    out += ',';
    append_double(out, v);
  }
  for (double v : r.port_queue_mean) {
    out += ',';
    append_double(out, v);
  }
  for (std::int64_t v : r.port_queue_max) {
    out += ',';
    append_int(out, v);
  }
  out += ',';
  append_int(out, r.drops_bytes);
  for (double v : r.action) {
    out += ',';
    append_double(out, v);
  }
  return out;
}

RewardStats reward_stats(std::span<const double> rewards, double final_fraction) {
  if (rewards.empty()) throw ArgumentError("reward_stats: no rewards");
  if (!(final_fraction > 0.0 && final_fraction <= 1.0)) {
    throw ArgumentError("reward_stats: fraction must be in (0, 1]");
  }
  const auto n = rewards.size();
  auto count = static_cast<std::size_t>(std::ceil(final_fraction * static_cast<double>(n) - 1e-9));
  count = std::clamp<std::size_t>(count, 1, n);
  RewardStats s;
  s.count = static_cast<int>(count);
  s.min = rewards[n - count];
  s.max = rewards[n - count];
  double sum = 0.0;
  for (std::size_t i = n - count; i < n; ++i) {
    sum += rewards[i];
    s.min = std::min(s.min, rewards[i]);
    s.max = std::max(s.max, rewards[i]);
  }
  s.mean = sum / static_cast<double>(count);
  return s;
}

RunResult run_experiment(const ExperimentConfig& config, std::uint64_t seed,
                         const fs::path& dir) {
  validate(config);
  ExperimentConfig snapshot = config;
  snapshot.seeds = {seed};
  snapshot.output = dir;

  EnvConfig env_config = config.env;
  env_config.pin_actions = config.agent.kind == AgentKind::kNone;
  Environment env(env_config);
  const EnvMetadata meta = env.metadata();
  auto agent = make_agent(config.agent, meta.state_rows * meta.state_cols, meta.action_len, seed);

  ensure_dir(dir);
  {
    auto cfg_out = open_out(dir / "config.txt");
    cfg_out << to_config_text(snapshot);
    if (!cfg_out) throw IoError("write failed: " + (dir / "config.txt").string());
  }

  const fs::path trace_path = dir / "trace.csv";
  auto trace = open_out(trace_path);
  const std::string pattern =
      env_config.pattern.empty() ? default_pattern(env_config.topology) : env_config.pattern;
  trace << kTraceSchema << " pattern=" << pattern << " agent=" << to_string(config.agent.kind)
        << " transport=" << to_string(env_config.transport) << " seed=" << seed << "\n";
  {
    const auto cols = trace_columns(env.topology());
    std::string header;
    for (std::size_t i = 0; i < cols.size(); ++i) {
      if (i) header += ',';
      header += cols[i];
    }
    trace << header << "\n";
  }

  RunResult result;
  result.dir = dir;
  result.seed = seed;
  result.rewards.reserve(static_cast<std::size_t>(config.steps));

  StateMatrix state = env.reset();
  TraceRecord rec;
  for (int step = 0; step < config.steps; ++step) {
    const nn::Vec s = flatten(state);
    const nn::Vec raw = agent->act(s, true);
    StepResult res = env.step(std::span<const double>(raw.data(), static_cast<std::size_t>(raw.size())));

    rec.step = step;
    rec.sim_time_s = static_cast<double>(step + 1) * meta.step_seconds;
    rec.reward = res.reward;
    rec.host_bw_bps = res.info.host_bw_bps;
    rec.port_queue_mean = res.info.port_queue_mean;
    rec.port_queue_max = res.info.port_queue_max;
    rec.drops_bytes = res.info.drops_bytes;
    rec.action = res.action;
    trace << format_trace_row(rec) << "\n";
    result.rewards.push_back(res.reward.total);

    StepSample sample;
    sample.state = s;
    sample.raw_action = raw;
    sample.applied_action = Eigen::Map<const nn::Vec>(res.action.data(), static_cast<Eigen::Index>(res.action.size()));
    sample.reward = res.reward.total;
    sample.next_state = flatten(res.state);
    sample.done = res.done;
    agent->observe(sample);

    state = res.done ? env.reset() : std::move(res.state);
  }
  trace.flush();
  if (!trace) throw IoError("write failed: " + trace_path.string());

  result.overall = reward_stats(result.rewards, 1.0);
  result.final10 = reward_stats(result.rewards, 0.1);

  std::string summary;
  summary += "label = " + run_label(config) + "\n";
  summary += "agent = " + std::string(to_string(config.agent.kind)) + "\n";
  summary += "transport = " + std::string(to_string(env_config.transport)) + "\n";
  summary += "pattern = " + pattern + "\n";
  summary += "seed = " + std::to_string(seed) + "\n";
  summary += "steps = " + std::to_string(config.steps) + "\n";
  append_stats(summary, "reward", result.overall);
  append_stats(summary, "final10", result.final10);
  auto sum_out = open_out(dir / "summary.txt");
  sum_out << summary;
  if (!sum_out) throw IoError("write failed: " + (dir / "summary.txt").string());
  return result;
}

RunResult run_experiment(const ExperimentConfig& config) {
  validate(config);
  return run_experiment(config, config.seeds.front(), config.output);
}

SuiteResult run_suite(const ExperimentConfig& config) {
  validate(config);
  ensure_dir(config.output);
  const std::size_t n = config.seeds.size();
  std::vector<RunResult> runs(n);
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr first_error;
  std::mutex error_mutex;

  auto worker = [&] {
    for (;;) {
      if (failed.load()) return;
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      const std::uint64_t seed = config.seeds[i];
      const fs::path dir =
          config.output / ("seed_" + std::to_string(i) + "_" + std::to_string(seed));
      try {
        runs[i] = run_experiment(config, seed, dir);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        failed.store(true);
        return;
      }
    }
  };

  const int workers = std::min<int>(config.threads, static_cast<int>(n));
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < workers; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (first_error) std::rethrow_exception(first_error);

  SuiteResult result;
  result.aggregate = config.output / "aggregate.csv";
  auto out = open_out(result.aggregate);
  out << "step,reward_mean,reward_std,n_seeds\n";
  const auto steps = static_cast<std::size_t>(config.steps);
  std::string row;
  for (std::size_t t = 0; t < steps; ++t) {
    double sum = 0.0;
    for (const auto& r : runs) sum += r.rewards[t];
    const double mean = sum / static_cast<double>(n);
    double var = 0.0;
    for (const auto& r : runs) var += (r.rewards[t] - mean) * (r.rewards[t] - mean);
    const double sd = std::sqrt(var / static_cast<double>(n));
    row.clear();
    append_int(row, static_cast<std::int64_t>(t));
    row += ',';
    append_double(row, mean);
    row += ',';
    append_double(row, sd);
    row += ',';
    append_int(row, static_cast<std::int64_t>(n));
    out << row << "\n";
  }
  if (!out) throw IoError("write failed: " + result.aggregate.string());
  result.runs = std::move(runs);
  return result;
}

int TraceTable::column(std::string_view name) const {
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (columns[i] == name) return static_cast<int>(i);
  }
  throw LookupError("trace has no column '" + std::string(name) + "'");
}

std::vector<double> TraceTable::column_values(std::string_view name) const {
  const int c = column(name);
  std::vector<double> out;
  out.reserve(rows.size());
  for (const auto& r : rows) out.push_back(r[static_cast<std::size_t>(c)]);
  return out;
}

TraceTable read_trace(const fs::path& csv) {
  std::ifstream in(csv, std::ios::binary);
  if (!in) throw IoError("cannot open trace " + csv.string());
  TraceTable t;
  std::string line;
  if (!std::getline(in, line) || line.rfind(kTraceSchema, 0) != 0) {
    throw IoError(csv.string() + ": missing schema line '" + std::string(kTraceSchema) + "'");
  }
  t.schema = line;
  if (!std::getline(in, line) || line.empty()) {
    throw IoError(csv.string() + ": missing header row");
  }
  {
    std::stringstream ss(line);
    std::string col;
    while (std::getline(ss, col, ',')) t.columns.push_back(col);
  }
  int lineno = 2;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<double> row;
    row.reserve(t.columns.size());
    const char* p = line.data();
    const char* end = line.data() + line.size();
    while (p <= end) {
      const char* comma = std::find(p, end, ',');
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(p, comma, v);
      if (ec != std::errc() || ptr != comma) {
        throw IoError(csv.string() + ":" + std::to_string(lineno) + ": bad number");
      }
      row.push_back(v);
      p = comma + 1;
    }
    if (row.size() != t.columns.size()) {
      throw IoError(csv.string() + ":" + std::to_string(lineno) + ": expected " +
                    std::to_string(t.columns.size()) + " fields, got " +
                    std::to_string(row.size()));
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

std::vector<std::pair<std::string, std::string>> read_summary(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open summary " + path.string());
  std::vector<std::pair<std::string, std::string>> out;
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find(" = ");
    if (eq == std::string::npos) continue;
    out.emplace_back(line.substr(0, eq), line.substr(eq + 3));
  }
  return out;
}

}  // namespace ccgym
