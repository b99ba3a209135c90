#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ccgym/config.hpp"

namespace ccgym {

/// First line of every trace.csv.
inline constexpr std::string_view kTraceSchema = "#ccgym-trace v1";

struct TraceRecord {
  int step = 0;
  double sim_time_s = 0.0;
  RewardBreakdown reward;
  std::vector<double> host_bw_bps;
  std::vector<double> port_queue_mean;
  std::vector<std::int64_t> port_queue_max;
  std::int64_t drops_bytes = 0;
  std::vector<double> action;
};

/// Column names in trace order for the given topology.
std::vector<std::string> trace_columns(const Topology& topology);
std::string format_trace_row(const TraceRecord& record);

struct RewardStats {
  double mean = 0.0;
  double min = 0.0;
  double max = 0.0;
  int count = 0;
};

/// Stats over rewards; `final_fraction` selects the last ceil(f * n) entries.
RewardStats reward_stats(std::span<const double> rewards, double final_fraction = 1.0);

struct RunResult {
  std::filesystem::path dir;
  std::uint64_t seed = 0;
  std::vector<double> rewards;
  RewardStats overall;
  RewardStats final10;
};

/// Runs one seed into `dir` (created if needed): trace.csv, summary.txt and
/// config.txt. The snapshot's seed list is just `seed`.
RunResult run_experiment(const ExperimentConfig& config, std::uint64_t seed,
                         const std::filesystem::path& dir);

/// Same, using config.seeds.front() and config.output.
RunResult run_experiment(const ExperimentConfig& config);

struct SuiteResult {
  std::vector<RunResult> runs;  // in config.seeds order
  std::filesystem::path aggregate;
};

/// One run per seed under `config.output/seed_<i>_<seed>`, up to
/// config.threads at a time, then aggregate.csv with per-step mean and
/// population std of the reward. A failing seed stops scheduling further
/// seeds; finished run dirs are kept and the first error is rethrown.
SuiteResult run_suite(const ExperimentConfig& config);

/// Parsed trace.csv.
struct TraceTable {
  std::string schema;
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  /// Throws LookupError naming the missing column.
  int column(std::string_view name) const;
  std::vector<double> column_values(std::string_view name) const;
};

TraceTable read_trace(const std::filesystem::path& csv);

/// key = value pairs from summary.txt.
std::vector<std::pair<std::string, std::string>> read_summary(
    const std::filesystem::path& path);

struct PlotOptions {
  /// Port name for the queue plot; empty picks the port with the largest
  /// mean queue in the first run.
  std::string queue_port;
  /// Longer traces are averaged into at most this many points.
  int max_points = 1000;
};

/// Writes reward.svg, bandwidth.svg and queue.svg into `out_dir` and returns
/// their paths. All inputs are read and checked before any file is written.
std::vector<std::filesystem::path> emit_plots(
    const std::vector<std::filesystem::path>& run_dirs,
    const std::filesystem::path& out_dir, const PlotOptions& options = {});

}  // namespace ccgym
