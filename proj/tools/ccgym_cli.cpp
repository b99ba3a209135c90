// ccgym command-line front end: run, suite, baseline, plot, validate.
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ccgym/config.hpp"
#include "ccgym/error.hpp"
#include "ccgym/harness.hpp"

namespace fs = std::filesystem;
using namespace ccgym;

namespace {

struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string seeds;
  std::optional<int> steps;
  std::string agent;
  std::string transport;
  std::string topo;
  std::string out;
  std::optional<int> threads;
  std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, CommonFlags& f, bool with_agent) {
  cmd->add_option("--config", f.config, "config file (section.key = value)");
  cmd->add_option("--seed", f.seed, "single seed");
  cmd->add_option("--steps", f.steps, "environment steps per run");
  if (with_agent) cmd->add_option("--agent", f.agent, "none|reinforce|ppo|ddpg");
  cmd->add_option("--transport", f.transport, "udp|vegas|dctcp");
  cmd->add_option("--topo", f.topo, "dumbbell[:hosts] or fattree[:k]");
  cmd->add_option("--out", f.out, "output directory");
  cmd->add_option("--set", f.overrides, "extra key=value override, repeatable");
}

ExperimentConfig build_config(const CommonFlags& f) {
  ExperimentConfig c;
  bool steps_given = false;
  if (!f.config.empty()) {
    c = load_config(f.config);
    steps_given = true;
  }
  if (!f.topo.empty()) {
    const auto colon = f.topo.find(':');
    set_config_value(c, "experiment.topology", f.topo.substr(0, colon));
    if (colon != std::string::npos) {
      set_config_value(c, "experiment.hosts", f.topo.substr(colon + 1));
    } else if (f.config.empty()) {
      c.env.topology_size = 4;
    }
    c.env.pattern.clear();
  }
  if (!f.transport.empty()) set_config_value(c, "experiment.transport", f.transport);
  if (!f.agent.empty()) set_config_value(c, "experiment.agent", f.agent);
  if (!f.seeds.empty()) set_config_value(c, "experiment.seeds", f.seeds);
  if (f.seed) c.seeds = {*f.seed};
  if (f.threads) c.threads = *f.threads;
  if (!f.out.empty()) c.output = f.out;
  for (const auto& kv : f.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
    set_config_value(c, kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (f.steps) {
    c.steps = *f.steps;
  } else if (!steps_given) {
    c.steps = default_steps(c.env.topology);
  }
  validate(c);
  return c;
}

void print_run(const RunResult& r) {
  std::cout << r.dir.string() << ": reward mean " << format_double(r.overall.mean)
            << ", final 10% mean " << format_double(r.final10.mean) << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ccgym: congestion-control gym over a fluid datacenter simulator"};
  app.require_subcommand(1);

  CommonFlags run_f, suite_f, base_f;
  auto* run = app.add_subcommand("run", "one seeded run: trace.csv, summary.txt, config.txt");
  add_common(run, run_f, true);

  auto* suite = app.add_subcommand("suite", "one run per seed plus aggregate.csv");
  add_common(suite, suite_f, true);
  suite->add_option("--seeds", suite_f.seeds, "comma-separated seed list");
  suite->add_option("--threads", suite_f.threads, "parallel runs");

  auto* baseline = app.add_subcommand(
      "baseline", "transport baseline with rate limits pinned at bw_max (vegas and dctcp by default)");
  add_common(baseline, base_f, false);

  std::vector<std::string> plot_dirs;
  std::string plot_out = "plots";
  std::string plot_port;
  auto* plot = app.add_subcommand("plot", "reward, bandwidth and queue plots (SVG)");
  plot->add_option("runs", plot_dirs, "run directories")->required();
  plot->add_option("--out", plot_out, "output directory");
  plot->add_option("--port", plot_port, "port for the queue plot, e.g. s0-eth3");

  std::string validate_path;
  auto* check = app.add_subcommand("validate", "parse and check a config file");
  check->add_option("--config", validate_path, "config file")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      print_run(run_experiment(build_config(run_f)));
    } else if (*suite) {
      const auto result = run_suite(build_config(suite_f));
      for (const auto& r : result.runs) print_run(r);
      std::cout << "aggregate: " << result.aggregate.string() << "\n";
    } else if (*baseline) {
      std::vector<std::string> transports{"vegas", "dctcp"};
      if (!base_f.transport.empty()) transports = {base_f.transport};
      CommonFlags f = base_f;
      f.agent = "none";
      const fs::path root = base_f.out.empty() ? fs::path("runs/baseline") : fs::path(base_f.out);
      for (const auto& t : transports) {
        f.transport = t;
        f.out = (transports.size() > 1 ? root / t : root).string();
        print_run(run_experiment(build_config(f)));
      }
    } else if (*plot) {
      std::vector<fs::path> dirs(plot_dirs.begin(), plot_dirs.end());
      PlotOptions options;
      options.queue_port = plot_port;
      for (const auto& p : emit_plots(dirs, plot_out, options)) std::cout << p.string() << "\n";
    } else if (*check) {
      const auto c = load_config(validate_path);
      std::cout << validate_path << ": ok (" << c.steps << " steps, " << c.seeds.size()
                << " seed(s))\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "ccgym: error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
