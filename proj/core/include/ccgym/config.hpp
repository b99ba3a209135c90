#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "ccgym/agents.hpp"
#include "ccgym/envgym.hpp"

namespace ccgym {

/// One experiment: environment, agent, run length and seeds.
struct ExperimentConfig {
  EnvConfig env;
  AgentConfig agent;
  int steps = 0;
  std::vector<std::uint64_t> seeds{1};
  int threads = 1;
  std::filesystem::path output = "runs";
  /// Raw agent.* overrides, kept so snapshots round-trip.
  std::map<std::string, std::string> agent_overrides;
};

/// Parses line-oriented `section.key = value` text. Blank lines and lines
/// starting with '#' are ignored. Unknown keys and missing required keys
/// (experiment.topology, .transport, .agent, .steps) raise ConfigError with
/// the line number.
ExperimentConfig parse_config(std::string_view text);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Applies a single key/value, as from a config line. Throws ConfigError.
void set_config_value(ExperimentConfig& config, std::string_view key,
                      std::string_view value);

/// Cross-field checks; throws ConfigError.
void validate(const ExperimentConfig& config);

/// Canonical text form; parse_config(to_config_text(c)) reproduces c.
std::string to_config_text(const ExperimentConfig& config);

/// Stable numeric text (shortest round-trip form).
std::string format_double(double v);

/// The desk-scale default step count for a topology.
int default_steps(TopologyKind kind);

}  // namespace ccgym
