#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ccgym/simnet.hpp"
#include "ccgym/topo.hpp"
#include "ccgym/transport.hpp"

namespace ccgym {

/// Which feature columns the state matrix carries.
enum class StateEncoding {
  kFull,           // queue fraction, utilization, one flag per source host
  kFlowFlagsOnly,  // one flag per source host
};

struct EnvConfig {
  TopologyKind topology = TopologyKind::kDumbbell;
  int topology_size = 4;  // dumbbell hosts or fat-tree k
  TransportKind transport = TransportKind::kUdp;
  std::string pattern;    // empty: the topology's default pattern

  double bw_max_bps = 10e6;
  double demand_bps = 0.0;  // 0: bw_max
  std::int64_t q_max_bytes = 150'000;
  std::optional<std::int64_t> ecn_threshold_bytes = 30'000;
  double prop_delay_s = 0.5e-3;

  double tick_s = 1e-3;
  int ticks_per_step = 500;
  int horizon = 200;
  double a_min = 0.01;

  /// Baseline mode: rate limits stay at bw_max whatever the action.
  bool pin_actions = false;
  StateEncoding encoding = StateEncoding::kFull;
};

/// Throws ConfigError describing the first invalid field.
void validate(const EnvConfig& config);

Topology build_topology(const EnvConfig& config);

/// "dumbbell-cross": host i -> host i + n/2 for the left half.
/// "fattree-stride": host i -> host (i + n/2) mod n.
/// "none": no traffic.
std::vector<FlowSpec> make_traffic(std::string_view pattern,
                                   const Topology& topology,
                                   TransportKind transport, double demand_bps);
std::string default_pattern(TopologyKind kind);

/// Row-major ports x features, entries in [0, 1].
struct StateMatrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> values;

  StateMatrix() = default;
  StateMatrix(int r, int c) : rows(r), cols(c), values(std::size_t(r) * c, 0.0) {}
  double& at(int r, int c) { return values[std::size_t(r) * cols + c]; }
  double at(int r, int c) const { return values[std::size_t(r) * cols + c]; }
  bool operator==(const StateMatrix&) const = default;
};

struct RewardBreakdown {
  double bw_term = 0.0;
  double queue_term = 0.0;
  double std_term = 0.0;
  double total = 0.0;
};

struct StepInfo {
  std::vector<double> host_bw_bps;
  std::vector<double> port_queue_mean;  // monitored-port order, bytes
  std::vector<std::int64_t> port_queue_max;
  std::int64_t drops_bytes = 0;
};

struct StepResult {
  StateMatrix state;
  RewardBreakdown reward;
  bool done = false;
  std::vector<double> action;  // clamped action that was applied
  StepInfo info;
};

struct EnvMetadata {
  int state_rows = 0;
  int state_cols = 0;
  int action_len = 0;
  double bw_max_bps = 0.0;
  double step_seconds = 0.0;
};

/// a_i = min(1, max(a_min, raw_i)). Throws on wrong length or NaN.
std::vector<double> clamp_action(std::span<const double> raw, int n_hosts,
                                 double a_min);

/// Sets every host's limiter to bw_max * a_i, in host order.
void apply_action(NetSim& net, std::span<const double> action, double bw_max_bps);

/// Sum of bw_i / bw_max, minus sum over ports of (q_p / q_max)^2, minus the
/// population standard deviation of the action.
RewardBreakdown compute_reward(std::span<const double> host_bw_bps,
                               double bw_max_bps,
                               std::span<const double> port_queue_bytes,
                               double q_max_bytes,
                               std::span<const double> action);

StateMatrix collect_state(const TickWindow& window, const Topology& topology,
                          double tick_s, StateEncoding encoding);

/// Gym-style environment over the fluid simulator.
class Environment {
 public:
  explicit Environment(EnvConfig config);

  const EnvConfig& config() const { return config_; }
  const Topology& topology() const { return *topology_; }
  EnvMetadata metadata() const;
  int num_hosts() const { return topology_->num_hosts(); }
  int steps_taken() const { return step_index_; }
  double sim_time() const { return net_ ? net_->now() : 0.0; }

  StateMatrix reset();
  StepResult step(std::span<const double> raw_action);

  /// Read access for tests and diagnostics; valid after reset().
  const NetSim& net() const;
  const std::vector<FlowSource>& sources() const { return sources_; }

 private:
  EnvConfig config_;
  std::unique_ptr<Topology> topology_;
  std::vector<FlowSpec> flows_;
  std::unique_ptr<NetSim> net_;
  std::vector<FlowSource> sources_;
  TickWindow window_;
  TickReport tick_;
  std::vector<std::int64_t> desired_;
  int step_index_ = 0;
  bool ready_ = false;
  bool done_ = false;
};

}  // namespace ccgym
