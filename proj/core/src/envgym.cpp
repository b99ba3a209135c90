#include "ccgym/envgym.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "ccgym/error.hpp"

namespace ccgym {

void validate(const EnvConfig& c) {
  if (c.topology == TopologyKind::kDumbbell &&
      (c.topology_size < 2 || c.topology_size % 2 != 0)) {
    throw ConfigError("dumbbell host count must be even and >= 2");
  }
  if (c.topology == TopologyKind::kFatTree &&
      (c.topology_size < 2 || c.topology_size % 2 != 0)) {
    throw ConfigError("fat-tree k must be even and >= 2");
  }
  if (!(c.bw_max_bps > 0.0)) throw ConfigError("bw_max must be positive");
  if (c.demand_bps < 0.0) throw ConfigError("demand must be non-negative");
  if (c.q_max_bytes <= 0) throw ConfigError("q_max must be positive");
  if (c.ecn_threshold_bytes &&
      (*c.ecn_threshold_bytes <= 0 || *c.ecn_threshold_bytes > c.q_max_bytes)) {
    throw ConfigError("ecn_threshold must lie in (0, q_max]");
  }
  if (!(c.prop_delay_s >= 0.0)) throw ConfigError("prop_delay must be >= 0");
  if (!(c.tick_s > 0.0)) throw ConfigError("tick must be positive");
  if (c.ticks_per_step < 1) throw ConfigError("ticks_per_step must be >= 1");
  if (c.horizon < 1) throw ConfigError("horizon must be >= 1");
  if (!(c.a_min > 0.0 && c.a_min <= 1.0)) throw ConfigError("a_min must lie in (0, 1]");
  const std::string pattern =
      c.pattern.empty() ? default_pattern(c.topology) : c.pattern;
  if (pattern != "dumbbell-cross" && pattern != "fattree-stride" && pattern != "none") {
    throw ConfigError("unknown traffic pattern '" + pattern + "'");
  }
}

Topology build_topology(const EnvConfig& c) {
  LinkParams lp;
  lp.capacity_bps = c.bw_max_bps;
  lp.prop_delay_s = c.prop_delay_s;
  lp.q_max_bytes = c.q_max_bytes;
  lp.ecn_threshold_bytes = c.ecn_threshold_bytes;
  if (c.topology == TopologyKind::kDumbbell) {
    return build_dumbbell(c.topology_size, c.bw_max_bps, lp);
  }
  return build_fattree(c.topology_size, c.bw_max_bps, lp);
}

std::string default_pattern(TopologyKind kind) {
  return kind == TopologyKind::kDumbbell ? "dumbbell-cross" : "fattree-stride";
}

std::vector<FlowSpec> make_traffic(std::string_view pattern,
                                   const Topology& topology,
                                   TransportKind transport, double demand_bps) {
  const int n = topology.num_hosts();
  std::vector<FlowSpec> flows;
  auto add = [&](int s, int d) {
    FlowSpec f;
    f.src = HostId{s};
    f.dst = HostId{d};
    f.transport = transport;
    f.demand_bps = demand_bps;
    flows.push_back(f);
  };
  if (pattern == "dumbbell-cross") {
    if (n % 2 != 0) throw ConfigError("dumbbell-cross needs an even host count");
    for (int i = 0; i < n / 2; ++i) add(i, i + n / 2);
  } else if (pattern == "fattree-stride") {
    if (n < 2) throw ConfigError("fattree-stride needs at least two hosts");
    for (int i = 0; i < n; ++i) add(i, (i + n / 2) % n);
  } else if (pattern != "none") {
    throw ConfigError("unknown traffic pattern '" + std::string(pattern) + "'");
  }
  return flows;
}

std::vector<double> clamp_action(std::span<const double> raw, int n_hosts,
                                 double a_min) {
  if (static_cast<int>(raw.size()) != n_hosts) {
    throw ArgumentError("action length " + std::to_string(raw.size()) +
                        " does not match host count " + std::to_string(n_hosts));
  }
  std::vector<double> a(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (std::isnan(raw[i])) throw ArgumentError("action contains NaN");
    a[i] = std::min(1.0, std::max(a_min, raw[i]));
  }
  return a;
}

void apply_action(NetSim& net, std::span<const double> action, double bw_max_bps) {
  for (std::size_t i = 0; i < action.size(); ++i) {
    net.set_rate_limit(HostId{static_cast<int>(i)}, bw_max_bps * action[i]);
  }
}

RewardBreakdown compute_reward(std::span<const double> host_bw_bps,
                               double bw_max_bps,
                               std::span<const double> port_queue_bytes,
                               double q_max_bytes,
                               std::span<const double> action) {
  RewardBreakdown r;
  for (double bw : host_bw_bps) r.bw_term += bw / bw_max_bps;
  for (double q : port_queue_bytes) {
    const double frac = q / q_max_bytes;
    r.queue_term += frac * frac;
  }
  if (!action.empty()) {
    const double n = static_cast<double>(action.size());
    const double mean = std::accumulate(action.begin(), action.end(), 0.0) / n;
    double var = 0.0;
    for (double a : action) var += (a - mean) * (a - mean);
    r.std_term = std::sqrt(var / n);
  }
  r.total = r.bw_term - r.queue_term - r.std_term;
  return r;
}

StateMatrix collect_state(const TickWindow& window, const Topology& topology,
                          double tick_s, StateEncoding encoding) {
  const auto& monitored = topology.monitored_ports();
  const int n_hosts = topology.num_hosts();
  const int offset = encoding == StateEncoding::kFull ? 2 : 0;
  StateMatrix s(static_cast<int>(monitored.size()), offset + n_hosts);
  if (window.ticks() == 0) return s;
  for (int row = 0; row < s.rows; ++row) {
    const PortId p = monitored[row];
    if (offset == 2) {
      const double q_max = static_cast<double>(topology.link_of(p).q_max_bytes);
      const double mean_q = window.port_queue_sum()[p.value] / window.ticks();
      s.at(row, 0) = std::clamp(mean_q / q_max, 0.0, 1.0);
      s.at(row, 1) = measure_utilization(window, topology, p, tick_s);
    }
    for (int h = 0; h < n_hosts; ++h) {
      s.at(row, offset + h) =
          window.port_sources()[std::size_t(p.value) * n_hosts + h] ? 1.0 : 0.0;
    }
  }
  return s;
}

Environment::Environment(EnvConfig config) : config_(std::move(config)) {
  validate(config_);
  if (config_.pattern.empty()) config_.pattern = default_pattern(config_.topology);
  topology_ = std::make_unique<Topology>(build_topology(config_));
  const double demand =
      config_.demand_bps > 0.0 ? config_.demand_bps : config_.bw_max_bps;
  flows_ = make_traffic(config_.pattern, *topology_, config_.transport, demand);
}

EnvMetadata Environment::metadata() const {
  EnvMetadata m;
  m.state_rows = static_cast<int>(topology_->monitored_ports().size());
  m.state_cols = (config_.encoding == StateEncoding::kFull ? 2 : 0) +
                 topology_->num_hosts();
  m.action_len = topology_->num_hosts();
  m.bw_max_bps = config_.bw_max_bps;
  m.step_seconds = config_.tick_s * config_.ticks_per_step;
  return m;
}

const NetSim& Environment::net() const {
  if (!net_) throw StateError("environment not reset");
  return *net_;
}

StateMatrix Environment::reset() {
  std::vector<FlowEndpoints> endpoints;
  for (const auto& f : flows_) endpoints.push_back({f.src, f.dst});
  net_ = std::make_unique<NetSim>(*topology_, std::move(endpoints),
                                  config_.tick_s, config_.bw_max_bps);
  sources_.clear();
  for (int f = 0; f < static_cast<int>(flows_.size()); ++f) {
    sources_.emplace_back(flows_[f], base_rtt(*topology_, net_->flow_route(f)));
  }
  window_ = TickWindow(topology_->num_ports(), topology_->num_hosts(),
                       static_cast<int>(flows_.size()));
  desired_.assign(flows_.size(), 0);
  step_index_ = 0;
  ready_ = true;
  done_ = false;
  const EnvMetadata m = metadata();
  return StateMatrix(m.state_rows, m.state_cols);
}

StepResult Environment::step(std::span<const double> raw_action) {
  if (!ready_) throw StateError("step() called before reset()");
  if (done_) throw StateError("step() called after done without reset()");

  const int n_hosts = topology_->num_hosts();
  StepResult out;
  out.action = clamp_action(raw_action, n_hosts, config_.a_min);
  if (config_.pin_actions) std::fill(out.action.begin(), out.action.end(), 1.0);
  apply_action(*net_, out.action, config_.bw_max_bps);

  const double dt = config_.tick_s;
  window_.clear();
  for (int t = 0; t < config_.ticks_per_step; ++t) {
    const double now = net_->now();
    for (std::size_t f = 0; f < sources_.size(); ++f) {
      desired_[f] = sources_[f].take_offer(now, dt);
    }
    const auto admitted = net_->admit(desired_);
    net_->advance(admitted, tick_);
    // Bytes sent this tick queued behind the occupancy at its start.
    const auto& queues = tick_.port_queue_before;
    for (std::size_t f = 0; f < sources_.size(); ++f) {
      const double rtt =
          rtt_estimate(*topology_, net_->flow_route(static_cast<int>(f)), queues);
      sources_[f].on_tick(dt, rtt, tick_.flow_marked[f] != 0,
                          tick_.flow_dropped[f] > 0);
    }
    window_.add(tick_);
  }

  const double window_s = dt * window_.ticks();
  out.info.host_bw_bps.resize(n_hosts);
  for (int h = 0; h < n_hosts; ++h) {
    const PortId p = topology_->host_port(HostId{h});
    out.info.host_bw_bps[h] =
        static_cast<double>(window_.port_tx()[p.value]) * 8.0 / window_s;
  }
  for (PortId p : topology_->monitored_ports()) {
    out.info.port_queue_mean.push_back(window_.port_queue_sum()[p.value] /
                                       window_.ticks());
    out.info.port_queue_max.push_back(window_.port_queue_max()[p.value]);
  }
  out.info.drops_bytes = std::accumulate(window_.port_dropped().begin(),
                                         window_.port_dropped().end(),
                                         std::int64_t{0});
  out.reward = compute_reward(out.info.host_bw_bps, config_.bw_max_bps,
                              out.info.port_queue_mean,
                              static_cast<double>(config_.q_max_bytes),
                              out.action);
  out.state = collect_state(window_, *topology_, dt, config_.encoding);
  ++step_index_;
  done_ = step_index_ >= config_.horizon;
  out.done = done_;
  return out;
}

}  // namespace ccgym
