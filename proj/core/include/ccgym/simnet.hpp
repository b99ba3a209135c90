#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <utility>
#include <vector>

#include "ccgym/topo.hpp"

namespace ccgym {

/// Segment size used for window <-> rate conversion.
inline constexpr std::int64_t kMssBytes = 1500;

struct QueueUpdate {
  std::int64_t queue = 0;
  std::int64_t dropped = 0;
};

/// One tick of a FIFO egress queue in bytes:
/// q' = clamp(q + arrivals - service, 0, q_max), dropped is the overflow.
QueueUpdate next_queue(std::int64_t q, std::int64_t arrivals,
                       std::int64_t service, std::int64_t q_max);

/// Same, with service = floor(capacity * dt / 8) bytes.
QueueUpdate next_queue(std::int64_t q, std::int64_t arrivals,
                       double capacity_bps, double dt_s, std::int64_t q_max);

/// Splits `total` into integer shares proportional to `weights` (largest
/// remainder, ties to the lower index). Requires 0 <= total <= sum(weights);
/// every share is <= its weight and the shares sum to `total`.
std::vector<std::int64_t> proportional_split(
    std::int64_t total, std::span<const std::int64_t> weights);

/// Converts a real-valued byte stream into whole bytes per tick without
/// drift: the fractional part carries into the next call.
class ByteQuantizer {
 public:
  std::int64_t take(double bytes);
  double carry() const { return carry_; }

 private:
  double carry_ = 0.0;
};

struct FlowEndpoints {
  HostId src;
  HostId dst;
};

/// Everything that happened in one tick. Flow vectors are indexed by flow,
/// port vectors by global PortId.
struct TickReport {
  std::vector<std::int64_t> flow_offered;
  std::vector<std::int64_t> flow_delivered;
  std::vector<std::int64_t> flow_dropped;
  std::vector<std::uint8_t> flow_marked;

  std::vector<std::int64_t> port_queue_before;
  std::vector<std::int64_t> port_queue;
  std::vector<std::int64_t> port_arrivals;
  std::vector<std::int64_t> port_tx;
  std::vector<std::int64_t> port_dropped;
  std::vector<std::uint8_t> port_marked;
  /// port * num_hosts + host: bytes from that source host entered or left
  /// the port this tick.
  std::vector<std::uint8_t> port_sources;
};

/// Fluid network state: per-port FIFO queues (with per-flow composition)
/// and per-host rate limiters, advanced in fixed ticks. Flows traverse their
/// whole route within a tick.
class NetSim {
 public:
  static constexpr double kUnlimited = std::numeric_limits<double>::infinity();

  NetSim(const Topology& topology, std::vector<FlowEndpoints> flows,
         double dt_s, double bw_max_bps);

  const Topology& topology() const { return *topology_; }
  double dt() const { return dt_s_; }
  double bw_max() const { return bw_max_bps_; }
  int num_flows() const { return static_cast<int>(flows_.size()); }
  const FlowEndpoints& flow(int f) const { return flows_.at(f); }
  const std::vector<PortId>& flow_route(int f) const { return routes_.at(f); }
  std::int64_t ticks() const { return ticks_; }
  double now() const { return static_cast<double>(ticks_) * dt_s_; }

  /// Caps summed egress of `host` at `rate_bps` (0 < rate <= bw_max).
  void set_rate_limit(HostId host, double rate_bps);
  /// Lifts the limiter; the host is then bounded only by its access link.
  void remove_rate_limit(HostId host);
  double rate_limit(HostId host) const;

  /// Applies host rate limiters to per-flow desired bytes for the next tick.
  /// When a host's flows want more than its budget, the budget is shared in
  /// proportion to demand.
  std::vector<std::int64_t> admit(std::span<const std::int64_t> desired);

  /// Advances one tick with already-admitted per-flow offers.
  void advance(std::span<const std::int64_t> offers, TickReport& out);
  TickReport advance(std::span<const std::int64_t> offers);

  const std::vector<std::int64_t>& port_queues() const { return queue_; }

 private:
  struct PortUser {
    int flow;
    int hop;
  };
  struct PortState {
    std::vector<PortUser> users;
    std::vector<std::int64_t> backlog;   // per user
    std::vector<std::int64_t> arrivals;  // per user, scratch
    ByteQuantizer service;
  };

  const Topology* topology_;
  std::vector<FlowEndpoints> flows_;
  std::vector<std::vector<PortId>> routes_;
  std::vector<std::vector<int>> user_slot_;  // flow -> hop -> slot in port
  double dt_s_;
  double bw_max_bps_;
  std::vector<PortState> ports_;
  std::vector<int> order_;  // ports in forwarding order
  std::vector<std::int64_t> queue_;
  std::vector<double> limit_bps_;
  std::vector<ByteQuantizer> budget_;
  std::vector<std::vector<int>> host_flows_;
  std::int64_t ticks_ = 0;

  // scratch
  std::vector<std::int64_t> tx_, drop_, rest_;
};

/// Aggregate of consecutive TickReports over one window (e.g. an env step).
class TickWindow {
 public:
  TickWindow() = default;
  TickWindow(int num_ports, int num_hosts, int num_flows);

  void add(const TickReport& report);
  void clear();

  int ticks() const { return ticks_; }
  int num_ports() const { return static_cast<int>(port_tx_.size()); }
  int num_hosts() const { return num_hosts_; }

  const std::vector<std::int64_t>& port_tx() const { return port_tx_; }
  const std::vector<std::int64_t>& port_dropped() const { return port_dropped_; }
  const std::vector<double>& port_queue_sum() const { return port_queue_sum_; }
  const std::vector<std::int64_t>& port_queue_max() const { return port_queue_max_; }
  const std::vector<std::uint8_t>& port_sources() const { return port_sources_; }
  const std::vector<std::int64_t>& flow_delivered() const { return flow_delivered_; }
  const std::vector<std::int64_t>& flow_dropped() const { return flow_dropped_; }
  const std::vector<int>& flow_marked_ticks() const { return flow_marked_ticks_; }

 private:
  int ticks_ = 0;
  int num_hosts_ = 0;
  std::vector<std::int64_t> port_tx_;
  std::vector<std::int64_t> port_dropped_;
  std::vector<double> port_queue_sum_;
  std::vector<std::int64_t> port_queue_max_;
  std::vector<std::uint8_t> port_sources_;
  std::vector<std::int64_t> flow_delivered_;
  std::vector<std::int64_t> flow_dropped_;
  std::vector<int> flow_marked_ticks_;
};

/// Transmitted bytes / (capacity * window duration), clamped to [0, 1].
/// Throws ArgumentError on an empty window.
double measure_utilization(const TickWindow& window, const Topology& topology,
                           PortId port, double dt_s);
double measure_utilization(std::span<const TickReport> window,
                           const Topology& topology, PortId port, double dt_s);

}  // namespace ccgym
