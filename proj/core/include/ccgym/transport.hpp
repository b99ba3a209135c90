#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>

#include "ccgym/simnet.hpp"
#include "ccgym/topo.hpp"

namespace ccgym {

enum class TransportKind { kUdp, kVegas, kDctcp };

std::string_view to_string(TransportKind kind);
/// Accepts "udp", "vegas", "dctcp"; throws ConfigError otherwise.
TransportKind parse_transport(std::string_view name);

struct FlowSpec {
  HostId src;
  HostId dst;
  TransportKind transport = TransportKind::kUdp;
  double demand_bps = 0.0;
  double start_s = 0.0;
  std::optional<double> stop_s;

  bool active_at(double t) const {
    return t >= start_s && (!stop_s || t < *stop_s);
  }
};

/// Throws ConfigError unless demand > 0 and start < stop.
void validate(const FlowSpec& flow);

/// Classic Vegas law; cwnd and thresholds in packets.
struct VegasState {
  double cwnd = 10.0;
  double base_rtt = std::numeric_limits<double>::infinity();
  double alpha = 2.0;
  double beta = 4.0;
};

struct DctcpState {
  double cwnd = 10.0;
  double alpha = 1.0;
  double g = 1.0 / 16.0;
};

/// base_rtt <- min(base_rtt, rtt); diff = cwnd * (1 - base_rtt / rtt);
/// loss halves, diff < alpha adds one, diff > beta removes one.
VegasState vegas_on_rtt(VegasState state, double rtt_sample, bool lost);

/// alpha is updated before the window cut. Throws for F outside [0, 1].
DctcpState dctcp_on_window(DctcpState state, double marked_fraction,
                           bool lost);

/// cwnd * MSS / srtt in bits per second (infinite for srtt == 0).
double window_rate_bps(double cwnd_packets, double srtt_s);

/// Bytes a source would send in one tick of length dt, before host rate
/// limiting is applied by the simulator. `window_rate_bps` is ignored for UDP.
double source_offer(const FlowSpec& flow, double window_rate_bps,
                    double limit_bps, double dt_s);

/// Round-trip propagation delay plus forward-path queuing delay.
double rtt_estimate(const Topology& topology, std::span<const PortId> route,
                    std::span<const std::int64_t> port_queues);
double base_rtt(const Topology& topology, std::span<const PortId> route);

/// EWMA with gain 1/8.
inline double update_srtt(double srtt, double sample) {
  return srtt + (sample - srtt) / 8.0;
}

/// Per-flow source: demand, congestion-control state and the per-window
/// bookkeeping that drives it. Windowed transports update once per srtt.
class FlowSource {
 public:
  FlowSource(FlowSpec spec, double initial_rtt_s);

  const FlowSpec& spec() const { return spec_; }
  double srtt() const { return srtt_; }
  double cwnd() const;
  const VegasState* vegas() const { return std::get_if<VegasState>(&cc_); }
  const DctcpState* dctcp() const { return std::get_if<DctcpState>(&cc_); }

  /// Sending rate the source wants at time `now` (0 when inactive).
  double desired_rate_bps(double now) const;
  /// Whole bytes to offer this tick.
  std::int64_t take_offer(double now, double dt_s);

  /// Feedback after a tick: current RTT estimate, whether the flow crossed a
  /// marking port, whether any of its bytes were dropped.
  void on_tick(double dt_s, double rtt_sample_s, bool marked, bool dropped);

 private:
  FlowSpec spec_;
  std::variant<std::monostate, VegasState, DctcpState> cc_;
  double srtt_;
  double elapsed_ = 0.0;
  int window_ticks_ = 0;
  int window_marked_ = 0;
  bool window_lost_ = false;
  double window_min_rtt_ = std::numeric_limits<double>::infinity();
  ByteQuantizer quantizer_;
};

}  // namespace ccgym
