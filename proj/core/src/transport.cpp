#include "ccgym/transport.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "ccgym/error.hpp"

namespace ccgym {

std::string_view to_string(TransportKind kind) {
  switch (kind) {
    case TransportKind::kUdp: return "udp";
    case TransportKind::kVegas: return "vegas";
    case TransportKind::kDctcp: return "dctcp";
  }
  return "?";
}

TransportKind parse_transport(std::string_view name) {
  if (name == "udp") return TransportKind::kUdp;
  if (name == "vegas") return TransportKind::kVegas;
  if (name == "dctcp") return TransportKind::kDctcp;
  throw ConfigError("unknown transport '" + std::string(name) + "'");
}

void validate(const FlowSpec& flow) {
  if (!(flow.demand_bps > 0.0)) throw ConfigError("flow demand must be positive");
  if (flow.stop_s && !(flow.start_s < *flow.stop_s)) {
    throw ConfigError("flow start must precede stop");
  }
  if (flow.src == flow.dst) throw ConfigError("flow src equals dst");
}

VegasState vegas_on_rtt(VegasState s, double rtt_sample, bool lost) {
  if (!(rtt_sample > 0.0)) throw ArgumentError("vegas: RTT sample must be positive");
  s.base_rtt = std::min(s.base_rtt, rtt_sample);
  if (lost) {
    s.cwnd = std::max(s.cwnd / 2.0, 1.0);
    return s;
  }
  // Band edges are inclusive; the slack absorbs rounding in the ratio.
  constexpr double kSlack = 1e-9;
  const double diff = s.cwnd * (1.0 - s.base_rtt / rtt_sample);
  if (diff < s.alpha - kSlack) {
    s.cwnd += 1.0;
  } else if (diff > s.beta + kSlack) {
    s.cwnd = std::max(s.cwnd - 1.0, 1.0);
  }
  return s;
}

DctcpState dctcp_on_window(DctcpState s, double f, bool lost) {
  if (!(f >= 0.0 && f <= 1.0)) {
    throw ArgumentError("dctcp: marked fraction outside [0, 1]");
  }
  s.alpha = (1.0 - s.g) * s.alpha + s.g * f;
  s.alpha = std::clamp(s.alpha, 0.0, 1.0);
  if (lost) {
    s.cwnd /= 2.0;
  } else if (f > 0.0) {
    s.cwnd *= 1.0 - s.alpha / 2.0;
  } else {
    s.cwnd += 1.0;
  }
  s.cwnd = std::max(s.cwnd, 1.0);
  return s;
}

double window_rate_bps(double cwnd_packets, double srtt_s) {
  if (srtt_s <= 0.0) return std::numeric_limits<double>::infinity();
  return cwnd_packets * static_cast<double>(kMssBytes) * 8.0 / srtt_s;
}

double source_offer(const FlowSpec& flow, double window_rate, double limit_bps,
                    double dt_s) {
  double rate = std::min(flow.demand_bps, limit_bps);
  if (flow.transport != TransportKind::kUdp) rate = std::min(rate, window_rate);
  return rate * dt_s / 8.0;
}

double base_rtt(const Topology& topology, std::span<const PortId> route) {
  double one_way = 0.0;
  for (PortId p : route) one_way += topology.link_of(p).prop_delay_s;
  return 2.0 * one_way;
}

double rtt_estimate(const Topology& topology, std::span<const PortId> route,
                    std::span<const std::int64_t> port_queues) {
  double queuing = 0.0;
  for (PortId p : route) {
    queuing += static_cast<double>(port_queues[p.value]) * 8.0 /
               topology.link_of(p).capacity_bps;
  }
  return base_rtt(topology, route) + queuing;
}

FlowSource::FlowSource(FlowSpec spec, double initial_rtt_s)
    : spec_(spec), srtt_(initial_rtt_s) {
  validate(spec_);
  switch (spec_.transport) {
    case TransportKind::kUdp: break;
    case TransportKind::kVegas: cc_ = VegasState{}; break;
    case TransportKind::kDctcp: cc_ = DctcpState{}; break;
  }
}

double FlowSource::cwnd() const {
  if (const auto* v = vegas()) return v->cwnd;
  if (const auto* d = dctcp()) return d->cwnd;
  return 0.0;
}

double FlowSource::desired_rate_bps(double now) const {
  if (!spec_.active_at(now)) return 0.0;
  if (spec_.transport == TransportKind::kUdp) return spec_.demand_bps;
  return std::min(spec_.demand_bps, window_rate_bps(cwnd(), srtt_));
}

std::int64_t FlowSource::take_offer(double now, double dt_s) {
  if (!spec_.active_at(now)) return 0;
  const double rate = spec_.transport == TransportKind::kUdp
                          ? spec_.demand_bps
                          : window_rate_bps(cwnd(), srtt_);
  return quantizer_.take(source_offer(
      spec_, rate, std::numeric_limits<double>::infinity(), dt_s));
}

void FlowSource::on_tick(double dt_s, double rtt_sample_s, bool marked,
                         bool dropped) {
  srtt_ = update_srtt(srtt_, rtt_sample_s);
  if (spec_.transport == TransportKind::kUdp) return;
  // Vegas tracks the propagation floor from every sample and decides on the
  // smallest RTT seen in the window, as the kernel does per ACK.
  if (auto* v = std::get_if<VegasState>(&cc_); v && rtt_sample_s > 0.0) {
    v->base_rtt = std::min(v->base_rtt, rtt_sample_s);
    window_min_rtt_ = std::min(window_min_rtt_, rtt_sample_s);
  }
  elapsed_ += dt_s;
  ++window_ticks_;
  window_marked_ += marked ? 1 : 0;
  window_lost_ = window_lost_ || dropped;
  if (elapsed_ + 1e-12 < srtt_) return;

  if (auto* v = std::get_if<VegasState>(&cc_); v && std::isfinite(window_min_rtt_)) {
    *v = vegas_on_rtt(*v, window_min_rtt_, window_lost_);
  } else if (auto* d = std::get_if<DctcpState>(&cc_)) {
    const double f = static_cast<double>(window_marked_) / window_ticks_;
    *d = dctcp_on_window(*d, f, window_lost_);
  }
  elapsed_ = 0.0;
  window_ticks_ = 0;
  window_marked_ = 0;
  window_lost_ = false;
  window_min_rtt_ = std::numeric_limits<double>::infinity();
}

}  // namespace ccgym
