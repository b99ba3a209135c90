#include "ccgym/simnet.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <queue>
#include <set>
#include <string>

#include "ccgym/error.hpp"

namespace ccgym {

QueueUpdate next_queue(std::int64_t q, std::int64_t arrivals,
                       std::int64_t service, std::int64_t q_max) {
  const std::int64_t raw = q + arrivals - service;
  QueueUpdate out;
  out.queue = std::clamp<std::int64_t>(raw, 0, q_max);
  out.dropped = std::max<std::int64_t>(0, raw - q_max);
  return out;
}

QueueUpdate next_queue(std::int64_t q, std::int64_t arrivals,
                       double capacity_bps, double dt_s, std::int64_t q_max) {
  const auto service =
      static_cast<std::int64_t>(std::floor(capacity_bps * dt_s / 8.0 + 1e-9));
  return next_queue(q, arrivals, service, q_max);
}

std::vector<std::int64_t> proportional_split(
    std::int64_t total, std::span<const std::int64_t> weights) {
  std::vector<std::int64_t> out(weights.size(), 0);
  const std::int64_t sum = std::accumulate(weights.begin(), weights.end(),
                                           std::int64_t{0});
  if (total < 0 || total > sum) {
    throw ArgumentError("proportional_split: total out of range");
  }
  if (total == 0) return out;
  if (total == sum) {
    std::copy(weights.begin(), weights.end(), out.begin());
    return out;
  }
  std::int64_t assigned = 0;
  std::vector<std::pair<std::int64_t, std::size_t>> rem;
  rem.reserve(weights.size());
  for (std::size_t i = 0; i < weights.size(); ++i) {
    __extension__ using Wide = __int128;
    const Wide num = static_cast<Wide>(total) * weights[i];
    out[i] = static_cast<std::int64_t>(num / sum);
    assigned += out[i];
    const auto r = static_cast<std::int64_t>(num % sum);
    if (r > 0) rem.emplace_back(r, i);
  }
  std::stable_sort(rem.begin(), rem.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t j = 0; assigned < total; ++j) {
    ++out[rem[j].second];
    ++assigned;
  }
  return out;
}

std::int64_t ByteQuantizer::take(double bytes) {
  const double x = carry_ + bytes;
  const double whole = std::floor(x + 1e-9);
  carry_ = std::max(0.0, x - whole);
  return static_cast<std::int64_t>(whole);
}

NetSim::NetSim(const Topology& topology, std::vector<FlowEndpoints> flows,
               double dt_s, double bw_max_bps)
    : topology_(&topology),
      flows_(std::move(flows)),
      dt_s_(dt_s),
      bw_max_bps_(bw_max_bps) {
  if (!(dt_s_ > 0.0)) throw ConfigError("tick length must be positive");
  if (!(bw_max_bps_ > 0.0)) throw ConfigError("bw_max must be positive");
  const int n_ports = topology.num_ports();
  const int n_hosts = topology.num_hosts();
  ports_.resize(n_ports);
  queue_.assign(n_ports, 0);
  limit_bps_.assign(n_hosts, bw_max_bps_);
  budget_.resize(n_hosts);
  host_flows_.resize(n_hosts);

  for (const Link& l : topology.links()) {
    if (!(l.capacity_bps > 0.0) || l.q_max_bytes <= 0) {
      throw ConfigError("link capacity and q_max must be positive");
    }
    if (l.ecn_threshold_bytes &&
        (*l.ecn_threshold_bytes <= 0 || *l.ecn_threshold_bytes > l.q_max_bytes)) {
      throw ConfigError("ECN threshold must lie in (0, q_max]");
    }
  }

  std::vector<std::set<int>> succ(n_ports);
  std::vector<int> indeg(n_ports, 0);
  for (int f = 0; f < num_flows(); ++f) {
    const auto& ep = flows_[f];
    routes_.push_back(topology.route(ep.src, ep.dst));
    host_flows_.at(ep.src.value).push_back(f);
    const auto& r = routes_.back();
    user_slot_.emplace_back();
    for (int h = 0; h < static_cast<int>(r.size()); ++h) {
      PortState& ps = ports_[r[h].value];
      user_slot_.back().push_back(static_cast<int>(ps.users.size()));
      ps.users.push_back({f, h});
      ps.backlog.push_back(0);
      ps.arrivals.push_back(0);
      if (h + 1 < static_cast<int>(r.size()) &&
          succ[r[h].value].insert(r[h + 1].value).second) {
        ++indeg[r[h + 1].value];
      }
    }
  }

  // Kahn's algorithm; ties by ascending port id keep the order stable.
  std::priority_queue<int, std::vector<int>, std::greater<>> ready;
  for (int p = 0; p < n_ports; ++p) {
    if (indeg[p] == 0) ready.push(p);
  }
  while (!ready.empty()) {
    const int p = ready.top();
    ready.pop();
    order_.push_back(p);
    for (int q : succ[p]) {
      if (--indeg[q] == 0) ready.push(q);
    }
  }
  if (static_cast<int>(order_.size()) != n_ports) {
    throw StateError("flow routes form a forwarding cycle");
  }
}

void NetSim::set_rate_limit(HostId host, double rate_bps) {
  if (host.value < 0 || host.value >= topology_->num_hosts()) {
    throw LookupError("set_rate_limit: unknown host");
  }
  if (!(rate_bps > 0.0)) {
    throw ArgumentError("rate limit must be positive");
  }
  if (rate_bps > bw_max_bps_ * (1.0 + 1e-12)) {
    throw ArgumentError("rate limit exceeds bw_max");
  }
  limit_bps_[host.value] = rate_bps;
}

void NetSim::remove_rate_limit(HostId host) {
  if (host.value < 0 || host.value >= topology_->num_hosts()) {
    throw LookupError("remove_rate_limit: unknown host");
  }
  limit_bps_[host.value] = kUnlimited;
}

double NetSim::rate_limit(HostId host) const {
  return limit_bps_.at(host.value);
}

std::vector<std::int64_t> NetSim::admit(std::span<const std::int64_t> desired) {
  if (static_cast<int>(desired.size()) != num_flows()) {
    throw ArgumentError("admit: one entry per flow expected");
  }
  std::vector<std::int64_t> out(desired.begin(), desired.end());
  std::vector<std::int64_t> want;
  for (int h = 0; h < topology_->num_hosts(); ++h) {
    if (std::isinf(limit_bps_[h])) continue;
    const std::int64_t budget = budget_[h].take(limit_bps_[h] * dt_s_ / 8.0);
    const auto& fl = host_flows_[h];
    want.clear();
    std::int64_t total = 0;
    for (int f : fl) {
      want.push_back(desired[f]);
      total += desired[f];
    }
    if (total <= budget) continue;
    const auto share = proportional_split(budget, want);
    for (std::size_t i = 0; i < fl.size(); ++i) out[fl[i]] = share[i];
  }
  return out;
}

TickReport NetSim::advance(std::span<const std::int64_t> offers) {
  TickReport r;
  advance(offers, r);
  return r;
}

void NetSim::advance(std::span<const std::int64_t> offers, TickReport& out) {
  const int n_ports = topology_->num_ports();
  const int n_hosts = topology_->num_hosts();
  const int n_flows = num_flows();
  if (static_cast<int>(offers.size()) != n_flows) {
    throw StateError("advance: offer vector does not match flow count");
  }

  out.flow_offered.assign(offers.begin(), offers.end());
  out.flow_delivered.assign(n_flows, 0);
  out.flow_dropped.assign(n_flows, 0);
  out.flow_marked.assign(n_flows, 0);
  out.port_queue_before = queue_;
  out.port_queue.assign(n_ports, 0);
  out.port_arrivals.assign(n_ports, 0);
  out.port_tx.assign(n_ports, 0);
  out.port_dropped.assign(n_ports, 0);
  out.port_marked.assign(n_ports, 0);
  out.port_sources.assign(static_cast<std::size_t>(n_ports) * n_hosts, 0);

  for (auto& ps : ports_) std::fill(ps.arrivals.begin(), ps.arrivals.end(), 0);
  for (int f = 0; f < n_flows; ++f) {
    if (offers[f] < 0) throw StateError("advance: negative offer");
    if (routes_[f].empty()) throw StateError("advance: flow has no route");
    ports_[routes_[f][0].value].arrivals[user_slot_[f][0]] = offers[f];
  }

  for (int p : order_) {
    PortState& ps = ports_[p];
    const Link& link = topology_->link_of(PortId{p});
    const std::int64_t service = ps.service.take(link.capacity_bps * dt_s_ / 8.0);
    const std::size_t n = ps.users.size();
    if (n == 0) continue;

    const std::int64_t q = queue_[p];
    const std::int64_t arrivals =
        std::accumulate(ps.arrivals.begin(), ps.arrivals.end(), std::int64_t{0});
    const std::int64_t sent = std::min(service, q + arrivals);

    // FIFO: the standing backlog leaves before this tick's arrivals.
    tx_.assign(n, 0);
    rest_.assign(ps.arrivals.begin(), ps.arrivals.end());
    if (sent <= q) {
      tx_ = proportional_split(sent, ps.backlog);
    } else {
      const auto fresh = proportional_split(sent - q, ps.arrivals);
      for (std::size_t u = 0; u < n; ++u) {
        tx_[u] = ps.backlog[u] + fresh[u];
        rest_[u] -= fresh[u];
      }
    }
    const QueueUpdate qu = next_queue(q, arrivals, sent, link.q_max_bytes);
    drop_ = proportional_split(qu.dropped, rest_);
    const bool marked = link.ecn_threshold_bytes &&
                        qu.queue > *link.ecn_threshold_bytes;

    for (std::size_t u = 0; u < n; ++u) {
      const auto [f, hop] = ps.users[u];
      const bool present = ps.backlog[u] > 0 || ps.arrivals[u] > 0;
      ps.backlog[u] += ps.arrivals[u] - tx_[u] - drop_[u];
      out.flow_dropped[f] += drop_[u];
      if (marked && present) out.flow_marked[f] = 1;
      if (ps.arrivals[u] > 0 || tx_[u] > 0) {
        out.port_sources[static_cast<std::size_t>(p) * n_hosts +
                         flows_[f].src.value] = 1;
      }
      if (tx_[u] == 0) continue;
      const auto& route = routes_[f];
      if (hop + 1 < static_cast<int>(route.size())) {
        ports_[route[hop + 1].value].arrivals[user_slot_[f][hop + 1]] += tx_[u];
      } else {
        out.flow_delivered[f] += tx_[u];
      }
    }
    queue_[p] = qu.queue;
    out.port_queue[p] = qu.queue;
    out.port_arrivals[p] = arrivals;
    out.port_tx[p] = sent;
    out.port_dropped[p] = qu.dropped;
    out.port_marked[p] = marked ? 1 : 0;
  }
  ++ticks_;
}

TickWindow::TickWindow(int num_ports, int num_hosts, int num_flows)
    : num_hosts_(num_hosts),
      port_tx_(num_ports, 0),
      port_dropped_(num_ports, 0),
      port_queue_sum_(num_ports, 0.0),
      port_queue_max_(num_ports, 0),
      port_sources_(static_cast<std::size_t>(num_ports) * num_hosts, 0),
      flow_delivered_(num_flows, 0),
      flow_dropped_(num_flows, 0),
      flow_marked_ticks_(num_flows, 0) {}

void TickWindow::add(const TickReport& r) {
  if (r.port_tx.size() != port_tx_.size() ||
      r.flow_delivered.size() != flow_delivered_.size()) {
    throw ArgumentError("TickWindow: report shape mismatch");
  }
  for (std::size_t p = 0; p < port_tx_.size(); ++p) {
    port_tx_[p] += r.port_tx[p];
    port_dropped_[p] += r.port_dropped[p];
    port_queue_sum_[p] += static_cast<double>(r.port_queue[p]);
    port_queue_max_[p] = std::max(port_queue_max_[p], r.port_queue[p]);
  }
  for (std::size_t i = 0; i < port_sources_.size(); ++i) {
    port_sources_[i] |= r.port_sources[i];
  }
  for (std::size_t f = 0; f < flow_delivered_.size(); ++f) {
    flow_delivered_[f] += r.flow_delivered[f];
    flow_dropped_[f] += r.flow_dropped[f];
    flow_marked_ticks_[f] += r.flow_marked[f];
  }
  ++ticks_;
}

void TickWindow::clear() {
  ticks_ = 0;
  std::fill(port_tx_.begin(), port_tx_.end(), 0);
  std::fill(port_dropped_.begin(), port_dropped_.end(), 0);
  std::fill(port_queue_sum_.begin(), port_queue_sum_.end(), 0.0);
  std::fill(port_queue_max_.begin(), port_queue_max_.end(), 0);
  std::fill(port_sources_.begin(), port_sources_.end(), 0);
  std::fill(flow_delivered_.begin(), flow_delivered_.end(), 0);
  std::fill(flow_dropped_.begin(), flow_dropped_.end(), 0);
  std::fill(flow_marked_ticks_.begin(), flow_marked_ticks_.end(), 0);
}

double measure_utilization(const TickWindow& window, const Topology& topology,
                           PortId port, double dt_s) {
  if (window.ticks() <= 0 || !(dt_s > 0.0)) {
    throw ArgumentError("measure_utilization: empty window");
  }
  const double capacity_bytes = topology.link_of(port).capacity_bps *
                                dt_s * window.ticks() / 8.0;
  const double u =
      static_cast<double>(window.port_tx().at(port.value)) / capacity_bytes;
  return std::clamp(u, 0.0, 1.0);
}

double measure_utilization(std::span<const TickReport> window,
                           const Topology& topology, PortId port, double dt_s) {
  if (window.empty()) throw ArgumentError("measure_utilization: empty window");
  TickWindow w(static_cast<int>(window.front().port_tx.size()),
               topology.num_hosts(),
               static_cast<int>(window.front().flow_delivered.size()));
  for (const auto& r : window) w.add(r);
  return measure_utilization(w, topology, port, dt_s);
}

}  // namespace ccgym
