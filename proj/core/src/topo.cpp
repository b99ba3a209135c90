#include "ccgym/topo.hpp"

#include <deque>
#include <string>

#include "ccgym/error.hpp"

namespace ccgym {

class TopologyBuilder {
 public:
  TopologyBuilder(TopologyKind kind, int size_param) {
    topo_.kind_ = kind;
    topo_.size_param_ = size_param;
  }

  NodeRef add_host() {
    topo_.host_ports_.emplace_back();  // filled by connect()
    return {NodeKind::kHost, topo_.num_hosts() - 1};
  }

  NodeRef add_switch() {
    topo_.switch_ports_.emplace_back();
    return {NodeKind::kSwitch, topo_.num_switches() - 1};
  }

  void connect(NodeRef a, NodeRef b, const LinkParams& params) {
    const LinkId link{topo_.num_links()};
    const PortId pa{topo_.num_ports()};
    const PortId pb{topo_.num_ports() + 1};
    topo_.ports_.push_back(Port{a, next_local(a), link, pb});
    attach(a, pa);
    topo_.ports_.push_back(Port{b, next_local(b), link, pa});
    attach(b, pb);
    topo_.links_.push_back(Link{pa, pb, params.capacity_bps,
                                params.prop_delay_s, params.q_max_bytes,
                                params.ecn_threshold_bytes});
  }

  Topology finish() && {
    topo_.monitored_row_.assign(topo_.ports_.size(), -1);
    for (const auto& ports : topo_.switch_ports_) {
      for (PortId p : ports) {
        topo_.monitored_row_[p.value] =
            static_cast<int>(topo_.monitored_.size());
        topo_.monitored_.push_back(p);
      }
    }
    const int n = topo_.num_hosts();
    topo_.routes_.assign(static_cast<std::size_t>(n) * n, {});
    for (int s = 0; s < n; ++s) {
      for (int d = 0; d < n; ++d) {
        if (s != d) {
          topo_.routes_[s * n + d] =
              compute_routes(topo_, HostId{s}, HostId{d});
        }
      }
    }
    return std::move(topo_);
  }

 private:
  int next_local(NodeRef n) {
    if (n.kind == NodeKind::kHost) {
      if (topo_.host_ports_[n.index].value >= 0) {
        throw ConfigError("host already has an access link");
      }
      return 0;
    }
    return static_cast<int>(topo_.switch_ports_[n.index].size());
  }

  void attach(NodeRef n, PortId p) {
    if (n.kind == NodeKind::kHost) {
      topo_.host_ports_[n.index] = p;
    } else {
      topo_.switch_ports_[n.index].push_back(p);
    }
  }

  Topology topo_;
};

const Port& Topology::port(PortId p) const {
  if (p.value < 0 || p.value >= num_ports()) {
    throw LookupError("unknown port " + std::to_string(p.value));
  }
  return ports_[p.value];
}

const Link& Topology::link(LinkId l) const {
  if (l.value < 0 || l.value >= num_links()) {
    throw LookupError("unknown link " + std::to_string(l.value));
  }
  return links_[l.value];
}

PortId Topology::host_port(HostId h) const {
  if (h.value < 0 || h.value >= num_hosts()) {
    throw LookupError("unknown host " + std::to_string(h.value));
  }
  return host_ports_[h.value];
}

const std::vector<PortId>& Topology::switch_ports(SwitchId s) const {
  if (s.value < 0 || s.value >= num_switches()) {
    throw LookupError("unknown switch " + std::to_string(s.value));
  }
  return switch_ports_[s.value];
}

int Topology::monitored_row(PortId p) const {
  port(p);  // bounds check
  return monitored_row_[p.value];
}

std::string Topology::node_name(NodeRef n) const {
  return (n.kind == NodeKind::kHost ? "h" : "s") + std::to_string(n.index);
}

std::string Topology::port_name(PortId p) const {
  const Port& pt = port(p);
  return node_name(pt.node) + "-eth" + std::to_string(pt.local);
}

const std::vector<PortId>& Topology::route(HostId src, HostId dst) const {
  const int n = num_hosts();
  if (src.value < 0 || src.value >= n || dst.value < 0 || dst.value >= n) {
    throw LookupError("route lookup for unknown host");
  }
  if (src == dst) throw LookupError("route lookup with src == dst");
  return routes_[src.value * n + dst.value];
}

Topology build_dumbbell(int n_hosts, double bw_max_bps,
                        const LinkParams& params) {
  if (n_hosts < 2 || n_hosts % 2 != 0) {
    throw ConfigError("dumbbell needs a positive even host count, got " +
                      std::to_string(n_hosts));
  }
  if (!(bw_max_bps > 0.0)) throw ConfigError("bw_max must be positive");
  LinkParams lp = params;
  lp.capacity_bps = bw_max_bps;

  TopologyBuilder b(TopologyKind::kDumbbell, n_hosts);
  std::vector<NodeRef> hosts;
  for (int i = 0; i < n_hosts; ++i) hosts.push_back(b.add_host());
  const NodeRef left = b.add_switch();
  const NodeRef right = b.add_switch();
  // Switch-local port order: host-facing ports first, then the trunk.
  for (int i = 0; i < n_hosts / 2; ++i) b.connect(hosts[i], left, lp);
  for (int i = n_hosts / 2; i < n_hosts; ++i) b.connect(hosts[i], right, lp);
  b.connect(left, right, lp);
  return std::move(b).finish();
}

Topology build_fattree(int k, double bw_max_bps, const LinkParams& params) {
  if (k < 2 || k % 2 != 0) {
    throw ConfigError("fat-tree arity must be even and >= 2, got " +
                      std::to_string(k));
  }
  if (!(bw_max_bps > 0.0)) throw ConfigError("bw_max must be positive");
  LinkParams lp = params;
  lp.capacity_bps = bw_max_bps;

  const int half = k / 2;
  TopologyBuilder b(TopologyKind::kFatTree, k);
  std::vector<NodeRef> hosts;
  for (int i = 0; i < k * k * k / 4; ++i) hosts.push_back(b.add_host());
  std::vector<NodeRef> edge, agg, core;
  for (int i = 0; i < k * half; ++i) edge.push_back(b.add_switch());
  for (int i = 0; i < k * half; ++i) agg.push_back(b.add_switch());
  for (int i = 0; i < half * half; ++i) core.push_back(b.add_switch());

  // Edge e = pod*half + j serves hosts e*half .. e*half+half-1.
  for (int e = 0; e < k * half; ++e) {
    for (int h = 0; h < half; ++h) b.connect(hosts[e * half + h], edge[e], lp);
  }
  for (int pod = 0; pod < k; ++pod) {
    for (int j = 0; j < half; ++j) {
      for (int a = 0; a < half; ++a) {
        b.connect(edge[pod * half + j], agg[pod * half + a], lp);
      }
    }
  }
  // Aggregation switch a of each pod uplinks to cores a*half .. a*half+half-1.
  for (int pod = 0; pod < k; ++pod) {
    for (int a = 0; a < half; ++a) {
      for (int c = 0; c < half; ++c) {
        b.connect(agg[pod * half + a], core[a * half + c], lp);
      }
    }
  }
  return std::move(b).finish();
}

namespace {

int flat_node(const Topology& t, NodeRef n) {
  return n.kind == NodeKind::kHost ? n.index : t.num_hosts() + n.index;
}

}  // namespace

std::vector<PortId> compute_routes(const Topology& topology, HostId src,
                                   HostId dst) {
  const int n_hosts = topology.num_hosts();
  if (src.value < 0 || src.value >= n_hosts || dst.value < 0 ||
      dst.value >= n_hosts) {
    throw LookupError("compute_routes: unknown host");
  }
  if (src == dst) throw LookupError("compute_routes: src == dst");

  const int n_nodes = n_hosts + topology.num_switches();
  auto ports_of = [&](int flat) -> std::vector<PortId> {
    if (flat < n_hosts) return {topology.host_port(HostId{flat})};
    return topology.switch_ports(SwitchId{flat - n_hosts});
  };

  // Hop distance to dst over the undirected graph.
  std::vector<int> dist(n_nodes, -1);
  std::deque<int> frontier;
  const int target = dst.value;
  dist[target] = 0;
  frontier.push_back(target);
  while (!frontier.empty()) {
    const int u = frontier.front();
    frontier.pop_front();
    for (PortId p : ports_of(u)) {
      const int v = flat_node(topology, topology.far_end(p));
      if (dist[v] < 0) {
        dist[v] = dist[u] + 1;
        frontier.push_back(v);
      }
    }
  }
  if (dist[src.value] < 0) throw LookupError("no route between hosts");

  const int hash = src.value * 31 + dst.value;
  std::vector<PortId> path;
  int at = src.value;
  while (at != target) {
    std::vector<PortId> next;
    for (PortId p : ports_of(at)) {
      const NodeRef far = topology.far_end(p);
      // Hosts other than dst never forward.
      if (far.kind == NodeKind::kHost && far.index != target) continue;
      if (dist[flat_node(topology, far)] == dist[at] - 1) next.push_back(p);
    }
    const PortId chosen = next[hash % static_cast<int>(next.size())];
    path.push_back(chosen);
    at = flat_node(topology, topology.far_end(chosen));
  }
  return path;
}

}  // namespace ccgym
