#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace ccgym {

template <typename Tag>
struct StrongIndex {
  int value = -1;

  constexpr StrongIndex() = default;
  constexpr explicit StrongIndex(int v) : value(v) {}
  constexpr auto operator<=>(const StrongIndex&) const = default;
};

struct HostTag {};
struct SwitchTag {};
struct PortTag {};
struct LinkTag {};

/// Dense host index; host order fixes the action vector and flag columns.
using HostId = StrongIndex<HostTag>;
using SwitchId = StrongIndex<SwitchTag>;
/// Global port index. A port is the egress side of one link endpoint.
using PortId = StrongIndex<PortTag>;
using LinkId = StrongIndex<LinkTag>;

enum class NodeKind { kHost, kSwitch };

struct NodeRef {
  NodeKind kind = NodeKind::kHost;
  int index = -1;  // HostId or SwitchId value

  auto operator<=>(const NodeRef&) const = default;
};

struct Port {
  NodeRef node;
  int local = 0;  // ascending per node in creation order
  LinkId link;
  PortId peer;    // ingress of this port's traffic is the peer's node
};

struct Link {
  PortId a;
  PortId b;
  double capacity_bps = 0.0;
  double prop_delay_s = 0.0;
  std::int64_t q_max_bytes = 0;
  std::optional<std::int64_t> ecn_threshold_bytes;
};

/// Parameters shared by every link a builder creates.
struct LinkParams {
  double capacity_bps = 10e6;
  double prop_delay_s = 0.5e-3;
  std::int64_t q_max_bytes = 150'000;
  std::optional<std::int64_t> ecn_threshold_bytes = 30'000;
};

enum class TopologyKind { kDumbbell, kFatTree };

/// Immutable after construction. Routes for every ordered host pair are
/// precomputed; monitored ports are all switch ports, switches in
/// construction order and local ports ascending.
class Topology {
 public:
  TopologyKind kind() const { return kind_; }
  /// Dumbbell host count or fat-tree arity k.
  int size_param() const { return size_param_; }

  int num_hosts() const { return static_cast<int>(host_ports_.size()); }
  int num_switches() const { return static_cast<int>(switch_ports_.size()); }
  int num_ports() const { return static_cast<int>(ports_.size()); }
  int num_links() const { return static_cast<int>(links_.size()); }

  const Port& port(PortId p) const;
  const Link& link(LinkId l) const;
  const Link& link_of(PortId p) const { return link(port(p).link); }
  const std::vector<Port>& ports() const { return ports_; }
  const std::vector<Link>& links() const { return links_; }

  /// The single access port of a host.
  PortId host_port(HostId h) const;
  const std::vector<PortId>& switch_ports(SwitchId s) const;
  const std::vector<PortId>& monitored_ports() const { return monitored_; }
  /// Row of `p` in the monitored list, or -1.
  int monitored_row(PortId p) const;
  /// The node a port's egress traffic arrives at.
  NodeRef far_end(PortId p) const { return port(ports_.at(p.value).peer).node; }

  std::string node_name(NodeRef n) const;
  std::string port_name(PortId p) const;

  /// Precomputed egress-port path; throws LookupError for unknown hosts or
  /// src == dst.
  const std::vector<PortId>& route(HostId src, HostId dst) const;

 private:
  friend class TopologyBuilder;

  TopologyKind kind_ = TopologyKind::kDumbbell;
  int size_param_ = 0;
  std::vector<Port> ports_;
  std::vector<Link> links_;
  std::vector<PortId> host_ports_;
  std::vector<std::vector<PortId>> switch_ports_;
  std::vector<PortId> monitored_;
  std::vector<int> monitored_row_;
  std::vector<std::vector<PortId>> routes_;  // src * n + dst
};

/// Dumbbell: n_hosts/2 hosts on each of two switches joined by one trunk.
/// Hosts 0..n/2-1 sit on the left switch.
Topology build_dumbbell(int n_hosts, double bw_max_bps,
                        const LinkParams& params = {});

/// k-ary fat-tree. Switch order: edge switches (pod-major), aggregation
/// switches (pod-major), core switches.
Topology build_fattree(int k, double bw_max_bps,
                       const LinkParams& params = {});

/// Shortest-path route from src to dst over the topology graph. Where several
/// next hops are on a shortest path, the one at position
/// (src*31 + dst) mod count in ascending local-port order is taken.
std::vector<PortId> compute_routes(const Topology& topology, HostId src,
                                   HostId dst);

}  // namespace ccgym
