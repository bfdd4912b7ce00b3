#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

namespace smpc {

using NodeId = std::string;
using LinkId = std::string;
using PhaseId = std::string;
using SubnetId = std::string;

struct Node {
  NodeId id;
  bool internal = true;  // internal signalized junction vs external source/sink
  int index = 0;         // scenario key; external nodes conventionally 0
};

struct RoadLink {
  LinkId id;
  NodeId upstream;    // sigma(z)
  NodeId downstream;  // tau(z)
  double saturation_flow = 0.0;  // vehicles/second under green
  double capacity = 0.0;         // max vehicles the link can hold
  int lanes = 1;
  double initial_count = 0.0;
  double outflow_cap = 0.0;          // per-step cap, destination links only
  std::vector<LinkId> turns_to;      // downstream neighbors N_z^- in movement order
};

struct Phase {
  PhaseId id;
  NodeId junction;
  std::vector<LinkId> granted_links;
  double max_split = 0.0;  // seconds
};

struct Junction {
  NodeId id;
  std::vector<PhaseId> phases;
  double lost_time = 0.0;
  double cycle_budget = 0.0;  // T - lost_time
};

/// Immutable directed-graph model of the urban network with signal phases and
/// all derived neighbor sets. Safe to share read-only across agent threads.
class Network {
 public:
  double cycle = 0.0;  // common cycle / control interval T, seconds

  const std::vector<Node>& nodes() const { return nodes_; }
  const std::vector<RoadLink>& links() const { return links_; }
  const std::vector<Junction>& junctions() const { return junctions_; }
  const std::vector<Phase>& phases() const { return phases_; }

  const Node& node(const NodeId& id) const;
  const RoadLink& link(const LinkId& id) const;
  const Junction& junction(const NodeId& id) const;
  const Phase& phase(const PhaseId& id) const;
  bool internal(const NodeId& id) const { return node(id).internal; }

  /// N_z^+ : links whose downstream traffic can enter z, sorted by id.
  const std::vector<LinkId>& upstream_neighbors(const LinkId& z) const;
  /// N_z^- : downstream neighbors in the link's movement order.
  const std::vector<LinkId>& downstream_neighbors(const LinkId& z) const;
  const std::vector<LinkId>& in_links(const NodeId& v) const;
  const std::vector<LinkId>& out_links(const NodeId& v) const;
  /// Phases of tau(z) granting right of way to z, sorted by id.
  const std::vector<PhaseId>& phases_granting(const LinkId& z) const;

  const std::vector<LinkId>& source_links() const { return source_links_; }
  const std::vector<LinkId>& destination_links() const { return destination_links_; }

  /// All links sharing the (upstream, downstream) node pair, in id order.
  const std::vector<LinkId>& road(const NodeId& from, const NodeId& to) const;

  friend Network build_network(double cycle, std::vector<Node> nodes,
                               std::vector<RoadLink> links, std::vector<Junction> junctions,
                               std::vector<Phase> phases);

 private:
  std::vector<Node> nodes_;
  std::vector<RoadLink> links_;
  std::vector<Junction> junctions_;
  std::vector<Phase> phases_;
  std::map<NodeId, int> node_index_;
  std::map<LinkId, int> link_index_;
  std::map<NodeId, int> junction_index_;
  std::map<PhaseId, int> phase_index_;
  std::map<LinkId, std::vector<LinkId>> upstream_;
  std::map<NodeId, std::vector<LinkId>> in_links_;
  std::map<NodeId, std::vector<LinkId>> out_links_;
  std::map<LinkId, std::vector<PhaseId>> phases_granting_;
  std::map<std::pair<NodeId, NodeId>, std::vector<LinkId>> roads_;
  std::vector<LinkId> source_links_;
  std::vector<LinkId> destination_links_;
};

/// Validates the pieces and derives every neighbor set. Throws on dangling
/// references, links between two external nodes, junctions without phases or
/// any other invariant violation.
Network build_network(double cycle, std::vector<Node> nodes, std::vector<RoadLink> links,
                      std::vector<Junction> junctions, std::vector<Phase> phases);

struct Subnetwork {
  SubnetId id;
  std::vector<NodeId> junctions;  // sorted
};

/// Partition of the junction set into subnetworks with the derived boundary
/// link sets and the agent neighbor graph.
struct Partition {
  std::vector<Subnetwork> subnetworks;
  /// boundary[{i,j}] = links from subnetwork i to subnetwork j (sorted ids).
  std::map<std::pair<int, int>, std::vector<LinkId>> boundary;
  /// neighbors[i] = indices of subnetworks sharing a boundary link with i.
  std::vector<std::vector<int>> neighbors;
  /// internal links of each subnetwork (both endpoints inside or external).
  std::vector<std::vector<LinkId>> internal_links;
  /// source links of each subnetwork (external upstream, internal junction).
  std::vector<std::vector<LinkId>> source_links;
  bool connected = true;

  int subnet_of_junction(const NodeId& v) const;
  /// Owner of the expected-state variables of z: the subnetwork of sigma(z),
  /// or of tau(z) when sigma(z) is external.
  int state_owner(const Network& net, const LinkId& z) const;
  /// Owner of the downstream-flow variables of z: the subnetwork of tau(z),
  /// or of sigma(z) when tau(z) is external.
  int flow_owner(const Network& net, const LinkId& z) const;

  const std::vector<LinkId>& boundary_links(int i, int j) const;

 private:
  friend Partition partition_network(const Network& net,
                                     const std::map<NodeId, SubnetId>& assignment);
  std::map<NodeId, int> junction_subnet_;
};

/// Derives boundary and neighbor sets from a junction->subnetwork assignment.
/// Every internal junction must be assigned exactly once.
Partition partition_network(const Network& net, const std::map<NodeId, SubnetId>& assignment);

/// One subnetwork per junction, subnetwork ids equal to junction ids.
Partition per_junction_partition(const Network& net);
/// All junctions in a single subnetwork (the centralized problem).
Partition single_partition(const Network& net);

/// Loads/saves the versioned JSON document {cycle_seconds, nodes, links,
/// junctions, phases, partition?}. A partition block is optional.
struct NetworkFile {
  Network network;
  std::map<NodeId, SubnetId> partition;  // empty if none in the file
};
NetworkFile load_network_file(const std::string& path);
NetworkFile parse_network_json(const std::string& text);
std::string network_to_json(const Network& net, const std::map<NodeId, SubnetId>& partition);

}  // namespace smpc
