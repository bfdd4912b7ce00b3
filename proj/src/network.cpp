#include "smpc/network.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace smpc {

namespace {
template <typename T>
const T& at_or_throw(const std::map<std::string, int>& index, const std::vector<T>& v,
                     const std::string& id, const char* what) {
  auto it = index.find(id);
  if (it == index.end()) throw std::out_of_range(std::string("unknown ") + what + " " + id);
  return v[it->second];
}
}  // namespace

const Node& Network::node(const NodeId& id) const {
  return at_or_throw(node_index_, nodes_, id, "node");
}
const RoadLink& Network::link(const LinkId& id) const {
  return at_or_throw(link_index_, links_, id, "link");
}
const Junction& Network::junction(const NodeId& id) const {
  return at_or_throw(junction_index_, junctions_, id, "junction");
}
const Phase& Network::phase(const PhaseId& id) const {
  return at_or_throw(phase_index_, phases_, id, "phase");
}

const std::vector<LinkId>& Network::upstream_neighbors(const LinkId& z) const {
  return upstream_.at(link(z).id);
}
const std::vector<LinkId>& Network::downstream_neighbors(const LinkId& z) const {
  return link(z).turns_to;
}
const std::vector<LinkId>& Network::in_links(const NodeId& v) const {
  return in_links_.at(node(v).id);
}
const std::vector<LinkId>& Network::out_links(const NodeId& v) const {
  return out_links_.at(node(v).id);
}
const std::vector<PhaseId>& Network::phases_granting(const LinkId& z) const {
  return phases_granting_.at(link(z).id);
}
const std::vector<LinkId>& Network::road(const NodeId& from, const NodeId& to) const {
  auto it = roads_.find({from, to});
  if (it == roads_.end()) throw std::out_of_range("no road " + from + "->" + to);
  return it->second;
}

Network build_network(double cycle, std::vector<Node> nodes, std::vector<RoadLink> links,
                      std::vector<Junction> junctions, std::vector<Phase> phases) {
  if (cycle <= 0) throw std::invalid_argument("cycle must be positive");
  Network net;
  net.cycle = cycle;

  std::sort(nodes.begin(), nodes.end(), [](auto& a, auto& b) { return a.id < b.id; });
  std::sort(links.begin(), links.end(), [](auto& a, auto& b) { return a.id < b.id; });
  std::sort(junctions.begin(), junctions.end(), [](auto& a, auto& b) { return a.id < b.id; });
  std::sort(phases.begin(), phases.end(), [](auto& a, auto& b) { return a.id < b.id; });
  net.nodes_ = std::move(nodes);
  net.links_ = std::move(links);
  net.junctions_ = std::move(junctions);
  net.phases_ = std::move(phases);

  for (int i = 0; i < static_cast<int>(net.nodes_.size()); ++i) {
    if (!net.node_index_.emplace(net.nodes_[i].id, i).second)
      throw std::invalid_argument("duplicate node id " + net.nodes_[i].id);
    net.in_links_[net.nodes_[i].id];
    net.out_links_[net.nodes_[i].id];
  }
  for (int i = 0; i < static_cast<int>(net.links_.size()); ++i)
    if (!net.link_index_.emplace(net.links_[i].id, i).second)
      throw std::invalid_argument("duplicate link id " + net.links_[i].id);
  for (int i = 0; i < static_cast<int>(net.junctions_.size()); ++i)
    if (!net.junction_index_.emplace(net.junctions_[i].id, i).second)
      throw std::invalid_argument("duplicate junction id " + net.junctions_[i].id);
  for (int i = 0; i < static_cast<int>(net.phases_.size()); ++i)
    if (!net.phase_index_.emplace(net.phases_[i].id, i).second)
      throw std::invalid_argument("duplicate phase id " + net.phases_[i].id);

  for (const auto& z : net.links_) {
    if (!net.node_index_.count(z.upstream) || !net.node_index_.count(z.downstream))
      throw std::invalid_argument("link " + z.id + " references an unknown node");
    if (z.upstream == z.downstream)
      throw std::invalid_argument("link " + z.id + " has equal endpoints");
    const bool up_internal = net.node(z.upstream).internal;
    const bool down_internal = net.node(z.downstream).internal;
    if (!up_internal && !down_internal)
      throw std::invalid_argument("link " + z.id + " connects two external nodes");
    if (z.saturation_flow <= 0)
      throw std::invalid_argument("link " + z.id + ": saturation flow must be positive");
    if (z.capacity <= 0)
      throw std::invalid_argument("link " + z.id + ": capacity must be positive");
    if (z.initial_count < 0 || z.initial_count > z.capacity)
      throw std::invalid_argument("link " + z.id + ": initial count outside [0, capacity]");
    net.in_links_[z.downstream].push_back(z.id);
    net.out_links_[z.upstream].push_back(z.id);
    net.roads_[{z.upstream, z.downstream}].push_back(z.id);
    if (up_internal && net.junction_index_.count(z.upstream) == 0)
      throw std::invalid_argument("internal node " + z.upstream + " has no junction entry");
    if (down_internal && net.junction_index_.count(z.downstream) == 0)
      throw std::invalid_argument("internal node " + z.downstream + " has no junction entry");
    if (!up_internal) net.source_links_.push_back(z.id);
    if (!down_internal) net.destination_links_.push_back(z.id);
  }

  // Turning structure: N_z^- from turns_to, N_z^+ by inversion.
  for (const auto& z : net.links_) {
    net.upstream_[z.id];
    net.phases_granting_[z.id];
  }
  for (const auto& z : net.links_) {
    const bool down_internal = net.node(z.downstream).internal;
    if (!down_internal && !z.turns_to.empty())
      throw std::invalid_argument("destination link " + z.id + " cannot have turns_to");
    if (down_internal && z.turns_to.empty())
      throw std::invalid_argument("link " + z.id + " needs downstream neighbors");
    std::set<LinkId> seen;
    for (const auto& w : z.turns_to) {
      if (!net.link_index_.count(w))
        throw std::invalid_argument("link " + z.id + " turns to unknown link " + w);
      if (net.link(w).upstream != z.downstream)
        throw std::invalid_argument("link " + z.id + " turns to " + w +
                                    " which does not leave " + z.downstream);
      if (!seen.insert(w).second)
        throw std::invalid_argument("link " + z.id + " lists " + w + " twice");
      net.upstream_[w].push_back(z.id);
    }
  }
  for (auto& [id, ups] : net.upstream_) std::sort(ups.begin(), ups.end());

  for (const auto& j : net.junctions_) {
    if (!net.node_index_.count(j.id) || !net.node(j.id).internal)
      throw std::invalid_argument("junction " + j.id + " is not an internal node");
    if (j.phases.empty()) throw std::invalid_argument("junction " + j.id + " has no phases");
    if (j.lost_time < 0 || j.lost_time >= cycle)
      throw std::invalid_argument("junction " + j.id + ": lost time must lie in [0, T)");
    for (const auto& p : j.phases)
      if (!net.phase_index_.count(p))
        throw std::invalid_argument("junction " + j.id + " lists unknown phase " + p);
  }
  for (auto& j : net.junctions_) j.cycle_budget = cycle - j.lost_time;

  for (const auto& p : net.phases_) {
    if (!net.junction_index_.count(p.junction))
      throw std::invalid_argument("phase " + p.id + " belongs to unknown junction " + p.junction);
    const auto& owner = net.junction(p.junction);
    if (std::find(owner.phases.begin(), owner.phases.end(), p.id) == owner.phases.end())
      throw std::invalid_argument("phase " + p.id + " not listed by junction " + p.junction);
    if (!(p.max_split > 0) || p.max_split > cycle)
      throw std::invalid_argument("phase " + p.id + ": max split must lie in (0, T]");
    for (const auto& z : p.granted_links) {
      if (!net.link_index_.count(z))
        throw std::invalid_argument("phase " + p.id + " grants unknown link " + z);
      if (net.link(z).downstream != p.junction)
        throw std::invalid_argument("phase " + p.id + " grants link " + z +
                                    " not entering " + p.junction);
      net.phases_granting_[z].push_back(p.id);
    }
  }
  for (auto& [id, ps] : net.phases_granting_) std::sort(ps.begin(), ps.end());

  for (const auto& z : net.links_)
    if (net.node(z.downstream).internal && net.phases_granting_.at(z.id).empty())
      throw std::invalid_argument("link " + z.id + " is granted by no phase of " + z.downstream);

  return net;
}

int Partition::subnet_of_junction(const NodeId& v) const {
  auto it = junction_subnet_.find(v);
  if (it == junction_subnet_.end()) throw std::out_of_range("junction " + v + " not partitioned");
  return it->second;
}

int Partition::state_owner(const Network& net, const LinkId& z) const {
  const auto& l = net.link(z);
  return net.internal(l.upstream) ? subnet_of_junction(l.upstream)
                                  : subnet_of_junction(l.downstream);
}

int Partition::flow_owner(const Network& net, const LinkId& z) const {
  const auto& l = net.link(z);
  return net.internal(l.downstream) ? subnet_of_junction(l.downstream)
                                    : subnet_of_junction(l.upstream);
}

const std::vector<LinkId>& Partition::boundary_links(int i, int j) const {
  static const std::vector<LinkId> kEmpty;
  auto it = boundary.find({i, j});
  return it == boundary.end() ? kEmpty : it->second;
}

Partition partition_network(const Network& net, const std::map<NodeId, SubnetId>& assignment) {
  std::map<SubnetId, std::vector<NodeId>> groups;
  for (const auto& [junction, subnet] : assignment) {
    net.junction(junction);  // throws on unknown junction id
    groups[subnet].push_back(junction);
  }
  for (const auto& j : net.junctions())
    if (!assignment.count(j.id))
      throw std::invalid_argument("junction " + j.id + " is not assigned to a subnetwork");

  Partition part;
  for (auto& [id, js] : groups) {
    std::sort(js.begin(), js.end());
    part.subnetworks.push_back({id, js});
  }
  for (int i = 0; i < static_cast<int>(part.subnetworks.size()); ++i)
    for (const auto& v : part.subnetworks[i].junctions) part.junction_subnet_[v] = i;

  const int n = static_cast<int>(part.subnetworks.size());
  part.neighbors.assign(n, {});
  part.internal_links.assign(n, {});
  part.source_links.assign(n, {});
  for (const auto& z : net.links()) {
    const bool up_int = net.internal(z.upstream);
    const bool down_int = net.internal(z.downstream);
    if (up_int && down_int) {
      const int i = part.junction_subnet_.at(z.upstream);
      const int j = part.junction_subnet_.at(z.downstream);
      if (i == j) {
        part.internal_links[i].push_back(z.id);
      } else {
        part.boundary[{i, j}].push_back(z.id);
      }
    } else if (down_int) {
      const int j = part.junction_subnet_.at(z.downstream);
      part.internal_links[j].push_back(z.id);
      part.source_links[j].push_back(z.id);
    } else {
      part.internal_links[part.junction_subnet_.at(z.upstream)].push_back(z.id);
    }
  }
  for (auto& [key, links] : part.boundary) {
    std::sort(links.begin(), links.end());
    const auto [i, j] = key;
    if (std::find(part.neighbors[i].begin(), part.neighbors[i].end(), j) ==
        part.neighbors[i].end()) {
      part.neighbors[i].push_back(j);
      part.neighbors[j].push_back(i);
    }
  }
  for (auto& ns : part.neighbors) std::sort(ns.begin(), ns.end());

  // Connectivity of the agent graph (single component).
  if (n > 0) {
    std::vector<bool> seen(n, false);
    std::vector<int> stack{0};
    seen[0] = true;
    while (!stack.empty()) {
      const int i = stack.back();
      stack.pop_back();
      for (int j : part.neighbors[i])
        if (!seen[j]) {
          seen[j] = true;
          stack.push_back(j);
        }
    }
    part.connected = std::all_of(seen.begin(), seen.end(), [](bool b) { return b; });
  }
  return part;
}

Partition per_junction_partition(const Network& net) {
  std::map<NodeId, SubnetId> assignment;
  for (const auto& j : net.junctions()) assignment[j.id] = j.id;
  return partition_network(net, assignment);
}

Partition single_partition(const Network& net) {
  std::map<NodeId, SubnetId> assignment;
  for (const auto& j : net.junctions()) assignment[j.id] = "S1";
  return partition_network(net, assignment);
}

using nlohmann::json;

NetworkFile parse_network_json(const std::string& text) {
  json doc = json::parse(text);
  if (!doc.contains("version") || doc["version"].get<int>() != 1)
    throw std::invalid_argument("network file: unsupported or missing version");
  const double cycle = doc.at("cycle_seconds").get<double>();

  std::vector<Node> nodes;
  for (const auto& jn : doc.at("nodes")) {
    Node n;
    n.id = jn.at("id").get<std::string>();
    const auto kind = jn.at("kind").get<std::string>();
    if (kind == "junction") n.internal = true;
    else if (kind == "external") n.internal = false;
    else throw std::invalid_argument("node " + n.id + ": kind must be junction|external");
    n.index = jn.value("index", 0);
    nodes.push_back(std::move(n));
  }

  std::vector<RoadLink> links;
  for (const auto& jl : doc.at("links")) {
    RoadLink l;
    l.id = jl.at("id").get<std::string>();
    l.upstream = jl.at("from").get<std::string>();
    l.downstream = jl.at("to").get<std::string>();
    l.lanes = jl.value("lanes", 1);
    l.saturation_flow = jl.value("saturation_flow_vps", 0.55 * l.lanes);
    l.capacity = jl.at("capacity_veh").get<double>();
    l.initial_count = jl.value("initial_count_veh", 0.0);
    l.outflow_cap = jl.value("outflow_cap_veh_per_step",
                             std::numeric_limits<double>::infinity());
    if (jl.contains("turns_to"))
      l.turns_to = jl["turns_to"].get<std::vector<std::string>>();
    links.push_back(std::move(l));
  }

  std::vector<Phase> phases;
  for (const auto& jp : doc.at("phases")) {
    Phase p;
    p.id = jp.at("id").get<std::string>();
    p.junction = jp.at("junction").get<std::string>();
    p.granted_links = jp.at("granted_links").get<std::vector<std::string>>();
    p.max_split = jp.at("max_split_seconds").get<double>();
    phases.push_back(std::move(p));
  }

  std::vector<Junction> junctions;
  for (const auto& jj : doc.at("junctions")) {
    Junction j;
    j.id = jj.at("id").get<std::string>();
    j.phases = jj.at("phases").get<std::vector<std::string>>();
    j.lost_time = jj.value("lost_time_seconds", 0.0);
    junctions.push_back(std::move(j));
  }

  NetworkFile out;
  out.network = build_network(cycle, std::move(nodes), std::move(links), std::move(junctions),
                              std::move(phases));
  if (doc.contains("partition")) {
    for (const auto& js : doc["partition"].at("subnetworks")) {
      const auto sid = js.at("id").get<std::string>();
      for (const auto& v : js.at("junctions"))
        out.partition[v.get<std::string>()] = sid;
    }
  }
  return out;
}

NetworkFile load_network_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open network file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_network_json(ss.str());
}

std::string network_to_json(const Network& net, const std::map<NodeId, SubnetId>& partition) {
  json doc;
  doc["version"] = 1;
  doc["cycle_seconds"] = net.cycle;
  doc["nodes"] = json::array();
  for (const auto& n : net.nodes())
    doc["nodes"].push_back({{"id", n.id},
                            {"kind", n.internal ? "junction" : "external"},
                            {"index", n.index}});
  doc["links"] = json::array();
  for (const auto& l : net.links()) {
    json jl = {{"id", l.id},
               {"from", l.upstream},
               {"to", l.downstream},
               {"lanes", l.lanes},
               {"saturation_flow_vps", l.saturation_flow},
               {"capacity_veh", l.capacity},
               {"initial_count_veh", l.initial_count}};
    if (std::isfinite(l.outflow_cap)) jl["outflow_cap_veh_per_step"] = l.outflow_cap;
    if (!l.turns_to.empty()) jl["turns_to"] = l.turns_to;
    doc["links"].push_back(std::move(jl));
  }
  doc["junctions"] = json::array();
  for (const auto& j : net.junctions())
    doc["junctions"].push_back(
        {{"id", j.id}, {"phases", j.phases}, {"lost_time_seconds", j.lost_time}});
  doc["phases"] = json::array();
  for (const auto& p : net.phases())
    doc["phases"].push_back({{"id", p.id},
                             {"junction", p.junction},
                             {"granted_links", p.granted_links},
                             {"max_split_seconds", p.max_split}});
  if (!partition.empty()) {
    std::map<SubnetId, std::vector<NodeId>> groups;
    for (const auto& [v, s] : partition) groups[s].push_back(v);
    json subs = json::array();
    for (const auto& [s, vs] : groups) subs.push_back({{"id", s}, {"junctions", vs}});
    doc["partition"] = {{"subnetworks", std::move(subs)}};
  }
  return doc.dump(2);
}

}  // namespace smpc
