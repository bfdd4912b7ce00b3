#pragma once

#include <string>

#include "smpc/assembly.hpp"
#include "smpc/network.hpp"

namespace smpc::testing {

inline NetworkFile load_fig() {
  return load_network_file(std::string(SMPC_DATA_DIR) + "/four_junction.json");
}

inline NetworkFile load_two_junction() {
  return load_network_file(std::string(SMPC_DATA_DIR) + "/two_junction.json");
}

/// One junction, two approaches, one exit; the smallest controllable network.
inline Network make_single_junction() {
  std::vector<Node> nodes{{"J", true, 1}, {"A", false, 0}, {"B", false, 0}, {"C", false, 0}};
  std::vector<RoadLink> links{
      {"in1", "A", "J", 1.65, 120, 3, 20, 0, {"out"}},
      {"in2", "B", "J", 1.65, 120, 3, 20, 0, {"out"}},
      {"out", "J", "C", 1.65, 120, 3, 10, 20.0, {}},
  };
  std::vector<Phase> phases{{"p1", "J", {"in1"}, 50.0}, {"p2", "J", {"in2"}, 50.0}};
  std::vector<Junction> junctions{{"J", {"p1", "p2"}, 4.0, 0.0}};
  return build_network(60.0, nodes, links, junctions, phases);
}

/// Moments with uniform turning splits; handy wherever the exact demand
/// pattern does not matter.
inline ParamSet uniform_params(const Network& net, int horizon, double source_e_mean,
                               double e_var, double r_var) {
  ParamSet p;
  for (const auto& z : net.links()) {
    const bool source = !net.internal(z.upstream);
    for (int k = 0; k < horizon; ++k) {
      p.set_exo(z.id, k, {source ? source_e_mean : 0.0, e_var});
      if (!z.turns_to.empty()) {
        std::vector<std::pair<LinkId, RandomScalar>> row;
        const double mean = 1.0 / static_cast<double>(z.turns_to.size());
        for (const auto& w : z.turns_to) row.push_back({w, {mean, r_var}});
        p.set_turn_row(z.id, k, row);
      }
    }
  }
  return p;
}

inline std::map<LinkId, double> measured_fraction(const Network& net, double fraction) {
  std::map<LinkId, double> m;
  for (const auto& z : net.links()) m[z.id] = fraction * z.capacity;
  return m;
}

inline HorizonInputs make_inputs(const Network& net, int horizon, bool stochastic) {
  HorizonInputs in;
  in.horizon = horizon;
  in.epsilon = 0.2;
  in.measured = measured_fraction(net, 0.3);
  in.params = uniform_params(net, horizon, 15.0, stochastic ? 4.0 : 0.0,
                             stochastic ? 0.002 : 0.0);
  return in;
}

}  // namespace smpc::testing
