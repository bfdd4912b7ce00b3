#include "smpc/plant.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace smpc {

double ScenarioConfig::band_demand_vph(int minute) const {
  if (demand_bands_vph.empty()) return 0.0;
  int band = minute / std::max(1, band_minutes);
  band = std::clamp(band, 0, static_cast<int>(demand_bands_vph.size()) - 1);
  return demand_bands_vph[band] * demand_scaling;
}

using nlohmann::json;

ScenarioConfig parse_scenario_json(const std::string& text) {
  json doc = json::parse(text);
  ScenarioConfig sc;
  sc.name = doc.value("name", "scenario");
  sc.demand_bands_vph = doc.at("demand_bands_veh_per_hour").get<std::vector<double>>();
  sc.band_minutes = doc.value("band_minutes", 20);
  sc.demand_scaling = doc.value("demand_scaling", 1.0);
  sc.five_lane_factor = doc.value("five_lane_factor", 1.25);
  if (doc.contains("side_inflow")) {
    sc.side_inflow_links = doc["side_inflow"].value("links", std::vector<std::string>{});
    auto range = doc["side_inflow"].value("range_veh_per_hour", std::vector<double>{0, 0});
    if (range.size() != 2) throw std::invalid_argument("side_inflow range needs two values");
    sc.side_inflow_lo_vph = range[0];
    sc.side_inflow_hi_vph = range[1];
  }
  const auto& rows = doc.at("turning_rows");
  if (rows.size() != 4) throw std::invalid_argument("turning_rows must have 4 rows");
  for (int i = 0; i < 4; ++i) {
    sc.turning_rows[i] = {rows[i].at("left").get<double>(), rows[i].at("right").get<double>(),
                          rows[i].at("straight").get<double>()};
    const double sum = sc.turning_rows[i][0] + sc.turning_rows[i][1] + sc.turning_rows[i][2];
    if (std::abs(sum - 1.0) > 1e-9)
      throw std::invalid_argument("turning row " + std::to_string(i) + " does not sum to 1");
  }
  if (doc.contains("delta")) {
    sc.delta_turn = doc["delta"].value("turning", 0.1);
    sc.delta_source_vph = doc["delta"].value("source_demand_veh_per_hour", 350.0);
    sc.delta_other_vph = doc["delta"].value("other_flow_veh_per_hour", 50.0);
  }
  sc.control_steps = doc.value("control_steps", 120);
  sc.seed = doc.value("seed", uint64_t{1});
  return sc;
}

ScenarioConfig load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open scenario file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_scenario_json(ss.str());
}

LinkTurnModel build_turn_model(const Network& net, const ScenarioConfig& sc, const LinkId& z) {
  LinkTurnModel model;
  const auto& link = net.link(z);
  if (link.turns_to.empty()) {
    model.movements = 0;
    return model;
  }

  // Group targets by destination road, in turns_to order.
  std::vector<NodeId> road_nodes;
  std::vector<std::vector<LinkId>> road_members;
  for (const auto& w : link.turns_to) {
    const NodeId& to = net.link(w).downstream;
    auto it = std::find(road_nodes.begin(), road_nodes.end(), to);
    if (it == road_nodes.end()) {
      road_nodes.push_back(to);
      road_members.push_back({w});
    } else {
      road_members[it - road_nodes.begin()].push_back(w);
    }
  }
  model.movements = static_cast<int>(road_nodes.size());

  const int row = (net.node(link.upstream).index + net.node(link.downstream).index) % 4;
  const auto& tr = sc.turning_rows[row];  // left, right, straight
  if (model.movements == 1) {
    model.nominal_weight = {1.0};
    model.delta_kind = {0};
    model.absorber = 0;
  } else if (model.movements == 2) {
    const double l = tr[0], s = tr[2];
    model.nominal_weight = {l / (l + s), s / (l + s)};
    model.delta_kind = {1, 0};
    model.absorber = 1;
  } else if (model.movements == 3) {
    model.nominal_weight = {tr[0], tr[2], tr[1]};  // left, straight, right
    model.delta_kind = {1, 0, 2};
    model.absorber = 1;
  } else {
    throw std::invalid_argument("link " + z + " has more than three movement roads");
  }

  for (int m = 0; m < model.movements; ++m) {
    double lanes = 0.0;
    for (const auto& w : road_members[m]) lanes += net.link(w).lanes;
    for (const auto& w : road_members[m])
      model.targets.push_back({w, m, net.link(w).lanes / lanes});
  }
  return model;
}

namespace {

struct ExoModel {
  double mean_vph = 0.0;
  double var_vph2 = 0.0;  // (veh/hour)^2
  bool source = false;
  bool side = false;
  double share = 1.0;  // lane share of its road, sources only
};

ExoModel exo_model(const Network& net, const ScenarioConfig& sc, const LinkId& z, int minute) {
  const auto& link = net.link(z);
  ExoModel m;
  const double var_other = (2.0 * sc.delta_other_vph) * (2.0 * sc.delta_other_vph) / 12.0;
  if (!net.internal(link.upstream)) {
    m.source = true;
    const auto& road = net.road(link.upstream, link.downstream);
    double road_lanes = 0.0;
    for (const auto& w : road) road_lanes += net.link(w).lanes;
    m.share = link.lanes / road_lanes;
    double demand = sc.band_demand_vph(minute);
    if (road_lanes >= 5) demand *= sc.five_lane_factor;
    m.mean_vph = m.share * demand;
    const double var_src = (2.0 * sc.delta_source_vph) * (2.0 * sc.delta_source_vph) / 12.0;
    m.var_vph2 = m.share * m.share * var_src + var_other;
    return m;
  }
  m.side = std::find(sc.side_inflow_links.begin(), sc.side_inflow_links.end(), z) !=
           sc.side_inflow_links.end();
  if (m.side) {
    m.mean_vph = 0.5 * (sc.side_inflow_lo_vph + sc.side_inflow_hi_vph);
    const double w = sc.side_inflow_hi_vph - sc.side_inflow_lo_vph;
    m.var_vph2 = w * w / 12.0 + 2.0 * var_other;
  } else {
    m.var_vph2 = 2.0 * var_other;
  }
  return m;
}

}  // namespace

RealizedParams sample_parameters(const Network& net, const ScenarioConfig& sc, int minute,
                                 Rng& rng) {
  RealizedParams out;
  const double per_step = net.cycle / 3600.0;  // veh/hour -> veh per cycle
  for (const auto& link : net.links()) {
    const LinkId& z = link.id;

    LinkTurnModel model = build_turn_model(net, sc, z);
    if (model.movements > 0) {
      std::vector<double> w = model.nominal_weight;
      for (int m = 0; m < model.movements; ++m)
        if (model.delta_kind[m] != 0) w[m] += rng.uniform(-sc.delta_turn, sc.delta_turn);
      double others = 0.0;
      for (int m = 0; m < model.movements; ++m)
        if (m != model.absorber) others += w[m];
      w[model.absorber] = 1.0 - others;
      double sum = 0.0;
      for (double& v : w) sum += (v = std::max(0.0, v));
      for (double& v : w) v /= sum;
      std::array<double, 3> rec{0.0, 0.0, 0.0};
      for (int m = 0; m < model.movements && m < 3; ++m) rec[m] = w[m];
      out.movement_weights[z] = rec;
      for (const auto& t : model.targets) out.turn[{z, t.link}] = w[t.movement] * t.share;
    }

    ExoModel em = exo_model(net, sc, z, minute);
    double flow_vph;
    if (em.source) {
      flow_vph = em.mean_vph +
                 em.share * rng.uniform(-sc.delta_source_vph, sc.delta_source_vph) -
                 rng.uniform(-sc.delta_other_vph, sc.delta_other_vph);
    } else if (em.side) {
      flow_vph = rng.uniform(sc.side_inflow_lo_vph, sc.side_inflow_hi_vph) +
                 rng.uniform(-sc.delta_other_vph, sc.delta_other_vph) -
                 rng.uniform(-sc.delta_other_vph, sc.delta_other_vph);
    } else {
      flow_vph = rng.uniform(-sc.delta_other_vph, sc.delta_other_vph) -
                 rng.uniform(-sc.delta_other_vph, sc.delta_other_vph);
    }
    out.exo_veh[z] = flow_vph * per_step;
  }
  return out;
}

ParamSet scenario_moments(const Network& net, const ScenarioConfig& sc, int minute,
                          int horizon, bool stochastic) {
  ParamSet params;
  const double per_step = net.cycle / 3600.0;
  for (const auto& link : net.links()) {
    const LinkId& z = link.id;
    LinkTurnModel model = build_turn_model(net, sc, z);
    for (int k = 0; k < horizon; ++k) {
      ExoModel em = exo_model(net, sc, z, minute + k);
      params.set_exo(
          z, k,
          {em.mean_vph * per_step, stochastic ? em.var_vph2 * per_step * per_step : 0.0});
      if (model.movements == 0) continue;

      const double dvar = (2.0 * sc.delta_turn) * (2.0 * sc.delta_turn) / 12.0;
      std::vector<double> movement_var(model.movements, 0.0);
      double absorbed = 0.0;
      for (int m = 0; m < model.movements; ++m)
        if (model.delta_kind[m] != 0) {
          movement_var[m] = dvar;
          absorbed += dvar;
        }
      movement_var[model.absorber] = absorbed;

      std::vector<std::pair<LinkId, RandomScalar>> row;
      for (const auto& t : model.targets) {
        RandomScalar r;
        r.mean = model.nominal_weight[t.movement] * t.share;
        r.variance = stochastic ? movement_var[t.movement] * t.share * t.share : 0.0;
        row.push_back({t.link, r});
      }
      params.set_turn_row(z, k, row);
    }
  }
  return params;
}

PlantState initial_plant(const Network& net) {
  PlantState s;
  for (const auto& z : net.links()) {
    s.count[z.id] = z.initial_count;
    if (!net.internal(z.upstream)) s.source_queue[z.id] = 0.0;
  }
  return s;
}

FlowRecord step_plant(PlantState& state, const Network& net, const SignalPlan& plan,
                      const RealizedParams& realized, double dt_seconds) {
  FlowRecord rec;
  const double f = dt_seconds / net.cycle;

  // Desired outflows from the plan, capped by what is present.
  std::map<LinkId, double> desired;
  for (const auto& link : net.links()) {
    const LinkId& z = link.id;
    double q;
    if (net.internal(link.downstream)) {
      auto it = plan.greens.find(z);
      const double green = it == plan.greens.end() ? 0.0 : it->second;
      q = link.saturation_flow * green * f;
    } else {
      // Unsignalized exits drain at free flow; the per-step cap exists in the
      // controllers' model, not in the physical network.
      q = link.saturation_flow * dt_seconds;
    }
    desired[z] = std::min(q, state.count[z]);
  }

  // Downstream spare space prorated over the competing inflows.
  std::map<LinkId, double> inflow_demand;
  for (const auto& link : net.links())
    for (const auto& w : link.turns_to)
      inflow_demand[w] += realized.turn.at({link.id, w}) * desired[link.id];
  std::map<LinkId, double> scale;
  for (const auto& [w, demand] : inflow_demand) {
    const double spare = std::max(0.0, net.link(w).capacity - state.count[w]);
    scale[w] = demand > spare && demand > 0.0 ? spare / demand : 1.0;
  }

  std::map<LinkId, double> actual;
  for (const auto& link : net.links()) {
    double s = 1.0;
    for (const auto& w : link.turns_to)
      if (realized.turn.at({link.id, w}) > 0.0) s = std::min(s, scale[w]);
    actual[link.id] = desired[link.id] * s;
  }

  // Apply transfers; waiting counts vehicles that did not move this step.
  for (const auto& link : net.links()) {
    const LinkId& z = link.id;
    const double q = actual[z];
    state.waiting_veh_seconds += std::max(0.0, state.count[z] - q) * dt_seconds;
    state.count[z] -= q;
    rec.outflow[z] = q;
    if (net.internal(link.downstream)) {
      rec.crossed += q;
      for (const auto& w : link.turns_to) state.count[w] += realized.turn.at({z, w}) * q;
    } else {
      rec.exited += q;
    }
  }

  // Exogenous arrivals and exits, capped by capacity; source links queue the
  // excess outside the network.
  for (const auto& link : net.links()) {
    const LinkId& z = link.id;
    const double e = realized.exo_veh.at(z) * f;
    if (!net.internal(link.upstream)) {
      state.arrivals += std::max(0.0, e);
      state.source_queue[z] += std::max(0.0, e);
      const double space = std::max(0.0, link.capacity - state.count[z]);
      const double moved = std::min(state.source_queue[z], space);
      state.source_queue[z] -= moved;
      state.count[z] += moved;
      rec.entered += moved;
    } else if (e >= 0.0) {
      const double space = std::max(0.0, link.capacity - state.count[z]);
      const double moved = std::min(e, space);
      state.count[z] += moved;
      state.dropped_side += e - moved;
      rec.entered += moved;
    } else {
      const double removed = std::min(-e, state.count[z]);
      state.count[z] -= removed;
      rec.exited += removed;
    }
  }

  state.entered += rec.entered;
  state.exited += rec.exited;
  state.crossed += rec.crossed;
  return rec;
}

}  // namespace smpc
