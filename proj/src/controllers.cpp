#include "smpc/controllers.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/LU>

namespace smpc {

std::map<LinkId, double> average_nominal_flows(const Network& net, const ScenarioConfig& sc) {
  const int n = static_cast<int>(net.links().size());
  std::map<LinkId, int> index;
  for (int i = 0; i < n; ++i) index[net.links()[i].id] = i;

  // Time-averaged nominal exogenous inflow per link (veh per cycle).
  Vector demand = Vector::Zero(n);
  const double per_step = net.cycle / 3600.0;
  for (const auto& link : net.links()) {
    double mean = 0.0;
    const int steps = std::max(1, sc.control_steps);
    for (int t = 0; t < steps; ++t) {
      if (!net.internal(link.upstream)) {
        const auto& road = net.road(link.upstream, link.downstream);
        double road_lanes = 0.0;
        for (const auto& w : road) road_lanes += net.link(w).lanes;
        double d = sc.band_demand_vph(t) * (road_lanes >= 5 ? sc.five_lane_factor : 1.0);
        mean += d * link.lanes / road_lanes;
      } else if (std::find(sc.side_inflow_links.begin(), sc.side_inflow_links.end(),
                           link.id) != sc.side_inflow_links.end()) {
        mean += 0.5 * (sc.side_inflow_lo_vph + sc.side_inflow_hi_vph);
      }
    }
    demand[index[link.id]] = mean / std::max(1, sc.control_steps) * per_step;
  }

  // f = d + R^T f with R the nominal turning map.
  Matrix rt = Matrix::Zero(n, n);
  for (const auto& link : net.links()) {
    LinkTurnModel model = build_turn_model(net, sc, link.id);
    for (const auto& t : model.targets)
      rt(index[t.link], index[link.id]) = model.nominal_weight[t.movement] * t.share;
  }
  Vector f = (Matrix::Identity(n, n) - rt).partialPivLu().solve(demand);

  std::map<LinkId, double> out;
  for (const auto& [id, i] : index) out[id] = std::max(0.0, f[i]);
  return out;
}

SignalPlan pretimed_controller(const Network& net, const std::map<LinkId, double>& avg_flows) {
  SignalPlan plan;
  for (const auto& junction : net.junctions()) {
    std::vector<double> share(junction.phases.size(), 0.0);
    double total = 0.0;
    for (size_t i = 0; i < junction.phases.size(); ++i) {
      for (const auto& z : net.phase(junction.phases[i]).granted_links)
        share[i] += avg_flows.count(z) ? avg_flows.at(z) : 0.0;
      total += share[i];
    }
    if (total <= 0.0)
      std::fill(share.begin(), share.end(), 1.0 / static_cast<double>(share.size()));
    else
      for (double& s : share) s /= total;

    // Clip-and-renormalize fixpoint: capped phases keep their maximum, the
    // remaining budget is redistributed over the rest.
    std::vector<double> split(junction.phases.size(), 0.0);
    std::vector<bool> capped(junction.phases.size(), false);
    double budget = junction.cycle_budget;
    for (int round = 0; round < static_cast<int>(junction.phases.size()); ++round) {
      double open_share = 0.0;
      for (size_t i = 0; i < share.size(); ++i)
        if (!capped[i]) open_share += share[i];
      if (open_share <= 0.0) break;
      bool clipped = false;
      for (size_t i = 0; i < share.size(); ++i) {
        if (capped[i]) continue;
        const double want = budget * share[i] / open_share;
        const double gmax = net.phase(junction.phases[i]).max_split;
        if (want > gmax) {
          split[i] = gmax;
          capped[i] = true;
          budget -= gmax;
          clipped = true;
        }
      }
      if (!clipped) {
        for (size_t i = 0; i < share.size(); ++i)
          if (!capped[i]) split[i] = budget * share[i] / open_share;
        break;
      }
    }
    for (size_t i = 0; i < junction.phases.size(); ++i)
      plan.splits[junction.phases[i]] = split[i];
  }
  for (const auto& link : net.links()) {
    if (!net.internal(link.downstream)) continue;
    double g = 0.0;
    for (const auto& p : net.phases_granting(link.id)) g += plan.splits[p];
    plan.greens[link.id] = g;
  }
  return plan;
}

SignalPlan backpressure_controller(const Network& net, const ScenarioConfig& sc,
                                   const std::map<LinkId, double>& counts) {
  SignalPlan plan;
  for (const auto& junction : net.junctions()) {
    std::vector<PhaseId> order = junction.phases;
    std::sort(order.begin(), order.end());
    PhaseId best;
    double best_pressure = -std::numeric_limits<double>::infinity();
    for (const auto& pid : order) {
      double pressure = 0.0;
      for (const auto& z : net.phase(pid).granted_links) {
        const auto& link = net.link(z);
        double downstream = 0.0;
        LinkTurnModel model = build_turn_model(net, sc, z);
        for (const auto& t : model.targets)
          downstream +=
              model.nominal_weight[t.movement] * t.share * counts.at(t.link);
        pressure += link.saturation_flow * (counts.at(z) - downstream);
      }
      if (pressure > best_pressure) {
        best_pressure = pressure;
        best = pid;
      }
    }
    for (const auto& pid : junction.phases) plan.splits[pid] = 0.0;
    plan.splits[best] = junction.cycle_budget;
  }
  for (const auto& link : net.links()) {
    if (!net.internal(link.downstream)) continue;
    double g = 0.0;
    for (const auto& p : net.phases_granting(link.id)) g = std::max(g, plan.splits[p]);
    plan.greens[link.id] = g;
  }
  return plan;
}

SignalPlan extract_plan(const Network& net, const std::vector<AgentProblem>& problems,
                        const std::vector<Vector>& xs) {
  SignalPlan plan;
  for (size_t i = 0; i < problems.size(); ++i) {
    const VariableLayout& layout = problems[i].layout;
    for (const auto& p : layout.split_phases())
      plan.splits[p] = std::max(0.0, xs[i][layout.split_col(p, 0)]);
    for (const auto& z : layout.flow_links()) {
      const auto& link = net.link(z);
      if (!net.internal(link.downstream)) continue;
      plan.greens[z] = std::max(0.0, xs[i][layout.flow_col(z, 0)]) / link.saturation_flow;
    }
  }
  return plan;
}

Vector shift_solution(const VariableLayout& layout, const Vector& x) {
  Vector out = x;
  const int K = layout.horizon();
  for (int k = 0; k < K; ++k) {
    const int src = std::min(k + 1, K - 1);
    for (const auto& z : layout.state_links())
      out[layout.state_col(z, k)] = x[layout.state_col(z, src)];
    for (const auto& z : layout.flow_links())
      out[layout.flow_col(z, k)] = x[layout.flow_col(z, src)];
    for (const auto& p : layout.split_phases())
      out[layout.split_col(p, k)] = x[layout.split_col(p, src)];
  }
  for (int j : layout.neighbors())
    for (const auto& z : layout.copies_toward(j))
      for (int k = 0; k < K; ++k)
        out[layout.copy_col(z, k)] = x[layout.copy_col(z, std::min(k + 1, K - 1))];
  return out;
}

MpcStepResult MpcController::step(const ScenarioConfig& sc, int minute,
                                  const std::map<LinkId, double>& counts) {
  MpcStepResult result;
  HorizonInputs in;
  in.measured = counts;
  in.params = scenario_moments(net_, sc, minute, opts_.horizon, opts_.stochastic);
  in.epsilon = opts_.epsilon;
  in.horizon = opts_.horizon;
  in.weights = opts_.weights;

  auto fallback = [&](const std::string& why) {
    result.solved = false;
    result.diagnosis = why;
    if (previous_plan_) {
      result.plan = *previous_plan_;
      result.plan.fallback = true;
    } else {
      // No plan yet: keep everything red except the budget-balanced default.
      result.plan = pretimed_controller(net_, average_nominal_flows(net_, sc));
      result.plan.fallback = true;
    }
    return result;
  };

  auto diagnostics = infeasibility_precheck(net_, in);
  if (!diagnostics.empty()) return fallback("infeasible: " + diagnostics.front());

  std::vector<AgentProblem> problems;
  try {
    problems = build_all_agents(net_, part_, in);
  } catch (const std::exception& e) {
    return fallback(std::string("assembly failed: ") + e.what());
  }

  SolveOptions solve_opts;
  solve_opts.rho = opts_.rho;
  solve_opts.tol = opts_.tol;
  solve_opts.max_iter = opts_.max_iter;
  solve_opts.parallel = opts_.parallel;
  if (opts_.warm_start && previous_states_.size() == problems.size()) {
    bool compatible = true;
    for (size_t i = 0; i < problems.size(); ++i)
      if (previous_states_[i].x.size() != problems[i].layout.dim() ||
          previous_states_[i].y.size() != problems[i].D.rows())
        compatible = false;
    if (compatible) {
      solve_opts.warm_states = previous_states_;
      for (size_t i = 0; i < problems.size(); ++i)
        solve_opts.warm_states[i].x =
            shift_solution(previous_layouts_[i], previous_states_[i].x);
    }
  }

  SolveResult res = solve(problems, solve_opts);
  last_stats_ = res.stats;
  result.iterations = res.stats.iterations;
  if (!res.stats.converged) {
    // A best iterate that is nearly feasible still makes a usable plan; only
    // a genuinely stuck run falls back to the previous plan.
    double violation = 0.0;
    for (size_t i = 0; i < problems.size(); ++i)
      violation = std::max(violation, constraint_violation(problems[i], res.x[i]));
    if (violation > 1e-3) return fallback(res.stats.diagnosis);
    result.diagnosis = "best iterate accepted at violation " + std::to_string(violation);
  }

  previous_states_ = res.states;
  previous_layouts_.clear();
  for (const auto& p : problems) previous_layouts_.push_back(p.layout);

  result.plan = extract_plan(net_, problems, res.x);
  result.solved = true;
  previous_plan_ = result.plan;
  return result;
}

}  // namespace smpc
