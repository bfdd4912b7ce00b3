#pragma once

#include <memory>
#include <optional>

#include "smpc/admm.hpp"
#include "smpc/plant.hpp"

namespace smpc {

/// Long-run average link flows under nominal demand and turning ratios:
/// f = d + R^T f solved over the whole network.
std::map<LinkId, double> average_nominal_flows(const Network& net, const ScenarioConfig& sc);

/// Fixed-time plan: splits proportional to the average flows served by each
/// phase, clipped to the per-phase maximum and renormalized into the budget.
SignalPlan pretimed_controller(const Network& net, const std::map<LinkId, double>& avg_flows);

/// Max-pressure plan for one slot: each junction grants the phase with the
/// largest saturation-weighted queue imbalance; ties go to the lowest phase id.
SignalPlan backpressure_controller(const Network& net, const ScenarioConfig& sc,
                                   const std::map<LinkId, double>& counts);

struct MpcOptions {
  bool stochastic = true;
  double epsilon = 0.2;
  int horizon = 3;
  double rho = 0.01;
  double tol = 1e-6;
  long max_iter = 20000;
  bool parallel = false;
  bool warm_start = true;
  CostWeights weights;
};

struct MpcStepResult {
  SignalPlan plan;
  bool solved = false;
  long iterations = 0;
  std::string diagnosis;
};

/// One receding-horizon step: assemble from the scenario moments and measured
/// counts, run the distributed solver, extract the first-cycle decisions.
/// On an infeasible or non-converged step the previous plan is reused and
/// flagged.
class MpcController {
 public:
  MpcController(const Network& net, Partition part, MpcOptions opts)
      : net_(net), part_(std::move(part)), opts_(opts) {}

  MpcStepResult step(const ScenarioConfig& sc, int minute,
                     const std::map<LinkId, double>& counts);

  const SolveStats& last_stats() const { return last_stats_; }

 private:
  const Network& net_;
  Partition part_;
  MpcOptions opts_;
  std::vector<AgentState> previous_states_;
  std::vector<VariableLayout> previous_layouts_;
  std::optional<SignalPlan> previous_plan_;
  SolveStats last_stats_;
};

/// Extracts the applied decisions g_p = split(p, 0) and g_z = q(z, 0) / S_z
/// from each agent's own solution.
SignalPlan extract_plan(const Network& net, const std::vector<AgentProblem>& problems,
                        const std::vector<Vector>& xs);

/// Shifts a solution one cycle forward (step k takes the value of k+1, the
/// last step repeats) for warm starting the next horizon.
Vector shift_solution(const VariableLayout& layout, const Vector& x);

}  // namespace smpc
