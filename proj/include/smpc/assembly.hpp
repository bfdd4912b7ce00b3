#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/SparseCore>

#include "smpc/cone.hpp"
#include "smpc/network.hpp"
#include "smpc/stochastic.hpp"

namespace smpc {

using SpMat = Eigen::SparseMatrix<double>;

/// Ordered index map for one agent's local variable vector
/// x = [n_0, q_0, g_0, ..., n_{K-1}, q_{K-1}, g_{K-1}, copy blocks per neighbor].
class VariableLayout {
 public:
  VariableLayout() = default;
  VariableLayout(const Network& net, const Partition& part, int agent, int horizon);

  int dim() const { return dim_; }
  int horizon() const { return horizon_; }
  int agent() const { return agent_; }

  /// Expected state n_{z,k}; z must be state-owned by this agent.
  int state_col(const LinkId& z, int k) const;
  /// Downstream flow q_{z,k}; z must be flow-owned by this agent.
  int flow_col(const LinkId& z, int k) const;
  /// Phase split g_{p,k}.
  int split_col(const PhaseId& p, int k) const;
  /// Copy of a neighbor-owned boundary flow.
  int copy_col(const LinkId& z, int k) const;
  /// q_{z,k} if flow-owned here, else the copy (z must then be an outgoing
  /// boundary link of this agent).
  int flow_or_copy_col(const LinkId& z, int k) const;

  bool owns_state(const LinkId& z) const { return state_index_.count(z) > 0; }
  bool owns_flow(const LinkId& z) const { return flow_index_.count(z) > 0; }

  const std::vector<LinkId>& state_links() const { return state_links_; }
  const std::vector<LinkId>& flow_links() const { return flow_links_; }
  const std::vector<PhaseId>& split_phases() const { return split_phases_; }
  const std::vector<NodeId>& junctions() const { return junctions_; }
  const std::vector<LinkId>& local_sources() const { return local_sources_; }
  /// Neighbor agents in ascending index order.
  const std::vector<int>& neighbors() const { return neighbors_; }
  /// Copied links toward a neighbor, in coupling row order.
  const std::vector<LinkId>& copies_toward(int neighbor) const;
  /// Links owned here whose copies live at `neighbor`, in coupling row order.
  const std::vector<LinkId>& owned_for(int neighbor) const;
  int first_copy_col() const { return copy_start_; }

  /// Human-readable variable name, for dumps and diagnostics.
  std::string describe(int col) const;

 private:
  int agent_ = 0;
  int horizon_ = 0;
  int dim_ = 0;
  int per_step_ = 0;
  int copy_start_ = 0;
  std::vector<LinkId> state_links_;
  std::vector<LinkId> flow_links_;
  std::vector<PhaseId> split_phases_;
  std::vector<NodeId> junctions_;
  std::vector<LinkId> local_sources_;
  std::vector<int> neighbors_;
  std::map<LinkId, int> state_index_;
  std::map<LinkId, int> flow_index_;
  std::map<PhaseId, int> split_index_;
  std::map<int, std::vector<LinkId>> copies_toward_;
  std::map<int, std::vector<LinkId>> owned_for_;
  std::map<LinkId, int> copy_index_;
  std::map<int, int> copy_block_start_;
};

/// Per-link cost weights; alpha defaults to 1/capacity (relative-occupancy
/// balancing), beta and gamma to the constants used throughout the
/// experiments.
struct CostWeights {
  double beta = 0.3;
  double gamma = 0.3;
  std::map<LinkId, double> alpha_override;
  double alpha(const RoadLink& link) const {
    auto it = alpha_override.find(link.id);
    return it == alpha_override.end() ? 1.0 / link.capacity : it->second;
  }
};

/// Everything an agent needs to assemble one horizon's problem.
struct HorizonInputs {
  std::map<LinkId, double> measured;  // n_z(t) per relevant link
  ParamSet params;
  double epsilon = 0.2;
  int horizon = 3;
  CostWeights weights;
};

/// One agent's data for the distributed program: quadratic cost, dynamics
/// equalities, cone-shaped inequalities and the coupling selectors.
struct AgentProblem {
  int agent = 0;
  SubnetId id;
  VariableLayout layout;
  SpMat H;  // symmetric PSD, cost 0.5 x'Hx + h'x (+ constant)
  Vector h;
  double constant = 0.0;
  SpMat M;  // full row rank dynamics
  Vector m;
  SpMat D;
  Vector d;
  ConeProduct omega;
  std::map<int, SpMat> P;  // selects this agent's copy block per neighbor
  std::map<int, SpMat> Q;  // selects owned boundary flows per neighbor
  double eta = 0.0;        // 1.01 * lambda_max(A'A), A = [D; P...; Q...]
  int linear_rows = 0;     // leading box segment size of omega
};

VariableLayout build_layout(const Network& net, const Partition& part, int agent, int horizon);

void build_cost(const Network& net, const Partition& part, const VariableLayout& layout,
                const HorizonInputs& inputs, SpMat& H, Vector& h, double& constant);

void build_dynamics(const Network& net, const Partition& part, const VariableLayout& layout,
                    const HorizonInputs& inputs, SpMat& M, Vector& m);

void build_inequalities(const Network& net, const Partition& part,
                        const VariableLayout& layout, const HorizonInputs& inputs, SpMat& D,
                        Vector& d, ConeProduct& omega, int& linear_rows);

/// Selectors for the coupled equality P_ij x_i = Q_ji x_j; both agents order
/// rows link-by-link, step-by-step over the same boundary set.
void build_coupling(const VariableLayout& layout_i, const VariableLayout& layout_j,
                    SpMat& P_ij, SpMat& Q_ij);

/// 1.01 * lambda_max(A'A) by power iteration to 1e-6 relative tolerance.
double compute_eta(const SpMat& D, const std::vector<const SpMat*>& selectors, int dim);

AgentProblem build_agent_problem(const Network& net, const Partition& part, int agent,
                                 const HorizonInputs& inputs);
std::vector<AgentProblem> build_all_agents(const Network& net, const Partition& part,
                                           const HorizonInputs& inputs);

/// Quick certificates of an empty feasible set; empty result means "not
/// obviously infeasible".
std::vector<std::string> infeasibility_precheck(const Network& net,
                                                const HorizonInputs& inputs);

/// Sparse-triplet JSON debug dump understood by the reference oracle.
std::string dump_agent_problem(const AgentProblem& p);
AgentProblem load_agent_problem(const std::string& json_text);

double objective_value(const AgentProblem& p, const Vector& x);

}  // namespace smpc
