#pragma once

#include <vector>

#include "smpc/assembly.hpp"

namespace smpc {

/// Centralized form of the stacked agent problems with every copy variable
/// identified with its owner. Inequalities are split into plain linear rows
/// and second-order cone blocks (u(x), s(x)) with u = U x - cu, s = srow.x - cs.
struct CentralProblem {
  int dim = 0;
  Matrix H;
  Vector h;
  double constant = 0.0;
  Matrix M;
  Vector m;
  Matrix L;   // L x <= bL
  Vector bL;
  /// Source of each linear row: (agent, omega coordinate, sign); sign -1 means
  /// the row came from a finite lower bound.
  struct RowSource {
    int agent = 0;
    int coord = 0;
    double sign = 1.0;
  };
  std::vector<RowSource> lin_source;
  struct Cone {
    Matrix U;
    Vector cu;
    Eigen::RowVectorXd srow;
    double cs = 0.0;
    int agent = 0;
    int coord = 0;  // first omega coordinate of the block
  };
  std::vector<Cone> cones;
  std::vector<std::vector<int>> var_map;    // agent local column -> global column
  std::vector<std::vector<bool>> is_copy;   // agent local column is a copy
};

/// Identifies copies with owners via the coupling selectors and restacks the
/// agents into one problem over the reduced variable set.
CentralProblem stack_central(const std::vector<AgentProblem>& agents);

struct CentralSolution {
  bool feasible = true;
  Vector x;
  double objective = 0.0;
  double kkt_residual = 0.0;
  Vector eq_dual;   // per M row
  Vector lin_dual;  // per L row, >= 0
  struct ConeDual {
    Vector zu;
    double zs = 0.0;
  };
  std::vector<ConeDual> cone_duals;
};

/// Log-barrier interior-point solve (phase I + path following); deliberately a
/// different algorithm family from the distributed solver so agreement between
/// the two is evidence. Desk-scale only.
CentralSolution solve_central(const CentralProblem& cp, double tol = 1e-9);

/// Stacks per-agent solutions into the global variable space, taking each
/// shared coordinate from its owner.
Vector gather_central(const CentralProblem& cp, const std::vector<Vector>& agent_xs);

double central_objective(const CentralProblem& cp, const Vector& x);
/// Max violation over equalities, linear rows and cone memberships.
double central_violation(const CentralProblem& cp, const Vector& x);

}  // namespace smpc
