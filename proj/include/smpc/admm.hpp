#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Cholesky>

#include "smpc/assembly.hpp"

namespace smpc {

/// Iterates of one agent in the proximal ADMM scheme.
struct AgentState {
  Vector x;
  Vector y;       // splitting variable over Omega
  Vector lambda;  // dual of Dx - d = y
  std::map<int, Vector> y1, lam1;  // per neighbor: copy-side coupling
  std::map<int, Vector> y2, lam2;  // per neighbor: owner-side coupling
  std::map<int, Vector> p_out, q_out;  // outgoing message payloads
  long iter = 0;
  long out_iter = 0;  // iteration the outgoing payloads belong to
};

/// What a neighboring agent needs each iteration: the two coupling payloads
/// P x - lambda1/rho and Q x - lambda2/rho, stamped with the iteration.
struct NeighborMessage {
  int sender = 0;
  int receiver = 0;
  long iteration = 0;
  Vector p_part;
  Vector q_part;
};

/// Factorizations reused across iterations: Hhat = H + eta*I and the Schur
/// complement M Hhat^-1 M^T. Invalidated when (H, M, eta, rho) change.
class KktCache {
 public:
  KktCache() = default;
  KktCache(const AgentProblem& p, double rho);

  /// Minimizer of 0.5 x'Hhat x - hhat'x subject to Mx = m.
  Vector solve(const Vector& hhat) const;
  double eta_eff() const { return eta_eff_; }

 private:
  Eigen::LLT<Matrix> hhat_llt_;
  Eigen::LLT<Matrix> schur_llt_;
  Matrix m_dense_;
  Vector m_rhs_;
  double eta_eff_ = 0.0;
};

/// Effective proximal weight: eta already dominates the largest eigenvalue of
/// A'A, scaled up when rho > 1 so eta*I - rho*A'A stays positive definite.
double effective_eta(const AgentProblem& p, double rho);

Vector x_update(const AgentProblem& p, const AgentState& s, const KktCache& cache, double rho);
Vector y_update(const AgentProblem& p, const Vector& x_new, const Vector& lambda, double rho);
/// Averages the local and remote coupling payloads for one neighbor; throws
/// on an iteration mismatch between the message and the local state.
void consensus_update(const AgentProblem& p, AgentState& s, const NeighborMessage& msg,
                      double rho);
bool check_termination(const AgentProblem& p, const AgentState& s, double tol);

/// Synchronous min-consensus over the agent graph for a number of rounds.
std::vector<int> min_consensus(std::vector<int> flags,
                               const std::vector<std::vector<int>>& neighbors, int rounds);

struct SolveOptions {
  double rho = 0.01;
  double tol = 1e-6;
  long max_iter = 20000;
  bool parallel = false;         // one thread per agent; results are identical
  bool record_iterates = false;  // keep every iterate for convergence studies
  int trace_every = 0;           // emit a JSON line every n iterations (0 = off)
  std::function<void(const std::string&)> trace_sink;
  std::vector<Vector> warm_x;          // optional initial x per agent
  std::vector<AgentState> warm_states; // optional full iterates (takes precedence)
};

struct SolveStats {
  bool converged = false;
  long iterations = 0;
  double final_residual = 0.0;
  double final_coupling_residual = 0.0;
  std::vector<double> primal_residuals;
  std::vector<double> coupling_residuals;
  std::vector<double> dual_residuals;
  std::vector<double> objectives;
  std::string diagnosis;
};

struct SolveResult {
  std::vector<Vector> x;
  std::vector<AgentState> states;
  SolveStats stats;
  std::vector<std::vector<AgentState>> iterate_log;
};

/// Runs the full distributed scheme until every agent's termination flag
/// survives the min-consensus, or max_iter is hit (best iterate returned with
/// a diagnosis).
SolveResult solve(const std::vector<AgentProblem>& problems, const SolveOptions& opts);

double total_objective(const std::vector<AgentProblem>& problems,
                       const std::vector<Vector>& xs);

/// Max violation of Mx = m and of Dx - d against Omega, infinity norm.
double constraint_violation(const AgentProblem& p, const Vector& x);

/// Weighted norm ||a - b||^2 under blkdiag(G, rho*I, I/rho) with
/// G = eta*I - rho*A'A per agent, the contraction metric of the scheme.
double theta_norm_sq(const std::vector<AgentProblem>& problems,
                     const std::vector<AgentState>& a, const std::vector<AgentState>& b,
                     double rho);

}  // namespace smpc
