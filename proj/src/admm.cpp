#include "smpc/admm.hpp"

#include <algorithm>
#include <atomic>
#include <barrier>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace smpc {

// The proximal weight the update law actually needs: G = eta_eff*I - rho*A'A
// must stay positive definite, which rho * (1.01 * lambda_max) guarantees for
// every rho; the stored eta keeps the rho-independent bound.
double effective_eta(const AgentProblem& p, double rho) {
  return p.eta * rho;
}

KktCache::KktCache(const AgentProblem& p, double rho) {
  eta_eff_ = effective_eta(p, rho);
  Matrix hhat = Matrix(p.H);
  hhat.diagonal().array() += eta_eff_;
  hhat_llt_.compute(hhat);
  if (hhat_llt_.info() != Eigen::Success)
    throw std::runtime_error("Hhat factorization failed for agent " + p.id);
  m_dense_ = Matrix(p.M);
  m_rhs_ = p.m;
  Matrix schur = m_dense_ * hhat_llt_.solve(m_dense_.transpose());
  schur_llt_.compute(schur);
  if (schur_llt_.info() != Eigen::Success)
    throw std::runtime_error("singular Schur complement: dynamics of agent " + p.id +
                             " are rank deficient");
}

Vector KktCache::solve(const Vector& hhat) const {
  Vector x = hhat_llt_.solve(hhat);
  Vector mu = schur_llt_.solve(m_dense_ * x - m_rhs_);
  x -= hhat_llt_.solve(m_dense_.transpose() * mu);
  // One refinement pass keeps the equality residual at factorization noise.
  for (int pass = 0; pass < 2; ++pass) {
    Vector r = m_rhs_ - m_dense_ * x;
    if (r.lpNorm<Eigen::Infinity>() <= 1e-12) break;
    x += hhat_llt_.solve(m_dense_.transpose() * schur_llt_.solve(r));
  }
  if (m_dense_.rows() > 0 && (m_dense_ * x - m_rhs_).lpNorm<Eigen::Infinity>() > 1e-10)
    throw std::runtime_error("equality residual above 1e-10 after refinement");
  return x;
}

Vector x_update(const AgentProblem& p, const AgentState& s, const KktCache& cache, double rho) {
  Vector hhat = cache.eta_eff() * s.x - rho * (p.D.transpose() * (p.D * s.x).eval());
  hhat += p.D.transpose() * (s.lambda + rho * (s.y + p.d));
  for (const auto& [j, pm] : p.P) {
    hhat -= rho * (pm.transpose() * (pm * s.x).eval());
    hhat += pm.transpose() * (s.lam1.at(j) + rho * s.y1.at(j));
  }
  for (const auto& [j, qm] : p.Q) {
    hhat -= rho * (qm.transpose() * (qm * s.x).eval());
    hhat += qm.transpose() * (s.lam2.at(j) + rho * s.y2.at(j));
  }
  hhat -= p.h;
  return cache.solve(hhat);
}

Vector y_update(const AgentProblem& p, const Vector& x_new, const Vector& lambda, double rho) {
  return project_product(p.D * x_new - p.d - lambda / rho, p.omega);
}

void consensus_update(const AgentProblem& p, AgentState& s, const NeighborMessage& msg,
                      double rho) {
  (void)rho;
  const int j = msg.sender;
  if (msg.iteration != s.iter + 1)
    throw std::logic_error("coupling message for iteration " + std::to_string(msg.iteration) +
                           " applied at iteration " + std::to_string(s.iter + 1));
  if (msg.q_part.size() != s.p_out.at(j).size() || msg.p_part.size() != s.q_out.at(j).size())
    throw std::logic_error("coupling message size mismatch with agent " + p.id);
  s.y1[j] = 0.5 * (s.p_out.at(j) + msg.q_part);
  s.y2[j] = 0.5 * (msg.p_part + s.q_out.at(j));
}

bool check_termination(const AgentProblem& p, const AgentState& s, double tol) {
  if ((p.D * s.x - s.y - p.d).lpNorm<Eigen::Infinity>() > tol) return false;
  for (const auto& [j, pm] : p.P)
    if ((pm * s.x - s.y1.at(j)).lpNorm<Eigen::Infinity>() > tol) return false;
  for (const auto& [j, qm] : p.Q)
    if ((qm * s.x - s.y2.at(j)).lpNorm<Eigen::Infinity>() > tol) return false;
  return true;
}

std::vector<int> min_consensus(std::vector<int> flags,
                               const std::vector<std::vector<int>>& neighbors, int rounds) {
  std::vector<int> next(flags.size());
  for (int r = 0; r < rounds; ++r) {
    for (size_t i = 0; i < flags.size(); ++i) {
      int v = flags[i];
      for (int j : neighbors[i]) v = std::min(v, flags[j]);
      next[i] = v;
    }
    flags.swap(next);
  }
  return flags;
}

namespace {

AgentState initial_state(const AgentProblem& p, const Vector* warm) {
  AgentState s;
  const int dim = static_cast<int>(p.h.size());
  const bool warmed = warm && warm->size() == dim;
  s.x = warmed ? *warm : Vector::Zero(dim);
  s.lambda = Vector::Zero(p.D.rows());
  s.y = warmed ? project_product(p.D * s.x - p.d, p.omega)
               : project_product(Vector::Zero(p.D.rows()), p.omega);
  for (const auto& [j, pm] : p.P) {
    s.y1[j] = pm * s.x;
    s.lam1[j] = Vector::Zero(pm.rows());
    s.p_out[j] = Vector::Zero(pm.rows());
  }
  for (const auto& [j, qm] : p.Q) {
    s.y2[j] = qm * s.x;
    s.lam2[j] = Vector::Zero(qm.rows());
    s.q_out[j] = Vector::Zero(qm.rows());
  }
  return s;
}

struct Residuals {
  double primal = 0.0;
  double coupling = 0.0;
};

Residuals agent_residuals(const AgentProblem& p, const AgentState& s) {
  Residuals r;
  // Box rows use the max norm; cone blocks use their 2-norm so that the
  // residual bounds the actual cone-membership violation of x.
  Vector resid = p.D * s.x - s.y - p.d;
  int off = 0;
  for (const auto& seg : p.omega.segments) {
    if (seg.kind == ConeSegment::Kind::Box)
      r.primal = std::max(r.primal, resid.segment(off, seg.size()).lpNorm<Eigen::Infinity>());
    else
      r.primal = std::max(r.primal, resid.segment(off, seg.size()).norm());
    off += seg.size();
  }
  for (const auto& [j, pm] : p.P)
    r.coupling = std::max(r.coupling, (pm * s.x - s.y1.at(j)).lpNorm<Eigen::Infinity>());
  for (const auto& [j, qm] : p.Q)
    r.coupling = std::max(r.coupling, (qm * s.x - s.y2.at(j)).lpNorm<Eigen::Infinity>());
  return r;
}

}  // namespace

SolveResult solve(const std::vector<AgentProblem>& problems, const SolveOptions& opts) {
  const int n = static_cast<int>(problems.size());
  if (n == 0) throw std::invalid_argument("no agent problems given");
  std::vector<std::vector<int>> topology(n);
  for (int i = 0; i < n; ++i) {
    for (const auto& [j, pm] : problems[i].P) topology[i].push_back(j);
    for (const auto& [j, qm] : problems[i].Q)
      if (!problems[i].P.count(j)) topology[i].push_back(j);
    std::sort(topology[i].begin(), topology[i].end());
  }

  std::vector<KktCache> caches;
  caches.reserve(n);
  for (const auto& p : problems) caches.emplace_back(p, opts.rho);

  std::vector<AgentState> states;
  states.reserve(n);
  if (opts.warm_states.size() == static_cast<size_t>(n)) {
    for (int i = 0; i < n; ++i) {
      AgentState s = opts.warm_states[i];
      if (s.x.size() != problems[i].h.size() || s.y.size() != problems[i].D.rows())
        throw std::invalid_argument("warm state dimensions do not match the problem");
      s.iter = 0;
      s.out_iter = 0;
      states.push_back(std::move(s));
    }
  } else {
    for (int i = 0; i < n; ++i)
      states.push_back(initial_state(
          problems[i],
          opts.warm_x.size() == static_cast<size_t>(n) ? &opts.warm_x[i] : nullptr));
  }

  SolveResult result;
  if (opts.record_iterates) result.iterate_log.push_back(states);

  std::vector<Vector> x_prev(n);
  std::vector<Vector> y_prev(n);
  std::vector<std::map<int, Vector>> y1_prev(n), y2_prev(n);
  std::vector<double> dual_res(n, 0.0);

  auto x_phase = [&](int i) {
    const AgentProblem& p = problems[i];
    AgentState& s = states[i];
    x_prev[i] = s.x;
    y_prev[i] = s.y;
    y1_prev[i] = s.y1;
    y2_prev[i] = s.y2;
    s.x = x_update(p, s, caches[i], opts.rho);
    s.out_iter = s.iter + 1;
    for (const auto& [j, pm] : p.P) s.p_out[j] = pm * s.x - s.lam1.at(j) / opts.rho;
    for (const auto& [j, qm] : p.Q) s.q_out[j] = qm * s.x - s.lam2.at(j) / opts.rho;
  };

  auto y_phase = [&](int i) {
    const AgentProblem& p = problems[i];
    AgentState& s = states[i];
    s.y = y_update(p, s.x, s.lambda, opts.rho);
    s.lambda -= opts.rho * (p.D * s.x - p.d - s.y);
    for (int j : topology[i]) {
      NeighborMessage msg{j, i, states[j].out_iter, states[j].p_out.at(i),
                          states[j].q_out.at(i)};
      consensus_update(p, s, msg, opts.rho);
    }
    for (const auto& [j, pm] : p.P) s.lam1[j] -= opts.rho * (pm * s.x - s.y1.at(j));
    for (const auto& [j, qm] : p.Q) s.lam2[j] -= opts.rho * (qm * s.x - s.y2.at(j));

    // Dual-feasibility residual of the x-subproblem stationarity:
    // rho D'(y+ - y) + rho P'(y1+ - y1) + rho Q'(y2+ - y2) + G (x+ - x).
    const Vector dx = s.x - x_prev[i];
    Vector dual = opts.rho * (p.D.transpose() * (s.y - y_prev[i]).eval());
    dual += caches[i].eta_eff() * dx - opts.rho * (p.D.transpose() * (p.D * dx).eval());
    for (const auto& [j, pm] : p.P) {
      dual += opts.rho * (pm.transpose() * (s.y1.at(j) - y1_prev[i].at(j)).eval());
      dual -= opts.rho * (pm.transpose() * (pm * dx).eval());
    }
    for (const auto& [j, qm] : p.Q) {
      dual += opts.rho * (qm.transpose() * (s.y2.at(j) - y2_prev[i].at(j)).eval());
      dual -= opts.rho * (qm.transpose() * (qm * dx).eval());
    }
    dual_res[i] = dual.lpNorm<Eigen::Infinity>();
    s.iter++;
  };

  std::vector<int> flags(n, 0);
  std::atomic<bool> stop{false};
  std::atomic<long> iter{0};

  auto bookkeeping = [&]() {
    Residuals all;
    for (int i = 0; i < n; ++i) {
      Residuals r = agent_residuals(problems[i], states[i]);
      all.primal = std::max(all.primal, r.primal);
      all.coupling = std::max(all.coupling, r.coupling);
      flags[i] =
          r.primal <= opts.tol && r.coupling <= opts.tol && dual_res[i] <= opts.tol ? 1 : 0;
    }
    std::vector<int> consensus = min_consensus(flags, topology, n);
    const bool done =
        std::all_of(consensus.begin(), consensus.end(), [](int f) { return f == 1; });
    result.stats.primal_residuals.push_back(all.primal);
    result.stats.coupling_residuals.push_back(all.coupling);
    result.stats.dual_residuals.push_back(
        *std::max_element(dual_res.begin(), dual_res.end()));
    std::vector<Vector> xs;
    for (const auto& s : states) xs.push_back(s.x);
    result.stats.objectives.push_back(total_objective(problems, xs));
    if (opts.record_iterates) result.iterate_log.push_back(states);
    const long l = iter.load();
    if (opts.trace_sink && opts.trace_every > 0 &&
        ((l + 1) % opts.trace_every == 0 || done)) {
      std::ostringstream os;
      os.precision(17);
      os << "{\"iteration\":" << l + 1 << ",\"primal_residual\":" << all.primal
         << ",\"coupling_residual\":" << all.coupling
         << ",\"objective\":" << result.stats.objectives.back() << "}";
      opts.trace_sink(os.str());
    }
    result.stats.final_residual = all.primal;
    result.stats.final_coupling_residual = all.coupling;
    if (done) stop.store(true);
    iter.store(l + 1);
  };

  if (!opts.parallel || n == 1) {
    while (iter.load() < opts.max_iter && !stop.load()) {
      for (int i = 0; i < n; ++i) x_phase(i);
      for (int i = 0; i < n; ++i) y_phase(i);
      bookkeeping();
    }
  } else {
    std::barrier<> sync(n);
    std::barrier cycle(n, [&]() noexcept { bookkeeping(); });
    auto worker = [&](int i) {
      while (iter.load() < opts.max_iter && !stop.load()) {
        x_phase(i);
        sync.arrive_and_wait();
        y_phase(i);
        cycle.arrive_and_wait();
      }
    };
    std::vector<std::thread> threads;
    for (int i = 0; i < n; ++i) threads.emplace_back(worker, i);
    for (auto& t : threads) t.join();
  }

  result.stats.converged = stop.load();
  result.stats.iterations = states.empty() ? 0 : states[0].iter;
  if (!result.stats.converged) {
    std::ostringstream os;
    os << "max_iter=" << opts.max_iter << " reached with primal residual "
       << result.stats.final_residual << " and coupling residual "
       << result.stats.final_coupling_residual
       << "; the problem may be infeasible or the tolerance too tight";
    result.stats.diagnosis = os.str();
  }
  for (const auto& s : states) result.x.push_back(s.x);
  result.states = std::move(states);
  return result;
}

double total_objective(const std::vector<AgentProblem>& problems,
                       const std::vector<Vector>& xs) {
  double total = 0.0;
  for (size_t i = 0; i < problems.size(); ++i) total += objective_value(problems[i], xs[i]);
  return total;
}

double constraint_violation(const AgentProblem& p, const Vector& x) {
  double v = p.M.rows() > 0 ? (p.M * x - p.m).lpNorm<Eigen::Infinity>() : 0.0;
  Vector r = p.D * x - p.d;
  int off = 0;
  for (const auto& seg : p.omega.segments) {
    if (seg.kind == ConeSegment::Kind::Box) {
      for (Eigen::Index i = 0; i < seg.lb.size(); ++i) {
        v = std::max(v, r[off + i] - seg.ub[i]);
        v = std::max(v, seg.lb[i] - r[off + i]);
      }
    } else {
      const double s = r[off + seg.dim - 1];
      v = std::max(v, r.segment(off, seg.dim - 1).norm() - s);
    }
    off += seg.size();
  }
  return v;
}

double theta_norm_sq(const std::vector<AgentProblem>& problems,
                     const std::vector<AgentState>& a, const std::vector<AgentState>& b,
                     double rho) {
  double total = 0.0;
  for (size_t i = 0; i < problems.size(); ++i) {
    const AgentProblem& p = problems[i];
    const Vector dx = a[i].x - b[i].x;
    double gx = effective_eta(p, rho) * dx.squaredNorm();
    gx -= rho * (p.D * dx).squaredNorm();
    for (const auto& [j, pm] : p.P) gx -= rho * (pm * dx).squaredNorm();
    for (const auto& [j, qm] : p.Q) gx -= rho * (qm * dx).squaredNorm();
    total += gx;
    total += rho * (a[i].y - b[i].y).squaredNorm();
    total += (a[i].lambda - b[i].lambda).squaredNorm() / rho;
    for (const auto& [j, v] : a[i].y1) total += rho * (v - b[i].y1.at(j)).squaredNorm();
    for (const auto& [j, v] : a[i].y2) total += rho * (v - b[i].y2.at(j)).squaredNorm();
    for (const auto& [j, v] : a[i].lam1) total += (v - b[i].lam1.at(j)).squaredNorm() / rho;
    for (const auto& [j, v] : a[i].lam2) total += (v - b[i].lam2.at(j)).squaredNorm() / rho;
  }
  return total;
}

}  // namespace smpc
