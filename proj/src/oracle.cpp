#include "smpc/oracle.hpp"

#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>

#include <Eigen/Cholesky>
#include <Eigen/LU>
#include <Eigen/QR>

namespace smpc {

namespace {

std::vector<bool> copy_columns(const AgentProblem& p) {
  std::vector<bool> is_copy(p.h.size(), false);
  for (const auto& [j, pm] : p.P)
    for (int k = 0; k < pm.outerSize(); ++k)
      for (SpMat::InnerIterator it(pm, k); it; ++it) is_copy[it.col()] = true;
  return is_copy;
}

}  // namespace

CentralProblem stack_central(const std::vector<AgentProblem>& agents) {
  const int n = static_cast<int>(agents.size());
  CentralProblem cp;
  cp.var_map.resize(n);
  cp.is_copy.resize(n);

  int dim = 0;
  for (int i = 0; i < n; ++i) {
    const int zeta = static_cast<int>(agents[i].h.size());
    cp.is_copy[i] = copy_columns(agents[i]);
    cp.var_map[i].assign(zeta, -1);
    for (int c = 0; c < zeta; ++c)
      if (!cp.is_copy[i][c]) cp.var_map[i][c] = dim++;
  }
  cp.dim = dim;

  // Copies inherit the owner's global index through P_ij row r <-> Q_ji row r.
  for (int i = 0; i < n; ++i) {
    for (const auto& [j, pm] : agents[i].P) {
      const SpMat& qm = agents[j].Q.at(i);
      if (pm.rows() != qm.rows())
        throw std::invalid_argument("inconsistent coupling selectors between agents");
      std::vector<int> copy_col(pm.rows(), -1), owner_col(qm.rows(), -1);
      for (int k = 0; k < pm.outerSize(); ++k)
        for (SpMat::InnerIterator it(pm, k); it; ++it) copy_col[it.row()] = it.col();
      for (int k = 0; k < qm.outerSize(); ++k)
        for (SpMat::InnerIterator it(qm, k); it; ++it) owner_col[it.row()] = it.col();
      for (int r = 0; r < pm.rows(); ++r) {
        if (copy_col[r] < 0 || owner_col[r] < 0)
          throw std::invalid_argument("coupling selector row selects no coordinate");
        cp.var_map[i][copy_col[r]] = cp.var_map[j][owner_col[r]];
      }
    }
  }
  for (int i = 0; i < n; ++i)
    for (int c = 0; c < static_cast<int>(cp.var_map[i].size()); ++c)
      if (cp.var_map[i][c] < 0)
        throw std::invalid_argument("copy variable not covered by any coupling selector");

  cp.H = Matrix::Zero(dim, dim);
  cp.h = Vector::Zero(dim);
  int eq_rows = 0;
  for (const auto& a : agents) eq_rows += static_cast<int>(a.M.rows());
  cp.M = Matrix::Zero(eq_rows, dim);
  cp.m = Vector::Zero(eq_rows);

  std::vector<Eigen::Triplet<double>> lin_entries;
  std::vector<double> lin_rhs;
  int eq_off = 0;
  for (int i = 0; i < n; ++i) {
    const AgentProblem& a = agents[i];
    const auto& map = cp.var_map[i];
    cp.constant += a.constant;
    for (int k = 0; k < a.H.outerSize(); ++k)
      for (SpMat::InnerIterator it(a.H, k); it; ++it)
        cp.H(map[it.row()], map[it.col()]) += it.value();
    for (int c = 0; c < a.h.size(); ++c) cp.h[map[c]] += a.h[c];
    for (int k = 0; k < a.M.outerSize(); ++k)
      for (SpMat::InnerIterator it(a.M, k); it; ++it)
        cp.M(eq_off + it.row(), map[it.col()]) += it.value();
    cp.m.segment(eq_off, a.M.rows()) = a.m;
    eq_off += static_cast<int>(a.M.rows());

    Matrix dd = Matrix(a.D);
    int off = 0;
    for (const auto& seg : a.omega.segments) {
      if (seg.kind == ConeSegment::Kind::Box) {
        for (int r = 0; r < seg.lb.size(); ++r) {
          const int row = off + r;
          if (std::isfinite(seg.ub[r])) {
            const int lr = static_cast<int>(lin_rhs.size());
            for (int c = 0; c < dd.cols(); ++c)
              if (dd(row, c) != 0.0) lin_entries.emplace_back(lr, map[c], dd(row, c));
            lin_rhs.push_back(a.d[row] + seg.ub[r]);
            cp.lin_source.push_back({i, row, 1.0});
          }
          if (std::isfinite(seg.lb[r])) {
            const int lr = static_cast<int>(lin_rhs.size());
            for (int c = 0; c < dd.cols(); ++c)
              if (dd(row, c) != 0.0) lin_entries.emplace_back(lr, map[c], -dd(row, c));
            lin_rhs.push_back(-a.d[row] - seg.lb[r]);
            cp.lin_source.push_back({i, row, -1.0});
          }
        }
      } else {
        CentralProblem::Cone cone;
        cone.agent = i;
        cone.coord = off;
        const int nu = seg.dim - 1;
        cone.U = Matrix::Zero(nu, dim);
        cone.cu = Vector(nu);
        for (int r = 0; r < nu; ++r) {
          for (int c = 0; c < dd.cols(); ++c)
            if (dd(off + r, c) != 0.0) cone.U(r, map[c]) += dd(off + r, c);
          cone.cu[r] = a.d[off + r];
        }
        cone.srow = Eigen::RowVectorXd::Zero(dim);
        for (int c = 0; c < dd.cols(); ++c)
          if (dd(off + nu, c) != 0.0) cone.srow[map[c]] += dd(off + nu, c);
        cone.cs = a.d[off + nu];
        cp.cones.push_back(std::move(cone));
      }
      off += seg.size();
    }
  }
  cp.L = Matrix::Zero(static_cast<int>(lin_rhs.size()), dim);
  for (const auto& t : lin_entries) cp.L(t.row(), t.col()) += t.value();
  cp.bL = Eigen::Map<Vector>(lin_rhs.data(), static_cast<Eigen::Index>(lin_rhs.size()));
  return cp;
}

Vector gather_central(const CentralProblem& cp, const std::vector<Vector>& agent_xs) {
  Vector x = Vector::Zero(cp.dim);
  for (size_t i = 0; i < agent_xs.size(); ++i)
    for (int c = 0; c < agent_xs[i].size(); ++c)
      if (!cp.is_copy[i][c]) x[cp.var_map[i][c]] = agent_xs[i][c];
  return x;
}

double central_objective(const CentralProblem& cp, const Vector& x) {
  return 0.5 * x.dot(cp.H * x) + cp.h.dot(x) + cp.constant;
}

double central_violation(const CentralProblem& cp, const Vector& x) {
  double v = cp.M.rows() > 0 ? (cp.M * x - cp.m).lpNorm<Eigen::Infinity>() : 0.0;
  if (cp.L.rows() > 0) v = std::max(v, (cp.L * x - cp.bL).maxCoeff());
  for (const auto& cone : cp.cones) {
    const double s = cone.srow.dot(x) - cone.cs;
    v = std::max(v, (cone.U * x - cone.cu).norm() - s);
  }
  return v;
}

namespace {

// Barrier machinery shared by phase I and phase II.
struct BarrierProblem {
  const Matrix* H = nullptr;  // null in phase I
  Vector h;
  Matrix M;
  Vector m;
  Matrix L;
  Vector bL;
  struct Cone {
    Matrix U;
    Vector cu;
    Eigen::RowVectorXd srow;
    double cs;
  };
  std::vector<Cone> cones;
  int dim = 0;

  double nu() const { return static_cast<double>(L.rows()) + 2.0 * cones.size(); }

  bool strictly_feasible(const Vector& x, double margin) const {
    if (L.rows() > 0 && ((bL - L * x).array() <= margin).any()) return false;
    for (const auto& c : cones) {
      const double s = c.srow.dot(x) - c.cs;
      if (s <= margin) return false;
      if (s * s - (c.U * x - c.cu).squaredNorm() <= margin) return false;
    }
    return true;
  }

  double objective(const Vector& x) const {
    double f = h.dot(x);
    if (H) f += 0.5 * x.dot(*H * x);
    return f;
  }
  Vector grad_objective(const Vector& x) const {
    Vector g = h;
    if (H) g += *H * x;
    return g;
  }

  double barrier(const Vector& x) const {
    double phi = 0.0;
    Vector s = bL - L * x;
    for (int i = 0; i < s.size(); ++i) phi -= std::log(s[i]);
    for (const auto& c : cones) {
      const double sv = c.srow.dot(x) - c.cs;
      phi -= std::log(sv * sv - (c.U * x - c.cu).squaredNorm());
    }
    return phi;
  }

  void barrier_derivatives(const Vector& x, Vector& grad, Matrix& hess) const {
    grad = Vector::Zero(dim);
    hess = Matrix::Zero(dim, dim);
    Vector s = bL - L * x;
    for (int i = 0; i < s.size(); ++i) {
      const Vector li = L.row(i).transpose();
      grad += li / s[i];
      hess += (li * li.transpose()) / (s[i] * s[i]);
    }
    for (const auto& c : cones) {
      const Vector u = c.U * x - c.cu;
      const double sv = c.srow.dot(x) - c.cs;
      const double r = sv * sv - u.squaredNorm();
      const Vector gr = (2.0 / r) * (c.U.transpose() * u - sv * c.srow.transpose());
      grad += gr;
      hess += gr * gr.transpose();
      hess += (2.0 / r) * (c.U.transpose() * c.U - c.srow.transpose() * c.srow);
    }
  }
};

struct NewtonResult {
  Vector x;
  Vector eq_dual;  // multiplier of Mx = m at the final center, divided by t
};

// Newton directions keep M dx = 0 only up to factorization noise, which
// accumulates over a long path; each accepted step re-projects onto Mx = m.
struct EqProjector {
  Matrix mt;
  Eigen::LDLT<Matrix> mmt;
  explicit EqProjector(const Matrix& m) : mt(m.transpose()) {
    if (m.rows() > 0) mmt.compute(Matrix(m * mt));
  }
  void apply(const BarrierProblem& bp, Vector& x) const {
    if (bp.M.rows() == 0) return;
    Vector r = bp.m - bp.M * x;
    if (r.lpNorm<Eigen::Infinity>() > 1e-13) x += mt * mmt.solve(r);
  }
};

NewtonResult newton_center(const BarrierProblem& bp, Vector x, double t,
                           const std::function<bool(const Vector&)>& stop_early,
                           const EqProjector& proj) {
  const int p = static_cast<int>(bp.M.rows());
  Vector w = Vector::Zero(p);
  for (int it = 0; it < 200; ++it) {
    Vector bgrad;
    Matrix bhess;
    bp.barrier_derivatives(x, bgrad, bhess);
    Vector g = t * bp.grad_objective(x) + bgrad;
    Matrix ht = bhess;
    if (bp.H) ht += t * (*bp.H);

    Vector dx(bp.dim);
    Eigen::LLT<Matrix> llt(ht);
    if (llt.info() == Eigen::Success && p > 0) {
      Matrix mt = bp.M.transpose();
      Eigen::LLT<Matrix> sllt(Matrix(bp.M * llt.solve(mt)));
      if (sllt.info() != Eigen::Success)
        throw std::runtime_error("oracle: equality rows are rank deficient");
      w = sllt.solve(-(bp.M * llt.solve(g)));
      dx = -llt.solve(g + mt * w);
    } else if (llt.info() == Eigen::Success) {
      dx = -llt.solve(g);
    } else {
      Matrix kkt = Matrix::Zero(bp.dim + p, bp.dim + p);
      kkt.topLeftCorner(bp.dim, bp.dim) = ht;
      if (p > 0) {
        kkt.topRightCorner(bp.dim, p) = bp.M.transpose();
        kkt.bottomLeftCorner(p, bp.dim) = bp.M;
      }
      Vector rhs(bp.dim + p);
      rhs.head(bp.dim) = -g;
      rhs.tail(p).setZero();
      Vector sol = Eigen::FullPivLU<Matrix>(kkt).solve(rhs);
      dx = sol.head(bp.dim);
      w = sol.tail(p);
    }

    const double decrement = -g.dot(dx);
    if (decrement / 2.0 <= 1e-11) break;

    const double f0 = t * bp.objective(x) + bp.barrier(x);
    double step = 1.0;
    bool moved = false;
    while (step > 1e-14) {
      Vector xn = x + step * dx;
      proj.apply(bp, xn);
      if (bp.strictly_feasible(xn, 0.0) &&
          t * bp.objective(xn) + bp.barrier(xn) <= f0 - 0.25 * step * decrement) {
        x = std::move(xn);
        moved = true;
        break;
      }
      step *= 0.6;
    }
    if (!moved) break;
    if (stop_early && stop_early(x)) break;
  }
  return {x, w / t};
}

double final_t(double nu, double gap_tol) {
  double t = 1.0;
  while (nu / t > gap_tol) t *= 20.0;
  return t;
}

// Refits multipliers on the near-active set by nonnegative least squares; an
// exact complementary dual certificate where the barrier center only gives an
// O(1/t) one. An active cone contributes the single ray (-U'u/s + srow')*beta
// since its multiplier must be the boundary normal.
void polish_duals(const CentralProblem& cp, CentralSolution& sol) {
  const Vector slack = cp.bL - cp.L * sol.x;
  const double scale = std::max(1.0, sol.x.lpNorm<Eigen::Infinity>());
  const double act_tol = 1e-6 * scale;

  std::vector<int> act_lin;
  for (int i = 0; i < slack.size(); ++i)
    if (slack[i] <= act_tol) act_lin.push_back(i);
  std::vector<int> act_cone;
  std::vector<Vector> cone_ray;
  for (size_t j = 0; j < cp.cones.size(); ++j) {
    const auto& c = cp.cones[j];
    const Vector u = c.U * sol.x - c.cu;
    const double s = c.srow.dot(sol.x) - c.cs;
    if (s - u.norm() <= act_tol && s > 1e-12) {
      act_cone.push_back(static_cast<int>(j));
      cone_ray.push_back((c.U.transpose() * u) / s - c.srow.transpose());
    }
  }

  const int p = static_cast<int>(cp.M.rows());
  const Vector target = -(cp.H * sol.x + cp.h);
  std::vector<bool> keep(act_lin.size() + act_cone.size(), true);
  for (int round = 0; round < 20; ++round) {
    int cols = p;
    for (bool k : keep) cols += k ? 1 : 0;
    if (cols == 0) {
      const double resid = target.lpNorm<Eigen::Infinity>();
      if (resid < sol.kkt_residual) sol.kkt_residual = resid;
      return;
    }
    Matrix a(cp.dim, cols);
    int c = 0;
    for (int i = 0; i < p; ++i) a.col(c++) = cp.M.row(i).transpose();
    for (size_t i = 0; i < act_lin.size(); ++i)
      if (keep[i]) a.col(c++) = cp.L.row(act_lin[i]).transpose();
    for (size_t j = 0; j < act_cone.size(); ++j)
      if (keep[act_lin.size() + j]) a.col(c++) = cone_ray[j];

    Vector theta = a.colPivHouseholderQr().solve(target);
    // Nonnegativity of the inequality multipliers: drop offenders and refit.
    bool changed = false;
    c = p;
    for (size_t i = 0; i < keep.size(); ++i) {
      if (!keep[i]) continue;
      if (theta[c] < -1e-12) {
        keep[i] = false;
        changed = true;
      }
      ++c;
    }
    if (changed) continue;

    Vector stat = -target;  // Hx + h
    c = 0;
    Vector eq = Vector::Zero(p);
    for (int i = 0; i < p; ++i) {
      eq[i] = theta[c];
      stat += cp.M.row(i).transpose() * theta[c++];
    }
    Vector lin = Vector::Zero(cp.L.rows());
    for (size_t i = 0; i < act_lin.size(); ++i)
      if (keep[i]) {
        lin[act_lin[i]] = theta[c];
        stat += cp.L.row(act_lin[i]).transpose() * theta[c++];
      }
    std::vector<CentralSolution::ConeDual> cones(cp.cones.size());
    for (size_t j = 0; j < cp.cones.size(); ++j) {
      cones[j].zu = Vector::Zero(cp.cones[j].U.rows());
      cones[j].zs = 0.0;
    }
    for (size_t j = 0; j < act_cone.size(); ++j) {
      if (!keep[act_lin.size() + j]) continue;
      const double beta = theta[c];
      stat += cone_ray[j] * theta[c++];
      const auto& cone = cp.cones[act_cone[j]];
      const Vector u = cone.U * sol.x - cone.cu;
      const double s = cone.srow.dot(sol.x) - cone.cs;
      cones[act_cone[j]].zu = beta * u / s;
      cones[act_cone[j]].zs = -beta;
    }

    // Keep the polished certificate only when it beats the barrier one.
    const double resid = stat.lpNorm<Eigen::Infinity>();
    if (resid < sol.kkt_residual) {
      sol.eq_dual = eq;
      sol.lin_dual = lin;
      sol.cone_duals = cones;
      sol.kkt_residual = resid;
    }
    return;
  }
}

NewtonResult barrier_path(const BarrierProblem& bp, Vector x, double gap_tol,
                          const std::function<bool(const Vector&)>& stop_early) {
  const double nu = std::max(bp.nu(), 1.0);
  EqProjector proj(bp.M);
  NewtonResult r{std::move(x), Vector::Zero(bp.M.rows())};
  double t = 1.0;
  while (true) {
    r = newton_center(bp, r.x, t, stop_early, proj);
    if (stop_early && stop_early(r.x)) return r;
    if (nu / t <= gap_tol) return r;
    t *= 20.0;
  }
}

Vector least_squares_equalities(const Matrix& M, const Vector& m, int dim) {
  if (M.rows() == 0) return Vector::Zero(dim);
  return M.transpose() * (M * M.transpose()).ldlt().solve(m);
}

}  // namespace

CentralSolution solve_central(const CentralProblem& cp, double tol) {
  if (cp.dim > 4000) throw std::invalid_argument("oracle is desk-scale only");
  CentralSolution sol;

  const bool has_ineq = cp.L.rows() > 0 || !cp.cones.empty();
  if (!has_ineq) {
    const int p = static_cast<int>(cp.M.rows());
    Matrix kkt = Matrix::Zero(cp.dim + p, cp.dim + p);
    kkt.topLeftCorner(cp.dim, cp.dim) = cp.H;
    if (p > 0) {
      kkt.topRightCorner(cp.dim, p) = cp.M.transpose();
      kkt.bottomLeftCorner(p, cp.dim) = cp.M;
    }
    Vector rhs(cp.dim + p);
    rhs.head(cp.dim) = -cp.h;
    rhs.tail(p) = cp.m;
    Eigen::FullPivLU<Matrix> lu(kkt);
    if (!lu.isInvertible())
      throw std::runtime_error("oracle: unbounded or degenerate problem without inequalities");
    Vector s = lu.solve(rhs);
    sol.x = s.head(cp.dim);
    sol.eq_dual = s.tail(p);
    sol.objective = central_objective(cp, sol.x);
    Vector stat = cp.H * sol.x + cp.h;
    if (p > 0) stat += cp.M.transpose() * sol.eq_dual;
    sol.kkt_residual = stat.lpNorm<Eigen::Infinity>();
    if (p > 0)
      sol.kkt_residual =
          std::max(sol.kkt_residual, (cp.M * sol.x - cp.m).lpNorm<Eigen::Infinity>());
    return sol;
  }

  BarrierProblem phase2;
  phase2.H = &cp.H;
  phase2.h = cp.h;
  phase2.M = cp.M;
  phase2.m = cp.m;
  phase2.L = cp.L;
  phase2.bL = cp.bL;
  for (const auto& c : cp.cones) phase2.cones.push_back({c.U, c.cu, c.srow, c.cs});
  phase2.dim = cp.dim;

  Vector x0 = least_squares_equalities(cp.M, cp.m, cp.dim);
  if (!phase2.strictly_feasible(x0, 1e-9)) {
    BarrierProblem ph1;
    ph1.dim = cp.dim + 1;
    ph1.h = Vector::Zero(ph1.dim);
    ph1.h[cp.dim] = 1.0;
    ph1.M = Matrix::Zero(cp.M.rows(), ph1.dim);
    ph1.M.leftCols(cp.dim) = cp.M;
    ph1.m = cp.m;
    ph1.L = Matrix::Zero(cp.L.rows() + 1, ph1.dim);
    ph1.L.topLeftCorner(cp.L.rows(), cp.dim) = cp.L;
    ph1.L.col(cp.dim).head(cp.L.rows()).setConstant(-1.0);
    ph1.L(cp.L.rows(), cp.dim) = -1.0;  // gamma >= -1 keeps phase I bounded
    ph1.bL = Vector(cp.L.rows() + 1);
    ph1.bL.head(cp.L.rows()) = cp.bL;
    ph1.bL[cp.L.rows()] = 1.0;
    for (const auto& c : cp.cones) {
      BarrierProblem::Cone ec;
      ec.U = Matrix::Zero(c.U.rows(), ph1.dim);
      ec.U.leftCols(cp.dim) = c.U;
      ec.cu = c.cu;
      ec.srow = Eigen::RowVectorXd::Zero(ph1.dim);
      ec.srow.head(cp.dim) = c.srow;
      ec.srow[cp.dim] = 1.0;
      ec.cs = c.cs;
      ph1.cones.push_back(std::move(ec));
    }
    double gamma0 = 0.0;
    if (cp.L.rows() > 0) gamma0 = std::max(gamma0, (cp.L * x0 - cp.bL).maxCoeff());
    for (const auto& c : cp.cones)
      gamma0 = std::max(gamma0, (c.U * x0 - c.cu).norm() - (c.srow.dot(x0) - c.cs));
    Vector z0(ph1.dim);
    z0.head(cp.dim) = x0;
    z0[cp.dim] = gamma0 + 1.0;
    auto found = [&](const Vector& z) { return z[cp.dim] < -1e-7; };
    NewtonResult ph1_result = barrier_path(ph1, z0, 1e-10, found);
    if (ph1_result.x[cp.dim] >= 0.0) {
      sol.feasible = false;
      sol.x = ph1_result.x.head(cp.dim);
      return sol;
    }
    x0 = ph1_result.x.head(cp.dim);
  }

  NewtonResult res = barrier_path(phase2, x0, tol, nullptr);
  sol.x = res.x;
  sol.eq_dual = res.eq_dual;
  sol.objective = central_objective(cp, sol.x);

  const double nu = std::max(phase2.nu(), 1.0);
  const double t = final_t(nu, tol);
  Vector slack = cp.bL - cp.L * sol.x;
  sol.lin_dual = Vector(cp.L.rows());
  for (int i = 0; i < cp.L.rows(); ++i) sol.lin_dual[i] = 1.0 / (t * slack[i]);
  for (const auto& c : cp.cones) {
    const Vector u = c.U * sol.x - c.cu;
    const double s = c.srow.dot(sol.x) - c.cs;
    const double r = s * s - u.squaredNorm();
    CentralSolution::ConeDual cd;
    cd.zu = (2.0 / (t * r)) * u;
    cd.zs = -(2.0 / (t * r)) * s;
    sol.cone_duals.push_back(std::move(cd));
  }

  Vector stat = cp.H * sol.x + cp.h;
  if (cp.M.rows() > 0) stat += cp.M.transpose() * sol.eq_dual;
  if (cp.L.rows() > 0) stat += cp.L.transpose() * sol.lin_dual;
  for (size_t j = 0; j < cp.cones.size(); ++j) {
    stat += cp.cones[j].U.transpose() * sol.cone_duals[j].zu;
    stat += cp.cones[j].srow.transpose() * sol.cone_duals[j].zs;
  }
  sol.kkt_residual = std::max(stat.lpNorm<Eigen::Infinity>(), nu / t);

  polish_duals(cp, sol);

  // Fold in primal feasibility and complementarity for the final certificate.
  double comp = 0.0;
  const Vector final_slack = cp.bL - cp.L * sol.x;
  for (int i = 0; i < final_slack.size(); ++i)
    comp = std::max(comp, std::abs(sol.lin_dual[i] * final_slack[i]));
  for (size_t j = 0; j < cp.cones.size(); ++j) {
    const auto& c = cp.cones[j];
    const Vector u = c.U * sol.x - c.cu;
    const double s = c.srow.dot(sol.x) - c.cs;
    comp = std::max(comp,
                    std::abs(sol.cone_duals[j].zu.dot(u) + sol.cone_duals[j].zs * s));
  }
  sol.kkt_residual = std::max(sol.kkt_residual, comp);
  if (cp.M.rows() > 0)
    sol.kkt_residual =
        std::max(sol.kkt_residual, (cp.M * sol.x - cp.m).lpNorm<Eigen::Infinity>());
  sol.kkt_residual = std::max(sol.kkt_residual, std::max(0.0, central_violation(cp, sol.x)));
  return sol;
}

}  // namespace smpc
