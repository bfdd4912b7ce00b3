#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "fixtures.hpp"
#include "smpc/admm.hpp"
#include "smpc/oracle.hpp"

using namespace smpc;
using namespace smpc::testing;

namespace {

struct Uniform {
  std::mt19937_64 eng;
  explicit Uniform(uint64_t seed) : eng(seed) {}
  double operator()(double lo, double hi) {
    return lo + (eng() >> 11) * 0x1.0p-53 * (hi - lo);
  }
};

}  // namespace

TEST_CASE("unconstrained strictly convex quadratic") {
  CentralProblem cp;
  cp.dim = 2;
  cp.H = Matrix::Zero(2, 2);
  cp.H << 2, 0, 0, 4;
  cp.h = Vector(2);
  cp.h << -2, -8;
  cp.M = Matrix(0, 2);
  cp.m = Vector(0);
  cp.L = Matrix(0, 2);
  cp.bL = Vector(0);
  CentralSolution s = solve_central(cp);
  CHECK(s.x[0] == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(s.x[1] == doctest::Approx(2.0).epsilon(1e-10));
  CHECK(s.kkt_residual <= 1e-10);
}

TEST_CASE("box-constrained scalar with interior optimum") {
  CentralProblem cp;
  cp.dim = 1;
  cp.H = Matrix::Constant(1, 1, 1.0);
  cp.h = Vector::Constant(1, -3.0);  // optimum at 3
  cp.M = Matrix(0, 1);
  cp.m = Vector(0);
  cp.L = Matrix(2, 1);
  cp.L << 1, -1;
  cp.bL = Vector(2);
  cp.bL << 5, 5;  // -5 <= x <= 5
  CentralSolution s = solve_central(cp, 1e-9);
  CHECK(s.x[0] == doctest::Approx(3.0).epsilon(1e-6));
  CHECK(s.kkt_residual <= 1e-7);
}

TEST_CASE("active bound") {
  CentralProblem cp;
  cp.dim = 1;
  cp.H = Matrix::Constant(1, 1, 1.0);
  cp.h = Vector::Constant(1, -4.0);  // unconstrained optimum 4
  cp.M = Matrix(0, 1);
  cp.m = Vector(0);
  cp.L = Matrix::Constant(1, 1, 1.0);
  cp.bL = Vector::Constant(1, 2.0);  // x <= 2
  CentralSolution s = solve_central(cp, 1e-9);
  CHECK(s.x[0] == doctest::Approx(2.0).epsilon(1e-6));
  // The bound's multiplier is ~2 at the optimum.
  CHECK(s.lin_dual[0] == doctest::Approx(2.0).epsilon(1e-4));
}

TEST_CASE("random feasible SOC-QP satisfies the KKT conditions") {
  Uniform u(31);
  const int n = 10;
  Matrix a(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) a(i, j) = u(-1, 1);
  CentralProblem cp;
  cp.dim = n;
  cp.H = a.transpose() * a + 0.1 * Matrix::Identity(n, n);
  cp.h = Vector(n);
  for (int i = 0; i < n; ++i) cp.h[i] = u(-2, 2);

  Vector xf(n);
  for (int i = 0; i < n; ++i) xf[i] = u(-1, 1);

  cp.M = Matrix(2, n);
  for (int c = 0; c < n; ++c) {
    cp.M(0, c) = u(-1, 1);
    cp.M(1, c) = u(-1, 1);
  }
  cp.m = cp.M * xf;

  cp.L = Matrix(6, n);
  cp.bL = Vector(6);
  for (int r = 0; r < 6; ++r) {
    for (int c = 0; c < n; ++c) cp.L(r, c) = u(-1, 1);
    cp.bL[r] = cp.L.row(r).dot(xf) + u(0.1, 2.0);  // strictly feasible at xf
  }

  for (int j = 0; j < 2; ++j) {
    CentralProblem::Cone cone;
    cone.U = Matrix(3, n);
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < n; ++c) cone.U(r, c) = u(-1, 1);
    cone.cu = cone.U * xf - Vector::Constant(3, u(-0.5, 0.5));
    cone.srow = Eigen::RowVectorXd(n);
    for (int c = 0; c < n; ++c) cone.srow[c] = u(-1, 1);
    cone.cs = cone.srow.dot(xf) - ((cone.U * xf - cone.cu).norm() + u(0.2, 1.0));
    cp.cones.push_back(std::move(cone));
  }

  CentralSolution s = solve_central(cp, 1e-9);
  REQUIRE(s.feasible);
  CHECK(s.kkt_residual <= 1e-8);
  CHECK(central_violation(cp, s.x) <= 1e-9);
  // Dual feasibility of the reported multipliers.
  for (int i = 0; i < s.lin_dual.size(); ++i) CHECK(s.lin_dual[i] >= 0.0);
  for (const auto& cd : s.cone_duals) CHECK(cd.zu.norm() <= -cd.zs + 1e-12);
  // Any feasible point sits above the reported optimum.
  CHECK(central_objective(cp, xf) >= s.objective - 1e-6);
}

TEST_CASE("infeasible problem is reported") {
  CentralProblem cp;
  cp.dim = 1;
  cp.H = Matrix::Constant(1, 1, 1.0);
  cp.h = Vector::Zero(1);
  cp.M = Matrix(0, 1);
  cp.m = Vector(0);
  cp.L = Matrix(2, 1);
  cp.L << 1, -1;
  cp.bL = Vector(2);
  cp.bL << 1, -2;  // x <= 1 and x >= 2
  CentralSolution s = solve_central(cp, 1e-9);
  CHECK(!s.feasible);
}

TEST_CASE("stack_central identifies copies with owners") {
  NetworkFile file = load_fig();
  Partition two = partition_network(file.network, file.partition);
  Partition one = single_partition(file.network);
  HorizonInputs in = make_inputs(file.network, 1, true);

  auto agents = build_all_agents(file.network, two, in);
  auto central = build_all_agents(file.network, one, in);
  CentralProblem cp = stack_central(agents);

  int sum_zeta = 0, copies = 0;
  for (const auto& a : agents) {
    sum_zeta += a.layout.dim();
    for (const auto& [j, pm] : a.P) copies += static_cast<int>(pm.rows());
  }
  CHECK(cp.dim == sum_zeta - copies);
  CHECK(cp.dim == central[0].layout.dim());

  // Objective on a feasible stacked point equals the distributed objective.
  Uniform u(7);
  std::vector<Vector> xs;
  for (const auto& a : agents) {
    Vector x(a.layout.dim());
    for (int i = 0; i < x.size(); ++i) x[i] = u(0, 20);
    xs.push_back(std::move(x));
  }
  // Make the copies consistent with their owners so the point is coupled.
  for (size_t i = 0; i < agents.size(); ++i)
    for (const auto& [j, pm] : agents[i].P) {
      Vector owner_vals = agents[j].Q.at(static_cast<int>(i)) * xs[j];
      // x_copy entries solve P x = owner_vals; P selects single coordinates.
      for (int k = 0; k < pm.outerSize(); ++k)
        for (SpMat::InnerIterator it(pm, k); it; ++it) xs[i][it.col()] = owner_vals[it.row()];
    }
  const double distributed = total_objective(agents, xs);
  CHECK(central_objective(cp, gather_central(cp, xs)) ==
        doctest::Approx(distributed).epsilon(1e-12));
}

TEST_CASE("single-agent stack is the identity transform") {
  Network net = make_single_junction();
  Partition part = single_partition(net);
  HorizonInputs in = make_inputs(net, 2, true);
  auto agents = build_all_agents(net, part, in);
  CentralProblem cp = stack_central(agents);
  CHECK(cp.dim == agents[0].layout.dim());
  CHECK((cp.H - Matrix(agents[0].H)).cwiseAbs().maxCoeff() == 0.0);
  CHECK((cp.m - agents[0].m).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("central solve agrees across the problem dump") {
  Network net = make_single_junction();
  Partition part = single_partition(net);
  HorizonInputs in = make_inputs(net, 2, true);
  auto agents = build_all_agents(net, part, in);
  AgentProblem reloaded = load_agent_problem(dump_agent_problem(agents[0]));

  CentralSolution a = solve_central(stack_central(agents), 1e-9);
  CentralSolution b = solve_central(stack_central({reloaded}), 1e-9);
  REQUIRE(a.feasible);
  REQUIRE(b.feasible);
  CHECK(a.objective == doctest::Approx(b.objective).epsilon(1e-10));
}

TEST_CASE("oracle certifies distributed solutions from below") {
  NetworkFile file = load_two_junction();
  Partition part = partition_network(file.network, file.partition);
  HorizonInputs in = make_inputs(file.network, 2, true);
  auto problems = build_all_agents(file.network, part, in);

  SolveOptions opts;
  opts.tol = 1e-7;
  SolveResult res = solve(problems, opts);
  REQUIRE(res.stats.converged);

  CentralProblem cp = stack_central(problems);
  CentralSolution oracle = solve_central(cp, 1e-9);
  REQUIRE(oracle.feasible);
  CHECK(total_objective(problems, res.x) >= oracle.objective - 1e-5);
}
