#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include <Eigen/Eigenvalues>

#include "fixtures.hpp"
#include "smpc/assembly.hpp"

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

// Direct evaluation of the expected cost from the moments, bypassing the
// assembled (H, h): sum of alpha*(nhat^2 + fhat' Sigma fhat) + beta*nhat
// - gamma*qhat over owned links and steps.
double direct_expected_cost(const Network& net, const VariableLayout& layout,
                            const HorizonInputs& in, const Vector& x) {
  double total = 0.0;
  const int K = in.horizon;
  for (const auto& z : layout.state_links()) {
    const auto& link = net.link(z);
    const double alpha = in.weights.alpha(link);
    const auto& ups = net.upstream_neighbors(z);
    for (int k = 0; k < K; ++k) {
      const double nhat = x[layout.state_col(z, k)];
      total += alpha * nhat * nhat + in.weights.beta * nhat;
      Matrix sigma = build_sigma1(ups, z, k, in.params);
      Vector fhat(sigma.rows());
      int slot = 0;
      for (int l = 0; l <= k; ++l)
        for (const auto& w : ups) fhat[slot++] = x[layout.flow_col(w, l)];
      fhat[slot] = 1.0;
      total += alpha * fhat.dot(sigma * fhat);
    }
  }
  for (const auto& z : layout.flow_links())
    for (int k = 0; k < K; ++k) total -= in.weights.gamma * x[layout.flow_col(z, k)];
  return total;
}

}  // namespace

TEST_CASE("layout dimensions and audit formulas on the four-junction network") {
  NetworkFile file = load_fig();
  Partition part = partition_network(file.network, file.partition);
  const int s1 = part.subnet_of_junction("J1");
  const int K = 3;
  HorizonInputs in = make_inputs(file.network, K, true);

  AgentProblem p = build_agent_problem(file.network, part, s1, in);
  const int zeta1 = 9;   // internal links of S1
  const int zeta2 = 3;   // its source links
  const int zeta3 = 4;   // boundary links toward S2
  const int zeta4 = 2;   // boundary links from S2
  const int zeta5 = 7;   // phases
  const int zeta6 = 2;   // junctions
  CHECK(p.layout.dim() == K * (zeta1 + zeta3 + zeta1 + zeta4 + zeta5) + K * zeta3);
  CHECK(p.M.rows() == K * (zeta1 + zeta3));

  // Linear block: nonnegativity + per-step rows; paper's block sizes.
  const int expect_linear = p.layout.dim() + (2 * (zeta1 + zeta4) + zeta5 + zeta6) +
                            (K - 1) * ((zeta1 + zeta4) + 2 * zeta2 + zeta5 + zeta6);
  CHECK(p.linear_rows == expect_linear);

  // One availability cone per step pair plus one capacity cone per step for
  // each non-source link with a state here.
  const int nonsource = zeta1 + zeta3 - zeta2;
  CHECK(static_cast<int>(p.omega.segments.size()) == 1 + nonsource * (2 * K - 1));
  CHECK(p.omega.dim() == p.D.rows());
  CHECK(p.d.size() == p.D.rows());
}

TEST_CASE("assembled cost matches direct expected-cost evaluation") {
  NetworkFile file = load_two_junction();
  Network& net = file.network;
  Partition part = single_partition(net);
  HorizonInputs in = make_inputs(net, 3, true);
  // A correlation exercises the off-diagonal path too.
  in.params.set_correlation(ParamKey::exo("a1", 0), ParamKey::exo("a1", 1), 0.4);

  AgentProblem p = build_agent_problem(net, part, 0, in);
  Uniform u(99);
  for (int trial = 0; trial < 20; ++trial) {
    Vector x(p.layout.dim());
    for (int i = 0; i < x.size(); ++i) x[i] = u(0.0, 30.0);
    const double direct = direct_expected_cost(net, p.layout, in, x);
    const double assembled = objective_value(p, x);
    CHECK(assembled == doctest::Approx(direct).epsilon(1e-10));
  }
}

TEST_CASE("beta and gamma appear as +-0.3 in the linear cost") {
  Network net = make_single_junction();
  Partition part = single_partition(net);
  HorizonInputs in = make_inputs(net, 1, false);
  AgentProblem p = build_agent_problem(net, part, 0, in);
  CHECK(p.h[p.layout.state_col("in1", 0)] == doctest::Approx(0.3));
  CHECK(p.h[p.layout.flow_col("in1", 0)] == doctest::Approx(-0.3));
}

TEST_CASE("cross-flow cost terms follow the stacked covariance") {
  // Two upstream flows share one downstream link; a supplied correlation
  // between their turning ratios must appear as 2*alpha*Sigma_ab in H.
  Network net = make_single_junction();
  Partition part = single_partition(net);
  HorizonInputs in = make_inputs(net, 1, true);
  const double v = 0.002, rho = 0.5;
  in.params.set_correlation(ParamKey::turn("in1", "out", 0), ParamKey::turn("in2", "out", 0),
                            rho);
  AgentProblem p = build_agent_problem(net, part, 0, in);
  const double alpha = in.weights.alpha(net.link("out"));
  const int c1 = p.layout.flow_col("in1", 0);
  const int c2 = p.layout.flow_col("in2", 0);
  CHECK(Matrix(p.H)(c1, c2) == doctest::Approx(2.0 * alpha * rho * v).epsilon(1e-12));
}

TEST_CASE("dynamics rows encode the conservation law") {
  Network net = make_single_junction();
  Partition part = single_partition(net);
  HorizonInputs in = make_inputs(net, 2, false);
  AgentProblem p = build_agent_problem(net, part, 0, in);

  // Source link row at k=0 reads nhat + qhat = n(t) + e.
  Vector x = Vector::Zero(p.layout.dim());
  x[p.layout.state_col("in1", 0)] = 7.0;
  x[p.layout.flow_col("in1", 0)] = 5.0;
  Vector r = p.M * x;
  bool found = false;
  for (int i = 0; i < p.m.size(); ++i) {
    if (r[i] == doctest::Approx(12.0) && p.m[i] == doctest::Approx(36.0 + 15.0)) found = true;
  }
  CHECK(found);
  CHECK_THROWS_WITH_AS(
      [&] {
        HorizonInputs bad = in;
        bad.measured.erase("in1");
        build_agent_problem(net, part, 0, bad);
      }(),
      doctest::Contains("measured"), std::invalid_argument);
}

TEST_CASE("boundary dynamics substitute the copy variable") {
  NetworkFile file = load_fig();
  Partition part = partition_network(file.network, file.partition);
  const int s1 = part.subnet_of_junction("J1");
  HorizonInputs in = make_inputs(file.network, 1, false);
  AgentProblem p = build_agent_problem(file.network, part, s1, in);

  // Link 10 leaves S1 toward S2: its row must carry +1 on the copy column.
  const int copy = p.layout.copy_col("10", 0);
  CHECK(p.layout.flow_or_copy_col("10", 0) == copy);
  Vector probe = Vector::Zero(p.layout.dim());
  probe[copy] = 1.0;
  Vector r = p.M * probe;
  CHECK(r.cwiseAbs().maxCoeff() == doctest::Approx(1.0));
}

TEST_CASE("chance factor scales the cone rows exactly") {
  Network net = make_single_junction();
  Partition part = single_partition(net);
  HorizonInputs in = make_inputs(net, 2, true);
  AgentProblem p02 = build_agent_problem(net, part, 0, in);
  in.epsilon = 0.5;  // factor 1
  AgentProblem p05 = build_agent_problem(net, part, 0, in);

  REQUIRE(p02.omega.segments.size() == p05.omega.segments.size());
  REQUIRE(p02.omega.segments.size() > 1);
  // Compare the leading rows of the first cone block: ratio must be exactly 2.
  Matrix d02 = Matrix(p02.D), d05 = Matrix(p05.D);
  int off = p02.linear_rows;
  const int lead_rows = p02.omega.segments[1].dim - 1;
  for (int r = 0; r < lead_rows; ++r)
    for (int c = 0; c < d02.cols(); ++c)
      if (d05(off + r, c) != 0.0)
        CHECK(d02(off + r, c) / d05(off + r, c) == doctest::Approx(2.0).epsilon(1e-14));
}

TEST_CASE("zero variances collapse every cone to linear rows") {
  Network net = make_single_junction();
  Partition part = single_partition(net);
  HorizonInputs in = make_inputs(net, 3, false);
  AgentProblem p = build_agent_problem(net, part, 0, in);
  CHECK(p.omega.segments.size() == 1);
  CHECK(p.omega.segments[0].kind == ConeSegment::Kind::Box);
  CHECK(p.linear_rows == p.D.rows());
}

TEST_CASE("junction budget row carries T - L") {
  NetworkFile file = load_fig();
  Partition part = single_partition(file.network);
  HorizonInputs in = make_inputs(file.network, 1, false);
  AgentProblem p = build_agent_problem(file.network, part, 0, in);

  // J2 has four phases: look for a row summing exactly those splits.
  std::vector<int> j2_cols;
  for (const auto& ph : file.network.junction("J2").phases)
    j2_cols.push_back(p.layout.split_col(ph, 0));
  Matrix d = Matrix(p.D);
  bool found = false;
  for (int r = 0; r < p.linear_rows; ++r) {
    double on = 0.0, offsum = 0.0;
    for (int c = 0; c < d.cols(); ++c) {
      const bool is_j2 = std::find(j2_cols.begin(), j2_cols.end(), c) != j2_cols.end();
      (is_j2 ? on : offsum) += std::abs(d(r, c));
    }
    if (on == doctest::Approx(4.0) && offsum == 0.0) {
      CHECK(p.d[r] == doctest::Approx(56.0));
      found = true;
    }
  }
  CHECK(found);
}

TEST_CASE("coupling selectors") {
  NetworkFile file = load_fig();
  Partition part = partition_network(file.network, file.partition);
  const int s1 = part.subnet_of_junction("J1");
  const int s2 = part.subnet_of_junction("J3");
  HorizonInputs in = make_inputs(file.network, 1, false);
  AgentProblem p1 = build_agent_problem(file.network, part, s1, in);
  AgentProblem p2 = build_agent_problem(file.network, part, s2, in);

  CHECK(p1.P.at(s2).rows() == 4);  // links 10, 11, 13, 14 at K = 1
  CHECK(p2.Q.at(s1).rows() == 4);
  CHECK(p1.Q.at(s2).rows() == 2);  // links 12, 15

  // P x recovers exactly the stored copies.
  Uniform u(5);
  Vector x(p1.layout.dim());
  for (int i = 0; i < x.size(); ++i) x[i] = u(-3, 3);
  Vector sel = p1.P.at(s2) * x;
  int r = 0;
  for (const auto& z : p1.layout.copies_toward(s2))
    CHECK(sel[r++] == x[p1.layout.copy_col(z, 0)]);

  // Row order agreement between P_12 and Q_21, link by link.
  CHECK(p1.layout.copies_toward(s2) == p2.layout.owned_for(s1));
}

TEST_CASE("no boundary links means empty coupling") {
  Network net = make_single_junction();
  Partition part = single_partition(net);
  HorizonInputs in = make_inputs(net, 1, false);
  AgentProblem p = build_agent_problem(net, part, 0, in);
  CHECK(p.P.empty());
  CHECK(p.Q.empty());
}

TEST_CASE("compute_eta") {
  SpMat eye(3, 3);
  eye.setIdentity();
  CHECK(compute_eta(eye, {}, 3) == doctest::Approx(1.01).epsilon(1e-9));

  SpMat diag(2, 2);
  diag.insert(0, 0) = 1.0;
  diag.insert(1, 1) = 2.0;
  diag.makeCompressed();
  CHECK(compute_eta(diag, {}, 2) == doctest::Approx(4.04).epsilon(1e-6));

  NetworkFile file = load_fig();
  Partition part = partition_network(file.network, file.partition);
  HorizonInputs in = make_inputs(file.network, 2, true);
  AgentProblem p = build_agent_problem(file.network, part, 0, in);
  Matrix ata = Matrix(p.D).transpose() * Matrix(p.D);
  for (const auto& [j, pm] : p.P) ata += Matrix(pm).transpose() * Matrix(pm);
  for (const auto& [j, qm] : p.Q) ata += Matrix(qm).transpose() * Matrix(qm);
  Eigen::SelfAdjointEigenSolver<Matrix> eig(ata, Eigen::EigenvaluesOnly);
  const double lmax = eig.eigenvalues().maxCoeff();
  CHECK(p.eta == doctest::Approx(1.01 * lmax).epsilon(0.01));
  CHECK(p.eta > lmax);
}

TEST_CASE("problem dump round trip") {
  Network net = make_single_junction();
  Partition part = single_partition(net);
  HorizonInputs in = make_inputs(net, 2, true);
  AgentProblem p = build_agent_problem(net, part, 0, in);
  AgentProblem q = load_agent_problem(dump_agent_problem(p));

  Uniform u(17);
  Vector x(p.layout.dim());
  for (int i = 0; i < x.size(); ++i) x[i] = u(0, 10);
  CHECK(0.5 * x.dot(q.H * x) + q.h.dot(x) + q.constant ==
        doctest::Approx(objective_value(p, x)).epsilon(1e-14));
  CHECK((Matrix(p.D) - Matrix(q.D)).cwiseAbs().maxCoeff() == 0.0);
  CHECK(q.omega.dim() == p.omega.dim());
  CHECK(q.eta == p.eta);
}

TEST_CASE("infeasibility precheck flags capacity certificates") {
  Network net = make_single_junction();
  HorizonInputs in = make_inputs(net, 1, true);
  CHECK(infeasibility_precheck(net, in).empty());

  HorizonInputs over = in;
  over.measured["in1"] = 1000.0;
  auto diag = infeasibility_precheck(net, over);
  REQUIRE(!diag.empty());
  CHECK(diag[0].find("capacity") != std::string::npos);

  // A negative robust discharge bound is repaired, not fatal: the first-step
  // row clamps at zero so the only admissible outflow is none.
  HorizonInputs starved = in;
  starved.measured["in2"] = 0.0;
  starved.params.set_exo("in2", 0, {0.0, 25.0});  // 2-sigma margin of 10 > count
  CHECK(infeasibility_precheck(net, starved).empty());
  Partition part = single_partition(net);
  AgentProblem p = build_agent_problem(net, part, 0, starved);
  Matrix d = Matrix(p.D);
  const int col = p.layout.flow_col("in2", 0);
  bool clamped = false;
  for (int r = 0; r < p.linear_rows; ++r) {
    if (d(r, col) == 1.0 && d.row(r).cwiseAbs().sum() == 1.0 && p.d[r] == 0.0 &&
        r >= p.layout.dim())
      clamped = true;
  }
  CHECK(clamped);
}
