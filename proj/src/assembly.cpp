#include "smpc/assembly.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <Eigen/QR>
#include <json.hpp>

namespace smpc {

namespace {
using Triplet = Eigen::Triplet<double>;

SpMat from_triplets(int rows, int cols, const std::vector<Triplet>& ts) {
  SpMat m(rows, cols);
  m.setFromTriplets(ts.begin(), ts.end());
  m.makeCompressed();
  return m;
}
}  // namespace

VariableLayout::VariableLayout(const Network& net, const Partition& part, int agent,
                               int horizon)
    : agent_(agent), horizon_(horizon) {
  if (horizon < 1) throw std::invalid_argument("horizon must be >= 1");
  junctions_ = part.subnetworks.at(agent).junctions;
  local_sources_ = part.source_links.at(agent);
  neighbors_ = part.neighbors.at(agent);

  state_links_ = part.internal_links.at(agent);
  for (int j : neighbors_)
    for (const auto& z : part.boundary_links(agent, j)) state_links_.push_back(z);

  flow_links_ = part.internal_links.at(agent);
  for (int j : neighbors_)
    for (const auto& z : part.boundary_links(j, agent)) flow_links_.push_back(z);

  for (const auto& v : junctions_)
    for (const auto& p : net.junction(v).phases) split_phases_.push_back(p);

  for (int i = 0; i < static_cast<int>(state_links_.size()); ++i)
    state_index_[state_links_[i]] = i;
  for (int i = 0; i < static_cast<int>(flow_links_.size()); ++i)
    flow_index_[flow_links_[i]] = i;
  for (int i = 0; i < static_cast<int>(split_phases_.size()); ++i)
    split_index_[split_phases_[i]] = i;

  per_step_ = static_cast<int>(state_links_.size() + flow_links_.size() + split_phases_.size());
  copy_start_ = per_step_ * horizon_;
  int off = 0;
  for (int j : neighbors_) {
    copies_toward_[j] = part.boundary_links(agent, j);
    owned_for_[j] = part.boundary_links(j, agent);
    copy_block_start_[j] = off;
    for (const auto& z : copies_toward_[j]) {
      copy_index_[z] = copy_start_ + off;
      off += horizon_;
    }
  }
  dim_ = copy_start_ + off;
}

int VariableLayout::state_col(const LinkId& z, int k) const {
  auto it = state_index_.find(z);
  if (it == state_index_.end() || k < 0 || k >= horizon_)
    throw std::out_of_range("no state variable for link " + z);
  return k * per_step_ + it->second;
}

int VariableLayout::flow_col(const LinkId& z, int k) const {
  auto it = flow_index_.find(z);
  if (it == flow_index_.end() || k < 0 || k >= horizon_)
    throw std::out_of_range("no flow variable for link " + z);
  return k * per_step_ + static_cast<int>(state_links_.size()) + it->second;
}

int VariableLayout::split_col(const PhaseId& p, int k) const {
  auto it = split_index_.find(p);
  if (it == split_index_.end() || k < 0 || k >= horizon_)
    throw std::out_of_range("no split variable for phase " + p);
  return k * per_step_ + static_cast<int>(state_links_.size() + flow_links_.size()) +
         it->second;
}

int VariableLayout::copy_col(const LinkId& z, int k) const {
  auto it = copy_index_.find(z);
  if (it == copy_index_.end() || k < 0 || k >= horizon_)
    throw std::out_of_range("no copy variable for link " + z);
  return it->second + k;
}

int VariableLayout::flow_or_copy_col(const LinkId& z, int k) const {
  return flow_index_.count(z) ? flow_col(z, k) : copy_col(z, k);
}

const std::vector<LinkId>& VariableLayout::copies_toward(int neighbor) const {
  return copies_toward_.at(neighbor);
}
const std::vector<LinkId>& VariableLayout::owned_for(int neighbor) const {
  return owned_for_.at(neighbor);
}

std::string VariableLayout::describe(int col) const {
  if (col >= copy_start_) {
    for (const auto& [z, base] : copy_index_)
      if (col >= base && col < base + horizon_)
        return "qcopy[" + z + "," + std::to_string(col - base) + "]";
    return "copy[?]";
  }
  const int k = col / per_step_;
  int r = col % per_step_;
  if (r < static_cast<int>(state_links_.size()))
    return "n[" + state_links_[r] + "," + std::to_string(k) + "]";
  r -= static_cast<int>(state_links_.size());
  if (r < static_cast<int>(flow_links_.size()))
    return "q[" + flow_links_[r] + "," + std::to_string(k) + "]";
  r -= static_cast<int>(flow_links_.size());
  return "g[" + split_phases_[r] + "," + std::to_string(k) + "]";
}

VariableLayout build_layout(const Network& net, const Partition& part, int agent, int horizon) {
  return VariableLayout(net, part, agent, horizon);
}

void build_cost(const Network& net, const Partition& part, const VariableLayout& layout,
                const HorizonInputs& inputs, SpMat& H, Vector& h, double& constant) {
  const int K = inputs.horizon;
  std::vector<Triplet> hs;
  h = Vector::Zero(layout.dim());
  constant = 0.0;

  for (const auto& z : layout.state_links()) {
    const double alpha = inputs.weights.alpha(net.link(z));
    for (int k = 0; k < K; ++k) {
      const int c = layout.state_col(z, k);
      hs.emplace_back(c, c, 2.0 * alpha);
      h[c] += inputs.weights.beta;
    }
  }
  for (const auto& z : layout.flow_links())
    for (int k = 0; k < K; ++k) h[layout.flow_col(z, k)] -= inputs.weights.gamma;

  // Variance of the predicted states: alpha * fhat' Sigma1 fhat per link/step.
  for (const auto& z : layout.state_links()) {
    const auto& link = net.link(z);
    const double alpha = inputs.weights.alpha(link);
    const auto& ups = net.upstream_neighbors(z);
    if (ups.empty()) {
      for (int k = 0; k < K; ++k)
        constant += alpha * build_sigma1(ups, z, k, inputs.params)(0, 0);
      continue;
    }
    const int nu = static_cast<int>(ups.size());
    for (int k = 0; k < K; ++k) {
      Matrix sigma = build_sigma1(ups, z, k, inputs.params);
      const int nvar = (k + 1) * nu;
      std::vector<int> cols(nvar);
      for (int l = 0; l <= k; ++l)
        for (int u = 0; u < nu; ++u) cols[l * nu + u] = layout.flow_col(ups[u], l);
      for (int a = 0; a < nvar; ++a) {
        for (int b = 0; b < nvar; ++b) {
          const double v = sigma(a, b);
          if (v != 0.0) hs.emplace_back(cols[a], cols[b], 2.0 * alpha * v);
        }
        const double cross = sigma(a, nvar);
        if (cross != 0.0) h[cols[a]] += 2.0 * alpha * cross;
      }
      constant += alpha * sigma(nvar, nvar);
    }
  }
  H = from_triplets(layout.dim(), layout.dim(), hs);
}

void build_dynamics(const Network& net, const Partition& part, const VariableLayout& layout,
                    const HorizonInputs& inputs, SpMat& M, Vector& m) {
  const int K = inputs.horizon;
  const int rows = K * static_cast<int>(layout.state_links().size());
  std::vector<Triplet> ts;
  m = Vector::Zero(rows);
  int r = 0;
  for (int k = 0; k < K; ++k) {
    for (const auto& z : layout.state_links()) {
      ts.emplace_back(r, layout.state_col(z, k), 1.0);
      if (k > 0) ts.emplace_back(r, layout.state_col(z, k - 1), -1.0);
      for (const auto& w : net.upstream_neighbors(z))
        ts.emplace_back(r, layout.flow_col(w, k), -inputs.params.turn(w, z, k).mean);
      ts.emplace_back(r, layout.flow_or_copy_col(z, k), 1.0);
      const double e = inputs.params.exo(z, k).mean;
      if (k == 0) {
        auto it = inputs.measured.find(z);
        if (it == inputs.measured.end())
          throw std::invalid_argument("missing measured count for link " + z);
        m[r] = it->second + e;
      } else {
        m[r] = e;
      }
      ++r;
    }
  }
  M = from_triplets(rows, layout.dim(), ts);
}

namespace {

struct SocBlock {
  std::vector<Triplet> rows;  // local row indices within the block
  std::vector<double> d;
  int nrows = 0;
};

// Leading rows cf * G[:, :-1] on the stacked upstream flows; the constant
// column of G lands in d with opposite sign.
void append_factor_rows(SocBlock& blk, const Matrix& g, double cf,
                        const std::vector<int>& cols) {
  const int nvar = static_cast<int>(cols.size());
  for (int r = 0; r < g.rows(); ++r) {
    for (int c = 0; c < nvar; ++c)
      if (g(r, c) != 0.0) blk.rows.emplace_back(blk.nrows, cols[c], cf * g(r, c));
    blk.d.push_back(-cf * g(r, nvar));
    blk.nrows++;
  }
}

}  // namespace

void build_inequalities(const Network& net, const Partition& part,
                        const VariableLayout& layout, const HorizonInputs& inputs, SpMat& D,
                        Vector& d, ConeProduct& omega, int& linear_rows) {
  const int K = inputs.horizon;
  const double cf = chance_factor(inputs.epsilon);
  std::vector<Triplet> lin;
  std::vector<double> lin_d;
  auto linear_row = [&](const std::vector<std::pair<int, double>>& coeffs, double rhs) {
    const int r = static_cast<int>(lin_d.size());
    for (auto [c, v] : coeffs) lin.emplace_back(r, c, v);
    lin_d.push_back(rhs);
  };

  // Nonnegativity of every variable: -x <= 0.
  for (int c = 0; c < layout.dim(); ++c) linear_row({{c, -1.0}}, 0.0);

  // Standard deviation of the accumulated exogenous difference up to a step.
  auto cum_std = [&](const LinkId& z, int upto) {
    return std::sqrt(build_sigma1({}, z, upto, inputs.params)(0, 0));
  };

  for (int k = 0; k < K; ++k) {
    if (k == 0) {
      // First-step discharge bound for every link with a flow variable here.
      // The row descends from the k=0 chance constraint, so the margin is
      // sqrt((1-eps)/eps)*std(e_0); a negative bound would contradict q >= 0
      // outright, so it clamps at zero (zero green is the robust decision).
      for (const auto& z : layout.flow_links()) {
        auto it = inputs.measured.find(z);
        if (it == inputs.measured.end())
          throw std::invalid_argument("missing measured count for link " + z);
        const auto e0 = inputs.params.exo(z, 0);
        linear_row({{layout.flow_col(z, 0), 1.0}},
                   std::max(0.0, it->second + e0.mean - cf * std::sqrt(e0.variance)));
      }
    } else {
      for (const auto& z : layout.local_sources()) {
        const double rhs = inputs.params.exo(z, k).mean - cf * cum_std(z, k);
        linear_row({{layout.flow_col(z, k), 1.0}, {layout.state_col(z, k - 1), -1.0}}, rhs);
      }
    }
    if (k <= K - 2) {
      for (const auto& z : layout.local_sources()) {
        double rhs = net.link(z).capacity - inputs.params.exo(z, k + 1).mean -
                     cf * cum_std(z, k + 1);
        // Zero-flow floor: a blocked link drifts to n(t) + sum of exogenous
        // means; capacity rows must leave that trajectory admissible or the
        // feasible set empties whenever a link is already overfull.
        double floor = inputs.measured.at(z);
        for (int l = 0; l <= k; ++l) floor += inputs.params.exo(z, l).mean;
        linear_row({{layout.state_col(z, k), 1.0}}, std::max(rhs, floor));
      }
    }
    for (const auto& z : layout.flow_links()) {
      const auto& link = net.link(z);
      if (net.internal(link.downstream)) {
        if (net.phases_granting(z).empty())
          throw std::invalid_argument("link " + z + " has no phase granting green time");
        std::vector<std::pair<int, double>> coeffs{{layout.flow_col(z, k), 1.0}};
        for (const auto& p : net.phases_granting(z))
          coeffs.emplace_back(layout.split_col(p, k), -link.saturation_flow);
        linear_row(coeffs, 0.0);
      } else if (std::isfinite(link.outflow_cap)) {
        linear_row({{layout.flow_col(z, k), 1.0}}, link.outflow_cap);
      }
    }
    for (const auto& p : layout.split_phases())
      linear_row({{layout.split_col(p, k), 1.0}}, net.phase(p).max_split);
    for (const auto& v : layout.junctions()) {
      std::vector<std::pair<int, double>> coeffs;
      for (const auto& p : net.junction(v).phases)
        coeffs.emplace_back(layout.split_col(p, k), 1.0);
      linear_row(coeffs, net.junction(v).cycle_budget);
    }
  }

  // Chance constraints of the non-source links become second-order cones;
  // zero-covariance cones collapse to plain linear margins.
  std::vector<SocBlock> blocks;
  for (const auto& z : layout.state_links()) {
    const auto& ups = net.upstream_neighbors(z);
    if (ups.empty()) continue;
    const auto& link = net.link(z);
    const int nu = static_cast<int>(ups.size());
    auto flow_cols = [&](int upto) {
      std::vector<int> cols((upto + 1) * nu);
      for (int l = 0; l <= upto; ++l)
        for (int u = 0; u < nu; ++u) cols[l * nu + u] = layout.flow_col(ups[u], l);
      return cols;
    };
    for (int k = 0; k + 1 < K; ++k) {
      // Discharge availability at step k+1.
      CovFactor g2 = factorize(build_sigma2(ups, z, k + 1, inputs.params));
      const double e_next = inputs.params.exo(z, k + 1).mean;
      if (g2.G.rows() == 0) {
        linear_row({{layout.state_col(z, k), -1.0}, {layout.flow_or_copy_col(z, k + 1), 1.0}},
                   e_next);
      } else {
        SocBlock blk;
        append_factor_rows(blk, g2.G, cf, flow_cols(k));
        blk.rows.emplace_back(blk.nrows, layout.state_col(z, k), 1.0);
        blk.rows.emplace_back(blk.nrows, layout.flow_or_copy_col(z, k + 1), -1.0);
        blk.d.push_back(-e_next);
        blk.nrows++;
        blocks.push_back(std::move(blk));
      }
    }
    for (int k = 0; k < K; ++k) {
      // Capacity margin on the predicted state at step k. An overfull link
      // cannot be repaired by control alone (inflow is the only lever), so
      // the cap never drops below the zero-flow trajectory's robust level.
      CovFactor g1 = factorize(build_sigma1(ups, z, k, inputs.params));
      double floor = inputs.measured.at(z) + cf * cum_std(z, k);
      for (int l = 0; l <= k; ++l) floor += inputs.params.exo(z, l).mean;
      const double cap = std::max(link.capacity, floor);
      if (g1.G.rows() == 0) {
        linear_row({{layout.state_col(z, k), 1.0}, {layout.flow_or_copy_col(z, k), 1.0}},
                   cap);
      } else {
        SocBlock blk;
        append_factor_rows(blk, g1.G, cf, flow_cols(k));
        blk.rows.emplace_back(blk.nrows, layout.state_col(z, k), -1.0);
        blk.rows.emplace_back(blk.nrows, layout.flow_or_copy_col(z, k), -1.0);
        blk.d.push_back(-cap);
        blk.nrows++;
        blocks.push_back(std::move(blk));
      }
    }
  }

  linear_rows = static_cast<int>(lin_d.size());
  int total = linear_rows;
  for (const auto& b : blocks) total += b.nrows;

  std::vector<Triplet> all = lin;
  std::vector<double> all_d = lin_d;
  omega = ConeProduct{};
  omega.push(ConeSegment::nonpositive(linear_rows));
  int off = linear_rows;
  for (const auto& b : blocks) {
    for (const auto& t : b.rows) all.emplace_back(off + t.row(), t.col(), t.value());
    all_d.insert(all_d.end(), b.d.begin(), b.d.end());
    omega.push(ConeSegment::soc(b.nrows));
    off += b.nrows;
  }
  D = from_triplets(total, layout.dim(), all);
  d = Eigen::Map<Vector>(all_d.data(), static_cast<Eigen::Index>(all_d.size()));
}

void build_coupling(const VariableLayout& layout_i, const VariableLayout& layout_j,
                    SpMat& P_ij, SpMat& Q_ij) {
  const int K = layout_i.horizon();
  const int j = layout_j.agent();
  const auto& copied = layout_i.copies_toward(j);
  const auto& owned = layout_i.owned_for(j);
  if (copied != layout_j.owned_for(layout_i.agent()) ||
      owned != layout_j.copies_toward(layout_i.agent()))
    throw std::invalid_argument("coupling row ordering mismatch between agents");

  std::vector<Triplet> ps, qs;
  int r = 0;
  for (const auto& z : copied)
    for (int k = 0; k < K; ++k) ps.emplace_back(r++, layout_i.copy_col(z, k), 1.0);
  P_ij = from_triplets(r, layout_i.dim(), ps);
  r = 0;
  for (const auto& z : owned)
    for (int k = 0; k < K; ++k) qs.emplace_back(r++, layout_i.flow_col(z, k), 1.0);
  Q_ij = from_triplets(r, layout_i.dim(), qs);
}

double compute_eta(const SpMat& D, const std::vector<const SpMat*>& selectors, int dim) {
  Vector v(dim);
  for (int i = 0; i < dim; ++i) v[i] = 1.0 + 0.1 * ((i % 7) / 7.0);
  v /= v.norm();
  auto apply = [&](const Vector& x) {
    Vector y = D.transpose() * (D * x).eval();
    for (const auto* s : selectors) y += s->transpose() * (*s * x).eval();
    return y;
  };
  double lambda = 0.0;
  for (int it = 0; it < 10000; ++it) {
    Vector w = apply(v);
    const double norm = w.norm();
    if (norm == 0.0) return 0.0;
    v = w / norm;
    const double next = v.dot(apply(v));
    if (std::abs(next - lambda) <= 1e-6 * std::max(next, 1e-30)) return 1.01 * next;
    lambda = next;
  }
  throw std::runtime_error("power iteration failed to settle within 10000 steps");
}

AgentProblem build_agent_problem(const Network& net, const Partition& part, int agent,
                                 const HorizonInputs& inputs) {
  AgentProblem p;
  p.agent = agent;
  p.id = part.subnetworks.at(agent).id;
  p.layout = build_layout(net, part, agent, inputs.horizon);
  build_cost(net, part, p.layout, inputs, p.H, p.h, p.constant);
  build_dynamics(net, part, p.layout, inputs, p.M, p.m);
  build_inequalities(net, part, p.layout, inputs, p.D, p.d, p.omega, p.linear_rows);

  Eigen::ColPivHouseholderQR<Matrix> qr(Matrix(p.M).transpose());
  if (qr.rank() != p.M.rows())
    throw std::runtime_error("dynamics matrix of agent " + p.id + " lost row rank");

  for (int j : p.layout.neighbors()) {
    VariableLayout other = build_layout(net, part, j, inputs.horizon);
    SpMat pij, qij;
    build_coupling(p.layout, other, pij, qij);
    p.P[j] = std::move(pij);
    p.Q[j] = std::move(qij);
  }
  std::vector<const SpMat*> sel;
  for (const auto& [j, mat] : p.P) sel.push_back(&mat);
  for (const auto& [j, mat] : p.Q) sel.push_back(&mat);
  p.eta = compute_eta(p.D, sel, p.layout.dim());
  return p;
}

std::vector<AgentProblem> build_all_agents(const Network& net, const Partition& part,
                                           const HorizonInputs& inputs) {
  std::vector<AgentProblem> out;
  for (int i = 0; i < static_cast<int>(part.subnetworks.size()); ++i)
    out.push_back(build_agent_problem(net, part, i, inputs));
  return out;
}

std::vector<std::string> infeasibility_precheck(const Network& net,
                                                const HorizonInputs& inputs) {
  std::vector<std::string> out;
  for (const auto& z : net.links()) {
    auto it = inputs.measured.find(z.id);
    if (it == inputs.measured.end()) continue;
    if (it->second > z.capacity + 1e-9)
      out.push_back("measured count of link " + z.id + " exceeds capacity");
  }
  for (const auto& j : net.junctions())
    if (j.cycle_budget < 0) out.push_back("junction " + j.id + " has negative cycle budget");
  return out;
}

double objective_value(const AgentProblem& p, const Vector& x) {
  return 0.5 * x.dot(p.H * x) + p.h.dot(x) + p.constant;
}

using nlohmann::json;

namespace {
json sparse_to_json(const SpMat& m) {
  json t = json::array();
  for (int k = 0; k < m.outerSize(); ++k)
    for (SpMat::InnerIterator it(m, k); it; ++it)
      t.push_back({it.row(), it.col(), it.value()});
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"triplets", std::move(t)}};
}

SpMat sparse_from_json(const json& j) {
  std::vector<Triplet> ts;
  for (const auto& t : j.at("triplets"))
    ts.emplace_back(t[0].get<int>(), t[1].get<int>(), t[2].get<double>());
  return from_triplets(j.at("rows").get<int>(), j.at("cols").get<int>(), ts);
}

json vector_to_json(const Vector& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

Vector vector_from_json(const json& j) {
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = j[i].get<double>();
  return v;
}

// Box bounds may be infinite; JSON carries those as null.
Vector bounds_from_json(const json& j, double unbounded) {
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i)
    v[i] = j[i].is_null() ? unbounded : j[i].get<double>();
  return v;
}
}  // namespace

std::string dump_agent_problem(const AgentProblem& p) {
  json doc;
  doc["agent"] = p.agent;
  doc["id"] = p.id;
  doc["dim"] = p.layout.dim();
  doc["constant"] = p.constant;
  doc["eta"] = p.eta;
  doc["H"] = sparse_to_json(p.H);
  doc["h"] = vector_to_json(p.h);
  doc["M"] = sparse_to_json(p.M);
  doc["m"] = vector_to_json(p.m);
  doc["D"] = sparse_to_json(p.D);
  doc["d"] = vector_to_json(p.d);
  json segs = json::array();
  for (const auto& s : p.omega.segments) {
    if (s.kind == ConeSegment::Kind::Box)
      segs.push_back(
          {{"type", "box"}, {"lb", vector_to_json(s.lb)}, {"ub", vector_to_json(s.ub)}});
    else
      segs.push_back({{"type", "soc"}, {"dim", s.dim}});
  }
  doc["omega"] = std::move(segs);
  json ps = json::object(), qs = json::object();
  for (const auto& [j, m] : p.P) ps[std::to_string(j)] = sparse_to_json(m);
  for (const auto& [j, m] : p.Q) qs[std::to_string(j)] = sparse_to_json(m);
  doc["P"] = std::move(ps);
  doc["Q"] = std::move(qs);
  json vars = json::array();
  for (int c = 0; c < p.layout.dim(); ++c) vars.push_back(p.layout.describe(c));
  doc["vars"] = std::move(vars);
  return doc.dump();
}

AgentProblem load_agent_problem(const std::string& text) {
  json doc = json::parse(text);
  AgentProblem p;
  p.agent = doc.at("agent").get<int>();
  p.id = doc.at("id").get<std::string>();
  p.constant = doc.at("constant").get<double>();
  p.eta = doc.at("eta").get<double>();
  p.H = sparse_from_json(doc.at("H"));
  p.h = vector_from_json(doc.at("h"));
  p.M = sparse_from_json(doc.at("M"));
  p.m = vector_from_json(doc.at("m"));
  p.D = sparse_from_json(doc.at("D"));
  p.d = vector_from_json(doc.at("d"));
  for (const auto& s : doc.at("omega")) {
    if (s.at("type") == "box") {
      const double inf = std::numeric_limits<double>::infinity();
      p.omega.push(ConeSegment::box(bounds_from_json(s.at("lb"), -inf),
                                    bounds_from_json(s.at("ub"), inf)));
      p.linear_rows += static_cast<int>(s.at("lb").size());
    } else {
      p.omega.push(ConeSegment::soc(s.at("dim").get<int>()));
    }
  }
  for (const auto& [key, val] : doc.at("P").items()) p.P[std::stoi(key)] = sparse_from_json(val);
  for (const auto& [key, val] : doc.at("Q").items()) p.Q[std::stoi(key)] = sparse_from_json(val);
  return p;
}

}  // namespace smpc
