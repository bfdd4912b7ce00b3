#include "smpc/stochastic.hpp"

#include <cmath>
#include <stdexcept>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

namespace smpc {

void ParamSet::set_exo(const LinkId& z, int step, RandomScalar v) {
  if (v.variance < 0) throw std::invalid_argument("negative variance for e_" + z);
  values_[ParamKey::exo(z, step)] = v;
}

void ParamSet::set_turn_row(const LinkId& w, int step,
                            const std::vector<std::pair<LinkId, RandomScalar>>& row) {
  double sum = 0.0;
  for (const auto& [z, v] : row) {
    if (v.mean < -1e-12 || v.mean > 1.0 + 1e-12)
      throw std::invalid_argument("turning ratio mean outside [0,1] for " + w + "->" + z);
    if (v.variance < 0) throw std::invalid_argument("negative variance for r_" + w + z);
    sum += v.mean;
  }
  if (std::abs(sum - 1.0) > 1e-6)
    throw std::invalid_argument("turning ratio means of " + w + " sum to " +
                                std::to_string(sum) + ", expected 1");
  for (const auto& [z, v] : row) {
    RandomScalar r = v;
    r.mean /= sum;
    values_[ParamKey::turn(w, z, step)] = r;
  }
}

void ParamSet::set_correlation(const ParamKey& a, const ParamKey& b, double rho) {
  if (rho < -1.0 || rho > 1.0) throw std::invalid_argument("correlation outside [-1,1]");
  auto key = a < b ? std::make_pair(a, b) : std::make_pair(b, a);
  correlations_[key] = rho;
}

const RandomScalar& ParamSet::lookup(const ParamKey& k) const {
  auto it = values_.find(k);
  if (it == values_.end()) {
    std::string what = k.kind == ParamKey::Kind::Exo
                           ? "e_" + k.from
                           : "r_" + k.from + "->" + k.to;
    throw std::out_of_range("missing parameter " + what + " at step " +
                            std::to_string(k.step));
  }
  return it->second;
}

const RandomScalar& ParamSet::exo(const LinkId& z, int step) const {
  return lookup(ParamKey::exo(z, step));
}

const RandomScalar& ParamSet::turn(const LinkId& w, const LinkId& z, int step) const {
  return lookup(ParamKey::turn(w, z, step));
}

bool ParamSet::has_turn(const LinkId& w, const LinkId& z, int step) const {
  return values_.count(ParamKey::turn(w, z, step)) > 0;
}

double ParamSet::correlation(const ParamKey& a, const ParamKey& b) const {
  if (a == b) return 1.0;
  auto key = a < b ? std::make_pair(a, b) : std::make_pair(b, a);
  auto it = correlations_.find(key);
  return it == correlations_.end() ? 0.0 : it->second;
}

double ParamSet::covariance(const ParamKey& a, const ParamKey& b) const {
  const RandomScalar& ra = lookup(a);
  if (a == b) return ra.variance;
  const RandomScalar& rb = lookup(b);
  const double rho = correlation(a, b);
  if (rho == 0.0) return 0.0;
  return rho * std::sqrt(ra.variance * rb.variance);
}

ParamSet ParamSet::nominal() const {
  ParamSet out;
  out.values_ = values_;
  for (auto& [k, v] : out.values_) v.variance = 0.0;
  return out;
}

double combo_mean(const Vector& coeffs, double b, const Vector& means) {
  if (coeffs.size() != means.size())
    throw std::invalid_argument("combo_mean: dimension mismatch");
  return coeffs.dot(means) + b;
}

double combo_variance(const Vector& coeffs, const Matrix& sigma) {
  if (sigma.rows() != sigma.cols() || coeffs.size() != sigma.rows())
    throw std::invalid_argument("combo_variance: dimension mismatch");
  if (sigma.size() > 0) {
    Eigen::SelfAdjointEigenSolver<Matrix> eig(sigma, Eigen::EigenvaluesOnly);
    const double trace = std::max(sigma.trace(), 0.0);
    if (eig.eigenvalues().minCoeff() < -1e-8 * std::max(trace, 1e-300))
      throw std::invalid_argument("combo_variance: covariance not PSD");
  }
  return coeffs.dot(sigma * coeffs);
}

namespace {

// Shared core of build_sigma1/2: covariance of the stacked turning ratios of
// (steps 0..r_steps-1) followed by the cumulative exogenous difference over
// steps 0..e_steps-1.
Matrix stacked_covariance(const std::vector<LinkId>& upstream, const LinkId& z,
                          int r_steps, int e_steps, const ParamSet& params) {
  const int nu = static_cast<int>(upstream.size());
  const int dim = r_steps * nu + 1;
  std::vector<ParamKey> keys;
  keys.reserve(r_steps * nu);
  for (int l = 0; l < r_steps; ++l)
    for (const auto& w : upstream) keys.push_back(ParamKey::turn(w, z, l));

  Matrix sigma = Matrix::Zero(dim, dim);
  for (int i = 0; i < static_cast<int>(keys.size()); ++i)
    for (int j = i; j < static_cast<int>(keys.size()); ++j)
      sigma(i, j) = sigma(j, i) = params.covariance(keys[i], keys[j]);

  // Last row/column: the cumulative exogenous term sum_l e_z(t+l|t).
  double cum = 0.0;
  for (int l = 0; l < e_steps; ++l)
    for (int l2 = 0; l2 < e_steps; ++l2)
      cum += params.covariance(ParamKey::exo(z, l), ParamKey::exo(z, l2));
  sigma(dim - 1, dim - 1) = cum;
  for (int i = 0; i < static_cast<int>(keys.size()); ++i) {
    double c = 0.0;
    for (int l = 0; l < e_steps; ++l) c += params.covariance(keys[i], ParamKey::exo(z, l));
    sigma(i, dim - 1) = sigma(dim - 1, i) = c;
  }
  return sigma;
}

}  // namespace

Matrix build_sigma1(const std::vector<LinkId>& upstream, const LinkId& z, int k,
                    const ParamSet& params) {
  if (k < 0) throw std::invalid_argument("build_sigma1: negative step");
  return stacked_covariance(upstream, z, k + 1, k + 1, params);
}

Matrix build_sigma2(const std::vector<LinkId>& upstream, const LinkId& z, int k,
                    const ParamSet& params) {
  if (k < 1) throw std::invalid_argument("build_sigma2: step must be >= 1");
  return stacked_covariance(upstream, z, k, k + 1, params);
}

CovFactor factorize(const Matrix& sigma) {
  const int n = static_cast<int>(sigma.rows());
  if (sigma.cols() != n) throw std::invalid_argument("factorize: not square");
  const double scale = std::max(1.0, sigma.cwiseAbs().maxCoeff());
  if ((sigma - sigma.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
    throw std::invalid_argument("factorize: not symmetric");

  Eigen::LDLT<Matrix> ldlt(sigma);
  const double trace = std::max(sigma.trace(), 0.0);
  const double tol = 1e-12 * std::max(trace, 1e-300);
  Vector d = ldlt.vectorD();

  Matrix l = Matrix(ldlt.matrixL());
  // Rows of G are sqrt(d_i) * (row i of L^T P); drop truncated pivots.
  std::vector<int> keep;
  for (int i = 0; i < n; ++i) {
    if (d[i] < -tol) throw std::invalid_argument("factorize: indefinite matrix");
    if (d[i] > tol) keep.push_back(i);
  }
  Matrix g(static_cast<int>(keep.size()), n);
  const auto& perm = ldlt.transpositionsP();
  for (int r = 0; r < static_cast<int>(keep.size()); ++r) {
    const int i = keep[r];
    Vector row = l.col(i);  // column i of L = row i of L^T
    // Undo the pivoting permutation: Sigma = P^T L D L^T P.
    Vector unpermuted = perm.transpose() * row;
    g.row(r) = std::sqrt(d[i]) * unpermuted.transpose();
  }
  return CovFactor{std::move(g)};
}

double chance_factor(double eps) {
  if (!(eps > 0.0 && eps < 1.0))
    throw std::invalid_argument("chance_factor: eps must lie in (0,1)");
  return std::sqrt((1.0 - eps) / eps);
}

}  // namespace smpc
