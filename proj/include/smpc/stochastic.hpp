#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

namespace smpc {

using LinkId = std::string;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// A scalar random quantity known only through its first two moments.
struct RandomScalar {
  double mean = 0.0;
  double variance = 0.0;
};

/// Identifies one uncertain traffic parameter: either the exogenous flow
/// difference of a link at a horizon step, or a turning ratio from a link to
/// one of its downstream neighbors at a horizon step.
struct ParamKey {
  enum class Kind { Exo, Turn };
  Kind kind;
  LinkId from;  // the link (Exo) or the upstream link (Turn)
  LinkId to;    // empty for Exo
  int step = 0;

  static ParamKey exo(LinkId z, int k) { return {Kind::Exo, std::move(z), {}, k}; }
  static ParamKey turn(LinkId w, LinkId z, int k) {
    return {Kind::Turn, std::move(w), std::move(z), k};
  }
  friend bool operator<(const ParamKey& a, const ParamKey& b) {
    return std::tie(a.kind, a.from, a.to, a.step) < std::tie(b.kind, b.from, b.to, b.step);
  }
  friend bool operator==(const ParamKey& a, const ParamKey& b) {
    return std::tie(a.kind, a.from, a.to, a.step) == std::tie(b.kind, b.from, b.to, b.step);
  }
};

/// Moments of the uncertain model parameters over the horizon: exogenous flow
/// differences e_z and turning ratios r_zw, plus optional correlations among
/// parameters that share a source link.
class ParamSet {
 public:
  void set_exo(const LinkId& z, int step, RandomScalar v);

  /// Sets every turning ratio of link `w` at `step` at once so the row can be
  /// validated: means must lie in [0,1] and sum to 1 within 1e-6 (the row is
  /// renormalized); larger deviation throws.
  void set_turn_row(const LinkId& w, int step,
                    const std::vector<std::pair<LinkId, RandomScalar>>& row);

  void set_correlation(const ParamKey& a, const ParamKey& b, double rho);

  const RandomScalar& exo(const LinkId& z, int step) const;
  const RandomScalar& turn(const LinkId& w, const LinkId& z, int step) const;
  double correlation(const ParamKey& a, const ParamKey& b) const;
  bool has_turn(const LinkId& w, const LinkId& z, int step) const;

  /// Covariance between two parameters under the stored moments, zero unless
  /// a correlation was supplied.
  double covariance(const ParamKey& a, const ParamKey& b) const;

  /// Returns a copy with every variance (and correlation) removed.
  ParamSet nominal() const;

 private:
  const RandomScalar& lookup(const ParamKey& k) const;
  std::map<ParamKey, RandomScalar> values_;
  std::map<std::pair<ParamKey, ParamKey>, double> correlations_;
};

/// Factor G of a covariance matrix with G^T G = Sigma; rows(G) <= dim(Sigma)
/// when Sigma is rank deficient.
struct CovFactor {
  Matrix G;
};

/// a^T E[X] + b for a linear combination of random variables.
double combo_mean(const Vector& coeffs, double b, const Vector& means);

/// a^T Sigma a; throws if Sigma is not symmetric positive semidefinite.
double combo_variance(const Vector& coeffs, const Matrix& sigma);

/// Covariance of the stacked vector [X_z(t|t),...,X_z(t+k|t), sum_l e_z(t+l|t)]
/// where X_z(t+l|t) collects the turning ratios r_wz(t+l|t) over the given
/// upstream links in order. Row/column layout matches the stacked flow vector
/// used by the cost and capacity constraints.
Matrix build_sigma1(const std::vector<LinkId>& upstream, const LinkId& z, int k,
                    const ParamSet& params);

/// Covariance of [X_z(t|t),...,X_z(t+k-1|t), sum_{l<=k} e_z(t+l|t)], the
/// uncertainty entering the green-time utilization constraint at step k.
Matrix build_sigma2(const std::vector<LinkId>& upstream, const LinkId& z, int k,
                    const ParamSet& params);

/// Pivoted factorization with zero-pivot truncation at 1e-12 * trace.
CovFactor factorize(const Matrix& sigma);

/// sqrt((1 - eps) / eps), the distributionally robust chance-constraint
/// scaling; eps must lie in (0,1).
double chance_factor(double eps);

}  // namespace smpc
