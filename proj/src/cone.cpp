#include "smpc/cone.hpp"

#include <cmath>

namespace smpc {

ConeSegment ConeSegment::box(Vector lb, Vector ub) {
  if (lb.size() != ub.size()) throw std::invalid_argument("box bounds size mismatch");
  for (Eigen::Index i = 0; i < lb.size(); ++i)
    if (lb[i] > ub[i]) throw std::invalid_argument("box with lb > ub");
  ConeSegment s;
  s.kind = Kind::Box;
  s.lb = std::move(lb);
  s.ub = std::move(ub);
  return s;
}

ConeSegment ConeSegment::nonpositive(int n) {
  const double inf = std::numeric_limits<double>::infinity();
  return box(Vector::Constant(n, -inf), Vector::Zero(n));
}

ConeSegment ConeSegment::soc(int dim) {
  if (dim < 2) throw std::invalid_argument("SOC dimension must be >= 2");
  ConeSegment s;
  s.kind = Kind::Soc;
  s.dim = dim;
  return s;
}

int ConeProduct::dim() const {
  int n = 0;
  for (const auto& s : segments) n += s.size();
  return n;
}

bool ConeProduct::contains(const Vector& y, double tol) const {
  if (y.size() != dim()) return false;
  int off = 0;
  for (const auto& s : segments) {
    if (s.kind == ConeSegment::Kind::Box) {
      for (Eigen::Index i = 0; i < s.lb.size(); ++i) {
        const double v = y[off + i];
        if (v < s.lb[i] - tol || v > s.ub[i] + tol) return false;
      }
    } else {
      const double s2 = y[off + s.dim - 1];
      if (y.segment(off, s.dim - 1).norm() > s2 + tol) return false;
    }
    off += s.size();
  }
  return true;
}

double project_box(double y, double lb, double ub) {
  if (lb > ub) throw std::invalid_argument("project_box: lb > ub");
  return std::max(lb, std::min(y, ub));
}

Vector project_soc(const Vector& y) {
  const int n = static_cast<int>(y.size()) - 1;
  if (n < 1) throw std::invalid_argument("project_soc: need dimension >= 2");
  const double y2 = y[n];
  const double norm1 = y.head(n).norm();
  // Interior and polar-interior fast paths keep these points bit-exact.
  if (norm1 <= y2) return y;
  if (norm1 <= -y2) return Vector::Zero(n + 1);
  const double w1 = 0.5 * std::max(0.0, y2 - norm1);
  const double w2 = 0.5 * std::max(0.0, y2 + norm1);
  Vector theta(n);
  if (norm1 > 0.0) {
    theta = y.head(n) / norm1;
  } else {
    theta.setZero();
    theta[0] = 1.0;  // any unit vector works; pin the first basis vector
  }
  Vector out(n + 1);
  out.head(n) = (w2 - w1) * theta;
  out[n] = w1 + w2;
  return out;
}

Vector project_product(const Vector& y, const ConeProduct& omega) {
  if (y.size() != omega.dim())
    throw std::invalid_argument("project_product: dimension mismatch");
  Vector out(y.size());
  int off = 0;
  for (const auto& s : omega.segments) {
    if (s.kind == ConeSegment::Kind::Box) {
      for (Eigen::Index i = 0; i < s.lb.size(); ++i)
        out[off + i] = project_box(y[off + i], s.lb[i], s.ub[i]);
    } else {
      out.segment(off, s.dim) = project_soc(y.segment(off, s.dim));
    }
    off += s.size();
  }
  return out;
}

}  // namespace smpc
