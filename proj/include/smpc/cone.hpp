#pragma once

#include <limits>
#include <stdexcept>
#include <vector>

#include <Eigen/Core>

namespace smpc {

using Vector = Eigen::VectorXd;

/// One factor of a Cartesian product of convex sets: either a per-coordinate
/// box (bounds may be infinite) or a unit second-order cone
/// C^{n+1} = {(u, s) : ||u|| <= s}.
struct ConeSegment {
  enum class Kind { Box, Soc };
  Kind kind;
  // Box: per-coordinate bounds, lb.size() == ub.size() == dim.
  Vector lb;
  Vector ub;
  // Soc: total dimension n+1, at least 2.
  int dim = 0;

  static ConeSegment box(Vector lb, Vector ub);
  /// Box with every coordinate in (-inf, 0], the nonpositive orthant.
  static ConeSegment nonpositive(int n);
  static ConeSegment soc(int dim);

  int size() const { return kind == Kind::Box ? static_cast<int>(lb.size()) : dim; }
};

/// Ordered Cartesian product of boxes and second-order cones.
struct ConeProduct {
  std::vector<ConeSegment> segments;

  int dim() const;
  void push(ConeSegment s) { segments.push_back(std::move(s)); }
  bool contains(const Vector& y, double tol) const;
};

double project_box(double y, double lb, double ub);

/// Projection onto the unit second-order cone of dimension y.size().
/// The first y.size()-1 entries are the vector part, the last is the scalar.
Vector project_soc(const Vector& y);

/// Segment-wise projection onto a product of boxes and cones.
Vector project_product(const Vector& y, const ConeProduct& omega);

}  // namespace smpc
