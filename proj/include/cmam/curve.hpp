#pragma once

#include <Eigen/Dense>

#include "cmam/manifold.hpp"
#include "cmam/wlinalg.hpp"

namespace cmam {

/// Images phi_0..phi_N stored column-wise at alpha_i = i / N.
struct Curve {
  Matrix points;

  Index dimension() const { return points.rows(); }
  Index image_count() const { return points.cols(); }
  Index segment_count() const { return points.cols() - 1; }
  double step() const { return 1.0 / static_cast<double>(segment_count()); }
  Vector image(Index i) const { return points.col(i); }

  /// Sum of Euclidean chord lengths.
  double length() const {
    double total = 0.0;
    for (Index i = 0; i + 1 < image_count(); ++i) {
      total += (points.col(i + 1) - points.col(i)).norm();
    }
    return total;
  }

  Vector gaps() const {
    Vector g(segment_count());
    for (Index i = 0; i < segment_count(); ++i) g(i) = (points.col(i + 1) - points.col(i)).norm();
    return g;
  }
};

/// Images at uniform times t_i = i T / N over the horizon T.
struct TimePath {
  Matrix points;
  double horizon = 0.0;

  Index segment_count() const { return points.cols() - 1; }
  double time_step() const { return horizon / static_cast<double>(segment_count()); }
};

template <ConstraintSet C>
double max_path_residual(const C& manifold, const Matrix& points) {
  double worst = 0.0;
  for (Index i = 0; i < points.cols(); ++i) {
    worst = std::max(worst, max_residual(manifold, Vector(points.col(i))));
  }
  return worst;
}

}  // namespace cmam
