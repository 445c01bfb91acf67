#pragma once

// Rigid-rod orientation dynamics on spheres.
//
// SingleRod: one rod on S^2 with quadratic potential V(x) = 1/2 sum mu_i x_i^2
// in a linear shear flow, drift b(x) = (-diag(mu) + K0) x.
//
// TwoRod: two rods on S^2 x S^2 with the same quadratic potential each and a
// Maier-Saupe coupling U(x1, x2) = A (1 - <x1, x2>^2), drift b = -grad(V + V + U),
// independent isotropic noise of strengths sigma_1 and sigma_2 per rod.

#include <Eigen/Dense>

#include <concepts>
#include <string>

#include "cmam/errors.hpp"
#include "cmam/manifold.hpp"
#include "cmam/wlinalg.hpp"

namespace cmam {

template <class M>
concept Model = requires(const M& m, const Vector& x) {
  { m.dimension() } -> std::convertible_to<Index>;
  { m.template drift<double>(x) } -> std::convertible_to<Vector>;
  { m.metric() } -> Metric;
};

template <Model M>
Vector drift(const M& model, const Vector& x) {
  return model.template drift<double>(x);
}

/// Drift projected onto the tangent space of the manifold at x.
template <Model M, ConstraintSet C>
Vector projected_drift(const M& model, const C& manifold, const Vector& x) {
  return project_tangent(drift(model, x), manifold.template normals<double>(x));
}

template <Model M>
Matrix diffusion_tensor(const M& model, const Vector& x) {
  return model.metric().template tensor<double>(x);
}

namespace detail {

inline void check_ordered_mu(const Eigen::Vector3d& mu, bool strictly_positive) {
  if (!(mu(0) < mu(1) && mu(1) < mu(2))) {
    throw InvalidModelError("potential coefficients must satisfy mu1 < mu2 < mu3");
  }
  if (strictly_positive && !(mu(0) > 0.0)) {
    throw InvalidModelError("potential coefficients must be positive");
  }
}

}  // namespace detail

class SingleRod {
 public:
  struct Params {
    Eigen::Vector3d mu{1.0, 2.0, 3.0};
    double gamma12 = 0.0;  // K0(0,1)
    double gamma13 = 0.0;  // K0(0,2)
    double sigma = 1.0;
  };

  SingleRod() : SingleRod(Params{}) {}

  explicit SingleRod(const Params& p) : params_(p), metric_(3, p.sigma) {
    detail::check_ordered_mu(p.mu, /*strictly_positive=*/true);
    drift_matrix_ = -p.mu.asDiagonal().toDenseMatrix();
    drift_matrix_(0, 1) += p.gamma12;
    drift_matrix_(0, 2) += p.gamma13;
  }

  Index dimension() const { return 3; }
  const Params& params() const { return params_; }
  const IsotropicMetric& metric() const { return metric_; }

  /// -diag(mu) + K0.
  const Eigen::Matrix3d& drift_matrix() const { return drift_matrix_; }

  template <class T>
  VectorT<T> drift(const VectorT<T>& x) const {
    return drift_matrix_.cast<T>() * x;
  }

  double potential(const Vector& x) const {
    return 0.5 * (params_.mu.array() * x.array().square()).sum();
  }

 private:
  Params params_;
  IsotropicMetric metric_;
  Eigen::Matrix3d drift_matrix_;
};

class TwoRod {
 public:
  struct Params {
    Eigen::Vector3d mu{1.0, 3.0, 5.0};
    double coupling = 0.4;  // A
    double sigma1 = 1.0;
    double sigma2 = 1.0;
  };

  TwoRod() : TwoRod(Params{}) {}

  explicit TwoRod(const Params& p)
      : params_(p), metric_({{3, p.sigma1}, {3, p.sigma2}}) {
    detail::check_ordered_mu(p.mu, /*strictly_positive=*/false);
    if (p.coupling < 0.0) throw InvalidModelError("coupling strength must be nonnegative");
  }

  Index dimension() const { return 6; }
  const Params& params() const { return params_; }
  const BlockIsotropicMetric& metric() const { return metric_; }

  /// b_i = -K x_i + 2 A <x1, x2> x_{3-i}.
  template <class T>
  VectorT<T> drift(const VectorT<T>& x) const {
    const VectorT<T> x1 = x.head(3);
    const VectorT<T> x2 = x.tail(3);
    const T c = x1.dot(x2);
    const T two_a_c = T(2.0 * params_.coupling) * c;
    const auto k = params_.mu.cast<T>().asDiagonal();
    VectorT<T> b(6);
    b.head(3) = -(k * x1) + two_a_c * x2;
    b.tail(3) = -(k * x2) + two_a_c * x1;
    return b;
  }

  double rod_potential(const Vector& x) const {
    return 0.5 * (params_.mu.array() * x.array().square()).sum();
  }

  /// A (1 - <x1, x2>^2), i.e. A sin^2 of the angle between unit rods.
  double interaction_energy(const Vector& x1, const Vector& x2) const {
    const double c = x1.dot(x2);
    return params_.coupling * (1.0 - c * c);
  }

  double energy(const Vector& x) const {
    return rod_potential(x.head(3)) + rod_potential(x.tail(3)) +
           interaction_energy(x.head(3), x.tail(3));
  }

 private:
  Params params_;
  BlockIsotropicMetric metric_;
};

}  // namespace cmam
