#pragma once

// Weighted linear algebra on the tangent bundle of an embedded manifold.
//
// The diffusion tensor a = sigma sigma^T induces the inner product
// <u, v>_a = u^T a^{-1} v. Tangent spaces are given implicitly by a basis
// Xi = [xi_1 .. xi_K] of the normal space (the kernel of the Euclidean
// tangent projection). The generalized inverse of the projection maps a
// tangent vector v to the preimage of smallest a-norm,
//
//   pinv(v) = v - Xi lambda,   M lambda = vhat,
//   M_ij = <xi_i, xi_j>_a,     vhat_k = <v, xi_k>_a.

#include <Eigen/Dense>

#include <cmath>
#include <concepts>
#include <utility>
#include <vector>

#include "cmam/errors.hpp"

namespace cmam {

using Index = Eigen::Index;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

template <class T>
using VectorT = Eigen::Matrix<T, Eigen::Dynamic, 1>;
template <class T>
using MatrixT = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;

/// Relative tolerance for the test v in Img(Pi): |v - Pi v| <= tol (1 + |v|).
inline constexpr double kTangentTolerance = 1e-8;

namespace detail {

inline Eigen::LLT<Matrix> checked_llt(const Matrix& a, const char* what) {
  Eigen::LLT<Matrix> llt(a);
  if (llt.info() != Eigen::Success) {
    throw MetricDegenerateError(std::string(what) + " is not positive definite");
  }
  return llt;
}

}  // namespace detail

/// u^T a^{-1} v.
inline double a_inner(const Vector& u, const Vector& v, const Matrix& a) {
  const auto llt = detail::checked_llt(a, "diffusion tensor");
  return u.dot(llt.solve(v));
}

inline double a_norm(const Vector& u, const Matrix& a) {
  return std::sqrt(std::max(0.0, a_inner(u, u, a)));
}

/// Euclidean-orthogonal projection of v onto the complement of span(xi).
inline Vector project_tangent(const Vector& v, const Matrix& xi) {
  if (xi.cols() == 0) return v;
  const Matrix gram = xi.transpose() * xi;
  Eigen::LLT<Matrix> llt(gram);
  if (llt.info() != Eigen::Success) {
    throw DegenerateConstraintsError("constraint gradients are linearly dependent");
  }
  // Positive definiteness alone lets nearly parallel normals through.
  const double scale = gram.diagonal().maxCoeff();
  if (llt.matrixL().toDenseMatrix().diagonal().array().square().minCoeff() <=
      1e-14 * scale) {
    throw DegenerateConstraintsError("constraint gradients are linearly dependent");
  }
  return v - xi * llt.solve(xi.transpose() * v);
}

inline bool in_tangent_image(const Vector& v, const Matrix& xi) {
  return (v - project_tangent(v, xi)).norm() <= kTangentTolerance * (1.0 + v.norm());
}

/// Minimal a-norm preimage of the tangent vector v under the projection.
inline Vector pinv_apply(const Vector& v, const Matrix& xi, const Matrix& a) {
  if (!in_tangent_image(v, xi)) {
    throw DomainError("vector is not in the image of the tangent projection");
  }
  if (xi.cols() == 0) return v;
  const auto a_llt = detail::checked_llt(a, "diffusion tensor");
  const Matrix ainv_xi = a_llt.solve(xi);
  const Matrix gram = xi.transpose() * ainv_xi;
  const auto m_llt = detail::checked_llt(gram, "normal Gram matrix");
  const Vector vhat = ainv_xi.transpose() * v;
  return v - xi * m_llt.solve(vhat);
}

/// Symmetric matrix Q with u^T Q w = <pinv(Pi u), pinv(Pi w)>_a for all u, w.
///
/// Q = a^{-1} - a^{-1} Xi M^{-1} Xi^T a^{-1}. It annihilates span(Xi), so the
/// Euclidean projection never has to be applied before contracting with Q.
/// Generic in the scalar so that it can be differentiated.
template <class T>
MatrixT<T> tangent_metric(const MatrixT<T>& a, const MatrixT<T>& xi) {
  const Index n = a.rows();
  const auto a_llt = a.llt();
  MatrixT<T> ainv = a_llt.solve(MatrixT<T>::Identity(n, n));
  if (xi.cols() == 0) return ainv;
  const MatrixT<T> g = ainv * xi;
  const MatrixT<T> gram = xi.transpose() * g;
  const MatrixT<T> m_inv_gt = gram.llt().solve(g.transpose());
  return ainv - g * m_inv_gt;
}

// ---------------------------------------------------------------------------
// Metrics

template <class M>
concept Metric = requires(const M& m, const Vector& x) {
  { m.dimension() } -> std::convertible_to<Index>;
  { m.template tensor<double>(x) } -> std::convertible_to<Matrix>;
};

/// a(x) = sigma^2 I.
class IsotropicMetric {
 public:
  IsotropicMetric(Index n, double sigma) : n_(n), sigma_(sigma) {
    if (!(sigma > 0.0)) throw MetricDegenerateError("sigma must be positive");
  }

  Index dimension() const { return n_; }
  double sigma() const { return sigma_; }

  template <class T>
  MatrixT<T> tensor(const VectorT<T>& /*x*/) const {
    return MatrixT<T>::Identity(n_, n_) * T(sigma_ * sigma_);
  }

  /// Diagonal of a^{-1}.
  Vector inverse_diagonal() const { return Vector::Constant(n_, 1.0 / (sigma_ * sigma_)); }

 private:
  Index n_;
  double sigma_;
};

/// Block-diagonal a(x) = diag(sigma_1^2 I_{n_1}, sigma_2^2 I_{n_2}, ...).
class BlockIsotropicMetric {
 public:
  struct Block {
    Index size;
    double sigma;
  };

  explicit BlockIsotropicMetric(std::vector<Block> blocks) : blocks_(std::move(blocks)) {
    for (const auto& b : blocks_) {
      if (!(b.sigma > 0.0)) throw MetricDegenerateError("sigma must be positive");
      n_ += b.size;
    }
  }

  Index dimension() const { return n_; }
  const std::vector<Block>& blocks() const { return blocks_; }

  template <class T>
  MatrixT<T> tensor(const VectorT<T>& /*x*/) const {
    MatrixT<T> a = MatrixT<T>::Zero(n_, n_);
    Index offset = 0;
    for (const auto& b : blocks_) {
      for (Index i = 0; i < b.size; ++i) a(offset + i, offset + i) = T(b.sigma * b.sigma);
      offset += b.size;
    }
    return a;
  }

  /// Diagonal of a^{-1}.
  Vector inverse_diagonal() const {
    Vector d(n_);
    Index offset = 0;
    for (const auto& b : blocks_) {
      d.segment(offset, b.size).setConstant(1.0 / (b.sigma * b.sigma));
      offset += b.size;
    }
    return d;
  }

 private:
  std::vector<Block> blocks_;
  Index n_ = 0;
};

/// Arbitrary constant SPD tensor.
class ConstantMetric {
 public:
  explicit ConstantMetric(Matrix a) : a_(std::move(a)) {
    if (a_.rows() != a_.cols() || !a_.isApprox(a_.transpose())) {
      throw MetricDegenerateError("diffusion tensor must be square and symmetric");
    }
    detail::checked_llt(a_, "diffusion tensor");
  }

  Index dimension() const { return a_.rows(); }

  template <class T>
  MatrixT<T> tensor(const VectorT<T>& /*x*/) const {
    return a_.cast<T>();
  }

 private:
  Matrix a_;
};

}  // namespace cmam
