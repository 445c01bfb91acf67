#include <gtest/gtest.h>

#include "cmam/errors.hpp"
#include "cmam/manifold.hpp"
#include "support.hpp"

namespace cmam {
namespace {

using test::vec;

TEST(Residual, Sphere) {
  UnitSphere s(3);
  EXPECT_EQ(residual(s, vec({1, 0, 0}))(0), 0.0);
  EXPECT_EQ(residual(s, vec({2, 0, 0}))(0), 3.0);
}

TEST(Residual, SpherePair) {
  const Vector r = residual(sphere_pair(), vec({1, 0, 0, -1, 0, 0}));
  ASSERT_EQ(r.size(), 2);
  EXPECT_EQ(r.norm(), 0.0);
}

TEST(Retract, SphereNormalizes) {
  UnitSphere s(3);
  EXPECT_TRUE(s.retract(vec({2, 0, 0})).isApprox(vec({1, 0, 0})));
  EXPECT_LT((s.retract(1.001 * vec({0.6, 0.8, 0})) - vec({0.6, 0.8, 0})).norm(), 1e-12);
}

TEST(Retract, ProductFactorwise) {
  const Vector y = sphere_pair().retract(vec({1.1, 0, 0, 0, 0.9, 0}));
  EXPECT_LT((y - vec({1, 0, 0, 0, 1, 0})).norm(), 1e-15);
}

TEST(Retract, IdempotentOnFeasiblePoints) {
  test::Random rnd(1);
  UnitSphere s(4);
  for (int k = 0; k < 20; ++k) {
    const Vector x = s.retract(rnd.normal(4));
    EXPECT_LE((s.retract(x) - x).norm(), 1e-15);
  }
}

TEST(Retract, NewtonOnEllipsoid) {
  test::Ellipsoid ell(vec({1, 2, 3}));
  const Vector y = ell.retract(vec({0.5, 1.5, 1.0}));
  EXPECT_LE(max_residual(ell, y), kFeasibilityTolerance);
}

TEST(Retract, NewtonFailureReported) {
  test::Ellipsoid ell(vec({1, 2, 3}));
  EXPECT_THROW(ell.retract(Vector::Zero(3)), RetractionError);
}

TEST(TangentBasis, OrthonormalAndTangent) {
  const auto m = sphere_pair();
  test::Random rnd(2);
  const Vector x = m.retract(rnd.normal(6));
  const Matrix u = tangent_basis(m, x);
  ASSERT_EQ(u.cols(), 4);
  EXPECT_LT((u.transpose() * u - Matrix::Identity(4, 4)).norm(), 1e-12);
  EXPECT_LT((m.normals<double>(x).transpose() * u).norm(), 1e-12);
}

TEST(ProjectTangent, InJacobianNullSpace) {
  test::Random rnd(4);
  test::Ellipsoid ell(vec({1, 0.5, 2}));
  for (int k = 0; k < 20; ++k) {
    const Vector x = ell.retract(rnd.normal(3).normalized());
    const Vector v = rnd.normal(3);
    const Matrix xi = ell.normals<double>(x);
    EXPECT_LE(std::abs(xi.col(0).dot(project_tangent(v, xi))), 1e-10 * v.norm());
  }
}

TEST(Geodesic, SlerpOnSphere) {
  UnitSphere s(3);
  const Vector mid = s.geodesic(vec({1, 0, 0}), vec({0, 1, 0}), 0.5);
  EXPECT_LT((mid - vec({1, 1, 0}).normalized()).norm(), 1e-14);
  EXPECT_THROW(s.geodesic(vec({1, 0, 0}), vec({-1, 0, 0}), 0.5), AmbiguousGeodesicError);
}

TEST(Geodesic, ProductPerFactor) {
  const auto m = sphere_pair();
  const Vector x = m.geodesic(test::planar_pair(0, M_PI), test::planar_pair(M_PI / 2, M_PI / 2), 0.5);
  EXPECT_LT((x - test::planar_pair(M_PI / 4, 3 * M_PI / 4)).norm(), 1e-14);
}

TEST(Dimensions, Product) {
  const auto m = sphere_pair();
  EXPECT_EQ(m.ambient_dimension(), 6);
  EXPECT_EQ(m.codimension(), 2);
  EXPECT_EQ(manifold_dimension(m), 4);
}

}  // namespace
}  // namespace cmam
