#include <gtest/gtest.h>

#include "cmam/errors.hpp"
#include "cmam/models.hpp"
#include "support.hpp"

namespace cmam {
namespace {

using test::vec;

TEST(SingleRod, SinkIsFixed) {
  SingleRod rod;
  UnitSphere s;
  EXPECT_TRUE(drift(rod, vec({1, 0, 0})).isApprox(vec({-1, 0, 0})));
  EXPECT_LT(projected_drift(rod, s, vec({1, 0, 0})).norm(), 1e-15);
}

TEST(SingleRod, ShearedSaddleIsFixed) {
  SingleRod::Params p;
  p.gamma12 = 1.0;
  SingleRod rod(p);
  EXPECT_LT(projected_drift(rod, UnitSphere(), vec({-1, 1, 0}).normalized()).norm(), 1e-15);
}

TEST(SingleRod, ParameterValidation) {
  SingleRod::Params p;
  p.mu = {1, 3, 2};
  EXPECT_THROW(SingleRod{p}, InvalidModelError);
  p.mu = {0, 1, 2};
  EXPECT_THROW(SingleRod{p}, InvalidModelError);
}

TEST(SingleRod, GradientOfPotentialWithoutShear) {
  // Projected drift equals minus the Riemannian gradient of V on the sphere.
  SingleRod rod;
  UnitSphere s;
  test::Random rnd(9);
  const double h = 1e-5;
  for (int k = 0; k < 10; ++k) {
    const Vector x = s.retract(rnd.normal(3));
    const Matrix u = tangent_basis(s, x);
    const Vector pb = projected_drift(rod, s, x);
    for (Index j = 0; j < 2; ++j) {
      const double dv = (rod.potential(s.retract(x + h * u.col(j))) -
                         rod.potential(s.retract(x - h * u.col(j)))) / (2 * h);
      EXPECT_NEAR(pb.dot(u.col(j)), -dv, 1e-6);
    }
  }
}

TEST(TwoRod, TableSinkIsFixed) {
  TwoRod m;
  EXPECT_LT(projected_drift(m, sphere_pair(), vec({1, 0, 0, -1, 0, 0})).norm(), 1e-15);
}

TEST(TwoRod, InteractionEnergy) {
  TwoRod m;
  EXPECT_EQ(m.interaction_energy(vec({1, 0, 0}), vec({1, 0, 0})), 0.0);
  EXPECT_NEAR(m.interaction_energy(vec({1, 0, 0}), vec({0, 1, 0})), 0.4, 1e-15);
  EXPECT_EQ(m.interaction_energy(vec({1, 0, 0}), vec({-1, 0, 0})), 0.0);
}

TEST(TwoRod, DriftIsMinusEnergyGradient) {
  TwoRod m;
  test::Random rnd(12);
  const double h = 1e-5;
  for (int k = 0; k < 10; ++k) {
    const Vector x = rnd.normal(6);
    const Vector b = drift(m, x);
    for (Index i = 0; i < 6; ++i) {
      Vector xp = x, xm = x;
      xp(i) += h;
      xm(i) -= h;
      const double de = (m.energy(xp) - m.energy(xm)) / (2 * h);
      EXPECT_NEAR(b(i), -de, 1e-6 * (1.0 + std::abs(de)));
    }
  }
}

TEST(TwoRod, AntipodalSymmetry) {
  TwoRod m;
  test::Random rnd(13);
  const Vector x = sphere_pair().retract(rnd.normal(6));
  Vector flipped = x;
  flipped.head(3) *= -1.0;
  EXPECT_NEAR(m.interaction_energy(x.head(3), x.tail(3)),
              m.interaction_energy(flipped.head(3), flipped.tail(3)), 1e-15);
  const Vector b = drift(m, x), bf = drift(m, flipped);
  EXPECT_LT((bf.head(3) + b.head(3)).norm(), 1e-14);
  EXPECT_LT((bf.tail(3) - b.tail(3)).norm(), 1e-14);
}

TEST(TwoRod, TableEnergies) {
  TwoRod m;
  EXPECT_NEAR(m.energy(test::planar_pair(0, M_PI)), 1.0, 1e-15);
  EXPECT_NEAR(m.energy(test::planar_pair(M_PI / 2, M_PI / 2)), 3.0, 1e-15);
}

TEST(TwoRod, MetricBlocks) {
  TwoRod::Params p;
  p.sigma2 = 2.0;
  const Matrix a = diffusion_tensor(TwoRod(p), Vector::Zero(6));
  EXPECT_EQ(a(1, 1), 1.0);
  EXPECT_EQ(a(4, 4), 4.0);
  p.coupling = -1.0;
  EXPECT_THROW(TwoRod{p}, InvalidModelError);
}

}  // namespace
}  // namespace cmam
