#include <gtest/gtest.h>

#include <cmath>

#include "cmam/errors.hpp"
#include "cmam/mam.hpp"
#include "support.hpp"

namespace cmam {
namespace {

using test::e;
using test::vec;

SingleRod rod(double g12 = 0.0, double g13 = 0.0) {
  SingleRod::Params p;
  p.gamma12 = g12;
  p.gamma13 = g13;
  return SingleRod(p);
}

/// si+ -> via -> si- on S^2.
Route rod_route(const std::string& name, const Vector& via) {
  return {name, {e(3, 0), via, e(3, 0, -1)}};
}

/// Closed-form saddle of the sheared rod: direction (-g12, mu2 - mu1, 0).
Vector shear_saddle(double g12, double sign) {
  return sign * vec({-g12, 1.0, 0.0}).normalized();
}

double planar_gap(const Curve& c) {
  double worst = 0.0;
  for (Index i = 0; i < c.image_count(); ++i) {
    const double t1 = std::atan2(c.points(1, i), c.points(0, i));
    double t2 = std::atan2(c.points(4, i), c.points(3, i));
    if (t2 < -1e-9) t2 += 2 * M_PI;
    worst = std::max(worst, std::abs(t1 + t2 - M_PI));
  }
  return worst;
}

// --- initial guess ----------------------------------------------------------

TEST(InitialGuess, QuarterCircle) {
  const Curve c = initial_guess({"q", {e(3, 0), e(3, 1)}}, 10, UnitSphere());
  ASSERT_EQ(c.image_count(), 11);
  for (Index i = 0; i <= 10; ++i) {
    const double t = M_PI / 2 * i / 10.0;
    EXPECT_LT((c.image(i) - vec({std::cos(t), std::sin(t), 0})).norm(), 1e-8);
  }
  const Vector g = c.gaps();
  EXPECT_LT((g.array() - g.mean()).abs().maxCoeff(), 1e-6 * g.mean());
}

TEST(InitialGuess, RouteAIsDiagonal) {
  const Route a{"A", {test::planar_pair(0, M_PI), test::planar_pair(M_PI / 2, M_PI / 2),
                      test::planar_pair(M_PI, 0)}};
  const Curve c = initial_guess(a, 400, sphere_pair());
  EXPECT_LT(planar_gap(c), 1e-8);
  EXPECT_LE(max_path_residual(sphere_pair(), c.points), kFeasibilityTolerance);
}

TEST(InitialGuess, Errors) {
  const UnitSphere s;
  EXPECT_THROW(initial_guess({"r", {e(3, 0), e(3, 0), e(3, 1)}}, 10, s), InvalidRouteError);
  EXPECT_THROW(initial_guess({"r", {e(3, 0), e(3, 0, -1)}}, 10, s), AmbiguousGeodesicError);
  EXPECT_THROW(initial_guess({"r", {e(3, 0), e(3, 1), e(3, 2)}}, 3, s), InvalidRouteError);
  EXPECT_THROW(initial_guess({"r", {e(3, 0)}}, 10, s), InvalidRouteError);
  EXPECT_THROW(initial_guess({"r", {vec({1, 0.1, 0}), e(3, 1)}}, 10, s), InvalidRouteError);
}

// --- reparametrization ------------------------------------------------------

TEST(Reparametrize, EquispacedIsFixed) {
  Curve c;
  c.points.resize(3, 21);
  for (Index i = 0; i <= 20; ++i) {
    const double t = M_PI / 2 * i / 20.0;
    c.points.col(i) = vec({std::cos(t), std::sin(t), 0});
  }
  EXPECT_LT((reparametrize(c, UnitSphere()).points - c.points).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Reparametrize, ClusteredImagesSpreadOut) {
  Curve c;
  c.points.resize(3, 41);
  for (Index i = 0; i <= 40; ++i) {
    const double u = i / 40.0;
    const double t = 2.0 * u * u * u;
    c.points.col(i) = vec({std::cos(t), std::sin(t), 0});
  }
  const Curve r = reparametrize(c, UnitSphere());
  const Vector g = r.gaps();
  EXPECT_LT((g.array() - g.mean()).abs().maxCoeff(), 1e-6 * g.mean());
  EXPECT_EQ(r.points.col(0), c.points.col(0));
  EXPECT_EQ(r.points.col(40), c.points.col(40));
  EXPECT_NEAR(r.length(), c.length(), 1e-3 * c.length());
  EXPECT_LE(max_path_residual(UnitSphere(), r.points), kFeasibilityTolerance);
}

TEST(Reparametrize, ProductSpacingInAmbientNorm) {
  // Rod 1 moves fast early, rod 2 late; only the joint R^6 chord is equalized.
  Curve c;
  c.points.resize(6, 31);
  for (Index i = 0; i <= 30; ++i) {
    const double u = i / 30.0;
    c.points.col(i) = test::planar_pair(1.2 * std::sqrt(u), M_PI - 1.2 * u * u);
  }
  const Curve r = reparametrize(c, sphere_pair());
  const Vector g = r.gaps();
  EXPECT_LT((g.array() - g.mean()).abs().maxCoeff(), 1e-6 * g.mean());
  EXPECT_LE(max_path_residual(sphere_pair(), r.points), kFeasibilityTolerance);
}

// --- gradient ---------------------------------------------------------------

template <class M, class C>
void check_gradient(const M& model, const C& manifold, test::Random& rnd, Index n) {
  const Index segments = 20;
  const Vector a = manifold.retract(rnd.normal(n)), b = manifold.retract(rnd.normal(n));
  const Vector w = rnd.normal(n);
  Matrix pts(n, segments + 1);
  for (Index i = 0; i <= segments; ++i) {
    const double s = static_cast<double>(i) / segments;
    pts.col(i) = manifold.retract((1 - s) * a + s * b + std::sin(M_PI * s) * 0.5 * w);
  }
  Matrix grad;
  const double value = geometric_action_gradient(pts, model, manifold, &grad);
  EXPECT_NEAR(value, geometric_action(Curve{pts}, model, manifold), 1e-12 * (1.0 + value));

  Matrix dir = Matrix::Zero(n, segments + 1);
  for (Index i = 1; i < segments; ++i) {
    dir.col(i) = project_tangent(rnd.normal(n), manifold.template normals<double>(Vector(pts.col(i))));
  }
  const double eps = 1e-6;
  auto moved = [&](double t) {
    Curve c{pts};
    for (Index i = 1; i < segments; ++i) c.points.col(i) = manifold.retract(pts.col(i) + t * dir.col(i));
    return geometric_action(c, model, manifold);
  };
  const double fd = (moved(eps) - moved(-eps)) / (2 * eps);
  const double analytic = (grad.array() * dir.array()).sum();
  EXPECT_NEAR(analytic, fd, 1e-5 * std::max(1.0, std::abs(fd)));
}

TEST(Gradient, MatchesFiniteDifferencesSingleRod) {
  test::Random rnd(40);
  const SingleRod model = rod(0.7, 1.1);
  for (int k = 0; k < 20; ++k) check_gradient(model, UnitSphere(), rnd, 3);
}

TEST(Gradient, MatchesFiniteDifferencesTwoRod) {
  test::Random rnd(41);
  TwoRod::Params p;
  p.sigma2 = 1.3;
  const TwoRod model(p);
  for (int k = 0; k < 20; ++k) check_gradient(model, sphere_pair(), rnd, 6);
}

TEST(Gradient, MatchesFiniteDifferencesAnisotropic) {
  test::Random rnd(42);
  const test::LinearModel model(rnd.normal(3, 3), rnd.spd(3));
  for (int k = 0; k < 10; ++k) check_gradient(model, UnitSphere(), rnd, 3);
}

// --- minimize ---------------------------------------------------------------

TEST(Minimize, BarrierViaSaddle) {
  const Route r = rod_route("via_sa-", e(3, 1, -1));
  const Curve start = initial_guess(r, 200, UnitSphere());
  const auto rep = minimize(start, rod(), UnitSphere());
  EXPECT_NEAR(rep.action, 1.0, 1e-3);
  EXPECT_TRUE(rep.converged) << rep.message;
  EXPECT_LE(rep.gradient_norm, 1e-8);
  EXPECT_EQ(rep.action, geometric_action(rep.curve, rod(), UnitSphere()));
  EXPECT_LE(rep.max_residual, kPathFeasibility);
}

TEST(Minimize, BarrierViaSource) {
  const Route r = rod_route("via_so+", e(3, 2));
  const auto rep = minimize(initial_guess(r, 200, UnitSphere()), rod(), UnitSphere());
  EXPECT_NEAR(rep.action, 2.0, 1e-3);
}

TEST(Minimize, EndpointsPinnedAndActionDecreases) {
  const SingleRod model = rod(0.8, 0.0);
  Route r{"bent", {e(3, 0), vec({0.3, 0.6, 0.75}).normalized(), e(3, 0, -1)}};
  const Curve start = initial_guess(r, 60, UnitSphere());
  SolverOptions opts;
  opts.images = 60;
  opts.max_iterations = 200;
  const auto rep = minimize(start, model, UnitSphere(), opts);
  EXPECT_EQ(rep.curve.points.col(0), start.points.col(0));
  EXPECT_EQ(rep.curve.points.col(60), start.points.col(60));
  EXPECT_LE(rep.action, geometric_action(start, model, UnitSphere()));
  EXPECT_LE(rep.max_residual, kPathFeasibility);
}

TEST(Minimize, IterationCapReportsNotConverged) {
  SolverOptions opts;
  opts.max_iterations = 3;
  const Route r{"bent", {e(3, 0), vec({0.3, 0.6, 0.75}).normalized(), e(3, 0, -1)}};
  const auto rep = minimize(initial_guess(r, 40, UnitSphere()), rod(0.5), UnitSphere(), opts);
  EXPECT_FALSE(rep.converged);
  EXPECT_EQ(rep.iterations, 3);
  EXPECT_FALSE(rep.message.empty());
}

TEST(Minimize, TwoRodRouteA) {
  const Route a{"A", {test::planar_pair(0, M_PI), test::planar_pair(M_PI / 2, M_PI / 2),
                      test::planar_pair(M_PI, 0)}};
  SolverOptions opts;
  opts.images = 400;
  opts.max_iterations = 3000;
  const auto rep = minimize(initial_guess(a, 400, sphere_pair()), TwoRod(), sphere_pair(), opts);
  EXPECT_NEAR(rep.action, 4.0, 5e-3);
  EXPECT_LE(planar_gap(rep.curve), 1e-3);
}

// --- multistart -------------------------------------------------------------

std::vector<Route> rod_routes() {
  return {rod_route("via_sa+", e(3, 1)), rod_route("via_sa-", e(3, 1, -1)),
          rod_route("via_so+", e(3, 2))};
}

TEST(Multistart, ShearFavoursSaMinus) {
  const SingleRod model = rod(1.0);
  std::vector<Route> routes{rod_route("via_sa+", shear_saddle(1.0, 1)),
                            rod_route("via_sa-", shear_saddle(1.0, -1))};
  const auto res = multistart(routes, model, UnitSphere(), SolverOptions{}, 2);
  EXPECT_EQ(res.reports[res.global]->label, "via_sa-");
}

TEST(Multistart, StrongOutOfPlaneShearFavoursSource) {
  const SingleRod model = rod(0.0, 2.0);
  const Vector n3 = vec({-2, 0, 4}).normalized();
  std::vector<Route> routes{rod_route("via_sa+", e(3, 1)), rod_route("via_so-", -n3),
                            rod_route("via_so+", n3)};
  const auto res = multistart(routes, model, UnitSphere(), SolverOptions{}, 3);
  EXPECT_EQ(res.reports[res.global]->label, "via_so-");
}

TEST(Multistart, TiesGoToFirstRoute) {
  std::vector<Route> routes{rod_route("first", e(3, 1)), rod_route("second", e(3, 1))};
  const auto res = multistart(routes, rod(), UnitSphere(), SolverOptions{}, 2);
  EXPECT_EQ(res.reports[0]->action, res.reports[1]->action);
  EXPECT_EQ(res.global, 0u);
}

TEST(Multistart, FailuresRecorded) {
  std::vector<Route> routes{rod_route("bad", e(3, 0)), rod_route("good", e(3, 1))};
  const auto res = multistart(routes, rod(), UnitSphere(), SolverOptions{});
  EXPECT_FALSE(res.reports[0].has_value());
  EXPECT_FALSE(res.failures[0].empty());
  EXPECT_EQ(res.global, 1u);

  std::vector<Route> all_bad{rod_route("bad", e(3, 0))};
  EXPECT_THROW(multistart(all_bad, rod(), UnitSphere(), SolverOptions{}), AllRoutesFailedError);
  EXPECT_THROW(multistart({}, rod(), UnitSphere(), SolverOptions{}), InvalidRouteError);
}

TEST(Multistart, DeterministicAcrossWorkerCounts) {
  const auto one = multistart(rod_routes(), rod(0.5), UnitSphere(), SolverOptions{}, 1);
  const auto three = multistart(rod_routes(), rod(0.5), UnitSphere(), SolverOptions{}, 3);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(one.reports[i]->action, three.reports[i]->action);
    EXPECT_EQ(one.reports[i]->curve.points, three.reports[i]->curve.points);
  }
}

TEST(Multistart, ShearSignSymmetry) {
  double actions[3];
  std::string labels[3];
  const double shears[3] = {-1.0, 0.0, 1.0};
  for (int k = 0; k < 3; ++k) {
    const double g = shears[k];
    std::vector<Route> routes{rod_route("via_sa+", shear_saddle(g, 1)),
                              rod_route("via_sa-", shear_saddle(g, -1))};
    const auto res = multistart(routes, rod(g), UnitSphere(), SolverOptions{}, 2);
    actions[k] = res.reports[res.global]->action;
    labels[k] = res.reports[res.global]->label;
  }
  EXPECT_NEAR(actions[0], actions[2], 1e-6);
  EXPECT_EQ(labels[0], "via_sa+");
  EXPECT_EQ(labels[2], "via_sa-");
  EXPECT_NEAR(actions[1], 1.0, 1e-3);
}

}  // namespace
}  // namespace cmam
