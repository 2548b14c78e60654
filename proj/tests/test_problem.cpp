#include "cauchyfem/problem.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <vector>

using namespace cauchyfem;

namespace {

// Central differences of the flux sigma grad u + beta u, for an independent
// evaluation of -div(sigma grad u + beta u) + c u.
double fd_operator(const ProblemSpec& p, const ExactSolution& u, const Vec2& x) {
  const double e = 1e-4;
  auto flux = [&](const Vec2& y) { return Vec2(p.sigma * u.gradient(y) + p.beta(y) * u.value(y)); };
  const double div = (flux(x + Vec2(e, 0)).x() - flux(x - Vec2(e, 0)).x()) / (2 * e) +
                     (flux(x + Vec2(0, e)).y() - flux(x - Vec2(0, e)).y()) / (2 * e);
  return -div + p.reaction * u.value(x);
}

double fd_adjoint(const ProblemSpec& p, const ExactSolution& v, const Vec2& x) {
  const double e = 1e-4;
  auto flux = [&](const Vec2& y) { return Vec2(p.sigma * v.gradient(y)); };
  const double div = (flux(x + Vec2(e, 0)).x() - flux(x - Vec2(e, 0)).x()) / (2 * e) +
                     (flux(x + Vec2(0, e)).y() - flux(x - Vec2(0, e)).y()) / (2 * e);
  return -div + p.beta(x).dot(v.gradient(x)) + p.reaction * v.value(x);
}

} // namespace

TEST(Solutions, BubbleValues) {
  const ExactSolution u = solutions::bubble();
  EXPECT_NEAR(u.value({0.5, 0.5}), 1.875, 1e-15);
  EXPECT_EQ(u.value({0.0, 0.3}), 0.0);
  EXPECT_EQ(u.value({0.7, 1.0}), 0.0);
}

TEST(Solutions, DerivativesMatchFiniteDifferences) {
  const double e = 1e-5;
  for (const ExactSolution& u : {solutions::bubble(), solutions::quadratic(1, -2, 0.5, 3, -1, 2)}) {
    for (const Vec2& x : {Vec2(0.3, 0.6), Vec2(0.8, 0.1)}) {
      EXPECT_NEAR(u.gradient(x).x(), (u.value(x + Vec2(e, 0)) - u.value(x - Vec2(e, 0))) / (2 * e), 1e-8);
      EXPECT_NEAR(u.gradient(x).y(), (u.value(x + Vec2(0, e)) - u.value(x - Vec2(0, e))) / (2 * e), 1e-8);
      const Vec2 hx = (u.gradient(x + Vec2(e, 0)) - u.gradient(x - Vec2(e, 0))) / (2 * e);
      const Vec2 hy = (u.gradient(x + Vec2(0, e)) - u.gradient(x - Vec2(0, e))) / (2 * e);
      EXPECT_NEAR((u.hessian(x).col(0) - hx).norm(), 0.0, 1e-7);
      EXPECT_NEAR((u.hessian(x).col(1) - hy).norm(), 0.0, 1e-7);
    }
  }
}

TEST(Problem, LaplaceSourceOfBubble) {
  const ProblemSpec p = make_problem(solutions::bubble());
  for (const Vec2& x : {Vec2(0.2, 0.4), Vec2(0.5, 0.5), Vec2(0.9, 0.05)}) {
    const double expected = 60.0 * (x.y() * (1 - x.y()) + x.x() * (1 - x.x()));
    EXPECT_NEAR(p.source(x), expected, 1e-12);
  }
  EXPECT_NO_THROW(validate(p));
}

TEST(Problem, NeumannDataIsOutwardFlux) {
  const ProblemSpec p = make_problem(solutions::affine(1, 2, 3));
  EXPECT_NEAR(p.neumann({1.0, 0.5}, {1, 0}), 2.0, 1e-15);
  EXPECT_NEAR(p.neumann({0.5, 0.0}, {0, -1}), -3.0, 1e-15);
  EXPECT_NEAR(p.dirichlet({1.0, 1.0}), 6.0, 1e-15);
}

TEST(Problem, RotatingField) {
  const ConvectionField b = rotating_inflow_field();
  EXPECT_EQ(b.velocity({0, 0}), Vec2(0, 0));
  EXPECT_EQ(b.velocity({1, 0}), Vec2(-100, 100));
  const double e = 1e-6;
  const Vec2 x(0.3, 0.7);
  const double div = (b.velocity(x + Vec2(e, 0)).x() - b.velocity(x - Vec2(e, 0)).x()) / (2 * e) +
                     (b.velocity(x + Vec2(0, e)).y() - b.velocity(x - Vec2(0, e)).y()) / (2 * e);
  EXPECT_NEAR(div, -200.0, 1e-6);
  EXPECT_EQ(b.divergence(x), -200.0);
}

TEST(Problem, OperatorsMatchFiniteDifferences) {
  Mat2 sigma;
  sigma << 2.0, 0.3, 0.3, 1.0;
  const ProblemSpec p = make_problem(solutions::bubble(), sigma, 0.7, rotating_inflow_field(3.0));
  const ExactSolution v = solutions::quadratic(0.5, 1, -1, 2, 0, 1);
  for (const Vec2& x : {Vec2(0.25, 0.75), Vec2(0.6, 0.4)}) {
    EXPECT_NEAR(p.apply(x, p.exact->at(x)), fd_operator(p, *p.exact, x), 1e-5);
    EXPECT_NEAR(p.apply_adjoint(x, v.at(x)), fd_adjoint(p, v, x), 1e-5);
  }
}

TEST(Problem, AdjointIdentityForCompactSupport) {
  // (L u, v) = (u, L* v) when u and v vanish to first order on the boundary.
  // Checked with a composite tensor Gauss rule on the unit square.
  const ProblemSpec p = make_problem(solutions::zero(), Mat2::Identity(), 0.5, rotating_inflow_field(1.0));
  auto sq = [](double t) { return t * t * (1 - t) * (1 - t); };
  auto dsq = [](double t) { return 2 * t * (1 - t) * (1 - 2 * t); };
  auto ddsq = [](double t) { return 2 - 12 * t + 12 * t * t; };
  auto bump = [&](double sx) {
    return ExactSolution{[=](const Vec2& x) { return (1 + sx * x.x()) * sq(x.x()) * sq(x.y()); },
                         [=](const Vec2& x) {
                           return Vec2((sx * sq(x.x()) + (1 + sx * x.x()) * dsq(x.x())) * sq(x.y()),
                                       (1 + sx * x.x()) * sq(x.x()) * dsq(x.y()));
                         },
                         [=](const Vec2& x) {
                           Mat2 h;
                           const double fx = (1 + sx * x.x()) * sq(x.x());
                           const double dfx = sx * sq(x.x()) + (1 + sx * x.x()) * dsq(x.x());
                           const double ddfx = 2 * sx * dsq(x.x()) + (1 + sx * x.x()) * ddsq(x.x());
                           h << ddfx * sq(x.y()), dfx * dsq(x.y()), dfx * dsq(x.y()), fx * ddsq(x.y());
                           return h;
                         }};
  };
  const ExactSolution u = bump(1.0), v = bump(-0.5);
  const SegmentQuadrature g = segment_quadrature(9);
  std::vector<double> pts, wts;
  for (int panel = 0; panel < 4; ++panel)
    for (std::size_t i = 0; i < g.points.size(); ++i) {
      pts.push_back(0.25 * (panel + g.points[i]));
      wts.push_back(0.25 * g.weights[i]);
    }
  double lhs = 0, rhs = 0;
  for (std::size_t i = 0; i < pts.size(); ++i)
    for (std::size_t j = 0; j < pts.size(); ++j) {
      const Vec2 x(pts[i], pts[j]);
      const double w = wts[i] * wts[j];
      lhs += w * p.apply(x, u.at(x)) * v.value(x);
      rhs += w * u.value(x) * p.apply_adjoint(x, v.at(x));
    }
  EXPECT_NEAR(lhs, rhs, 1e-12);
}

TEST(Problem, ValidateRejectsBadInput) {
  Mat2 nonsym;
  nonsym << 1, 0.5, 0, 1;
  EXPECT_THROW(validate(make_problem(solutions::zero(), nonsym)), InvalidArgument);
  Mat2 indef;
  indef << 1, 0, 0, -1;
  EXPECT_THROW(validate(make_problem(solutions::zero(), indef)), InvalidArgument);
  ProblemSpec bad_f = make_problem(solutions::bubble());
  bad_f.source = [](const Vec2&) { return 1.0; };
  EXPECT_THROW(validate(bad_f), InvalidArgument);
  ProblemSpec bad_psi = make_problem(solutions::bubble());
  bad_psi.neumann = [](const Vec2&, const Vec2&) { return 1.0; };
  EXPECT_THROW(validate(bad_psi), InvalidArgument);
}

TEST(Problem, MeasuredDataAddsPerturbation) {
  ProblemSpec p = make_problem(solutions::affine(0, 1, 0));
  EXPECT_EQ(p.measured_flux({1, 0.5}, {1, 0}), 1.0);
  p.neumann_perturbation = [](const Vec2&, const Vec2&) { return 0.25; };
  p.source_perturbation = [](const Vec2&) { return -1.0; };
  EXPECT_EQ(p.measured_flux({1, 0.5}, {1, 0}), 1.25);
  EXPECT_EQ(p.measured_source({0.5, 0.5}), -1.0);
}

TEST(Stabilisation, Names) {
  const auto gals = stabilisation_from_name("gals", 0.01, 10, 1);
  EXPECT_EQ(gals.primal, StabKind::GaLS);
  EXPECT_EQ(gals.adjoint, StabKind::GaLS);
  const auto h1 = stabilisation_from_name("h1adj", 0.01, 10, 2);
  EXPECT_EQ(h1.primal, StabKind::CIP);
  EXPECT_EQ(h1.adjoint, StabKind::H1Adjoint);
  EXPECT_EQ(stabilisation_name(h1), "h1adj");
  EXPECT_EQ(stabilisation_name(stabilisation_from_name("cip", 1, 1, 1)), "cip");
  EXPECT_THROW(stabilisation_from_name("supg", 0.01, 10, 1), InvalidArgument);
  EXPECT_THROW(stabilisation_from_name("cip", 0.0, 10, 1), InvalidArgument);
  EXPECT_THROW(stabilisation_from_name("cip", 0.01, -1, 1), InvalidArgument);
  EXPECT_THROW(stabilisation_from_name("cip", 0.01, 10, 3), InvalidArgument);
  StabilisationConfig c;
  c.primal = StabKind::H1Adjoint;
  EXPECT_THROW(c.validate(), InvalidArgument);
}
