#pragma once

// Problem data for  -div(sigma grad u + beta u) + c u = f  with Dirichlet data
// g on Gamma_D and conormal flux data psi on Gamma_N, plus the
// stabilisation parameters of the discrete method.
//
// The conormal flux is B u = (sigma grad u + beta u).n; the adjoint operator is
// L* v = -div(sigma grad v) + beta.grad v + c v with conormal B* v = sigma grad v.n.

#include "cauchyfem/core.hpp"
#include "cauchyfem/space.hpp"

#include <cmath>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <string_view>

namespace cauchyfem {

using VectorFunction = std::function<Vec2(const Vec2&)>;
using MatrixFunction = std::function<Mat2(const Vec2&)>;
/// Boundary datum evaluated at a point with its outward unit normal.
using BoundaryFunction = std::function<double(const Vec2&, const Vec2&)>;

/// Exact solution with derivatives up to second order.
struct ExactSolution {
  ScalarFunction value;
  VectorFunction gradient;
  MatrixFunction hessian;

  [[nodiscard]] PointValue at(const Vec2& x) const { return {value(x), gradient(x), hessian(x)}; }
};

struct ConvectionField {
  VectorFunction velocity;
  ScalarFunction divergence;
};

struct ProblemSpec {
  Mat2 sigma = Mat2::Identity();
  double reaction = 0.0;
  std::optional<ConvectionField> convection;

  ScalarFunction source;     ///< f
  BoundaryFunction neumann;  ///< psi, conormal flux on Gamma_N
  ScalarFunction dirichlet;  ///< g on Gamma_D
  std::optional<ExactSolution> exact;

  /// Measurement errors; empty means none.
  ScalarFunction source_perturbation;
  BoundaryFunction neumann_perturbation;

  [[nodiscard]] Vec2 beta(const Vec2& x) const { return convection ? convection->velocity(x) : Vec2::Zero(); }
  [[nodiscard]] double div_beta(const Vec2& x) const { return convection ? convection->divergence(x) : 0.0; }

  /// Smallest eigenvalue of sigma.
  [[nodiscard]] double diffusion_min() const {
    Eigen::SelfAdjointEigenSolver<Mat2> es(sigma);
    return es.eigenvalues().minCoeff();
  }

  [[nodiscard]] double apply(const Vec2& x, const PointValue& v) const {
    double r = -(sigma.cwiseProduct(v.hess)).sum() + reaction * v.value;
    if (convection)
      r -= beta(x).dot(v.grad) + div_beta(x) * v.value;
    return r;
  }

  [[nodiscard]] double apply_adjoint(const Vec2& x, const PointValue& v) const {
    double r = -(sigma.cwiseProduct(v.hess)).sum() + reaction * v.value;
    if (convection)
      r += beta(x).dot(v.grad);
    return r;
  }

  [[nodiscard]] double conormal(const Vec2& x, const Vec2& n, double value, const Vec2& grad) const {
    return (sigma * grad + beta(x) * value).dot(n);
  }

  [[nodiscard]] double adjoint_conormal(const Vec2& n, const Vec2& grad) const { return (sigma * grad).dot(n); }

  /// f + delta f
  [[nodiscard]] double measured_source(const Vec2& x) const {
    double v = source ? source(x) : 0.0;
    if (source_perturbation) v += source_perturbation(x);
    return v;
  }

  /// psi + delta psi
  [[nodiscard]] double measured_flux(const Vec2& x, const Vec2& n) const {
    double v = neumann ? neumann(x, n) : 0.0;
    if (neumann_perturbation) v += neumann_perturbation(x, n);
    return v;
  }

  [[nodiscard]] double dirichlet_value(const Vec2& x) const { return dirichlet ? dirichlet(x) : 0.0; }
};

/// Derives f, psi and g from an exact solution.
inline ProblemSpec make_problem(const ExactSolution& exact, const Mat2& sigma = Mat2::Identity(), double reaction = 0.0,
                                std::optional<ConvectionField> convection = std::nullopt) {
  ProblemSpec p;
  p.sigma = sigma;
  p.reaction = reaction;
  p.convection = std::move(convection);
  p.exact = exact;
  auto op = std::make_shared<ProblemSpec>();
  op->sigma = sigma;
  op->reaction = reaction;
  op->convection = p.convection;
  p.source = [op, exact](const Vec2& x) { return op->apply(x, exact.at(x)); };
  p.neumann = [sigma, conv = p.convection, exact](const Vec2& x, const Vec2& n) {
    Vec2 flux = sigma * exact.gradient(x);
    if (conv) flux += conv->velocity(x) * exact.value(x);
    return flux.dot(n);
  };
  p.dirichlet = exact.value;
  return p;
}

/// Checks sigma > 0 and, when an exact solution is present, that f and psi
/// agree with it at sample points.
inline void validate(const ProblemSpec& p, double tol = 1e-8) {
  if (!((p.sigma - p.sigma.transpose()).norm() <= 1e-14 * p.sigma.norm()))
    throw InvalidArgument("ProblemSpec: sigma must be symmetric");
  if (!(p.diffusion_min() > 0.0))
    throw InvalidArgument("ProblemSpec: sigma must be positive definite");
  if (!p.exact)
    return;
  for (int j = 0; j <= 4; ++j) {
    for (int i = 0; i <= 4; ++i) {
      const Vec2 x(0.05 + 0.225 * i, 0.05 + 0.225 * j);
      const double lu = p.apply(x, p.exact->at(x));
      const double f = p.source ? p.source(x) : 0.0;
      if (std::abs(lu - f) > tol * (1.0 + std::abs(lu)))
        throw InvalidArgument("ProblemSpec: source inconsistent with exact solution");
    }
  }
  const std::array<Vec2, 4> normals{Vec2(-1, 0), Vec2(1, 0), Vec2(0, -1), Vec2(0, 1)};
  for (int s = 0; s < 4; ++s) {
    for (int i = 1; i <= 3; ++i) {
      const double t = 0.25 * i;
      const Vec2 x = s < 2 ? Vec2(double(s), t) : Vec2(t, double(s - 2));
      const PointValue u = p.exact->at(x);
      const double bu = p.conormal(x, normals[s], u.value, u.grad);
      const double psi = p.neumann ? p.neumann(x, normals[s]) : 0.0;
      if (std::abs(bu - psi) > tol * (1.0 + std::abs(bu)))
        throw InvalidArgument("ProblemSpec: Neumann data inconsistent with exact solution");
    }
  }
}

// --- exact solutions used by the experiments ---------------------------------

namespace solutions {

/// u = 30 x(1-x) y(1-y), with ||u||_{L2} = 1.
inline ExactSolution bubble() {
  return {[](const Vec2& p) { return 30.0 * p.x() * (1 - p.x()) * p.y() * (1 - p.y()); },
          [](const Vec2& p) {
            const double x = p.x(), y = p.y();
            return Vec2(30.0 * (1 - 2 * x) * y * (1 - y), 30.0 * x * (1 - x) * (1 - 2 * y));
          },
          [](const Vec2& p) {
            const double x = p.x(), y = p.y();
            Mat2 h;
            h << -60.0 * y * (1 - y), 30.0 * (1 - 2 * x) * (1 - 2 * y), 30.0 * (1 - 2 * x) * (1 - 2 * y),
                -60.0 * x * (1 - x);
            return h;
          }};
}

/// u = a + b x + c y
inline ExactSolution affine(double a, double b, double c) {
  return {[=](const Vec2& p) { return a + b * p.x() + c * p.y(); }, [=](const Vec2&) { return Vec2(b, c); },
          [](const Vec2&) { return Mat2::Zero().eval(); }};
}

/// u = a x^2 + b x y + c y^2 + d x + e y + f0
inline ExactSolution quadratic(double a, double b, double c, double d = 0, double e = 0, double f0 = 0) {
  return {[=](const Vec2& p) {
            const double x = p.x(), y = p.y();
            return a * x * x + b * x * y + c * y * y + d * x + e * y + f0;
          },
          [=](const Vec2& p) { return Vec2(2 * a * p.x() + b * p.y() + d, b * p.x() + 2 * c * p.y() + e); },
          [=](const Vec2&) {
            Mat2 h;
            h << 2 * a, b, b, 2 * c;
            return h;
          }};
}

inline ExactSolution zero() { return affine(0.0, 0.0, 0.0); }

} // namespace solutions

/// beta = -100 (x + y, y - x); div beta = -200.
inline ConvectionField rotating_inflow_field(double scale = 100.0) {
  return {[scale](const Vec2& p) { return Vec2(-scale * (p.x() + p.y()), -scale * (p.y() - p.x())); },
          [scale](const Vec2&) { return -2.0 * scale; }};
}

// --- stabilisation -----------------------------------------------------------

enum class StabKind { GaLS, CIP, H1Adjoint };

enum class Side { Primal, Adjoint };

struct StabilisationConfig {
  StabKind primal = StabKind::CIP;
  StabKind adjoint = StabKind::CIP;
  double gamma_s = 0.01;
  double gamma_d = 10.0;
  int degree = 1;
  /// Scale gradient-jump penalties by min(1, mu / (|beta|_F h_F)).
  bool peclet_weighting = false;

  [[nodiscard]] StabKind kind(Side side) const { return side == Side::Primal ? primal : adjoint; }

  void validate() const {
    if (!(gamma_s > 0.0) || !(gamma_d > 0.0))
      throw InvalidArgument("StabilisationConfig: gamma_S and gamma_D must be positive");
    if (primal == StabKind::H1Adjoint)
      throw InvalidArgument("StabilisationConfig: H1 stabilisation is only available for the adjoint");
    local_dof_count(degree);
  }
};

/// "gals", "cip" or "h1adj" (CIP primal with H1 adjoint).
inline StabilisationConfig stabilisation_from_name(std::string_view name, double gamma_s, double gamma_d, int degree,
                                                   bool peclet = false) {
  StabilisationConfig c;
  c.gamma_s = gamma_s;
  c.gamma_d = gamma_d;
  c.degree = degree;
  c.peclet_weighting = peclet;
  if (name == "gals") {
    c.primal = c.adjoint = StabKind::GaLS;
  } else if (name == "cip") {
    c.primal = c.adjoint = StabKind::CIP;
  } else if (name == "h1adj") {
    c.primal = StabKind::CIP;
    c.adjoint = StabKind::H1Adjoint;
  } else {
    throw InvalidArgument("unknown stabilisation: " + std::string(name));
  }
  c.validate();
  return c;
}

inline std::string stabilisation_name(const StabilisationConfig& c) {
  if (c.adjoint == StabKind::H1Adjoint) return "h1adj";
  return c.primal == StabKind::GaLS ? "gals" : "cip";
}

} // namespace cauchyfem
