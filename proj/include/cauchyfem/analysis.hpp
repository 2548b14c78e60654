#pragma once

// Error norms, stabilisation semi-norms, the triple semi-norm, the residual
// estimator, the Oswald quasi-interpolant and convergence rates.

#include "cauchyfem/assembly.hpp"
#include "cauchyfem/solver.hpp"

#include <cmath>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace cauchyfem {

/// Axis-aligned box used for local error norms.
struct Region {
  Vec2 lo{0.5, 0.5};
  Vec2 hi{1.0, 1.0};

  [[nodiscard]] bool contains(const Vec2& x) const {
    return x.x() >= lo.x() && x.x() <= hi.x() && x.y() >= lo.y() && x.y() <= hi.y();
  }

  void validate() const {
    if (!(lo.x() >= 0.0 && lo.y() >= 0.0 && hi.x() <= 1.0 && hi.y() <= 1.0 && lo.x() < hi.x() && lo.y() < hi.y()))
      throw InvalidArgument("Region: subdomain must be a non-empty box inside the unit square");
  }
};

namespace detail {

inline constexpr int analysis_exactness = max_triangle_exactness;
inline constexpr int analysis_face_exactness = max_segment_exactness;

inline PointValue zero_value() { return {}; }

} // namespace detail

struct ErrorNorms {
  double l2_global = 0.0;
  double l2_local = 0.0;
  double h1_global = 0.0; ///< ||grad(u - u_h)||
};

/// Quadrature of (u - u_h)^2 over the domain and over `omega` (quadrature
/// points inside omega), and of |grad(u - u_h)|^2.
inline ErrorNorms error_norms(const Discretisation& d, const Vector& u_h, const ExactSolution& u,
                              const Region& omega = {}) {
  omega.validate();
  const auto q = triangle_quadrature(detail::analysis_exactness);
  double g = 0.0, l = 0.0, h1 = 0.0;
  for (std::size_t c = 0; c < d.mesh().num_cells(); ++c) {
    const auto& dofs = d.dofs.cell_dofs[c];
    detail::for_cell_points(d, c, q, [&](const Vec2& x, double w, const ShapeSet& s) {
      const PointValue uh = evaluate(s, dofs, u_h);
      const double e = u.value(x) - uh.value;
      g += w * e * e;
      if (omega.contains(x)) l += w * e * e;
      h1 += w * (u.gradient(x) - uh.grad).squaredNorm();
    });
  }
  return {std::sqrt(g), std::sqrt(l), std::sqrt(h1)};
}

/// L2 norm of a discrete function.
inline double l2_norm(const Discretisation& d, const Vector& v) {
  return error_norms(d, v, solutions::zero()).l2_global;
}

/// |u_h|_{s_V} by quadrature, with the data terms in homogeneous form
/// (u_h minus the measured data) so that exact solution and data give zero.
inline double primal_seminorm(const Discretisation& d, const ProblemSpec& spec, const StabilisationConfig& cfg,
                              const Vector& u_h) {
  const auto tq = triangle_quadrature(detail::analysis_exactness);
  const auto sq = segment_quadrature(detail::analysis_face_exactness);
  double sum = 0.0;
  const auto& tm = d.tmesh;
  for (std::size_t fi = 0; fi < d.faces().size(); ++fi) {
    const Face& f = d.faces()[fi];
    const double h = f.length;
    if (f.interior()) {
      if (cfg.primal == StabKind::H1Adjoint) continue;
      const double grad_coeff = cfg.gamma_s * h * detail::peclet_factor(spec, cfg, f);
      const double lap_coeff = cfg.primal == StabKind::CIP ? cfg.gamma_s * h * h * h : 0.0;
      for (const FacePoint& fp : face_points(d.mesh(), f, sq)) {
        const PointValue a = evaluate_in_cell(d, f.cells[0], fp.x, u_h);
        const PointValue b = evaluate_in_cell(d, f.cells[1], fp.x, u_h);
        const double jn = (a.grad - b.grad).dot(f.normal);
        const double jl = a.hess.trace() - b.hess.trace();
        sum += fp.weight * (grad_coeff * jn * jn + lap_coeff * jl * jl);
      }
      continue;
    }
    const bool dir = tm.in(BoundarySet::Dirichlet, fi);
    const bool neu = tm.in(BoundarySet::Neumann, fi);
    if (!dir && !neu) continue;
    for (const FacePoint& fp : face_points(d.mesh(), f, sq)) {
      const PointValue v = evaluate_in_cell(d, f.cells[0], fp.x, u_h);
      if (dir) {
        const double r = v.value - spec.dirichlet_value(fp.x);
        sum += fp.weight * cfg.gamma_d / h * r * r;
      }
      if (neu) {
        const double r = spec.conormal(fp.x, f.normal, v.value, v.grad) - spec.measured_flux(fp.x, f.normal);
        sum += fp.weight * cfg.gamma_d * h * r * r;
      }
    }
  }
  if (cfg.primal == StabKind::GaLS) {
    for (std::size_t c = 0; c < d.mesh().num_cells(); ++c) {
      const double h2 = d.mesh().h_cell[c] * d.mesh().h_cell[c];
      detail::for_cell_points(d, c, tq, [&](const Vec2& x, double w, const ShapeSet& s) {
        const double r = spec.apply(x, evaluate(s, d.dofs.cell_dofs[c], u_h)) - spec.measured_source(x);
        sum += w * cfg.gamma_s * h2 * r * r;
      });
    }
  }
  return std::sqrt(std::max(sum, 0.0));
}

/// sqrt(v^T S v) for a symmetric positive semi-definite block.
inline double block_seminorm(const SparseMatrix& s, const Vector& v) {
  return std::sqrt(std::max(v.dot(s * v), 0.0));
}

struct Seminorms {
  double sv = 0.0; ///< |u_h|_{s_V}, homogeneous data form
  double sw = 0.0; ///< |z_h|_{s_W}
  [[nodiscard]] double monitor() const { return sv + sw; }
};

inline Seminorms seminorms(const Discretisation& d, const ProblemSpec& spec, const StabilisationConfig& cfg,
                           const AssembledBlocks& blocks, const DiscreteSolution& sol) {
  return {primal_seminorm(d, spec, cfg, sol.u), block_seminorm(blocks.sw(), sol.z)};
}

/// |(u - u_h, z_h)|_L: the sum of the residual, jump and boundary norms of
/// the primal error and the adjoint variable. Pass `exact == nullptr` to
/// evaluate |(u_h, z_h)|_L of the discrete pair instead. With H1 adjoint
/// stabilisation ||z_h||_{H^1} is added.
inline double triple_seminorm(const Discretisation& d, const ProblemSpec& spec, const StabilisationConfig& cfg,
                              const Vector& u_h, const Vector& z_h, const ExactSolution* exact) {
  const auto tq = triangle_quadrature(detail::analysis_exactness);
  const auto sq = segment_quadrature(detail::analysis_face_exactness);
  auto err = [&](const Vec2& x, const PointValue& uh) {
    PointValue e = exact ? exact->at(x) : detail::zero_value();
    e.value -= uh.value;
    e.grad -= uh.grad;
    e.hess -= uh.hess;
    return e;
  };

  double res_u = 0, res_z = 0, h1_z = 0;
  for (std::size_t c = 0; c < d.mesh().num_cells(); ++c) {
    const double h2 = d.mesh().h_cell[c] * d.mesh().h_cell[c];
    const auto& dofs = d.dofs.cell_dofs[c];
    detail::for_cell_points(d, c, tq, [&](const Vec2& x, double w, const ShapeSet& s) {
      const double lu = spec.apply(x, err(x, evaluate(s, dofs, u_h)));
      const PointValue zv = evaluate(s, dofs, z_h);
      const double lz = spec.apply_adjoint(x, zv);
      res_u += w * h2 * lu * lu;
      res_z += w * h2 * lz * lz;
      h1_z += w * (zv.value * zv.value + zv.grad.squaredNorm());
    });
  }

  double jump_u = 0, jump_z = 0, dir_u = 0, neu_u = 0, nc_z = 0, dc_z = 0;
  const auto& tm = d.tmesh;
  for (std::size_t fi = 0; fi < d.faces().size(); ++fi) {
    const Face& f = d.faces()[fi];
    const double h = f.length;
    for (const FacePoint& fp : face_points(d.mesh(), f, sq)) {
      if (f.interior()) {
        // The exact solution has no gradient jump.
        const PointValue ua = evaluate_in_cell(d, f.cells[0], fp.x, u_h);
        const PointValue ub = evaluate_in_cell(d, f.cells[1], fp.x, u_h);
        const PointValue za = evaluate_in_cell(d, f.cells[0], fp.x, z_h);
        const PointValue zb = evaluate_in_cell(d, f.cells[1], fp.x, z_h);
        const double ju = (ua.grad - ub.grad).dot(f.normal);
        const double jz = (za.grad - zb.grad).dot(f.normal);
        jump_u += fp.weight * h * ju * ju;
        jump_z += fp.weight * h * jz * jz;
        continue;
      }
      const PointValue e = err(fp.x, evaluate_in_cell(d, f.cells[0], fp.x, u_h));
      const PointValue zv = evaluate_in_cell(d, f.cells[0], fp.x, z_h);
      if (tm.in(BoundarySet::Dirichlet, fi))
        dir_u += fp.weight / h * e.value * e.value;
      if (tm.in(BoundarySet::Neumann, fi)) {
        const double bn = spec.conormal(fp.x, f.normal, e.value, e.grad);
        neu_u += fp.weight * h * bn * bn;
      }
      if (tm.in(BoundarySet::NeumannComplement, fi))
        nc_z += fp.weight / h * zv.value * zv.value;
      if (tm.in(BoundarySet::DirichletComplement, fi)) {
        const double bn = spec.adjoint_conormal(f.normal, zv.grad);
        dc_z += fp.weight * h * bn * bn;
      }
    }
  }
  double total = std::sqrt(res_u) + std::sqrt(res_z) + std::sqrt(jump_u) + std::sqrt(jump_z) + std::sqrt(dir_u) +
                 std::sqrt(neu_u) + std::sqrt(nc_z) + std::sqrt(dc_z);
  if (cfg.adjoint == StabKind::H1Adjoint)
    total += std::sqrt(h1_z);
  return total;
}

struct Estimator {
  double eta_v = 0.0;
  double eta = 0.0;
};

/// eta_V = ||h (f - L u_h)||_h + ||h^1/2 [d_n u_h]||_{F_I} + ||h^1/2 (psi - B u_h)||_{Gamma_N}
///         + ||h^-1/2 (g - u_h)||_{Gamma_D},   eta = eta_V + |z_h|_{s_W}.
/// Uses the measured data f + df, psi + dpsi.
inline Estimator residual_estimator(const Discretisation& d, const ProblemSpec& spec, const Vector& u_h,
                                    double z_seminorm) {
  const auto tq = triangle_quadrature(detail::analysis_exactness);
  const auto sq = segment_quadrature(detail::analysis_face_exactness);
  double res = 0, jump = 0, neu = 0, dir = 0;
  for (std::size_t c = 0; c < d.mesh().num_cells(); ++c) {
    const double h2 = d.mesh().h_cell[c] * d.mesh().h_cell[c];
    detail::for_cell_points(d, c, tq, [&](const Vec2& x, double w, const ShapeSet& s) {
      const double r = spec.measured_source(x) - spec.apply(x, evaluate(s, d.dofs.cell_dofs[c], u_h));
      res += w * h2 * r * r;
    });
  }
  const auto& tm = d.tmesh;
  for (std::size_t fi = 0; fi < d.faces().size(); ++fi) {
    const Face& f = d.faces()[fi];
    const double h = f.length;
    const bool is_dir = tm.in(BoundarySet::Dirichlet, fi);
    const bool is_neu = tm.in(BoundarySet::Neumann, fi);
    if (!f.interior() && !is_dir && !is_neu) continue;
    for (const FacePoint& fp : face_points(d.mesh(), f, sq)) {
      const PointValue a = evaluate_in_cell(d, f.cells[0], fp.x, u_h);
      if (f.interior()) {
        const PointValue b = evaluate_in_cell(d, f.cells[1], fp.x, u_h);
        const double j = (a.grad - b.grad).dot(f.normal);
        jump += fp.weight * h * j * j;
        continue;
      }
      if (is_neu) {
        const double r = spec.measured_flux(fp.x, f.normal) - spec.conormal(fp.x, f.normal, a.value, a.grad);
        neu += fp.weight * h * r * r;
      }
      if (is_dir) {
        const double r = spec.dirichlet_value(fp.x) - a.value;
        dir += fp.weight / h * r * r;
      }
    }
  }
  Estimator e;
  e.eta_v = std::sqrt(res) + std::sqrt(jump) + std::sqrt(neu) + std::sqrt(dir);
  e.eta = e.eta_v + z_seminorm;
  return e;
}

// --- Oswald quasi-interpolation ------------------------------------------------

/// Discontinuous piecewise polynomial given by per-cell local nodal values
/// (degree 0: one value per cell, stored in slot 0).
struct BrokenField {
  int degree = 0;
  std::vector<LocalArray<double>> cell_values;
};

/// Continuous nodal field whose value at each node is the mean of the
/// adjacent cells' values there. Degree-0 input yields a P1 field.
inline Vector oswald_interpolant(const Mesh& mesh, const FaceSet& faces, const BrokenField& field) {
  if (field.cell_values.size() != mesh.num_cells())
    throw InvalidArgument("oswald_interpolant: one value set per cell required");
  const int out_degree = std::max(field.degree, 1);
  const DofMap dofs = make_dof_map(mesh, faces, out_degree);
  Vector sum = Vector::Zero(static_cast<Eigen::Index>(dofs.num_dofs));
  Vector count = Vector::Zero(sum.size());
  for (std::size_t c = 0; c < mesh.num_cells(); ++c) {
    for (int i = 0; i < dofs.local_size; ++i) {
      const double v = field.degree == 0 ? field.cell_values[c][0] : field.cell_values[c][i];
      sum[dofs.cell_dofs[c][i]] += v;
      count[dofs.cell_dofs[c][i]] += 1.0;
    }
  }
  return sum.cwiseQuotient(count);
}

/// Cellwise Laplacian of a discrete function (constant per cell for k <= 2).
inline BrokenField cell_laplacian(const Discretisation& d, const Vector& u_h) {
  BrokenField out;
  out.degree = 0;
  out.cell_values.resize(d.mesh().num_cells());
  const Vec2 centroid(1.0 / 3.0, 1.0 / 3.0);
  for (std::size_t c = 0; c < d.mesh().num_cells(); ++c) {
    const CellGeometry geo = CellGeometry::of(d.mesh(), c);
    out.cell_values[c].fill(0.0);
    out.cell_values[c][0] = evaluate(physical_shapes(d.degree(), geo, centroid), d.dofs.cell_dofs[c], u_h).hess.trace();
  }
  return out;
}

struct OswaldRatios {
  double interpolation = 0.0; ///< ||h (lap u_h - I_os lap u_h)||_h / s^S_V(u_h, u_h)^1/2
  double stability = 0.0;     ///< ||h I_os lap u_h||_h / ||h lap u_h||_h
};

/// Both ratios for a P2 function, with the CIP stabilisation at gamma_S = 1.
/// The Laplacian is averaged at the nodes of the P2 space.
inline OswaldRatios oswald_ratios(const Discretisation& d, const Vector& u_h, const SparseMatrix& cip_unit) {
  if (d.degree() != 2)
    throw InvalidArgument("oswald_ratios: requires a P2 discretisation");
  BrokenField lap = cell_laplacian(d, u_h);
  for (auto& v : lap.cell_values) v.fill(v[0]);
  lap.degree = 2;
  const Vector ios = oswald_interpolant(d.mesh(), d.tmesh.faces, lap);
  const auto q = triangle_quadrature(4);
  double diff = 0, stab = 0, base = 0;
  for (std::size_t c = 0; c < d.mesh().num_cells(); ++c) {
    const CellGeometry geo = CellGeometry::of(d.mesh(), c);
    const double h2 = d.mesh().h_cell[c] * d.mesh().h_cell[c];
    const double l = lap.cell_values[c][0];
    for (std::size_t p = 0; p < q.points.size(); ++p) {
      const double v = evaluate(reference_shapes(2, q.points[p]), d.dofs.cell_dofs[c], ios).value;
      const double w = q.weights[p] * std::abs(geo.det);
      diff += w * h2 * (l - v) * (l - v);
      stab += w * h2 * v * v;
      base += w * h2 * l * l;
    }
  }
  OswaldRatios r;
  r.interpolation = std::sqrt(diff) / block_seminorm(cip_unit, u_h);
  r.stability = std::sqrt(stab) / std::sqrt(base);
  return r;
}

// --- reporting -------------------------------------------------------------------

struct ErrorReport {
  int level = 0;
  double h = 0.0;     ///< nominal mesh size 1/n
  double h_max = 0.0; ///< largest cell diameter
  std::size_t dofs = 0;
  double l2_global = 0.0;
  double l2_local = 0.0;
  double h1_global = 0.0;
  double sv = 0.0;        ///< |u_h|_{s_V}
  double sv_interp = 0.0; ///< |u_h - i_V u|_{s_V}
  double sw = 0.0;        ///< |z_h|_{s_W}
  double triple = 0.0;    ///< |(u - u_h, z_h)|_L
  double eta_v = 0.0;
  double eta = 0.0;
  double u_norm = 0.0; ///< ||u||_Omega, for relative errors

  [[nodiscard]] double monitor() const { return sv + sw; }
  [[nodiscard]] double l2_relative() const { return u_norm > 0 ? l2_global / u_norm : l2_global; }
};

/// Column order of the CSV serialisation.
inline constexpr const char* report_csv_header = "level,h,dof,l2_global,l2_local,h1,sV,sW,triple,etaV,eta";

inline void write_report_csv(std::ostream& os, const ErrorReport& r) {
  const auto old = os.precision(12);
  os << r.level << ',' << r.h << ',' << r.dofs << ',' << r.l2_global << ',' << r.l2_local << ',' << r.h1_global << ','
     << r.sv << ',' << r.sw << ',' << r.triple << ',' << r.eta_v << ',' << r.eta;
  os.precision(old);
}

/// All report quantities for one solve. Error columns are NaN when the
/// problem has no exact solution.
inline ErrorReport analyse(const Discretisation& d, const ProblemSpec& spec, const StabilisationConfig& cfg,
                           const AssembledBlocks& blocks, const DiscreteSolution& sol, const Region& omega = {}) {
  ErrorReport r;
  r.level = d.mesh().level;
  r.h = d.mesh().nominal_h();
  r.h_max = d.mesh().h_max;
  r.dofs = 2 * d.num_dofs();
  const Seminorms s = seminorms(d, spec, cfg, blocks, sol);
  r.sv = s.sv;
  r.sw = s.sw;
  const Estimator est = residual_estimator(d, spec, sol.u, s.sw);
  r.eta_v = est.eta_v;
  r.eta = est.eta;
  if (spec.exact) {
    const ErrorNorms e = error_norms(d, sol.u, *spec.exact, omega);
    r.l2_global = e.l2_global;
    r.l2_local = e.l2_local;
    r.h1_global = e.h1_global;
    r.u_norm = error_norms(d, Vector::Zero(sol.u.size()), *spec.exact, omega).l2_global;
    r.sv_interp = block_seminorm(blocks.sv(), sol.u - interpolate(spec.exact->value, d.dofs));
    r.triple = triple_seminorm(d, spec, cfg, sol.u, sol.z, &*spec.exact);
  } else {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    r.l2_global = r.l2_local = r.h1_global = r.sv_interp = r.triple = r.u_norm = nan;
  }
  return r;
}

/// Pairwise rates log(e_i / e_{i+1}) / log(h_i / h_{i+1}); empty where an
/// error is zero or negative.
inline std::vector<std::optional<double>> eoc(std::span<const double> h, std::span<const double> e) {
  if (h.size() != e.size() || h.size() < 2)
    throw InvalidArgument("eoc: need at least two (h, error) pairs of matching length");
  std::vector<std::optional<double>> out;
  for (std::size_t i = 0; i + 1 < h.size(); ++i) {
    if (!(e[i] > 0.0) || !(e[i + 1] > 0.0) || !(h[i] > 0.0) || !(h[i + 1] > 0.0) || h[i] == h[i + 1])
      out.emplace_back(std::nullopt);
    else
      out.emplace_back(std::log(e[i] / e[i + 1]) / std::log(h[i] / h[i + 1]));
  }
  return out;
}

} // namespace cauchyfem
