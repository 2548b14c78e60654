#pragma once

// Bilinear forms and right-hand sides of the stabilised primal-adjoint
// system
//
//   [ S_V  A^T ] [U]   [b_V]
//   [ A   -S_W ] [Z] = [b_W]
//
// with A_ij = a_h(phi_j, phi_i), S_V = s_V^D + s_V^S and S_W = s_W^D + s_W^S.
// Both unknowns live in the same space X_h^k, so every block is N x N.

#include "cauchyfem/basis.hpp"
#include "cauchyfem/problem.hpp"
#include "cauchyfem/space.hpp"

#include <Eigen/Sparse>

#include <algorithm>
#include <optional>
#include <tuple>
#include <utility>
#include <vector>

namespace cauchyfem {

using SparseMatrix = Eigen::SparseMatrix<double>;
using Vector = Eigen::VectorXd;

/// Quadrature exactness used for all forms: 2k + 2, which integrates every
/// product of P_k functions with affine coefficients exactly.
inline int quadrature_exactness(int degree) { return std::min(2 * degree + 2, max_triangle_exactness); }

namespace detail {

class TripletSink {
public:
  explicit TripletSink(std::size_t n) : n_(static_cast<Eigen::Index>(n)) {}

  void add(int i, int j, double v) {
    if (v != 0.0) triplets_.emplace_back(i, j, v);
  }

  [[nodiscard]] SparseMatrix build() const {
    SparseMatrix m(n_, n_);
    m.setFromTriplets(triplets_.begin(), triplets_.end());
    m.makeCompressed();
    return m;
  }

private:
  Eigen::Index n_;
  std::vector<Eigen::Triplet<double>> triplets_;
};

inline Vector zeros(const Discretisation& d) { return Vector::Zero(static_cast<Eigen::Index>(d.num_dofs())); }

/// Calls fn(x, weight, shapes) at each quadrature point of a cell.
template <class Fn>
void for_cell_points(const Discretisation& d, std::size_t cell, const TriangleQuadrature& q, Fn&& fn) {
  const CellGeometry geo = CellGeometry::of(d.mesh(), cell);
  for (std::size_t p = 0; p < q.points.size(); ++p) {
    const ShapeSet s = physical_shapes(d.degree(), geo, q.points[p]);
    fn(geo.map(q.points[p]), q.weights[p] * std::abs(geo.det), s);
  }
}

/// Calls fn(x, weight, shapes) at each quadrature point of a boundary face,
/// with shapes taken from its cell.
template <class Fn>
void for_boundary_points(const Discretisation& d, const Face& f, const SegmentQuadrature& q, Fn&& fn) {
  const CellGeometry geo = CellGeometry::of(d.mesh(), static_cast<std::size_t>(f.cells[0]));
  for (const FacePoint& fp : face_points(d.mesh(), f, q))
    fn(fp.x, fp.weight, physical_shapes(d.degree(), geo, geo.pullback(fp.x)));
}

inline double peclet_factor(const ProblemSpec& spec, const StabilisationConfig& cfg, const Face& f) {
  if (!cfg.peclet_weighting || !spec.convection)
    return 1.0;
  const double speed = spec.beta(f.midpoint).norm();
  if (speed == 0.0)
    return 1.0;
  return std::min(1.0, spec.diffusion_min() / (speed * f.length));
}

/// Both-sided traces on an interior face: local dofs of cells[0] followed by
/// those of cells[1] (shared dofs appear twice; contributions add up).
struct JumpSet {
  int size = 0;
  std::array<int, 2 * max_local_dofs> dofs{};
  std::array<double, 2 * max_local_dofs> normal_jump{};
  std::array<double, 2 * max_local_dofs> laplacian_jump{};
};

template <class Fn>
void for_interior_face_points(const Discretisation& d, const Face& f, const SegmentQuadrature& q, Fn&& fn) {
  const CellGeometry g0 = CellGeometry::of(d.mesh(), static_cast<std::size_t>(f.cells[0]));
  const CellGeometry g1 = CellGeometry::of(d.mesh(), static_cast<std::size_t>(f.cells[1]));
  const auto& dofs0 = d.dofs.cell_dofs[f.cells[0]];
  const auto& dofs1 = d.dofs.cell_dofs[f.cells[1]];
  const int nl = d.dofs.local_size;
  for (const FacePoint& fp : face_points(d.mesh(), f, q)) {
    const ShapeSet s0 = physical_shapes(d.degree(), g0, g0.pullback(fp.x));
    const ShapeSet s1 = physical_shapes(d.degree(), g1, g1.pullback(fp.x));
    JumpSet j;
    j.size = 2 * nl;
    for (int i = 0; i < nl; ++i) {
      j.dofs[i] = dofs0[i];
      j.dofs[nl + i] = dofs1[i];
      j.normal_jump[i] = s0.grad[i].dot(f.normal);
      j.normal_jump[nl + i] = -s1.grad[i].dot(f.normal);
      j.laplacian_jump[i] = s0.hess[i].trace();
      j.laplacian_jump[nl + i] = -s1.hess[i].trace();
    }
    fn(fp.x, fp.weight, j);
  }
}

} // namespace detail

/// a_h(u, w) = (sigma grad u + beta u, grad w) + (c u, w)
///             - <B u, w>_{Gamma_N'} - <B* w, u>_{Gamma_D}
/// Rows index the test function w, columns the trial function u.
inline SparseMatrix assemble_a_h(const Discretisation& d, const ProblemSpec& spec) {
  const int k = d.degree();
  const auto tq = triangle_quadrature(quadrature_exactness(k));
  const auto sq = segment_quadrature(quadrature_exactness(k));
  detail::TripletSink sink(d.num_dofs());
  const int nl = d.dofs.local_size;

  for (std::size_t c = 0; c < d.mesh().num_cells(); ++c) {
    const auto& dofs = d.dofs.cell_dofs[c];
    detail::for_cell_points(d, c, tq, [&](const Vec2& x, double w, const ShapeSet& s) {
      const Vec2 beta = spec.beta(x);
      for (int i = 0; i < nl; ++i) {
        for (int j = 0; j < nl; ++j) {
          const Vec2 flux = spec.sigma * s.grad[j] + beta * s.value[j];
          sink.add(dofs[i], dofs[j], w * (flux.dot(s.grad[i]) + spec.reaction * s.value[j] * s.value[i]));
        }
      }
    });
  }

  const auto& tm = d.tmesh;
  for (std::size_t fi = 0; fi < d.faces().size(); ++fi) {
    const Face& f = d.faces()[fi];
    const bool neumann_complement = tm.in(BoundarySet::NeumannComplement, fi);
    const bool dirichlet = tm.in(BoundarySet::Dirichlet, fi);
    if (!neumann_complement && !dirichlet)
      continue;
    const auto& dofs = d.dofs.cell_dofs[f.cells[0]];
    detail::for_boundary_points(d, f, sq, [&](const Vec2& x, double w, const ShapeSet& s) {
      for (int i = 0; i < nl; ++i) {
        for (int j = 0; j < nl; ++j) {
          double v = 0.0;
          if (neumann_complement)
            v -= spec.conormal(x, f.normal, s.value[j], s.grad[j]) * s.value[i];
          if (dirichlet)
            v -= spec.adjoint_conormal(f.normal, s.grad[i]) * s.value[j];
          sink.add(dofs[i], dofs[j], w * v);
        }
      }
    });
  }
  return sink.build();
}

/// s_V^D(u, w) = gamma_D <h^-1 u, w>_{Gamma_D} + gamma_D <h B u, B w>_{Gamma_N}
/// and its data vector gamma_D <h^-1 g, w>_{Gamma_D} + gamma_D <h (psi + dpsi), B w>_{Gamma_N}.
inline std::pair<SparseMatrix, Vector> assemble_data_penalty(const Discretisation& d, const ProblemSpec& spec,
                                                             const StabilisationConfig& cfg) {
  cfg.validate();
  const auto sq = segment_quadrature(quadrature_exactness(d.degree()));
  detail::TripletSink sink(d.num_dofs());
  Vector b = detail::zeros(d);
  const int nl = d.dofs.local_size;
  const auto& tm = d.tmesh;
  for (std::size_t fi = 0; fi < d.faces().size(); ++fi) {
    const Face& f = d.faces()[fi];
    const bool dirichlet = tm.in(BoundarySet::Dirichlet, fi);
    const bool neumann = tm.in(BoundarySet::Neumann, fi);
    if (!dirichlet && !neumann)
      continue;
    const double h = f.length;
    const auto& dofs = d.dofs.cell_dofs[f.cells[0]];
    detail::for_boundary_points(d, f, sq, [&](const Vec2& x, double w, const ShapeSet& s) {
      LocalArray<double> flux{};
      for (int i = 0; i < nl; ++i)
        flux[i] = spec.conormal(x, f.normal, s.value[i], s.grad[i]);
      const double g = dirichlet ? spec.dirichlet_value(x) : 0.0;
      const double psi = neumann ? spec.measured_flux(x, f.normal) : 0.0;
      for (int i = 0; i < nl; ++i) {
        if (dirichlet)
          b[dofs[i]] += w * cfg.gamma_d / h * g * s.value[i];
        if (neumann)
          b[dofs[i]] += w * cfg.gamma_d * h * psi * flux[i];
        for (int j = 0; j < nl; ++j) {
          double v = 0.0;
          if (dirichlet) v += cfg.gamma_d / h * s.value[j] * s.value[i];
          if (neumann) v += cfg.gamma_d * h * flux[j] * flux[i];
          sink.add(dofs[i], dofs[j], w * v);
        }
      }
    });
  }
  return {sink.build(), std::move(b)};
}

/// s_W^D(z, v) = gamma_D <h^-1 z, v>_{Gamma_N'} + gamma_D <h B* z, B* v>_{Gamma_D'}
inline SparseMatrix assemble_adjoint_penalty(const Discretisation& d, const ProblemSpec& spec,
                                             const StabilisationConfig& cfg) {
  cfg.validate();
  const auto sq = segment_quadrature(quadrature_exactness(d.degree()));
  detail::TripletSink sink(d.num_dofs());
  const int nl = d.dofs.local_size;
  const auto& tm = d.tmesh;
  for (std::size_t fi = 0; fi < d.faces().size(); ++fi) {
    const Face& f = d.faces()[fi];
    const bool neumann_complement = tm.in(BoundarySet::NeumannComplement, fi);
    const bool dirichlet_complement = tm.in(BoundarySet::DirichletComplement, fi);
    if (!neumann_complement && !dirichlet_complement)
      continue;
    const double h = f.length;
    const auto& dofs = d.dofs.cell_dofs[f.cells[0]];
    detail::for_boundary_points(d, f, sq, [&](const Vec2&, double w, const ShapeSet& s) {
      for (int i = 0; i < nl; ++i) {
        for (int j = 0; j < nl; ++j) {
          double v = 0.0;
          if (neumann_complement) v += cfg.gamma_d / h * s.value[j] * s.value[i];
          if (dirichlet_complement)
            v += cfg.gamma_d * h * spec.adjoint_conormal(f.normal, s.grad[j]) *
                 spec.adjoint_conormal(f.normal, s.grad[i]);
          sink.add(dofs[i], dofs[j], w * v);
        }
      }
    });
  }
  return sink.build();
}

/// Interior stabilisation s_V^S or s_W^S and its consistency vector.
///
/// GaLS:  gamma_S (h^2 L u, L v)_h + gamma_S <h [d_n u], [d_n v]>_{F_I}, with L*
///        on the adjoint side; primal vector gamma_S (h^2 (f + df), L v)_h.
/// CIP:   gamma_S <h^3 [lap u], [lap v]>_{F_I} + gamma_S <h [d_n u], [d_n v]>_{F_I}.
/// H1:    gamma_S (grad z, grad w), adjoint side only.
/// With Peclet weighting the gradient-jump coefficient is multiplied by
/// min(1, mu / (|beta|_F h_F)).
inline std::pair<SparseMatrix, Vector> assemble_interior_stabilisation(const Discretisation& d,
                                                                       const ProblemSpec& spec,
                                                                       const StabilisationConfig& cfg, Side side) {
  if (side == Side::Primal && cfg.primal == StabKind::H1Adjoint)
    throw InvalidArgument("assemble_interior_stabilisation: H1 stabilisation requested on the primal side");
  cfg.validate();
  const StabKind kind = cfg.kind(side);
  const int nl = d.dofs.local_size;
  const auto tq = triangle_quadrature(quadrature_exactness(d.degree()));
  const auto sq = segment_quadrature(quadrature_exactness(d.degree()));
  detail::TripletSink sink(d.num_dofs());
  Vector b = detail::zeros(d);
  const double gs = cfg.gamma_s;

  if (kind == StabKind::H1Adjoint || kind == StabKind::GaLS) {
    for (std::size_t c = 0; c < d.mesh().num_cells(); ++c) {
      const auto& dofs = d.dofs.cell_dofs[c];
      const double h2 = d.mesh().h_cell[c] * d.mesh().h_cell[c];
      detail::for_cell_points(d, c, tq, [&](const Vec2& x, double w, const ShapeSet& s) {
        if (kind == StabKind::H1Adjoint) {
          for (int i = 0; i < nl; ++i)
            for (int j = 0; j < nl; ++j)
              sink.add(dofs[i], dofs[j], w * gs * s.grad[j].dot(s.grad[i]));
          return;
        }
        LocalArray<double> lv{};
        for (int i = 0; i < nl; ++i) {
          const PointValue pv{s.value[i], s.grad[i], s.hess[i]};
          lv[i] = side == Side::Primal ? spec.apply(x, pv) : spec.apply_adjoint(x, pv);
        }
        const double f = side == Side::Primal ? spec.measured_source(x) : 0.0;
        for (int i = 0; i < nl; ++i) {
          b[dofs[i]] += w * gs * h2 * f * lv[i];
          for (int j = 0; j < nl; ++j)
            sink.add(dofs[i], dofs[j], w * gs * h2 * lv[j] * lv[i]);
        }
      });
    }
  }

  if (kind == StabKind::GaLS || kind == StabKind::CIP) {
    for (const Face& f : d.faces()) {
      if (!f.interior())
        continue;
      const double h = f.length;
      const double grad_coeff = gs * h * detail::peclet_factor(spec, cfg, f);
      const double lap_coeff = kind == StabKind::CIP ? gs * h * h * h : 0.0;
      detail::for_interior_face_points(d, f, sq, [&](const Vec2&, double w, const detail::JumpSet& j) {
        for (int a = 0; a < j.size; ++a)
          for (int bb = 0; bb < j.size; ++bb)
            sink.add(j.dofs[a], j.dofs[bb],
                     w * (grad_coeff * j.normal_jump[bb] * j.normal_jump[a] +
                          lap_coeff * j.laplacian_jump[bb] * j.laplacian_jump[a]));
      });
    }
  }
  return {sink.build(), std::move(b)};
}

/// l_h(w) = (f + df, w) + <psi + dpsi, w>_{Gamma_N} - <B* w, g>_{Gamma_D}.
/// The last term balances the symmetric boundary term of a_h for g != 0.
inline Vector assemble_load(const Discretisation& d, const ProblemSpec& spec) {
  const int nl = d.dofs.local_size;
  const auto tq = triangle_quadrature(quadrature_exactness(d.degree()));
  const auto sq = segment_quadrature(quadrature_exactness(d.degree()));
  Vector b = detail::zeros(d);
  for (std::size_t c = 0; c < d.mesh().num_cells(); ++c) {
    const auto& dofs = d.dofs.cell_dofs[c];
    detail::for_cell_points(d, c, tq, [&](const Vec2& x, double w, const ShapeSet& s) {
      const double f = spec.measured_source(x);
      for (int i = 0; i < nl; ++i)
        b[dofs[i]] += w * f * s.value[i];
    });
  }
  const auto& tm = d.tmesh;
  for (std::size_t fi = 0; fi < d.faces().size(); ++fi) {
    const Face& f = d.faces()[fi];
    const bool neumann = tm.in(BoundarySet::Neumann, fi);
    const bool dirichlet = tm.in(BoundarySet::Dirichlet, fi);
    if (!neumann && !dirichlet)
      continue;
    const auto& dofs = d.dofs.cell_dofs[f.cells[0]];
    detail::for_boundary_points(d, f, sq, [&](const Vec2& x, double w, const ShapeSet& s) {
      const double psi = neumann ? spec.measured_flux(x, f.normal) : 0.0;
      const double g = dirichlet ? spec.dirichlet_value(x) : 0.0;
      for (int i = 0; i < nl; ++i) {
        b[dofs[i]] += w * psi * s.value[i];
        if (dirichlet)
          b[dofs[i]] -= w * g * spec.adjoint_conormal(f.normal, s.grad[i]);
      }
    });
  }
  return b;
}

/// Consistent mass matrix.
inline SparseMatrix assemble_mass(const Discretisation& d) {
  const int nl = d.dofs.local_size;
  const auto tq = triangle_quadrature(quadrature_exactness(d.degree()));
  detail::TripletSink sink(d.num_dofs());
  for (std::size_t c = 0; c < d.mesh().num_cells(); ++c) {
    const auto& dofs = d.dofs.cell_dofs[c];
    detail::for_cell_points(d, c, tq, [&](const Vec2&, double w, const ShapeSet& s) {
      for (int i = 0; i < nl; ++i)
        for (int j = 0; j < nl; ++j)
          sink.add(dofs[i], dofs[j], w * s.value[i] * s.value[j]);
    });
  }
  return sink.build();
}

/// Integrals of the basis functions, so that m.dot(U) = int u_h.
inline Vector assemble_mean_functional(const Discretisation& d) {
  const int nl = d.dofs.local_size;
  const auto tq = triangle_quadrature(quadrature_exactness(d.degree()));
  Vector m = detail::zeros(d);
  for (std::size_t c = 0; c < d.mesh().num_cells(); ++c) {
    const auto& dofs = d.dofs.cell_dofs[c];
    detail::for_cell_points(d, c, tq, [&](const Vec2&, double w, const ShapeSet& s) {
      for (int i = 0; i < nl; ++i)
        m[dofs[i]] += w * s.value[i];
    });
  }
  return m;
}

/// All blocks of the discrete system for one problem and configuration.
struct AssembledBlocks {
  SparseMatrix a;       ///< a_h, rows W_h, columns V_h
  SparseMatrix sv_data; ///< s_V^D
  SparseMatrix sv_stab; ///< s_V^S
  SparseMatrix sw_data; ///< s_W^D
  SparseMatrix sw_stab; ///< s_W^S
  Vector bv_data;       ///< s_V^D(u, .) from data
  Vector bv_stab;       ///< s_V^S(u, .) from data (GaLS only)
  Vector bw;            ///< l_h
  Vector mean;          ///< int phi_i

  [[nodiscard]] SparseMatrix sv() const { return sv_data + sv_stab; }
  [[nodiscard]] SparseMatrix sw() const { return sw_data + sw_stab; }
  [[nodiscard]] Vector bv() const { return bv_data + bv_stab; }
  [[nodiscard]] Eigen::Index size() const { return a.rows(); }
};

inline AssembledBlocks assemble_blocks(const Discretisation& d, const ProblemSpec& spec,
                                       const StabilisationConfig& cfg) {
  if (cfg.degree != d.degree())
    throw InvalidArgument("assemble_blocks: configuration degree does not match the discretisation");
  AssembledBlocks b;
  b.a = assemble_a_h(d, spec);
  std::tie(b.sv_data, b.bv_data) = assemble_data_penalty(d, spec, cfg);
  std::tie(b.sv_stab, b.bv_stab) = assemble_interior_stabilisation(d, spec, cfg, Side::Primal);
  b.sw_data = assemble_adjoint_penalty(d, spec, cfg);
  b.sw_stab = assemble_interior_stabilisation(d, spec, cfg, Side::Adjoint).first;
  b.bw = assemble_load(d, spec);
  b.mean = assemble_mean_functional(d);
  return b;
}

/// The assembled global system. Unknowns are ordered (U, Z) followed, when a
/// mean constraint is active, by the multipliers of int u_h = mean and
/// int z_h = 0.
struct SaddleSystem {
  SparseMatrix matrix;
  Vector rhs;
  Eigen::Index n_v = 0;
  Eigen::Index n_w = 0;
  bool mean_constraint = false;

  [[nodiscard]] Eigen::Index size() const { return matrix.rows(); }
  [[nodiscard]] Eigen::Index u_offset() const { return 0; }
  [[nodiscard]] Eigen::Index z_offset() const { return n_v; }
};

/// Builds [[S_V, A^T], [A, -S_W]] and (b_V, b_W).
///
/// With `mean` set, int u_h = *mean is imposed by a multiplier. The adjoint
/// gets the companion constraint int z_h = 0: when Gamma_N' is empty the
/// constant is an exact kernel vector of both a_h(v, .) and s_W.
inline SaddleSystem build_saddle_system(const AssembledBlocks& b, std::optional<double> mean = std::nullopt) {
  const Eigen::Index n = b.size();
  if (b.a.cols() != n || b.sv_data.rows() != n || b.sv_stab.rows() != n || b.sw_data.rows() != n ||
      b.sw_stab.rows() != n || b.bv_data.size() != n || b.bv_stab.size() != n || b.bw.size() != n)
    throw InvalidArgument("build_saddle_system: block dimensions are inconsistent");
  if (mean && b.mean.size() != n)
    throw InvalidArgument("build_saddle_system: mean functional missing");

  SaddleSystem sys;
  sys.n_v = n;
  sys.n_w = n;
  sys.mean_constraint = mean.has_value();
  const Eigen::Index extra = mean ? 2 : 0;
  const Eigen::Index total = 2 * n + extra;

  std::vector<Eigen::Triplet<double>> t;
  const SparseMatrix sv = b.sv();
  const SparseMatrix sw = b.sw();
  t.reserve(static_cast<std::size_t>(sv.nonZeros() + sw.nonZeros() + 2 * b.a.nonZeros() + 4 * n));
  for (Eigen::Index col = 0; col < n; ++col) {
    for (SparseMatrix::InnerIterator it(sv, col); it; ++it)
      t.emplace_back(it.row(), col, it.value());
    for (SparseMatrix::InnerIterator it(sw, col); it; ++it)
      t.emplace_back(n + it.row(), n + col, -it.value());
    for (SparseMatrix::InnerIterator it(b.a, col); it; ++it) {
      t.emplace_back(n + it.row(), col, it.value()); // A
      t.emplace_back(col, n + it.row(), it.value()); // A^T
    }
  }
  sys.rhs = Vector::Zero(total);
  sys.rhs.head(n) = b.bv();
  sys.rhs.segment(n, n) = b.bw;
  if (mean) {
    for (Eigen::Index i = 0; i < n; ++i) {
      if (b.mean[i] == 0.0) continue;
      t.emplace_back(2 * n, i, b.mean[i]);
      t.emplace_back(i, 2 * n, b.mean[i]);
      t.emplace_back(2 * n + 1, n + i, b.mean[i]);
      t.emplace_back(n + i, 2 * n + 1, b.mean[i]);
    }
    sys.rhs[2 * n] = *mean;
  }
  sys.matrix.resize(total, total);
  sys.matrix.setFromTriplets(t.begin(), t.end());
  sys.matrix.makeCompressed();
  return sys;
}

} // namespace cauchyfem
