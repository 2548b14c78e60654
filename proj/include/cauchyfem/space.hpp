#pragma once

// Continuous Lagrange spaces X_h^k over a tagged mesh.

#include "cauchyfem/basis.hpp"
#include "cauchyfem/mesh.hpp"

#include <Eigen/Dense>

#include <functional>

namespace cauchyfem {

using ScalarFunction = std::function<double(const Vec2&)>;

/// Global numbering: vertices first, then (for P2) one DOF per face.
struct DofMap {
  int degree = 1;
  int local_size = 3;
  std::size_t num_dofs = 0;
  std::vector<LocalArray<int>> cell_dofs;
  std::vector<Vec2> node_points;
};

inline DofMap make_dof_map(const Mesh& mesh, const FaceSet& faces, int degree) {
  DofMap d;
  d.degree = degree;
  d.local_size = local_dof_count(degree);
  const std::size_t nv = mesh.num_vertices();
  d.num_dofs = nv + (degree == 2 ? faces.faces.size() : 0);
  d.node_points = mesh.vertices;
  if (degree == 2)
    for (const auto& f : faces.faces)
      d.node_points.push_back(f.midpoint);
  d.cell_dofs.resize(mesh.num_cells());
  for (std::size_t c = 0; c < mesh.num_cells(); ++c) {
    auto& ld = d.cell_dofs[c];
    ld.fill(-1);
    for (int i = 0; i < 3; ++i)
      ld[i] = mesh.cells[c][i];
    if (degree == 2)
      for (int i = 0; i < 3; ++i)
        ld[3 + i] = static_cast<int>(nv) + faces.cell_faces[c][i];
  }
  return d;
}

/// A tagged mesh together with its P_k numbering. Shared by the primal and
/// adjoint spaces since both are X_h^k.
struct Discretisation {
  TaggedMesh tmesh;
  DofMap dofs;

  [[nodiscard]] int degree() const { return dofs.degree; }
  [[nodiscard]] std::size_t num_dofs() const { return dofs.num_dofs; }
  [[nodiscard]] const Mesh& mesh() const { return tmesh.mesh; }
  [[nodiscard]] const std::vector<Face>& faces() const { return tmesh.faces.faces; }
};

inline Discretisation discretise(TaggedMesh tmesh, int degree) {
  Discretisation d;
  d.dofs = make_dof_map(tmesh.mesh, tmesh.faces, degree);
  d.tmesh = std::move(tmesh);
  return d;
}

/// Nodal interpolant.
inline Eigen::VectorXd interpolate(const ScalarFunction& field, const DofMap& dofs) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(dofs.num_dofs));
  for (std::size_t i = 0; i < dofs.num_dofs; ++i)
    out[static_cast<Eigen::Index>(i)] = field(dofs.node_points[i]);
  return out;
}

/// Value, gradient and Hessian of a discrete function at one point of a cell.
struct PointValue {
  double value = 0.0;
  Vec2 grad = Vec2::Zero();
  Mat2 hess = Mat2::Zero();
};

inline PointValue evaluate(const ShapeSet& s, const LocalArray<int>& dofs, const Eigen::VectorXd& coeffs) {
  PointValue p;
  for (int i = 0; i < s.size; ++i) {
    const double c = coeffs[dofs[i]];
    p.value += c * s.value[i];
    p.grad += c * s.grad[i];
    p.hess += c * s.hess[i];
  }
  return p;
}

/// Physical quadrature point on a face.
struct FacePoint {
  Vec2 x;
  double weight; ///< quadrature weight times face length
};

inline std::vector<FacePoint> face_points(const Mesh& mesh, const Face& f, const SegmentQuadrature& q) {
  std::vector<FacePoint> pts;
  const Vec2& a = mesh.vertices[f.vertices[0]];
  const Vec2& b = mesh.vertices[f.vertices[1]];
  for (std::size_t i = 0; i < q.points.size(); ++i)
    pts.push_back({a + q.points[i] * (b - a), q.weights[i] * f.length});
  return pts;
}

/// Evaluates a discrete function at a physical point known to lie in `cell`.
inline PointValue evaluate_in_cell(const Discretisation& disc, std::size_t cell, const Vec2& x,
                                   const Eigen::VectorXd& coeffs) {
  const CellGeometry geo = CellGeometry::of(disc.mesh(), cell);
  return evaluate(physical_shapes(disc.degree(), geo, geo.pullback(x)), disc.dofs.cell_dofs[cell], coeffs);
}

} // namespace cauchyfem
