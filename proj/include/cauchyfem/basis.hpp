#pragma once

// Lagrange P1/P2 bases on the reference triangle (0,0),(1,0),(0,1),
// quadrature rules and the affine cell map.

#include "cauchyfem/core.hpp"
#include "cauchyfem/mesh.hpp"

#include <array>
#include <cmath>
#include <span>
#include <vector>

namespace cauchyfem {

inline constexpr int max_local_dofs = 6;

template <class T>
using LocalArray = std::array<T, max_local_dofs>;

inline int local_dof_count(int degree) {
  if (degree == 1) return 3;
  if (degree == 2) return 6;
  throw InvalidArgument("unsupported polynomial degree " + std::to_string(degree));
}

/// Reference-coordinate nodes. Vertices first, then the midpoint of the
/// edge opposite vertex i at position 3 + i.
inline std::vector<Vec2> reference_nodes(int degree) {
  std::vector<Vec2> nodes{{0.0, 0.0}, {1.0, 0.0}, {0.0, 1.0}};
  if (local_dof_count(degree) == 6) {
    nodes.emplace_back(0.5, 0.5);
    nodes.emplace_back(0.0, 0.5);
    nodes.emplace_back(0.5, 0.0);
  }
  return nodes;
}

/// Basis values, gradients and Hessians at one reference point.
struct ShapeSet {
  int size = 0;
  LocalArray<double> value{};
  LocalArray<Vec2> grad{};
  LocalArray<Mat2> hess{};
};

inline ShapeSet reference_shapes(int degree, const Vec2& xi) {
  const int n = local_dof_count(degree);
  const std::array<double, 3> lam{1.0 - xi.x() - xi.y(), xi.x(), xi.y()};
  const std::array<Vec2, 3> dlam{Vec2(-1.0, -1.0), Vec2(1.0, 0.0), Vec2(0.0, 1.0)};
  ShapeSet s;
  s.size = n;
  if (n == 3) {
    for (int i = 0; i < 3; ++i) {
      s.value[i] = lam[i];
      s.grad[i] = dlam[i];
      s.hess[i].setZero();
    }
    return s;
  }
  for (int i = 0; i < 3; ++i) {
    s.value[i] = lam[i] * (2.0 * lam[i] - 1.0);
    s.grad[i] = (4.0 * lam[i] - 1.0) * dlam[i];
    s.hess[i] = 4.0 * dlam[i] * dlam[i].transpose();
  }
  for (int i = 0; i < 3; ++i) {
    const int a = (i + 1) % 3, b = (i + 2) % 3;
    s.value[3 + i] = 4.0 * lam[a] * lam[b];
    s.grad[3 + i] = 4.0 * (lam[b] * dlam[a] + lam[a] * dlam[b]);
    s.hess[3 + i] = 4.0 * (dlam[a] * dlam[b].transpose() + dlam[b] * dlam[a].transpose());
  }
  return s;
}

/// Evaluation table over a point list: entry [p][i] for point p, basis i.
/// Order 0 fills values only, 1 adds gradients, 2 adds Hessians.
struct BasisTable {
  int degree = 1;
  int order = 0;
  std::vector<LocalArray<double>> values;
  std::vector<LocalArray<Vec2>> gradients;
  std::vector<LocalArray<Mat2>> hessians;
};

inline BasisTable eval_basis(int degree, std::span<const Vec2> points, int order) {
  if (order < 0 || order > 2)
    throw InvalidArgument("eval_basis: derivative order must be 0, 1 or 2");
  local_dof_count(degree);
  BasisTable t;
  t.degree = degree;
  t.order = order;
  for (const Vec2& p : points) {
    const ShapeSet s = reference_shapes(degree, p);
    t.values.push_back(s.value);
    if (order >= 1) t.gradients.push_back(s.grad);
    if (order >= 2) t.hessians.push_back(s.hess);
  }
  return t;
}

inline Vec2 from_barycentric(double l0, double l1, double l2) {
  (void)l0;
  return {l1, l2};
}

// --- quadrature ------------------------------------------------------------

/// Rule on the reference triangle; weights sum to 1/2.
struct TriangleQuadrature {
  std::vector<Vec2> points;
  std::vector<double> weights;
  int exactness = 0;
};

/// Rule on [0,1]; weights sum to 1.
struct SegmentQuadrature {
  std::vector<double> points;
  std::vector<double> weights;
  int exactness = 0;
};

inline constexpr int max_triangle_exactness = 6;
inline constexpr int max_segment_exactness = 9;

namespace detail {

// Weights below are normalised to the triangle area (sum 1) and scaled at the end.
inline void add_orbit3(TriangleQuadrature& q, double a, double w) {
  const double b = 1.0 - 2.0 * a;
  q.points.push_back(from_barycentric(b, a, a));
  q.points.push_back(from_barycentric(a, b, a));
  q.points.push_back(from_barycentric(a, a, b));
  q.weights.insert(q.weights.end(), 3, w);
}

inline void add_orbit6(TriangleQuadrature& q, double a, double b, double w) {
  const double c = 1.0 - a - b;
  const std::array<std::array<double, 3>, 6> perms{{{a, b, c}, {a, c, b}, {b, a, c}, {b, c, a}, {c, a, b}, {c, b, a}}};
  for (const auto& l : perms)
    q.points.push_back(from_barycentric(l[0], l[1], l[2]));
  q.weights.insert(q.weights.end(), 6, w);
}

} // namespace detail

inline TriangleQuadrature triangle_quadrature(int exactness) {
  if (exactness < 0 || exactness > max_triangle_exactness)
    throw InvalidArgument("triangle_quadrature: exactness " + std::to_string(exactness) + " not supported");
  TriangleQuadrature q;
  if (exactness <= 1) {
    q.exactness = 1;
    q.points.emplace_back(1.0 / 3.0, 1.0 / 3.0);
    q.weights.push_back(1.0);
  } else if (exactness == 2) {
    q.exactness = 2;
    q.points = {{0.5, 0.0}, {0.5, 0.5}, {0.0, 0.5}};
    q.weights.assign(3, 1.0 / 3.0);
  } else if (exactness <= 4) {
    // Dunavant, 6 points.
    q.exactness = 4;
    detail::add_orbit3(q, 0.445948490915965, 0.223381589678011);
    detail::add_orbit3(q, 0.091576213509771, 0.109951743655322);
  } else {
    // Dunavant, 12 points.
    q.exactness = 6;
    detail::add_orbit3(q, 0.249286745170910, 0.116786275726379);
    detail::add_orbit3(q, 0.063089014491502, 0.050844906370207);
    detail::add_orbit6(q, 0.053145049844817, 0.310352451033784, 0.082851075618374);
  }
  double sum = 0.0;
  for (double w : q.weights) sum += w;
  for (double& w : q.weights) w *= 0.5 / sum;
  return q;
}

/// Gauss-Legendre on [0,1] with ceil((exactness+1)/2) points.
inline SegmentQuadrature segment_quadrature(int exactness) {
  if (exactness < 0 || exactness > max_segment_exactness)
    throw InvalidArgument("segment_quadrature: exactness " + std::to_string(exactness) + " not supported");
  const int n = exactness / 2 + 1;
  std::vector<double> x, w; // on [-1,1]
  switch (n) {
  case 1:
    x = {0.0};
    w = {2.0};
    break;
  case 2:
    x = {-1.0 / std::sqrt(3.0), 1.0 / std::sqrt(3.0)};
    w = {1.0, 1.0};
    break;
  case 3:
    x = {-std::sqrt(0.6), 0.0, std::sqrt(0.6)};
    w = {5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0};
    break;
  case 4: {
    const double a = std::sqrt(3.0 / 7.0 - 2.0 / 7.0 * std::sqrt(1.2));
    const double b = std::sqrt(3.0 / 7.0 + 2.0 / 7.0 * std::sqrt(1.2));
    const double wa = (18.0 + std::sqrt(30.0)) / 36.0, wb = (18.0 - std::sqrt(30.0)) / 36.0;
    x = {-b, -a, a, b};
    w = {wb, wa, wa, wb};
    break;
  }
  default: {
    const double a = std::sqrt(5.0 - 2.0 * std::sqrt(10.0 / 7.0)) / 3.0;
    const double b = std::sqrt(5.0 + 2.0 * std::sqrt(10.0 / 7.0)) / 3.0;
    const double wa = (322.0 + 13.0 * std::sqrt(70.0)) / 900.0, wb = (322.0 - 13.0 * std::sqrt(70.0)) / 900.0;
    x = {-b, -a, 0.0, a, b};
    w = {wb, wa, 128.0 / 225.0, wa, wb};
    break;
  }
  }
  SegmentQuadrature q;
  q.exactness = 2 * n - 1;
  for (std::size_t i = 0; i < x.size(); ++i) {
    q.points.push_back(0.5 * (x[i] + 1.0));
    q.weights.push_back(0.5 * w[i]);
  }
  return q;
}

// --- affine map --------------------------------------------------------------

/// Affine map x = origin + J xi of one cell.
struct CellGeometry {
  Vec2 origin = Vec2::Zero();
  Mat2 jacobian = Mat2::Identity();
  Mat2 inverse = Mat2::Identity();
  double det = 1.0;
  double h = 1.0; ///< cell diameter

  static CellGeometry from_vertices(const Vec2& a, const Vec2& b, const Vec2& c) {
    CellGeometry g;
    g.origin = a;
    g.jacobian.col(0) = b - a;
    g.jacobian.col(1) = c - a;
    g.det = g.jacobian.determinant();
    const double scale = std::max({(b - a).squaredNorm(), (c - a).squaredNorm(), (c - b).squaredNorm()});
    if (!(std::abs(g.det) > 1e-14 * scale))
      throw MeshError("CellGeometry: singular Jacobian");
    g.inverse = g.jacobian.inverse();
    g.h = std::sqrt(scale);
    return g;
  }

  static CellGeometry of(const Mesh& mesh, std::size_t cell) {
    const auto& t = mesh.cells[cell];
    return from_vertices(mesh.vertices[t[0]], mesh.vertices[t[1]], mesh.vertices[t[2]]);
  }

  [[nodiscard]] double area() const { return 0.5 * std::abs(det); }
  [[nodiscard]] Vec2 map(const Vec2& xi) const { return origin + jacobian * xi; }
  [[nodiscard]] Vec2 pullback(const Vec2& x) const { return inverse * (x - origin); }
  [[nodiscard]] Vec2 gradient(const Vec2& ref_grad) const { return inverse.transpose() * ref_grad; }
  /// Affine map, so no curvature terms.
  [[nodiscard]] Mat2 hessian(const Mat2& ref_hess) const { return inverse.transpose() * ref_hess * inverse; }
};

/// Physical shape functions and derivatives at a reference point of a cell.
inline ShapeSet physical_shapes(int degree, const CellGeometry& geo, const Vec2& xi) {
  ShapeSet s = reference_shapes(degree, xi);
  for (int i = 0; i < s.size; ++i) {
    s.grad[i] = geo.gradient(s.grad[i]);
    s.hess[i] = geo.hessian(s.hess[i]);
  }
  return s;
}

} // namespace cauchyfem
