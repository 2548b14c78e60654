#pragma once

// Triangulations of the unit square: construction, face topology and
// boundary tagging.

#include "cauchyfem/core.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <istream>
#include <map>
#include <ostream>
#include <random>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace cauchyfem {

/// Triangulation with counter-clockwise cells.
struct Mesh {
  std::vector<Vec2> vertices;
  std::vector<std::array<int, 3>> cells;
  std::vector<double> h_cell; ///< longest edge of each cell
  double h_max = 0.0;
  int level = 0; ///< subdivisions per side, 0 if unknown

  [[nodiscard]] std::size_t num_vertices() const { return vertices.size(); }
  [[nodiscard]] std::size_t num_cells() const { return cells.size(); }

  [[nodiscard]] double signed_area(std::size_t c) const {
    const auto& t = cells[c];
    const Vec2 e1 = vertices[t[1]] - vertices[t[0]];
    const Vec2 e2 = vertices[t[2]] - vertices[t[0]];
    return 0.5 * (e1.x() * e2.y() - e1.y() * e2.x());
  }

  /// Nominal mesh size 1/n of a uniform family; falls back to h_max.
  [[nodiscard]] double nominal_h() const { return level > 0 ? 1.0 / level : h_max; }
};

namespace detail {

inline void update_cell_sizes(Mesh& mesh) {
  mesh.h_cell.resize(mesh.cells.size());
  mesh.h_max = 0.0;
  for (std::size_t c = 0; c < mesh.cells.size(); ++c) {
    const auto& t = mesh.cells[c];
    double h = 0.0;
    for (int i = 0; i < 3; ++i)
      h = std::max(h, (mesh.vertices[t[(i + 1) % 3]] - mesh.vertices[t[i]]).norm());
    mesh.h_cell[c] = h;
    mesh.h_max = std::max(mesh.h_max, h);
  }
}

/// Uniform double in [0,1) from the top 53 bits; identical on every platform
/// for a given engine state (unlike std::uniform_real_distribution).
inline double unit_uniform(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Circumradius over inradius of a cell.
inline double shape_ratio(const Mesh& m, std::size_t c) {
  const auto& t = m.cells[c];
  const double a = (m.vertices[t[1]] - m.vertices[t[2]]).norm();
  const double b = (m.vertices[t[0]] - m.vertices[t[2]]).norm();
  const double e = (m.vertices[t[0]] - m.vertices[t[1]]).norm();
  const double area = std::abs(m.signed_area(c));
  return a * b * e * (a + b + e) / (8.0 * area * area);
}

/// Value for the right isosceles cells of the unjittered mesh, 1 + sqrt(2).
inline const double structured_shape_ratio = 1.0 + std::sqrt(2.0);

inline bool on_square_boundary(const Vec2& p) {
  return p.x() == 0.0 || p.x() == 1.0 || p.y() == 0.0 || p.y() == 1.0;
}

} // namespace detail

/// Builds a right-triangle mesh of the unit square with n subdivisions per side.
///
/// Diagonals alternate in a checkerboard pattern. Interior vertices are
/// displaced by a seeded offset of magnitude at most jitter/n; boundary
/// vertices never move. If a draw inverts a cell the mesh is redrawn with
/// half the amplitude, up to a fixed number of attempts.
inline Mesh build_unit_square_mesh(int n, double jitter = 0.0, std::uint64_t seed = 0) {
  if (n < 1)
    throw InvalidArgument("build_unit_square_mesh: n must be >= 1");
  if (!(jitter >= 0.0 && jitter <= 0.3))
    throw InvalidArgument("build_unit_square_mesh: jitter must lie in [0, 0.3]");

  const int np = n + 1;
  auto vid = [np](int i, int j) { return j * np + i; };

  Mesh base;
  base.level = n;
  base.vertices.reserve(static_cast<std::size_t>(np) * np);
  for (int j = 0; j < np; ++j)
    for (int i = 0; i < np; ++i)
      base.vertices.emplace_back(i == n ? 1.0 : double(i) / n, j == n ? 1.0 : double(j) / n);

  base.cells.reserve(2 * static_cast<std::size_t>(n) * n);
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      const int a = vid(i, j), b = vid(i + 1, j), c = vid(i + 1, j + 1), d = vid(i, j + 1);
      if ((i + j) % 2 == 0) {
        base.cells.push_back({a, b, c});
        base.cells.push_back({a, c, d});
      } else {
        base.cells.push_back({a, b, d});
        base.cells.push_back({b, c, d});
      }
    }
  }

  if (jitter == 0.0) {
    detail::update_cell_sizes(base);
    return base;
  }

  // Interior vertices are moved one at a time; a draw is rejected when an
  // adjacent cell would invert or exceed the shape bound, and after
  // max_draws rejections the vertex stays on the grid.
  constexpr int max_draws = 16;
  const double bound = 3.0 * detail::structured_shape_ratio;
  std::vector<std::vector<std::size_t>> vertex_cells(base.vertices.size());
  for (std::size_t c = 0; c < base.cells.size(); ++c)
    for (int v : base.cells[c]) vertex_cells[v].push_back(c);

  Mesh mesh = base;
  std::mt19937_64 rng(seed);
  // Each component in [-a, a] with a = (jitter/n)/sqrt(2) keeps |offset| <= jitter/n.
  const double a = jitter / n / std::sqrt(2.0);
  for (std::size_t v = 0; v < mesh.vertices.size(); ++v) {
    if (detail::on_square_boundary(base.vertices[v]))
      continue;
    for (int draw = 0; draw < max_draws; ++draw) {
      const double dx = (2.0 * detail::unit_uniform(rng) - 1.0) * a;
      const double dy = (2.0 * detail::unit_uniform(rng) - 1.0) * a;
      mesh.vertices[v] = base.vertices[v] + Vec2(dx, dy);
      bool ok = true;
      for (std::size_t c : vertex_cells[v])
        ok = ok && mesh.signed_area(c) > 0.0 && detail::shape_ratio(mesh, c) <= bound;
      if (ok)
        break;
      mesh.vertices[v] = base.vertices[v];
    }
  }
  detail::update_cell_sizes(mesh);
  return mesh;
}

/// One edge of the triangulation.
struct Face {
  std::array<int, 2> vertices{};
  /// Adjacent cells; cells[1] == -1 on the boundary. For interior faces
  /// cells[0] < cells[1].
  std::array<int, 2> cells{-1, -1};
  /// Outward on the boundary, from cells[0] towards cells[1] inside.
  Vec2 normal = Vec2::Zero();
  double length = 0.0;
  Vec2 midpoint = Vec2::Zero();

  [[nodiscard]] bool interior() const { return cells[1] >= 0; }
};

struct FaceSet {
  std::vector<Face> faces;
  /// For every cell, the face opposite each local vertex.
  std::vector<std::array<int, 3>> cell_faces;
  std::size_t num_interior = 0;
  std::size_t num_boundary = 0;
};

/// Enumerates the edges of a mesh with adjacency, normals and lengths.
inline FaceSet extract_face_topology(const Mesh& mesh) {
  FaceSet out;
  out.cell_faces.resize(mesh.num_cells());
  std::map<std::pair<int, int>, int> index;
  for (std::size_t c = 0; c < mesh.num_cells(); ++c) {
    const auto& t = mesh.cells[c];
    for (int i = 0; i < 3; ++i) {
      const int a = t[(i + 1) % 3], b = t[(i + 2) % 3];
      const auto key = std::minmax(a, b);
      auto [it, inserted] = index.try_emplace(key, static_cast<int>(out.faces.size()));
      if (inserted) {
        Face f;
        f.vertices = {key.first, key.second};
        f.cells[0] = static_cast<int>(c);
        out.faces.push_back(f);
      } else {
        Face& f = out.faces[it->second];
        if (f.cells[1] >= 0)
          throw MeshError("extract_face_topology: edge shared by more than two cells");
        f.cells[1] = static_cast<int>(c);
      }
      out.cell_faces[c][i] = it->second;
    }
  }

  for (auto& f : out.faces) {
    if (f.cells[1] >= 0 && f.cells[1] < f.cells[0])
      std::swap(f.cells[0], f.cells[1]);
    const Vec2& p = mesh.vertices[f.vertices[0]];
    const Vec2& q = mesh.vertices[f.vertices[1]];
    const Vec2 t = q - p;
    f.length = t.norm();
    f.midpoint = 0.5 * (p + q);
    Vec2 n(t.y(), -t.x());
    n /= f.length;
    // Orient away from the first adjacent cell.
    const auto& cell = mesh.cells[f.cells[0]];
    const Vec2 centroid = (mesh.vertices[cell[0]] + mesh.vertices[cell[1]] + mesh.vertices[cell[2]]) / 3.0;
    if (n.dot(f.midpoint - centroid) < 0.0)
      n = -n;
    f.normal = n;
    if (f.interior())
      ++out.num_interior;
    else
      ++out.num_boundary;
  }
  return out;
}

/// Data carried by a boundary face.
enum class BoundaryTag { None, Dirichlet, Neumann, Cauchy };

/// Named boundary subsets derived from the face tags.
enum class BoundarySet {
  Dirichlet,           ///< faces with Dirichlet data
  Neumann,             ///< faces with Neumann data
  DirichletComplement, ///< boundary minus Dirichlet
  NeumannComplement,   ///< boundary minus Neumann
  Cauchy,              ///< faces with both data
  Unobserved,          ///< faces with no data
};

enum class Layout { FullNeumann, CauchyTopRight, CauchyInflow, CauchyMixed };

inline Layout parse_layout(std::string_view name) {
  if (name == "full-neumann") return Layout::FullNeumann;
  if (name == "cauchy-topright") return Layout::CauchyTopRight;
  if (name == "cauchy-inflow") return Layout::CauchyInflow;
  if (name == "cauchy-mixed") return Layout::CauchyMixed;
  throw InvalidArgument("unknown boundary layout: " + std::string(name));
}

struct TaggedMesh {
  Mesh mesh;
  FaceSet faces;
  std::vector<BoundaryTag> tags; ///< per face; None on interior faces

  [[nodiscard]] bool in(BoundarySet set, std::size_t f) const {
    if (faces.faces[f].interior())
      return false;
    const BoundaryTag t = tags[f];
    const bool dir = t == BoundaryTag::Dirichlet || t == BoundaryTag::Cauchy;
    const bool neu = t == BoundaryTag::Neumann || t == BoundaryTag::Cauchy;
    switch (set) {
    case BoundarySet::Dirichlet: return dir;
    case BoundarySet::Neumann: return neu;
    case BoundarySet::DirichletComplement: return !dir;
    case BoundarySet::NeumannComplement: return !neu;
    case BoundarySet::Cauchy: return dir && neu;
    case BoundarySet::Unobserved: return !dir && !neu;
    }
    return false;
  }

  [[nodiscard]] std::vector<int> faces_in(BoundarySet set) const {
    std::vector<int> out;
    for (std::size_t f = 0; f < faces.faces.size(); ++f)
      if (in(set, f))
        out.push_back(static_cast<int>(f));
    return out;
  }
};

/// Tags boundary faces from a predicate on the face midpoint.
inline TaggedMesh tag_boundary(Mesh mesh, const std::function<BoundaryTag(const Vec2&)>& predicate) {
  TaggedMesh out;
  out.faces = extract_face_topology(mesh);
  out.mesh = std::move(mesh);
  out.tags.assign(out.faces.faces.size(), BoundaryTag::None);
  bool any_data = false;
  for (std::size_t f = 0; f < out.faces.faces.size(); ++f) {
    if (out.faces.faces[f].interior())
      continue;
    out.tags[f] = predicate(out.faces.faces[f].midpoint);
    any_data = any_data || out.tags[f] != BoundaryTag::None;
  }
  if (!any_data)
    throw InvalidArgument("tag_boundary: layout carries no Dirichlet or Neumann data");
  return out;
}

inline TaggedMesh tag_boundary(Mesh mesh, Layout layout) {
  // Midpoints of boundary faces lie exactly on the square boundary.
  auto side = [](const Vec2& m, int which) {
    switch (which) {
    case 0: return m.x() == 0.0;
    case 1: return m.x() == 1.0;
    case 2: return m.y() == 0.0;
    default: return m.y() == 1.0;
    }
  };
  std::function<BoundaryTag(const Vec2&)> pred;
  switch (layout) {
  case Layout::FullNeumann:
    pred = [](const Vec2&) { return BoundaryTag::Neumann; };
    break;
  case Layout::CauchyTopRight:
    pred = [side](const Vec2& m) { return side(m, 1) || side(m, 3) ? BoundaryTag::Cauchy : BoundaryTag::None; };
    break;
  case Layout::CauchyInflow:
    pred = [side](const Vec2& m) { return side(m, 2) || side(m, 1) ? BoundaryTag::Cauchy : BoundaryTag::None; };
    break;
  case Layout::CauchyMixed:
    pred = [side](const Vec2& m) { return side(m, 0) || side(m, 3) ? BoundaryTag::Cauchy : BoundaryTag::None; };
    break;
  }
  return tag_boundary(std::move(mesh), pred);
}

/// Writes `nv nc`, then `x y` per vertex, then `i j k` per cell (0-based).
inline void write_mesh(std::ostream& os, const Mesh& mesh) {
  os.precision(17);
  os << mesh.num_vertices() << ' ' << mesh.num_cells() << '\n';
  for (const auto& p : mesh.vertices)
    os << p.x() << ' ' << p.y() << '\n';
  for (const auto& c : mesh.cells)
    os << c[0] << ' ' << c[1] << ' ' << c[2] << '\n';
}

inline Mesh read_mesh(std::istream& is) {
  std::size_t nv = 0, nc = 0;
  if (!(is >> nv >> nc))
    throw MeshError("read_mesh: missing header");
  Mesh mesh;
  mesh.vertices.resize(nv);
  for (auto& p : mesh.vertices)
    if (!(is >> p.x() >> p.y()))
      throw MeshError("read_mesh: truncated vertex list");
  mesh.cells.resize(nc);
  for (auto& c : mesh.cells) {
    if (!(is >> c[0] >> c[1] >> c[2]))
      throw MeshError("read_mesh: truncated cell list");
    for (int v : c)
      if (v < 0 || static_cast<std::size_t>(v) >= nv)
        throw MeshError("read_mesh: vertex index out of range");
  }
  for (std::size_t c = 0; c < nc; ++c)
    if (mesh.signed_area(c) <= 0.0)
      throw MeshError("read_mesh: cell with non-positive area");
  detail::update_cell_sizes(mesh);
  return mesh;
}

} // namespace cauchyfem
