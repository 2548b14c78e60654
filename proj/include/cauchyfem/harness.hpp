#pragma once

// Experiment orchestration: problem registry, perturbed boundary data,
// convergence / parameter / perturbation studies and CSV output.

#include "cauchyfem/analysis.hpp"
#include "cauchyfem/assembly.hpp"
#include "cauchyfem/mesh.hpp"
#include "cauchyfem/problem.hpp"
#include "cauchyfem/solver.hpp"

#include <algorithm>
#include <array>
#include <cstdint>
#include <fstream>
#include <istream>
#include <map>
#include <memory>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace cauchyfem {

enum class ProblemName { ConvDiffNeumann, CauchyLaplace, CauchyConvDiffCase1, CauchyConvDiffCase2 };

inline ProblemName parse_problem(std::string_view name) {
  if (name == "convdiff-neumann") return ProblemName::ConvDiffNeumann;
  if (name == "cauchy-laplace") return ProblemName::CauchyLaplace;
  if (name == "cauchy-convdiff-case1") return ProblemName::CauchyConvDiffCase1;
  if (name == "cauchy-convdiff-case2") return ProblemName::CauchyConvDiffCase2;
  throw InvalidArgument("unknown problem: " + std::string(name));
}

inline std::string problem_name(ProblemName p) {
  switch (p) {
  case ProblemName::ConvDiffNeumann: return "convdiff-neumann";
  case ProblemName::CauchyLaplace: return "cauchy-laplace";
  case ProblemName::CauchyConvDiffCase1: return "cauchy-convdiff-case1";
  case ProblemName::CauchyConvDiffCase2: return "cauchy-convdiff-case2";
  }
  return {};
}

struct ExperimentConfig {
  ProblemName problem = ProblemName::CauchyLaplace;
  int degree = 1;
  std::string stab = "cip";
  std::optional<double> gamma_s; ///< problem default when unset
  double gamma_d = 10.0;
  std::vector<int> levels;       ///< problem default when empty
  double jitter = 0.2;
  std::uint64_t seed = 1;
  double varsigma = 0.0;         ///< relative strength of the flux perturbation
  std::uint64_t perturbation_seed = 2024;
  std::string out;
  /// Replaces the problem's exact solution (data are derived from it).
  std::optional<ExactSolution> solution;

  void validate() const {
    local_dof_count(degree);
    if (!(varsigma >= 0.0))
      throw InvalidArgument("ExperimentConfig: varsigma must be non-negative");
    if (gamma_s && !(*gamma_s > 0.0))
      throw InvalidArgument("ExperimentConfig: gamma_S must be positive");
    if (!(gamma_d > 0.0))
      throw InvalidArgument("ExperimentConfig: gamma_D must be positive");
    for (std::size_t i = 0; i < levels.size(); ++i) {
      if (levels[i] < 1)
        throw InvalidArgument("ExperimentConfig: levels must be positive");
      if (i > 0 && levels[i] <= levels[i - 1])
        throw InvalidArgument("ExperimentConfig: levels must be increasing");
    }
  }

  [[nodiscard]] std::vector<int> effective_levels() const {
    if (!levels.empty()) return levels;
    return degree == 1 ? std::vector<int>{8, 16, 32, 64} : std::vector<int>{4, 8, 16, 32};
  }

  /// gamma_S as given, else 0.01 (k=1) / 0.001 (k=2), or 0.05 / 1.0 with
  /// perturbed data.
  [[nodiscard]] double effective_gamma_s() const {
    if (gamma_s) return *gamma_s;
    if (varsigma > 0.0 && problem == ProblemName::CauchyLaplace) return degree == 1 ? 0.05 : 1.0;
    return degree == 1 ? 0.01 : 0.001;
  }
};

/// Problem data, boundary layout and solver options of a registered problem.
struct ProblemSetup {
  ProblemSpec spec;
  Layout layout = Layout::CauchyTopRight;
  std::optional<double> mean; ///< prescribed int u_h
  bool peclet = false;
};

inline ProblemSetup make_setup(const ExperimentConfig& cfg) {
  ProblemSetup s;
  const ExactSolution u = cfg.solution ? *cfg.solution : solutions::bubble();
  switch (cfg.problem) {
  case ProblemName::ConvDiffNeumann: {
    s.spec = make_problem(u, Mat2::Identity(), 0.0, rotating_inflow_field());
    s.layout = Layout::FullNeumann;
    // int u over the unit square, by a rule exact for degree <= 6.
    const Discretisation coarse = discretise(tag_boundary(build_unit_square_mesh(4), Layout::FullNeumann), 1);
    const auto q = triangle_quadrature(max_triangle_exactness);
    double integral = 0.0;
    for (std::size_t c = 0; c < coarse.mesh().num_cells(); ++c)
      detail::for_cell_points(coarse, c, q, [&](const Vec2& x, double w, const ShapeSet&) { integral += w * u.value(x); });
    s.mean = integral;
    break;
  }
  case ProblemName::CauchyLaplace:
    s.spec = make_problem(u);
    s.layout = Layout::CauchyTopRight;
    break;
  case ProblemName::CauchyConvDiffCase1:
  case ProblemName::CauchyConvDiffCase2:
    s.spec = make_problem(u, Mat2::Identity(), 0.0, rotating_inflow_field());
    s.layout = cfg.problem == ProblemName::CauchyConvDiffCase1 ? Layout::CauchyInflow : Layout::CauchyMixed;
    s.peclet = true;
    break;
  }
  return s;
}

// --- perturbation ------------------------------------------------------------------

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Lagrange interpolation through values at 0, 1/4, 1/2, 3/4, 1.
inline double quartic_interpolant(const std::array<double, 5>& v, double s) {
  double out = 0.0;
  for (int i = 0; i < 5; ++i) {
    double l = 1.0;
    for (int j = 0; j < 5; ++j)
      if (j != i) l *= (s - 0.25 * j) / (0.25 * (i - j));
    out += v[i] * l;
  }
  return out;
}

} // namespace detail

/// Seed of mesh level n derived from a base seed.
inline std::uint64_t level_seed(std::uint64_t base, int level) {
  return detail::splitmix64(base ^ detail::splitmix64(static_cast<std::uint64_t>(level)));
}

/// Random function on Gamma_N: on each face a quartic in the face parameter
/// through five equispaced nodal values drawn uniformly in [0,1]. Endpoint
/// values are shared between neighbouring faces. delta psi = strength * v * psi.
class PerturbationField {
public:
  PerturbationField() = default;

  PerturbationField(const TaggedMesh& tm, double strength, std::uint64_t seed) : strength_(strength), seed_(seed) {
    if (!(strength >= 0.0))
      throw InvalidArgument("make_perturbation: strength must be non-negative");
    std::mt19937_64 rng(seed);
    std::map<int, double> vertex_value;
    for (std::size_t v = 0; v < tm.mesh.num_vertices(); ++v)
      if (detail::on_square_boundary(tm.mesh.vertices[v]))
        vertex_value[static_cast<int>(v)] = detail::unit_uniform(rng);
    for (std::size_t fi = 0; fi < tm.faces.faces.size(); ++fi) {
      if (!tm.in(BoundarySet::Neumann, fi)) continue;
      const Face& f = tm.faces.faces[fi];
      Segment seg;
      seg.face = static_cast<int>(fi);
      seg.a = tm.mesh.vertices[f.vertices[0]];
      seg.b = tm.mesh.vertices[f.vertices[1]];
      seg.nodal[0] = vertex_value.at(f.vertices[0]);
      seg.nodal[4] = vertex_value.at(f.vertices[1]);
      for (int i = 1; i < 4; ++i) seg.nodal[i] = detail::unit_uniform(rng);
      segments_[side_of(f.normal)].push_back(seg);
    }
    for (auto& side : segments_)
      std::sort(side.begin(), side.end(), [](const Segment& l, const Segment& r) { return l.lo() < r.lo(); });
  }

  [[nodiscard]] double strength() const { return strength_; }
  [[nodiscard]] std::uint64_t seed() const { return seed_; }

  /// v_rand at a boundary point; zero off Gamma_N.
  [[nodiscard]] double v_rand(const Vec2& x, const Vec2& n) const {
    const auto& side = segments_[side_of(n)];
    const double t = along(side_of(n), x);
    auto it = std::upper_bound(side.begin(), side.end(), t, [](double v, const Segment& s) { return v < s.lo(); });
    if (it == side.begin()) return 0.0;
    --it;
    if (t > it->hi()) return 0.0;
    const double len = (it->b - it->a).norm();
    return detail::quartic_interpolant(it->nodal, (x - it->a).norm() / len);
  }

  /// Nodal values of each perturbed face, in face order.
  [[nodiscard]] std::vector<std::array<double, 5>> nodal_values() const {
    std::vector<std::pair<int, std::array<double, 5>>> all;
    for (const auto& side : segments_)
      for (const auto& s : side) all.emplace_back(s.face, s.nodal);
    std::sort(all.begin(), all.end(), [](const auto& l, const auto& r) { return l.first < r.first; });
    std::vector<std::array<double, 5>> out;
    for (auto& p : all) out.push_back(p.second);
    return out;
  }

  /// Installs delta psi = strength * v_rand * psi on a problem.
  void apply_to(ProblemSpec& spec) const {
    if (strength_ == 0.0) {
      spec.neumann_perturbation = nullptr;
      return;
    }
    auto self = std::make_shared<PerturbationField>(*this);
    BoundaryFunction psi = spec.neumann;
    spec.neumann_perturbation = [self, psi](const Vec2& x, const Vec2& n) {
      return self->strength_ * self->v_rand(x, n) * (psi ? psi(x, n) : 0.0);
    };
  }

private:
  struct Segment {
    int face = -1;
    Vec2 a, b;
    std::array<double, 5> nodal{};
    int axis = 0;
    [[nodiscard]] double lo() const { return std::min(coord(a), coord(b)); }
    [[nodiscard]] double hi() const { return std::max(coord(a), coord(b)); }
    [[nodiscard]] double coord(const Vec2& p) const { return std::abs(b.x() - a.x()) > std::abs(b.y() - a.y()) ? p.x() : p.y(); }
  };

  static int side_of(const Vec2& n) {
    if (n.x() < -0.5) return 0;
    if (n.x() > 0.5) return 1;
    if (n.y() < -0.5) return 2;
    return 3;
  }
  static double along(int side, const Vec2& x) { return side < 2 ? x.y() : x.x(); }

  double strength_ = 0.0;
  std::uint64_t seed_ = 0;
  std::array<std::vector<Segment>, 4> segments_;
};

inline PerturbationField make_perturbation(const TaggedMesh& tm, double strength, std::uint64_t seed) {
  return {tm, strength, seed};
}

// --- single runs and studies ---------------------------------------------------------

struct CaseResult {
  ErrorReport report;
  Discretisation disc;
  ProblemSpec spec;
  StabilisationConfig stab;
  DiscreteSolution solution;
};

/// Mesh, tag, assemble, solve and analyse one level.
inline CaseResult run_case(const ExperimentConfig& cfg, int level) {
  cfg.validate();
  ProblemSetup setup = make_setup(cfg);
  CaseResult r;
  r.stab = stabilisation_from_name(cfg.stab, cfg.effective_gamma_s(), cfg.gamma_d, cfg.degree, setup.peclet);
  r.disc = discretise(tag_boundary(build_unit_square_mesh(level, cfg.jitter, level_seed(cfg.seed, level)), setup.layout),
                      cfg.degree);
  r.spec = std::move(setup.spec);
  if (cfg.varsigma > 0.0)
    make_perturbation(r.disc.tmesh, cfg.varsigma, level_seed(cfg.perturbation_seed, level)).apply_to(r.spec);
  validate(r.spec);
  const AssembledBlocks blocks = assemble_blocks(r.disc, r.spec, r.stab);
  r.solution = solve(build_saddle_system(blocks, setup.mean));
  r.report = analyse(r.disc, r.spec, r.stab, blocks, r.solution);
  return r;
}

struct ConvergenceTable {
  std::vector<ErrorReport> rows; ///< decreasing h

  [[nodiscard]] std::vector<double> column(double ErrorReport::*field) const {
    std::vector<double> out;
    for (const auto& r : rows) out.push_back(r.*field);
    return out;
  }
  [[nodiscard]] std::vector<double> monitor() const {
    std::vector<double> out;
    for (const auto& r : rows) out.push_back(r.monitor());
    return out;
  }
  [[nodiscard]] std::vector<double> h() const { return column(&ErrorReport::h); }
  [[nodiscard]] std::vector<std::optional<double>> rates(double ErrorReport::*field) const {
    const auto hh = h();
    const auto e = column(field);
    return eoc(hh, e);
  }
  [[nodiscard]] std::vector<std::optional<double>> monitor_rates() const {
    const auto hh = h();
    const auto e = monitor();
    return eoc(hh, e);
  }
};

inline ConvergenceTable run_convergence(const ExperimentConfig& cfg) {
  ConvergenceTable t;
  for (int n : cfg.effective_levels()) t.rows.push_back(run_case(cfg, n).report);
  return t;
}

/// One row per gamma_S at the finest configured level (or the only one).
inline std::vector<ErrorReport> run_gamma_sweep(ExperimentConfig cfg, const std::vector<double>& gammas) {
  const int level = cfg.effective_levels().back();
  std::vector<ErrorReport> out;
  for (double g : gammas) {
    cfg.gamma_s = g;
    out.push_back(run_case(cfg, level).report);
  }
  return out;
}

/// One row per perturbation strength at the finest configured level.
inline std::vector<ErrorReport> run_perturbation_sweep(ExperimentConfig cfg, const std::vector<double>& strengths) {
  const int level = cfg.effective_levels().back();
  std::vector<ErrorReport> out;
  for (double s : strengths) {
    cfg.varsigma = s;
    out.push_back(run_case(cfg, level).report);
  }
  return out;
}

// --- Oswald verification ------------------------------------------------------------

struct OswaldLevel {
  int level = 0;
  double max_interpolation = 0.0;
  double max_stability = 0.0;
};

/// Largest Oswald ratios over `samples` P2 fields with nodal values uniform in
/// [-1, 1], on each of the given jittered meshes.
inline std::vector<OswaldLevel> run_oswald_study(const std::vector<int>& levels, int samples, double jitter,
                                                 std::uint64_t seed) {
  if (samples < 1)
    throw InvalidArgument("run_oswald_study: need at least one sample");
  std::vector<OswaldLevel> out;
  for (int n : levels) {
    const Discretisation d = discretise(tag_boundary(build_unit_square_mesh(n, jitter, level_seed(seed, n)),
                                                     Layout::FullNeumann), 2);
    const ProblemSpec laplace = make_problem(solutions::zero());
    const StabilisationConfig unit = stabilisation_from_name("cip", 1.0, 1.0, 2);
    const SparseMatrix s = assemble_interior_stabilisation(d, laplace, unit, Side::Primal).first;
    std::mt19937_64 rng(level_seed(seed ^ 0x05a1dULL, n));
    OswaldLevel row;
    row.level = n;
    for (int i = 0; i < samples; ++i) {
      Vector u(static_cast<Eigen::Index>(d.num_dofs()));
      for (Eigen::Index j = 0; j < u.size(); ++j) u[j] = 2.0 * detail::unit_uniform(rng) - 1.0;
      const OswaldRatios r = oswald_ratios(d, u, s);
      row.max_interpolation = std::max(row.max_interpolation, r.interpolation);
      row.max_stability = std::max(row.max_stability, r.stability);
    }
    out.push_back(row);
  }
  return out;
}

// --- CSV -------------------------------------------------------------------------------

inline constexpr const char* config_csv_header = "problem,degree,stab,gamma_s,gamma_d,varsigma,jitter,seed,monitor,l2_rel";

inline void write_csv_header(std::ostream& os) { os << report_csv_header << ',' << config_csv_header << '\n'; }

inline void write_csv_row(std::ostream& os, const ErrorReport& r, const ExperimentConfig& cfg) {
  write_report_csv(os, r);
  const auto old = os.precision(12);
  os << ',' << problem_name(cfg.problem) << ',' << cfg.degree << ',' << cfg.stab << ',' << cfg.effective_gamma_s() << ','
     << cfg.gamma_d << ',' << cfg.varsigma << ',' << cfg.jitter << ',' << cfg.seed << ',' << r.monitor() << ','
     << r.l2_relative() << '\n';
  os.precision(old);
}

/// Writes mesh and per-vertex values of i_V u - u_h, u_h and z_h next to `stem`.
inline void write_field_snapshot(const std::string& stem, const CaseResult& r) {
  {
    std::ofstream m(stem + "_mesh.txt");
    write_mesh(m, r.disc.mesh());
  }
  const std::size_t nv = r.disc.mesh().num_vertices();
  auto dump = [&](const std::string& name, auto value) {
    std::ofstream f(stem + "_" + name + ".txt");
    f.precision(17);
    f << nv << '\n';
    for (std::size_t v = 0; v < nv; ++v) f << value(v) << '\n';
  };
  dump("uh", [&](std::size_t v) { return r.solution.u[static_cast<Eigen::Index>(v)]; });
  dump("zh", [&](std::size_t v) { return r.solution.z[static_cast<Eigen::Index>(v)]; });
  if (r.spec.exact)
    dump("error", [&](std::size_t v) {
      return r.spec.exact->value(r.disc.mesh().vertices[v]) - r.solution.u[static_cast<Eigen::Index>(v)];
    });
}

// --- config file -----------------------------------------------------------------------

inline std::vector<double> parse_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    std::size_t pos = 0;
    try {
      out.push_back(std::stod(item, &pos));
    } catch (const std::logic_error&) {
      throw InvalidArgument("malformed list entry: " + item);
    }
    if (item.find_first_not_of(" \t", pos) != std::string::npos)
      throw InvalidArgument("malformed list entry: " + item);
  }
  return out;
}

namespace detail {

inline void apply_setting_unchecked(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
  if (key == "problem") cfg.problem = parse_problem(value);
  else if (key == "degree") cfg.degree = std::stoi(value);
  else if (key == "stab") { stabilisation_from_name(value, 1.0, 1.0, 1); cfg.stab = value; }
  else if (key == "gamma-s" || key == "gamma_s") cfg.gamma_s = std::stod(value);
  else if (key == "gamma-d" || key == "gamma_d") cfg.gamma_d = std::stod(value);
  else if (key == "levels") {
    cfg.levels.clear();
    for (double v : parse_list(value)) cfg.levels.push_back(static_cast<int>(v));
  }
  else if (key == "jitter") cfg.jitter = std::stod(value);
  else if (key == "seed") cfg.seed = std::stoull(value);
  else if (key == "sigma" || key == "varsigma") cfg.varsigma = std::stod(value);
  else if (key == "perturbation-seed") cfg.perturbation_seed = std::stoull(value);
  else if (key == "out") cfg.out = value;
  else throw InvalidArgument("unknown configuration key: " + key);
}

} // namespace detail

/// Applies one key=value setting; keys mirror the CLI flags without dashes.
inline void apply_setting(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
  try {
    detail::apply_setting_unchecked(cfg, key, value);
  } catch (const std::logic_error&) {
    throw InvalidArgument("bad value for " + key + ": " + value);
  }
}

/// Flat `key=value` lines; `#` starts a comment.
inline void read_config(std::istream& is, ExperimentConfig& cfg) {
  std::string line;
  while (std::getline(is, line)) {
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw InvalidArgument("configuration line without '=': " + line);
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
    };
    apply_setting(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
}

} // namespace cauchyfem
