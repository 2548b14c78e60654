#include "cauchyfem/harness.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

using namespace cauchyfem;

namespace {

// max over [0,1] of sum_i |l_i(s)| for the five equispaced nodes, sampled densely.
double lebesgue_constant_4() {
  double best = 0.0;
  for (int k = 0; k <= 20000; ++k) {
    const double s = k / 20000.0;
    double sum = 0.0;
    for (int i = 0; i < 5; ++i) {
      double l = 1.0;
      for (int j = 0; j < 5; ++j)
        if (j != i) l *= (s - 0.25 * j) / (0.25 * (i - j));
      sum += std::abs(l);
    }
    best = std::max(best, sum);
  }
  return best;
}

TaggedMesh topright(int n) { return tag_boundary(build_unit_square_mesh(n, 0.2, 5), Layout::CauchyTopRight); }

std::string csv_of(const ExperimentConfig& cfg) {
  std::ostringstream os;
  write_csv_header(os);
  for (const auto& r : run_convergence(cfg).rows) write_csv_row(os, r, cfg);
  return os.str();
}

} // namespace

TEST(Perturbation, QuarticInterpolantReproducesQuartics) {
  auto p = [](double s) { return 1.0 - 2.0 * s + 3.0 * s * s * s - s * s * s * s; };
  std::array<double, 5> v{};
  for (int i = 0; i < 5; ++i) v[i] = p(0.25 * i);
  for (double s : {0.0, 0.1, 0.33, 0.8, 1.0}) EXPECT_NEAR(detail::quartic_interpolant(v, s), p(s), 1e-14);
}

TEST(Perturbation, DeterministicForSeed) {
  const TaggedMesh tm = topright(6);
  const auto a = make_perturbation(tm, 0.01, 42).nodal_values();
  const auto b = make_perturbation(tm, 0.01, 42).nodal_values();
  const auto c = make_perturbation(tm, 0.01, 43).nodal_values();
  EXPECT_EQ(a, b);
  EXPECT_NE(a, c);
  EXPECT_EQ(a.size(), tm.faces_in(BoundarySet::Neumann).size());
  for (const auto& face : a)
    for (double v : face) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
}

TEST(Perturbation, NodalValuesAndContinuity) {
  const TaggedMesh tm = topright(5);
  const PerturbationField p = make_perturbation(tm, 0.1, 7);
  const auto nodal = p.nodal_values();
  const auto faces = tm.faces_in(BoundarySet::Neumann);
  for (std::size_t i = 0; i < faces.size(); ++i) {
    const Face& f = tm.faces.faces[faces[i]];
    const Vec2 a = tm.mesh.vertices[f.vertices[0]], b = tm.mesh.vertices[f.vertices[1]];
    for (int j = 1; j < 4; ++j) EXPECT_NEAR(p.v_rand(a + 0.25 * j * (b - a), f.normal), nodal[i][j], 1e-12);
  }
  // Neighbouring faces share their endpoint value.
  std::map<int, std::set<double>> at_vertex;
  for (std::size_t i = 0; i < faces.size(); ++i) {
    const Face& f = tm.faces.faces[faces[i]];
    at_vertex[f.vertices[0]].insert(nodal[i][0]);
    at_vertex[f.vertices[1]].insert(nodal[i][4]);
  }
  for (const auto& [v, values] : at_vertex) EXPECT_EQ(values.size(), 1u) << "vertex " << v;
}

TEST(Perturbation, ZeroOffNeumannBoundary) {
  const TaggedMesh tm = topright(4);
  const PerturbationField p = make_perturbation(tm, 0.1, 3);
  for (double t : {0.1, 0.5, 0.9}) {
    EXPECT_EQ(p.v_rand({0.0, t}, {-1, 0}), 0.0);
    EXPECT_EQ(p.v_rand({t, 0.0}, {0, -1}), 0.0);
  }
}

TEST(Perturbation, BoundedByLebesgueConstant) {
  const double lambda = lebesgue_constant_4();
  EXPECT_NEAR(lambda, 2.2078, 1e-3);
  const TaggedMesh tm = topright(8);
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const PerturbationField p = make_perturbation(tm, 0.01, seed);
    for (int f : tm.faces_in(BoundarySet::Neumann)) {
      const Face& face = tm.faces.faces[f];
      const Vec2 a = tm.mesh.vertices[face.vertices[0]], b = tm.mesh.vertices[face.vertices[1]];
      for (int k = 0; k <= 40; ++k) {
        const double v = p.v_rand(a + (k / 40.0) * (b - a), face.normal);
        EXPECT_LE(std::abs(v), lambda + 1e-12);
      }
    }
  }
}

TEST(Perturbation, StrengthZeroIsNoPerturbation) {
  ProblemSpec spec = make_problem(solutions::bubble());
  make_perturbation(topright(4), 0.0, 1).apply_to(spec);
  EXPECT_FALSE(static_cast<bool>(spec.neumann_perturbation));
  EXPECT_THROW(make_perturbation(topright(4), -0.1, 1), InvalidArgument);
}

TEST(Perturbation, LoadChangeBounded) {
  const double sigma = 0.01;
  const double lambda = lebesgue_constant_4();
  const Discretisation d = discretise(topright(8), 1);
  const ProblemSpec clean = make_problem(solutions::bubble());
  ProblemSpec noisy = clean;
  make_perturbation(d.tmesh, sigma, 9).apply_to(noisy);
  const Vector diff = assemble_load(d, noisy) - assemble_load(d, clean);
  Vector bound = Vector::Zero(diff.size());
  const auto q = segment_quadrature(8);
  for (int fi : d.tmesh.faces_in(BoundarySet::Neumann)) {
    const Face& f = d.faces()[fi];
    const auto& dofs = d.dofs.cell_dofs[f.cells[0]];
    detail::for_boundary_points(d, f, q, [&](const Vec2& x, double w, const ShapeSet& s) {
      for (int i = 0; i < s.size; ++i) bound[dofs[i]] += w * std::abs(clean.neumann(x, f.normal) * s.value[i]);
    });
  }
  EXPECT_GT(diff.lpNorm<Eigen::Infinity>(), 0.0);
  for (Eigen::Index i = 0; i < diff.size(); ++i) EXPECT_LE(std::abs(diff[i]), sigma * lambda * bound[i] + 1e-15);
}

TEST(Perturbation, LevelSeedsDiffer) {
  std::set<std::uint64_t> seeds;
  for (int n : {4, 8, 16, 32, 64}) seeds.insert(level_seed(2024, n));
  EXPECT_EQ(seeds.size(), 5u);
  EXPECT_EQ(level_seed(1, 8), level_seed(1, 8));
}

TEST(Config, Defaults) {
  ExperimentConfig cfg;
  EXPECT_EQ(cfg.effective_levels(), (std::vector<int>{8, 16, 32, 64}));
  EXPECT_DOUBLE_EQ(cfg.effective_gamma_s(), 0.01);
  cfg.degree = 2;
  EXPECT_EQ(cfg.effective_levels(), (std::vector<int>{4, 8, 16, 32}));
  EXPECT_DOUBLE_EQ(cfg.effective_gamma_s(), 0.001);
  cfg.varsigma = 0.01;
  EXPECT_DOUBLE_EQ(cfg.effective_gamma_s(), 1.0);
  cfg.degree = 1;
  EXPECT_DOUBLE_EQ(cfg.effective_gamma_s(), 0.05);
  cfg.gamma_s = 0.2;
  EXPECT_DOUBLE_EQ(cfg.effective_gamma_s(), 0.2);
}

TEST(Config, ReadFile) {
  std::istringstream in("# experiment\nproblem = cauchy-convdiff-case2\ndegree=2  # quadratic\n"
                        "stab=gals\ngamma-s=0.003\nlevels=4,8\nsigma=0.01\nseed=12\n\n");
  ExperimentConfig cfg;
  read_config(in, cfg);
  EXPECT_EQ(cfg.problem, ProblemName::CauchyConvDiffCase2);
  EXPECT_EQ(cfg.degree, 2);
  EXPECT_EQ(cfg.stab, "gals");
  EXPECT_DOUBLE_EQ(*cfg.gamma_s, 0.003);
  EXPECT_EQ(cfg.levels, (std::vector<int>{4, 8}));
  EXPECT_DOUBLE_EQ(cfg.varsigma, 0.01);
  EXPECT_EQ(cfg.seed, 12u);
}

TEST(Config, RejectsBadInput) {
  ExperimentConfig cfg;
  std::istringstream unknown("colour=blue\n");
  EXPECT_THROW(read_config(unknown, cfg), InvalidArgument);
  std::istringstream no_eq("degree 2\n");
  EXPECT_THROW(read_config(no_eq, cfg), InvalidArgument);
  EXPECT_THROW(apply_setting(cfg, "levels", "4,x"), InvalidArgument);
  EXPECT_THROW(apply_setting(cfg, "degree", "two"), InvalidArgument);
  EXPECT_THROW(apply_setting(cfg, "stab", "supg"), InvalidArgument);
  EXPECT_THROW(apply_setting(cfg, "problem", "heat"), InvalidArgument);
  ExperimentConfig bad;
  bad.levels = {8, 4};
  EXPECT_THROW(bad.validate(), InvalidArgument);
  bad.levels = {};
  bad.varsigma = -1.0;
  EXPECT_THROW(bad.validate(), InvalidArgument);
  bad.varsigma = 0.0;
  bad.degree = 3;
  EXPECT_THROW(bad.validate(), InvalidArgument);
}

TEST(Config, ProblemNamesRoundTrip) {
  for (auto p : {ProblemName::ConvDiffNeumann, ProblemName::CauchyLaplace, ProblemName::CauchyConvDiffCase1,
                 ProblemName::CauchyConvDiffCase2})
    EXPECT_EQ(parse_problem(problem_name(p)), p);
}

TEST(Setup, RegisteredProblems) {
  ExperimentConfig cfg;
  cfg.problem = ProblemName::ConvDiffNeumann;
  const ProblemSetup conv = make_setup(cfg);
  EXPECT_EQ(conv.layout, Layout::FullNeumann);
  ASSERT_TRUE(conv.mean.has_value());
  EXPECT_NEAR(*conv.mean, 5.0 / 6.0, 1e-14);
  EXPECT_EQ(conv.spec.beta({1, 0}), Vec2(-100, 100));
  EXPECT_EQ(conv.spec.beta({0, 0}), Vec2(0, 0));
  cfg.problem = ProblemName::CauchyConvDiffCase1;
  const ProblemSetup case1 = make_setup(cfg);
  EXPECT_EQ(case1.layout, Layout::CauchyInflow);
  EXPECT_TRUE(case1.peclet);
  cfg.problem = ProblemName::CauchyLaplace;
  const ProblemSetup lap = make_setup(cfg);
  EXPECT_FALSE(lap.spec.convection.has_value());
  EXPECT_FALSE(lap.mean.has_value());
}

TEST(Runs, ConsistencyForAffineSolution) {
  ExperimentConfig cfg;
  cfg.solution = solutions::affine(0, 1, 1);
  cfg.levels = {4, 8};
  for (const auto& r : run_convergence(cfg).rows) {
    EXPECT_LT(r.l2_global, 1e-9);
    EXPECT_LT(r.h1_global, 1e-9);
    EXPECT_LT(r.monitor(), 1e-9);
  }
}

TEST(Runs, CsvReproducible) {
  ExperimentConfig cfg;
  cfg.levels = {4, 8};
  cfg.varsigma = 0.01;
  const std::string a = csv_of(cfg), b = csv_of(cfg);
  EXPECT_EQ(a, b);
  std::istringstream lines(a);
  std::string header, row;
  std::getline(lines, header);
  std::getline(lines, row);
  EXPECT_EQ(std::count(header.begin(), header.end(), ','), std::count(row.begin(), row.end(), ','));
  EXPECT_NE(row.find("cauchy-laplace,1,cip,0.05"), std::string::npos);
}

TEST(Runs, SweepsKeepOtherSettings) {
  ExperimentConfig cfg;
  cfg.levels = {4};
  const auto g = run_gamma_sweep(cfg, {0.01, 0.1});
  ASSERT_EQ(g.size(), 2u);
  EXPECT_NE(g[0].l2_global, g[1].l2_global);
  const auto s = run_perturbation_sweep(cfg, {0.0, 0.1});
  EXPECT_NE(s[0].l2_global, s[1].l2_global);
  EXPECT_EQ(s[0].level, 4);
}

TEST(Runs, SnapshotFiles) {
  ExperimentConfig cfg;
  const CaseResult r = run_case(cfg, 4);
  const auto dir = std::filesystem::temp_directory_path() / "cauchyfem_snapshot_test";
  std::filesystem::create_directories(dir);
  const std::string stem = (dir / "run").string();
  write_field_snapshot(stem, r);
  std::ifstream mesh_in(stem + "_mesh.txt");
  const Mesh m = read_mesh(mesh_in);
  EXPECT_EQ(m.num_vertices(), r.disc.mesh().num_vertices());
  for (const char* name : {"uh", "zh", "error"}) {
    std::ifstream in(stem + "_" + name + ".txt");
    std::size_t nv = 0, count = 0;
    in >> nv;
    double v;
    while (in >> v) ++count;
    EXPECT_EQ(nv, m.num_vertices());
    EXPECT_EQ(count, nv);
  }
  std::filesystem::remove_all(dir);
}

TEST(Oswald, StudyRatiosBounded) {
  const auto rows = run_oswald_study({4, 8}, 5, 0.2, 1);
  ASSERT_EQ(rows.size(), 2u);
  for (const auto& r : rows) {
    EXPECT_GT(r.max_interpolation, 0.0);
    EXPECT_LT(r.max_interpolation, 10.0);
    EXPECT_LE(r.max_stability, 1.0 + 1e-12);
  }
  EXPECT_THROW(run_oswald_study({4}, 0, 0.2, 1), InvalidArgument);
}
