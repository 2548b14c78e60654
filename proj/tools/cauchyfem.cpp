// Command line driver for the stabilised FEM experiments.

#include "cauchyfem/harness.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

namespace {

using namespace cauchyfem;

/// Flags shared by all experiment subcommands. Values are kept as strings and
/// applied after an optional config file, so flags override the file.
struct CommonFlags {
  std::string config;
  std::map<std::string, std::string> values;

  void attach(CLI::App* app) {
    app->add_option("--config", config, "flat key=value file mirroring the flags")->check(CLI::ExistingFile);
    add(app, "--problem", "convdiff-neumann | cauchy-laplace | cauchy-convdiff-case1 | cauchy-convdiff-case2");
    add(app, "--degree", "polynomial degree k (1 or 2)");
    add(app, "--stab", "gals | cip | h1adj");
    add(app, "--gamma-s", "interior stabilisation parameter");
    add(app, "--gamma-d", "boundary penalty parameter");
    add(app, "--levels", "comma separated subdivisions per side, e.g. 8,16,32");
    add(app, "--jitter", "vertex jitter in [0, 0.3]");
    add(app, "--seed", "mesh seed");
    add(app, "--sigma", "relative flux perturbation strength");
    add(app, "--perturbation-seed", "seed of the random perturbation");
    add(app, "--out", "CSV output path");
  }

  void add(CLI::App* app, const std::string& flag, const std::string& help) {
    app->add_option(flag, values[flag.substr(2)], help);
  }

  [[nodiscard]] ExperimentConfig build() const {
    ExperimentConfig cfg;
    if (!config.empty()) {
      std::ifstream in(config);
      read_config(in, cfg);
    }
    for (const auto& [key, value] : values)
      if (!value.empty()) apply_setting(cfg, key, value);
    cfg.validate();
    return cfg;
  }
};

void print_table(const std::vector<ErrorReport>& rows, bool with_rates) {
  std::printf("%6s %10s %8s %12s %12s %12s %12s %12s %8s %8s\n", "n", "h", "dof", "l2_global", "l2_local", "sV",
              "sW", "eta", "eoc_l2", "eoc_mon");
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const ErrorReport& r = rows[i];
    std::string e1 = "-", e2 = "-";
    if (with_rates && i > 0) {
      const double dh = std::log(rows[i - 1].h / r.h);
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.2f", std::log(rows[i - 1].l2_global / r.l2_global) / dh);
      e1 = buf;
      std::snprintf(buf, sizeof buf, "%.2f", std::log(rows[i - 1].monitor() / r.monitor()) / dh);
      e2 = buf;
    }
    std::printf("%6d %10.6f %8zu %12.4e %12.4e %12.4e %12.4e %12.4e %8s %8s\n", r.level, r.h, r.dofs, r.l2_global,
                r.l2_local, r.sv, r.sw, r.eta, e1.c_str(), e2.c_str());
  }
}

void write_rows(const std::string& path, const std::vector<std::pair<ErrorReport, ExperimentConfig>>& rows) {
  if (path.empty()) return;
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path);
  write_csv_header(out);
  for (const auto& [r, c] : rows) write_csv_row(out, r, c);
  std::printf("wrote %s\n", path.c_str());
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stabilised finite element methods for ill-posed elliptic problems"};
  app.require_subcommand(1);

  CommonFlags solve_flags, conv_flags, sweep_flags, pert_flags;
  std::string snapshot;
  auto* solve = app.add_subcommand("solve", "solve on the finest configured level");
  solve_flags.attach(solve);
  solve->add_option("--snapshot", snapshot, "write mesh and nodal fields with this path prefix");

  auto* conv = app.add_subcommand("convergence", "errors and rates under mesh refinement");
  conv_flags.attach(conv);

  std::string gamma_values = "0.001,0.003,0.01,0.05,0.1";
  auto* sweep = app.add_subcommand("sweep-gamma", "vary gamma_S on the finest configured level");
  sweep_flags.attach(sweep);
  sweep->add_option("--values", gamma_values, "comma separated gamma_S values");

  std::string mode = "sigma";
  std::string sigma_values = "0.001,0.01,0.1,1";
  auto* pert = app.add_subcommand("perturb", "perturbed flux data: vary sigma, or refine at fixed sigma");
  pert_flags.attach(pert);
  pert->add_option("--mode", mode, "sigma | h")->check(CLI::IsMember({"sigma", "h"}));
  pert->add_option("--values", sigma_values, "comma separated sigma values (sigma mode)");

  std::string os_levels = "4,8,16,32", os_out;
  int os_samples = 50;
  double os_jitter = 0.2;
  std::uint64_t os_seed = 1;
  auto* osw = app.add_subcommand("verify-oswald", "Oswald interpolation ratios for random P2 fields");
  osw->add_option("--levels", os_levels, "comma separated subdivisions per side");
  osw->add_option("--samples", os_samples, "random fields per level")->check(CLI::PositiveNumber);
  osw->add_option("--jitter", os_jitter, "vertex jitter")->check(CLI::Range(0.0, 0.3));
  osw->add_option("--seed", os_seed, "seed");
  osw->add_option("--out", os_out, "CSV output path");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*solve) {
      const ExperimentConfig cfg = solve_flags.build();
      const CaseResult r = run_case(cfg, cfg.effective_levels().back());
      print_table({r.report}, false);
      write_rows(cfg.out, {{r.report, cfg}});
      if (!snapshot.empty()) write_field_snapshot(snapshot, r);
    } else if (*conv) {
      const ExperimentConfig cfg = conv_flags.build();
      const ConvergenceTable t = run_convergence(cfg);
      print_table(t.rows, true);
      std::vector<std::pair<ErrorReport, ExperimentConfig>> rows;
      for (const auto& r : t.rows) rows.emplace_back(r, cfg);
      write_rows(cfg.out, rows);
    } else if (*sweep) {
      const ExperimentConfig cfg = sweep_flags.build();
      const std::vector<double> gammas = parse_list(gamma_values);
      const auto reports = run_gamma_sweep(cfg, gammas);
      std::vector<std::pair<ErrorReport, ExperimentConfig>> rows;
      for (std::size_t i = 0; i < gammas.size(); ++i) {
        ExperimentConfig c = cfg;
        c.gamma_s = gammas[i];
        rows.emplace_back(reports[i], c);
        std::printf("gamma_S=%-10g rel_l2=%.4e monitor=%.4e\n", gammas[i], reports[i].l2_relative(),
                    reports[i].monitor());
      }
      write_rows(cfg.out, rows);
    } else if (*pert) {
      const ExperimentConfig cfg = pert_flags.build();
      std::vector<std::pair<ErrorReport, ExperimentConfig>> rows;
      if (mode == "h") {
        const ConvergenceTable t = run_convergence(cfg);
        print_table(t.rows, true);
        for (const auto& r : t.rows) rows.emplace_back(r, cfg);
      } else {
        const std::vector<double> sigmas = parse_list(sigma_values);
        const auto reports = run_perturbation_sweep(cfg, sigmas);
        for (std::size_t i = 0; i < sigmas.size(); ++i) {
          ExperimentConfig c = cfg;
          c.varsigma = sigmas[i];
          rows.emplace_back(reports[i], c);
          std::printf("sigma=%-10g l2=%.4e l2_local=%.4e monitor=%.4e\n", sigmas[i], reports[i].l2_global,
                      reports[i].l2_local, reports[i].monitor());
        }
      }
      write_rows(cfg.out, rows);
    } else if (*osw) {
      std::vector<int> levels;
      for (double v : parse_list(os_levels)) levels.push_back(static_cast<int>(v));
      const auto rows = run_oswald_study(levels, os_samples, os_jitter, os_seed);
      for (const auto& r : rows)
        std::printf("n=%-4d max_interpolation_ratio=%.4f max_stability_ratio=%.4f\n", r.level, r.max_interpolation,
                    r.max_stability);
      if (!os_out.empty()) {
        std::ofstream out(os_out);
        out << "level,max_interpolation,max_stability\n";
        out.precision(12);
        for (const auto& r : rows) out << r.level << ',' << r.max_interpolation << ',' << r.max_stability << '\n';
      }
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
