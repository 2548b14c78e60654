#pragma once

// Direct solution of the (symmetric, indefinite) saddle system.

#include "cauchyfem/assembly.hpp"

#include <Eigen/UmfPackSupport>

#include <cmath>
#include <limits>
#include <optional>
#include <string>

namespace cauchyfem {

/// Solve failed to reach the requested residual.
class SolverError : public Error {
public:
  SolverError(const std::string& what, double residual) : Error(what), residual_(residual) {}
  [[nodiscard]] double residual() const { return residual_; }

private:
  double residual_;
};

/// Factorisation detected a singular matrix.
class SingularSystemError : public SolverError {
public:
  using SolverError::SolverError;
};

struct DiscreteSolution {
  Vector u;
  Vector z;
  double residual = 0.0; ///< ||A x - b|| / ||b||
  std::optional<double> multiplier; ///< of int u_h = mean, when constrained
};

inline constexpr double default_solver_tolerance = 1e-10;

/// Sparse LU (UMFPACK) plus a few steps of iterative refinement.
inline Vector solve_linear(const SparseMatrix& a, const Vector& b, double tol = default_solver_tolerance,
                           double* achieved = nullptr) {
  if (a.rows() != a.cols() || a.rows() != b.size())
    throw InvalidArgument("solve: system is not square or rhs size mismatches");
  const double bnorm = b.norm();
  if (bnorm == 0.0) {
    if (achieved) *achieved = 0.0;
    return Vector::Zero(b.size());
  }
  Eigen::UmfPackLU<SparseMatrix> lu;
  lu.compute(a);
  if (lu.info() != Eigen::Success)
    throw SingularSystemError("solve: factorisation failed (singular matrix)", std::numeric_limits<double>::infinity());
  Vector x = lu.solve(b);
  double rel = (a * x - b).norm() / bnorm;
  for (int it = 0; it < 3 && rel > 0.01 * tol && std::isfinite(rel); ++it) {
    const Vector r = b - a * x;
    x += lu.solve(r);
    rel = (a * x - b).norm() / bnorm;
  }
  if (achieved) *achieved = rel;
  if (!std::isfinite(rel))
    throw SingularSystemError("solve: non-finite solution, matrix is numerically singular", rel);
  if (rel > tol)
    throw SolverError("solve: relative residual " + std::to_string(rel) + " above tolerance", rel);
  return x;
}

inline DiscreteSolution solve(const SaddleSystem& sys, double tol = default_solver_tolerance) {
  DiscreteSolution s;
  const Vector x = solve_linear(sys.matrix, sys.rhs, tol, &s.residual);
  s.u = x.segment(sys.u_offset(), sys.n_v);
  s.z = x.segment(sys.z_offset(), sys.n_w);
  if (sys.mean_constraint)
    s.multiplier = x[sys.n_v + sys.n_w];
  return s;
}

} // namespace cauchyfem
