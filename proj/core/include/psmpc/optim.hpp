#pragma once

#include <Eigen/Dense>

#include <limits>
#include <string>

namespace psmpc::optim {

enum class SolveStatus { Optimal, Infeasible, Unbounded, NumericalFailure };

const char* to_string(SolveStatus status);

struct SolverOptions {
  /// Relative primal feasibility tolerance (scaled by 1 + ||b||_inf).
  double feas_tol = 1e-8;
  /// Relative optimality / duality-gap tolerance.
  double opt_tol = 1e-8;
  /// Iteration cap; 0 selects an automatic size-dependent cap.
  int max_iterations = 0;
};

/// Dense linear program
///   minimize (or maximize)  c'x
///   subject to              A x <= b,   lower <= x <= upper.
///
/// `lower`/`upper` may be empty (no bounds) or contain +-infinity entries.
/// Bounds are folded into inequality rows internally; the dual vector of a
/// result is ordered [rows of A; finite lower bounds by coordinate; finite
/// upper bounds by coordinate].
struct LinearProgram {
  Eigen::VectorXd c;
  bool maximize = false;
  Eigen::MatrixXd A;
  Eigen::VectorXd b;
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;
};

/// Dense convex quadratic program
///   minimize  0.5 x'H x + f'x   subject to  A x <= b,
/// with H symmetric positive semidefinite.
struct QuadraticProgram {
  Eigen::MatrixXd H;
  Eigen::VectorXd f;
  Eigen::MatrixXd A;
  Eigen::VectorXd b;
};

struct SolveResult {
  SolveStatus status = SolveStatus::NumericalFailure;
  /// Optimizer; meaningful only when status == Optimal.
  Eigen::VectorXd x;
  /// Objective value in the caller's sense (max value for maximize LPs).
  double objective = std::numeric_limits<double>::quiet_NaN();
  /// Nonnegative row multipliers; meaningful only when status == Optimal.
  Eigen::VectorXd dual;
  int iterations = 0;
  /// Diagnostic detail, populated for non-Optimal statuses.
  std::string note;
};

/// Solves a dense LP. Malformed dimensions throw std::invalid_argument;
/// numerical breakdown is reported as SolveStatus::NumericalFailure, never as
/// a wrong status. On Optimal the result satisfies max(Ax - b) within the
/// feasibility tolerance and the primal/dual objectives agree within the
/// optimality tolerance.
SolveResult solve_lp(const LinearProgram& lp, const SolverOptions& options = {});

/// Solves a dense convex QP with a primal active-set method. H must be
/// symmetric within 1e-9 and have smallest eigenvalue >= -1e-8 * ||H||
/// (checked; violations throw std::invalid_argument). On Optimal the KKT
/// residual (stationarity, feasibility, complementarity) is within 1e-7.
SolveResult solve_qp(const QuadraticProgram& qp, const SolverOptions& options = {});

}  // namespace psmpc::optim
