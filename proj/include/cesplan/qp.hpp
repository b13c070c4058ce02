#pragma once

// Sparse convex QP solver:
//
//   minimize    1/2 x'Px + q'x
//   subject to  l <= Ax <= u
//
// solved by operator splitting (ADMM) on the equilibrated problem with one
// sparse quasi-definite factorization per penalty value. An optional polish
// step guesses the active set from the ADMM iterate and solves the reduced
// KKT system exactly, which is what lifts the answer from first-order
// accuracy to ~1e-10.
//
// Equalities are rows with l == u. Any bound with magnitude >= kInfinity is
// treated as absent.

#include <iosfwd>
#include <string_view>

#include <Eigen/Dense>
#include <Eigen/Sparse>

namespace cesplan {

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::ColMajor, int>;
using Triplet = Eigen::Triplet<double, int>;

inline constexpr double kInfinity = 1e20;

inline bool is_infinite_bound(double v) { return v >= kInfinity || v <= -kInfinity; }

struct QuadraticProgram {
  SparseMatrix P;  // n x n, symmetric, full storage
  Eigen::VectorXd q;
  SparseMatrix A;  // m x n
  Eigen::VectorXd l;
  Eigen::VectorXd u;

  Eigen::Index num_variables() const { return q.size(); }
  Eigen::Index num_constraints() const { return l.size(); }

  /// Throws Error{DimensionMismatch | InvalidParameter} when dimensions do
  /// not line up, P is not symmetric, or some l_i > u_i.
  void validate() const;

  double objective(const Eigen::VectorXd& x) const;
};

enum class QpStatus { Optimal, PrimalInfeasible, DualInfeasible, MaxIter };

std::string_view to_string(QpStatus status);

struct QpSolution {
  Eigen::VectorXd x;
  Eigen::VectorXd y;  // y_i > 0 pushes against u_i, y_i < 0 against l_i
  QpStatus status = QpStatus::MaxIter;
  int iterations = 0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  double objective = 0.0;
  bool polished = false;
  double rho = 0.0;  // final penalty
};

/// Admm: operator splitting with optional polish (default).
/// InteriorPoint: primal-dual interior point; no infeasibility certificates,
///   failure to converge is reported as MaxIter.
/// Auto: ADMM for up to `auto_admm_iter` iterations; a polished or infeasible
///   result is returned as is, anything else is re-solved by the interior
///   point method to reach high accuracy.
enum class QpMethod { Admm, InteriorPoint, Auto };

std::string_view to_string(QpMethod method);
/// "admm" | "interior_point" | "auto". Throws Error{InvalidParameter}.
QpMethod parse_qp_method(std::string_view name);

struct SolverSettings {
  QpMethod method = QpMethod::Admm;
  double eps_abs = 1e-6;
  double eps_rel = 1e-6;
  int max_iter = 200000;

  double rho = 0.1;
  double sigma = 1e-6;
  double alpha = 1.6;
  bool adaptive_rho = true;
  int adaptive_rho_interval = 50;
  double adaptive_rho_tolerance = 5.0;

  int scaling_iterations = 10;
  int check_interval = 10;
  double eps_prim_inf = 1e-5;
  double eps_dual_inf = 1e-5;

  bool polish = true;
  double polish_delta = 1e-7;
  int polish_refine_iter = 30;
  /// Active-set correction rounds after the initial guess.
  int polish_rounds = 1;
  /// Try polishing every this many iterations once the iterate is within
  /// `polish_trigger` times the termination thresholds.
  int polish_interval = 100;
  double polish_trigger = 1e3;
  /// A polished point is accepted only if its bound violation is below this
  /// (absolute, in the units of each constraint row).
  double polish_primal_tol = 1e-9;

  double ipm_tolerance = 1e-10;  // on the equilibrated problem
  int ipm_max_iter = 100;
  int auto_admm_iter = 4000;

  void validate() const;
};

struct KktResiduals {
  double primal = 0.0;           // max distance of Ax from [l, u]
  double dual = 0.0;             // ||Px + q + A'y||_inf
  double complementarity = 0.0;  // max |y_i| * slack_i, or |y_i| when the pushed bound is absent
};

/// Direct evaluation on the unscaled problem; shares nothing with the solver.
KktResiduals kkt_residuals(const QuadraticProgram& prob, const Eigen::VectorXd& x, const Eigen::VectorXd& y);

QpSolution solve_qp(const QuadraticProgram& prob, const SolverSettings& settings = {});

/// Sparse triplet text format, see README ("QP dump format").
void write_qp(std::ostream& out, const QuadraticProgram& prob);
QuadraticProgram read_qp(std::istream& in);

}  // namespace cesplan
