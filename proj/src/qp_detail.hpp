#pragma once

// Pieces shared by the two QP algorithms.

#include <Eigen/SparseCholesky>

#include "cesplan/qp.hpp"

namespace cesplan::detail {

using KktFactor = Eigen::SimplicialLDLT<SparseMatrix, Eigen::Lower, Eigen::AMDOrdering<int>>;

inline double inf_norm(const Eigen::VectorXd& v) { return v.size() == 0 ? 0.0 : v.lpNorm<Eigen::Infinity>(); }

/// Ruiz equilibration: the scaled problem has P' = c D P D, q' = c D q,
/// A' = E A D, bounds E l, E u, with x = D x' and y = E y' / c.
struct Equilibration {
  SparseMatrix P, A;
  Eigen::VectorXd q, l, u;
  Eigen::VectorXd d, e, d_inv, e_inv;
  double c = 1.0;
};

Equilibration equilibrate(const QuadraticProgram& prob, int iterations);

/// Interior-point solve of the problem, see solve_qp.
QpSolution solve_interior_point(const QuadraticProgram& prob, const SolverSettings& settings);

}  // namespace cesplan::detail
