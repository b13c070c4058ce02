// Primal-dual interior-point method (Mehrotra predictor-corrector) on the
// equilibrated problem. Each iteration factors the quasi-definite system
//
//   [ P + dI   G'        Ae' ] [ dx ]
//   [ G       -S/Z        0  ] [ -dz]
//   [ Ae       0        -dI  ] [ -dy]
//
// where G stacks the finite one-sided bounds (G x - s = h, s >= 0) and Ae the
// equality rows.

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include <spdlog/spdlog.h>

#include "cesplan/error.hpp"
#include "qp_detail.hpp"

namespace cesplan::detail {

namespace {

using Eigen::Index;
using Eigen::VectorXd;

constexpr double kRegularization = 1e-9;
constexpr double kStepFraction = 0.995;
constexpr int kRefineSteps = 3;
// Once the linear algebra stops making progress, the best iterate is still
// reported as optimal if every scaled residual is below this.
constexpr double kAcceptable = 1e-6;

double max_step(const VectorXd& v, const VectorXd& dv) {
  double alpha = 1.0;
  for (Index i = 0; i < v.size(); ++i) {
    if (dv[i] < 0.0) alpha = std::min(alpha, -v[i] / dv[i]);
  }
  return alpha;
}

}  // namespace

QpSolution solve_interior_point(const QuadraticProgram& prob, const SolverSettings& settings) {
  const Equilibration eq = equilibrate(prob, settings.scaling_iterations);
  const Index n = prob.num_variables();
  const Index m = prob.num_constraints();

  // The equilibration never scales the cost up, but the stopping rule below
  // is absolute in mu, so bring the largest cost coefficient to one.
  double cost_scale = std::max(inf_norm(eq.q), eq.P.nonZeros() > 0 ? eq.P.coeffs().cwiseAbs().maxCoeff() : 0.0);
  cost_scale = cost_scale > 0.0 ? std::clamp(1.0 / cost_scale, 1e-8, 1e8) : 1.0;
  const SparseMatrix P = eq.P * cost_scale;
  const VectorXd q = eq.q * cost_scale;

  // Row bookkeeping: each finite one-sided bound becomes an inequality,
  // l == u rows become equalities, rows without bounds are dropped.
  struct Ineq {
    Index row;
    double sign;
  };
  std::vector<Ineq> ineq;
  std::vector<Index> equal;
  for (Index i = 0; i < m; ++i) {
    const bool lo = !is_infinite_bound(eq.l[i]);
    const bool hi = !is_infinite_bound(eq.u[i]);
    if (lo && hi && eq.l[i] == eq.u[i]) {
      equal.push_back(i);
      continue;
    }
    if (lo) ineq.push_back({i, 1.0});
    if (hi) ineq.push_back({i, -1.0});
  }
  const Index mi = static_cast<Index>(ineq.size());
  const Index me = static_cast<Index>(equal.size());
  const Index dim = n + mi + me;

  std::vector<Index> eq_of_row(static_cast<std::size_t>(m), -1);
  for (Index k = 0; k < static_cast<Index>(equal.size()); ++k) eq_of_row[equal[k]] = k;

  std::vector<Triplet> g_trip, e_trip;
  VectorXd h(mi), b(me);
  for (Index k = 0; k < mi; ++k) h[k] = ineq[k].sign > 0 ? eq.l[ineq[k].row] : -eq.u[ineq[k].row];
  for (Index k = 0; k < me; ++k) b[k] = eq.l[equal[k]];
  {
    // Map constraint rows to their G / Ae rows.
    std::vector<std::vector<Index>> g_rows(static_cast<std::size_t>(m));
    for (Index k = 0; k < mi; ++k) g_rows[ineq[k].row].push_back(k);
    for (Index c = 0; c < eq.A.outerSize(); ++c) {
      for (SparseMatrix::InnerIterator it(eq.A, c); it; ++it) {
        for (Index k : g_rows[it.row()]) g_trip.emplace_back(static_cast<int>(k), static_cast<int>(c), ineq[k].sign * it.value());
        if (eq_of_row[it.row()] >= 0) e_trip.emplace_back(static_cast<int>(eq_of_row[it.row()]), static_cast<int>(c), it.value());
      }
    }
  }
  SparseMatrix G(mi, n), Ae(me, n);
  G.setFromTriplets(g_trip.begin(), g_trip.end());
  Ae.setFromTriplets(e_trip.begin(), e_trip.end());
  const SparseMatrix Gt = G.transpose();
  const SparseMatrix Aet = Ae.transpose();

  // Lower triangle of the KKT matrix without its diagonal scaling terms.
  std::vector<Triplet> base;
  for (Index c = 0; c < P.outerSize(); ++c) {
    for (SparseMatrix::InnerIterator it(P, c); it; ++it) {
      if (it.row() >= c) base.emplace_back(static_cast<int>(it.row()), static_cast<int>(c), it.value());
    }
  }
  for (Index i = 0; i < n; ++i) base.emplace_back(static_cast<int>(i), static_cast<int>(i), 0.0);
  for (const auto& t : g_trip) base.emplace_back(static_cast<int>(n + t.row()), t.col(), t.value());
  for (const auto& t : e_trip) base.emplace_back(static_cast<int>(n + mi + t.row()), t.col(), t.value());
  auto assemble = [&](const VectorXd& d22, double reg) {
    std::vector<Triplet> trip = base;
    for (Index i = 0; i < n; ++i) trip.emplace_back(static_cast<int>(i), static_cast<int>(i), reg);
    for (Index k = 0; k < mi; ++k) trip.emplace_back(static_cast<int>(n + k), static_cast<int>(n + k), -d22[k] - reg);
    for (Index k = 0; k < me; ++k) trip.emplace_back(static_cast<int>(n + mi + k), static_cast<int>(n + mi + k), -reg);
    SparseMatrix kkt(dim, dim);
    kkt.setFromTriplets(trip.begin(), trip.end());
    return kkt;
  };
  // Unregularized product for iterative refinement.
  auto apply = [&](const VectorXd& d22, const VectorXd& v) {
    VectorXd out(dim);
    const auto vx = v.head(n);
    const auto vw = v.segment(n, mi);
    const auto vv = v.tail(me);
    out.head(n) = P * vx + Gt * vw + Aet * vv;
    out.segment(n, mi) = G * vx - d22.cwiseProduct(vw);
    out.tail(me) = Ae * vx;
    return out;
  };

  KktFactor factor;
  bool analyzed = false;
  auto factorize = [&](const VectorXd& d22) {
    const SparseMatrix kkt = assemble(d22, kRegularization);
    if (!analyzed) {
      factor.analyzePattern(kkt);
      analyzed = true;
    }
    factor.factorize(kkt);
    return factor.info() == Eigen::Success;
  };
  auto solve = [&](const VectorXd& d22, const VectorXd& rhs) {
    VectorXd sol = factor.solve(rhs);
    for (int k = 0; k < kRefineSteps; ++k) sol += factor.solve(rhs - apply(d22, sol));
    return sol;
  };

  // Starting point: least-squares fit of the bounds with unit weights.
  VectorXd x = VectorXd::Zero(n), y = VectorXd::Zero(me), s = VectorXd::Ones(mi), z = VectorXd::Ones(mi);
  {
    const VectorXd d22 = VectorXd::Ones(mi);
    if (!factorize(d22)) throw Error(Errc::InvalidParameter, "KKT factorization failed; is P positive semidefinite?");
    VectorXd rhs(dim);
    rhs << -q, h, b;
    const VectorXd sol = solve(d22, rhs);
    x = sol.head(n);
    const VectorXd gx = G * x - h;
    for (Index k = 0; k < mi; ++k) s[k] = std::max(gx[k], 1.0);
  }

  const double q_norm = inf_norm(q);
  const double hb_norm = std::max(inf_norm(h), inf_norm(b));
  const double tol = settings.ipm_tolerance;

  QpSolution out;
  out.status = QpStatus::MaxIter;
  VectorXd rd, re, ri;
  int iter = 0;
  bool converged = false;
  double best_merit = std::numeric_limits<double>::infinity();
  VectorXd best_x = x, best_y = y, best_z = z;
  for (; iter < settings.ipm_max_iter; ++iter) {
    rd = P * x + q - Aet * y - Gt * z;
    re = Ae * x - b;
    ri = G * x - s - h;
    const double mu = mi > 0 ? s.dot(z) / static_cast<double>(mi) : 0.0;
    const double rp = std::max(inf_norm(re), inf_norm(ri));
    spdlog::trace("ipm iter {} primal {:.3e} dual {:.3e} mu {:.3e}", iter, rp, inf_norm(rd), mu);
    if (!x.allFinite() || !s.allFinite() || !z.allFinite() || !std::isfinite(mu)) break;
    const double merit = std::max({rp / (1.0 + hb_norm), inf_norm(rd) / (1.0 + q_norm), mu});
    if (merit < best_merit) {
      best_merit = merit;
      best_x = x, best_y = y, best_z = z;
    }
    if (merit <= tol) {
      converged = true;
      break;
    }

    const VectorXd d22 = s.cwiseQuotient(z);
    if (!factorize(d22)) break;

    auto direction = [&](const VectorXd& rc, VectorXd& dx, VectorXd& dy, VectorXd& ds, VectorXd& dz) {
      VectorXd rhs(dim);
      rhs << -rd, -ri - rc.cwiseQuotient(z), -re;
      const VectorXd sol = solve(d22, rhs);
      dx = sol.head(n);
      dz = -sol.segment(n, mi);
      dy = -sol.tail(me);
      ds = -(rc + s.cwiseProduct(dz)).cwiseQuotient(z);
    };

    VectorXd dx, dy, ds, dz;
    VectorXd rc = s.cwiseProduct(z);
    direction(rc, dx, dy, ds, dz);
    const double alpha_aff = std::min(max_step(s, ds), max_step(z, dz));
    double sigma = 0.0;
    if (mi > 0) {
      const double mu_aff = (s + alpha_aff * ds).dot(z + alpha_aff * dz) / static_cast<double>(mi);
      sigma = std::pow(std::max(mu_aff, 0.0) / mu, 3.0);
    }
    rc = s.cwiseProduct(z) + ds.cwiseProduct(dz) - VectorXd::Constant(mi, sigma * mu);
    direction(rc, dx, dy, ds, dz);
    const double alpha = std::min(1.0, kStepFraction * std::min(max_step(s, ds), max_step(z, dz)));

    x += alpha * dx;
    y += alpha * dy;
    s += alpha * ds;
    z += alpha * dz;
  }

  if (!converged && best_merit <= kAcceptable) {
    spdlog::debug("ipm stalled after {} iterations; accepting merit {:.3e}", iter, best_merit);
    converged = true;
  }
  x = best_x, y = best_y, z = best_z;

  // Back to the caller's row convention: y_i > 0 pushes against u_i.
  VectorXd y_rows = VectorXd::Zero(m);
  for (Index k = 0; k < mi; ++k) y_rows[ineq[k].row] -= ineq[k].sign * z[k];
  for (Index k = 0; k < me; ++k) y_rows[equal[k]] = -y[k];

  out.x = eq.d.cwiseProduct(x);
  out.y = eq.e.cwiseProduct(y_rows) / (eq.c * cost_scale);
  out.iterations = iter;
  out.status = converged ? QpStatus::Optimal : QpStatus::MaxIter;
  const KktResiduals r = kkt_residuals(prob, out.x, out.y);
  out.primal_residual = r.primal;
  out.dual_residual = r.dual;
  out.objective = prob.objective(out.x);
  return out;
}

}  // namespace cesplan::detail
