#include "cesplan/qp.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/SparseCholesky>

#include <spdlog/spdlog.h>

#include "cesplan/error.hpp"
#include "qp_detail.hpp"

namespace cesplan {

namespace {

using Eigen::Index;
using Eigen::VectorXd;

constexpr double kMinScaling = 1e-4;
constexpr double kMaxScaling = 1e4;
constexpr double kRhoMin = 1e-6;
constexpr double kRhoMax = 1e6;
constexpr double kRhoEqualityFactor = 1e3;
constexpr double kDivisionGuard = 1e-30;

using detail::inf_norm;
using detail::KktFactor;

double limit_scaling(double v) {
  if (v < kMinScaling) return 1.0;
  return std::min(v, kMaxScaling);
}

VectorXd column_inf_norms(const SparseMatrix& m) {
  VectorXd out = VectorXd::Zero(m.cols());
  for (Index k = 0; k < m.outerSize(); ++k) {
    for (SparseMatrix::InnerIterator it(m, k); it; ++it) out[k] = std::max(out[k], std::abs(it.value()));
  }
  return out;
}

VectorXd row_inf_norms(const SparseMatrix& m) {
  VectorXd out = VectorXd::Zero(m.rows());
  for (Index k = 0; k < m.outerSize(); ++k) {
    for (SparseMatrix::InnerIterator it(m, k); it; ++it) out[it.row()] = std::max(out[it.row()], std::abs(it.value()));
  }
  return out;
}

void scale_sparse(SparseMatrix& m, const VectorXd& row_scale, const VectorXd& col_scale) {
  for (Index k = 0; k < m.outerSize(); ++k) {
    for (SparseMatrix::InnerIterator it(m, k); it; ++it) it.valueRef() *= row_scale[it.row()] * col_scale[k];
  }
}

double scale_bound(double v, double s) { return is_infinite_bound(v) ? v : v * s; }

double project(double v, double lo, double hi) {
  if (!is_infinite_bound(lo) && v < lo) return lo;
  if (!is_infinite_bound(hi) && v > hi) return hi;
  return v;
}

}  // namespace

detail::Equilibration detail::equilibrate(const QuadraticProgram& prob, int iterations) {
  Equilibration s;
  const Index n = prob.num_variables();
  const Index m = prob.num_constraints();
  s.P = prob.P;
  s.A = prob.A;
  s.q = prob.q;
  s.d = VectorXd::Ones(n);
  s.e = VectorXd::Ones(m);
  s.c = 1.0;

  for (int pass = 0; pass < iterations; ++pass) {
    VectorXd dt = column_inf_norms(s.P).cwiseMax(column_inf_norms(s.A));
    for (Index i = 0; i < n; ++i) dt[i] = 1.0 / std::sqrt(limit_scaling(dt[i]));
    VectorXd et = row_inf_norms(s.A);
    for (Index i = 0; i < m; ++i) et[i] = 1.0 / std::sqrt(limit_scaling(et[i]));

    scale_sparse(s.P, dt, dt);
    scale_sparse(s.A, et, dt);
    s.q = s.q.cwiseProduct(dt);
    s.d = s.d.cwiseProduct(dt);
    s.e = s.e.cwiseProduct(et);

    const VectorXd pcol = column_inf_norms(s.P);
    const double mean_p = n > 0 ? pcol.mean() : 0.0;
    const double ct = 1.0 / limit_scaling(std::max(mean_p, inf_norm(s.q)));
    s.P *= ct;
    s.q *= ct;
    s.c *= ct;
  }

  s.d_inv = s.d.cwiseInverse();
  s.e_inv = s.e.cwiseInverse();
  s.l.resize(m);
  s.u.resize(m);
  for (Index i = 0; i < m; ++i) {
    s.l[i] = scale_bound(prob.l[i], s.e[i]);
    s.u[i] = scale_bound(prob.u[i], s.e[i]);
  }
  return s;
}

namespace {

struct Iterate {
  VectorXd x, z, y;
};

enum class ActiveSide { None, Lower, Upper };

class AdmmSolver {
 public:
  AdmmSolver(const QuadraticProgram& prob, const SolverSettings& settings)
      : orig_(prob), set_(settings), n_(prob.num_variables()), m_(prob.num_constraints()) {
    equilibrate();
    init_rho();
    assemble_and_factor(true);
  }

  QpSolution run();

 private:
  struct Residuals {
    double prim = 0, dual = 0, eps_prim = 0, eps_dual = 0;
    double prim_scaled_rel = 0, dual_scaled_rel = 0;
  };

  void equilibrate();
  void init_rho();
  void assemble_and_factor(bool analyze);
  Residuals residuals(const Iterate& it) const;
  bool primal_infeasible(const VectorXd& dy) const;
  bool dual_infeasible(const VectorXd& dx) const;
  std::optional<Iterate> solve_reduced(const std::vector<ActiveSide>& side, const VectorXd& x0,
                                       const VectorXd& y0) const;
  std::optional<QpSolution> polish(const Iterate& it) const;
  QpSolution unscaled(const Iterate& it, QpStatus status, int iter) const;

  const QuadraticProgram& orig_;
  SolverSettings set_;
  Index n_, m_;

  SparseMatrix p_, a_, at_;
  VectorXd q_, l_, u_;
  VectorXd d_, e_, d_inv_, e_inv_;
  double c_ = 1.0;

  double rho_ = 0.1;
  VectorXd rho_vec_, rho_inv_;
  KktFactor kkt_;
};

void AdmmSolver::equilibrate() {
  detail::Equilibration eq = detail::equilibrate(orig_, set_.scaling_iterations);
  p_ = std::move(eq.P);
  a_ = std::move(eq.A);
  q_ = std::move(eq.q);
  l_ = std::move(eq.l);
  u_ = std::move(eq.u);
  d_ = std::move(eq.d);
  e_ = std::move(eq.e);
  d_inv_ = std::move(eq.d_inv);
  e_inv_ = std::move(eq.e_inv);
  c_ = eq.c;
  at_ = a_.transpose();
}

void AdmmSolver::init_rho() {
  rho_ = std::clamp(set_.rho, kRhoMin, kRhoMax);
  rho_vec_.resize(m_);
  for (Index i = 0; i < m_; ++i) {
    const bool lo_inf = is_infinite_bound(l_[i]);
    const bool hi_inf = is_infinite_bound(u_[i]);
    if (lo_inf && hi_inf) {
      rho_vec_[i] = kRhoMin;
    } else if (!lo_inf && !hi_inf && u_[i] - l_[i] < 1e-4) {
      rho_vec_[i] = kRhoEqualityFactor * rho_;
    } else {
      rho_vec_[i] = rho_;
    }
  }
  rho_inv_ = rho_vec_.cwiseInverse();
}

void AdmmSolver::assemble_and_factor(bool analyze) {
  std::vector<Triplet> trip;
  trip.reserve(static_cast<std::size_t>(p_.nonZeros() + a_.nonZeros() + n_ + m_));
  for (Index k = 0; k < p_.outerSize(); ++k) {
    for (SparseMatrix::InnerIterator it(p_, k); it; ++it) {
      if (it.row() >= k) trip.emplace_back(static_cast<int>(it.row()), static_cast<int>(k), it.value());
    }
  }
  for (Index i = 0; i < n_; ++i) trip.emplace_back(static_cast<int>(i), static_cast<int>(i), set_.sigma);
  for (Index k = 0; k < a_.outerSize(); ++k) {
    for (SparseMatrix::InnerIterator it(a_, k); it; ++it) {
      trip.emplace_back(static_cast<int>(n_ + it.row()), static_cast<int>(k), it.value());
    }
  }
  for (Index i = 0; i < m_; ++i) trip.emplace_back(static_cast<int>(n_ + i), static_cast<int>(n_ + i), -rho_inv_[i]);

  SparseMatrix kkt(n_ + m_, n_ + m_);
  kkt.setFromTriplets(trip.begin(), trip.end());
  if (analyze) kkt_.analyzePattern(kkt);
  kkt_.factorize(kkt);
  if (kkt_.info() != Eigen::Success) {
    throw Error(Errc::InvalidParameter, "KKT factorization failed; is P positive semidefinite?");
  }
}

AdmmSolver::Residuals AdmmSolver::residuals(const Iterate& it) const {
  Residuals r;
  const VectorXd ax = a_ * it.x;
  const VectorXd px = p_ * it.x;
  const VectorXd aty = at_ * it.y;

  r.prim = m_ > 0 ? inf_norm(e_inv_.cwiseProduct(ax - it.z)) : 0.0;
  r.eps_prim = set_.eps_abs + set_.eps_rel * std::max(inf_norm(e_inv_.cwiseProduct(ax)), inf_norm(e_inv_.cwiseProduct(it.z)));

  const VectorXd grad = px + q_ + aty;
  r.dual = inf_norm(d_inv_.cwiseProduct(grad)) / c_;
  const double px_n = inf_norm(d_inv_.cwiseProduct(px)) / c_;
  const double aty_n = inf_norm(d_inv_.cwiseProduct(aty)) / c_;
  const double q_n = inf_norm(d_inv_.cwiseProduct(q_)) / c_;
  r.eps_dual = set_.eps_abs + set_.eps_rel * std::max({px_n, aty_n, q_n});

  r.prim_scaled_rel = inf_norm(ax - it.z) / (std::max(inf_norm(ax), inf_norm(it.z)) + 1e-10);
  r.dual_scaled_rel = inf_norm(grad) / (std::max({inf_norm(px), inf_norm(aty), inf_norm(q_)}) + 1e-10);
  return r;
}

bool AdmmSolver::primal_infeasible(const VectorXd& dy_in) const {
  if (m_ == 0) return false;
  VectorXd dy = dy_in;
  for (Index i = 0; i < m_; ++i) {
    const bool lo_inf = is_infinite_bound(l_[i]);
    const bool hi_inf = is_infinite_bound(u_[i]);
    if (hi_inf && lo_inf) dy[i] = 0.0;
    else if (hi_inf) dy[i] = std::min(dy[i], 0.0);
    else if (lo_inf) dy[i] = std::max(dy[i], 0.0);
  }
  const double norm = inf_norm(e_.cwiseProduct(dy));
  if (norm <= set_.eps_prim_inf) return false;
  double support = 0.0;
  for (Index i = 0; i < m_; ++i) {
    if (dy[i] > 0.0) support += u_[i] * dy[i];
    else if (dy[i] < 0.0) support += l_[i] * dy[i];
  }
  if (support >= -set_.eps_prim_inf * norm) return false;
  const double aty = inf_norm(d_inv_.cwiseProduct(at_ * dy));
  return aty <= set_.eps_prim_inf * norm;
}

bool AdmmSolver::dual_infeasible(const VectorXd& dx) const {
  const double norm = inf_norm(d_.cwiseProduct(dx));
  if (norm <= set_.eps_dual_inf) return false;
  if (q_.dot(dx) / c_ >= -set_.eps_dual_inf * norm) return false;
  if (inf_norm(d_inv_.cwiseProduct(p_ * dx)) / c_ > set_.eps_dual_inf * norm) return false;
  const VectorXd adx = e_inv_.cwiseProduct(a_ * dx);
  for (Index i = 0; i < m_; ++i) {
    if (!is_infinite_bound(u_[i]) && adx[i] > set_.eps_dual_inf * norm) return false;
    if (!is_infinite_bound(l_[i]) && adx[i] < -set_.eps_dual_inf * norm) return false;
  }
  return true;
}

QpSolution AdmmSolver::unscaled(const Iterate& it, QpStatus status, int iter) const {
  QpSolution sol;
  sol.x = d_.cwiseProduct(it.x);
  sol.y = e_.cwiseProduct(it.y) / c_;
  sol.status = status;
  sol.iterations = iter;
  sol.rho = rho_;
  if (status == QpStatus::Optimal || status == QpStatus::MaxIter) {
    const Residuals r = residuals(it);
    sol.primal_residual = r.prim;
    sol.dual_residual = r.dual;
    sol.objective = orig_.objective(sol.x);
  } else {
    sol.objective = status == QpStatus::PrimalInfeasible ? std::numeric_limits<double>::infinity()
                                                         : -std::numeric_limits<double>::infinity();
  }
  return sol;
}

// Solves the equality-constrained problem obtained by pinning the rows in
// `side` to their bounds, starting the refinement at (x, y).
std::optional<Iterate> AdmmSolver::solve_reduced(const std::vector<ActiveSide>& side, const VectorXd& x0,
                                                 const VectorXd& y0) const {
  std::vector<int> reduced_row(static_cast<std::size_t>(m_), -1);
  std::vector<Index> active;
  for (Index i = 0; i < m_; ++i) {
    if (side[i] != ActiveSide::None) {
      reduced_row[i] = static_cast<int>(active.size());
      active.push_back(i);
    }
  }
  const Index k = static_cast<Index>(active.size());

  std::vector<Triplet> red;
  for (Index c = 0; c < a_.outerSize(); ++c) {
    for (SparseMatrix::InnerIterator iter(a_, c); iter; ++iter) {
      const int rr = reduced_row[iter.row()];
      if (rr >= 0) red.emplace_back(rr, static_cast<int>(c), iter.value());
    }
  }
  SparseMatrix a_red(k, n_);
  a_red.setFromTriplets(red.begin(), red.end());
  VectorXd b(k);
  for (Index r = 0; r < k; ++r) b[r] = side[active[r]] == ActiveSide::Lower ? l_[active[r]] : u_[active[r]];

  const double delta = set_.polish_delta;
  std::vector<Triplet> trip;
  for (Index c = 0; c < p_.outerSize(); ++c) {
    for (SparseMatrix::InnerIterator iter(p_, c); iter; ++iter) {
      if (iter.row() >= c) trip.emplace_back(static_cast<int>(iter.row()), static_cast<int>(c), iter.value());
    }
  }
  for (Index i = 0; i < n_; ++i) trip.emplace_back(static_cast<int>(i), static_cast<int>(i), delta);
  for (const auto& t : red) trip.emplace_back(static_cast<int>(n_ + t.row()), t.col(), t.value());
  for (Index r = 0; r < k; ++r) trip.emplace_back(static_cast<int>(n_ + r), static_cast<int>(n_ + r), -delta);
  SparseMatrix kkt(n_ + k, n_ + k);
  kkt.setFromTriplets(trip.begin(), trip.end());
  KktFactor factor;
  factor.compute(kkt);
  if (factor.info() != Eigen::Success) return std::nullopt;

  // Refinement starts from the given point so directions the reduced system
  // leaves free keep their values.
  VectorXd sol(n_ + k);
  sol.head(n_) = x0;
  for (Index r = 0; r < k; ++r) sol[n_ + r] = y0[active[r]];
  const SparseMatrix a_red_t = a_red.transpose();
  VectorXd resid(n_ + k);
  for (int pass = 0; pass < set_.polish_refine_iter; ++pass) {
    const auto x = sol.head(n_);
    const auto y = sol.tail(k);
    resid.head(n_) = -q_ - p_ * x - a_red_t * y;
    resid.tail(k) = b - a_red * x;
    if (inf_norm(resid) < 1e-14) break;
    sol += factor.solve(resid);
  }
  if (!sol.allFinite()) return std::nullopt;

  Iterate out;
  out.x = sol.head(n_);
  out.y = VectorXd::Zero(m_);
  for (Index r = 0; r < k; ++r) out.y[active[r]] = sol[n_ + r];
  out.z = a_ * out.x;
  return out;
}

std::optional<QpSolution> AdmmSolver::polish(const Iterate& it) const {
  // Initial guess: rows whose multiplier outweighs the distance to a bound.
  std::vector<ActiveSide> side(static_cast<std::size_t>(m_), ActiveSide::None);
  std::vector<bool> equality(static_cast<std::size_t>(m_), false);
  for (Index i = 0; i < m_; ++i) {
    const bool lo_fin = !is_infinite_bound(l_[i]);
    const bool hi_fin = !is_infinite_bound(u_[i]);
    equality[i] = lo_fin && hi_fin && l_[i] == u_[i];
    const bool at_lo = lo_fin && it.z[i] - l_[i] < -it.y[i];
    const bool at_hi = hi_fin && u_[i] - it.z[i] < it.y[i];
    if (equality[i] || (at_lo && at_hi)) side[i] = it.y[i] >= 0.0 ? ActiveSide::Upper : ActiveSide::Lower;
    else if (at_lo) side[i] = ActiveSide::Lower;
    else if (at_hi) side[i] = ActiveSide::Upper;
  }

  // Primal-dual active-set corrections: release rows whose multiplier has
  // the wrong sign, pin rows the reduced solution violates.
  std::optional<Iterate> cur;
  VectorXd x0 = it.x, y0 = it.y;
  for (int round = 0; round < set_.polish_rounds; ++round) {
    cur = solve_reduced(side, x0, y0);
    if (!cur) return std::nullopt;
    bool changed = false;
    for (Index i = 0; i < m_; ++i) {
      if (equality[i]) continue;
      const double y = cur->y[i];
      if (side[i] == ActiveSide::Lower && y > 0.0) {
        side[i] = ActiveSide::None;
        changed = true;
      } else if (side[i] == ActiveSide::Upper && y < 0.0) {
        side[i] = ActiveSide::None;
        changed = true;
      } else if (side[i] == ActiveSide::None) {
        const double tol = set_.polish_primal_tol * 0.1 * e_[i];
        if (!is_infinite_bound(l_[i]) && cur->z[i] < l_[i] - tol) {
          side[i] = ActiveSide::Lower;
          changed = true;
        } else if (!is_infinite_bound(u_[i]) && cur->z[i] > u_[i] + tol) {
          side[i] = ActiveSide::Upper;
          changed = true;
        }
      }
    }
    if (!changed) break;
    x0 = cur->x;
    y0 = cur->y;
  }

  QpSolution out;
  out.x = d_.cwiseProduct(cur->x);
  out.y = e_.cwiseProduct(cur->y) / c_;
  const KktResiduals kkt_res = kkt_residuals(orig_, out.x, out.y);
  const VectorXd px = orig_.P * out.x;
  const VectorXd aty = orig_.A.transpose() * out.y;
  const double eps_dual = set_.eps_abs + set_.eps_rel * std::max({inf_norm(px), inf_norm(aty), inf_norm(orig_.q)});
  if (!std::isfinite(kkt_res.dual) || kkt_res.primal > set_.polish_primal_tol || kkt_res.dual > eps_dual ||
      kkt_res.complementarity > eps_dual) {
    spdlog::trace("polish rejected: primal {:.3e} dual {:.3e} compl {:.3e} (eps {:.3e})", kkt_res.primal,
                  kkt_res.dual, kkt_res.complementarity, eps_dual);
    return std::nullopt;
  }
  out.status = QpStatus::Optimal;
  out.primal_residual = kkt_res.primal;
  out.dual_residual = kkt_res.dual;
  out.objective = orig_.objective(out.x);
  out.polished = true;
  out.rho = rho_;
  return out;
}

QpSolution AdmmSolver::run() {
  Iterate cur{VectorXd::Zero(n_), VectorXd::Zero(m_), VectorXd::Zero(m_)};
  Iterate best = cur;
  double best_score = std::numeric_limits<double>::infinity();
  int last_polish = -set_.polish_interval;

  VectorXd rhs(n_ + m_);
  VectorXd x_prev(n_), y_prev(m_);
  const double alpha = set_.alpha;

  for (int iter = 1; iter <= set_.max_iter; ++iter) {
    x_prev = cur.x;
    y_prev = cur.y;

    rhs.head(n_) = set_.sigma * cur.x - q_;
    rhs.tail(m_) = cur.z - rho_inv_.cwiseProduct(cur.y);
    const VectorXd sol = kkt_.solve(rhs);
    const auto x_tilde = sol.head(n_);
    const VectorXd z_tilde = cur.z + rho_inv_.cwiseProduct(sol.tail(m_) - cur.y);

    cur.x = alpha * x_tilde + (1.0 - alpha) * x_prev;
    const VectorXd z_relaxed = alpha * z_tilde + (1.0 - alpha) * cur.z;
    for (Index i = 0; i < m_; ++i) cur.z[i] = project(z_relaxed[i] + rho_inv_[i] * cur.y[i], l_[i], u_[i]);
    cur.y += rho_vec_.cwiseProduct(z_relaxed - cur.z);

    const bool check = iter % set_.check_interval == 0 || iter == 1 || iter == set_.max_iter;
    if (!check) continue;

    const Residuals r = residuals(cur);
    if (iter % set_.adaptive_rho_interval == 0 || iter == 1) {
      spdlog::trace("admm iter {} prim {:.3e}/{:.3e} dual {:.3e}/{:.3e} rho {:.3e}", iter, r.prim, r.eps_prim, r.dual,
                    r.eps_dual, rho_);
    }
    const double score = std::max(r.prim / r.eps_prim, r.dual / r.eps_dual);
    if (score < best_score) {
      best_score = score;
      best = cur;
    }

    if (r.prim <= r.eps_prim && r.dual <= r.eps_dual) {
      if (set_.polish) {
        if (auto p = polish(cur)) {
          p->iterations = iter;
          return *p;
        }
      }
      return unscaled(cur, QpStatus::Optimal, iter);
    }

    if (primal_infeasible(cur.y - y_prev)) {
      Iterate cert = cur;
      cert.y = cur.y - y_prev;
      return unscaled(cert, QpStatus::PrimalInfeasible, iter);
    }
    if (dual_infeasible(cur.x - x_prev)) {
      Iterate cert = cur;
      cert.x = cur.x - x_prev;
      return unscaled(cert, QpStatus::DualInfeasible, iter);
    }

    if (set_.polish && iter - last_polish >= set_.polish_interval && r.prim <= set_.polish_trigger * r.eps_prim &&
        r.dual <= set_.polish_trigger * r.eps_dual) {
      last_polish = iter;
      if (auto p = polish(cur)) {
        p->iterations = iter;
        return *p;
      }
    }

    if (set_.adaptive_rho && iter % set_.adaptive_rho_interval == 0) {
      const double ratio = r.prim_scaled_rel / (r.dual_scaled_rel + kDivisionGuard);
      const double rho_new = std::clamp(rho_ * std::sqrt(ratio), kRhoMin, kRhoMax);
      if (rho_new > set_.adaptive_rho_tolerance * rho_ || rho_new < rho_ / set_.adaptive_rho_tolerance) {
        rho_ = rho_new;
        for (Index i = 0; i < m_; ++i) {
          if (rho_vec_[i] == kRhoMin) continue;
          const bool eq = !is_infinite_bound(l_[i]) && !is_infinite_bound(u_[i]) && u_[i] - l_[i] < 1e-4;
          rho_vec_[i] = eq ? kRhoEqualityFactor * rho_ : rho_;
        }
        rho_inv_ = rho_vec_.cwiseInverse();
        assemble_and_factor(false);
      }
    }
  }

  if (set_.polish) {
    if (auto p = polish(best)) {
      p->iterations = set_.max_iter;
      return *p;
    }
  }
  return unscaled(best, QpStatus::MaxIter, set_.max_iter);
}

void write_number(std::ostream& out, double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  out.write(buf, res.ptr - buf);
}

double read_number(std::istream& in) {
  std::string tok;
  if (!(in >> tok)) throw Error(Errc::ParseError, "qp dump: unexpected end of input");
  double v = 0.0;
  const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (res.ec != std::errc() || res.ptr != tok.data() + tok.size()) {
    throw Error(Errc::ParseError, "qp dump: bad number '" + tok + "'");
  }
  return v;
}

Index read_index(std::istream& in) {
  long long v = 0;
  if (!(in >> v) || v < 0) throw Error(Errc::ParseError, "qp dump: bad index");
  return static_cast<Index>(v);
}

void expect_token(std::istream& in, const std::string& want) {
  std::string tok;
  if (!(in >> tok) || tok != want) throw Error(Errc::ParseError, "qp dump: expected '" + want + "'");
}

}  // namespace

std::string_view to_string(QpStatus status) {
  switch (status) {
    case QpStatus::Optimal: return "optimal";
    case QpStatus::PrimalInfeasible: return "primal_infeasible";
    case QpStatus::DualInfeasible: return "dual_infeasible";
    case QpStatus::MaxIter: return "max_iter";
  }
  return "unknown";
}

std::string_view to_string(QpMethod method) {
  switch (method) {
    case QpMethod::Admm: return "admm";
    case QpMethod::InteriorPoint: return "interior_point";
    case QpMethod::Auto: return "auto";
  }
  return "unknown";
}

QpMethod parse_qp_method(std::string_view name) {
  for (QpMethod m : {QpMethod::Admm, QpMethod::InteriorPoint, QpMethod::Auto}) {
    if (to_string(m) == name) return m;
  }
  throw Error(Errc::InvalidParameter, "solver method must be 'admm', 'interior_point' or 'auto'");
}

void QuadraticProgram::validate() const {
  const Index n = q.size();
  const Index m = l.size();
  if (P.rows() != n || P.cols() != n || A.cols() != n || A.rows() != m || u.size() != m) {
    throw Error(Errc::DimensionMismatch, "QP dimensions do not agree");
  }
  const SparseMatrix asym = P - SparseMatrix(P.transpose());
  for (Index k = 0; k < asym.outerSize(); ++k) {
    for (SparseMatrix::InnerIterator it(asym, k); it; ++it) {
      if (std::abs(it.value()) > 1e-12 * (1.0 + std::abs(P.coeff(it.row(), k)))) {
        throw Error(Errc::InvalidParameter, "P is not symmetric");
      }
    }
  }
  for (Index i = 0; i < m; ++i) {
    if (std::isnan(l[i]) || std::isnan(u[i]) || l[i] > u[i]) {
      throw Error(Errc::InvalidParameter, "constraint " + std::to_string(i) + " has l > u");
    }
  }
}

double QuadraticProgram::objective(const Eigen::VectorXd& x) const { return 0.5 * x.dot(P * x) + q.dot(x); }

void SolverSettings::validate() const {
  if (!(eps_abs > 0.0) || !(eps_rel > 0.0)) throw Error(Errc::InvalidParameter, "solver tolerances must be positive");
  if (max_iter < 1 || check_interval < 1 || adaptive_rho_interval < 1 || polish_interval < 1 || polish_rounds < 1) {
    throw Error(Errc::InvalidParameter, "solver iteration counts must be positive");
  }
  if (!(ipm_tolerance > 0.0) || ipm_max_iter < 1 || auto_admm_iter < 1) {
    throw Error(Errc::InvalidParameter, "interior point settings must be positive");
  }
  if (!(rho > 0.0) || !(sigma > 0.0) || !(alpha > 0.0 && alpha < 2.0)) {
    throw Error(Errc::InvalidParameter, "need rho > 0, sigma > 0, 0 < alpha < 2");
  }
}

KktResiduals kkt_residuals(const QuadraticProgram& prob, const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
  if (x.size() != prob.num_variables() || y.size() != prob.num_constraints()) {
    throw Error(Errc::DimensionMismatch, "kkt_residuals: x or y has the wrong length");
  }
  KktResiduals res;
  const VectorXd ax = prob.A * x;
  for (Index i = 0; i < ax.size(); ++i) {
    const double lo = prob.l[i];
    const double hi = prob.u[i];
    if (!is_infinite_bound(lo)) res.primal = std::max(res.primal, lo - ax[i]);
    if (!is_infinite_bound(hi)) res.primal = std::max(res.primal, ax[i] - hi);
    if (y[i] > 0.0) {
      res.complementarity = std::max(res.complementarity, is_infinite_bound(hi) ? y[i] : y[i] * std::abs(hi - ax[i]));
    } else if (y[i] < 0.0) {
      res.complementarity = std::max(res.complementarity, is_infinite_bound(lo) ? -y[i] : -y[i] * std::abs(ax[i] - lo));
    }
  }
  res.dual = inf_norm(prob.P * x + prob.q + prob.A.transpose() * y);
  return res;
}

QpSolution solve_qp(const QuadraticProgram& prob, const SolverSettings& settings) {
  prob.validate();
  settings.validate();
  if (settings.method == QpMethod::InteriorPoint) return detail::solve_interior_point(prob, settings);
  if (settings.method == QpMethod::Admm) return AdmmSolver(prob, settings).run();

  SolverSettings first = settings;
  first.max_iter = std::min(settings.max_iter, settings.auto_admm_iter);
  QpSolution admm = AdmmSolver(prob, first).run();
  if (admm.polished || admm.status == QpStatus::PrimalInfeasible || admm.status == QpStatus::DualInfeasible) {
    return admm;
  }
  QpSolution ipm = detail::solve_interior_point(prob, settings);
  spdlog::debug("qp: admm stopped at {} iterations ({}), interior point {} after {}", admm.iterations,
                to_string(admm.status), to_string(ipm.status), ipm.iterations);
  if (ipm.status == QpStatus::Optimal) {
    ipm.iterations += admm.iterations;
    return ipm;
  }
  return admm;
}

void write_qp(std::ostream& out, const QuadraticProgram& prob) {
  prob.validate();
  const auto n = prob.num_variables();
  const auto m = prob.num_constraints();
  out << "cesplan-qp 1\n" << n << ' ' << m << '\n';
  auto emit_matrix = [&](const char* name, const SparseMatrix& mat, bool upper_only) {
    std::vector<Triplet> entries;
    for (Index k = 0; k < mat.outerSize(); ++k) {
      for (SparseMatrix::InnerIterator it(mat, k); it; ++it) {
        if (!upper_only || it.row() <= k) entries.emplace_back(static_cast<int>(it.row()), static_cast<int>(k), it.value());
      }
    }
    out << name << ' ' << entries.size() << '\n';
    for (const auto& t : entries) {
      out << t.row() << ' ' << t.col() << ' ';
      write_number(out, t.value());
      out << '\n';
    }
  };
  auto emit_vector = [&](const char* name, const VectorXd& v, bool bound) {
    out << name << '\n';
    for (Index i = 0; i < v.size(); ++i) {
      double value = v[i];
      if (bound && is_infinite_bound(value)) value = value > 0 ? kInfinity : -kInfinity;
      write_number(out, value);
      out << '\n';
    }
  };
  emit_matrix("P", prob.P, true);
  emit_vector("q", prob.q, false);
  emit_matrix("A", prob.A, false);
  emit_vector("l", prob.l, true);
  emit_vector("u", prob.u, true);
}

QuadraticProgram read_qp(std::istream& in) {
  expect_token(in, "cesplan-qp");
  expect_token(in, "1");
  const Index n = read_index(in);
  const Index m = read_index(in);
  auto read_matrix = [&](const char* name, Index rows, Index cols, bool mirror) {
    expect_token(in, name);
    const Index nnz = read_index(in);
    std::vector<Triplet> trip;
    for (Index k = 0; k < nnz; ++k) {
      const Index r = read_index(in);
      const Index c = read_index(in);
      const double v = read_number(in);
      if (r >= rows || c >= cols) throw Error(Errc::ParseError, std::string("qp dump: ") + name + " index out of range");
      trip.emplace_back(static_cast<int>(r), static_cast<int>(c), v);
      if (mirror && r != c) trip.emplace_back(static_cast<int>(c), static_cast<int>(r), v);
    }
    SparseMatrix mat(rows, cols);
    mat.setFromTriplets(trip.begin(), trip.end());
    return mat;
  };
  auto read_vector = [&](const char* name, Index len) {
    expect_token(in, name);
    VectorXd v(len);
    for (Index i = 0; i < len; ++i) v[i] = read_number(in);
    return v;
  };
  QuadraticProgram prob;
  prob.P = read_matrix("P", n, n, true);
  prob.q = read_vector("q", n);
  prob.A = read_matrix("A", m, n, false);
  prob.l = read_vector("l", m);
  prob.u = read_vector("u", m);
  prob.validate();
  return prob;
}

}  // namespace cesplan
