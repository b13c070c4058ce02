#include <doctest.h>

#include <random>
#include <sstream>

#include "cesplan/error.hpp"
#include "cesplan/qp.hpp"
#include "oracles.hpp"

using namespace cesplan;

namespace {

QuadraticProgram dense_qp(const Eigen::MatrixXd& p, const Eigen::VectorXd& q, const Eigen::MatrixXd& a,
                          const Eigen::VectorXd& l, const Eigen::VectorXd& u) {
  QuadraticProgram prob;
  prob.P = p.sparseView();
  prob.q = q;
  prob.A = SparseMatrix(a.rows(), a.cols());
  if (a.size() > 0) prob.A = a.sparseView();
  prob.l = l;
  prob.u = u;
  return prob;
}

QuadraticProgram active_bound_qp() {
  // min x^2  s.t.  x >= 1
  return dense_qp(Eigen::MatrixXd::Constant(1, 1, 2.0), Eigen::VectorXd::Zero(1), Eigen::MatrixXd::Ones(1, 1),
                  Eigen::VectorXd::Constant(1, 1.0), Eigen::VectorXd::Constant(1, kInfinity));
}

}  // namespace

TEST_CASE("solve_qp: active lower bound") {
  const QpSolution sol = solve_qp(active_bound_qp());
  REQUIRE(sol.status == QpStatus::Optimal);
  CHECK(sol.x[0] == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(sol.objective == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(sol.y[0] < 0.0);
}

TEST_CASE("solve_qp: unconstrained stationarity") {
  const QuadraticProgram prob = dense_qp(Eigen::MatrixXd::Identity(2, 2), Eigen::Vector2d(-1.0, -2.0),
                                         Eigen::MatrixXd(0, 2), Eigen::VectorXd(0), Eigen::VectorXd(0));
  const QpSolution sol = solve_qp(prob);
  REQUIRE(sol.status == QpStatus::Optimal);
  CHECK(sol.x[0] == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(sol.x[1] == doctest::Approx(2.0).epsilon(1e-8));
}

TEST_CASE("solve_qp: infeasibility certificates") {
  SUBCASE("primal infeasible: x >= 1 and x <= 0") {
    const QuadraticProgram prob =
        dense_qp(Eigen::MatrixXd::Identity(1, 1), Eigen::VectorXd::Zero(1), Eigen::MatrixXd::Ones(2, 1),
                 Eigen::Vector2d(1.0, -kInfinity), Eigen::Vector2d(kInfinity, 0.0));
    CHECK(solve_qp(prob).status == QpStatus::PrimalInfeasible);
  }
  SUBCASE("dual infeasible: min -x, x >= 0") {
    const QuadraticProgram prob =
        dense_qp(Eigen::MatrixXd::Zero(1, 1), Eigen::VectorXd::Constant(1, -1.0), Eigen::MatrixXd::Ones(1, 1),
                 Eigen::VectorXd::Zero(1), Eigen::VectorXd::Constant(1, kInfinity));
    CHECK(solve_qp(prob).status == QpStatus::DualInfeasible);
  }
}

TEST_CASE("solve_qp: max_iter returns the best iterate with residuals") {
  SolverSettings s;
  s.max_iter = 3;
  s.polish = false;
  std::mt19937_64 rng(99);
  const QuadraticProgram prob = testing::random_qp(rng, false);
  const QpSolution sol = solve_qp(prob, s);
  CHECK(sol.status == QpStatus::MaxIter);
  CHECK(sol.x.size() == prob.num_variables());
  CHECK(sol.primal_residual >= 0.0);
}

TEST_CASE("solve_qp: rejects malformed problems") {
  QuadraticProgram prob = active_bound_qp();
  prob.l[0] = 2.0;
  prob.u[0] = 1.0;
  CHECK_THROWS_AS(solve_qp(prob), Error);

  Eigen::MatrixXd p(2, 2);
  p << 1, 1, 0, 1;
  CHECK_THROWS_AS(solve_qp(dense_qp(p, Eigen::VectorXd::Zero(2), Eigen::MatrixXd(0, 2), Eigen::VectorXd(0),
                                    Eigen::VectorXd(0))),
                  Error);
}

TEST_CASE("kkt_residuals: direct evaluation") {
  const QuadraticProgram prob = active_bound_qp();
  Eigen::VectorXd x(1), y(1);
  x << 1.0;
  y << -2.0;
  KktResiduals r = kkt_residuals(prob, x, y);
  CHECK(r.primal <= 1e-9);
  CHECK(r.dual <= 1e-9);
  CHECK(r.complementarity <= 1e-9);

  x[0] += 0.1;
  r = kkt_residuals(prob, x, y);
  CHECK(std::max(r.primal, r.dual) > 1e-3);

  const QuadraticProgram zero = dense_qp(Eigen::MatrixXd::Zero(2, 2), Eigen::VectorXd::Zero(2), Eigen::MatrixXd(0, 2),
                                         Eigen::VectorXd(0), Eigen::VectorXd(0));
  r = kkt_residuals(zero, Eigen::Vector2d(3.0, -7.0), Eigen::VectorXd(0));
  CHECK(r.primal == 0.0);
  CHECK(r.dual == 0.0);
  CHECK(r.complementarity == 0.0);
}

TEST_CASE("solve_qp: zero problem") {
  const QuadraticProgram zero = dense_qp(Eigen::MatrixXd::Zero(2, 2), Eigen::VectorXd::Zero(2), Eigen::MatrixXd(0, 2),
                                         Eigen::VectorXd(0), Eigen::VectorXd(0));
  const QpSolution sol = solve_qp(zero);
  CHECK(sol.status == QpStatus::Optimal);
  CHECK(sol.objective == 0.0);
}

TEST_CASE("solve_qp: agrees with active-set enumeration on random QPs") {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 60; ++trial) {
    const bool singular = trial % 3 == 0;
    const QuadraticProgram prob = testing::random_qp(rng, singular);
    const auto oracle = testing::enumerate_active_sets(prob);
    REQUIRE(oracle.feasible);
    const QpSolution sol = solve_qp(prob);
    REQUIRE(sol.status == QpStatus::Optimal);
    CHECK(std::abs(sol.objective - oracle.objective) <= 1e-5 * std::max(1.0, std::abs(oracle.objective)));
    const KktResiduals r = kkt_residuals(prob, sol.x, sol.y);
    CHECK(r.primal <= 1e-6);
    CHECK(r.dual <= 1e-6);
  }
}

TEST_CASE("solve_qp: deterministic iterate sequence") {
  std::mt19937_64 rng(5);
  const QuadraticProgram prob = testing::random_qp(rng, false);
  const QpSolution a = solve_qp(prob);
  const QpSolution b = solve_qp(prob);
  CHECK(a.iterations == b.iterations);
  CHECK(a.x == b.x);
  CHECK(a.y == b.y);
}

TEST_CASE("solve_qp: argmin invariant under positive cost scaling") {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 10; ++trial) {
    QuadraticProgram prob = testing::random_qp(rng, false);
    const QpSolution base = solve_qp(prob);
    prob.P *= 37.5;
    prob.q *= 37.5;
    const QpSolution scaled = solve_qp(prob);
    REQUIRE(base.status == QpStatus::Optimal);
    REQUIRE(scaled.status == QpStatus::Optimal);
    CHECK((base.x - scaled.x).lpNorm<Eigen::Infinity>() <= 1e-5 * std::max(1.0, base.x.lpNorm<Eigen::Infinity>()));
  }
}

TEST_CASE("write_qp / read_qp preserve the problem exactly") {
  std::mt19937_64 rng(23);
  const QuadraticProgram prob = testing::random_qp(rng, true);
  std::stringstream buf;
  write_qp(buf, prob);
  const QuadraticProgram back = read_qp(buf);
  CHECK(Eigen::MatrixXd(back.P) == Eigen::MatrixXd(prob.P));
  CHECK(Eigen::MatrixXd(back.A) == Eigen::MatrixXd(prob.A));
  CHECK(back.q == prob.q);
  for (Eigen::Index i = 0; i < prob.l.size(); ++i) {
    CHECK(is_infinite_bound(back.l[i]) == is_infinite_bound(prob.l[i]));
    if (!is_infinite_bound(prob.l[i])) CHECK(back.l[i] == prob.l[i]);
    if (!is_infinite_bound(prob.u[i])) CHECK(back.u[i] == prob.u[i]);
  }
  std::stringstream bad("cesplan-qp 1\n1 0\nP 1\n0 0 abc\n");
  CHECK_THROWS_AS(read_qp(bad), Error);
}

TEST_CASE("interior point and auto methods agree with active-set enumeration") {
  for (QpMethod method : {QpMethod::InteriorPoint, QpMethod::Auto}) {
    SolverSettings s;
    s.method = method;
    std::mt19937_64 rng(77);
    for (int trial = 0; trial < 25; ++trial) {
      const QuadraticProgram prob = testing::random_qp(rng, trial % 3 == 0);
      const auto oracle = testing::enumerate_active_sets(prob);
      REQUIRE(oracle.feasible);
      const QpSolution sol = solve_qp(prob, s);
      REQUIRE(sol.status == QpStatus::Optimal);
      CHECK(std::abs(sol.objective - oracle.objective) <= 1e-6 * std::max(1.0, std::abs(oracle.objective)));
      const KktResiduals r = kkt_residuals(prob, sol.x, sol.y);
      CHECK(r.primal <= 1e-8);
      CHECK(r.dual <= 1e-6);
      CHECK(r.complementarity <= 1e-6);
    }
  }
}

TEST_CASE("interior point: infeasible problem does not report Optimal") {
  SolverSettings s;
  s.method = QpMethod::InteriorPoint;
  QuadraticProgram prob;
  prob.P = SparseMatrix(1, 1);
  prob.P.insert(0, 0) = 1.0;
  prob.q = Eigen::VectorXd::Zero(1);
  prob.A = SparseMatrix(2, 1);
  prob.A.insert(0, 0) = 1.0;
  prob.A.insert(1, 0) = 1.0;
  prob.l = Eigen::Vector2d(1.0, -kInfinity);
  prob.u = Eigen::Vector2d(kInfinity, 0.0);
  CHECK(solve_qp(prob, s).status != QpStatus::Optimal);
  s.method = QpMethod::Auto;
  CHECK(solve_qp(prob, s).status == QpStatus::PrimalInfeasible);
}
