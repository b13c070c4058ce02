// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails. Tolerances and time limits are pinned below.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "cesplan/cesopt.hpp"
#include "cesplan/fixture.hpp"
#include "cesplan/planner.hpp"
#include "cesplan/validator.hpp"
#include "oracles.hpp"

using namespace cesplan;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

struct Criterion {
  int id;
  std::string name;
  double time_limit_s;
  std::function<Outcome()> check;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

double rel_err(double got, double want) { return std::abs(got - want) / std::max(1e-300, std::abs(want)); }

constexpr double kU0 = 160000.0;

Outcome investment_formula() {
  const Scenario sc = synthetic_fixture({.days = 1});
  const ModelInstance model = build_model(sc, 3);
  const double caps[] = {482.15, 601.32, 547.69};
  const double want[] = {168645.0, 204396.0, 188307.0};
  double worst = 0.0;
  for (int i = 0; i < 3; ++i) {
    Eigen::VectorXd x = Eigen::VectorXd::Zero(model.layout.size());
    x[model.layout.e_cap()] = caps[i];
    worst = std::max(worst, rel_err(model.evaluate(x).invest_aud, want[i]));
    CesDesign d{3, caps[i], 100.0};
    worst = std::max(worst, rel_err(evaluate_objectives(sc, d, passive_schedule(sc)).invest_aud, want[i]));
  }
  return {worst <= 1e-9, "max rel err " + fmt("%.2e", worst) + " (tol 1e-9)"};
}

Outcome ahp_reference() {
  const AhpResult r = ahp_weights(default_ahp_judgments());
  const double want[] = {1.0 / 9.0, 4.0 / 9.0, 4.0 / 9.0};
  double worst = 0.0;
  for (int i = 0; i < 3; ++i) worst = std::max(worst, std::abs(r.weights[i] - want[i]));
  return {worst <= 1e-9, "weights " + fmt("%.6f", r.weights[0]) + ", " + fmt("%.6f", r.weights[1]) + ", " +
                             fmt("%.6f", r.weights[2]) + ", max abs err " + fmt("%.2e", worst) + " (tol 1e-9)"};
}

Outcome tou_windows() {
  const TouSchedule s = TouSchedule::residential_default();
  struct Probe {
    double hour, price;
  };
  const Probe probes[] = {{0.0, 0.24871},  {7.0, 0.31207},  {15.0, 0.52602}, {21.0, 0.31207}, {22.0, 0.24871},
                          {6.999, 0.24871}, {14.999, 0.31207}, {20.999, 0.52602}, {21.999, 0.31207}, {23.999, 0.24871},
                          {24.0, 0.24871}};
  int bad = 0;
  for (const auto& p : probes) bad += s.price_at_hour(p.hour) != p.price;
  Horizon h{24, 1.0};
  const Tariff t = Tariff::from_schedule(s, h);
  for (const auto& p : probes) {
    if (p.hour < 24.0 && p.hour == std::floor(p.hour)) bad += tou_price(t, static_cast<int>(p.hour)) != p.price;
  }
  return {bad == 0, std::to_string(bad) + " mismatching lookups at window edges"};
}

Outcome lindistflow_consistency() {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> gauss(0.0, 5.0);
  double worst = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 1 + static_cast<int>(rng() % 8);
    const Network net = build_network(testing::random_tree(n, rng), kU0, 0.9 * kU0, 1.1 * kU0);
    Eigen::MatrixXd p(n, 6), q(n, 6);
    for (int i = 0; i < n; ++i)
      for (int t = 0; t < 6; ++t) p(i, t) = gauss(rng), q(i, t) = gauss(rng);
    const Eigen::MatrixXd a = lindistflow_voltages(net, p, q);
    const Eigen::MatrixXd b = testing::recursive_voltages(net, p, q);
    worst = std::max(worst, ((a - b).cwiseAbs().array() / b.cwiseAbs().array()).maxCoeff());
  }
  return {worst <= 1e-9, "200 trees, max rel err " + fmt("%.2e", worst) + " (tol 1e-9)"};
}

// Loss by summing r (P^2 + Q^2) / U0 over lines, flows accumulated here.
double per_line_loss_w(const Network& net, const Eigen::MatrixXd& p, const Eigen::MatrixXd& q) {
  Eigen::MatrixXd fp = 1000.0 * p, fq = 1000.0 * q;
  const auto& order = net.topological_order();
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    const NodeId parent = net.line_into(*it).parent;
    if (parent != kSlack) {
      fp.row(parent - 1) += fp.row(*it - 1);
      fq.row(parent - 1) += fq.row(*it - 1);
    }
  }
  double loss = 0.0;
  for (NodeId j = 1; j <= net.node_count(); ++j) {
    const double r = net.line_into(j).r_ohm;
    loss += r * (fp.row(j - 1).squaredNorm() + fq.row(j - 1).squaredNorm()) / net.u0();
  }
  return loss;
}

Outcome loss_form_equivalence() {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> gauss(0.0, 10.0);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 1 + static_cast<int>(rng() % 8);
    const Network net = build_network(testing::random_tree(n, rng), kU0, 0.9 * kU0, 1.1 * kU0);
    Eigen::MatrixXd p(n, 4), q(n, 4);
    for (int i = 0; i < n; ++i)
      for (int t = 0; t < 4; ++t) p(i, t) = gauss(rng), q(i, t) = gauss(rng);
    worst = std::max(worst, rel_err(loss_quadratic_form(net, q).evaluate(p), per_line_loss_w(net, p, q)));
  }
  return {worst <= 1e-10, "100 cases, max rel err " + fmt("%.2e", worst) + " (tol 1e-10)"};
}

Outcome qp_certification() {
  std::mt19937_64 rng(6);
  double worst_gap = 0.0, worst_primal = 0.0, worst_dual = 0.0;
  int not_optimal = 0;
  for (int trial = 0; trial < 500; ++trial) {
    const QuadraticProgram prob = testing::random_qp(rng, trial % 3 == 0);
    const auto oracle = testing::enumerate_active_sets(prob);
    const QpSolution sol = solve_qp(prob);
    if (!oracle.feasible || sol.status != QpStatus::Optimal) {
      ++not_optimal;
      continue;
    }
    worst_gap =
        std::max(worst_gap, std::abs(sol.objective - oracle.objective) / std::max(1.0, std::abs(oracle.objective)));
    const KktResiduals r = kkt_residuals(prob, sol.x, sol.y);
    worst_primal = std::max(worst_primal, r.primal);
    worst_dual = std::max(worst_dual, r.dual);
  }
  const bool ok = not_optimal == 0 && worst_gap <= 1e-5 && worst_primal <= 1e-6 && worst_dual <= 1e-6;
  return {ok, "500 QPs, " + std::to_string(not_optimal) + " not optimal, max gap " + fmt("%.2e", worst_gap) +
                  " (tol 1e-5), max primal " + fmt("%.2e", worst_primal) + ", max dual " + fmt("%.2e", worst_dual) +
                  " (tol 1e-6)"};
}

// Shared by the fixture criteria.
struct FixtureRun {
  Scenario sc = synthetic_fixture();
  PlanOptions options;
  PlanResult result;
  FixtureRun() { result = plan(sc, options); }
};

FixtureRun& fixture_run() {
  static FixtureRun run;
  return run;
}

Outcome end_to_end() {
  FixtureRun& f = fixture_run();
  const PlanResult& res = f.result;
  const LocationResult& best = res.best();
  std::ostringstream detail;
  bool ok = true;

  // (a) the enumerated plan against each fixed-location run.
  double worst_margin = -std::numeric_limits<double>::infinity();
  int fixed_runs = 0;
  for (NodeId j = 1; j <= f.sc.network.node_count(); ++j) {
    PlanOptions fixed = f.options;
    fixed.fixed_location = j;
    const PlanResult single = plan(f.sc, fixed);
    const LocationResult& r = single.best();
    if (r.status != LocationStatus::Optimal || r.location != j) continue;
    ++fixed_runs;
    worst_margin = std::max(worst_margin, best.weighted_objective - r.weighted_objective);
  }
  ok = ok && fixed_runs > 0 && worst_margin <= 1e-6;
  detail << "(a) node " << best.location << ", " << fixed_runs << " fixed runs, max(plan - fixed) "
         << fmt("%.2e", worst_margin) << " (tol 1e-6); ";

  // (b) strictly below the no-storage baseline.
  const double loss_pct = 100.0 * best.values.loss_kwh / res.baseline.loss_kwh;
  const double trade_pct = 100.0 * best.values.trade_aud / res.baseline.trade_aud;
  ok = ok && best.values.loss_kwh < res.baseline.loss_kwh && best.values.trade_aud < res.baseline.trade_aud;
  detail << "(b) loss " << fmt("%.1f", loss_pct) << "%, trade " << fmt("%.1f", trade_pct) << "% of baseline; ";

  // (c) every returned schedule validates.
  int failures = 0, checked = 0;
  double drift = 0.0;
  for (const auto& r : res.leaderboard) {
    if (r.status != LocationStatus::Optimal) continue;
    ++checked;
    const ValidationReport v = validate_plan(f.sc, r.design, r.schedule, {}, r.values);
    failures += !v.ok();
    const int per_day = f.sc.horizon.steps_per_day();
    for (int d = 0; d < f.sc.horizon.day_count(); ++d) {
      drift = std::max(drift, std::abs(r.schedule.energy_kwh[(d + 1) * per_day - 1] - r.schedule.initial_energy_kwh));
    }
  }
  ok = ok && failures == 0 && checked > 0 && drift <= f.sc.ces.epsilon_kwh + ValidationTolerances{}.energy_kwh;
  detail << "(c) " << checked - failures << "/" << checked << " schedules valid, max day drift "
         << fmt("%.7e", drift) << " kWh";
  return {ok, detail.str()};
}

Outcome normalization_invariants() {
  FixtureRun& f = fixture_run();
  const PlanResult& res = f.result;
  const NormalizationContext& ctx = *res.global_context;
  std::ostringstream detail;
  bool ok = true;

  // Utopia never beats the value at any weighted optimum.
  double worst_utopia = -std::numeric_limits<double>::infinity();
  for (const auto& r : res.leaderboard) {
    if (r.status != LocationStatus::Optimal) continue;
    for (Objective o : kObjectives) {
      const auto k = static_cast<std::size_t>(o);
      worst_utopia = std::max(worst_utopia, (ctx.utopia[k] - r.values[o]) / std::max(1.0, std::abs(ctx.utopia[k])));
    }
  }
  ok = ok && worst_utopia <= 1e-6;
  detail << "utopia - value " << fmt("%.1e", worst_utopia) << " (tol 1e-6); ";

  // Nadir against single-objective minimizers recomputed location by location.
  PayoffMatrix rows{};
  for (Objective o : kObjectives) {
    const auto k = static_cast<std::size_t>(o);
    double best = std::numeric_limits<double>::infinity();
    for (NodeId j = 1; j <= f.sc.network.node_count(); ++j) {
      const SolveReport s = solve_single_objective(build_model(f.sc, j), f.sc, o, f.options.solver);
      if (s.status != QpStatus::Optimal) continue;
      if (std::isinf(best) || s.values[o] < best - 1e-9 * std::max(1.0, std::abs(best))) {
        best = s.values[o];
        for (Objective i : kObjectives) rows[k][static_cast<std::size_t>(i)] = s.values[i];
      }
    }
  }
  double worst_nadir = 0.0;
  for (std::size_t i = 0; i < 3; ++i) {
    const double want = std::max({rows[0][i], rows[1][i], rows[2][i]});
    worst_nadir = std::max(worst_nadir, rel_err(ctx.nadir[i], want));
  }
  ok = ok && worst_nadir <= 1e-6;
  detail << "nadir vs recomputed column max " << fmt("%.1e", worst_nadir) << " (tol 1e-6); ";

  // Weight collapse onto one objective recovers its minimum.
  double worst_collapse = 0.0;
  for (Objective o : kObjectives) {
    const auto k = static_cast<std::size_t>(o);
    PlanOptions single = f.options;
    single.weights = {0.0, 0.0, 0.0};
    single.weights[k] = 1.0;
    const PlanResult r = plan(f.sc, single);
    worst_collapse = std::max(worst_collapse, rel_err(r.best().values[o], ctx.utopia[k]));
  }
  ok = ok && worst_collapse <= 1e-5;
  detail << "weight collapse " << fmt("%.1e", worst_collapse) << " (tol 1e-5)";
  return {ok, detail.str()};
}

Outcome scheduling_shape() {
  FixtureRun& f = fixture_run();
  const Scenario& sc = f.sc;
  const LocationResult& best = f.result.best();
  const Schedule& s = best.schedule;
  const int per_day = sc.horizon.steps_per_day();
  const double dt = sc.horizon.dt_hours;
  const double tol = 1e-6;
  double min_import = std::numeric_limits<double>::infinity();
  int late_max_days = 0;
  std::ostringstream peaks;
  for (int d = 0; d < sc.horizon.day_count(); ++d) {
    double import = 0.0, early_max = -1.0, late_max = -1.0, peak = -1.0;
    int peak_step = 0;
    for (int k = 0; k < per_day; ++k) {
      const int t = d * per_day + k;
      const double h = sc.horizon.hour_of_day(t);
      if (h < 7.0) import += s.grid_ces_kw[t] * dt;
      // Energy after step t is the level at hour h + dt.
      const double e = s.energy_kwh[t];
      if (h + dt <= 7.0) early_max = std::max(early_max, e);
      else late_max = std::max(late_max, e);
      if (e > peak + tol) peak = e, peak_step = k;
    }
    min_import = std::min(min_import, import);
    late_max_days += late_max >= early_max - tol;
    peaks << (d ? "," : "") << fmt("%.0f", sc.horizon.hour_of_day(d * per_day + peak_step) + dt);
  }
  const bool ok = min_import >= -tol && late_max_days == sc.horizon.day_count();
  return {ok, "node " + std::to_string(best.location) + ", min T1 import " + fmt("%.2f", min_import) + " kWh, " +
                  std::to_string(late_max_days) + "/" + std::to_string(sc.horizon.day_count()) +
                  " days peak at or after 7h (first peak hours " + peaks.str() + ")"};
}

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {1, "investment cost formula", 1.0, investment_formula},
      {2, "AHP reference weights", 1.0, ahp_reference},
      {3, "time-of-use window prices", 1.0, tou_windows},
      {4, "LinDistFlow matrix vs recursion", 10.0, lindistflow_consistency},
      {5, "loss quadratic form vs per-line sum", 10.0, loss_form_equivalence},
      {6, "QP solver vs active-set oracle", 60.0, qp_certification},
      {7, "end-to-end plan on the 7-node fixture", 300.0, end_to_end},
      {8, "normalization invariants on the fixture", 300.0, normalization_invariants},
      {9, "daily scheduling shape", 300.0, scheduling_shape},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = secs <= c.time_limit_s;
    const bool pass = o.pass && in_time;
    failed += !pass;
    std::printf("%s %d %s: %s [%.2f s, limit %.0f s%s]\n", pass ? "PASS" : "FAIL", c.id, c.name.c_str(),
                o.detail.c_str(), secs, c.time_limit_s, in_time ? "" : ", over time");
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
