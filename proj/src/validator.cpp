#include "cesplan/validator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "cesplan/error.hpp"

namespace cesplan {

namespace {

const std::vector<std::string> kFamilies{"design",    "customer_exchange", "ces_balance", "power_limits",
                                         "soc_dynamics", "soc_bounds",      "continuity",  "voltage",
                                         "objectives"};

class Recorder {
 public:
  explicit Recorder(ValidationReport& r) : r_(r) {
    for (const auto& f : kFamilies) r_.max_violation[f] = 0.0;
  }

  // `excess` is how far past its limit the quantity is; positive beyond
  // `tol` is a violation.
  void check(const std::string& family, double excess, double tol, int step, int index, const std::string& detail) {
    if (!std::isfinite(excess)) excess = std::numeric_limits<double>::infinity();
    double& worst = r_.max_violation[family];
    worst = std::max(worst, excess);
    if (excess > tol) r_.violations.push_back({family, step, index, excess, detail});
  }

 private:
  ValidationReport& r_;
};

double excess_outside(double v, double lo, double hi) { return std::max({lo - v, v - hi, 0.0}); }

// Per-node absorption (kW / kVAR), rows by node - 1.
void nodal_injections(const Scenario& sc, const CesDesign& design, const Schedule& s, Eigen::MatrixXd& p,
                      Eigen::MatrixXd& q) {
  const int N = sc.network.node_count();
  const int T = sc.steps();
  p = Eigen::MatrixXd::Zero(N, T);
  q = Eigen::MatrixXd::Zero(N, T);
  for (const auto& c : sc.customers) {
    for (int t = 0; t < T; ++t) {
      const auto k = static_cast<std::size_t>(t);
      p(c.node - 1, t) += c.p_load_kw[k] - c.p_pv_kw[k];
      q(c.node - 1, t) += c.q_load_kvar[k];
    }
  }
  if (design.location >= 1 && design.location <= N) {
    for (int t = 0; t < T; ++t) p(design.location - 1, t) += s.p_ch_kw[t] - s.p_dis_kw[t];
  }
}

// Line flows by summing children into parents, deepest nodes first.
void line_flows_by_recursion(const Network& net, const Eigen::MatrixXd& p, const Eigen::MatrixXd& q,
                             Eigen::MatrixXd& fp, Eigen::MatrixXd& fq) {
  fp = p;
  fq = q;
  const auto& order = net.topological_order();
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    const NodeId parent = net.parent(*it);
    if (parent != kSlack) {
      fp.row(parent - 1) += fp.row(*it - 1);
      fq.row(parent - 1) += fq.row(*it - 1);
    }
  }
}

void check_dimensions(const Scenario& sc, const Schedule& s) {
  const auto T = static_cast<std::size_t>(sc.steps());
  const std::size_t C = sc.customers.size();
  bool ok = s.p_ch_kw.size() == T && s.p_dis_kw.size() == T && s.energy_kwh.size() == T && s.grid_ces_kw.size() == T &&
            s.grid_customer_kw.size() == C && s.ces_customer_kw.size() == C;
  for (std::size_t c = 0; ok && c < C; ++c) {
    ok = s.grid_customer_kw[c].size() == T && s.ces_customer_kw[c].size() == T;
  }
  if (!ok) throw Error(Errc::DimensionMismatch, "schedule does not match the scenario horizon or customers");
}

}  // namespace

ObjectiveValues evaluate_objectives(const Scenario& sc, const CesDesign& design, const Schedule& s) {
  check_dimensions(sc, s);
  const double dt = sc.horizon.dt_hours;
  Eigen::MatrixXd p, q, fp, fq;
  nodal_injections(sc, design, s, p, q);
  line_flows_by_recursion(sc.network, p, q, fp, fq);

  ObjectiveValues v;
  const double u0 = sc.network.u0();
  for (NodeId j = 1; j <= sc.network.node_count(); ++j) {
    const double r = sc.network.line_into(j).r_ohm;
    for (int t = 0; t < sc.steps(); ++t) {
      const double pw = fp(j - 1, t) * kWattsPerKw;
      const double qw = fq(j - 1, t) * kWattsPerKw;
      v.loss_kwh += r * (pw * pw + qw * qw) / u0 * dt / kWattsPerKw;
    }
  }
  for (int t = 0; t < sc.steps(); ++t) {
    double grid = s.grid_ces_kw[t];
    for (const auto& row : s.grid_customer_kw) grid += row[t];
    v.trade_aud += tou_price(sc.tariff, t) * dt * grid;
  }
  v.invest_aud = design.location == kSlack ? 0.0 : sc.ces.gamma_aud + sc.ces.delta_aud_per_kwh * design.e_cap_kwh;
  return v;
}

ValidationReport validate_plan(const Scenario& sc, const CesDesign& design, const Schedule& s,
                               const ValidationTolerances& tol, const std::optional<ObjectiveValues>& claimed) {
  check_dimensions(sc, s);
  ValidationReport report;
  Recorder rec(report);
  const CesParameters& ces = sc.ces;
  const int T = sc.steps();
  const int N = sc.network.node_count();
  const double dt = sc.horizon.dt_hours;
  const double e_cap = design.e_cap_kwh;
  const double p_rate = design.p_rate_kw;

  // Design.
  if (design.location < 1 || design.location > N) {
    rec.check("design", 1.0, 0.0, -1, design.location, "CES location is not a non-slack node");
  }
  rec.check("design", excess_outside(e_cap, ces.e_cap_min_kwh, ces.e_cap_max_kwh), tol.energy_kwh, -1, -1,
            "capacity outside its limits");
  rec.check("design", excess_outside(p_rate, ces.p_rate_min_kw, ces.p_rate_max_kw), tol.power_kw, -1, -1,
            "power rating outside its limits");
  rec.check("design", std::abs(s.initial_energy_kwh - ces.initial_soc_fraction * e_cap), tol.energy_kwh, -1, -1,
            "initial energy does not match the initial state of charge");

  for (int t = 0; t < T; ++t) {
    const auto k = static_cast<std::size_t>(t);
    // Customer exchange: grid import between zero and the net position, and
    // the CES covers the rest.
    double from_ces = 0.0;
    for (std::size_t c = 0; c < sc.customers.size(); ++c) {
      const auto& cust = sc.customers[c];
      const double net = cust.p_load_kw[k] - cust.p_pv_kw[k];
      const double g = s.grid_customer_kw[c][k];
      rec.check("customer_exchange", excess_outside(g, std::min(0.0, net), std::max(0.0, net)), tol.power_kw, t,
                static_cast<int>(c), "customer grid exchange outside [0, net position]");
      rec.check("customer_exchange", std::abs(g + s.ces_customer_kw[c][k] - net), tol.power_kw, t,
                static_cast<int>(c), "grid and CES supply do not add up to the net position");
      from_ces += s.ces_customer_kw[c][k];
    }
    rec.check("ces_balance", std::abs(s.grid_ces_kw[k] - (from_ces + s.p_ch_kw[k] - s.p_dis_kw[k])), tol.power_kw,
              t, -1, "CES grid exchange does not balance charge, discharge and customer supply");

    rec.check("power_limits", excess_outside(s.p_ch_kw[k], 0.0, p_rate), tol.power_kw, t, -1,
              "charging power outside [0, rating]");
    rec.check("power_limits", excess_outside(s.p_dis_kw[k], 0.0, p_rate), tol.power_kw, t, -1,
              "discharging power outside [0, rating]");
    if (std::min(s.p_ch_kw[k], s.p_dis_kw[k]) > tol.power_kw) ++report.simultaneous_steps;

    const double prev = t == 0 ? s.initial_energy_kwh : s.energy_kwh[k - 1];
    const double expected = prev + dt * (ces.eta_ch * s.p_ch_kw[k] - s.p_dis_kw[k] / ces.eta_dis);
    rec.check("soc_dynamics", std::abs(s.energy_kwh[k] - expected), tol.energy_kwh, t, -1,
              "stored energy does not follow charge and discharge");
    rec.check("soc_bounds", excess_outside(s.energy_kwh[k], ces.lambda_min * e_cap, ces.lambda_max * e_cap),
              tol.energy_kwh, t, -1, "stored energy outside its state-of-charge band");
  }

  const int per_day = sc.horizon.steps_per_day();
  for (int d = 0; d < sc.horizon.day_count(); ++d) {
    const int t = (d + 1) * per_day - 1;
    const double drift = std::abs(s.energy_kwh[static_cast<std::size_t>(t)] - s.initial_energy_kwh);
    rec.check("continuity", std::max(0.0, drift - ces.epsilon_kwh), tol.energy_kwh, t, d,
              "end-of-day energy drifts from the initial energy");
  }

  // Voltages by walking the feeder from the slack.
  Eigen::MatrixXd p, q, fp, fq;
  nodal_injections(sc, design, s, p, q);
  line_flows_by_recursion(sc.network, p, q, fp, fq);
  Eigen::MatrixXd u(N, T);
  for (NodeId j : sc.network.topological_order()) {
    const Line& line = sc.network.line_into(j);
    for (int t = 0; t < T; ++t) {
      const double up = line.parent == kSlack ? sc.network.u0() : u(line.parent - 1, t);
      u(j - 1, t) = up - 2.0 * kWattsPerKw * (line.r_ohm * fp(j - 1, t) + line.x_ohm * fq(j - 1, t));
    }
  }
  report.min_voltage_v2 = N > 0 && T > 0 ? u.minCoeff() : 0.0;
  report.max_voltage_v2 = N > 0 && T > 0 ? u.maxCoeff() : 0.0;
  for (NodeId j = 1; j <= N; ++j) {
    for (int t = 0; t < T; ++t) {
      rec.check("voltage", excess_outside(u(j - 1, t), sc.network.umin(), sc.network.umax()), tol.voltage_v2, t, j,
                "squared voltage outside its limits");
    }
  }

  report.objectives = evaluate_objectives(sc, design, s);
  if (claimed) {
    for (Objective o : kObjectives) {
      const double want = report.objectives[o];
      const double gap = std::abs((*claimed)[o] - want) / std::max(1.0, std::abs(want));
      rec.check("objectives", gap, tol.objective_rel, -1, static_cast<int>(o),
                std::string(to_string(o)) + " differs from the recomputed value");
    }
  }
  return report;
}

}  // namespace cesplan
