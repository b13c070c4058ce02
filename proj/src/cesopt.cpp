#include "cesplan/cesopt.hpp"

#include <algorithm>
#include <cmath>

#include "cesplan/error.hpp"

namespace cesplan {

std::string_view to_string(Objective o) {
  switch (o) {
    case Objective::Loss: return "loss";
    case Objective::Trade: return "trade";
    case Objective::Invest: return "invest";
  }
  return "?";
}

double QuadraticObjective::evaluate(const Eigen::VectorXd& x) const {
  return 0.5 * x.dot(P * x) + q.dot(x) + constant;
}

double ObjectiveValues::operator[](Objective o) const {
  switch (o) {
    case Objective::Loss: return loss_kwh;
    case Objective::Trade: return trade_aud;
    case Objective::Invest: return invest_aud;
  }
  return 0.0;
}

double& ObjectiveValues::operator[](Objective o) {
  switch (o) {
    case Objective::Trade: return trade_aud;
    case Objective::Invest: return invest_aud;
    default: return loss_kwh;
  }
}

ObjectiveValues ModelInstance::evaluate(const Eigen::VectorXd& x) const {
  ObjectiveValues v;
  for (Objective o : kObjectives) v[o] = objective(o).evaluate(x);
  return v;
}

namespace {

// Accumulates constraint rows as triplets.
class RowBuilder {
 public:
  explicit RowBuilder(int n) : n_(n) {}

  int add(const std::vector<std::pair<int, double>>& coeffs, double lo, double hi) {
    const int row = static_cast<int>(lower_.size());
    for (const auto& [col, v] : coeffs) {
      if (v != 0.0) triplets_.emplace_back(row, col, v);
    }
    lower_.push_back(lo);
    upper_.push_back(hi);
    return row;
  }

  void finish(QuadraticProgram& prob) const {
    const auto m = static_cast<Eigen::Index>(lower_.size());
    prob.A = SparseMatrix(m, n_);
    prob.A.setFromTriplets(triplets_.begin(), triplets_.end());
    prob.l = Eigen::Map<const Eigen::VectorXd>(lower_.data(), m);
    prob.u = Eigen::Map<const Eigen::VectorXd>(upper_.data(), m);
    prob.P = SparseMatrix(n_, n_);
    prob.q = Eigen::VectorXd::Zero(n_);
  }

 private:
  int n_;
  std::vector<Triplet> triplets_;
  std::vector<double> lower_;
  std::vector<double> upper_;
};

// Linear combination of objectives attached to a feasible set.
QuadraticProgram combine(const QuadraticProgram& feasible, const std::array<QuadraticObjective, 3>& objectives,
                         const std::array<double, 3>& weights, double* constant) {
  QuadraticProgram prob = feasible;
  double c = 0.0;
  for (std::size_t i = 0; i < 3; ++i) {
    if (weights[i] == 0.0) continue;
    prob.P += weights[i] * objectives[i].P;
    prob.q += weights[i] * objectives[i].q;
    c += weights[i] * objectives[i].constant;
  }
  prob.P.prune(0.0);
  if (constant) *constant = c;
  return prob;
}

// Customer -> CES transfer per customer for a given CES net absorption.
// Returns the total.
double canonical_split(const Scenario& sc, int t, double ces_net, std::vector<double>& shares) {
  double deficit = 0.0, surplus = 0.0;
  for (const auto& c : sc.customers) {
    const double v = net_position(c, static_cast<std::size_t>(t));
    (v > 0.0 ? deficit : surplus) += v;
  }
  const double target = std::clamp(-ces_net, surplus, deficit);
  double total = 0.0;
  for (std::size_t c = 0; c < sc.customers.size(); ++c) {
    const double v = net_position(sc.customers[c], static_cast<std::size_t>(t));
    double share = 0.0;
    if (target > 0.0 && v > 0.0) share = v * (target / deficit);
    else if (target < 0.0 && v < 0.0) share = v * (target / surplus);
    shares[c] = share;
    total += share;
  }
  return total;
}

// Restricts columns to the storage variables, keeping the rows from
// `first_row` on (none of which touch an exchange variable).
SparseMatrix core_columns(const SparseMatrix& full, const VariableLayout& L, int first_row) {
  const int T = L.steps();
  std::vector<Triplet> trip;
  auto take = [&](int full_col, int core_col) {
    for (SparseMatrix::InnerIterator it(full, full_col); it; ++it) {
      if (it.row() >= first_row) trip.emplace_back(static_cast<int>(it.row()) - first_row, core_col, it.value());
    }
  };
  for (int k = 0; k < 3 * T; ++k) take(k, k);
  take(L.e_cap(), 3 * T);
  take(L.p_rate(), 3 * T + 1);
  SparseMatrix out(full.rows() - first_row, StorageCore::size(T));
  out.setFromTriplets(trip.begin(), trip.end());
  return out;
}

SparseMatrix core_square(const SparseMatrix& full, const VariableLayout& L) {
  // Quadratic terms only involve p_ch and p_dis, which keep their index.
  const int T = L.steps();
  std::vector<Triplet> trip;
  for (int k = 0; k < full.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(full, k); it; ++it) {
      if (it.row() >= 2 * T || k >= 2 * T) throw Error(Errc::InvalidParameter, "unexpected quadratic term");
      trip.emplace_back(static_cast<int>(it.row()), k, it.value());
    }
  SparseMatrix out(StorageCore::size(T), StorageCore::size(T));
  out.setFromTriplets(trip.begin(), trip.end());
  return out;
}

void build_core(ModelInstance& model, int first_row, const std::vector<double>& total_net) {
  const VariableLayout& L = model.layout;
  const int T = L.steps();
  const int nc = StorageCore::size(T);
  StorageCore& core = model.core;
  core.prob.A = core_columns(model.prob.A, L, first_row);
  core.prob.l = model.prob.l.tail(model.prob.l.size() - first_row);
  core.prob.u = model.prob.u.tail(model.prob.u.size() - first_row);
  core.prob.P = SparseMatrix(nc, nc);
  core.prob.q = Eigen::VectorXd::Zero(nc);

  for (Objective o : {Objective::Loss, Objective::Invest}) {
    const QuadraticObjective& full = model.objective(o);
    QuadraticObjective& f = core.objectives[static_cast<std::size_t>(o)];
    f.P = core_square(full.P, L);
    f.q = Eigen::VectorXd::Zero(nc);
    f.q.head(3 * T) = full.q.head(3 * T);
    f.q[3 * T] = full.q[L.e_cap()];
    f.q[3 * T + 1] = full.q[L.p_rate()];
    f.constant = full.constant;
  }
  // Customer and CES grid terms share the price, so their sum is fixed by
  // the balance row: sum of net positions + p_ch - p_dis.
  QuadraticObjective& trade = core.objectives[static_cast<std::size_t>(Objective::Trade)];
  const QuadraticObjective& full_trade = model.objective(Objective::Trade);
  trade.P = SparseMatrix(nc, nc);
  trade.q = Eigen::VectorXd::Zero(nc);
  trade.constant = full_trade.constant;
  for (int t = 0; t < T; ++t) {
    const double w = full_trade.q[L.grid_ces(t)];
    trade.q[L.p_ch(t)] = w;
    trade.q[L.p_dis(t)] = -w;
    trade.constant += w * total_net[static_cast<std::size_t>(t)];
  }
}

}  // namespace

ModelInstance build_model(const Scenario& sc, NodeId location) {
  const Network& net = sc.network;
  if (location == kSlack) throw Error(Errc::SlackLocation, "the CES cannot be placed at the slack node");
  if (location < 1 || location > net.node_count()) {
    throw Error(Errc::UnknownNode, "CES location " + std::to_string(location) + " is not a network node");
  }
  const CesParameters& ces = sc.ces;
  ces.validate();

  const int T = sc.steps();
  const int C = static_cast<int>(sc.customers.size());
  const int N = net.node_count();
  const double dt = sc.horizon.dt_hours;
  const double s0 = ces.initial_soc_fraction;

  ModelInstance model;
  model.location = location;
  model.layout = VariableLayout(T, C);
  const VariableLayout& L = model.layout;
  const int n = L.size();
  RowBuilder rows(n);

  // Customer exchange boxes; the branch follows the sign of the net position.
  std::vector<double> total_net(static_cast<std::size_t>(T), 0.0);
  for (int c = 0; c < C; ++c) {
    const auto& cust = sc.customers[static_cast<std::size_t>(c)];
    for (int t = 0; t < T; ++t) {
      const double net_pos = net_position(cust, static_cast<std::size_t>(t));
      total_net[t] += net_pos;
      rows.add({{L.grid_customer(c, t), 1.0}}, std::min(0.0, net_pos), std::max(0.0, net_pos));
    }
  }

  // CES-grid balance with the customer-CES exchange substituted.
  for (int t = 0; t < T; ++t) {
    std::vector<std::pair<int, double>> coeffs{{L.grid_ces(t), 1.0}, {L.p_ch(t), -1.0}, {L.p_dis(t), 1.0}};
    for (int c = 0; c < C; ++c) coeffs.emplace_back(L.grid_customer(c, t), 1.0);
    rows.add(coeffs, total_net[t], total_net[t]);
  }

  for (int t = 0; t < T; ++t) {
    rows.add({{L.p_ch(t), 1.0}}, 0.0, kInfinity);
    rows.add({{L.p_dis(t), 1.0}}, 0.0, kInfinity);
    rows.add({{L.p_ch(t), 1.0}, {L.p_rate(), -1.0}}, -kInfinity, 0.0);
    rows.add({{L.p_dis(t), 1.0}, {L.p_rate(), -1.0}}, -kInfinity, 0.0);
  }
  // Energy balance: E(t) - E(t-1) - eta_ch dt p_ch + dt / eta_dis p_dis = 0.
  for (int t = 0; t < T; ++t) {
    const int prev = t == 0 ? L.e_cap() : L.energy(t - 1);
    const double prev_coeff = t == 0 ? -s0 : -1.0;
    rows.add({{L.energy(t), 1.0}, {prev, prev_coeff}, {L.p_ch(t), -ces.eta_ch * dt}, {L.p_dis(t), dt / ces.eta_dis}},
             0.0, 0.0);
  }
  for (int t = 0; t < T; ++t) {
    rows.add({{L.energy(t), 1.0}, {L.e_cap(), -ces.lambda_min}}, 0.0, kInfinity);
    rows.add({{L.energy(t), 1.0}, {L.e_cap(), -ces.lambda_max}}, -kInfinity, 0.0);
  }
  const int per_day = sc.horizon.steps_per_day();
  for (int d = 0; d < sc.horizon.day_count(); ++d) {
    rows.add({{L.energy((d + 1) * per_day - 1), 1.0}, {L.e_cap(), -s0}}, -ces.epsilon_kwh, ces.epsilon_kwh);
  }
  rows.add({{L.e_cap(), 1.0}}, ces.e_cap_min_kwh, ces.e_cap_max_kwh);
  rows.add({{L.p_rate(), 1.0}}, ces.p_rate_min_kw, ces.p_rate_max_kw);

  // Voltage limits. Only the CES net absorption at the chosen node moves the
  // voltages away from the customer-only profile.
  const NodalSeries base_p = sc.nodal_net_load_kw();
  const NodalSeries base_q = sc.nodal_reactive_kvar();
  const VoltageProfile base_u = lindistflow_voltages(net, base_p, base_q);
  for (NodeId i = 1; i <= N; ++i) {
    const double coeff = -2.0 * kWattsPerKw * net.path_r(i, location);
    for (int t = 0; t < T; ++t) {
      const double ub = base_u(i - 1, t);
      if (coeff == 0.0) {
        if (ub < net.umin() || ub > net.umax()) {
          model.statically_infeasible = true;
          model.infeasibility_reason = "node " + std::to_string(i) + " violates its voltage limits at step " +
                                       std::to_string(t) + " and is not affected by a CES at node " +
                                       std::to_string(location);
        }
        continue;
      }
      rows.add({{L.p_ch(t), coeff}, {L.p_dis(t), -coeff}}, net.umin() - ub, net.umax() - ub);
    }
  }

  rows.finish(model.prob);

  // Loss in kWh: per step 1e3 dt (p' H p) with p = base + e_j (p_ch - p_dis),
  // p in kW; the reactive part and the customer-only part are constants.
  {
    const LossForm form = loss_quadratic_form(net, base_q);
    const Eigen::MatrixXd& H = form.hessian_half;
    const double scale = kWattsPerKw * dt;
    const double hjj = H(location - 1, location - 1);
    QuadraticObjective& loss = model.objectives[static_cast<std::size_t>(Objective::Loss)];
    std::vector<Triplet> trip;
    loss.q = Eigen::VectorXd::Zero(n);
    double constant = form.constant_w * dt / kWattsPerKw;
    for (int t = 0; t < T; ++t) {
      const Eigen::VectorXd hp = H * base_p.col(t);
      constant += scale * base_p.col(t).dot(hp);
      const double k = 2.0 * scale * hjj;
      trip.emplace_back(L.p_ch(t), L.p_ch(t), k);
      trip.emplace_back(L.p_dis(t), L.p_dis(t), k);
      trip.emplace_back(L.p_ch(t), L.p_dis(t), -k);
      trip.emplace_back(L.p_dis(t), L.p_ch(t), -k);
      const double lin = 2.0 * scale * hp[location - 1];
      loss.q[L.p_ch(t)] = lin;
      loss.q[L.p_dis(t)] = -lin;
    }
    loss.P = SparseMatrix(n, n);
    loss.P.setFromTriplets(trip.begin(), trip.end());
    loss.constant = constant;
  }
  {
    QuadraticObjective& trade = model.objectives[static_cast<std::size_t>(Objective::Trade)];
    trade.P = SparseMatrix(n, n);
    trade.q = Eigen::VectorXd::Zero(n);
    for (int t = 0; t < T; ++t) {
      const double w = tou_price(sc.tariff, t) * dt;
      trade.q[L.grid_ces(t)] = w;
      for (int c = 0; c < C; ++c) trade.q[L.grid_customer(c, t)] = w;
    }
  }
  {
    QuadraticObjective& invest = model.objectives[static_cast<std::size_t>(Objective::Invest)];
    invest.P = SparseMatrix(n, n);
    invest.q = Eigen::VectorXd::Zero(n);
    invest.q[L.e_cap()] = ces.delta_aud_per_kwh;
    invest.constant = ces.gamma_aud;
  }

  build_core(model, C * T + T, total_net);
  return model;
}

QuadraticProgram weighted_problem(const ModelInstance& model, const std::array<double, 3>& weights,
                                  double* constant) {
  return combine(model.prob, model.objectives, weights, constant);
}

QuadraticProgram weighted_core_problem(const ModelInstance& model, const std::array<double, 3>& weights,
                                       double* constant) {
  return combine(model.core.prob, model.core.objectives, weights, constant);
}

Eigen::VectorXd expand_core(const ModelInstance& model, const Scenario& sc, const Eigen::VectorXd& core_x) {
  const VariableLayout& L = model.layout;
  const int T = L.steps();
  const int C = L.customers();
  if (core_x.size() != StorageCore::size(T)) {
    throw Error(Errc::DimensionMismatch, "core vector does not match the model layout");
  }
  Eigen::VectorXd x = Eigen::VectorXd::Zero(L.size());
  x.head(3 * T) = core_x.head(3 * T);
  x[L.e_cap()] = core_x[3 * T];
  x[L.p_rate()] = core_x[3 * T + 1];
  std::vector<double> shares(static_cast<std::size_t>(C));
  for (int t = 0; t < T; ++t) {
    const double ces_net = x[L.p_ch(t)] - x[L.p_dis(t)];
    const double from_ces = canonical_split(sc, t, ces_net, shares);
    for (int c = 0; c < C; ++c) {
      x[L.grid_customer(c, t)] = net_position(sc.customers[static_cast<std::size_t>(c)], t) - shares[c];
    }
    x[L.grid_ces(t)] = from_ces + ces_net;
  }
  return x;
}

std::pair<CesDesign, Schedule> extract_schedule(const ModelInstance& model, const Scenario& sc,
                                                const Eigen::VectorXd& x) {
  const VariableLayout& L = model.layout;
  if (x.size() != L.size() || L.steps() != sc.steps() || L.customers() != static_cast<int>(sc.customers.size())) {
    throw Error(Errc::DimensionMismatch, "solution vector does not match the model layout");
  }
  const int T = L.steps();
  const int C = L.customers();

  CesDesign design{model.location, x[L.e_cap()], x[L.p_rate()]};
  Schedule s;
  s.initial_energy_kwh = sc.ces.initial_soc_fraction * design.e_cap_kwh;
  s.p_ch_kw.resize(T);
  s.p_dis_kw.resize(T);
  s.energy_kwh.resize(T);
  s.grid_ces_kw.resize(T);
  s.grid_customer_kw.assign(C, std::vector<double>(T));
  s.ces_customer_kw.assign(C, std::vector<double>(T));
  std::vector<double> shares(static_cast<std::size_t>(C));

  for (int t = 0; t < T; ++t) {
    s.p_ch_kw[t] = x[L.p_ch(t)];
    s.p_dis_kw[t] = x[L.p_dis(t)];
    s.energy_kwh[t] = x[L.energy(t)];

    const double ces_net = s.p_ch_kw[t] - s.p_dis_kw[t];
    const double from_ces = canonical_split(sc, t, ces_net, shares);
    for (int c = 0; c < C; ++c) {
      s.ces_customer_kw[c][t] = shares[c];
      s.grid_customer_kw[c][t] = net_position(sc.customers[static_cast<std::size_t>(c)], t) - shares[c];
    }
    s.grid_ces_kw[t] = from_ces + ces_net;
  }
  return {design, s};
}

Schedule passive_schedule(const Scenario& sc) {
  const int T = sc.steps();
  const int C = static_cast<int>(sc.customers.size());
  Schedule s;
  s.p_ch_kw.assign(T, 0.0);
  s.p_dis_kw.assign(T, 0.0);
  s.energy_kwh.assign(T, 0.0);
  s.grid_ces_kw.assign(T, 0.0);
  s.grid_customer_kw.assign(C, std::vector<double>(T));
  s.ces_customer_kw.assign(C, std::vector<double>(T, 0.0));
  for (int c = 0; c < C; ++c)
    for (int t = 0; t < T; ++t) s.grid_customer_kw[c][t] = net_position(sc.customers[static_cast<std::size_t>(c)], t);
  return s;
}

NodalSeries nodal_absorption_kw(const Scenario& sc, const CesDesign& design, const Schedule& schedule) {
  NodalSeries p = sc.nodal_net_load_kw();
  if (design.location != kSlack) {
    for (int t = 0; t < sc.steps(); ++t) p(design.location - 1, t) += schedule.p_ch_kw[t] - schedule.p_dis_kw[t];
  }
  return p;
}

}  // namespace cesplan
