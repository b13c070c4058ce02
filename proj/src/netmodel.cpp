#include "cesplan/netmodel.hpp"

#include <algorithm>
#include <numeric>
#include <queue>
#include <string>

#include "cesplan/error.hpp"

namespace cesplan {

namespace {

struct DisjointSet {
  std::vector<int> parent;
  explicit DisjointSet(int n) : parent(static_cast<std::size_t>(n)) {
    std::iota(parent.begin(), parent.end(), 0);
  }
  int find(int a) {
    while (parent[a] != a) {
      parent[a] = parent[parent[a]];
      a = parent[a];
    }
    return a;
  }
  bool unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    parent[b] = a;
    return true;
  }
};

void check_dims(const Network& net, const NodalSeries& p, const NodalSeries& q) {
  if (p.rows() != net.node_count() || q.rows() != net.node_count() || p.cols() != q.cols()) {
    throw Error(Errc::DimensionMismatch,
                "nodal series must be " + std::to_string(net.node_count()) + " x T (got p " +
                    std::to_string(p.rows()) + "x" + std::to_string(p.cols()) + ", q " +
                    std::to_string(q.rows()) + "x" + std::to_string(q.cols()) + ")");
  }
}

}  // namespace

Network Network::build(std::span<const LineSpec> lines, double u0, double umin, double umax) {
  if (lines.empty()) throw Error(Errc::InvalidParameter, "network has no lines");
  if (!(u0 > 0.0) || !(umin > 0.0) || !(umin < umax)) {
    throw Error(Errc::InvalidParameter, "voltage limits must satisfy 0 < Umin < Umax and U0 > 0");
  }

  NodeId max_id = 0;
  for (const auto& l : lines) {
    if (l.from < 0 || l.to < 0) throw Error(Errc::InvalidParameter, "negative node id");
    max_id = std::max({max_id, l.from, l.to});
    if (!(l.r_ohm > 0.0) || !(l.x_ohm >= 0.0)) {
      throw Error(Errc::NonPositiveImpedance, "line " + std::to_string(l.from) + "-" + std::to_string(l.to) +
                                                  " needs r > 0 and x >= 0");
    }
  }

  const int n_nodes = max_id + 1;
  DisjointSet dsu(n_nodes);
  std::vector<std::vector<std::pair<NodeId, std::size_t>>> adj(static_cast<std::size_t>(n_nodes));
  for (std::size_t k = 0; k < lines.size(); ++k) {
    const auto& l = lines[k];
    if (!dsu.unite(l.from, l.to)) {
      throw Error(Errc::CycleDetected, "line " + std::to_string(l.from) + "-" + std::to_string(l.to) + " closes a loop");
    }
    adj[l.from].emplace_back(l.to, k);
    adj[l.to].emplace_back(l.from, k);
  }
  for (NodeId j = 1; j < n_nodes; ++j) {
    if (dsu.find(j) != dsu.find(kSlack)) {
      throw Error(Errc::DisconnectedNode, "node " + std::to_string(j) + " is not connected to the slack");
    }
  }

  Network net;
  net.u0_ = u0;
  net.umin_ = umin;
  net.umax_ = umax;
  net.source_lines_.assign(lines.begin(), lines.end());
  const int n = n_nodes - 1;
  net.lines_.resize(static_cast<std::size_t>(n));
  net.children_.resize(static_cast<std::size_t>(n_nodes));

  std::vector<bool> seen(static_cast<std::size_t>(n_nodes), false);
  std::queue<NodeId> frontier;
  frontier.push(kSlack);
  seen[kSlack] = true;
  while (!frontier.empty()) {
    const NodeId i = frontier.front();
    frontier.pop();
    for (const auto& [j, k] : adj[i]) {
      if (seen[j]) continue;
      seen[j] = true;
      net.lines_[j - 1] = Line{i, j, lines[k].r_ohm, lines[k].x_ohm};
      net.children_[i].push_back(j);
      net.order_.push_back(j);
      frontier.push(j);
    }
  }
  for (auto& c : net.children_) std::sort(c.begin(), c.end());

  net.downstream_.resize(static_cast<std::size_t>(n));
  for (auto it = net.order_.rbegin(); it != net.order_.rend(); ++it) {
    const NodeId j = *it;
    auto& w = net.downstream_[j - 1];
    w.push_back(j);
    for (NodeId c : net.children_[j]) {
      const auto& wc = net.downstream_[c - 1];
      w.insert(w.end(), wc.begin(), wc.end());
    }
    std::sort(w.begin(), w.end());
  }

  // Line (parent, j) lies on the path of every node in W_j, so it adds its
  // impedance to every pair drawn from W_j.
  net.path_r_ = Eigen::MatrixXd::Zero(n, n);
  net.path_x_ = Eigen::MatrixXd::Zero(n, n);
  for (NodeId j = 1; j <= n; ++j) {
    const auto& line = net.lines_[j - 1];
    for (NodeId a : net.downstream_[j - 1]) {
      for (NodeId b : net.downstream_[j - 1]) {
        net.path_r_(a - 1, b - 1) += line.r_ohm;
        net.path_x_(a - 1, b - 1) += line.x_ohm;
      }
    }
  }
  return net;
}

LineFlows line_flows(const Network& net, const NodalSeries& p_kw, const NodalSeries& q_kvar) {
  check_dims(net, p_kw, q_kvar);
  LineFlows flows{Eigen::MatrixXd::Zero(p_kw.rows(), p_kw.cols()), Eigen::MatrixXd::Zero(q_kvar.rows(), q_kvar.cols())};
  for (NodeId j = 1; j <= net.node_count(); ++j) {
    for (NodeId k : net.downstream(j)) {
      flows.p.row(j - 1) += p_kw.row(k - 1);
      flows.q.row(j - 1) += q_kvar.row(k - 1);
    }
  }
  return flows;
}

VoltageProfile lindistflow_voltages(const Network& net, const NodalSeries& p_kw, const NodalSeries& q_kvar) {
  check_dims(net, p_kw, q_kvar);
  VoltageProfile u = Eigen::MatrixXd::Constant(p_kw.rows(), p_kw.cols(), net.u0());
  u.noalias() -= 2.0 * kWattsPerKw * (net.path_resistance() * p_kw);
  u.noalias() -= 2.0 * kWattsPerKw * (net.path_reactance() * q_kvar);
  return u;
}

double LossForm::evaluate(const NodalSeries& p_kw) const {
  if (p_kw.rows() != hessian_half.rows()) {
    throw Error(Errc::DimensionMismatch, "loss form expects one row per non-slack node");
  }
  const Eigen::MatrixXd p_w = kWattsPerKw * p_kw;
  return (p_w.transpose() * hessian_half * p_w).trace() + constant_w;
}

LossForm loss_quadratic_form(const Network& net, const NodalSeries& q_kvar) {
  if (q_kvar.rows() != net.node_count()) {
    throw Error(Errc::DimensionMismatch, "reactive series must have one row per non-slack node");
  }
  // sum over lines r_j (sum_{k in W_j} p_k)^2 = p' R p, because R is the
  // Gram matrix of the downstream incidence weighted by r.
  LossForm form;
  form.hessian_half = net.path_resistance() / net.u0();
  const Eigen::MatrixXd q_var = kWattsPerKw * q_kvar;
  form.constant_w = (q_var.transpose() * form.hessian_half * q_var).trace();
  return form;
}

double direct_loss_w(const Network& net, const NodalSeries& p_kw, const NodalSeries& q_kvar) {
  const LineFlows flows = line_flows(net, p_kw, q_kvar);
  double total = 0.0;
  for (NodeId j = 1; j <= net.node_count(); ++j) {
    const double r = net.line_into(j).r_ohm;
    for (Eigen::Index t = 0; t < p_kw.cols(); ++t) {
      const double p = kWattsPerKw * flows.p(j - 1, t);
      const double q = kWattsPerKw * flows.q(j - 1, t);
      total += r * (p * p + q * q) / net.u0();
    }
  }
  return total;
}

}  // namespace cesplan
