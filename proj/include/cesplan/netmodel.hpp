#pragma once

// Radial low-voltage network and the LinDistFlow model on top of it.
//
// Units: line impedances in ohm, squared voltages in V^2. Nodal absorptions
// cross the API in kW / kVAR (positive = consumption) and are converted to
// W / var internally so that U = U0 - 2 R p - 2 X q is dimensionally
// consistent.

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace cesplan {

using NodeId = int;
inline constexpr NodeId kSlack = 0;
inline constexpr double kWattsPerKw = 1000.0;

struct LineSpec {
  NodeId from = 0;
  NodeId to = 0;
  double r_ohm = 0.0;
  double x_ohm = 0.0;
};

/// A line oriented away from the slack. Lines are stored indexed by their
/// downstream node, so line k feeds node k + 1.
struct Line {
  NodeId parent = 0;
  NodeId child = 0;
  double r_ohm = 0.0;
  double x_ohm = 0.0;
};

/// Nodal time series: row j - 1 holds node j (the slack has no row), one
/// column per time step.
using NodalSeries = Eigen::MatrixXd;

class Network {
 public:
  /// Validates radiality and precomputes downstream sets and the path
  /// impedance matrices. Throws Error{CycleDetected | DisconnectedNode |
  /// NonPositiveImpedance | InvalidParameter}.
  static Network build(std::span<const LineSpec> lines, double u0, double umin, double umax);

  int node_count() const { return static_cast<int>(lines_.size()); }
  double u0() const { return u0_; }
  double umin() const { return umin_; }
  double umax() const { return umax_; }

  const std::vector<Line>& lines() const { return lines_; }
  const Line& line_into(NodeId j) const { return lines_.at(static_cast<std::size_t>(j - 1)); }
  NodeId parent(NodeId j) const { return line_into(j).parent; }
  const std::vector<NodeId>& children(NodeId j) const { return children_.at(static_cast<std::size_t>(j)); }

  /// W_j: nodes downstream of j, j included, ascending.
  const std::vector<NodeId>& downstream(NodeId j) const {
    return downstream_.at(static_cast<std::size_t>(j - 1));
  }
  /// Non-slack nodes in breadth-first order from the slack (parents first).
  const std::vector<NodeId>& topological_order() const { return order_; }

  /// Path matrices: entry (i-1, k-1) sums r (resp. x) over lines shared by
  /// the slack-to-i and slack-to-k paths.
  const Eigen::MatrixXd& path_resistance() const { return path_r_; }
  const Eigen::MatrixXd& path_reactance() const { return path_x_; }
  double path_r(NodeId i, NodeId k) const { return path_r_(i - 1, k - 1); }

  /// Lines as given to build(), in original orientation, for serialization.
  const std::vector<LineSpec>& source_lines() const { return source_lines_; }

 private:
  std::vector<Line> lines_;
  std::vector<LineSpec> source_lines_;
  std::vector<std::vector<NodeId>> children_;
  std::vector<std::vector<NodeId>> downstream_;
  std::vector<NodeId> order_;
  Eigen::MatrixXd path_r_;
  Eigen::MatrixXd path_x_;
  double u0_ = 0.0;
  double umin_ = 0.0;
  double umax_ = 0.0;
};

inline Network build_network(std::span<const LineSpec> lines, double u0, double umin, double umax) {
  return Network::build(lines, u0, umin, umax);
}

struct LineFlows {
  Eigen::MatrixXd p;  // kW, row k = line into node k + 1
  Eigen::MatrixXd q;  // kVAR
};

/// Downstream aggregation: P_ij(t) = sum of p_k(t) over k in W_j.
LineFlows line_flows(const Network& net, const NodalSeries& p_kw, const NodalSeries& q_kvar);

/// Squared voltage magnitudes, rows as NodalSeries. V^2.
using VoltageProfile = Eigen::MatrixXd;

/// Matrix LinDistFlow: U = U0 1 - 2 R p - 2 X q with p, q converted to W/var.
VoltageProfile lindistflow_voltages(const Network& net, const NodalSeries& p_kw, const NodalSeries& q_kvar);

/// Real power loss written as a fixed quadratic form of the nodal real
/// absorptions, with the receiving voltage frozen at U0:
///   loss_W(t) = p_W(t)' H p_W(t) + q_var(t)' H q_var(t)
/// The reactive part is folded into `constant_w` (summed over all steps).
struct LossForm {
  Eigen::MatrixXd hessian_half;  // H (1/ohm-ish: ohm / V^2), symmetric PSD
  double constant_w = 0.0;

  /// Total over all steps of per-step loss, in W (W x steps).
  double evaluate(const NodalSeries& p_kw) const;
};

LossForm loss_quadratic_form(const Network& net, const NodalSeries& q_kvar);

/// Loss by direct summation of r (P^2 + Q^2) / U0 over lines and steps, W.
double direct_loss_w(const Network& net, const NodalSeries& p_kw, const NodalSeries& q_kvar);

}  // namespace cesplan
