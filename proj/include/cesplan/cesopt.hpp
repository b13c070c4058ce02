#pragma once

// One CES location fixed -> one convex QP.
//
// Decision vector layout (T steps, C customers in scenario order):
//   [ p_ch(0..T) | p_dis(0..T) | E(0..T) | pG_ces(0..T) | pG_c(0..T) per customer | E_cap | p_rate ]
// The customer<->CES exchange is not a variable: it is net_position - pG_c.
// E(t) is the stored energy at the end of step t; the energy before the
// first step is initial_soc_fraction * E_cap and enters the rows directly.

#include <array>
#include <string>
#include <string_view>
#include <vector>

#include "cesplan/qp.hpp"
#include "cesplan/scenario.hpp"

namespace cesplan {

class VariableLayout {
 public:
  VariableLayout() = default;
  VariableLayout(int steps, int customers) : steps_(steps), customers_(customers) {}

  int steps() const { return steps_; }
  int customers() const { return customers_; }
  int size() const { return steps_ * (4 + customers_) + 2; }

  int p_ch(int t) const { return t; }
  int p_dis(int t) const { return steps_ + t; }
  int energy(int t) const { return 2 * steps_ + t; }
  int grid_ces(int t) const { return 3 * steps_ + t; }
  int grid_customer(int c, int t) const { return (4 + c) * steps_ + t; }
  int e_cap() const { return steps_ * (4 + customers_); }
  int p_rate() const { return e_cap() + 1; }

 private:
  int steps_ = 0;
  int customers_ = 0;
};

enum class Objective { Loss = 0, Trade = 1, Invest = 2 };
inline constexpr std::array<Objective, 3> kObjectives{Objective::Loss, Objective::Trade, Objective::Invest};
std::string_view to_string(Objective o);

/// f(x) = 1/2 x'Px + q'x + constant. Loss in kWh, trade and invest in AUD.
struct QuadraticObjective {
  SparseMatrix P;
  Eigen::VectorXd q;
  double constant = 0.0;

  double evaluate(const Eigen::VectorXd& x) const;
};

struct ObjectiveValues {
  double loss_kwh = 0.0;
  double trade_aud = 0.0;
  double invest_aud = 0.0;

  double operator[](Objective o) const;
  double& operator[](Objective o);
};

/// The exchange variables only enter the customer boxes and the CES-grid
/// balance, where pG_ces is free; any customer split inside the boxes is
/// feasible and trade depends on the split only through p_ch - p_dis. The
/// storage core drops them: variables [p_ch | p_dis | E | E_cap | p_rate],
/// the remaining rows, and trade rewritten on p_ch - p_dis. Its optimal
/// values equal those of the full problem.
struct StorageCore {
  QuadraticProgram prob;  // feasible set only
  std::array<QuadraticObjective, 3> objectives;

  static int size(int steps) { return 3 * steps + 2; }
};

struct ModelInstance {
  NodeId location = 0;
  VariableLayout layout;
  /// Feasible set only; P and q are zero. Objectives are attached per solve.
  QuadraticProgram prob;
  std::array<QuadraticObjective, 3> objectives;
  StorageCore core;
  /// Set when a voltage limit is violated at a node the CES cannot influence,
  /// so no choice of decision variables is feasible.
  bool statically_infeasible = false;
  std::string infeasibility_reason;

  const QuadraticObjective& objective(Objective o) const { return objectives[static_cast<std::size_t>(o)]; }
  ObjectiveValues evaluate(const Eigen::VectorXd& x) const;
};

/// Throws Error{SlackLocation | UnknownNode | InfeasibleBoxes | InvalidParameter}.
ModelInstance build_model(const Scenario& scenario, NodeId location);

/// Copy of the feasible set with objective sum_i weight_i * f_i attached.
/// The constant part of the combination is returned through `constant`.
QuadraticProgram weighted_problem(const ModelInstance& model, const std::array<double, 3>& weights,
                                  double* constant = nullptr);

/// Same as weighted_problem on the storage core.
QuadraticProgram weighted_core_problem(const ModelInstance& model, const std::array<double, 3>& weights,
                                       double* constant = nullptr);

/// Full decision vector from a core vector, with the canonical exchange
/// split described at extract_schedule. Throws Error{DimensionMismatch}.
Eigen::VectorXd expand_core(const ModelInstance& model, const Scenario& scenario, const Eigen::VectorXd& core_x);

struct CesDesign {
  NodeId location = 0;  // one-hot position; 0 means no CES
  double e_cap_kwh = 0.0;
  double p_rate_kw = 0.0;
};

/// Power quantities in kW, energy in kWh; vectors are indexed by step and,
/// for per-customer series, [customer][step] in scenario order.
struct Schedule {
  std::vector<double> p_ch_kw;
  std::vector<double> p_dis_kw;
  std::vector<double> energy_kwh;
  double initial_energy_kwh = 0.0;
  std::vector<double> grid_ces_kw;
  std::vector<std::vector<double>> grid_customer_kw;
  std::vector<std::vector<double>> ces_customer_kw;

  int steps() const { return static_cast<int>(p_ch_kw.size()); }
};

/// Decodes a solution vector. The split of customer energy between grid and
/// CES does not change any objective or constraint besides the CES-grid
/// balance, so it is replaced by a canonical one: the CES trades with its own
/// customers as much as possible before touching the grid, pro rata among
/// deficit customers when discharging and among surplus customers when
/// charging. Throws Error{DimensionMismatch}.
std::pair<CesDesign, Schedule> extract_schedule(const ModelInstance& model, const Scenario& scenario,
                                                const Eigen::VectorXd& x);

/// No CES: every customer trades its whole net position with the grid.
Schedule passive_schedule(const Scenario& scenario);

/// Nodal real absorption in kW implied by a design and schedule.
NodalSeries nodal_absorption_kw(const Scenario& scenario, const CesDesign& design, const Schedule& schedule);

}  // namespace cesplan
