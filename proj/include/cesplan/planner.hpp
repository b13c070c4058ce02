#pragma once

// Multi-objective siting and sizing: AHP weights, per-location payoff table
// (utopia / nadir), the normalized weighted solve, and enumeration of the
// candidate locations.

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "cesplan/cesopt.hpp"
#include "cesplan/scenario.hpp"

namespace cesplan {

using Weights = std::array<double, 3>;  // loss, trade, invest

struct AhpResult {
  Weights weights{};
  double lambda_max = 0.0;
  double consistency_ratio = 0.0;
  bool consistent = true;  // consistency_ratio <= 0.1
};

/// Principal eigenvector of a reciprocal 3x3 judgment matrix by power
/// iteration. Throws Error{NonReciprocal}. An inconsistent matrix
/// (CR > 0.1) is reported through the result and a warning, not an error.
AhpResult ahp_weights(const AhpMatrix& m);

/// Judgments that give (1/9, 4/9, 4/9): trade and investment equally
/// important and each four times as important as loss.
AhpMatrix default_ahp_judgments();

/// Non-negative, finite, not all zero; rescaled to sum to one.
/// Throws Error{InvalidWeights}.
Weights normalize_weights(const Weights& w);

/// Weights from the run settings: explicit weights, else AHP judgments, else
/// the default judgments.
Weights resolve_weights(const RunSettings& settings, std::optional<AhpResult>* ahp = nullptr);

/// F[k][i] = f_i at the minimizer of f_k.
using PayoffMatrix = std::array<std::array<double, 3>, 3>;

struct NormalizationContext {
  PayoffMatrix payoff{};
  Weights utopia{};
  Weights nadir{};
  /// nadir - utopia below 1e-9 relative: the term is left out of the
  /// weighted objective and its weight shared out among the others.
  std::array<bool, 3> degenerate{};

  double normalized(Objective o, double value) const;
};

/// utopia_i = F[i][i], nadir_i = max_k F[k][i]. Throws Error{DegenerateSpan}
/// when every objective is degenerate.
NormalizationContext nadir_utopia(const PayoffMatrix& f);

/// Context over the whole feasible set, location choice included: for each
/// objective k the global minimizer is the location with the smallest
/// F_j[k][k] (lowest id on ties), and its row enters the combined payoff
/// table. Throws Error{DegenerateSpan | InvalidParameter}.
NormalizationContext global_context(const std::vector<PayoffMatrix>& per_location);

struct SolveReport {
  QpStatus status = QpStatus::MaxIter;
  Eigen::VectorXd x;  // full layout
  ObjectiveValues values;
  int iterations = 0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  bool polished = false;
};

/// Minimizes one objective over the feasible set. Among minimizers, a second
/// solve with the other two objectives added at relative weight 1e-7 picks a
/// point that is also good for them, which keeps the payoff table from
/// depending on where the solver lands inside a flat optimal face.
SolveReport solve_single_objective(const ModelInstance& model, const Scenario& scenario, Objective which,
                                   const SolverSettings& settings);

/// Minimizes sum_i w_i (f_i - utopia_i) / (nadir_i - utopia_i), degenerate
/// terms dropped and their weight redistributed.
SolveReport solve_weighted(const ModelInstance& model, const Scenario& scenario, const NormalizationContext& ctx,
                           const Weights& weights, const SolverSettings& settings);

/// Weights after dropping degenerate terms; all zero if nothing remains.
Weights effective_weights(const NormalizationContext& ctx, const Weights& weights);

enum class LocationStatus { Optimal, Infeasible, SolverFailure };
std::string_view to_string(LocationStatus s);

struct LocationResult {
  NodeId location = 0;
  LocationStatus status = LocationStatus::SolverFailure;
  std::string message;
  NormalizationContext context;
  Weights effective_weights{};
  CesDesign design;
  Schedule schedule;
  ObjectiveValues values;
  Weights normalized{};
  double weighted_objective = 0.0;
  int iterations = 0;
  double primal_residual = 0.0;
  std::vector<std::string> warnings;
};

struct PlanOptions {
  Weights weights{1.0 / 9.0, 4.0 / 9.0, 4.0 / 9.0};
  std::optional<AhpResult> ahp;  // where the weights came from, if AHP
  NormalizationMode normalization = NormalizationMode::Global;
  SolverSettings solver{.method = QpMethod::Auto};
  int threads = 0;  // 0 = hardware concurrency
  /// Restrict the enumeration to these nodes (all non-slack nodes if empty).
  std::vector<NodeId> candidates;
  /// Report only this location. In global mode the shared context is still
  /// built from every candidate so the weighted objective stays comparable
  /// with a full plan.
  std::optional<NodeId> fixed_location;

  static PlanOptions from_settings(const RunSettings& settings);
};

struct PlanResult {
  std::size_t selected = 0;  // index into leaderboard
  Weights weights{};
  std::optional<AhpResult> ahp;
  NormalizationMode normalization = NormalizationMode::Global;
  /// Shared context in global mode.
  std::optional<NormalizationContext> global_context;
  std::vector<LocationResult> leaderboard;  // by node id
  ObjectiveValues baseline;
  std::vector<std::string> warnings;

  const LocationResult& best() const { return leaderboard.at(selected); }
};

/// Single location: payoff table, normalization (own or supplied), weighted
/// solve, decoded schedule. Never throws for infeasibility; see status.
LocationResult evaluate_location(const Scenario& scenario, NodeId location, const PlanOptions& options,
                                 const std::optional<NormalizationContext>& shared_context = std::nullopt);

/// Enumerates candidate locations and selects the smallest weighted
/// normalized objective; ties within 1e-9 relative go to the lowest node id.
/// Throws Error{AllLocationsInfeasible}.
PlanResult plan(const Scenario& scenario, const PlanOptions& options);

/// Loss and trade without storage: every customer trades its net position
/// with the grid. Investment is zero.
ObjectiveValues baseline_no_ces(const Scenario& scenario);

}  // namespace cesplan
