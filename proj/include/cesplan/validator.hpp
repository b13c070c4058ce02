#pragma once

// Replays a design and schedule against the scenario without touching any
// solver state: every constraint family and all three objectives are
// recomputed from the raw inputs.

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cesplan/cesopt.hpp"
#include "cesplan/scenario.hpp"

namespace cesplan {

struct ValidationTolerances {
  double power_kw = 1e-6;
  double energy_kwh = 1e-6;
  double voltage_v2 = 1e-7;
  double objective_rel = 1e-5;
};

struct Violation {
  std::string family;  // e.g. "soc_bounds", "voltage"
  int step = -1;       // -1 when not tied to a step
  int index = -1;      // customer, node or day, family dependent
  double amount = 0.0;
  std::string detail;
};

struct ValidationReport {
  std::vector<Violation> violations;
  /// Largest violation per family, zero for families that were checked and
  /// passed; every family appears.
  std::map<std::string, double> max_violation;
  ObjectiveValues objectives;
  /// Steps with both charge and discharge above the power tolerance. The
  /// model does not forbid this; it is reported, not failed.
  int simultaneous_steps = 0;
  double min_voltage_v2 = 0.0;
  double max_voltage_v2 = 0.0;

  bool ok() const { return violations.empty(); }
};

/// Objectives recomputed directly: line-by-line loss at U0, grid energy
/// priced per step, investment from the capacity.
ObjectiveValues evaluate_objectives(const Scenario& scenario, const CesDesign& design, const Schedule& schedule);

/// Throws Error{DimensionMismatch} when the schedule does not fit the
/// scenario. When `claimed` is given its values must match the recomputed
/// objectives within the relative tolerance ("objectives" family).
ValidationReport validate_plan(const Scenario& scenario, const CesDesign& design, const Schedule& schedule,
                               const ValidationTolerances& tol = {},
                               const std::optional<ObjectiveValues>& claimed = std::nullopt);

}  // namespace cesplan
