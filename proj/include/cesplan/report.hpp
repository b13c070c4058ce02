#pragma once

// Files written by the command-line tool and read back by `validate`.
//
//   plan.json          design, objectives, normalization, leaderboard and
//                      the full schedule of the selected location
//   leaderboard.csv    one row per candidate location
//   timeseries/*.csv   storage.csv, customer_grid.csv, customer_ces.csv
//   baseline.json      objectives without storage
//
// Every file carries schema_version; see README for the column lists.

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "cesplan/planner.hpp"
#include "cesplan/validator.hpp"

namespace cesplan {

inline constexpr int kReportSchemaVersion = 1;

/// 100 * value / baseline; NaN when the baseline is zero.
double percent_of_baseline(double value, double baseline);

std::string plan_to_json(const Scenario& scenario, const PlanResult& plan);
void write_leaderboard_csv(std::ostream& out, const PlanResult& plan);
void write_timeseries(const std::filesystem::path& dir, const Scenario& scenario, const LocationResult& result);

/// plan.json, leaderboard.csv and timeseries/ under `dir` (created).
/// Throws Error{Io}.
void write_plan_report(const std::filesystem::path& dir, const Scenario& scenario, const PlanResult& plan);

std::string baseline_to_json(const ObjectiveValues& baseline);
std::string validation_to_json(const ValidationReport& report);

/// Human-readable summary in the layout of the results table.
void print_plan_summary(std::ostream& out, const PlanResult& plan);

struct PlanRecord {
  CesDesign design;
  Schedule schedule;  // customers in scenario order
  ObjectiveValues objectives;
};

/// Reads the selected design and schedule from plan.json, matching customers
/// to the scenario by id. Throws Error{ParseError | DimensionMismatch | Io}.
PlanRecord read_plan_json(std::istream& in, const Scenario& scenario);
PlanRecord read_plan_file(const std::filesystem::path& path, const Scenario& scenario);

/// Writes text to a file, creating parent directories. Throws Error{Io}.
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace cesplan
