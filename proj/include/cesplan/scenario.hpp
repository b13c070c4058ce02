#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "cesplan/netmodel.hpp"
#include "cesplan/qp.hpp"

namespace cesplan {

struct CustomerProfile {
  NodeId node = 0;
  std::string id;
  std::vector<double> p_load_kw;
  std::vector<double> q_load_kvar;
  std::vector<double> p_pv_kw;
};

/// p_load - p_pv. A non-negative value selects the deficit exchange branch
/// (0 <= grid import <= deficit); a negative one the surplus branch.
inline double net_position(const CustomerProfile& c, std::size_t t) { return c.p_load_kw[t] - c.p_pv_kw[t]; }

struct TouWindow {
  std::string name;
  double start_hour = 0.0;  // inclusive
  double end_hour = 0.0;    // exclusive
  double price = 0.0;       // AUD/kWh
};

/// Daily time-of-use price schedule. Windows must tile [0, 24) exactly.
class TouSchedule {
 public:
  explicit TouSchedule(std::vector<TouWindow> windows);

  /// Five-window residential schedule: off-peak overnight and late evening,
  /// shoulder during the day and 21-22h, peak 15-21h.
  static TouSchedule residential_default();

  /// Periodic in 24 h; any finite hour is valid.
  double price_at_hour(double hour) const;
  const std::vector<TouWindow>& windows() const { return windows_; }

 private:
  std::vector<TouWindow> windows_;
};

struct Horizon {
  int steps = 0;
  double dt_hours = 1.0;

  int steps_per_day() const;
  int day_count() const { return steps / steps_per_day(); }
  double hour_of_day(int t) const;
  /// Throws LengthMismatch unless the horizon is a whole number of days.
  void validate() const;
};

struct Tariff {
  std::vector<double> price;  // AUD/kWh per step
  std::optional<TouSchedule> schedule;

  static Tariff from_schedule(const TouSchedule& schedule, const Horizon& horizon);
};

/// Price at step t. Throws OutOfRange outside the horizon.
double tou_price(const Tariff& tariff, int t);

struct CesParameters {
  double eta_ch = 0.98;
  double eta_dis = 1.02;  // discharge is divided by this
  double lambda_min = 0.05;
  double lambda_max = 1.0;
  double e_cap_min_kwh = 200.0;
  double e_cap_max_kwh = 2000.0;
  double p_rate_min_kw = 20.0;
  double p_rate_max_kw = 200.0;
  double gamma_aud = 24000.0;
  double delta_aud_per_kwh = 300.0;
  double epsilon_kwh = 1e-4;
  /// E(0) = initial_soc_fraction * E_cap; must lie in [lambda_min, lambda_max].
  double initial_soc_fraction = 0.05;

  void validate() const;
};

struct VoltageBase {
  double voltage_v = 400.0;
  double power_kva = 100.0;
  double u0_pu = 1.0;
  double umin_pu = 0.9025;
  double umax_pu = 1.1025;

  double to_squared_volts(double u_pu) const { return u_pu * voltage_v * voltage_v; }
};

/// Global: utopia and nadir over the whole feasible set, location choice
/// included, so weighted objectives are comparable across locations.
/// PerLocation: each candidate is normalized against its own payoff table.
enum class NormalizationMode { PerLocation, Global };

using AhpMatrix = std::array<std::array<double, 3>, 3>;

/// Planner-facing options carried by the config file.
struct RunSettings {
  std::optional<std::array<double, 3>> weights;
  std::optional<AhpMatrix> ahp;
  NormalizationMode normalization = NormalizationMode::Global;
  SolverSettings solver{.method = QpMethod::Auto};
  int threads = 0;  // 0 = hardware concurrency
};

struct Scenario {
  Network network;
  std::vector<CustomerProfile> customers;  // sorted by (node, id)
  Tariff tariff;
  Horizon horizon;
  CesParameters ces;
  VoltageBase base;
  RunSettings settings;

  std::vector<std::size_t> customers_at(NodeId j) const;
  /// Sum over customers at each node of p_load - p_pv (kW), rows by node.
  NodalSeries nodal_net_load_kw() const;
  NodalSeries nodal_reactive_kvar() const;
  int steps() const { return horizon.steps; }
};

struct ScenarioPaths {
  std::filesystem::path profiles;
  std::filesystem::path tariff;
  std::filesystem::path network;
  std::filesystem::path config;
};

/// Reads and validates all four inputs. `horizon_override_steps` replaces
/// the configured horizon. Throws Error{ParseError | LengthMismatch |
/// UnknownNode | NegativeLoadOrPv | InvalidParameter | Io | network codes}.
Scenario load_scenario(const ScenarioPaths& paths, std::optional<int> horizon_override_steps = std::nullopt);

/// Writes network.csv, profiles.csv, tariff (json when a ToU schedule is
/// attached, csv otherwise) and config.json into `dir`. Numbers use the
/// shortest round-trip representation.
ScenarioPaths write_scenario(const Scenario& scenario, const std::filesystem::path& dir);

// Lower-level parsers, exposed for tests and tools.
std::vector<LineSpec> parse_network_csv(std::istream& in);
std::vector<CustomerProfile> parse_profiles_csv(std::istream& in);
std::vector<double> parse_tariff_csv(std::istream& in);
TouSchedule parse_tou_json(std::istream& in);
/// Fills base, ces, settings and horizon (steps stays 0 unless configured).
void parse_config_json(std::istream& in, Scenario& into);

/// Validates and assembles a scenario from parsed pieces.
Scenario assemble_scenario(std::vector<LineSpec> lines, std::vector<CustomerProfile> customers, Scenario config,
                           std::optional<std::vector<double>> price_series, std::optional<TouSchedule> schedule,
                           std::optional<int> horizon_override_steps);

}  // namespace cesplan
