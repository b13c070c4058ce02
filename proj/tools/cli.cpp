#include "cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>
#include <spdlog/spdlog.h>

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "cesplan/error.hpp"
#include "cesplan/fixture.hpp"
#include "cesplan/planner.hpp"
#include "cesplan/report.hpp"
#include "cesplan/validator.hpp"

namespace cesplan::cli {

namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;

struct Inputs {
  std::string scenario_dir;
  std::string network;
  std::string profiles;
  std::string tariff;
  std::string config;
  std::optional<int> horizon;

  void add_to(CLI::App& cmd) {
    cmd.add_option("--scenario", scenario_dir,
                   "Directory holding network.csv, profiles.csv, tariff.json|tariff.csv and config.json");
    cmd.add_option("--network", network, "Network CSV (from,to,r_ohm,x_ohm)");
    cmd.add_option("--profiles", profiles, "Customer profiles CSV");
    cmd.add_option("--tariff", tariff, "Tariff: CSV t,price or JSON time-of-use windows");
    cmd.add_option("--config", config, "Config JSON");
    cmd.add_option("--horizon", horizon, "Horizon override in steps (a whole number of days)")
        ->check(CLI::PositiveNumber);
  }

  Scenario load() const {
    ScenarioPaths paths;
    if (!scenario_dir.empty()) {
      const fs::path dir(scenario_dir);
      paths = {dir / "profiles.csv", dir / "tariff.json", dir / "network.csv", dir / "config.json"};
      if (!fs::exists(paths.tariff) && fs::exists(dir / "tariff.csv")) paths.tariff = dir / "tariff.csv";
    }
    if (!network.empty()) paths.network = network;
    if (!profiles.empty()) paths.profiles = profiles;
    if (!tariff.empty()) paths.tariff = tariff;
    if (!config.empty()) paths.config = config;
    if (paths.network.empty() || paths.profiles.empty() || paths.tariff.empty() || paths.config.empty()) {
      throw Error(Errc::InvalidParameter, "give --scenario DIR or all of --network, --profiles, --tariff, --config");
    }
    return load_scenario(paths, horizon);
  }
};

struct PlannerFlags {
  std::string weights;
  std::string ahp_file;
  std::optional<int> fixed_location;
  std::optional<int> threads;
  std::string normalization;
  std::string method;
  std::string dump_qp;

  void add_to(CLI::App& cmd) {
    auto* w = cmd.add_option("--weights", weights, "Objective weights loss,trade,invest (fractions allowed)");
    auto* a = cmd.add_option("--ahp-file", ahp_file, "AHP judgment matrix (JSON 3x3)");
    w->excludes(a);
    cmd.add_option("--fixed-location", fixed_location, "Evaluate only this node");
    cmd.add_option("--threads", threads, "Worker threads (0 = all cores)")->check(CLI::NonNegativeNumber);
    cmd.add_option("--normalization", normalization, "global or per_location")
        ->check(CLI::IsMember({"global", "per_location"}));
    cmd.add_option("--method", method, "QP method: admm, interior_point or auto")
        ->check(CLI::IsMember({"admm", "interior_point", "auto"}));
    cmd.add_option("--dump-qp", dump_qp, "Write the selected location's weighted QP to this file");
  }
};

struct Args {
  Inputs inputs;
  PlannerFlags planner;
  std::string out_dir;
  std::string plan_file;
  std::uint64_t seed = 42;
  int days = 7;
  int customers = 30;
};

double parse_number(std::string_view text) {
  while (!text.empty() && text.front() == ' ') text.remove_prefix(1);
  while (!text.empty() && text.back() == ' ') text.remove_suffix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size() || text.empty()) {
    throw Error(Errc::InvalidWeights, "not a number: '" + std::string(text) + "'");
  }
  return v;
}

double parse_fraction(std::string_view text) {
  const auto slash = text.find('/');
  if (slash == std::string_view::npos) return parse_number(text);
  const double den = parse_number(text.substr(slash + 1));
  if (den == 0.0) throw Error(Errc::InvalidWeights, "zero denominator in '" + std::string(text) + "'");
  return parse_number(text.substr(0, slash)) / den;
}

double judgment_value(const json& v) {
  try {
    if (v.is_number()) return v.get<double>();
    if (v.is_string()) return parse_fraction(v.get<std::string>());
  } catch (const Error& e) {
    throw Error(Errc::ParseError, std::string("AHP entry: ") + e.what());
  }
  throw Error(Errc::ParseError, "AHP entries must be numbers or \"a/b\" strings");
}

AhpMatrix read_ahp_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::Io, "cannot open " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw Error(Errc::ParseError, path.string() + ": " + e.what());
  }
  if (doc.is_object()) {
    if (doc.contains("ahp")) doc = doc["ahp"];
    else if (doc.contains("judgments")) doc = doc["judgments"];
  }
  if (!doc.is_array() || doc.size() != 3) throw Error(Errc::ParseError, "AHP matrix must be 3x3");
  AhpMatrix m{};
  for (std::size_t i = 0; i < 3; ++i) {
    if (!doc[i].is_array() || doc[i].size() != 3) throw Error(Errc::ParseError, "AHP matrix must be 3x3");
    for (std::size_t j = 0; j < 3; ++j) m[i][j] = judgment_value(doc[i][j]);
  }
  return m;
}

NormalizationMode parse_normalization(const std::string& s) {
  return s == "per_location" ? NormalizationMode::PerLocation : NormalizationMode::Global;
}

PlanOptions plan_options(Scenario& sc, const PlannerFlags& f) {
  if (!f.weights.empty()) {
    sc.settings.weights = parse_weights(f.weights);
    sc.settings.ahp.reset();
  } else if (!f.ahp_file.empty()) {
    sc.settings.ahp = read_ahp_file(f.ahp_file);
    sc.settings.weights.reset();
  }
  if (!f.normalization.empty()) sc.settings.normalization = parse_normalization(f.normalization);
  if (!f.method.empty()) sc.settings.solver.method = parse_qp_method(f.method);
  if (f.threads) sc.settings.threads = *f.threads;
  PlanOptions opts = PlanOptions::from_settings(sc.settings);
  if (f.fixed_location) opts.fixed_location = *f.fixed_location;
  return opts;
}

void dump_selected_qp(const fs::path& path, const Scenario& sc, const LocationResult& r) {
  const ModelInstance model = build_model(sc, r.location);
  std::array<double, 3> coeff{};
  for (Objective o : kObjectives) {
    const auto i = static_cast<std::size_t>(o);
    const double span = r.context.nadir[i] - r.context.utopia[i];
    if (!r.context.degenerate[i] && span > 0.0) coeff[i] = r.effective_weights[i] / span;
  }
  std::ostringstream text;
  write_qp(text, weighted_problem(model, coeff));
  write_text_file(path, text.str());
}

int cmd_plan(const Args& a, std::ostream& out) {
  Scenario sc = a.inputs.load();
  const PlanOptions opts = plan_options(sc, a.planner);
  const PlanResult result = plan(sc, opts);
  if (!a.out_dir.empty()) write_plan_report(a.out_dir, sc, result);
  if (!a.planner.dump_qp.empty()) dump_selected_qp(a.planner.dump_qp, sc, result.best());
  print_plan_summary(out, result);
  return kOk;
}

int cmd_baseline(const Args& a, std::ostream& out) {
  const Scenario sc = a.inputs.load();
  const ObjectiveValues base = baseline_no_ces(sc);
  if (!a.out_dir.empty()) write_text_file(fs::path(a.out_dir) / "baseline.json", baseline_to_json(base) + "\n");
  const auto flags = out.flags();
  out << std::fixed << std::setprecision(4) << "baseline without storage\n"
      << "  loss_kwh   " << base.loss_kwh << "\n"
      << "  trade_aud  " << base.trade_aud << "\n"
      << "  invest_aud " << base.invest_aud << "\n";
  out.flags(flags);
  return kOk;
}

int cmd_validate(const Args& a, std::ostream& out) {
  const Scenario sc = a.inputs.load();
  const PlanRecord rec = read_plan_file(a.plan_file, sc);
  const ValidationReport report = validate_plan(sc, rec.design, rec.schedule, {}, rec.objectives);
  if (!a.out_dir.empty()) {
    write_text_file(fs::path(a.out_dir) / "validation.json", validation_to_json(report) + "\n");
  }
  out << (report.ok() ? "PASS" : "FAIL") << ": " << report.violations.size() << " violation(s), "
      << report.simultaneous_steps << " step(s) with simultaneous charge and discharge\n";
  for (const auto& [family, worst] : report.max_violation) {
    out << "  " << std::left << std::setw(18) << family << std::right << " max " << std::scientific
        << std::setprecision(3) << worst << std::defaultfloat << "\n";
  }
  constexpr std::size_t kShown = 20;
  for (std::size_t i = 0; i < report.violations.size() && i < kShown; ++i) {
    const Violation& v = report.violations[i];
    out << "  " << v.family << " step " << v.step << " index " << v.index << ": " << v.detail << " (" << v.amount
        << ")\n";
  }
  return report.ok() ? kOk : kValidationFailed;
}

int cmd_ahp(const Args& a, std::ostream& out) {
  const AhpMatrix m = a.planner.ahp_file.empty() ? default_ahp_judgments() : read_ahp_file(a.planner.ahp_file);
  const AhpResult r = ahp_weights(m);
  const auto flags = out.flags();
  out << std::fixed << std::setprecision(4) << "loss   " << r.weights[0] << "\n"
      << "trade  " << r.weights[1] << "\n"
      << "invest " << r.weights[2] << "\n"
      << "lambda_max " << r.lambda_max << "\n"
      << "consistency_ratio " << r.consistency_ratio << (r.consistent ? "" : " (inconsistent, above 0.1)") << "\n";
  out.flags(flags);
  return kOk;
}

int cmd_gen_fixture(const Args& a, std::ostream& out) {
  const Scenario sc = synthetic_fixture({.seed = a.seed, .days = a.days, .customers = a.customers});
  const ScenarioPaths paths = write_scenario(sc, a.out_dir);
  out << "wrote " << paths.network.string() << ", " << paths.profiles.string() << ", " << paths.tariff.string()
      << ", " << paths.config.string() << "\n";
  return kOk;
}

int exit_code_for(Errc code) {
  switch (code) {
    case Errc::Io:
      return kIoError;
    case Errc::AllLocationsInfeasible:
    case Errc::DegenerateSpan:
    case Errc::InfeasibleBoxes:
      return kInfeasible;
    default:
      return kConfigError;
  }
}

}  // namespace

std::array<double, 3> parse_weights(std::string_view text) {
  std::array<double, 3> w{};
  std::size_t k = 0;
  while (true) {
    const auto comma = text.find(',');
    if (k == 3) throw Error(Errc::InvalidWeights, "expected three weights");
    w[k++] = parse_fraction(text.substr(0, comma));
    if (comma == std::string_view::npos) break;
    text.remove_prefix(comma + 1);
  }
  if (k != 3) throw Error(Errc::InvalidWeights, "expected three weights");
  return w;
}

void configure_logging_from_env() {
  const char* level = std::getenv("CESPLAN_LOG");
  spdlog::set_level(level ? spdlog::level::from_str(level) : spdlog::level::warn);
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Community energy storage siting, sizing and scheduling"};
  app.require_subcommand(1);
  Args a;

  auto* plan_cmd = app.add_subcommand("plan", "Enumerate locations and select the best storage plan");
  a.inputs.add_to(*plan_cmd);
  a.planner.add_to(*plan_cmd);
  plan_cmd->add_option("--out", a.out_dir, "Output directory for plan.json, leaderboard.csv, timeseries/");

  auto* base_cmd = app.add_subcommand("baseline", "Loss and trading cost without storage");
  a.inputs.add_to(*base_cmd);
  base_cmd->add_option("--out", a.out_dir, "Output directory for baseline.json");

  auto* val_cmd = app.add_subcommand("validate", "Check a plan.json against the scenario");
  a.inputs.add_to(*val_cmd);
  val_cmd->add_option("--plan", a.plan_file, "plan.json to check")->required();
  val_cmd->add_option("--out", a.out_dir, "Output directory for validation.json");

  auto* ahp_cmd = app.add_subcommand("ahp", "Weights from an AHP judgment matrix");
  ahp_cmd->add_option("--ahp-file", a.planner.ahp_file, "AHP judgment matrix (JSON 3x3); default judgments if absent");

  auto* fix_cmd = app.add_subcommand("gen-fixture", "Write the seeded synthetic 7-node scenario");
  fix_cmd->add_option("--out", a.out_dir, "Output directory")->required();
  fix_cmd->add_option("--seed", a.seed, "Random seed");
  fix_cmd->add_option("--days", a.days, "Number of days")->check(CLI::PositiveNumber);
  fix_cmd->add_option("--customers", a.customers, "Number of customers")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kConfigError;
  }

  try {
    if (*plan_cmd) return cmd_plan(a, out);
    if (*base_cmd) return cmd_baseline(a, out);
    if (*val_cmd) return cmd_validate(a, out);
    if (*ahp_cmd) return cmd_ahp(a, out);
    if (*fix_cmd) return cmd_gen_fixture(a, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kIoError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kConfigError;
  }
  return kConfigError;
}

}  // namespace cesplan::cli
