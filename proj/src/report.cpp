#include "cesplan/report.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "cesplan/error.hpp"
#include "text_io.hpp"

namespace cesplan {

namespace {

using json = nlohmann::json;
using detail::format_double;

json objectives_json(const ObjectiveValues& v) {
  return {{"loss_kwh", v.loss_kwh}, {"trade_aud", v.trade_aud}, {"invest_aud", v.invest_aud}};
}

json weights_json(const Weights& w) { return {{"loss", w[0]}, {"trade", w[1]}, {"invest", w[2]}}; }

json context_json(const NormalizationContext& c) {
  json payoff = json::array();
  for (const auto& row : c.payoff) payoff.push_back(row);
  return {{"utopia", weights_json(c.utopia)},
          {"nadir", weights_json(c.nadir)},
          {"degenerate", c.degenerate},
          {"payoff", payoff}};
}

json schedule_json(const Scenario& sc, const Schedule& s) {
  json customers = json::array();
  for (std::size_t c = 0; c < sc.customers.size(); ++c) {
    customers.push_back({{"id", sc.customers[c].id},
                         {"node", sc.customers[c].node},
                         {"grid_kw", s.grid_customer_kw[c]},
                         {"ces_kw", s.ces_customer_kw[c]}});
  }
  return {{"dt_hours", sc.horizon.dt_hours},
          {"initial_energy_kwh", s.initial_energy_kwh},
          {"p_ch_kw", s.p_ch_kw},
          {"p_dis_kw", s.p_dis_kw},
          {"energy_kwh", s.energy_kwh},
          {"grid_ces_kw", s.grid_ces_kw},
          {"customers", customers}};
}

json location_json(const LocationResult& r) {
  return {{"location", r.location},
          {"status", std::string(to_string(r.status))},
          {"message", r.message},
          {"e_cap_kwh", r.design.e_cap_kwh},
          {"p_rate_kw", r.design.p_rate_kw},
          {"objectives", objectives_json(r.values)},
          {"normalized", weights_json(r.normalized)},
          {"effective_weights", weights_json(r.effective_weights)},
          {"weighted_objective", r.weighted_objective},
          {"context", context_json(r.context)},
          {"iterations", r.iterations},
          {"primal_residual", r.primal_residual},
          {"warnings", r.warnings}};
}

template <class T>
T field(const json& j, const char* key) {
  if (!j.contains(key)) throw Error(Errc::ParseError, std::string("plan.json: missing '") + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw Error(Errc::ParseError, std::string("plan.json: bad '") + key + "': " + e.what());
  }
}

}  // namespace

double percent_of_baseline(double value, double baseline) {
  return baseline == 0.0 ? std::numeric_limits<double>::quiet_NaN() : 100.0 * value / baseline;
}

std::string plan_to_json(const Scenario& sc, const PlanResult& plan) {
  const LocationResult& best = plan.best();
  json doc;
  doc["schema_version"] = kReportSchemaVersion;
  doc["location"] = best.location;
  doc["design"] = {{"location", best.design.location},
                   {"e_cap_kwh", best.design.e_cap_kwh},
                   {"p_rate_kw", best.design.p_rate_kw}};
  doc["weights"] = weights_json(plan.weights);
  if (plan.ahp) {
    doc["ahp"] = {{"weights", weights_json(plan.ahp->weights)},
                  {"lambda_max", plan.ahp->lambda_max},
                  {"consistency_ratio", plan.ahp->consistency_ratio},
                  {"consistent", plan.ahp->consistent}};
  } else {
    doc["ahp"] = nullptr;
  }
  doc["normalization"] = plan.normalization == NormalizationMode::Global ? "global" : "per_location";
  if (plan.global_context) doc["global_context"] = context_json(*plan.global_context);
  doc["objectives"] = objectives_json(best.values);
  doc["normalized"] = weights_json(best.normalized);
  doc["weighted_objective"] = best.weighted_objective;
  doc["baseline"] = objectives_json(plan.baseline);
  doc["percent_of_baseline"] = {{"loss", percent_of_baseline(best.values.loss_kwh, plan.baseline.loss_kwh)},
                                {"trade", percent_of_baseline(best.values.trade_aud, plan.baseline.trade_aud)}};
  json board = json::array();
  for (const auto& r : plan.leaderboard) board.push_back(location_json(r));
  doc["leaderboard"] = board;
  doc["schedule"] = schedule_json(sc, best.schedule);
  doc["warnings"] = plan.warnings;
  return doc.dump(2);
}

void write_leaderboard_csv(std::ostream& out, const PlanResult& plan) {
  out << "schema_version,location,status,selected,e_cap_kwh,p_rate_kw,loss_kwh,trade_aud,invest_aud,"
         "loss_pct_of_baseline,trade_pct_of_baseline,weighted_objective\n";
  for (std::size_t i = 0; i < plan.leaderboard.size(); ++i) {
    const LocationResult& r = plan.leaderboard[i];
    const bool ok = r.status == LocationStatus::Optimal;
    auto num = [&](double v) { return ok ? format_double(v) : std::string(); };
    out << kReportSchemaVersion << ',' << r.location << ',' << to_string(r.status) << ','
        << (i == plan.selected ? 1 : 0) << ',' << num(r.design.e_cap_kwh) << ',' << num(r.design.p_rate_kw) << ','
        << num(r.values.loss_kwh) << ',' << num(r.values.trade_aud) << ',' << num(r.values.invest_aud) << ','
        << num(percent_of_baseline(r.values.loss_kwh, plan.baseline.loss_kwh)) << ','
        << num(percent_of_baseline(r.values.trade_aud, plan.baseline.trade_aud)) << ','
        << num(r.weighted_objective) << '\n';
  }
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  std::ofstream out(path);
  if (!out) throw Error(Errc::Io, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(Errc::Io, "write failed: " + path.string());
}

void write_timeseries(const std::filesystem::path& dir, const Scenario& sc, const LocationResult& r) {
  const Schedule& s = r.schedule;
  std::ostringstream storage, grid, ces;
  storage << "schema_version,t,hour,price_aud_per_kwh,p_ch_kw,p_dis_kw,energy_kwh,soc,grid_ces_kw,"
             "customers_grid_kw,customers_ces_kw\n";
  grid << "t";
  ces << "t";
  for (const auto& c : sc.customers) {
    grid << ',' << c.id;
    ces << ',' << c.id;
  }
  grid << '\n';
  ces << '\n';
  for (int t = 0; t < s.steps(); ++t) {
    double to_grid = 0.0, from_ces = 0.0;
    for (std::size_t c = 0; c < sc.customers.size(); ++c) {
      to_grid += s.grid_customer_kw[c][t];
      from_ces += s.ces_customer_kw[c][t];
    }
    const double soc = r.design.e_cap_kwh > 0.0 ? s.energy_kwh[t] / r.design.e_cap_kwh : 0.0;
    storage << kReportSchemaVersion << ',' << t << ',' << format_double(sc.horizon.hour_of_day(t)) << ','
            << format_double(tou_price(sc.tariff, t)) << ',' << format_double(s.p_ch_kw[t]) << ','
            << format_double(s.p_dis_kw[t]) << ',' << format_double(s.energy_kwh[t]) << ',' << format_double(soc)
            << ',' << format_double(s.grid_ces_kw[t]) << ',' << format_double(to_grid) << ','
            << format_double(from_ces) << '\n';
    grid << t;
    ces << t;
    for (std::size_t c = 0; c < sc.customers.size(); ++c) {
      grid << ',' << format_double(s.grid_customer_kw[c][t]);
      ces << ',' << format_double(s.ces_customer_kw[c][t]);
    }
    grid << '\n';
    ces << '\n';
  }
  write_text_file(dir / "storage.csv", storage.str());
  write_text_file(dir / "customer_grid.csv", grid.str());
  write_text_file(dir / "customer_ces.csv", ces.str());
}

void write_plan_report(const std::filesystem::path& dir, const Scenario& sc, const PlanResult& plan) {
  write_text_file(dir / "plan.json", plan_to_json(sc, plan) + "\n");
  std::ostringstream board;
  write_leaderboard_csv(board, plan);
  write_text_file(dir / "leaderboard.csv", board.str());
  write_timeseries(dir / "timeseries", sc, plan.best());
}

std::string baseline_to_json(const ObjectiveValues& baseline) {
  json doc{{"schema_version", kReportSchemaVersion}, {"objectives", objectives_json(baseline)}};
  return doc.dump(2);
}

std::string validation_to_json(const ValidationReport& report) {
  json violations = json::array();
  for (const auto& v : report.violations) {
    violations.push_back(
        {{"family", v.family}, {"step", v.step}, {"index", v.index}, {"amount", v.amount}, {"detail", v.detail}});
  }
  json doc{{"schema_version", kReportSchemaVersion},
           {"pass", report.ok()},
           {"max_violation", report.max_violation},
           {"violations", violations},
           {"objectives", objectives_json(report.objectives)},
           {"simultaneous_charge_discharge_steps", report.simultaneous_steps},
           {"min_voltage_v2", report.min_voltage_v2},
           {"max_voltage_v2", report.max_voltage_v2}};
  return doc.dump(2);
}

void print_plan_summary(std::ostream& out, const PlanResult& plan) {
  const auto flags = out.flags();
  out << std::fixed;
  out << "weights (loss, trade, invest): " << std::setprecision(4) << plan.weights[0] << ", " << plan.weights[1]
      << ", " << plan.weights[2] << "\n";
  out << "selected location: node " << plan.best().location << "\n\n";
  out << std::left << std::setw(10) << "case" << std::right << std::setw(8) << "node" << std::setw(12) << "E_cap kWh"
      << std::setw(12) << "p_rate kW" << std::setw(16) << "loss kWh (%)" << std::setw(20) << "trade AUD (%)"
      << std::setw(14) << "invest AUD" << std::setw(12) << "weighted" << "\n";
  auto row = [&](const std::string& name, const LocationResult* r, const ObjectiveValues& v) {
    std::ostringstream loss, trade;
    loss << std::fixed << std::setprecision(2) << v.loss_kwh << " ("
         << std::setprecision(1) << percent_of_baseline(v.loss_kwh, plan.baseline.loss_kwh) << ")";
    trade << std::fixed << std::setprecision(2) << v.trade_aud << " ("
          << std::setprecision(1) << percent_of_baseline(v.trade_aud, plan.baseline.trade_aud) << ")";
    out << std::left << std::setw(10) << name << std::right << std::setw(8) << (r ? std::to_string(r->location) : "-")
        << std::setw(12) << std::setprecision(2) << (r ? r->design.e_cap_kwh : 0.0) << std::setw(12)
        << (r ? r->design.p_rate_kw : 0.0) << std::setw(16) << loss.str() << std::setw(20) << trade.str()
        << std::setw(14) << std::setprecision(0) << v.invest_aud << std::setw(12) << std::setprecision(4)
        << (r ? r->weighted_objective : 0.0) << "\n";
  };
  row("baseline", nullptr, plan.baseline);
  for (std::size_t i = 0; i < plan.leaderboard.size(); ++i) {
    const LocationResult& r = plan.leaderboard[i];
    const std::string name = i == plan.selected ? "selected" : "";
    if (r.status == LocationStatus::Optimal) {
      row(name, &r, r.values);
    } else {
      out << std::left << std::setw(10) << name << std::right << std::setw(8) << r.location << "  "
          << to_string(r.status) << ": " << r.message << "\n";
    }
  }
  for (const auto& w : plan.warnings) out << "warning: " << w << "\n";
  out.flags(flags);
}

PlanRecord read_plan_json(std::istream& in, const Scenario& sc) {
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw Error(Errc::ParseError, std::string("plan.json: ") + e.what());
  }
  if (field<int>(doc, "schema_version") != kReportSchemaVersion) {
    throw Error(Errc::ParseError, "plan.json: unsupported schema_version");
  }
  PlanRecord rec;
  const json design = field<json>(doc, "design");
  rec.design.location = field<int>(design, "location");
  rec.design.e_cap_kwh = field<double>(design, "e_cap_kwh");
  rec.design.p_rate_kw = field<double>(design, "p_rate_kw");
  const json obj = field<json>(doc, "objectives");
  rec.objectives.loss_kwh = field<double>(obj, "loss_kwh");
  rec.objectives.trade_aud = field<double>(obj, "trade_aud");
  rec.objectives.invest_aud = field<double>(obj, "invest_aud");

  const json sched = field<json>(doc, "schedule");
  Schedule& s = rec.schedule;
  s.initial_energy_kwh = field<double>(sched, "initial_energy_kwh");
  s.p_ch_kw = field<std::vector<double>>(sched, "p_ch_kw");
  s.p_dis_kw = field<std::vector<double>>(sched, "p_dis_kw");
  s.energy_kwh = field<std::vector<double>>(sched, "energy_kwh");
  s.grid_ces_kw = field<std::vector<double>>(sched, "grid_ces_kw");

  std::map<std::string, const json*> by_id;
  const json customers = field<json>(sched, "customers");
  for (const auto& c : customers) by_id[field<std::string>(c, "id")] = &c;
  if (by_id.size() != sc.customers.size()) {
    throw Error(Errc::DimensionMismatch, "plan.json lists " + std::to_string(by_id.size()) +
                                             " customers, the scenario has " + std::to_string(sc.customers.size()));
  }
  for (const auto& c : sc.customers) {
    const auto it = by_id.find(c.id);
    if (it == by_id.end()) throw Error(Errc::DimensionMismatch, "plan.json has no customer '" + c.id + "'");
    s.grid_customer_kw.push_back(field<std::vector<double>>(*it->second, "grid_kw"));
    s.ces_customer_kw.push_back(field<std::vector<double>>(*it->second, "ces_kw"));
  }
  return rec;
}

PlanRecord read_plan_file(const std::filesystem::path& path, const Scenario& sc) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::Io, "cannot open " + path.string());
  return read_plan_json(in, sc);
}

}  // namespace cesplan
