#include "cesplan/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>

#include <json.hpp>

#include "cesplan/error.hpp"
#include "text_io.hpp"

namespace cesplan {

namespace {

using nlohmann::json;

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::Io, "cannot open " + path.string());
  return in;
}

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(Errc::Io, "cannot write " + path.string());
  return out;
}

template <typename T>
T json_get(const json& obj, const char* key, T fallback) {
  if (!obj.contains(key)) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw Error(Errc::ParseError, std::string("config key '") + key + "': " + e.what());
  }
}

}  // namespace

// ---------------------------------------------------------------- tariff ---

TouSchedule::TouSchedule(std::vector<TouWindow> windows) : windows_(std::move(windows)) {
  if (windows_.empty()) throw Error(Errc::InvalidParameter, "ToU schedule has no windows");
  std::sort(windows_.begin(), windows_.end(),
            [](const TouWindow& a, const TouWindow& b) { return a.start_hour < b.start_hour; });
  double cursor = 0.0;
  for (const auto& w : windows_) {
    if (w.start_hour != cursor || !(w.end_hour > w.start_hour)) {
      throw Error(Errc::InvalidParameter, "ToU windows must tile [0, 24) without gaps or overlaps (at window '" +
                                              w.name + "')");
    }
    if (!(w.price > 0.0)) throw Error(Errc::InvalidParameter, "ToU price must be positive (window '" + w.name + "')");
    cursor = w.end_hour;
  }
  if (cursor != 24.0) throw Error(Errc::InvalidParameter, "ToU windows must end at hour 24");
}

TouSchedule TouSchedule::residential_default() {
  return TouSchedule({{"T1", 0.0, 7.0, 0.24871},
                      {"T2", 7.0, 15.0, 0.31207},
                      {"T3", 15.0, 21.0, 0.52602},
                      {"T4", 21.0, 22.0, 0.31207},
                      {"T5", 22.0, 24.0, 0.24871}});
}

double TouSchedule::price_at_hour(double hour) const {
  if (!std::isfinite(hour)) throw Error(Errc::OutOfRange, "hour must be finite");
  double h = std::fmod(hour, 24.0);
  if (h < 0.0) h += 24.0;
  for (const auto& w : windows_) {
    if (h >= w.start_hour && h < w.end_hour) return w.price;
  }
  return windows_.back().price;  // h rounded up to 24.0
}

int Horizon::steps_per_day() const {
  const double per_day = 24.0 / dt_hours;
  return static_cast<int>(std::lround(per_day));
}

double Horizon::hour_of_day(int t) const { return std::fmod(t * dt_hours, 24.0); }

void Horizon::validate() const {
  if (!(dt_hours > 0.0)) throw Error(Errc::InvalidParameter, "dt must be positive");
  const double per_day = 24.0 / dt_hours;
  if (std::abs(per_day - std::round(per_day)) > 1e-9) {
    throw Error(Errc::InvalidParameter, "dt must divide 24 h");
  }
  if (steps <= 0 || steps % steps_per_day() != 0) {
    throw Error(Errc::LengthMismatch,
                "horizon of " + std::to_string(steps) + " steps is not a whole number of days");
  }
}

Tariff Tariff::from_schedule(const TouSchedule& schedule, const Horizon& horizon) {
  Tariff tariff;
  tariff.schedule = schedule;
  tariff.price.resize(static_cast<std::size_t>(horizon.steps));
  for (int t = 0; t < horizon.steps; ++t) tariff.price[t] = schedule.price_at_hour(horizon.hour_of_day(t));
  return tariff;
}

double tou_price(const Tariff& tariff, int t) {
  if (t < 0 || static_cast<std::size_t>(t) >= tariff.price.size()) {
    throw Error(Errc::OutOfRange, "step " + std::to_string(t) + " outside the tariff horizon");
  }
  return tariff.price[static_cast<std::size_t>(t)];
}

void CesParameters::validate() const {
  auto bad = [](const std::string& what) { throw Error(Errc::InvalidParameter, what); };
  if (!(0.0 <= lambda_min && lambda_min < lambda_max && lambda_max <= 1.0)) bad("need 0 <= lambda_min < lambda_max <= 1");
  if (!(eta_ch > 0.0 && eta_ch <= 1.0)) bad("eta_ch must lie in (0, 1]");
  if (!(eta_dis >= 1.0)) bad("eta_dis must be >= 1 (discharge is divided by it)");
  if (!(e_cap_min_kwh > 0.0) || !(p_rate_min_kw > 0.0)) bad("capacity and rating lower bounds must be positive");
  if (!(e_cap_min_kwh <= e_cap_max_kwh) || !(p_rate_min_kw <= p_rate_max_kw)) {
    throw Error(Errc::InfeasibleBoxes, "sizing box has min > max");
  }
  if (!(gamma_aud >= 0.0) || !(delta_aud_per_kwh >= 0.0)) bad("investment cost coefficients must be non-negative");
  if (!(epsilon_kwh >= 0.0)) bad("continuity tolerance must be non-negative");
  if (!(initial_soc_fraction >= lambda_min && initial_soc_fraction <= lambda_max)) {
    bad("initial_soc_fraction must lie in [lambda_min, lambda_max]");
  }
}

// -------------------------------------------------------------- scenario ---

std::vector<std::size_t> Scenario::customers_at(NodeId j) const {
  std::vector<std::size_t> out;
  for (std::size_t c = 0; c < customers.size(); ++c) {
    if (customers[c].node == j) out.push_back(c);
  }
  return out;
}

NodalSeries Scenario::nodal_net_load_kw() const {
  NodalSeries p = NodalSeries::Zero(network.node_count(), steps());
  for (const auto& c : customers) {
    for (int t = 0; t < steps(); ++t) p(c.node - 1, t) += net_position(c, static_cast<std::size_t>(t));
  }
  return p;
}

NodalSeries Scenario::nodal_reactive_kvar() const {
  NodalSeries q = NodalSeries::Zero(network.node_count(), steps());
  for (const auto& c : customers) {
    for (int t = 0; t < steps(); ++t) q(c.node - 1, t) += c.q_load_kvar[static_cast<std::size_t>(t)];
  }
  return q;
}

// --------------------------------------------------------------- parsers ---

std::vector<LineSpec> parse_network_csv(std::istream& in) {
  detail::CsvTable table(in, "network", {"from", "to", "r_ohm", "x_ohm"});
  std::vector<LineSpec> lines;
  for (std::size_t i = 0; i < table.size(); ++i) {
    const auto where = table.where(i);
    lines.push_back(LineSpec{static_cast<NodeId>(detail::parse_int(table.field(i, "from"), where)),
                             static_cast<NodeId>(detail::parse_int(table.field(i, "to"), where)),
                             detail::parse_double(table.field(i, "r_ohm"), where),
                             detail::parse_double(table.field(i, "x_ohm"), where)});
  }
  return lines;
}

std::vector<CustomerProfile> parse_profiles_csv(std::istream& in) {
  detail::CsvTable table(in, "profiles", {"node", "customer", "t", "p_load_kw", "q_load_kvar", "p_pv_kw"});
  struct Row {
    double p, q, pv;
  };
  std::map<std::string, NodeId> node_of;
  std::map<std::string, std::map<long long, Row>> series;
  for (std::size_t i = 0; i < table.size(); ++i) {
    const auto where = table.where(i);
    const auto node = static_cast<NodeId>(detail::parse_int(table.field(i, "node"), where));
    const std::string id = table.field(i, "customer");
    if (id.empty()) throw Error(Errc::ParseError, where + ": empty customer id");
    const long long t = detail::parse_int(table.field(i, "t"), where);
    if (t < 0) throw Error(Errc::ParseError, where + ": negative time index");
    const auto optional_value = [&](const char* col) {
      const auto& f = table.field(i, col);
      return f.empty() ? 0.0 : detail::parse_double(f, where);
    };
    const Row row{detail::parse_double(table.field(i, "p_load_kw"), where), optional_value("q_load_kvar"),
                  optional_value("p_pv_kw")};
    if (!std::isfinite(row.p) || !std::isfinite(row.q) || !std::isfinite(row.pv)) {
      throw Error(Errc::ParseError, where + ": non-finite value");
    }
    if (row.p < 0.0 || row.pv < 0.0) throw Error(Errc::NegativeLoadOrPv, where + ": load and PV must be >= 0");
    auto [it, inserted] = node_of.emplace(id, node);
    if (!inserted && it->second != node) {
      throw Error(Errc::ParseError, where + ": customer '" + id + "' appears at two nodes");
    }
    if (!series[id].emplace(t, row).second) {
      throw Error(Errc::ParseError, where + ": duplicate row for customer '" + id + "' t=" + std::to_string(t));
    }
  }

  std::vector<CustomerProfile> customers;
  for (const auto& [id, rows] : series) {
    CustomerProfile c;
    c.id = id;
    c.node = node_of.at(id);
    long long expect = 0;
    for (const auto& [t, row] : rows) {
      if (t != expect) {
        throw Error(Errc::LengthMismatch, "customer '" + id + "' has no row for t=" + std::to_string(expect));
      }
      c.p_load_kw.push_back(row.p);
      c.q_load_kvar.push_back(row.q);
      c.p_pv_kw.push_back(row.pv);
      ++expect;
    }
    customers.push_back(std::move(c));
  }
  std::sort(customers.begin(), customers.end(), [](const CustomerProfile& a, const CustomerProfile& b) {
    return a.node != b.node ? a.node < b.node : a.id < b.id;
  });
  return customers;
}

std::vector<double> parse_tariff_csv(std::istream& in) {
  detail::CsvTable table(in, "tariff", {"t", "price"});
  std::map<long long, double> by_t;
  for (std::size_t i = 0; i < table.size(); ++i) {
    const auto where = table.where(i);
    const long long t = detail::parse_int(table.field(i, "t"), where);
    const double price = detail::parse_double(table.field(i, "price"), where);
    if (!(price > 0.0)) throw Error(Errc::InvalidParameter, where + ": price must be positive");
    if (t < 0 || !by_t.emplace(t, price).second) throw Error(Errc::ParseError, where + ": bad or duplicate t");
  }
  std::vector<double> out;
  long long expect = 0;
  for (const auto& [t, price] : by_t) {
    if (t != expect) throw Error(Errc::LengthMismatch, "tariff has no price for t=" + std::to_string(expect));
    out.push_back(price);
    ++expect;
  }
  return out;
}

TouSchedule parse_tou_json(std::istream& in) {
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw Error(Errc::ParseError, std::string("tariff json: ") + e.what());
  }
  if (!doc.contains("windows") || !doc["windows"].is_array()) {
    throw Error(Errc::ParseError, "tariff json needs a 'windows' array");
  }
  std::vector<TouWindow> windows;
  for (const auto& w : doc["windows"]) {
    try {
      windows.push_back(TouWindow{w.value("name", std::string{}), w.at("start_hour").get<double>(),
                                  w.at("end_hour").get<double>(), w.at("price").get<double>()});
    } catch (const json::exception& e) {
      throw Error(Errc::ParseError, std::string("tariff window: ") + e.what());
    }
  }
  return TouSchedule(std::move(windows));
}

void parse_config_json(std::istream& in, Scenario& into) {
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw Error(Errc::ParseError, std::string("config json: ") + e.what());
  }
  if (!doc.is_object()) throw Error(Errc::ParseError, "config must be a JSON object");

  VoltageBase& base = into.base;
  base.voltage_v = json_get(doc, "voltage_base_v", base.voltage_v);
  base.power_kva = json_get(doc, "power_base_kva", base.power_kva);
  base.u0_pu = json_get(doc, "u0_pu", base.u0_pu);
  base.umin_pu = json_get(doc, "umin_pu", base.umin_pu);
  base.umax_pu = json_get(doc, "umax_pu", base.umax_pu);
  if (!(base.voltage_v > 0.0)) throw Error(Errc::InvalidParameter, "voltage_base_v must be positive");

  into.horizon.dt_hours = json_get(doc, "dt_hours", into.horizon.dt_hours);
  if (doc.contains("horizon_hours")) {
    const double hours = json_get(doc, "horizon_hours", 0.0);
    into.horizon.steps = static_cast<int>(std::lround(hours / into.horizon.dt_hours));
  }

  if (doc.contains("ces")) {
    const json& c = doc["ces"];
    CesParameters& p = into.ces;
    p.eta_ch = json_get(c, "eta_ch", p.eta_ch);
    p.eta_dis = json_get(c, "eta_dis", p.eta_dis);
    p.lambda_min = json_get(c, "lambda_min", p.lambda_min);
    p.lambda_max = json_get(c, "lambda_max", p.lambda_max);
    p.e_cap_min_kwh = json_get(c, "e_cap_min_kwh", p.e_cap_min_kwh);
    p.e_cap_max_kwh = json_get(c, "e_cap_max_kwh", p.e_cap_max_kwh);
    p.p_rate_min_kw = json_get(c, "p_rate_min_kw", p.p_rate_min_kw);
    p.p_rate_max_kw = json_get(c, "p_rate_max_kw", p.p_rate_max_kw);
    p.gamma_aud = json_get(c, "gamma_aud", p.gamma_aud);
    p.delta_aud_per_kwh = json_get(c, "delta_aud_per_kwh", p.delta_aud_per_kwh);
    p.epsilon_kwh = json_get(c, "epsilon_kwh", p.epsilon_kwh);
    p.initial_soc_fraction = json_get(c, "initial_soc_fraction", p.lambda_min);
  }

  RunSettings& run = into.settings;
  if (doc.contains("weights") && doc.contains("ahp")) {
    throw Error(Errc::InvalidParameter, "config may set 'weights' or 'ahp', not both");
  }
  if (doc.contains("weights")) run.weights = json_get(doc, "weights", std::array<double, 3>{});
  if (doc.contains("ahp")) run.ahp = json_get(doc, "ahp", AhpMatrix{});
  const std::string mode = json_get(doc, "normalization", std::string("global"));
  if (mode == "per_location") run.normalization = NormalizationMode::PerLocation;
  else if (mode == "global") run.normalization = NormalizationMode::Global;
  else throw Error(Errc::InvalidParameter, "normalization must be 'per_location' or 'global'");
  run.threads = json_get(doc, "threads", run.threads);

  if (doc.contains("solver")) {
    const json& s = doc["solver"];
    SolverSettings& st = run.solver;
    if (s.contains("method")) st.method = parse_qp_method(json_get(s, "method", std::string()));
    st.eps_abs = json_get(s, "eps_abs", st.eps_abs);
    st.eps_rel = json_get(s, "eps_rel", st.eps_rel);
    st.max_iter = json_get(s, "max_iter", st.max_iter);
    st.rho = json_get(s, "rho", st.rho);
    st.sigma = json_get(s, "sigma", st.sigma);
    st.alpha = json_get(s, "alpha", st.alpha);
    st.adaptive_rho = json_get(s, "adaptive_rho", st.adaptive_rho);
    st.adaptive_rho_interval = json_get(s, "adaptive_rho_interval", st.adaptive_rho_interval);
    st.scaling_iterations = json_get(s, "scaling_iterations", st.scaling_iterations);
    st.polish = json_get(s, "polish", st.polish);
    st.polish_interval = json_get(s, "polish_interval", st.polish_interval);
    st.validate();
  }
}

Scenario assemble_scenario(std::vector<LineSpec> lines, std::vector<CustomerProfile> customers, Scenario config,
                           std::optional<std::vector<double>> price_series, std::optional<TouSchedule> schedule,
                           std::optional<int> horizon_override_steps) {
  Scenario sc = std::move(config);
  sc.network = build_network(lines, sc.base.to_squared_volts(sc.base.u0_pu), sc.base.to_squared_volts(sc.base.umin_pu),
                             sc.base.to_squared_volts(sc.base.umax_pu));
  sc.ces.validate();

  if (horizon_override_steps) sc.horizon.steps = *horizon_override_steps;
  if (sc.horizon.steps == 0) {
    if (customers.empty()) throw Error(Errc::LengthMismatch, "no horizon configured and no profiles to infer it from");
    sc.horizon.steps = static_cast<int>(customers.front().p_load_kw.size());
  }
  sc.horizon.validate();
  const auto steps = static_cast<std::size_t>(sc.horizon.steps);

  std::set<std::string> seen;
  for (auto& c : customers) {
    if (c.node <= kSlack || c.node > sc.network.node_count()) {
      throw Error(Errc::UnknownNode, "customer '" + c.id + "' sits at node " + std::to_string(c.node) +
                                         " which is not a non-slack network node");
    }
    if (!seen.insert(c.id).second) throw Error(Errc::ParseError, "duplicate customer id '" + c.id + "'");
    if (c.p_load_kw.size() < steps || c.q_load_kvar.size() < steps || c.p_pv_kw.size() < steps) {
      throw Error(Errc::LengthMismatch, "customer '" + c.id + "' has " + std::to_string(c.p_load_kw.size()) +
                                            " steps, horizon needs " + std::to_string(steps));
    }
    c.p_load_kw.resize(steps);
    c.q_load_kvar.resize(steps);
    c.p_pv_kw.resize(steps);
    for (std::size_t t = 0; t < steps; ++t) {
      if (c.p_load_kw[t] < 0.0 || c.p_pv_kw[t] < 0.0) {
        throw Error(Errc::NegativeLoadOrPv, "customer '" + c.id + "' t=" + std::to_string(t));
      }
    }
  }
  std::sort(customers.begin(), customers.end(), [](const CustomerProfile& a, const CustomerProfile& b) {
    return a.node != b.node ? a.node < b.node : a.id < b.id;
  });
  sc.customers = std::move(customers);

  if (schedule) {
    sc.tariff = Tariff::from_schedule(*schedule, sc.horizon);
  } else if (price_series) {
    if (price_series->size() < steps) {
      throw Error(Errc::LengthMismatch, "tariff has " + std::to_string(price_series->size()) + " prices, horizon needs " +
                                            std::to_string(steps));
    }
    price_series->resize(steps);
    sc.tariff = Tariff{std::move(*price_series), std::nullopt};
  } else {
    sc.tariff = Tariff::from_schedule(TouSchedule::residential_default(), sc.horizon);
  }
  for (double p : sc.tariff.price) {
    if (!(p > 0.0)) throw Error(Errc::InvalidParameter, "tariff prices must be positive");
  }
  return sc;
}

Scenario load_scenario(const ScenarioPaths& paths, std::optional<int> horizon_override_steps) {
  Scenario config;
  {
    auto in = open_input(paths.config);
    parse_config_json(in, config);
  }
  std::vector<LineSpec> lines;
  {
    auto in = open_input(paths.network);
    lines = parse_network_csv(in);
  }
  std::vector<CustomerProfile> customers;
  {
    auto in = open_input(paths.profiles);
    customers = parse_profiles_csv(in);
  }
  std::optional<std::vector<double>> series;
  std::optional<TouSchedule> schedule;
  {
    auto in = open_input(paths.tariff);
    if (paths.tariff.extension() == ".json") schedule = parse_tou_json(in);
    else series = parse_tariff_csv(in);
  }
  return assemble_scenario(std::move(lines), std::move(customers), std::move(config), std::move(series),
                           std::move(schedule), horizon_override_steps);
}

ScenarioPaths write_scenario(const Scenario& sc, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(Errc::Io, "cannot create " + dir.string());
  using detail::format_double;

  ScenarioPaths paths{dir / "profiles.csv", dir / (sc.tariff.schedule ? "tariff.json" : "tariff.csv"),
                      dir / "network.csv", dir / "config.json"};
  {
    auto out = open_output(paths.network);
    out << "from,to,r_ohm,x_ohm\n";
    for (const auto& l : sc.network.source_lines()) {
      out << l.from << ',' << l.to << ',' << format_double(l.r_ohm) << ',' << format_double(l.x_ohm) << '\n';
    }
  }
  {
    auto out = open_output(paths.profiles);
    out << "node,customer,t,p_load_kw,q_load_kvar,p_pv_kw\n";
    for (const auto& c : sc.customers) {
      for (std::size_t t = 0; t < c.p_load_kw.size(); ++t) {
        out << c.node << ',' << c.id << ',' << t << ',' << format_double(c.p_load_kw[t]) << ','
            << format_double(c.q_load_kvar[t]) << ',' << format_double(c.p_pv_kw[t]) << '\n';
      }
    }
  }
  {
    auto out = open_output(paths.tariff);
    if (sc.tariff.schedule) {
      json windows = json::array();
      for (const auto& w : sc.tariff.schedule->windows()) {
        windows.push_back({{"name", w.name}, {"start_hour", w.start_hour}, {"end_hour", w.end_hour}, {"price", w.price}});
      }
      out << json{{"windows", windows}}.dump(2) << '\n';
    } else {
      out << "t,price\n";
      for (std::size_t t = 0; t < sc.tariff.price.size(); ++t) out << t << ',' << format_double(sc.tariff.price[t]) << '\n';
    }
  }
  {
    const auto& p = sc.ces;
    const auto& s = sc.settings.solver;
    json cfg = {
        {"voltage_base_v", sc.base.voltage_v},
        {"power_base_kva", sc.base.power_kva},
        {"u0_pu", sc.base.u0_pu},
        {"umin_pu", sc.base.umin_pu},
        {"umax_pu", sc.base.umax_pu},
        {"horizon_hours", sc.horizon.steps * sc.horizon.dt_hours},
        {"dt_hours", sc.horizon.dt_hours},
        {"ces",
         {{"eta_ch", p.eta_ch},
          {"eta_dis", p.eta_dis},
          {"lambda_min", p.lambda_min},
          {"lambda_max", p.lambda_max},
          {"e_cap_min_kwh", p.e_cap_min_kwh},
          {"e_cap_max_kwh", p.e_cap_max_kwh},
          {"p_rate_min_kw", p.p_rate_min_kw},
          {"p_rate_max_kw", p.p_rate_max_kw},
          {"gamma_aud", p.gamma_aud},
          {"delta_aud_per_kwh", p.delta_aud_per_kwh},
          {"epsilon_kwh", p.epsilon_kwh},
          {"initial_soc_fraction", p.initial_soc_fraction}}},
        {"normalization", sc.settings.normalization == NormalizationMode::Global ? "global" : "per_location"},
        {"threads", sc.settings.threads},
        {"solver",
         {{"method", std::string(to_string(s.method))},
          {"eps_abs", s.eps_abs},
          {"eps_rel", s.eps_rel},
          {"max_iter", s.max_iter},
          {"rho", s.rho},
          {"sigma", s.sigma},
          {"alpha", s.alpha},
          {"adaptive_rho", s.adaptive_rho},
          {"adaptive_rho_interval", s.adaptive_rho_interval},
          {"scaling_iterations", s.scaling_iterations},
          {"polish", s.polish},
          {"polish_interval", s.polish_interval}}},
    };
    if (sc.settings.weights) cfg["weights"] = *sc.settings.weights;
    if (sc.settings.ahp) cfg["ahp"] = *sc.settings.ahp;
    auto out = open_output(paths.config);
    out << cfg.dump(2) << '\n';
  }
  return paths;
}

}  // namespace cesplan
