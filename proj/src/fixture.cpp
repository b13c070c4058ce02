#include "cesplan/fixture.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include "cesplan/error.hpp"

namespace cesplan {

namespace {

constexpr int kNodes = 7;

// Main trunk 1-2-3-4 with a lateral 2-5-6-7. Impedances in ohm per section.
const std::vector<LineSpec> kFeeder{{0, 1, 0.040, 0.012}, {1, 2, 0.055, 0.016}, {2, 3, 0.060, 0.018},
                                    {3, 4, 0.070, 0.021}, {2, 5, 0.050, 0.015}, {5, 6, 0.065, 0.019},
                                    {6, 7, 0.075, 0.022}};

double bump(double h, double centre, double width) { return std::exp(-0.5 * std::pow((h - centre) / width, 2)); }

}  // namespace

Scenario synthetic_fixture(const FixtureOptions& options) {
  if (options.days < 1) throw Error(Errc::InvalidParameter, "fixture needs at least one day");
  if (options.customers < kNodes) throw Error(Errc::InvalidParameter, "fixture needs a customer per node");

  std::mt19937_64 rng(options.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };

  // Every node gets one customer, the rest are allocated at random.
  std::vector<NodeId> node_of;
  for (NodeId j = 1; j <= kNodes; ++j) node_of.push_back(j);
  std::uniform_int_distribution<NodeId> pick(1, kNodes);
  while (static_cast<int>(node_of.size()) < options.customers) node_of.push_back(pick(rng));

  const int steps = 24 * options.days;
  std::vector<double> cloud(static_cast<std::size_t>(options.days));
  for (double& c : cloud) c = uniform(0.55, 1.0);

  std::vector<CustomerProfile> customers;
  for (std::size_t k = 0; k < node_of.size(); ++k) {
    CustomerProfile c;
    c.node = node_of[k];
    c.id = "c" + std::string(k < 9 ? "0" : "") + std::to_string(k + 1);
    const double base = uniform(0.25, 0.5);
    const double morning = uniform(0.4, 1.1);
    const double evening = uniform(1.0, 2.4);
    const double evening_hour = uniform(18.0, 20.0);
    const double pv_kw = uniform(2.0, 5.0);
    for (int t = 0; t < steps; ++t) {
      const double h = t % 24;
      const double noise = uniform(0.9, 1.1);
      const double load = noise * (base + morning * bump(h, 7.5, 1.2) + evening * bump(h, evening_hour, 1.8));
      double pv = 0.0;
      if (h > 6.0 && h < 18.0) {
        pv = pv_kw * cloud[static_cast<std::size_t>(t / 24)] * uniform(0.9, 1.0) *
             std::sin(std::numbers::pi * (h - 6.0) / 12.0);
      }
      c.p_load_kw.push_back(load);
      c.q_load_kvar.push_back(0.0);
      c.p_pv_kw.push_back(pv);
    }
    customers.push_back(std::move(c));
  }

  Scenario config;
  config.horizon.steps = steps;
  return assemble_scenario(kFeeder, std::move(customers), config, std::nullopt, TouSchedule::residential_default(),
                           std::nullopt);
}

}  // namespace cesplan
