#pragma once

// Small hand-built scenarios shared by the tests.

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "cesplan/scenario.hpp"

namespace cesplan::testing {

inline CustomerProfile flat_customer(NodeId node, std::string id, int steps, double load, double pv = 0.0,
                                     double q = 0.0) {
  CustomerProfile c;
  c.node = node;
  c.id = std::move(id);
  c.p_load_kw.assign(static_cast<std::size_t>(steps), load);
  c.q_load_kvar.assign(static_cast<std::size_t>(steps), q);
  c.p_pv_kw.assign(static_cast<std::size_t>(steps), pv);
  return c;
}

/// Evening-peaking load with a midday PV bump, scaled by `size`.
inline CustomerProfile daily_customer(NodeId node, std::string id, int steps, double size, double pv_size) {
  CustomerProfile c;
  c.node = node;
  c.id = std::move(id);
  for (int t = 0; t < steps; ++t) {
    const double h = t % 24;
    const double load = size * (0.6 + 0.5 * std::exp(-0.5 * std::pow((h - 19.0) / 2.5, 2)) +
                                0.2 * std::exp(-0.5 * std::pow((h - 8.0) / 1.5, 2)));
    const double pv = h >= 6 && h <= 18 ? pv_size * std::sin(M_PI * (h - 6.0) / 12.0) : 0.0;
    c.p_load_kw.push_back(load);
    c.q_load_kvar.push_back(0.3 * load);
    c.p_pv_kw.push_back(std::max(0.0, pv));
  }
  return c;
}

inline Scenario make_scenario(const std::vector<LineSpec>& lines, std::vector<CustomerProfile> customers,
                              const CesParameters& ces = {}, std::optional<std::vector<double>> prices = std::nullopt) {
  Scenario config;
  config.ces = ces;
  return assemble_scenario(lines, std::move(customers), config, std::move(prices), std::nullopt, std::nullopt);
}

/// Three-node feeder 0-1-2-3 with one daily customer per node.
inline Scenario small_feeder(int steps = 24, double pv_size = 3.0) {
  const std::vector<LineSpec> lines{{0, 1, 0.02, 0.006}, {1, 2, 0.03, 0.009}, {2, 3, 0.03, 0.009}};
  std::vector<CustomerProfile> customers;
  for (NodeId j = 1; j <= 3; ++j) {
    for (int k = 0; k < 2; ++k) {
      customers.push_back(daily_customer(j, "n" + std::to_string(j) + "c" + std::to_string(k), steps, 4.0 + j + k,
                                         pv_size * (1 + k)));
    }
  }
  return make_scenario(lines, std::move(customers));
}

}  // namespace cesplan::testing
