#include <doctest.h>

#include <filesystem>

#include "cesplan/fixture.hpp"
#include "cesplan/planner.hpp"

using namespace cesplan;

TEST_CASE("the synthetic fixture is deterministic per seed") {
  const Scenario a = synthetic_fixture({.seed = 7, .days = 2});
  const Scenario b = synthetic_fixture({.seed = 7, .days = 2});
  const Scenario c = synthetic_fixture({.seed = 8, .days = 2});
  REQUIRE(a.customers.size() == b.customers.size());
  bool differs = false;
  for (std::size_t i = 0; i < a.customers.size(); ++i) {
    CHECK(a.customers[i].id == b.customers[i].id);
    CHECK(a.customers[i].p_load_kw == b.customers[i].p_load_kw);
    CHECK(a.customers[i].p_pv_kw == b.customers[i].p_pv_kw);
    differs = differs || a.customers[i].p_load_kw != c.customers[i].p_load_kw;
  }
  CHECK(differs);
}

TEST_CASE("fixture shape: seven nodes, thirty customers, every node populated") {
  const Scenario sc = synthetic_fixture();
  CHECK(sc.network.node_count() == 7);
  CHECK(sc.customers.size() == 30);
  CHECK(sc.steps() == 168);
  for (NodeId j = 1; j <= 7; ++j) CHECK_FALSE(sc.customers_at(j).empty());
  for (const auto& c : sc.customers) {
    for (std::size_t t = 0; t < c.p_load_kw.size(); ++t) {
      CHECK(c.p_load_kw[t] >= 0.0);
      CHECK(c.p_pv_kw[t] >= 0.0);
      CHECK(c.q_load_kvar[t] == 0.0);
      const double h = sc.horizon.hour_of_day(static_cast<int>(t));
      if (h < 6.0 || h > 18.0) CHECK(c.p_pv_kw[t] == 0.0);
    }
  }
}

TEST_CASE("the bundled fixture matches the generator") {
  const std::filesystem::path dir(CESPLAN_DATA_DIR "/fixture");
  const Scenario bundled = load_scenario(
      {dir / "profiles.csv", dir / "tariff.json", dir / "network.csv", dir / "config.json"});
  const Scenario generated = synthetic_fixture();
  REQUIRE(bundled.customers.size() == generated.customers.size());
  for (std::size_t i = 0; i < bundled.customers.size(); ++i) {
    CHECK(bundled.customers[i].id == generated.customers[i].id);
    CHECK(bundled.customers[i].node == generated.customers[i].node);
    CHECK(bundled.customers[i].p_load_kw == generated.customers[i].p_load_kw);
    CHECK(bundled.customers[i].p_pv_kw == generated.customers[i].p_pv_kw);
  }
  CHECK(bundled.tariff.price == generated.tariff.price);
}

TEST_CASE("bundled fixture baseline has positive loss and trade") {
  const ObjectiveValues base = baseline_no_ces(synthetic_fixture());
  CHECK(base.loss_kwh > 0.0);
  CHECK(base.trade_aud > 0.0);
  CHECK(base.invest_aud == 0.0);
}
