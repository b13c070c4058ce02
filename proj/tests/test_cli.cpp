#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <json.hpp>
#include <sstream>
#include <string>
#include <vector>

#include "cesplan/error.hpp"
#include "cesplan/fixture.hpp"
#include "cesplan/scenario.hpp"
#include "cli.hpp"
#include "scenarios.hpp"

using namespace cesplan;
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run cesplan_cli(std::initializer_list<std::string> args) {
  std::vector<std::string> storage{"cesplan"};
  storage.insert(storage.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& s : storage) argv.push_back(s.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("cesplan_cli_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Two-day fixture written to disk once for the whole suite.
const fs::path& fixture_dir() {
  static const fs::path dir = [] {
    const fs::path d = scratch("fixture");
    write_scenario(synthetic_fixture({.seed = 42, .days = 2}), d);
    return d;
  }();
  return dir;
}

const fs::path& planned_dir() {
  static const fs::path dir = [] {
    const fs::path d = scratch("plan");
    const Run r = cesplan_cli({"plan", "--scenario", fixture_dir().string(), "--out", d.string()});
    REQUIRE(r.code == 0);
    return d;
  }();
  return dir;
}

}  // namespace

TEST_CASE("weights accept fractions") {
  const auto w = cli::parse_weights("1/9, 4/9,4/9");
  CHECK(w[0] == doctest::Approx(1.0 / 9.0).epsilon(1e-15));
  CHECK(w[1] == doctest::Approx(4.0 / 9.0).epsilon(1e-15));
  CHECK(cli::parse_weights("0.2,0.3,0.5")[2] == 0.5);
  CHECK_THROWS_AS(cli::parse_weights("1,2"), Error);
  CHECK_THROWS_AS(cli::parse_weights("1,2,3,4"), Error);
  CHECK_THROWS_AS(cli::parse_weights("1/0,1,1"), Error);
  CHECK_THROWS_AS(cli::parse_weights("a,1,1"), Error);
}

TEST_CASE("ahp prints the reference weights") {
  const Run r = cesplan_cli({"ahp"});
  CHECK(r.code == 0);
  CHECK(r.out.find("loss   0.1111") != std::string::npos);
  CHECK(r.out.find("trade  0.4444") != std::string::npos);
  CHECK(r.out.find("invest 0.4444") != std::string::npos);
}

TEST_CASE("ahp file handling") {
  const fs::path dir = scratch("ahp");
  SUBCASE("fractions as strings") {
    std::ofstream(dir / "paper.json") << R"({"ahp": [[1, "1/4", "1/4"], [4, 1, 1], [4, 1, 1]]})";
    const Run r = cesplan_cli({"ahp", "--ahp-file", (dir / "paper.json").string()});
    CHECK(r.code == 0);
    CHECK(r.out.find("loss   0.1111") != std::string::npos);
  }
  SUBCASE("all ones gives equal weights") {
    std::ofstream(dir / "ones.json") << "[[1,1,1],[1,1,1],[1,1,1]]";
    const Run r = cesplan_cli({"ahp", "--ahp-file", (dir / "ones.json").string()});
    CHECK(r.code == 0);
    CHECK(r.out.find("loss   0.3333") != std::string::npos);
    CHECK(r.out.find("invest 0.3333") != std::string::npos);
  }
  SUBCASE("non-reciprocal matrix exits 4") {
    std::ofstream(dir / "bad.json") << "[[1,2,3],[2,1,1],[1,1,1]]";
    CHECK(cesplan_cli({"ahp", "--ahp-file", (dir / "bad.json").string()}).code == cli::kConfigError);
  }
  SUBCASE("malformed matrix exits 4") {
    std::ofstream(dir / "short.json") << "[[1,2],[0.5,1]]";
    CHECK(cesplan_cli({"ahp", "--ahp-file", (dir / "short.json").string()}).code == cli::kConfigError);
  }
  SUBCASE("missing file exits 3") {
    CHECK(cesplan_cli({"ahp", "--ahp-file", (dir / "none.json").string()}).code == cli::kIoError);
  }
}

TEST_CASE("usage errors exit 4") {
  CHECK(cesplan_cli({}).code == cli::kConfigError);
  CHECK(cesplan_cli({"frobnicate"}).code == cli::kConfigError);
  CHECK(cesplan_cli({"plan"}).code == cli::kConfigError);
  CHECK(cesplan_cli({"plan", "--scenario", fixture_dir().string(), "--weights", "1,1,1", "--ahp-file", "x.json"})
            .code == cli::kConfigError);
  CHECK(cesplan_cli({"plan", "--scenario", fixture_dir().string(), "--weights", "0,0,0"}).code ==
        cli::kConfigError);
  CHECK(cesplan_cli({"plan", "--scenario", fixture_dir().string(), "--fixed-location", "0"}).code ==
        cli::kConfigError);
}

TEST_CASE("plan writes its report and validates") {
  const fs::path& dir = planned_dir();
  CHECK(fs::exists(dir / "plan.json"));
  CHECK(fs::exists(dir / "leaderboard.csv"));
  CHECK(fs::exists(dir / "timeseries" / "storage.csv"));
  CHECK(fs::exists(dir / "timeseries" / "customer_grid.csv"));
  CHECK(fs::exists(dir / "timeseries" / "customer_ces.csv"));

  const json doc = json::parse(read_file(dir / "plan.json"));
  CHECK(doc["schema_version"] == 1);
  CHECK(doc["leaderboard"].size() == 7);
  CHECK(doc["schedule"]["customers"].size() == 30);
  CHECK(doc["percent_of_baseline"]["loss"].get<double>() > 0.0);

  std::istringstream board(read_file(dir / "leaderboard.csv"));
  std::string line;
  int rows = 0, selected = 0;
  std::getline(board, line);
  CHECK(line.rfind("schema_version,location,status,selected,", 0) == 0);
  while (std::getline(board, line)) {
    ++rows;
    if (line.find(",optimal,1,") != std::string::npos) ++selected;
  }
  CHECK(rows == 7);
  CHECK(selected == 1);

  const Run v = cesplan_cli(
      {"validate", "--scenario", fixture_dir().string(), "--plan", (dir / "plan.json").string(), "--out",
       dir.string()});
  CHECK(v.code == 0);
  CHECK(v.out.rfind("PASS", 0) == 0);
  CHECK(json::parse(read_file(dir / "validation.json"))["pass"] == true);
}

TEST_CASE("validate rejects a tampered state of charge") {
  json doc = json::parse(read_file(planned_dir() / "plan.json"));
  doc["schedule"]["energy_kwh"][5] = doc["schedule"]["energy_kwh"][5].get<double>() + 1.0;
  const fs::path dir = scratch("tampered");
  std::ofstream(dir / "plan.json") << doc.dump();
  const Run r = cesplan_cli({"validate", "--scenario", fixture_dir().string(), "--plan", (dir / "plan.json").string()});
  CHECK(r.code == cli::kValidationFailed);
  CHECK(r.out.find("soc_dynamics") != std::string::npos);
}

TEST_CASE("validate on a missing file exits 3") {
  CHECK(cesplan_cli({"validate", "--scenario", fixture_dir().string(), "--plan", "/nonexistent/plan.json"}).code ==
        cli::kIoError);
  CHECK(cesplan_cli({"baseline", "--scenario", "/nonexistent"}).code == cli::kIoError);
}

TEST_CASE("plan output is deterministic across runs") {
  const fs::path dir = scratch("plan_again");
  REQUIRE(cesplan_cli({"plan", "--scenario", fixture_dir().string(), "--out", dir.string(), "--threads", "3"}).code ==
          0);
  CHECK(read_file(dir / "plan.json") == read_file(planned_dir() / "plan.json"));
  CHECK(read_file(dir / "leaderboard.csv") == read_file(planned_dir() / "leaderboard.csv"));
  CHECK(read_file(dir / "timeseries" / "storage.csv") == read_file(planned_dir() / "timeseries" / "storage.csv"));
}

TEST_CASE("fixed location reports that single case") {
  const fs::path dir = scratch("fixed");
  const Run r = cesplan_cli({"plan", "--scenario", fixture_dir().string(), "--out", dir.string(), "--fixed-location",
                             "3", "--weights", "1/9,4/9,4/9", "--dump-qp", (dir / "qp.txt").string()});
  REQUIRE(r.code == 0);
  const json doc = json::parse(read_file(dir / "plan.json"));
  CHECK(doc["location"] == 3);
  CHECK(doc["leaderboard"].size() == 1);
  CHECK(doc["ahp"].is_null());
  CHECK(doc["weights"]["trade"].get<double>() == doctest::Approx(4.0 / 9.0));
  std::ifstream qp(dir / "qp.txt");
  CHECK_NOTHROW(read_qp(qp));

  // The global context is built from every candidate, so the weighted value
  // matches the full plan's entry for node 3.
  const json full = json::parse(read_file(planned_dir() / "plan.json"));
  for (const auto& e : full["leaderboard"]) {
    if (e["location"] == 3) {
      CHECK(doc["weighted_objective"].get<double>() ==
            doctest::Approx(e["weighted_objective"].get<double>()).epsilon(1e-6));
    }
  }
}

TEST_CASE("baseline command") {
  SUBCASE("fixture baseline is positive") {
    const fs::path dir = scratch("baseline");
    REQUIRE(cesplan_cli({"baseline", "--scenario", fixture_dir().string(), "--out", dir.string()}).code == 0);
    const json doc = json::parse(read_file(dir / "baseline.json"));
    CHECK(doc["objectives"]["loss_kwh"].get<double>() > 0.0);
    CHECK(doc["objectives"]["trade_aud"].get<double>() > 0.0);
  }
  SUBCASE("zero demand gives zero objectives") {
    Scenario sc = synthetic_fixture({.seed = 1, .days = 1});
    for (auto& c : sc.customers) {
      std::fill(c.p_load_kw.begin(), c.p_load_kw.end(), 0.0);
      std::fill(c.p_pv_kw.begin(), c.p_pv_kw.end(), 0.0);
    }
    const fs::path dir = scratch("zero");
    write_scenario(sc, dir / "in");
    REQUIRE(cesplan_cli({"baseline", "--scenario", (dir / "in").string(), "--out", dir.string()}).code == 0);
    const json doc = json::parse(read_file(dir / "baseline.json"));
    CHECK(doc["objectives"]["loss_kwh"].get<double>() == 0.0);
    CHECK(doc["objectives"]["trade_aud"].get<double>() == 0.0);
  }
}

TEST_CASE("infeasible scenarios exit 2") {
  const fs::path dir = scratch("infeasible");
  fs::copy(fixture_dir(), dir, fs::copy_options::recursive | fs::copy_options::overwrite_existing);
  json cfg = json::parse(read_file(dir / "config.json"));
  cfg["umin_pu"] = 0.9999;
  std::ofstream(dir / "config.json") << cfg.dump();
  const Run r = cesplan_cli({"plan", "--scenario", dir.string(), "--horizon", "24"});
  CHECK(r.code == cli::kInfeasible);
}
