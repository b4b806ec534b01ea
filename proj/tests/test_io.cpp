#include "demonforge/io.hpp"

#include "demonforge/demos.hpp"
#include "doctest.h"
#include "test_util.hpp"

#include <nlohmann/json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>

using namespace demonforge;
using namespace testutil;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

struct TempDir {
  std::filesystem::path dir;
  TempDir() {
    dir = std::filesystem::temp_directory_path() /
          ("demonforge-test-" + std::to_string(::getpid()));
    std::filesystem::create_directories(dir);
  }
  ~TempDir() { std::filesystem::remove_all(dir); }
  std::string path(const std::string& name) const { return (dir / name).string(); }
};

}  // namespace

TEST_CASE("scenario files round-trip bit-exactly") {
  TempDir tmp;
  for (const auto& name : demos::names()) {
    const Scenario s = demos::by_name(name, 1.0, 20.0, M_PI / 3.0);
    const std::string first = tmp.path(name + ".json");
    const std::string second = tmp.path(name + "-2.json");
    io::save_scenario(s, first);
    const Scenario loaded = io::load_scenario(first);
    io::save_scenario(loaded, second);
    CHECK(slurp(first) == slurp(second));
    // The reloaded scenario behaves identically.
    const auto a = run_protocol(s);
    const auto b = run_protocol(loaded);
    CHECK(a.w_net == doctest::Approx(b.w_net).epsilon(1e-15));
    CHECK(a.i_ab == doctest::Approx(b.i_ab).epsilon(1e-15));
  }
}

TEST_CASE("explicit-erasure scenarios survive the round trip") {
  TempDir tmp;
  const Scenario s = demos::finite_bath_erasure(1.0, 20.0);
  io::save_scenario(s, tmp.path("bath.json"));
  const Scenario loaded = io::load_scenario(tmp.path("bath.json"));
  const auto a = run_protocol(s);
  const auto b = run_protocol(loaded);
  CHECK(a.w_m_ers == doctest::Approx(b.w_m_ers).epsilon(1e-15));
  CHECK(a.sigma_m_ers == doctest::Approx(b.sigma_m_ers).epsilon(1e-15));
}

TEST_CASE("loading reports the offending field path") {
  TempDir tmp;
  const Scenario good = demos::bell_local(1.0, 5.0);
  nlohmann::json j = io::scenario_to_json(good);

  SUBCASE("non-unit-trace initial state") {
    j["initial_state"] = {{"recipe", "explicit"},
                          {"matrix", io::matrix_to_json(ComplexMatrix::Identity(4, 4))}};
    io::write_atomic(tmp.path("bad.json"), j.dump());
    try {
      (void)io::load_scenario(tmp.path("bad.json"));
      FAIL("expected a scenario error");
    } catch (const io::ScenarioError& e) {
      CHECK(e.path().find("initial_state") != std::string::npos);
    }
  }
  SUBCASE("incomplete Kraus family") {
    ComplexMatrix half = 0.7 * ComplexMatrix::Identity(2, 2);
    j["measurement"] = {{"type", "kraus"},
                        {"outcomes", nlohmann::json::array({nlohmann::json{
                                         {"label", 0},
                                         {"operators", nlohmann::json::array(
                                                           {io::matrix_to_json(half)})}}})}};
    io::write_atomic(tmp.path("bad.json"), j.dump());
    try {
      (void)io::load_scenario(tmp.path("bad.json"));
      FAIL("expected a scenario error");
    } catch (const io::ScenarioError& e) {
      CHECK(e.path().find("measurement") != std::string::npos);
    }
  }
  SUBCASE("non-Hermitian Hamiltonian") {
    nlohmann::json m = nlohmann::json::array();
    m.push_back(nlohmann::json::array({nlohmann::json::array({0.0, 0.0}),
                                       nlohmann::json::array({1.0, 0.0})}));
    m.push_back(nlohmann::json::array({nlohmann::json::array({2.0, 0.0}),
                                       nlohmann::json::array({0.0, 0.0})}));
    j["hamiltonians"]["a_initial"] = m;
    io::write_atomic(tmp.path("bad.json"), j.dump());
    try {
      (void)io::load_scenario(tmp.path("bad.json"));
      FAIL("expected a scenario error");
    } catch (const io::ScenarioError& e) {
      CHECK(e.path().find("a_initial") != std::string::npos);
    }
  }
  SUBCASE("malformed matrix literal") {
    j["hamiltonians"]["a_initial"] = nlohmann::json::array({1, 2, 3});
    io::write_atomic(tmp.path("bad.json"), j.dump());
    CHECK_THROWS_AS((void)io::load_scenario(tmp.path("bad.json")), io::ScenarioError);
  }
  SUBCASE("missing field") {
    j.erase("beta");
    io::write_atomic(tmp.path("bad.json"), j.dump());
    try {
      (void)io::load_scenario(tmp.path("bad.json"));
      FAIL("expected a scenario error");
    } catch (const io::ScenarioError& e) {
      CHECK(e.path() == "$.beta");
    }
  }
}

TEST_CASE("unitaries can be given as Hermitian generator literals") {
  TempDir tmp;
  nlohmann::json j = io::scenario_to_json(demos::bell_local(1.0, 5.0));
  // Replace the flip on outcome 1 with its generator: exp(-i pi/2 (X - 1))
  // equals X up to phase; any generator whose exponential is a flip works.
  nlohmann::json gen = nlohmann::json::array();
  gen.push_back(nlohmann::json::array({nlohmann::json::array({M_PI / 2.0, 0.0}),
                                       nlohmann::json::array({-M_PI / 2.0, 0.0})}));
  gen.push_back(nlohmann::json::array({nlohmann::json::array({-M_PI / 2.0, 0.0}),
                                       nlohmann::json::array({M_PI / 2.0, 0.0})}));
  auto& entry = j["feedback"]["entries"][1];
  entry.erase("unitary_a");
  entry["generator_a"] = gen;
  io::write_atomic(tmp.path("gen.json"), j.dump());
  const Scenario loaded = io::load_scenario(tmp.path("gen.json"));
  // exp(-i G) with G = (pi/2)(I - X) maps |1> to |0> up to a global phase.
  const auto ledger = run_protocol(loaded);
  const auto baseline = run_protocol(demos::bell_local(1.0, 5.0));
  CHECK(ledger.w_a_ext == doctest::Approx(baseline.w_a_ext).epsilon(1e-10));
  CHECK(ledger.sigma_a_ext == doctest::Approx(baseline.sigma_a_ext).epsilon(1e-9));

  SUBCASE("giving both forms is rejected") {
    entry["unitary_a"] = io::matrix_to_json(ComplexMatrix::Identity(2, 2));
    io::write_atomic(tmp.path("both.json"), j.dump());
    CHECK_THROWS_AS((void)io::load_scenario(tmp.path("both.json")), io::ScenarioError);
  }
}

TEST_CASE("matrix literals accept plain reals and [re, im] pairs") {
  nlohmann::json j = nlohmann::json::parse("[[0, [0, -1]], [[0, 1], 0]]");
  const ComplexMatrix m = io::matrix_from_json(j, "$");
  CHECK(m(0, 1) == Complex(0, -1));
  CHECK(m(1, 0) == Complex(0, 1));
  CHECK(m(0, 0) == Complex(0, 0));
}

TEST_CASE("reports are deterministic") {
  const auto ledger = run_protocol(demos::bell_local(1.0, 20.0));
  const auto records = evaluate(ledger);
  io::ReportOptions plain;
  CHECK(io::run_report(ledger, records, plain) == io::run_report(ledger, records, plain));
  CHECK(io::run_csv(ledger, records) == io::run_csv(ledger, records));
  CHECK(io::run_jsonl(ledger, records) == io::run_jsonl(ledger, records));
  // CSV carries one row per record plus the header.
  const std::string csv = io::run_csv(ledger, records);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 16);
}

TEST_CASE("optimize directive round-trips") {
  TempDir tmp;
  Scenario s = demos::bell_local(1.0, 20.0);
  OptimizeDirective d;
  d.objective = "slack:e";
  d.budget = 5000;
  d.restarts = 8;
  d.seed = 1;
  d.free_slots = {"a:0", "b:0", "a:1", "b:1"};
  s.optimize = d;
  io::save_scenario(s, tmp.path("opt.json"));
  const Scenario loaded = io::load_scenario(tmp.path("opt.json"));
  REQUIRE(loaded.optimize.has_value());
  CHECK(loaded.optimize->objective == "slack:e");
  CHECK(loaded.optimize->free_slots.size() == 4);
}

TEST_CASE("atomic writes replace, never truncate in place") {
  TempDir tmp;
  const std::string path = tmp.path("report.txt");
  io::write_atomic(path, "first\n");
  io::write_atomic(path, "second\n");
  CHECK(slurp(path) == "second\n");
  CHECK_FALSE(std::filesystem::exists(path + ".tmp"));
}
