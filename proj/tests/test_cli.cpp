#include "doctest.h"

#include <sys/wait.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

// Exercises the installed binary end to end: exit-status contract and
// byte-identical outputs for identical requests.

namespace {

std::string binary() { return DEMONFORGE_BIN; }

int run_cli(const std::string& args) {
  const std::string cmd = binary() + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  REQUIRE(status != -1);
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

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
          ("demonforge-cli-" + std::to_string(::getpid()));
    std::filesystem::create_directories(dir);
  }
  ~TempDir() { std::filesystem::remove_all(dir); }
  std::string path(const std::string& name) const { return (dir / name).string(); }
};

}  // namespace

TEST_CASE("exit codes: success, crash, violation") {
  TempDir tmp;
  CHECK(run_cli("demo szilard-qubit --output " + tmp.path("ok.txt")) == 0);
  // The report shows the saturating slack ln(1 + e^-20) ~ 2.06e-9.
  const std::string report = slurp(tmp.path("ok.txt"));
  CHECK(report.find("slack=2.0611536921677498e-09") != std::string::npos);
  CHECK(report.find("verdict: PASS") != std::string::npos);
  CHECK(run_cli("run --scenario /nonexistent/missing.json") == 1);
  CHECK(run_cli("demo nosuchdemo") == 1);
  // A negative tolerance demands strictly positive slack everywhere, which
  // the saturating demo cannot deliver: the audit reports a violation.
  CHECK(run_cli("demo szilard-qubit --tolerance -0.001") == 2);
}

TEST_CASE("identical requests produce byte-identical outputs") {
  TempDir tmp;
  for (const std::string format : {"csv", "jsonl"}) {
    const std::string a = tmp.path("a." + format);
    const std::string b = tmp.path("b." + format);
    CHECK(run_cli("demo bell-local --format " + format + " --output " + a) == 0);
    CHECK(run_cli("demo bell-local --format " + format + " --output " + b) == 0);
    CHECK(slurp(a) == slurp(b));
  }
  const std::string v1 = tmp.path("v1.csv");
  const std::string v2 = tmp.path("v2.csv");
  CHECK(run_cli("verify --trials 12 --seed 3 --format csv --output " + v1) == 0);
  CHECK(run_cli("verify --trials 12 --seed 3 --workers 4 --format csv --output " + v2) == 0);
  CHECK(slurp(v1) == slurp(v2));
}

TEST_CASE("demo export round-trips through the run command") {
  TempDir tmp;
  const std::string scenario = tmp.path("bell.json");
  const std::string a = tmp.path("direct.csv");
  const std::string b = tmp.path("loaded.csv");
  CHECK(run_cli("demo bell-local --export " + scenario + " --format csv --output " + a) == 0);
  CHECK(run_cli("run --scenario " + scenario + " --format csv --output " + b) == 0);
  CHECK(slurp(a) == slurp(b));
}

TEST_CASE("verify exits with the violation status on an impossible tolerance") {
  CHECK(run_cli("verify --trials 5 --seed 1 --tolerance -0.5") == 2);
}

TEST_CASE("sweep writes plot-ready csv") {
  TempDir tmp;
  const std::string out = tmp.path("sweep.csv");
  CHECK(run_cli("sweep --demo szilard-qubit --axis gap --grid 1,5,10,20 --format csv --output " +
                out) == 0);
  const std::string csv = slurp(out);
  CHECK(csv.find("axis,axis_value,record") == 0);
  CHECK(csv.find("\ngap,1,") != std::string::npos);
  CHECK(csv.find("\ngap,20,") != std::string::npos);
}
