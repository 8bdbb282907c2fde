#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "olfc/experiments.hpp"
#include "olfc/scenario.hpp"

using namespace olfc;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

/// Value of a "key: value" line in a report.
std::string report_value(const std::string& text, const std::string& key) {
  const std::string needle = key + ": ";
  const size_t at = text.find(needle);
  REQUIRE(at != std::string::npos);
  const size_t end = text.find('\n', at);
  return text.substr(at + needle.size(), end - at - needle.size());
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("experiment names are addressable like presets") {
  CHECK(is_experiment("coupling-comparison"));
  CHECK(is_experiment("damping-sweep"));
  CHECK(!is_experiment("two-bus"));
  CHECK(!experiment_names().empty());
}

TEST_CASE("a single run writes the full artifact set") {
  TempDir tmp("olfc-test-single");
  RunConfig config;
  config.preset = "two-bus";
  config.out_dir = tmp.path.string();
  config.label = "a";
  std::ostringstream log;
  CHECK(run_experiment(config, log) == 0);

  const fs::path dir = tmp.path / "two-bus" / "a";
  CHECK(fs::exists(dir / "trajectory.csv"));
  CHECK(fs::exists(dir / "oracle.csv"));
  CHECK(fs::exists(dir / "scenario.resolved"));
  REQUIRE(fs::exists(dir / "report.txt"));

  const std::string report = slurp(dir / "report.txt");
  CHECK(report_value(report, "oracle_file") == "oracle.csv");
  CHECK(report_value(report, "converged") == "yes");
  CHECK(report.find("tail_max_abs_omega_hz:") != std::string::npos);
  CHECK(report.find("d_update_omega_weight:") != std::string::npos);
  CHECK(report_value(report, "lyapunov_reference") == "oracle");

  // The resolved scenario reproduces the run it documents.
  const Scenario resolved = parse_scenario(slurp(dir / "scenario.resolved"));
  CHECK(resolved.name == "two-bus");
  CHECK_NOTHROW(resolved.validate());

  const std::string trajectory = slurp(dir / "trajectory.csv");
  CHECK(trajectory.find("time") == 0);  // header row first
  CHECK(trajectory.find("omega.1") != std::string::npos);
  CHECK(trajectory.find("P.1-2") != std::string::npos);
}

TEST_CASE("identical configurations produce byte-identical artifacts") {
  TempDir tmp("olfc-test-repro");
  std::ostringstream log;
  for (const char* label : {"a", "b"}) {
    RunConfig config;
    config.preset = "two-bus";
    config.out_dir = tmp.path.string();
    config.label = label;
    CHECK(run_experiment(config, log) == 0);
  }
  const fs::path root = tmp.path / "two-bus";
  CHECK(slurp(root / "a" / "trajectory.csv") == slurp(root / "b" / "trajectory.csv"));
  CHECK(slurp(root / "a" / "oracle.csv") == slurp(root / "b" / "oracle.csv"));
  CHECK(slurp(root / "a" / "scenario.resolved") == slurp(root / "b" / "scenario.resolved"));
}

TEST_CASE("a custom scenario file with no disturbances stays flat") {
  TempDir tmp("olfc-test-flat");
  Scenario scenario = preset_scenario("two-bus");
  scenario.disturbances.clear();
  scenario.integrator.duration = 2.0;
  const fs::path file = tmp.path / "flat.json";
  fs::create_directories(tmp.path);
  {
    std::ofstream out(file, std::ios::binary);
    out << scenario_to_json(scenario);
  }
  RunConfig config;
  config.scenario_path = file.string();
  config.out_dir = (tmp.path / "runs").string();
  config.label = "r";
  std::ostringstream log;
  CHECK(run_experiment(config, log) == 0);
  const std::string report = slurp(tmp.path / "runs" / "two-bus" / "r" / "report.txt");
  CHECK(std::stod(report_value(report, "tail_max_abs_omega")) <= 1e-12);
}

TEST_CASE("the decimate override must be positive") {
  RunConfig config;
  config.preset = "two-bus";
  config.decimate = 0;
  std::ostringstream log;
  CHECK_THROWS_AS(run_experiment(config, log), ValidationError);
}

TEST_CASE("the comparison study reports the coupling gap") {
  TempDir tmp("olfc-test-coupling");
  RunConfig config;
  config.preset = "coupling-comparison";
  config.out_dir = tmp.path.string();
  config.label = "c";
  std::ostringstream log;
  CHECK(run_experiment(config, log) == 0);

  const fs::path root = tmp.path / "coupling-comparison" / "c";
  REQUIRE(fs::exists(root / "comparison.txt"));
  const std::string cmp = slurp(root / "comparison.txt");
  CHECK(report_value(cmp, "without_chp_converged") == "yes");
  CHECK(report_value(cmp, "with_chp_converged") == "yes");
  const double off_violation = std::stod(report_value(cmp, "without_chp_coupling_violation"));
  const double on_violation = std::stod(report_value(cmp, "with_chp_coupling_violation"));
  CHECK(off_violation > 0.0);
  CHECK(on_violation <= 1e-3);
  CHECK(fs::exists(root / "without-chp" / "report.txt"));
  CHECK(fs::exists(root / "with-chp" / "report.txt"));
}
