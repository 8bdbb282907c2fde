#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "olfc/scenario.hpp"

namespace olfc {

/// Failure to read or write an artifact on disk.
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// One row per recorded sample; per-bus and per-line columns are labeled with
/// bus ids and "from-to" line labels. Formatting is locale-free and fixed, so
/// identical runs produce identical bytes.
void write_trajectory_csv(const std::string& path, const RunResult& run,
                          const Scenario& scenario);

/// Flat CSV (kind,id,variable,value) of a centralized solution; only the
/// variables that are live at each bus or line appear.
void write_solution_csv(const std::string& path, const OlfcSolution& sol,
                        const OlfcProblem& problem);

/// Plain "key: value" run summary. `oracle_file` names the solution CSV the
/// distances in the report were measured against.
std::string format_report(const SteadyStateReport& report, const Scenario& scenario,
                          const RunResult& run, const EquilibriumPoint& target,
                          const std::string& oracle_file);

struct RunConfig {
  std::string scenario_path;  // file to load; exclusive with `preset`
  std::string preset;         // scenario preset or experiment name
  std::string out_dir = "runs";
  std::string label;  // output subdirectory; a UTC timestamp when empty
  int jobs = 1;
  std::optional<std::uint64_t> seed;  // overrides the scenario's comm seed
  std::optional<int> decimate;
};

/// Multi-run studies addressable through --preset.
std::vector<std::string> experiment_names();
bool is_experiment(const std::string& name);

/// Executes one closed-loop run or a named experiment and writes every
/// artifact under out_dir/<name>/<label>/. Progress goes to `log`. Returns
/// the process exit code: 0 on success, 2 when a run diverged (for sweeps,
/// only divergence inside the supported damping-error range counts).
int run_experiment(const RunConfig& config, std::ostream& log);

}  // namespace olfc
