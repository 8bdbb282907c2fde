#include "olfc/experiments.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "olfc/oracle.hpp"

namespace olfc {

namespace fs = std::filesystem;

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

std::string fmt4(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

std::string yes_no(bool b) { return b ? "yes" : "no"; }

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(path.string() + ": cannot open for writing");
  return out;
}

void make_dirs(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError(dir.string() + ": " + ec.message());
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out = open_out(path);
  out << text;
  if (!out) throw IoError(path.string() + ": write failed");
}

std::string utc_label() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y%m%d-%H%M%SZ", &tm);
  return buf;
}

}  // namespace

void write_trajectory_csv(const std::string& path, const RunResult& run,
                          const Scenario& scenario) {
  const OlfcProblem& problem = scenario.problem;
  const NetworkTopology& topo = problem.topology;
  const int n = problem.bus_count();
  const int m = problem.line_count();

  std::ofstream out = open_out(path);
  std::ostringstream header;
  header << "time";
  for (int i = 0; i < n; ++i) header << ",omega." << topo.bus_id(i);
  for (int l = 0; l < m; ++l) header << ",P." << topo.line_label(l);
  for (int i = 0; i < n; ++i)
    if (problem.controllable[static_cast<size_t>(i)]) header << ",d." << topo.bus_id(i);
  for (int i = 0; i < n; ++i)
    if (problem.heat_load[static_cast<size_t>(i)])
      header << ",q." << topo.bus_id(i) << ",Qv." << topo.bus_id(i);
  for (int i = 0; i < n; ++i) header << ",phi." << topo.bus_id(i);
  for (int i = 0; i < n; ++i) header << ",r." << topo.bus_id(i);
  for (int i = 0; i < n; ++i) header << ",mu." << topo.bus_id(i);
  for (int i = 0; i < n; ++i)
    if (problem.controllable[static_cast<size_t>(i)])
      header << ",gamma_lo." << topo.bus_id(i) << ",gamma_hi." << topo.bus_id(i);
  for (int i = 0; i < n; ++i)
    if (problem.heat_load[static_cast<size_t>(i)])
      header << ",delta_lo." << topo.bus_id(i) << ",delta_hi." << topo.bus_id(i);
  for (int i = 0; i < n; ++i) {
    const ChpRegion& region = problem.chp[static_cast<size_t>(i)];
    for (size_t kidx = 0; kidx < region.upper.size(); ++kidx)
      header << ",zeta_up." << topo.bus_id(i) << "." << kidx;
    for (size_t kidx = 0; kidx < region.lower.size(); ++kidx)
      header << ",zeta_dn." << topo.bus_id(i) << "." << kidx;
  }
  for (int l = 0; l < m; ++l)
    header << ",sigma_lo." << topo.line_label(l) << ",sigma_hi." << topo.line_label(l);
  header << ",U,objective,chp_violation,bound_violation";
  out << header.str() << "\n";

  for (const TrajectorySample& s : run.samples) {
    std::ostringstream row;
    row << fmt(s.time);
    for (int i = 0; i < n; ++i) row << "," << fmt(s.omega(i));
    for (int l = 0; l < m; ++l) row << "," << fmt(s.line_flow(l));
    for (int i = 0; i < n; ++i)
      if (problem.controllable[static_cast<size_t>(i)]) row << "," << fmt(s.ctrl.d(i));
    for (int i = 0; i < n; ++i)
      if (problem.heat_load[static_cast<size_t>(i)])
        row << "," << fmt(s.ctrl.q(i)) << "," << fmt(s.heat_buffer(i));
    for (int i = 0; i < n; ++i) row << "," << fmt(s.ctrl.phi(i));
    for (int i = 0; i < n; ++i) row << "," << fmt(s.ctrl.r(i));
    for (int i = 0; i < n; ++i) row << "," << fmt(s.mu(i));
    for (int i = 0; i < n; ++i)
      if (problem.controllable[static_cast<size_t>(i)])
        row << "," << fmt(s.ctrl.gamma_lo(i)) << "," << fmt(s.ctrl.gamma_hi(i));
    for (int i = 0; i < n; ++i)
      if (problem.heat_load[static_cast<size_t>(i)])
        row << "," << fmt(s.ctrl.delta_lo(i)) << "," << fmt(s.ctrl.delta_hi(i));
    for (int i = 0; i < n; ++i) {
      const size_t si = static_cast<size_t>(i);
      for (long kidx = 0; kidx < s.ctrl.zeta_up[si].size(); ++kidx)
        row << "," << fmt(s.ctrl.zeta_up[si](kidx));
      for (long kidx = 0; kidx < s.ctrl.zeta_dn[si].size(); ++kidx)
        row << "," << fmt(s.ctrl.zeta_dn[si](kidx));
    }
    for (int l = 0; l < m; ++l)
      row << "," << fmt(s.ctrl.sigma_lo(l)) << "," << fmt(s.ctrl.sigma_hi(l));
    row << "," << fmt(s.lyapunov) << "," << fmt(s.objective) << "," << fmt(s.chp_violation)
        << "," << fmt(s.bound_violation);
    out << row.str() << "\n";
  }
  if (!out) throw IoError(path + ": write failed");
}

void write_solution_csv(const std::string& path, const OlfcSolution& sol,
                        const OlfcProblem& problem) {
  const NetworkTopology& topo = problem.topology;
  std::ofstream out = open_out(path);
  out << "kind,id,variable,value\n";
  out << "meta,,objective," << fmt(sol.objective) << "\n";
  for (int i = 0; i < problem.bus_count(); ++i) {
    const size_t si = static_cast<size_t>(i);
    const BusId id = topo.bus_id(i);
    auto bus_row = [&](const char* variable, double value) {
      out << "bus," << id << "," << variable << "," << fmt(value) << "\n";
    };
    bus_row("omega", sol.omega(i));
    bus_row("lambda", sol.lambda(i));
    bus_row("mu", sol.mu(i));
    bus_row("phi", sol.phi(i));
    if (problem.controllable[si]) {
      bus_row("d", sol.d(i));
      bus_row("gamma_lo", sol.gamma_lo(i));
      bus_row("gamma_hi", sol.gamma_hi(i));
    }
    if (problem.heat_load[si]) {
      bus_row("q", sol.q(i));
      bus_row("delta_lo", sol.delta_lo(i));
      bus_row("delta_hi", sol.delta_hi(i));
    }
    for (long kidx = 0; kidx < sol.zeta_up[si].size(); ++kidx)
      bus_row(("zeta_up." + std::to_string(kidx)).c_str(), sol.zeta_up[si](kidx));
    for (long kidx = 0; kidx < sol.zeta_dn[si].size(); ++kidx)
      bus_row(("zeta_dn." + std::to_string(kidx)).c_str(), sol.zeta_dn[si](kidx));
  }
  for (int l = 0; l < problem.line_count(); ++l) {
    const std::string label = topo.line_label(l);
    auto line_row = [&](const char* variable, double value) {
      out << "line," << label << "," << variable << "," << fmt(value) << "\n";
    };
    line_row("virtual_flow", sol.virtual_flow(l));
    line_row("line_flow", sol.line_flow(l));
    line_row("sigma_lo", sol.sigma_lo(l));
    line_row("sigma_hi", sol.sigma_hi(l));
  }
  if (!out) throw IoError(path + ": write failed");
}

std::string format_report(const SteadyStateReport& report, const Scenario& scenario,
                          const RunResult& run, const EquilibriumPoint& target,
                          const std::string& oracle_file) {
  std::ostringstream out;
  out << "scenario: " << scenario.name << "\n";
  out << "integrator: "
      << (scenario.integrator.method == IntegratorConfig::Method::kEuler ? "euler" : "rk4")
      << "\n";
  out << "step: " << fmt(scenario.integrator.step) << "\n";
  out << "duration: " << fmt(scenario.integrator.duration) << "\n";
  out << "steps: " << run.steps << "\n";
  if (scenario.comm.ideal()) {
    out << "comm: ideal\n";
  } else {
    out << "comm: delay_rounds=" << scenario.comm.delay_rounds
        << " drop_probability=" << fmt(scenario.comm.drop_probability)
        << " replay_on_drop=" << yes_no(scenario.comm.replay_on_drop)
        << " seed=" << scenario.comm.seed << "\n";
  }
  out << "chp_enforced: " << yes_no(scenario.chp_enforced) << "\n";
  out << "instantaneous_primal: " << yes_no(scenario.instantaneous_primal) << "\n";
  out << "d_update_omega_weight: (eps_lambda + eps_mu) / eps_lambda at generator buses,"
         " 1 at load buses\n";
  out << "outcome: completed\n";
  out << "converged: " << yes_no(report.converged) << "\n";
  out << "tail_max_abs_omega: " << fmt(report.tail_max_omega) << "\n";
  out << "tail_max_abs_omega_hz: " << fmt(report.tail_max_omega / kTwoPi) << "\n";
  out << "settled: " << yes_no(report.settled) << "\n";
  out << "settling_time: " << fmt(report.settling_time) << "\n";
  out << "primal_distance_to_oracle: " << fmt(report.primal_distance) << "\n";
  out << "oracle_file: " << oracle_file << "\n";
  out << "oracle_objective: " << fmt(report.oracle_objective) << "\n";
  out << "final_objective: " << fmt(report.final_objective) << "\n";
  out << "oracle_degenerate: " << yes_no(target.degenerate) << "\n";
  out << "kkt_stationarity: " << fmt(report.kkt.stationarity) << "\n";
  out << "kkt_primal: " << fmt(report.kkt.primal) << "\n";
  out << "kkt_dual: " << fmt(report.kkt.dual) << "\n";
  out << "kkt_complementarity: " << fmt(report.kkt.complementarity) << "\n";
  out << "chp_violation: " << fmt4(report.chp_violation) << "\n";
  out << "d_bound_violation: " << fmt(report.d_bound_violation) << "\n";
  out << "buffer_violation: " << fmt(report.buffer_violation) << "\n";
  out << "line_bound_violation: " << fmt(report.line_bound_violation) << "\n";
  out << "absorption_residual: " << fmt(report.absorption_residual) << "\n";
  out << "component_balance_residual: " << fmt(report.component_balance) << "\n";
  out << "lyapunov_reference: " << report.u_reference << "\n";
  out << "lyapunov_checked_steps: " << report.u_checked_steps << "\n";
  out << "lyapunov_violations: " << report.u_violations << "\n";
  out << "lyapunov_max_rise: " << fmt(report.u_max_rise) << "\n";
  out << "lyapunov_final: " << fmt(run.u_final) << "\n";
  out << "min_multiplier_pre_clamp: " << fmt(run.min_multiplier_pre_clamp) << "\n";
  out << "multiplier_clamped_total: " << fmt(run.clamped_total) << "\n";
  return out.str();
}

namespace {

struct RunOutcome {
  int code = 0;
  bool blew_up = false;
  double blowup_time = std::numeric_limits<double>::quiet_NaN();
  RunResult run;
  SteadyStateReport report;
  OlfcSolution oracle;
};

RunOutcome execute_single(const Scenario& scenario, const fs::path& dir, std::ostream& log) {
  make_dirs(dir);
  write_text(dir / "scenario.resolved", scenario_to_json(scenario));

  RunOutcome outcome;
  const OlfcProblem oracle_problem = scenario.oracle_problem();
  outcome.oracle = centralized_solve(oracle_problem);
  write_solution_csv((dir / "oracle.csv").string(), outcome.oracle, oracle_problem);

  const EquilibriumPoint target =
      EquilibriumPoint::from_solution(oracle_problem, outcome.oracle, scenario.gains);

  try {
    outcome.run = simulate(scenario, &target);
  } catch (const NumericalBlowup& blowup) {
    outcome.blew_up = true;
    outcome.blowup_time = blowup.time;
    outcome.code = 2;
    std::ostringstream report;
    report << "scenario: " << scenario.name << "\n";
    report << "outcome: blowup\n";
    report << "blowup_time: " << fmt(blowup.time) << "\n";
    report << "oracle_file: oracle.csv\n";
    write_text(dir / "report.txt", report.str());
    log << scenario.name << ": diverged at t = " << fmt(blowup.time) << " s\n";
    return outcome;
  }

  outcome.report = steady_state_report(outcome.run, scenario, outcome.oracle, &target);
  write_trajectory_csv((dir / "trajectory.csv").string(), outcome.run, scenario);
  write_text(dir / "report.txt",
             format_report(outcome.report, scenario, outcome.run, target, "oracle.csv"));
  log << scenario.name << ": " << (outcome.report.converged ? "converged" : "did not converge")
      << ", tail max |omega| = " << fmt(outcome.report.tail_max_omega)
      << ", distance to optimum = " << fmt(outcome.report.primal_distance) << "\n";
  return outcome;
}

void apply_overrides(Scenario& scenario, const RunConfig& config) {
  if (config.seed) scenario.comm.seed = *config.seed;
  if (config.decimate) {
    if (*config.decimate < 1) throw ValidationError({"--decimate must be >= 1"});
    scenario.decimate = *config.decimate;
  }
}

int run_coupling_comparison(const RunConfig& config, const fs::path& root, std::ostream& log) {
  Scenario base = preset_scenario("paper-bus3");
  apply_overrides(base, config);
  make_dirs(root);

  Scenario without = base;
  without.chp_enforced = false;
  Scenario with = base;
  with.chp_enforced = true;

  log << "coupling-comparison: controller without the heat-power coupling\n";
  RunOutcome off = execute_single(without, root / "without-chp", log);
  log << "coupling-comparison: controller with the heat-power coupling\n";
  RunOutcome on = execute_single(with, root / "with-chp", log);
  if (off.blew_up || on.blew_up) return 2;

  const OlfcProblem& problem = base.problem;
  const NetworkTopology& topo = problem.topology;
  const double off_violation =
      problem.chp_violation(off.run.final_ctrl.d, off.run.final_ctrl.q);
  const double on_violation = problem.chp_violation(on.run.final_ctrl.d, on.run.final_ctrl.q);

  std::ostringstream out;
  out << "experiment: coupling-comparison\n";
  out << "scenario: " << base.name << "\n";
  out << "runs: without-chp, with-chp (full artifacts in the matching subdirectories)\n";
  out << "oracle_files: without-chp/oracle.csv, with-chp/oracle.csv\n";
  out << "without_chp_converged: " << yes_no(off.report.converged) << "\n";
  out << "with_chp_converged: " << yes_no(on.report.converged) << "\n";
  out << "without_chp_objective: " << fmt(off.report.final_objective) << "\n";
  out << "with_chp_objective: " << fmt(on.report.final_objective) << "\n";
  out << "without_chp_coupling_violation: " << fmt4(off_violation) << "\n";
  out << "with_chp_coupling_violation: " << fmt4(on_violation) << "\n";
  for (int i = 0; i < problem.bus_count(); ++i) {
    if (!problem.controllable[static_cast<size_t>(i)]) continue;
    out << "shift_d." << topo.bus_id(i) << ": "
        << fmt(on.run.final_ctrl.d(i) - off.run.final_ctrl.d(i)) << "\n";
  }
  for (int i = 0; i < problem.bus_count(); ++i) {
    if (!problem.heat_load[static_cast<size_t>(i)]) continue;
    out << "shift_q." << topo.bus_id(i) << ": "
        << fmt(on.run.final_ctrl.q(i) - off.run.final_ctrl.q(i)) << "\n";
  }
  write_text(root / "comparison.txt", out.str());
  log << "coupling-comparison: steady state without coupling violates it by "
      << fmt4(off_violation) << "\n";
  return 0;
}

int run_damping_sweep(const RunConfig& config, const fs::path& root, std::ostream& log) {
  Scenario base = preset_scenario("paper-bus3");
  apply_overrides(base, config);
  // The k = 0.1 runs settle an order of magnitude slower than the nominal
  // preset horizon; give every row the same long horizon so verdicts compare
  // the dynamics, not the cutoff.
  base.integrator.duration = 300.0;
  make_dirs(root);
  write_text(root / "scenario.resolved", scenario_to_json(base));

  const std::vector<double> k_values = {0.1, 0.3, 1.0, 3.0, 10.0, 100.0};

  double lipschitz = 0.0;
  for (int i = 0; i < base.problem.bus_count(); ++i) {
    const size_t si = static_cast<size_t>(i);
    if (base.problem.controllable[si]) lipschitz = std::max(lipschitz, base.problem.cost_e[si].a);
    if (base.problem.heat_load[si]) lipschitz = std::max(lipschitz, base.problem.cost_h[si].a);
  }
  const auto interval = robustness_interval(lipschitz, base.problem.phys.damping.minCoeff());

  std::ostringstream out;
  out << "experiment: damping-sweep\n";
  out << "scenario: " << base.name << "\n";
  out << "duration: " << fmt(base.integrator.duration) << "\n";
  out << "k_values:";
  for (double k : k_values) out << " " << fmt(k);
  out << "\n";
  out << "damping_model: scaled (controller runs with k * D)\n";
  out << "guaranteed_additive_error_interval: (" << fmt(interval.first) << ", "
      << fmt(interval.second) << ")\n";
  out << "modes: dynamic (per-preset update laws, coupling enforced, oracle-with-chp.csv),"
         " instantaneous (d and q track their stationarity conditions, coupling off,"
         " oracle-without-chp.csv)\n";
  out << "columns: mode k verdict tail_max_abs_omega settling_time primal_distance"
         " within_guarantee u_violations u_checked_steps peak_abs_omega blowup_time\n";

  bool supported_range_blowup = false;
  for (const bool instantaneous : {false, true}) {
    Scenario mode = base;
    mode.instantaneous_primal = instantaneous;
    mode.chp_enforced = !instantaneous;
    const char* tag = instantaneous ? "instantaneous" : "dynamic";
    const OlfcProblem oracle_problem = mode.oracle_problem();
    const OlfcSolution oracle = centralized_solve(oracle_problem);
    const char* oracle_file = instantaneous ? "oracle-without-chp.csv" : "oracle-with-chp.csv";
    write_solution_csv((root / oracle_file).string(), oracle, oracle_problem);
    log << "damping-sweep: running " << k_values.size() << " scales, " << tag << " mode\n";
    const std::vector<SweepEntry> entries = sweep(mode, k_values, config.jobs);
    for (const SweepEntry& entry : entries) {
      out << tag << " " << fmt(entry.k) << " " << entry.verdict << " "
          << fmt(entry.tail_max_omega) << " " << fmt(entry.settling_time) << " "
          << fmt(entry.primal_distance) << " " << yes_no(entry.within_guarantee) << " "
          << entry.u_violations << " " << entry.u_checked_steps << " "
          << fmt(entry.peak_abs_omega) << " "
          << (std::isnan(entry.blowup_time) ? std::string("-") : fmt(entry.blowup_time)) << "\n";
      if (entry.verdict == "unstable" && entry.k >= 0.1 && entry.k <= 10.0)
        supported_range_blowup = true;
      log << "damping-sweep: " << tag << " k = " << fmt(entry.k) << " -> " << entry.verdict
          << "\n";
    }
  }
  write_text(root / "sweep.txt", out.str());
  return supported_range_blowup ? 2 : 0;
}

}  // namespace

std::vector<std::string> experiment_names() { return {"coupling-comparison", "damping-sweep"}; }

bool is_experiment(const std::string& name) {
  for (const std::string& known : experiment_names())
    if (known == name) return true;
  return false;
}

int run_experiment(const RunConfig& config, std::ostream& log) {
  if (!config.scenario_path.empty() && !config.preset.empty())
    throw ValidationError({"--scenario and --preset are mutually exclusive"});
  if (config.scenario_path.empty() && config.preset.empty())
    throw ValidationError({"one of --scenario or --preset is required"});
  if (config.jobs < 1) throw ValidationError({"--jobs must be >= 1"});

  const std::string label = config.label.empty() ? utc_label() : config.label;

  if (is_experiment(config.preset)) {
    const fs::path root = fs::path(config.out_dir) / config.preset / label;
    const int code = config.preset == "coupling-comparison"
                         ? run_coupling_comparison(config, root, log)
                         : run_damping_sweep(config, root, log);
    log << "artifacts: " << root.string() << "\n";
    return code;
  }

  Scenario scenario =
      config.preset.empty() ? load_scenario(config.scenario_path) : preset_scenario(config.preset);
  apply_overrides(scenario, config);
  const fs::path root = fs::path(config.out_dir) /
                        (config.preset.empty() ? scenario.name : config.preset) / label;
  const RunOutcome outcome = execute_single(scenario, root, log);
  log << "artifacts: " << root.string() << "\n";
  return outcome.code;
}

}  // namespace olfc
