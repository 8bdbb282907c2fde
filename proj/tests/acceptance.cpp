// Release gate: every criterion prints exactly one PASS/FAIL line with the
// measured numbers. The exit code is the number of failed criteria.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "gridsearch.hpp"
#include "helpers.hpp"
#include "olfc/experiments.hpp"
#include "olfc/oracle.hpp"
#include "olfc/scenario.hpp"
#include "olfc/sim.hpp"

using namespace olfc;
namespace fs = std::filesystem;
using clock_type = std::chrono::steady_clock;

namespace {

int failures = 0;

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

double seconds_since(clock_type::time_point start) {
  return std::chrono::duration<double>(clock_type::now() - start).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

void criterion(int index, const std::string& name, const std::function<Outcome()>& body) {
  Outcome outcome;
  try {
    outcome = body();
  } catch (const std::exception& e) {
    outcome = {false, std::string("exception: ") + e.what()};
  }
  std::cout << "criterion " << index << " (" << name << "): "
            << (outcome.pass ? "PASS" : "FAIL");
  if (!outcome.detail.empty()) std::cout << "  [" << outcome.detail << "]";
  std::cout << "\n" << std::flush;
  if (!outcome.pass) ++failures;
}

/// Converged, monitored runs feed the shared storage-descent criterion.
struct MonitoredRun {
  std::string name;
  long checked = 0;
  long violations = 0;
};

bool bitwise_equal(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  if (a.size() != b.size()) return false;
  for (Eigen::Index i = 0; i < a.size(); ++i)
    if (a(i) != b(i)) return false;
  return true;
}

/// Random small network problem with generous, mutually consistent bounds.
OlfcProblem random_problem(std::mt19937& rng) {
  std::uniform_int_distribution<int> size(1, 6);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> b_range(1.0, 10.0);
  const int n = size(rng);

  std::vector<BusId> ids;
  std::vector<bool> gen;
  for (int i = 0; i < n; ++i) {
    ids.push_back(i + 1);
    gen.push_back(unit(rng) < 0.7);
  }
  std::vector<NetworkTopology::Line> lines;
  for (int i = 1; i < n; ++i) {
    std::uniform_int_distribution<int> pick(0, i - 1);
    lines.push_back({ids[static_cast<size_t>(pick(rng))], ids[static_cast<size_t>(i)], b_range(rng)});
  }

  OlfcProblem p;
  p.topology = NetworkTopology(ids, gen, lines);
  const int m = p.topology.line_count();
  p.phys.inertia = Eigen::VectorXd::Zero(n);
  p.phys.damping = Eigen::VectorXd::Zero(n);
  p.phys.p_in = Eigen::VectorXd::Zero(n);
  p.phys.q_in = Eigen::VectorXd::Zero(n);
  p.phys.buffer_min = Eigen::VectorXd::Zero(n);
  p.phys.buffer_max = Eigen::VectorXd::Zero(n);
  p.d_min = Eigen::VectorXd::Zero(n);
  p.d_max = Eigen::VectorXd::Zero(n);
  p.controllable.assign(static_cast<size_t>(n), false);
  p.heat_load.assign(static_cast<size_t>(n), false);
  p.cost_e.assign(static_cast<size_t>(n), QuadraticCost{});
  p.cost_h.assign(static_cast<size_t>(n), QuadraticCost{});
  p.chp.assign(static_cast<size_t>(n), ChpRegion{});
  p.flow_min = Eigen::VectorXd::Zero(m);
  p.flow_max = Eigen::VectorXd::Zero(m);

  std::uniform_real_distribution<double> inertia(0.5, 3.0), damping(0.5, 3.0);
  std::uniform_real_distribution<double> curvature(0.5, 3.0), slope_b(-0.1, 0.1);
  std::uniform_real_distribution<double> d_lo(-1.5, -0.5), d_hi(0.5, 1.5);
  std::uniform_real_distribution<double> buf_lo(-0.6, -0.1), buf_hi(0.1, 0.6);
  std::uniform_real_distribution<double> chp_slope(0.3, 1.0), chp_off(0.05, 0.3);
  std::uniform_real_distribution<double> flow_cap(0.5, 5.0);
  for (int i = 0; i < n; ++i) {
    p.phys.inertia(i) = inertia(rng);
    p.phys.damping(i) = damping(rng);
    p.phys.buffer_min(i) = buf_lo(rng);
    p.phys.buffer_max(i) = buf_hi(rng);
    const bool controllable = unit(rng) < 0.8;
    p.controllable[static_cast<size_t>(i)] = controllable;
    p.d_min(i) = d_lo(rng);
    p.d_max(i) = d_hi(rng);
    p.cost_e[static_cast<size_t>(i)] = {curvature(rng), slope_b(rng)};
    if (unit(rng) < 0.4) {
      p.heat_load[static_cast<size_t>(i)] = true;
      p.cost_h[static_cast<size_t>(i)] = {curvature(rng), slope_b(rng)};
      if (controllable && unit(rng) < 0.5)
        p.chp[static_cast<size_t>(i)].upper.push_back({chp_slope(rng), chp_off(rng)});
    }
  }
  for (int l = 0; l < m; ++l) {
    const double cap = flow_cap(rng);
    p.flow_min(l) = -cap;
    p.flow_max(l) = cap;
  }
  return p;
}

}  // namespace

int main() {
  const fs::path tmp = fs::temp_directory_path() / "olfc-acceptance";
  fs::remove_all(tmp);
  fs::create_directories(tmp);

  std::vector<MonitoredRun> monitored;

  const Scenario nominal = preset_scenario("paper-bus3");
  const OlfcProblem nominal_problem = nominal.oracle_problem();
  OlfcSolution nominal_sol;
  RunResult nominal_run;
  SteadyStateReport nominal_report;
  bool nominal_ready = false;

  criterion(1, "frequency restoration on the bundled 3-bus scenario", [&]() -> Outcome {
    nominal_sol = centralized_solve(nominal_problem);
    const EquilibriumPoint target =
        EquilibriumPoint::from_solution(nominal_problem, nominal_sol, nominal.gains);
    const auto start = clock_type::now();
    nominal_run = simulate(nominal, &target);
    const double wall = seconds_since(start);
    nominal_report = steady_state_report(nominal_run, nominal, nominal_sol, &target);
    nominal_ready = true;
    monitored.push_back({"nominal", nominal_run.u_checked_steps, nominal_run.u_violations});
    const bool pass = nominal_run.tail_max_omega <= 1e-4 && wall < 10.0;
    return {pass, "tail max |omega| = " + num(nominal_run.tail_max_omega) +
                      " rad/s over the final 10% of 60 s, wall time " + num(wall) + " s"};
  });

  criterion(2, "steady state matches the centralized optimum", [&]() -> Outcome {
    if (!nominal_ready) return {false, "nominal run unavailable"};
    const KktResidual& kkt = nominal_report.kkt;
    const double worst_kkt =
        std::max({kkt.stationarity, kkt.primal, kkt.dual, kkt.complementarity});
    const bool pass = nominal_report.primal_distance <= 1e-3 && worst_kkt <= 1e-3;
    return {pass, "max coordinate gap " + num(nominal_report.primal_distance) +
                      " p.u., worst KKT block " + num(worst_kkt)};
  });

  criterion(3, "centralized solver agrees with exhaustive grid search", [&]() -> Outcome {
    double worst_gap = 0.0, slowest = 0.0;
    bool pass = true;
    for (const std::string name :
         {"single-bus", "single-bus-chp", "two-bus", "two-bus-line-limit"}) {
      const OlfcProblem problem = preset_scenario(name).oracle_problem();
      const OlfcSolution sol = centralized_solve(problem);
      const auto start = clock_type::now();
      const test::GridResult grid = test::grid_search(problem, 1e-4);
      const double wall = seconds_since(start);
      slowest = std::max(slowest, wall);
      if (!grid.found) return {false, name + ": grid found no feasible point"};
      double gap = 0.0;
      for (int i = 0; i < problem.bus_count(); ++i) {
        if (problem.controllable[static_cast<size_t>(i)])
          gap = std::max(gap, std::abs(grid.d(i) - sol.d(i)));
        if (problem.heat_load[static_cast<size_t>(i)])
          gap = std::max(gap, std::abs(grid.q(i) - sol.q(i)));
      }
      for (int l = 0; l < problem.line_count(); ++l)
        gap = std::max(gap, std::abs(grid.virtual_flow(l) - sol.virtual_flow(l)));
      worst_gap = std::max(worst_gap, gap);
      pass = pass && gap <= 2e-3 && wall < 5.0;
    }
    return {pass, "worst primal gap " + num(worst_gap) + " p.u. at grid step 1e-4, slowest grid " +
                      num(slowest) + " s"};
  });

  criterion(4, "coupling changes the dispatch but not the restoration", [&]() -> Outcome {
    Scenario without = nominal;
    without.chp_enforced = false;
    Scenario with = nominal;
    with.chp_enforced = true;

    auto run_one = [&](const Scenario& scenario, RunResult& run) {
      const OlfcProblem problem = scenario.oracle_problem();
      const OlfcSolution sol = centralized_solve(problem);
      const EquilibriumPoint target =
          EquilibriumPoint::from_solution(problem, sol, scenario.gains);
      run = simulate(scenario, &target);
      return steady_state_report(run, scenario, sol, &target);
    };
    RunResult off_run, on_run;
    const SteadyStateReport off = run_one(without, off_run);
    const SteadyStateReport on = run_one(with, on_run);
    monitored.push_back({"coupling-off", off_run.u_checked_steps, off_run.u_violations});
    monitored.push_back({"coupling-on", on_run.u_checked_steps, on_run.u_violations});

    const double off_violation =
        nominal.problem.chp_violation(off_run.final_ctrl.d, off_run.final_ctrl.q);
    const double on_violation =
        nominal.problem.chp_violation(on_run.final_ctrl.d, on_run.final_ctrl.q);
    char rounded[16];
    std::snprintf(rounded, sizeof rounded, "%.4f", off_violation);
    const bool restored = off_run.tail_max_omega <= 1e-4 && on_run.tail_max_omega <= 1e-4;
    const bool pass = std::stod(rounded) > 0.0 && on_violation <= 1e-3 && restored;
    return {pass, std::string("violation without coupling ") + rounded + " p.u., with coupling " +
                      num(on_violation) + ", tails " + num(off_run.tail_max_omega) + " / " +
                      num(on_run.tail_max_omega) + " rad/s"};
  });

  criterion(5, "convergence across a decade of damping error each way", [&]() -> Outcome {
    Scenario base = nominal;
    base.integrator.duration = 300.0;  // the k = 0.1 runs settle an order slower
    const std::vector<double> ks = {0.1, 0.3, 1.0, 3.0, 10.0};
    const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
    const std::vector<SweepEntry> entries =
        sweep(base, ks, static_cast<int>(std::min<unsigned>(hw, ks.size())));
    bool all_converged = true;
    for (const SweepEntry& entry : entries) {
      all_converged = all_converged && entry.verdict == "converged";
      monitored.push_back({"sweep k=" + num(entry.k), entry.u_checked_steps, entry.u_violations});
    }
    bool slowest_at_smallest = true;
    for (size_t i = 1; i < entries.size(); ++i)
      if (entries[i].verdict == "converged" &&
          entries[i].settling_time > entries[0].settling_time)
        slowest_at_smallest = false;
    return {all_converged && slowest_at_smallest,
            "verdicts " + std::string(all_converged ? "all converged" : "not all converged") +
                ", settling " + num(entries[0].settling_time) + " s at k=0.1 vs " +
                num(entries.back().settling_time) + " s at k=10"};
  });

  criterion(6, "storage function descends on every converged run", [&]() -> Outcome {
    if (monitored.empty()) return {false, "no monitored runs"};
    bool pass = true;
    double worst_share = 0.0;
    std::string worst_name = "-";
    for (const MonitoredRun& run : monitored) {
      if (run.checked <= 0) {
        pass = false;
        worst_name = run.name + " (no checked steps)";
        continue;
      }
      const double share =
          static_cast<double>(run.violations) / static_cast<double>(run.checked);
      if (share > worst_share) {
        worst_share = share;
        worst_name = run.name;
      }
      pass = pass && share <= 0.01;
    }
    return {pass, num(static_cast<double>(monitored.size())) + " monitored runs, worst rise share " +
                      num(worst_share * 100.0) + "% (" + worst_name + ") at slack 1e-6*h"};
  });

  criterion(7, "locality and disturbance-independence of bus controllers", [&]() -> Outcome {
    // Perturbing a non-neighbor's private state must stay invisible for the
    // graph-distance number of rounds; one exchange happens per step.
    Scenario scenario;
    scenario.name = "locality";
    scenario.problem = test::chain_problem(3);
    scenario.gains = ControllerGains::uniform(3);
    scenario.damping_model = InaccurateDamping::exact(3);
    scenario.integrator.method = IntegratorConfig::Method::kEuler;
    scenario.integrator.step = 1e-3;
    scenario.integrator.duration = 0.01;
    scenario.comm.delay_rounds = 1;  // deterministic staleness, synchronous rounds
    scenario.decimate = 1;
    scenario.validate();

    const RunResult base = simulate(scenario);
    ControllerState poked = ControllerState::zero(scenario.problem);
    poked.r(2) += 0.5;
    poked.phi(2) += 0.25;
    const RunResult moved = simulate(scenario, nullptr, &poked);

    auto far_bus_equal = [&](size_t sample) {
      const TrajectorySample& a = base.samples[sample];
      const TrajectorySample& b = moved.samples[sample];
      return a.omega(0) == b.omega(0) && a.ctrl.d(0) == b.ctrl.d(0) &&
             a.ctrl.r(0) == b.ctrl.r(0) && a.ctrl.phi(0) == b.ctrl.phi(0);
    };
    bool quiet_before = true;
    for (size_t s = 0; s <= 2; ++s) quiet_before = quiet_before && far_bus_equal(s);
    bool visible_after = false;
    for (size_t s = 3; s < base.samples.size(); ++s)
      visible_after = visible_after || !far_bus_equal(s);
    const bool middle_sees_it =
        base.samples[1].ctrl.r(1) != moved.samples[1].ctrl.r(1);

    // Same measurements, different uncontrollable injection: bit-identical.
    std::mt19937 rng(71);
    OlfcProblem problem_a = test::chain_problem(3);
    problem_a.heat_load[2] = true;
    problem_a.chp[2].upper.push_back({0.5, 0.0});
    problem_a.validate();
    OlfcProblem problem_b = problem_a;
    problem_b.phys.p_in << 0.6, -0.2, 0.1;
    std::uniform_real_distribution<double> u(-0.5, 0.5);
    ControllerState state = ControllerState::zero(problem_a);
    for (int i = 0; i < 3; ++i) {
      state.d(i) = u(rng);
      state.r(i) = u(rng);
      state.phi(i) = u(rng);
      state.gamma_lo(i) = std::abs(u(rng));
    }
    state.q(2) = u(rng);
    state.zeta_up[2](0) = std::abs(u(rng));
    Eigen::VectorXd omega(3), flows(2), mu(3), phi(3);
    for (int i = 0; i < 3; ++i) {
      omega(i) = u(rng);
      mu(i) = u(rng);
      phi(i) = u(rng);
    }
    flows << u(rng), u(rng);
    const std::vector<Inbox> inboxes = build_inboxes(problem_a.topology, mu, phi, 0);
    const ControllerDerivatives da = controller_derivatives(
        state, omega, flows, inboxes, problem_a, scenario.gains, problem_a.phys.damping);
    const ControllerDerivatives db = controller_derivatives(
        state, omega, flows, inboxes, problem_b, scenario.gains, problem_b.phys.damping);
    const bool independent = bitwise_equal(da.d, db.d) && bitwise_equal(da.q, db.q) &&
                             bitwise_equal(da.r, db.r) && bitwise_equal(da.phi, db.phi) &&
                             bitwise_equal(da.gamma_lo, db.gamma_lo) &&
                             bitwise_equal(da.zeta_up[2], db.zeta_up[2]);

    const bool pass = quiet_before && visible_after && middle_sees_it && independent;
    return {pass, std::string("far bus quiet for 2 rounds: ") + (quiet_before ? "yes" : "no") +
                      ", visible by round 3+: " + (visible_after ? "yes" : "no") +
                      ", injection-independent rates: " + (independent ? "yes" : "no")};
  });

  criterion(8, "multipliers stay nonnegative across randomized scenarios", [&]() -> Outcome {
    std::mt19937 rng(2024);
    double worst = 0.0;
    int produced = 0;
    long attempts = 0;
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    while (produced < 50) {
      if (++attempts > 2000) return {false, "could not sample 50 feasible scenarios"};
      Scenario scenario;
      scenario.name = "random";
      scenario.problem = random_problem(rng);
      const int n = scenario.problem.bus_count();
      scenario.gains = ControllerGains::uniform(n);
      scenario.gains.eps_d = Eigen::VectorXd::Constant(n, 10.0);
      scenario.gains.eps_q = Eigen::VectorXd::Constant(n, 10.0);
      scenario.damping_model = InaccurateDamping::exact(n);
      scenario.integrator.duration = 3.0;
      std::uniform_int_distribution<int> bus_pick(0, n - 1);
      std::uniform_real_distribution<double> step_p(-0.5, 0.5), step_q(-0.3, 0.3);
      const int shocks = 1 + (unit(rng) < 0.5 ? 1 : 0);
      for (int s = 0; s < shocks; ++s) {
        Disturbance dist;
        dist.time = 0.5 * (s + 1);
        const int bus = bus_pick(rng);
        dist.bus = scenario.problem.topology.bus_id(bus);
        dist.dp = step_p(rng);
        if (scenario.problem.heat_load[static_cast<size_t>(bus)]) dist.dq = step_q(rng);
        scenario.disturbances.push_back(dist);
      }
      try {
        scenario.validate();
        check_feasible(scenario.disturbed_problem());
      } catch (const ValidationError&) {
        continue;
      } catch (const InfeasibleError&) {
        continue;
      }
      RunResult run;
      try {
        run = simulate(scenario);
      } catch (const NumericalBlowup& e) {
        return {false, "scenario " + std::to_string(produced) + " diverged at t = " + num(e.time)};
      }
      worst = std::min(worst, run.min_multiplier_recorded);
      ++produced;
    }
    return {worst >= -1e-12,
            "50 scenarios (<= 6 buses, steps <= 0.5 p.u.), most negative recorded multiplier " +
                num(worst)};
  });

  criterion(9, "byte-identical trajectories for identical configuration", [&]() -> Outcome {
    auto csv_bytes = [&](const Scenario& scenario, const std::string& stem) {
      const RunResult run = simulate(scenario);
      const fs::path path = tmp / (stem + ".csv");
      write_trajectory_csv(path.string(), run, scenario);
      std::ifstream in(path, std::ios::binary);
      std::ostringstream buf;
      buf << in.rdbuf();
      return buf.str();
    };
    Scenario plain = preset_scenario("two-bus");
    plain.integrator.duration = 5.0;
    const bool ideal_same = csv_bytes(plain, "ideal-1") == csv_bytes(plain, "ideal-2");

    Scenario lossy = plain;
    lossy.comm.delay_rounds = 1;
    lossy.comm.drop_probability = 0.2;
    lossy.comm.replay_on_drop = true;
    lossy.comm.seed = 123;
    lossy.validate();
    const bool lossy_same = csv_bytes(lossy, "lossy-1") == csv_bytes(lossy, "lossy-2");
    return {ideal_same && lossy_same,
            std::string("ideal channel: ") + (ideal_same ? "identical" : "differs") +
                ", delayed lossy channel with fixed seed: " +
                (lossy_same ? "identical" : "differs")};
  });

  fs::remove_all(tmp);
  std::cout << "acceptance: " << (9 - failures) << "/9 criteria passed\n";
  return failures == 0 ? 0 : 1;
}
