#pragma once

#include <limits>
#include <string>
#include <vector>

#include "olfc/controller.hpp"
#include "olfc/oracle.hpp"

namespace olfc {

/// Step change of the uncontrollable injections at one bus, applied between
/// integrator steps.
struct Disturbance {
  double time = 0.0;
  BusId bus = 0;
  double dp = 0.0;
  double dq = 0.0;
};

struct IntegratorConfig {
  enum class Method { kEuler, kRk4 };
  Method method = Method::kRk4;
  double step = 1e-3;      // s
  double duration = 60.0;  // s
};

struct Scenario {
  std::string name = "custom";
  OlfcProblem problem;  // pre-disturbance
  ControllerGains gains;
  std::vector<Disturbance> disturbances;
  InaccurateDamping damping_model;
  bool chp_enforced = true;
  bool instantaneous_primal = false;
  IntegratorConfig integrator;
  CommConfig comm;
  int decimate = 10;          // record every decimate-th step
  double tail_fraction = 0.1;  // share of the horizon used for tail statistics
  double settling_band = 1e-3;  // rad/s

  /// Throws ValidationError listing every violated invariant.
  void validate() const;

  /// Problem with every disturbance step applied (the steady-state target).
  OlfcProblem disturbed_problem() const;

  /// Same, with the CHP regions cleared when the controller ignores them:
  /// the problem whose optimum the closed loop actually seeks.
  OlfcProblem oracle_problem() const;
};

/// Equilibrium in the monitor's coordinates. Built either from a centralized
/// solution (with the virtual phases shifted into the run's conserved gauge)
/// or from the limit of a finished run.
struct EquilibriumPoint {
  Eigen::VectorXd d, q, phi, mu, omega;
  Eigen::VectorXd line_flow;
  Eigen::VectorXd gamma_lo, gamma_hi, delta_lo, delta_hi;
  std::vector<Eigen::VectorXd> zeta_up, zeta_dn;
  Eigen::VectorXd sigma_lo, sigma_hi;
  bool degenerate = false;  // an active constraint carries a zero multiplier
  std::string source = "oracle";

  static EquilibriumPoint from_solution(const OlfcProblem& problem, const OlfcSolution& sol,
                                        const ControllerGains& gains);
  static EquilibriumPoint from_run_limit(const ControllerState& ctrl,
                                         const Eigen::VectorXd& omega_full,
                                         const Eigen::VectorXd& line_flow,
                                         const ControllerGains& gains,
                                         const NetworkTopology& topology);
};

/// Weighted half squared distance to the equilibrium in the gradient-flow
/// metric: each coordinate is scaled by the inverse of its own step size
/// (line flows by 1/B, generator frequencies by the inertia). With
/// `include_primal` false the d and q terms are skipped; that is the storage
/// function of the instantaneous-primal mode, where d and q are outputs of
/// the remaining states rather than states themselves.
double lyapunov_value(const ControllerState& ctrl, const Eigen::VectorXd& omega_full,
                      const Eigen::VectorXd& line_flow, const EquilibriumPoint& target,
                      const OlfcProblem& problem, const ControllerGains& gains,
                      bool include_primal = true);

struct TrajectorySample {
  double time = 0.0;
  Eigen::VectorXd omega;      // per bus, load entries solved
  Eigen::VectorXd line_flow;  // physical
  Eigen::VectorXd mu;
  Eigen::VectorXd heat_buffer;
  ControllerState ctrl;
  double lyapunov = std::numeric_limits<double>::quiet_NaN();
  double objective = 0.0;
  double chp_violation = 0.0;    // against the scenario's CHP regions, enforced or not
  double bound_violation = 0.0;  // worst d / buffer / virtual-flow bound violation
};

struct RunResult {
  std::vector<TrajectorySample> samples;  // decimated, first and last steps included

  Eigen::VectorXd final_omega;
  Eigen::VectorXd final_line_flow;
  ControllerState final_ctrl;
  Eigen::VectorXd final_mu;

  double tail_max_omega = 0.0;  // over every step in the tail window
  double settling_time = 0.0;   // last instant the settling band was exceeded
  bool settled = false;

  long steps = 0;
  long u_checked_steps = 0;   // post-disturbance steps with a descent check
  long u_violations = 0;      // steps where U rose beyond the slack
  double u_max_rise = 0.0;    // worst positive step-to-step U change
  double u_final = std::numeric_limits<double>::quiet_NaN();
  bool u_available = false;

  double min_multiplier_pre_clamp = 0.0;  // most negative raw multiplier seen
  double clamped_total = 0.0;             // total magnitude removed by clamping
  double min_multiplier_recorded = 0.0;   // post-clamp, over recorded samples
  bool all_finite = true;
};

/// Integrates the closed loop. When `target` is given, the Lyapunov monitor
/// runs at every step (descent checked after the last disturbance with slack
/// 1e-6 * h). `initial_ctrl` overrides the all-zero controller start.
/// Throws NumericalBlowup when any state leaves [-1e6, 1e6] or goes
/// non-finite.
RunResult simulate(const Scenario& scenario, const EquilibriumPoint* target = nullptr,
                   const ControllerState* initial_ctrl = nullptr);

struct SteadyStateReport {
  double tail_max_omega = 0.0;
  double settling_time = 0.0;
  bool settled = false;
  double primal_distance = 0.0;  // max coordinate gap to the oracle (d, q, virtual flows)
  double chp_violation = 0.0;
  double d_bound_violation = 0.0;
  double buffer_violation = 0.0;
  double line_bound_violation = 0.0;
  double absorption_residual = 0.0;  // worst bus imbalance between P^in - d and virtual outflow
  double component_balance = 0.0;    // worst per-component total of P^in - d
  double final_objective = 0.0;
  double oracle_objective = 0.0;
  KktResidual kkt;
  long u_checked_steps = 0;
  long u_violations = 0;
  double u_max_rise = 0.0;
  bool u_available = false;
  std::string u_reference = "none";
  bool converged = false;  // tail_max_omega <= 1e-4 and primal_distance <= 1e-3
};

/// Tail statistics plus distance-to-optimum of a finished run. The KKT block
/// is evaluated on the run's final state assembled into a solution.
SteadyStateReport steady_state_report(const RunResult& run, const Scenario& scenario,
                                      const OlfcSolution& oracle_sol,
                                      const EquilibriumPoint* target = nullptr);

/// Assembles the run's final state into the solution layout (mu recovered,
/// lambda = omega) so it can be scored by kkt_residual.
OlfcSolution solution_from_run(const RunResult& run, const Scenario& scenario);

struct SweepEntry {
  double k = 1.0;
  std::string verdict;  // converged | slow | unstable
  double tail_max_omega = 0.0;
  double settling_time = 0.0;
  bool settled = false;
  double primal_distance = 0.0;
  double peak_abs_omega = 0.0;  // max |omega| over the recorded trajectory
  double blowup_time = std::numeric_limits<double>::quiet_NaN();
  bool within_guarantee = false;  // additive error inside the sufficient interval
  long u_violations = 0;
  long u_checked_steps = 0;
};

/// Runs the scenario once per damping scale k (D_used = k * D). Instability
/// is a recorded verdict, not an error. `jobs` bounds worker threads.
std::vector<SweepEntry> sweep(const Scenario& base, const std::vector<double>& k_values,
                              int jobs = 1);

}  // namespace olfc
