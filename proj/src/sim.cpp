#include "olfc/sim.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <sstream>
#include <thread>

namespace olfc {

namespace {

constexpr double kBlowupLimit = 1e6;

void check_sorted_disturbances(std::vector<std::string>& issues, const Scenario& s) {
  double prev = 0.0;
  for (const Disturbance& dist : s.disturbances) {
    if (dist.time < 0.0) issues.push_back("disturbance time must be nonnegative");
    if (dist.time < prev) issues.push_back("disturbances must be sorted by time");
    prev = dist.time;
    if (!s.problem.topology.has_bus(dist.bus)) {
      std::ostringstream os;
      os << "disturbance references unknown bus " << dist.bus;
      issues.push_back(os.str());
    }
  }
}

struct FullState {
  Eigen::VectorXd omega_gen;
  Eigen::VectorXd line_flow;
  ControllerState ctrl;
};

void axpy(FullState& y, double a, const FullState& x) {
  y.omega_gen += a * x.omega_gen;
  y.line_flow += a * x.line_flow;
  y.ctrl.d += a * x.ctrl.d;
  y.ctrl.q += a * x.ctrl.q;
  y.ctrl.phi += a * x.ctrl.phi;
  y.ctrl.r += a * x.ctrl.r;
  y.ctrl.gamma_lo += a * x.ctrl.gamma_lo;
  y.ctrl.gamma_hi += a * x.ctrl.gamma_hi;
  y.ctrl.delta_lo += a * x.ctrl.delta_lo;
  y.ctrl.delta_hi += a * x.ctrl.delta_hi;
  for (size_t i = 0; i < y.ctrl.zeta_up.size(); ++i) y.ctrl.zeta_up[i] += a * x.ctrl.zeta_up[i];
  for (size_t i = 0; i < y.ctrl.zeta_dn.size(); ++i) y.ctrl.zeta_dn[i] += a * x.ctrl.zeta_dn[i];
  y.ctrl.sigma_lo += a * x.ctrl.sigma_lo;
  y.ctrl.sigma_hi += a * x.ctrl.sigma_hi;
}

FullState stepped(const FullState& s, double a, const FullState& k) {
  FullState r = s;
  axpy(r, a, k);
  return r;
}

class Loop {
public:
  Loop(const Scenario& scenario, const EquilibriumPoint* target,
       const ControllerState* initial_ctrl)
      : scenario_(scenario),
        problem_(scenario.problem),
        gains_(scenario.gains),
        target_(target),
        exchange_(scenario.problem.topology, scenario.comm) {
    const NetworkTopology& topo = problem_.topology;
    for (int i = 0; i < topo.bus_count(); ++i)
      if (topo.is_generator(i)) gen_bus_.push_back(i);
    damping_used_ = scenario.damping_model.effective(problem_.phys.damping);

    state_.omega_gen = Eigen::VectorXd::Zero(static_cast<long>(gen_bus_.size()));
    state_.line_flow = Eigen::VectorXd::Zero(topo.line_count());
    state_.ctrl = initial_ctrl ? *initial_ctrl : ControllerState::zero(problem_);
    if (scenario.instantaneous_primal)
      apply_instantaneous_primal(state_.ctrl, scatter_omega(state_.omega_gen), problem_,
                                 gains_, scenario.chp_enforced);

    last_disturbance_ = scenario.disturbances.empty() ? 0.0 : scenario.disturbances.back().time;
  }

  RunResult run() {
    const double h = scenario_.integrator.step;
    const long steps = std::llround(scenario_.integrator.duration / h);
    const double tail_start = (1.0 - scenario_.tail_fraction) * scenario_.integrator.duration;

    RunResult result;
    result.steps = steps;

    observe(0.0, result);
    record_sample(0.0, result);
    double u_prev = last_u_;

    size_t next_disturbance = 0;
    for (long k = 0; k < steps; ++k) {
      const double t = static_cast<double>(k) * h;
      while (next_disturbance < scenario_.disturbances.size() &&
             scenario_.disturbances[next_disturbance].time <= t + 1e-12) {
        const Disturbance& dist = scenario_.disturbances[next_disturbance++];
        const int bus = problem_.topology.bus_index(dist.bus);
        problem_.phys.p_in(bus) += dist.dp;
        problem_.phys.q_in(bus) += dist.dq;
      }

      if (!scenario_.comm.ideal()) {
        // Degraded channels publish once per step; every stage of the step
        // sees the same delivered values.
        observe_base_for_exchange();
        step_inboxes_ = &exchange_.exchange_round(base_mu_, state_.ctrl.phi, k);
      }
      round_ = k;

      advance(h);
      const double t_next = static_cast<double>(k + 1) * h;

      clamp_multipliers(t_next, result);
      observe(t_next, result);

      const double w = omega_full_.cwiseAbs().maxCoeff();
      if (t_next >= tail_start - 1e-12)
        result.tail_max_omega = std::max(result.tail_max_omega, w);
      if (w > scenario_.settling_band) last_exceed_ = t_next;

      if (target_ && t >= last_disturbance_ - 1e-12) {
        ++result.u_checked_steps;
        const double rise = last_u_ - u_prev;
        result.u_max_rise = std::max(result.u_max_rise, rise);
        if (rise > 1e-6 * h) ++result.u_violations;
      }
      u_prev = last_u_;

      if ((k + 1) % scenario_.decimate == 0 || k + 1 == steps) record_sample(t_next, result);
    }

    result.final_omega = omega_full_;
    result.final_line_flow = state_.line_flow;
    result.final_ctrl = state_.ctrl;
    result.final_mu = mu_;
    result.settling_time = last_exceed_;
    result.settled = last_exceed_ < scenario_.integrator.duration - 1e-9;
    result.u_available = target_ != nullptr;
    result.u_final = last_u_;
    result.min_multiplier_pre_clamp = min_pre_clamp_;
    result.clamped_total = clamped_total_;
    result.min_multiplier_recorded = min_recorded_;
    result.all_finite = all_finite_;
    return result;
  }

private:
  Eigen::VectorXd scatter_omega(const Eigen::VectorXd& omega_gen) const {
    Eigen::VectorXd full = Eigen::VectorXd::Zero(problem_.bus_count());
    for (size_t g = 0; g < gen_bus_.size(); ++g)
      full(gen_bus_[g]) = omega_gen(static_cast<long>(g));
    return full;
  }

  FullState derivative(const FullState& s) {
    ControllerState ctrl = s.ctrl;
    if (scenario_.instantaneous_primal)
      apply_instantaneous_primal(ctrl, scatter_omega(s.omega_gen), problem_, gains_,
                                 scenario_.chp_enforced);

    const PhysicalDerivatives pd =
        physical_derivatives(s.omega_gen, s.line_flow, ctrl.d, problem_.phys, problem_.topology);
    const Eigen::VectorXd mu = recover_mu_all(ctrl, pd.omega_full, gains_, problem_.topology);

    ControllerDerivatives cd;
    if (scenario_.comm.ideal()) {
      const std::vector<Inbox> inboxes =
          build_inboxes(problem_.topology, mu, ctrl.phi, round_);
      cd = controller_derivatives(ctrl, pd.omega_full, s.line_flow, inboxes, problem_, gains_,
                                  damping_used_, scenario_.chp_enforced);
    } else {
      cd = controller_derivatives(ctrl, pd.omega_full, s.line_flow, *step_inboxes_, problem_,
                                  gains_, damping_used_, scenario_.chp_enforced);
    }
    if (scenario_.instantaneous_primal) {
      cd.d.setZero();
      cd.q.setZero();
    }

    FullState rate;
    rate.omega_gen = Eigen::VectorXd(static_cast<long>(gen_bus_.size()));
    for (size_t g = 0; g < gen_bus_.size(); ++g)
      rate.omega_gen(static_cast<long>(g)) = pd.omega_dot(gen_bus_[g]);
    rate.line_flow = pd.flow_dot;
    rate.ctrl = cd;
    return rate;
  }

  void advance(double h) {
    if (scenario_.integrator.method == IntegratorConfig::Method::kEuler) {
      const FullState k1 = derivative(state_);
      axpy(state_, h, k1);
    } else {
      const FullState k1 = derivative(state_);
      const FullState k2 = derivative(stepped(state_, 0.5 * h, k1));
      const FullState k3 = derivative(stepped(state_, 0.5 * h, k2));
      const FullState k4 = derivative(stepped(state_, h, k3));
      axpy(state_, h / 6.0, k1);
      axpy(state_, h / 3.0, k2);
      axpy(state_, h / 3.0, k3);
      axpy(state_, h / 6.0, k4);
    }
    if (scenario_.instantaneous_primal)
      apply_instantaneous_primal(state_.ctrl, scatter_omega(state_.omega_gen), problem_, gains_,
                                 scenario_.chp_enforced);
  }

  void clamp_field(Eigen::VectorXd& v, RunResult& result) {
    for (long i = 0; i < v.size(); ++i) {
      if (v(i) < 0.0) {
        min_pre_clamp_ = std::min(min_pre_clamp_, v(i));
        clamped_total_ += -v(i);
        v(i) = 0.0;
      }
    }
    (void)result;
  }

  void clamp_multipliers(double t, RunResult& result) {
    ControllerState& c = state_.ctrl;
    clamp_field(c.gamma_lo, result);
    clamp_field(c.gamma_hi, result);
    clamp_field(c.delta_lo, result);
    clamp_field(c.delta_hi, result);
    for (auto& z : c.zeta_up) clamp_field(z, result);
    for (auto& z : c.zeta_dn) clamp_field(z, result);
    clamp_field(c.sigma_lo, result);
    clamp_field(c.sigma_hi, result);

    auto wild = [](const Eigen::VectorXd& v) {
      return !v.allFinite() || (v.size() > 0 && v.cwiseAbs().maxCoeff() > kBlowupLimit);
    };
    bool bad = wild(state_.omega_gen) || wild(state_.line_flow) || wild(c.d) || wild(c.q) ||
               wild(c.phi) || wild(c.r) || wild(c.gamma_lo) || wild(c.gamma_hi) ||
               wild(c.delta_lo) || wild(c.delta_hi) || wild(c.sigma_lo) || wild(c.sigma_hi);
    for (const auto& z : c.zeta_up) bad = bad || wild(z);
    for (const auto& z : c.zeta_dn) bad = bad || wild(z);
    if (bad) throw NumericalBlowup(t);
  }

  /// Refreshes the derived per-bus views of the current state.
  void observe(double t, RunResult& result) {
    (void)t;
    const PhysicalDerivatives pd = physical_derivatives(
        state_.omega_gen, state_.line_flow, state_.ctrl.d, problem_.phys, problem_.topology);
    omega_full_ = pd.omega_full;
    mu_ = recover_mu_all(state_.ctrl, omega_full_, gains_, problem_.topology);
    if (target_)
      last_u_ = lyapunov_value(state_.ctrl, omega_full_, state_.line_flow, *target_, problem_,
                               gains_, !scenario_.instantaneous_primal);
    if (!omega_full_.allFinite()) all_finite_ = false;
    (void)result;
  }

  void observe_base_for_exchange() {
    const PhysicalDerivatives pd = physical_derivatives(
        state_.omega_gen, state_.line_flow, state_.ctrl.d, problem_.phys, problem_.topology);
    base_mu_ = recover_mu_all(state_.ctrl, pd.omega_full, gains_, problem_.topology);
  }

  void record_sample(double t, RunResult& result) {
    TrajectorySample s;
    s.time = t;
    s.omega = omega_full_;
    s.line_flow = state_.line_flow;
    s.mu = mu_;
    s.ctrl = state_.ctrl;
    s.heat_buffer = problem_.phys.q_in - state_.ctrl.q;
    for (int i = 0; i < problem_.bus_count(); ++i)
      if (!problem_.heat_load[static_cast<size_t>(i)]) s.heat_buffer(i) = 0.0;
    s.lyapunov = target_ ? last_u_ : std::numeric_limits<double>::quiet_NaN();
    s.objective = problem_.objective(state_.ctrl.d, state_.ctrl.q, omega_full_);
    s.chp_violation = problem_.chp_violation(state_.ctrl.d, state_.ctrl.q);

    double bound = 0.0;
    for (int i = 0; i < problem_.bus_count(); ++i) {
      if (problem_.controllable[static_cast<size_t>(i)]) {
        bound = std::max(bound, problem_.d_min(i) - state_.ctrl.d(i));
        bound = std::max(bound, state_.ctrl.d(i) - problem_.d_max(i));
      }
      if (problem_.heat_load[static_cast<size_t>(i)]) {
        const double buffer = heat_buffer(problem_.phys.q_in(i), state_.ctrl.q(i));
        bound = std::max(bound, buffer - problem_.phys.buffer_max(i));
        bound = std::max(bound, problem_.phys.buffer_min(i) - buffer);
      }
    }
    for (int l = 0; l < problem_.line_count(); ++l) {
      const double v = dc_flow(problem_.topology.susceptance(l),
                               state_.ctrl.phi(problem_.topology.line_from(l)),
                               state_.ctrl.phi(problem_.topology.line_to(l)));
      bound = std::max(bound, problem_.flow_min(l) - v);
      bound = std::max(bound, v - problem_.flow_max(l));
    }
    s.bound_violation = bound;

    auto track_min = [&](const Eigen::VectorXd& v) {
      for (long i = 0; i < v.size(); ++i) {
        min_recorded_ = std::min(min_recorded_, v(i));
        if (!std::isfinite(v(i))) all_finite_ = false;
      }
    };
    track_min(s.ctrl.gamma_lo);
    track_min(s.ctrl.gamma_hi);
    track_min(s.ctrl.delta_lo);
    track_min(s.ctrl.delta_hi);
    for (const auto& z : s.ctrl.zeta_up) track_min(z);
    for (const auto& z : s.ctrl.zeta_dn) track_min(z);
    track_min(s.ctrl.sigma_lo);
    track_min(s.ctrl.sigma_hi);

    result.samples.push_back(std::move(s));
  }

  const Scenario& scenario_;
  OlfcProblem problem_;  // current injections (disturbances applied in place)
  const ControllerGains& gains_;
  const EquilibriumPoint* target_;
  ExchangeBus exchange_;
  const std::vector<Inbox>* step_inboxes_ = nullptr;
  std::vector<int> gen_bus_;
  Eigen::VectorXd damping_used_;
  FullState state_;
  Eigen::VectorXd omega_full_, mu_, base_mu_;
  long round_ = 0;
  double last_disturbance_ = 0.0;
  double last_u_ = std::numeric_limits<double>::quiet_NaN();
  double last_exceed_ = 0.0;
  double min_pre_clamp_ = 0.0;
  double clamped_total_ = 0.0;
  double min_recorded_ = 0.0;
  bool all_finite_ = true;
};

}  // namespace

void Scenario::validate() const {
  problem.validate();
  gains.validate(problem.bus_count());

  std::vector<std::string> issues;
  if (!(integrator.step > 0.0)) issues.push_back("integrator step must be positive");
  if (!(integrator.duration > integrator.step))
    issues.push_back("integrator duration must exceed the step");
  if (decimate < 1) issues.push_back("decimate must be at least 1");
  if (!(tail_fraction > 0.0 && tail_fraction <= 1.0))
    issues.push_back("tail_fraction must lie in (0, 1]");
  if (!(settling_band > 0.0)) issues.push_back("settling_band must be positive");
  check_sorted_disturbances(issues, *this);
  if (comm.delay_rounds < 0) issues.push_back("comm delay_rounds must be nonnegative");
  if (comm.drop_probability < 0.0 || comm.drop_probability >= 1.0)
    issues.push_back("comm drop_probability must lie in [0, 1)");
  const int n = problem.bus_count();
  if (damping_model.scale.size() != n || damping_model.offset.size() != n) {
    issues.push_back("damping model vectors must match the bus count");
  } else {
    for (int i = 0; i < n; ++i) {
      if (!(damping_model.scale(i) > 0.0))
        issues.push_back("damping model scale must be strictly positive");
      if (!(damping_model.scale(i) * problem.phys.damping(i) + damping_model.offset(i) > 0.0))
        issues.push_back("controller damping estimate must stay positive");
    }
  }
  if (instantaneous_primal) {
    for (int i = 0; i < n; ++i)
      if (problem.controllable[static_cast<size_t>(i)] && !problem.topology.is_generator(i)) {
        issues.push_back(
            "instantaneous primal mode requires controllable loads at generator buses "
            "(load-bus frequency would form an algebraic loop)");
        break;
      }
  }
  if (!issues.empty()) throw ValidationError(issues);
}

OlfcProblem Scenario::disturbed_problem() const {
  OlfcProblem p = problem;
  for (const Disturbance& dist : disturbances) {
    const int bus = p.topology.bus_index(dist.bus);
    p.phys.p_in(bus) += dist.dp;
    p.phys.q_in(bus) += dist.dq;
  }
  return p;
}

OlfcProblem Scenario::oracle_problem() const {
  OlfcProblem p = disturbed_problem();
  if (!chp_enforced)
    for (auto& region : p.chp) region = ChpRegion{};
  return p;
}

EquilibriumPoint EquilibriumPoint::from_solution(const OlfcProblem& problem,
                                                 const OlfcSolution& sol,
                                                 const ControllerGains& gains) {
  EquilibriumPoint t;
  t.d = sol.d;
  t.q = sol.q;
  t.mu = sol.mu;
  t.omega = sol.omega;
  t.line_flow = sol.line_flow;
  t.gamma_lo = sol.gamma_lo;
  t.gamma_hi = sol.gamma_hi;
  t.delta_lo = sol.delta_lo;
  t.delta_hi = sol.delta_hi;
  t.zeta_up = sol.zeta_up;
  t.zeta_dn = sol.zeta_dn;
  t.sigma_lo = sol.sigma_lo;
  t.sigma_hi = sol.sigma_hi;
  t.source = "oracle";

  // The run conserves sum(phi/eps_phi) per component (zero from the all-zero
  // start); shift the pinned solution into that gauge.
  const NetworkTopology& topo = problem.topology;
  t.phi = sol.phi;
  for (int comp = 0; comp < topo.component_count(); ++comp) {
    double weighted = 0.0, weight = 0.0;
    for (int i = 0; i < topo.bus_count(); ++i) {
      if (topo.component_of()[static_cast<size_t>(i)] != comp) continue;
      weighted += sol.phi(i) / gains.eps_phi(i);
      weight += 1.0 / gains.eps_phi(i);
    }
    const double shift = weighted / weight;
    for (int i = 0; i < topo.bus_count(); ++i)
      if (topo.component_of()[static_cast<size_t>(i)] == comp) t.phi(i) -= shift;
  }

  // Weakly active constraints make the multiplier part of the saddle set
  // non-unique; flag so reports can substitute the run's own limit.
  const double act = 1e-7;
  auto weak = [&](double mult, double g) { return std::abs(g) <= act && mult <= act; };
  for (int i = 0; i < problem.bus_count(); ++i) {
    const size_t si = static_cast<size_t>(i);
    if (problem.controllable[si]) {
      if (weak(sol.gamma_lo(i), problem.d_min(i) - sol.d(i))) t.degenerate = true;
      if (weak(sol.gamma_hi(i), sol.d(i) - problem.d_max(i))) t.degenerate = true;
    }
    if (problem.heat_load[si]) {
      const double buffer = heat_buffer(problem.phys.q_in(i), sol.q(i));
      if (weak(sol.delta_hi(i), buffer - problem.phys.buffer_max(i))) t.degenerate = true;
      if (weak(sol.delta_lo(i), problem.phys.buffer_min(i) - buffer)) t.degenerate = true;
      for (size_t row = 0; row < problem.chp[si].upper.size(); ++row) {
        const HalfPlane& hp = problem.chp[si].upper[row];
        if (weak(sol.zeta_up[si](static_cast<long>(row)),
                 sol.q(i) - hp.slope * sol.d(i) - hp.offset))
          t.degenerate = true;
      }
      for (size_t row = 0; row < problem.chp[si].lower.size(); ++row) {
        const HalfPlane& hp = problem.chp[si].lower[row];
        if (weak(sol.zeta_dn[si](static_cast<long>(row)),
                 hp.slope * sol.d(i) + hp.offset - sol.q(i)))
          t.degenerate = true;
      }
    }
  }
  for (int l = 0; l < problem.line_count(); ++l) {
    if (weak(sol.sigma_lo(l), problem.flow_min(l) - sol.virtual_flow(l))) t.degenerate = true;
    if (weak(sol.sigma_hi(l), sol.virtual_flow(l) - problem.flow_max(l))) t.degenerate = true;
  }
  return t;
}

EquilibriumPoint EquilibriumPoint::from_run_limit(const ControllerState& ctrl,
                                                  const Eigen::VectorXd& omega_full,
                                                  const Eigen::VectorXd& line_flow,
                                                  const ControllerGains& gains,
                                                  const NetworkTopology& topology) {
  EquilibriumPoint t;
  t.d = ctrl.d;
  t.q = ctrl.q;
  t.phi = ctrl.phi;
  t.mu = recover_mu_all(ctrl, omega_full, gains, topology);
  t.omega = omega_full;
  t.line_flow = line_flow;
  t.gamma_lo = ctrl.gamma_lo;
  t.gamma_hi = ctrl.gamma_hi;
  t.delta_lo = ctrl.delta_lo;
  t.delta_hi = ctrl.delta_hi;
  t.zeta_up = ctrl.zeta_up;
  t.zeta_dn = ctrl.zeta_dn;
  t.sigma_lo = ctrl.sigma_lo;
  t.sigma_hi = ctrl.sigma_hi;
  t.source = "run-limit";
  return t;
}

double lyapunov_value(const ControllerState& ctrl, const Eigen::VectorXd& omega_full,
                      const Eigen::VectorXd& line_flow, const EquilibriumPoint& target,
                      const OlfcProblem& problem, const ControllerGains& gains,
                      bool include_primal) {
  const NetworkTopology& topo = problem.topology;
  const Eigen::VectorXd mu = recover_mu_all(ctrl, omega_full, gains, topo);
  double u = 0.0;
  auto add = [&](double delta, double weight) { u += weight * delta * delta; };

  for (int i = 0; i < problem.bus_count(); ++i) {
    const size_t si = static_cast<size_t>(i);
    if (problem.controllable[si]) {
      if (include_primal) add(ctrl.d(i) - target.d(i), 1.0 / gains.eps_d(i));
      add(ctrl.gamma_lo(i) - target.gamma_lo(i), 1.0 / gains.eps_gamma);
      add(ctrl.gamma_hi(i) - target.gamma_hi(i), 1.0 / gains.eps_gamma);
    }
    if (problem.heat_load[si]) {
      if (include_primal) add(ctrl.q(i) - target.q(i), 1.0 / gains.eps_q(i));
      add(ctrl.delta_lo(i) - target.delta_lo(i), 1.0 / gains.eps_delta);
      add(ctrl.delta_hi(i) - target.delta_hi(i), 1.0 / gains.eps_delta);
    }
    for (long row = 0; row < target.zeta_up[si].size(); ++row)
      add(ctrl.zeta_up[si](row) - target.zeta_up[si](row), 1.0 / gains.eps_zeta);
    for (long row = 0; row < target.zeta_dn[si].size(); ++row)
      add(ctrl.zeta_dn[si](row) - target.zeta_dn[si](row), 1.0 / gains.eps_zeta);

    add(ctrl.phi(i) - target.phi(i), 1.0 / gains.eps_phi(i));
    add(mu(i) - target.mu(i), 1.0 / gains.eps_mu(i));
    if (topo.is_generator(i))
      add(omega_full(i) - target.omega(i), problem.phys.inertia(i));
  }
  for (int l = 0; l < problem.line_count(); ++l) {
    add(line_flow(l) - target.line_flow(l), 1.0 / topo.susceptance(l));
    add(ctrl.sigma_lo(l) - target.sigma_lo(l), 1.0 / gains.eps_sigma);
    add(ctrl.sigma_hi(l) - target.sigma_hi(l), 1.0 / gains.eps_sigma);
  }
  return 0.5 * u;
}

RunResult simulate(const Scenario& scenario, const EquilibriumPoint* target,
                   const ControllerState* initial_ctrl) {
  scenario.validate();
  Loop loop(scenario, target, initial_ctrl);
  return loop.run();
}

OlfcSolution solution_from_run(const RunResult& run, const Scenario& scenario) {
  const OlfcProblem problem = scenario.oracle_problem();
  const NetworkTopology& topo = problem.topology;
  OlfcSolution sol;
  sol.d = run.final_ctrl.d;
  sol.q = run.final_ctrl.q;
  for (int i = 0; i < problem.bus_count(); ++i)
    if (!problem.heat_load[static_cast<size_t>(i)]) sol.q(i) = problem.phys.q_in(i);
  sol.omega = run.final_omega;
  sol.phi = run.final_ctrl.phi;
  sol.lambda = run.final_omega;
  sol.mu = run.final_mu;
  sol.line_flow = run.final_line_flow;
  sol.virtual_flow = Eigen::VectorXd(problem.line_count());
  for (int l = 0; l < problem.line_count(); ++l)
    sol.virtual_flow(l) =
        dc_flow(topo.susceptance(l), sol.phi(topo.line_from(l)), sol.phi(topo.line_to(l)));
  sol.gamma_lo = run.final_ctrl.gamma_lo;
  sol.gamma_hi = run.final_ctrl.gamma_hi;
  sol.delta_lo = run.final_ctrl.delta_lo;
  sol.delta_hi = run.final_ctrl.delta_hi;
  sol.sigma_lo = run.final_ctrl.sigma_lo;
  sol.sigma_hi = run.final_ctrl.sigma_hi;
  sol.zeta_up.resize(static_cast<size_t>(problem.bus_count()));
  sol.zeta_dn.resize(static_cast<size_t>(problem.bus_count()));
  for (int i = 0; i < problem.bus_count(); ++i) {
    const size_t si = static_cast<size_t>(i);
    // The oracle problem may carry fewer CHP rows (ignored coupling); match
    // its shape.
    const long n_up = static_cast<long>(problem.chp[si].upper.size());
    const long n_dn = static_cast<long>(problem.chp[si].lower.size());
    sol.zeta_up[si] = run.final_ctrl.zeta_up[si].head(n_up);
    sol.zeta_dn[si] = run.final_ctrl.zeta_dn[si].head(n_dn);
  }
  sol.objective = problem.objective(sol.d, sol.q, sol.omega);
  return sol;
}

SteadyStateReport steady_state_report(const RunResult& run, const Scenario& scenario,
                                      const OlfcSolution& oracle_sol,
                                      const EquilibriumPoint* target) {
  const OlfcProblem disturbed = scenario.disturbed_problem();
  const OlfcProblem oracle_problem = scenario.oracle_problem();
  const NetworkTopology& topo = disturbed.topology;

  SteadyStateReport rep;
  rep.tail_max_omega = run.tail_max_omega;
  rep.settling_time = run.settling_time;
  rep.settled = run.settled;
  rep.u_checked_steps = run.u_checked_steps;
  rep.u_violations = run.u_violations;
  rep.u_max_rise = run.u_max_rise;
  rep.u_available = run.u_available;
  rep.u_reference = target ? target->source : "none";

  const OlfcSolution final_sol = solution_from_run(run, scenario);
  rep.final_objective = final_sol.objective;
  rep.oracle_objective = oracle_sol.objective;
  rep.kkt = kkt_residual(oracle_problem, final_sol);

  double dist = 0.0;
  for (int i = 0; i < disturbed.bus_count(); ++i) {
    if (disturbed.controllable[static_cast<size_t>(i)])
      dist = std::max(dist, std::abs(final_sol.d(i) - oracle_sol.d(i)));
    if (disturbed.heat_load[static_cast<size_t>(i)])
      dist = std::max(dist, std::abs(final_sol.q(i) - oracle_sol.q(i)));
  }
  for (int l = 0; l < disturbed.line_count(); ++l)
    dist = std::max(dist, std::abs(final_sol.virtual_flow(l) - oracle_sol.virtual_flow(l)));
  rep.primal_distance = dist;

  rep.chp_violation = disturbed.chp_violation(final_sol.d, final_sol.q);
  for (int i = 0; i < disturbed.bus_count(); ++i) {
    const size_t si = static_cast<size_t>(i);
    if (disturbed.controllable[si]) {
      rep.d_bound_violation = std::max(rep.d_bound_violation, disturbed.d_min(i) - final_sol.d(i));
      rep.d_bound_violation = std::max(rep.d_bound_violation, final_sol.d(i) - disturbed.d_max(i));
    }
    if (disturbed.heat_load[si]) {
      const double buffer = heat_buffer(disturbed.phys.q_in(i), final_sol.q(i));
      rep.buffer_violation = std::max(rep.buffer_violation, buffer - disturbed.phys.buffer_max(i));
      rep.buffer_violation = std::max(rep.buffer_violation, disturbed.phys.buffer_min(i) - buffer);
    }
  }
  for (int l = 0; l < disturbed.line_count(); ++l) {
    rep.line_bound_violation =
        std::max(rep.line_bound_violation, disturbed.flow_min(l) - final_sol.virtual_flow(l));
    rep.line_bound_violation =
        std::max(rep.line_bound_violation, final_sol.virtual_flow(l) - disturbed.flow_max(l));
  }

  const Eigen::VectorXd lap_phi = laplacian_apply(topo, final_sol.phi);
  std::vector<double> comp_total(static_cast<size_t>(topo.component_count()), 0.0);
  for (int i = 0; i < disturbed.bus_count(); ++i) {
    const double residual = disturbed.phys.p_in(i) - final_sol.d(i) - lap_phi(i);
    rep.absorption_residual = std::max(rep.absorption_residual, std::abs(residual));
    comp_total[static_cast<size_t>(topo.component_of()[static_cast<size_t>(i)])] +=
        disturbed.phys.p_in(i) - final_sol.d(i);
  }
  for (double total : comp_total)
    rep.component_balance = std::max(rep.component_balance, std::abs(total));

  rep.converged = rep.tail_max_omega <= 1e-4 && rep.primal_distance <= 1e-3;
  return rep;
}

std::vector<SweepEntry> sweep(const Scenario& base, const std::vector<double>& k_values,
                              int jobs) {
  const OlfcProblem oracle_problem = base.oracle_problem();
  const OlfcSolution oracle_sol = centralized_solve(oracle_problem);

  double lipschitz = 0.0;
  for (int i = 0; i < base.problem.bus_count(); ++i) {
    const size_t si = static_cast<size_t>(i);
    if (base.problem.controllable[si]) lipschitz = std::max(lipschitz, base.problem.cost_e[si].a);
    if (base.problem.heat_load[si]) lipschitz = std::max(lipschitz, base.problem.cost_h[si].a);
  }
  const double d_min = base.problem.phys.damping.minCoeff();
  const auto interval = robustness_interval(lipschitz, d_min);

  std::vector<SweepEntry> entries(k_values.size());
  std::atomic<size_t> cursor{0};
  auto worker = [&] {
    for (;;) {
      const size_t idx = cursor.fetch_add(1);
      if (idx >= k_values.size()) return;
      const double k = k_values[idx];
      SweepEntry& entry = entries[idx];
      entry.k = k;

      bool inside = true;
      for (int i = 0; i < base.problem.bus_count(); ++i) {
        const double tau = (k - 1.0) * base.problem.phys.damping(i);
        if (!(tau > interval.first && tau < interval.second)) inside = false;
      }
      entry.within_guarantee = inside;

      Scenario scenario = base;
      scenario.damping_model = InaccurateDamping::scaled(k, base.problem.bus_count());
      const EquilibriumPoint target =
          EquilibriumPoint::from_solution(oracle_problem, oracle_sol, scenario.gains);
      try {
        const RunResult run = simulate(scenario, &target);
        const SteadyStateReport rep = steady_state_report(run, scenario, oracle_sol, &target);
        for (const TrajectorySample& s : run.samples) {
          if (s.omega.size() > 0)
            entry.peak_abs_omega = std::max(entry.peak_abs_omega, s.omega.cwiseAbs().maxCoeff());
        }
        entry.tail_max_omega = rep.tail_max_omega;
        entry.settling_time = rep.settling_time;
        entry.settled = rep.settled;
        entry.primal_distance = rep.primal_distance;
        entry.u_violations = rep.u_violations;
        entry.u_checked_steps = rep.u_checked_steps;
        entry.verdict = rep.converged ? "converged" : "slow";
      } catch (const NumericalBlowup& blowup) {
        entry.verdict = "unstable";
        entry.blowup_time = blowup.time;
      }
    }
  };

  if (jobs <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int j = 0; j < jobs; ++j) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  return entries;
}

}  // namespace olfc
