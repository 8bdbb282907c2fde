#include "olfc/controller.hpp"

#include <algorithm>
#include <cmath>

namespace olfc {

namespace {

void check_positive(std::vector<std::string>& issues, const Eigen::VectorXd& v, int n,
                    const char* name) {
  if (v.size() != n) {
    issues.push_back(std::string(name) + " gain vector has the wrong length");
    return;
  }
  for (int i = 0; i < n; ++i)
    if (!(v(i) > 0.0)) {
      issues.push_back(std::string(name) + " gain must be strictly positive at every bus");
      return;
    }
}

/// Message lookup by sender id; inboxes are sorted.
const NeighborMessage& message_from(const Inbox& inbox, BusId sender, BusId recipient) {
  auto it = std::lower_bound(inbox.begin(), inbox.end(), sender,
                             [](const NeighborMessage& m, BusId id) { return m.sender < id; });
  if (it == inbox.end() || it->sender != sender) throw MissingNeighborMessage(recipient, sender);
  return *it;
}

}  // namespace

ControllerGains ControllerGains::uniform(int bus_count, double value) {
  ControllerGains g;
  g.eps_d = g.eps_q = g.eps_phi = g.eps_lambda = g.eps_mu = g.k_r =
      Eigen::VectorXd::Constant(bus_count, value);
  g.eps_zeta = g.eps_gamma = g.eps_delta = g.eps_sigma = value;
  return g;
}

void ControllerGains::validate(int bus_count) const {
  std::vector<std::string> issues;
  check_positive(issues, eps_d, bus_count, "eps_d");
  check_positive(issues, eps_q, bus_count, "eps_q");
  check_positive(issues, eps_phi, bus_count, "eps_phi");
  check_positive(issues, eps_lambda, bus_count, "eps_lambda");
  check_positive(issues, eps_mu, bus_count, "eps_mu");
  check_positive(issues, k_r, bus_count, "k_r");
  if (!(eps_zeta > 0.0)) issues.push_back("eps_zeta must be strictly positive");
  if (!(eps_gamma > 0.0)) issues.push_back("eps_gamma must be strictly positive");
  if (!(eps_delta > 0.0)) issues.push_back("eps_delta must be strictly positive");
  if (!(eps_sigma > 0.0)) issues.push_back("eps_sigma must be strictly positive");
  if (!issues.empty()) throw ValidationError(issues);
}

InaccurateDamping InaccurateDamping::exact(int bus_count) {
  return {Eigen::VectorXd::Ones(bus_count), Eigen::VectorXd::Zero(bus_count)};
}

InaccurateDamping InaccurateDamping::scaled(double k, int bus_count) {
  return {Eigen::VectorXd::Constant(bus_count, k), Eigen::VectorXd::Zero(bus_count)};
}

InaccurateDamping InaccurateDamping::additive(double tau, int bus_count) {
  return {Eigen::VectorXd::Ones(bus_count), Eigen::VectorXd::Constant(bus_count, tau)};
}

Eigen::VectorXd InaccurateDamping::effective(const Eigen::VectorXd& damping) const {
  return scale.cwiseProduct(damping) + offset;
}

ControllerState ControllerState::zero(const OlfcProblem& problem) {
  const int n = problem.bus_count();
  const int m = problem.line_count();
  ControllerState s;
  s.d = s.q = s.phi = s.r = Eigen::VectorXd::Zero(n);
  s.gamma_lo = s.gamma_hi = s.delta_lo = s.delta_hi = Eigen::VectorXd::Zero(n);
  s.zeta_up.resize(static_cast<size_t>(n));
  s.zeta_dn.resize(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    const size_t si = static_cast<size_t>(i);
    s.zeta_up[si] = Eigen::VectorXd::Zero(static_cast<long>(problem.chp[si].upper.size()));
    s.zeta_dn[si] = Eigen::VectorXd::Zero(static_cast<long>(problem.chp[si].lower.size()));
  }
  s.sigma_lo = s.sigma_hi = Eigen::VectorXd::Zero(m);
  return s;
}

Eigen::VectorXd recover_mu_all(const ControllerState& state, const Eigen::VectorXd& omega,
                               const ControllerGains& gains, const NetworkTopology& topology) {
  const int n = topology.bus_count();
  Eigen::VectorXd mu(n);
  for (int i = 0; i < n; ++i) {
    mu(i) = (gains.eps_mu(i) / gains.k_r(i)) * state.r(i);
    if (topology.is_generator(i)) mu(i) += (gains.eps_mu(i) / gains.eps_lambda(i)) * omega(i);
  }
  return mu;
}

std::pair<double, double> robustness_interval(double lipschitz, double damping_min) {
  const double dp = 1.0 / lipschitz;
  const double radical = std::sqrt(dp * dp + dp * damping_min);
  return {2.0 * (dp - radical), dp + radical};
}

ControllerDerivatives controller_derivatives(const ControllerState& state,
                                             const Eigen::VectorXd& omega,
                                             const Eigen::VectorXd& line_flow,
                                             const std::vector<Inbox>& inboxes,
                                             const OlfcProblem& problem,
                                             const ControllerGains& gains,
                                             const Eigen::VectorXd& damping_used,
                                             bool chp_enforced) {
  const NetworkTopology& topo = problem.topology;
  const int n = topo.bus_count();
  ControllerDerivatives rate = ControllerState::zero(problem);

  const Eigen::VectorXd mu = recover_mu_all(state, omega, gains, topo);

  for (int i = 0; i < n; ++i) {
    const size_t si = static_cast<size_t>(i);
    const BusId id = topo.bus_id(i);
    const Inbox& inbox = inboxes[si];

    double lap_mu = 0.0, lap_phi = 0.0, sigma_term = 0.0, net_flow = 0.0;
    for (const auto& inc : topo.incident(i)) {
      const NeighborMessage& msg = message_from(inbox, topo.bus_id(inc.other), id);
      const double b = topo.susceptance(inc.line);
      lap_mu += b * (mu(i) - msg.mu);
      lap_phi += b * (state.phi(i) - msg.phi);
      sigma_term += inc.sign * b * (state.sigma_lo(inc.line) - state.sigma_hi(inc.line));
      net_flow += inc.sign * line_flow(inc.line);
    }

    rate.phi(i) = gains.eps_phi(i) * (lap_mu + sigma_term);
    rate.r(i) = gains.k_r(i) * (damping_used(i) * omega(i) + net_flow - lap_phi);

    const bool chp_active = chp_enforced && !problem.chp[si].empty();

    if (problem.controllable[si]) {
      // The r term carries the price minus (eps_mu/eps_lambda) omega, so the
      // bracket needs weight (eps_lambda + eps_mu)/eps_lambda on omega for the
      // effective gradient to be marginal - omega - price. Load buses track
      // the price directly and only need the bare omega term.
      const double c_omega =
          topo.is_generator(i) ? (gains.eps_lambda(i) + gains.eps_mu(i)) / gains.eps_lambda(i)
                               : 1.0;
      double bracket = problem.cost_e[si].marginal(state.d(i)) - c_omega * omega(i) -
                       (gains.eps_mu(i) / gains.k_r(i)) * state.r(i) - state.gamma_lo(i) +
                       state.gamma_hi(i);
      if (chp_active) {
        for (size_t row = 0; row < problem.chp[si].upper.size(); ++row)
          bracket -= state.zeta_up[si](static_cast<long>(row)) * problem.chp[si].upper[row].slope;
        for (size_t row = 0; row < problem.chp[si].lower.size(); ++row)
          bracket += state.zeta_dn[si](static_cast<long>(row)) * problem.chp[si].lower[row].slope;
      }
      rate.d(i) = -gains.eps_d(i) * bracket;

      rate.gamma_lo(i) = gains.eps_gamma *
                         positive_projection(problem.d_min(i) - state.d(i), state.gamma_lo(i));
      rate.gamma_hi(i) = gains.eps_gamma *
                         positive_projection(state.d(i) - problem.d_max(i), state.gamma_hi(i));
    }

    if (problem.heat_load[si]) {
      double bracket = problem.cost_h[si].marginal(state.q(i)) - state.delta_hi(i) +
                       state.delta_lo(i);
      if (chp_active) {
        bracket += state.zeta_up[si].sum();
        bracket -= state.zeta_dn[si].sum();
      }
      rate.q(i) = -gains.eps_q(i) * bracket;

      const double buffer = heat_buffer(problem.phys.q_in(i), state.q(i));
      rate.delta_hi(i) = gains.eps_delta *
                         positive_projection(buffer - problem.phys.buffer_max(i), state.delta_hi(i));
      rate.delta_lo(i) = gains.eps_delta *
                         positive_projection(problem.phys.buffer_min(i) - buffer, state.delta_lo(i));

      if (chp_active) {
        for (size_t row = 0; row < problem.chp[si].upper.size(); ++row) {
          const HalfPlane& hp = problem.chp[si].upper[row];
          rate.zeta_up[si](static_cast<long>(row)) =
              gains.eps_zeta * positive_projection(state.q(i) - hp.slope * state.d(i) - hp.offset,
                                                   state.zeta_up[si](static_cast<long>(row)));
        }
        for (size_t row = 0; row < problem.chp[si].lower.size(); ++row) {
          const HalfPlane& hp = problem.chp[si].lower[row];
          rate.zeta_dn[si](static_cast<long>(row)) =
              gains.eps_zeta * positive_projection(hp.slope * state.d(i) + hp.offset - state.q(i),
                                                   state.zeta_dn[si](static_cast<long>(row)));
        }
      }
    }
  }

  // Line multipliers live at the line's tail bus; the head's phase arrives
  // through the tail's inbox, keeping the update neighbor-local.
  for (int l = 0; l < topo.line_count(); ++l) {
    const int tail = topo.line_from(l);
    const NeighborMessage& msg =
        message_from(inboxes[static_cast<size_t>(tail)], topo.bus_id(topo.line_to(l)),
                     topo.bus_id(tail));
    const double v = dc_flow(topo.susceptance(l), state.phi(tail), msg.phi);
    rate.sigma_lo(l) =
        gains.eps_sigma * positive_projection(problem.flow_min(l) - v, state.sigma_lo(l));
    rate.sigma_hi(l) =
        gains.eps_sigma * positive_projection(v - problem.flow_max(l), state.sigma_hi(l));
  }

  return rate;
}

void apply_instantaneous_primal(ControllerState& state, const Eigen::VectorXd& omega,
                                const OlfcProblem& problem, const ControllerGains& gains,
                                bool chp_enforced) {
  const NetworkTopology& topo = problem.topology;
  for (int i = 0; i < problem.bus_count(); ++i) {
    const size_t si = static_cast<size_t>(i);
    const bool chp_active = chp_enforced && !problem.chp[si].empty();
    if (problem.controllable[si]) {
      const double c_omega =
          topo.is_generator(i) ? (gains.eps_lambda(i) + gains.eps_mu(i)) / gains.eps_lambda(i)
                               : 1.0;
      double marginal = c_omega * omega(i) + (gains.eps_mu(i) / gains.k_r(i)) * state.r(i) +
                        state.gamma_lo(i) - state.gamma_hi(i);
      if (chp_active) {
        for (size_t row = 0; row < problem.chp[si].upper.size(); ++row)
          marginal += state.zeta_up[si](static_cast<long>(row)) * problem.chp[si].upper[row].slope;
        for (size_t row = 0; row < problem.chp[si].lower.size(); ++row)
          marginal -= state.zeta_dn[si](static_cast<long>(row)) * problem.chp[si].lower[row].slope;
      }
      state.d(i) = problem.cost_e[si].inverse_marginal(marginal);
    }
    if (problem.heat_load[si]) {
      double marginal = state.delta_hi(i) - state.delta_lo(i);
      if (chp_active) marginal += -state.zeta_up[si].sum() + state.zeta_dn[si].sum();
      state.q(i) = problem.cost_h[si].inverse_marginal(marginal);
    }
  }
}

}  // namespace olfc
