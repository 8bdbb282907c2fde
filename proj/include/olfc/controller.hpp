#pragma once

#include <utility>
#include <vector>

#include "olfc/comm.hpp"
#include "olfc/problem.hpp"

namespace olfc {

/// Step sizes of the distributed gradient flow. Per-bus entries exist for
/// every bus even where the corresponding state is inactive.
struct ControllerGains {
  Eigen::VectorXd eps_d, eps_q, eps_phi, eps_lambda, eps_mu, k_r;
  double eps_zeta = 1.0, eps_gamma = 1.0, eps_delta = 1.0, eps_sigma = 1.0;

  static ControllerGains uniform(int bus_count, double value = 1.0);
  /// Throws ValidationError unless every gain is strictly positive.
  void validate(int bus_count) const;
};

/// Damping estimate the controller runs with: D_used = scale.*D + offset.
struct InaccurateDamping {
  Eigen::VectorXd scale, offset;

  static InaccurateDamping exact(int bus_count);
  static InaccurateDamping scaled(double k, int bus_count);
  static InaccurateDamping additive(double tau, int bus_count);
  Eigen::VectorXd effective(const Eigen::VectorXd& damping) const;
};

/// Everything a bus or line integrates locally. Multipliers are named after
/// the bound they enforce (gamma: load range, delta: heat buffer, zeta: CHP
/// half-planes, sigma: virtual line-flow range).
struct ControllerState {
  Eigen::VectorXd d, q;    // per bus, live where controllable / heat_load
  Eigen::VectorXd phi, r;  // per bus
  Eigen::VectorXd gamma_lo, gamma_hi;  // per bus, live where controllable
  Eigen::VectorXd delta_lo, delta_hi;  // per bus, live where heat_load
  std::vector<Eigen::VectorXd> zeta_up, zeta_dn;  // per bus, one per CHP row
  Eigen::VectorXd sigma_lo, sigma_hi;  // per line

  static ControllerState zero(const OlfcProblem& problem);
};

/// Rates share the state's shape.
using ControllerDerivatives = ControllerState;

/// Multiplier-preserving rate projection: pass w through unless it would push
/// a zero multiplier negative.
inline double positive_projection(double w, double v) { return (w > 0.0 || v > 0.0) ? w : 0.0; }

/// Inverts the definition r = (K/eps_mu)*mu - (K/eps_lambda)*omega.
inline double recover_mu(double r, double omega, double k, double eps_mu, double eps_lambda) {
  return (eps_mu / k) * r + (eps_mu / eps_lambda) * omega;
}

/// Price estimate per bus. Load buses carry no frequency correction: their
/// balance is algebraic, so mu equals (eps_mu/K)*r exactly.
Eigen::VectorXd recover_mu_all(const ControllerState& state, const Eigen::VectorXd& omega,
                               const ControllerGains& gains, const NetworkTopology& topology);

/// Additive damping-error interval for which convergence is still guaranteed
/// (sufficient condition): with d' = 1/lipschitz,
/// (2(d' - sqrt(d'^2 + d'*d_min)), d' + sqrt(d'^2 + d'*d_min)).
std::pair<double, double> robustness_interval(double lipschitz, double damping_min);

/// One evaluation of every bus/line update law. Neighbor values come only
/// from the per-bus inboxes; a missing neighbor message is a hard error.
/// `damping_used` is the (possibly wrong) damping the r-updates run with.
/// With chp_enforced false, the CHP multipliers are frozen and their coupling
/// terms dropped.
ControllerDerivatives controller_derivatives(const ControllerState& state,
                                             const Eigen::VectorXd& omega,
                                             const Eigen::VectorXd& line_flow,
                                             const std::vector<Inbox>& inboxes,
                                             const OlfcProblem& problem,
                                             const ControllerGains& gains,
                                             const Eigen::VectorXd& damping_used,
                                             bool chp_enforced = true);

/// High-gain limit of the d/q dynamics: overwrite d and q with the points
/// where their update brackets vanish (one division for quadratic costs).
void apply_instantaneous_primal(ControllerState& state, const Eigen::VectorXd& omega,
                                const OlfcProblem& problem, const ControllerGains& gains,
                                bool chp_enforced = true);

}  // namespace olfc
