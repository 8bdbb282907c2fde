#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "olfc/network.hpp"
#include "olfc/types.hpp"

namespace olfc {

/// Quadratic cost 0.5*a*x^2 + b*x with a > 0 (strict convexity is required
/// for a unique optimum and for the inverse-marginal-cost controller mode).
struct QuadraticCost {
  double a = 1.0;
  double b = 0.0;

  double value(double x) const { return 0.5 * a * x * x + b * x; }
  double marginal(double x) const { return a * x + b; }
  double inverse_marginal(double m) const { return (m - b) / a; }
};

/// One half-plane of a CHP operating region. Upper rows bound the heat output
/// from above (q <= slope*d + offset); lower rows bound it from below
/// (q >= slope*d + offset).
struct HalfPlane {
  double slope = 0.0;
  double offset = 0.0;
};

/// Convex polytope coupling electric load served (d) with heat produced (q)
/// at a CHP bus. Empty row sets mean no coupling on that side.
struct ChpRegion {
  std::vector<HalfPlane> upper;
  std::vector<HalfPlane> lower;

  bool empty() const { return upper.empty() && lower.empty(); }
};

/// Steady-state planning problem the controller drives the grid towards:
/// minimize total generation-adjustment and heat-adjustment cost plus the
/// frequency-deviation penalty, subject to power balance, per-bus load
/// limits, heat-buffer limits, CHP coupling, and virtual line-flow limits.
class OlfcProblem {
public:
  NetworkTopology topology;
  BusPhysicalParams phys;

  std::vector<bool> controllable;      // per bus: d is a decision variable
  std::vector<bool> heat_load;         // per bus: q is a decision variable
  std::vector<QuadraticCost> cost_e;   // per bus; used when controllable
  std::vector<QuadraticCost> cost_h;   // per bus; used when heat_load
  Eigen::VectorXd d_min, d_max;        // per bus load-adjustment range
  std::vector<ChpRegion> chp;          // per bus; empty when uncoupled
  Eigen::VectorXd flow_min, flow_max;  // per line virtual-flow range

  /// Throws ValidationError (every violation listed) on inconsistent sizes,
  /// non-positive curvatures, inverted bounds, or ranges that exclude zero
  /// where the dynamics start.
  void validate() const;

  int bus_count() const { return topology.bus_count(); }
  int line_count() const { return topology.line_count(); }
  int generator_count() const;

  /// Total objective: electric cost over controllable buses, heat cost over
  /// heat-load buses, plus 0.5*D_i*omega_i^2 over all buses.
  double objective(const Eigen::VectorXd& d, const Eigen::VectorXd& q,
                   const Eigen::VectorXd& omega) const;

  /// True when (d, q) satisfies every CHP half-plane at the bus within tol.
  bool chp_feasible(int bus, double d, double q, double tol = 1e-9) const;

  /// Largest CHP half-plane violation across buses, 0 when feasible.
  double chp_violation(const Eigen::VectorXd& d, const Eigen::VectorXd& q) const;
};

/// Primal-dual solution of the planning problem. Multiplier vectors follow
/// the bound they enforce: *_lo pushes the variable up from its lower bound,
/// *_hi pushes it down from its upper bound. All are >= 0 at an optimum.
struct OlfcSolution {
  Eigen::VectorXd d;         // per bus (zero where not controllable)
  Eigen::VectorXd q;         // per bus (zero where no heat load)
  Eigen::VectorXd omega;     // per bus
  Eigen::VectorXd phi;       // virtual phase per bus, pinned per component
  Eigen::VectorXd virtual_flow;  // per line: B*(phi_from - phi_to)
  Eigen::VectorXd line_flow;     // per line physical flow
  Eigen::VectorXd mu;        // virtual balance price per bus
  Eigen::VectorXd lambda;    // physical balance price per bus (equals omega)

  Eigen::VectorXd gamma_lo, gamma_hi;  // d lower/upper bound multipliers
  Eigen::VectorXd delta_lo, delta_hi;  // buffer lower/upper bound multipliers
  std::vector<Eigen::VectorXd> zeta_up;  // per bus, one entry per upper CHP row
  std::vector<Eigen::VectorXd> zeta_dn;  // per bus, one entry per lower CHP row
  Eigen::VectorXd sigma_lo, sigma_hi;  // per line virtual-flow bound multipliers

  double objective = 0.0;
};

/// Blockwise KKT residual: stationarity (gradient of the Lagrangian in d, q,
/// phi), primal feasibility (violation of every constraint), dual feasibility
/// (negative part of every multiplier), and complementary slackness.
struct KktResidual {
  double stationarity = 0.0;
  double primal = 0.0;
  double dual = 0.0;
  double complementarity = 0.0;

  double max() const;
};

KktResidual kkt_residual(const OlfcProblem& problem, const OlfcSolution& sol);

}  // namespace olfc
