#pragma once

#include <vector>

#include "olfc/sim.hpp"

namespace olfc {
namespace test {

/// Chain of n buses (ids 1..n), unit physical constants, B = 5 on every line,
/// controllable everywhere, no heat. `generator` overrides the bus kinds.
inline OlfcProblem chain_problem(int n, std::vector<bool> generator = {}) {
  std::vector<BusId> ids;
  std::vector<NetworkTopology::Line> lines;
  if (generator.empty()) generator.assign(static_cast<size_t>(n), true);
  for (int i = 0; i < n; ++i) ids.push_back(i + 1);
  for (int i = 0; i + 1 < n; ++i) lines.push_back({i + 1, i + 2, 5.0});

  OlfcProblem p;
  p.topology = NetworkTopology(ids, generator, lines);
  const int m = p.topology.line_count();
  p.phys.inertia = Eigen::VectorXd::Ones(n);
  p.phys.damping = Eigen::VectorXd::Ones(n);
  p.phys.p_in = Eigen::VectorXd::Zero(n);
  p.phys.q_in = Eigen::VectorXd::Zero(n);
  p.phys.buffer_min = Eigen::VectorXd::Constant(n, -1.0);
  p.phys.buffer_max = Eigen::VectorXd::Constant(n, 1.0);
  p.controllable.assign(static_cast<size_t>(n), true);
  p.heat_load.assign(static_cast<size_t>(n), false);
  p.cost_e.assign(static_cast<size_t>(n), QuadraticCost{});
  p.cost_h.assign(static_cast<size_t>(n), QuadraticCost{});
  p.d_min = Eigen::VectorXd::Constant(n, -1.0);
  p.d_max = Eigen::VectorXd::Constant(n, 1.0);
  p.chp.assign(static_cast<size_t>(n), ChpRegion{});
  p.flow_min = Eigen::VectorXd::Constant(m, -10.0);
  p.flow_max = Eigen::VectorXd::Constant(m, 10.0);
  return p;
}

/// Short closed-loop scenario around chain_problem with the stabilized
/// default gains (fast primal tracking, unit dual steps).
inline Scenario chain_scenario(int n, double duration = 10.0) {
  Scenario s;
  s.name = "chain";
  s.problem = chain_problem(n);
  s.gains = ControllerGains::uniform(n);
  s.gains.eps_d = Eigen::VectorXd::Constant(n, 10.0);
  s.gains.eps_q = Eigen::VectorXd::Constant(n, 10.0);
  s.damping_model = InaccurateDamping::exact(n);
  s.integrator.duration = duration;
  return s;
}

}  // namespace test
}  // namespace olfc
