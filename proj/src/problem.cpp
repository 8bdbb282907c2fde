#include "olfc/problem.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace olfc {

namespace {

void require(std::vector<std::string>& issues, bool ok, const std::string& msg) {
  if (!ok) issues.push_back(msg);
}

std::string bus_msg(BusId id, const std::string& what) {
  std::ostringstream os;
  os << "bus " << id << ": " << what;
  return os.str();
}

}  // namespace

void OlfcProblem::validate() const {
  std::vector<std::string> issues;
  const int n = topology.bus_count();
  const int m = topology.line_count();

  auto sized = [&](long got, const char* name, long want) {
    if (got != want) {
      std::ostringstream os;
      os << name << " has " << got << " entries, expected " << want;
      issues.push_back(os.str());
    }
  };
  sized(static_cast<long>(controllable.size()), "controllable", n);
  sized(static_cast<long>(heat_load.size()), "heat_load", n);
  sized(static_cast<long>(cost_e.size()), "cost_e", n);
  sized(static_cast<long>(cost_h.size()), "cost_h", n);
  sized(static_cast<long>(chp.size()), "chp", n);
  sized(phys.inertia.size(), "inertia", n);
  sized(phys.damping.size(), "damping", n);
  sized(phys.p_in.size(), "p_in", n);
  sized(phys.q_in.size(), "q_in", n);
  sized(phys.buffer_min.size(), "buffer_min", n);
  sized(phys.buffer_max.size(), "buffer_max", n);
  sized(d_min.size(), "d_min", n);
  sized(d_max.size(), "d_max", n);
  sized(flow_min.size(), "flow_min", m);
  sized(flow_max.size(), "flow_max", m);
  if (!issues.empty()) throw ValidationError(issues);

  for (int i = 0; i < n; ++i) {
    const BusId id = topology.bus_id(i);
    require(issues, phys.damping(i) > 0.0, bus_msg(id, "damping must be positive"));
    if (topology.is_generator(i))
      require(issues, phys.inertia(i) > 0.0, bus_msg(id, "generator inertia must be positive"));
    if (controllable[static_cast<size_t>(i)]) {
      require(issues, cost_e[static_cast<size_t>(i)].a > 0.0,
              bus_msg(id, "electric cost curvature must be positive"));
      require(issues, d_min(i) <= d_max(i), bus_msg(id, "d_min exceeds d_max"));
      require(issues, d_min(i) <= 0.0 && 0.0 <= d_max(i),
              bus_msg(id, "load-adjustment range must contain 0 (the pre-event point)"));
    }
    if (heat_load[static_cast<size_t>(i)]) {
      require(issues, cost_h[static_cast<size_t>(i)].a > 0.0,
              bus_msg(id, "heat cost curvature must be positive"));
      require(issues, phys.buffer_min(i) <= phys.buffer_max(i),
              bus_msg(id, "buffer_min exceeds buffer_max"));
      require(issues, phys.buffer_min(i) <= 0.0 && 0.0 <= phys.buffer_max(i),
              bus_msg(id, "buffer range must contain 0 (the pre-event point)"));
    } else {
      require(issues, chp[static_cast<size_t>(i)].empty(),
              bus_msg(id, "CHP coupling requires a heat load"));
    }
    if (!chp[static_cast<size_t>(i)].empty())
      require(issues, controllable[static_cast<size_t>(i)],
              bus_msg(id, "CHP coupling requires a controllable load"));
  }
  for (int l = 0; l < m; ++l) {
    const std::string label = "line " + topology.line_label(l);
    require(issues, flow_min(l) <= flow_max(l), label + ": flow_min exceeds flow_max");
    require(issues, flow_min(l) <= 0.0 && 0.0 <= flow_max(l),
            label + ": flow range must contain 0 (the pre-event point)");
  }
  if (!issues.empty()) throw ValidationError(issues);
}

int OlfcProblem::generator_count() const {
  int g = 0;
  for (int i = 0; i < bus_count(); ++i)
    if (topology.is_generator(i)) ++g;
  return g;
}

double OlfcProblem::objective(const Eigen::VectorXd& d, const Eigen::VectorXd& q,
                              const Eigen::VectorXd& omega) const {
  double total = 0.0;
  for (int i = 0; i < bus_count(); ++i) {
    if (controllable[static_cast<size_t>(i)]) total += cost_e[static_cast<size_t>(i)].value(d(i));
    if (heat_load[static_cast<size_t>(i)]) total += cost_h[static_cast<size_t>(i)].value(q(i));
    total += 0.5 * phys.damping(i) * omega(i) * omega(i);
  }
  return total;
}

bool OlfcProblem::chp_feasible(int bus, double d, double q, double tol) const {
  const ChpRegion& region = chp[static_cast<size_t>(bus)];
  for (const HalfPlane& hp : region.upper)
    if (q - (hp.slope * d + hp.offset) > tol) return false;
  for (const HalfPlane& hp : region.lower)
    if ((hp.slope * d + hp.offset) - q > tol) return false;
  return true;
}

double OlfcProblem::chp_violation(const Eigen::VectorXd& d, const Eigen::VectorXd& q) const {
  double worst = 0.0;
  for (int i = 0; i < bus_count(); ++i) {
    const ChpRegion& region = chp[static_cast<size_t>(i)];
    for (const HalfPlane& hp : region.upper)
      worst = std::max(worst, q(i) - (hp.slope * d(i) + hp.offset));
    for (const HalfPlane& hp : region.lower)
      worst = std::max(worst, (hp.slope * d(i) + hp.offset) - q(i));
  }
  return worst;
}

double KktResidual::max() const {
  return std::max(std::max(stationarity, primal), std::max(dual, complementarity));
}

KktResidual kkt_residual(const OlfcProblem& problem, const OlfcSolution& sol) {
  const NetworkTopology& topo = problem.topology;
  const int n = topo.bus_count();
  const int m = topo.line_count();
  KktResidual res;

  auto stat = [&](double v) { res.stationarity = std::max(res.stationarity, std::abs(v)); };
  auto primal = [&](double violation) { res.primal = std::max(res.primal, violation); };
  auto dual = [&](double mult) { res.dual = std::max(res.dual, std::max(0.0, -mult)); };
  // g is the constraint value in g <= 0 form.
  auto comp = [&](double mult, double g) {
    dual(mult);
    primal(std::max(0.0, g));
    res.complementarity = std::max(res.complementarity, std::abs(mult * g));
  };

  const Eigen::VectorXd lap_phi = laplacian_apply(topo, sol.phi);
  const Eigen::VectorXd lap_mu = laplacian_apply(topo, sol.mu);

  for (int i = 0; i < n; ++i) {
    const size_t si = static_cast<size_t>(i);
    const double net = net_line_injection(i, sol.line_flow, topo);

    primal(std::abs(problem.phys.p_in(i) - sol.d(i) - problem.phys.damping(i) * sol.omega(i) - net));
    primal(std::abs(problem.phys.p_in(i) - sol.d(i) - lap_phi(i)));

    stat(problem.phys.damping(i) * (sol.omega(i) - sol.lambda(i)));

    if (problem.controllable[si]) {
      double s = problem.cost_e[si].marginal(sol.d(i)) - sol.lambda(i) - sol.mu(i) -
                 sol.gamma_lo(i) + sol.gamma_hi(i);
      const ChpRegion& region = problem.chp[si];
      for (size_t row = 0; row < region.upper.size(); ++row)
        s -= sol.zeta_up[si](static_cast<long>(row)) * region.upper[row].slope;
      for (size_t row = 0; row < region.lower.size(); ++row)
        s += sol.zeta_dn[si](static_cast<long>(row)) * region.lower[row].slope;
      stat(s);

      comp(sol.gamma_lo(i), problem.d_min(i) - sol.d(i));
      comp(sol.gamma_hi(i), sol.d(i) - problem.d_max(i));
    }

    if (problem.heat_load[si]) {
      double s = problem.cost_h[si].marginal(sol.q(i)) - sol.delta_hi(i) + sol.delta_lo(i);
      for (long row = 0; row < sol.zeta_up[si].size(); ++row) s += sol.zeta_up[si](row);
      for (long row = 0; row < sol.zeta_dn[si].size(); ++row) s -= sol.zeta_dn[si](row);
      stat(s);

      const double buffer = heat_buffer(problem.phys.q_in(i), sol.q(i));
      comp(sol.delta_hi(i), buffer - problem.phys.buffer_max(i));
      comp(sol.delta_lo(i), problem.phys.buffer_min(i) - buffer);

      for (size_t row = 0; row < problem.chp[si].upper.size(); ++row) {
        const HalfPlane& hp = problem.chp[si].upper[row];
        comp(sol.zeta_up[si](static_cast<long>(row)), sol.q(i) - hp.slope * sol.d(i) - hp.offset);
      }
      for (size_t row = 0; row < problem.chp[si].lower.size(); ++row) {
        const HalfPlane& hp = problem.chp[si].lower[row];
        comp(sol.zeta_dn[si](static_cast<long>(row)), hp.slope * sol.d(i) + hp.offset - sol.q(i));
      }
    }

    // Virtual-phase stationarity; the sigma difference enters through the
    // incident lines of the bus.
    double s_phi = -lap_mu(i);
    for (const auto& inc : topo.incident(i))
      s_phi -= inc.sign * topo.susceptance(inc.line) *
               (sol.sigma_lo(inc.line) - sol.sigma_hi(inc.line));
    stat(s_phi);
  }

  for (int l = 0; l < m; ++l) {
    const double v = sol.virtual_flow(l);
    primal(std::abs(v - dc_flow(topo.susceptance(l), sol.phi(topo.line_from(l)), sol.phi(topo.line_to(l)))));
    comp(sol.sigma_lo(l), problem.flow_min(l) - v);
    comp(sol.sigma_hi(l), v - problem.flow_max(l));
    // Physical-flow stationarity: the balance price must agree across a line.
    stat(sol.lambda(topo.line_from(l)) - sol.lambda(topo.line_to(l)));
  }

  return res;
}

}  // namespace olfc
