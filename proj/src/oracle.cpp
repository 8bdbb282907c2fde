#include "olfc/oracle.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <vector>

namespace olfc {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

/// Feasible q interval at one bus for a fixed d: intersection of the buffer
/// box with every CHP half-plane.
struct QInterval {
  double lo, hi;
};

QInterval q_interval(const OlfcProblem& problem, int bus, double d) {
  const size_t si = static_cast<size_t>(bus);
  QInterval r{problem.phys.q_in(bus) - problem.phys.buffer_max(bus),
              problem.phys.q_in(bus) - problem.phys.buffer_min(bus)};
  for (const HalfPlane& hp : problem.chp[si].upper) r.hi = std::min(r.hi, hp.slope * d + hp.offset);
  for (const HalfPlane& hp : problem.chp[si].lower) r.lo = std::max(r.lo, hp.slope * d + hp.offset);
  return r;
}

/// Largest q-interval width over d in [d_lo, d_hi]. The width is a concave
/// piecewise-linear function of d, so the maximum sits at an interval end or
/// at an intersection of two of the affine pieces.
double best_q_gap(const OlfcProblem& problem, int bus, double d_lo, double d_hi) {
  const size_t si = static_cast<size_t>(bus);
  std::vector<std::pair<double, double>> pieces;  // (slope, offset) of every bounding line
  pieces.push_back({0.0, problem.phys.q_in(bus) - problem.phys.buffer_max(bus)});
  pieces.push_back({0.0, problem.phys.q_in(bus) - problem.phys.buffer_min(bus)});
  for (const HalfPlane& hp : problem.chp[si].upper) pieces.push_back({hp.slope, hp.offset});
  for (const HalfPlane& hp : problem.chp[si].lower) pieces.push_back({hp.slope, hp.offset});

  std::vector<double> candidates{d_lo, d_hi};
  for (size_t a = 0; a < pieces.size(); ++a) {
    for (size_t b = a + 1; b < pieces.size(); ++b) {
      const double ds = pieces[a].first - pieces[b].first;
      if (std::abs(ds) < 1e-14) continue;
      const double d = (pieces[b].second - pieces[a].second) / ds;
      if (d >= d_lo && d <= d_hi) candidates.push_back(d);
    }
  }
  double best = -kInf;
  for (double d : candidates) {
    const QInterval qi = q_interval(problem, bus, d);
    best = std::max(best, qi.hi - qi.lo);
  }
  return best;
}

struct Qp {
  Eigen::VectorXd quad;  // diagonal of the quadratic term
  Eigen::VectorXd lin;
  Eigen::MatrixXd a;
  Eigen::VectorXd lo, hi;
};

struct QpResult {
  Eigen::VectorXd x, y;
  int iterations = 0;
  double residual = 0.0;
};

bool polish(const Qp& qp, QpResult& r, double y_tol) {
  const long nx = qp.quad.size();
  const long nr = qp.a.rows();
  std::vector<long> active;
  std::vector<int> side(static_cast<size_t>(nr), 0);  // -1 lower, +1 upper, 2 equality
  for (long row = 0; row < nr; ++row) {
    if (qp.lo(row) == qp.hi(row)) {
      side[static_cast<size_t>(row)] = 2;
      active.push_back(row);
    } else if (r.y(row) > y_tol) {
      side[static_cast<size_t>(row)] = 1;
      active.push_back(row);
    } else if (r.y(row) < -y_tol) {
      side[static_cast<size_t>(row)] = -1;
      active.push_back(row);
    }
  }
  const long na = static_cast<long>(active.size());
  Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(nx + na, nx + na);
  Eigen::VectorXd rhs(nx + na);
  kkt.topLeftCorner(nx, nx) = qp.quad.asDiagonal();
  kkt.topLeftCorner(nx, nx).diagonal().array() += 1e-12;
  rhs.head(nx) = -qp.lin;
  for (long k = 0; k < na; ++k) {
    const long row = active[static_cast<size_t>(k)];
    kkt.block(nx + k, 0, 1, nx) = qp.a.row(row);
    kkt.block(0, nx + k, nx, 1) = qp.a.row(row).transpose();
    kkt(nx + k, nx + k) = -1e-12;
    rhs(nx + k) = side[static_cast<size_t>(row)] == -1 ? qp.lo(row) : qp.hi(row);
  }

  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(kkt);
  const Eigen::VectorXd sol = cod.solve(rhs);
  if (!sol.allFinite()) return false;

  Eigen::VectorXd x = sol.head(nx);
  Eigen::VectorXd y = Eigen::VectorXd::Zero(nr);
  for (long k = 0; k < na; ++k) y(active[static_cast<size_t>(k)]) = sol(nx + k);

  const double vtol = 1e-9;
  for (long row = 0; row < nr; ++row) {
    if (side[static_cast<size_t>(row)] == 1 && y(row) < -vtol) return false;
    if (side[static_cast<size_t>(row)] == -1 && y(row) > vtol) return false;
  }
  const Eigen::VectorXd ax = qp.a * x;
  double primal = 0.0;
  for (long row = 0; row < nr; ++row)
    primal = std::max(primal, std::max(qp.lo(row) - ax(row), ax(row) - qp.hi(row)));
  const double stat =
      (qp.quad.asDiagonal() * x + qp.lin + qp.a.transpose() * y).lpNorm<Eigen::Infinity>();
  if (primal > vtol || stat > vtol) return false;

  r.x = x;
  r.y = y;
  r.residual = std::max(std::max(primal, 0.0), stat);
  return true;
}

QpResult solve_qp(const Qp& qp, const OracleOptions& options) {
  const long nx = qp.quad.size();
  const long nr = qp.a.rows();
  const double sigma = 1e-6;
  const double alpha = 1.6;
  double rho_base = 0.1;

  Eigen::VectorXd rho(nr);
  auto fill_rho = [&] {
    for (long row = 0; row < nr; ++row)
      rho(row) = (qp.lo(row) == qp.hi(row)) ? rho_base * 1e3 : rho_base;
  };
  fill_rho();

  Eigen::LDLT<Eigen::MatrixXd> fact;
  auto refactor = [&] {
    Eigen::MatrixXd kkt = Eigen::MatrixXd(qp.quad.asDiagonal());
    kkt.diagonal().array() += sigma;
    kkt.noalias() += qp.a.transpose() * rho.asDiagonal() * qp.a;
    fact.compute(kkt);
  };
  refactor();

  QpResult r;
  r.x = Eigen::VectorXd::Zero(nx);
  r.y = Eigen::VectorXd::Zero(nr);
  Eigen::VectorXd z = Eigen::VectorXd::Zero(nr).cwiseMax(qp.lo).cwiseMin(qp.hi);

  const double eps = 1e-9;
  double r_prim = kInf, r_dual = kInf;
  int it = 0;
  for (; it < options.max_iterations; ++it) {
    const Eigen::VectorXd rhs =
        sigma * r.x - qp.lin + qp.a.transpose() * (rho.cwiseProduct(z) - r.y);
    const Eigen::VectorXd x_new = fact.solve(rhs);
    const Eigen::VectorXd ax = qp.a * x_new;
    const Eigen::VectorXd ax_rel = alpha * ax + (1.0 - alpha) * z;
    const Eigen::VectorXd z_new =
        (ax_rel + r.y.cwiseQuotient(rho)).cwiseMax(qp.lo).cwiseMin(qp.hi);
    r.y += rho.cwiseProduct(ax_rel - z_new);
    r.x = x_new;
    z = z_new;

    if (it % 25 == 24) {
      r_prim = (qp.a * r.x - z).lpNorm<Eigen::Infinity>();
      r_dual = (qp.quad.asDiagonal() * r.x + qp.lin + qp.a.transpose() * r.y)
                   .lpNorm<Eigen::Infinity>();
      if (r_prim < eps && r_dual < eps) break;
      if (it % 2000 == 1999 && r_dual > 1e-300) {
        const double scale_p = std::max({(qp.a * r.x).lpNorm<Eigen::Infinity>(),
                                         z.lpNorm<Eigen::Infinity>(), 1e-12});
        const double scale_d = std::max({(qp.quad.asDiagonal() * r.x).lpNorm<Eigen::Infinity>(),
                                         (qp.a.transpose() * r.y).lpNorm<Eigen::Infinity>(),
                                         qp.lin.lpNorm<Eigen::Infinity>(), 1e-12});
        const double ratio = std::sqrt((r_prim / scale_p) / (r_dual / scale_d));
        if (ratio > 5.0 || ratio < 0.2) {
          rho_base = std::clamp(rho_base * ratio, 1e-6, 1e6);
          fill_rho();
          refactor();
        }
      }
    }
  }
  r.iterations = it;
  r.residual = std::max(r_prim, r_dual);

  for (double y_tol : {1e-6, 1e-4, 1e-8}) {
    QpResult candidate = r;
    if (polish(qp, candidate, y_tol)) {
      candidate.iterations = r.iterations;
      return candidate;
    }
  }
  if (r.residual > 1e-6)
    throw NonConvergenceError("centralized solve stalled", r.iterations, r.residual);
  return r;
}

}  // namespace

void check_feasible(const OlfcProblem& problem) {
  const NetworkTopology& topo = problem.topology;
  const int n = topo.bus_count();
  const double tol = 1e-9;

  for (int i = 0; i < n; ++i) {
    const size_t si = static_cast<size_t>(i);
    if (!problem.heat_load[si]) continue;
    const double d_lo = problem.controllable[si] ? problem.d_min(i) : 0.0;
    const double d_hi = problem.controllable[si] ? problem.d_max(i) : 0.0;
    if (best_q_gap(problem, i, d_lo, d_hi) < -tol) {
      std::ostringstream os;
      os << "bus " << topo.bus_id(i)
         << ": no heat output satisfies the buffer bounds and the CHP region "
            "for any admissible load adjustment";
      throw InfeasibleError(os.str());
    }
  }

  for (int comp = 0; comp < topo.component_count(); ++comp) {
    double p_total = 0.0, d_lo = 0.0, d_hi = 0.0;
    for (int i = 0; i < n; ++i) {
      if (topo.component_of()[static_cast<size_t>(i)] != comp) continue;
      p_total += problem.phys.p_in(i);
      if (problem.controllable[static_cast<size_t>(i)]) {
        d_lo += problem.d_min(i);
        d_hi += problem.d_max(i);
      }
    }
    if (p_total < d_lo - tol || p_total > d_hi + tol) {
      std::ostringstream os;
      os << "component " << comp << ": total injection " << p_total
         << " outside the aggregate load-adjustment range [" << d_lo << ", " << d_hi << "]";
      throw InfeasibleError(os.str());
    }
  }

  for (int i = 0; i < n; ++i) {
    const size_t si = static_cast<size_t>(i);
    if (!topo.neighbors(i).empty()) continue;
    // An isolated bus has no virtual flow, so its balance pins d exactly.
    const double d_pin = problem.phys.p_in(i);
    if (!problem.controllable[si]) {
      if (std::abs(d_pin) > tol) {
        std::ostringstream os;
        os << "bus " << topo.bus_id(i) << ": isolated and uncontrollable, cannot absorb injection "
           << d_pin;
        throw InfeasibleError(os.str());
      }
      continue;
    }
    if (d_pin < problem.d_min(i) - tol || d_pin > problem.d_max(i) + tol) {
      std::ostringstream os;
      os << "bus " << topo.bus_id(i) << ": isolated, balance pins the load adjustment to " << d_pin
         << " outside [" << problem.d_min(i) << ", " << problem.d_max(i) << "]";
      throw InfeasibleError(os.str());
    }
    if (problem.heat_load[si]) {
      const QInterval qi = q_interval(problem, i, d_pin);
      if (qi.lo > qi.hi + tol) {
        std::ostringstream os;
        os << "bus " << topo.bus_id(i) << ": isolated, balance pins the load adjustment to "
           << d_pin << ", where the CHP region and buffer bounds admit no heat output";
        throw InfeasibleError(os.str());
      }
    }
  }
}

OlfcSolution centralized_solve(const OlfcProblem& problem, const OracleOptions& options) {
  problem.validate();
  check_feasible(problem);

  const NetworkTopology& topo = problem.topology;
  const int n = topo.bus_count();
  const int m = topo.line_count();

  std::vector<int> d_index(static_cast<size_t>(n), -1), q_index(static_cast<size_t>(n), -1);
  int nx = 0;
  for (int i = 0; i < n; ++i)
    if (problem.controllable[static_cast<size_t>(i)]) d_index[static_cast<size_t>(i)] = nx++;
  for (int i = 0; i < n; ++i)
    if (problem.heat_load[static_cast<size_t>(i)]) q_index[static_cast<size_t>(i)] = nx++;
  const int phi_offset = nx;
  nx += n;

  Qp qp;
  qp.quad = Eigen::VectorXd::Zero(nx);
  qp.lin = Eigen::VectorXd::Zero(nx);
  for (int i = 0; i < n; ++i) {
    const size_t si = static_cast<size_t>(i);
    if (d_index[si] >= 0) {
      qp.quad(d_index[si]) = problem.cost_e[si].a;
      qp.lin(d_index[si]) = problem.cost_e[si].b;
    }
    if (q_index[si] >= 0) {
      qp.quad(q_index[si]) = problem.cost_h[si].a;
      qp.lin(q_index[si]) = problem.cost_h[si].b;
    }
  }

  struct RowRef {
    enum Kind { kBalance, kPin, kDBound, kQBound, kChpUpper, kChpLower, kLine } kind;
    int bus = -1;
    int index = -1;  // CHP row or line index
  };
  std::vector<RowRef> rows;
  std::vector<Eigen::VectorXd> coeffs;
  std::vector<double> los, his;
  auto add_row = [&](RowRef ref, const Eigen::VectorXd& c, double lo, double hi) {
    rows.push_back(ref);
    coeffs.push_back(c);
    los.push_back(lo);
    his.push_back(hi);
  };

  for (int i = 0; i < n; ++i) {
    Eigen::VectorXd c = Eigen::VectorXd::Zero(nx);
    if (d_index[static_cast<size_t>(i)] >= 0) c(d_index[static_cast<size_t>(i)]) = 1.0;
    for (const auto& inc : topo.incident(i)) {
      const double b = topo.susceptance(inc.line);
      c(phi_offset + i) += b;
      c(phi_offset + inc.other) -= b;
    }
    add_row({RowRef::kBalance, i, -1}, c, problem.phys.p_in(i), problem.phys.p_in(i));
  }
  {
    std::vector<int> pinned(static_cast<size_t>(topo.component_count()), -1);
    for (int i = 0; i < n; ++i) {
      int& pin = pinned[static_cast<size_t>(topo.component_of()[static_cast<size_t>(i)])];
      if (pin < 0) pin = i;
    }
    for (int pin : pinned) {
      Eigen::VectorXd c = Eigen::VectorXd::Zero(nx);
      c(phi_offset + pin) = 1.0;
      add_row({RowRef::kPin, pin, -1}, c, 0.0, 0.0);
    }
  }
  for (int i = 0; i < n; ++i) {
    const size_t si = static_cast<size_t>(i);
    if (d_index[si] >= 0) {
      Eigen::VectorXd c = Eigen::VectorXd::Zero(nx);
      c(d_index[si]) = 1.0;
      add_row({RowRef::kDBound, i, -1}, c, problem.d_min(i), problem.d_max(i));
    }
    if (q_index[si] >= 0) {
      Eigen::VectorXd c = Eigen::VectorXd::Zero(nx);
      c(q_index[si]) = 1.0;
      add_row({RowRef::kQBound, i, -1}, c, problem.phys.q_in(i) - problem.phys.buffer_max(i),
              problem.phys.q_in(i) - problem.phys.buffer_min(i));
    }
    for (size_t row = 0; row < problem.chp[si].upper.size(); ++row) {
      const HalfPlane& hp = problem.chp[si].upper[row];
      Eigen::VectorXd c = Eigen::VectorXd::Zero(nx);
      c(q_index[si]) = 1.0;
      c(d_index[si]) = -hp.slope;
      add_row({RowRef::kChpUpper, i, static_cast<int>(row)}, c, -kInf, hp.offset);
    }
    for (size_t row = 0; row < problem.chp[si].lower.size(); ++row) {
      const HalfPlane& hp = problem.chp[si].lower[row];
      Eigen::VectorXd c = Eigen::VectorXd::Zero(nx);
      c(q_index[si]) = 1.0;
      c(d_index[si]) = -hp.slope;
      add_row({RowRef::kChpLower, i, static_cast<int>(row)}, c, hp.offset, kInf);
    }
  }
  for (int l = 0; l < m; ++l) {
    Eigen::VectorXd c = Eigen::VectorXd::Zero(nx);
    const double b = topo.susceptance(l);
    c(phi_offset + topo.line_from(l)) = b;
    c(phi_offset + topo.line_to(l)) = -b;
    add_row({RowRef::kLine, -1, l}, c, problem.flow_min(l), problem.flow_max(l));
  }

  const long nr = static_cast<long>(rows.size());
  qp.a = Eigen::MatrixXd::Zero(nr, nx);
  qp.lo = Eigen::VectorXd(nr);
  qp.hi = Eigen::VectorXd(nr);
  for (long r = 0; r < nr; ++r) {
    qp.a.row(r) = coeffs[static_cast<size_t>(r)];
    qp.lo(r) = los[static_cast<size_t>(r)];
    qp.hi(r) = his[static_cast<size_t>(r)];
  }

  const QpResult qr = solve_qp(qp, options);

  OlfcSolution sol;
  sol.d = Eigen::VectorXd::Zero(n);
  sol.q = Eigen::VectorXd::Zero(n);
  sol.omega = Eigen::VectorXd::Zero(n);
  sol.phi = Eigen::VectorXd::Zero(n);
  sol.mu = Eigen::VectorXd::Zero(n);
  sol.lambda = Eigen::VectorXd::Zero(n);
  sol.gamma_lo = Eigen::VectorXd::Zero(n);
  sol.gamma_hi = Eigen::VectorXd::Zero(n);
  sol.delta_lo = Eigen::VectorXd::Zero(n);
  sol.delta_hi = Eigen::VectorXd::Zero(n);
  sol.zeta_up.resize(static_cast<size_t>(n));
  sol.zeta_dn.resize(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    const size_t si = static_cast<size_t>(i);
    sol.zeta_up[si] = Eigen::VectorXd::Zero(static_cast<long>(problem.chp[si].upper.size()));
    sol.zeta_dn[si] = Eigen::VectorXd::Zero(static_cast<long>(problem.chp[si].lower.size()));
    if (!problem.heat_load[si]) sol.q(i) = problem.phys.q_in(i);
  }
  sol.sigma_lo = Eigen::VectorXd::Zero(m);
  sol.sigma_hi = Eigen::VectorXd::Zero(m);
  sol.virtual_flow = Eigen::VectorXd::Zero(m);

  for (int i = 0; i < n; ++i) {
    const size_t si = static_cast<size_t>(i);
    if (d_index[si] >= 0) sol.d(i) = qr.x(d_index[si]);
    if (q_index[si] >= 0) sol.q(i) = qr.x(q_index[si]);
    sol.phi(i) = qr.x(phi_offset + i);
  }
  for (long r = 0; r < nr; ++r) {
    const RowRef& ref = rows[static_cast<size_t>(r)];
    const double y = qr.y(r);
    switch (ref.kind) {
      case RowRef::kBalance:
        sol.mu(ref.bus) = -y;
        break;
      case RowRef::kPin:
        break;
      case RowRef::kDBound:
        sol.gamma_hi(ref.bus) = std::max(y, 0.0);
        sol.gamma_lo(ref.bus) = std::max(-y, 0.0);
        break;
      case RowRef::kQBound:
        // Upper q bound realizes the buffer lower bound and vice versa.
        sol.delta_lo(ref.bus) = std::max(y, 0.0);
        sol.delta_hi(ref.bus) = std::max(-y, 0.0);
        break;
      case RowRef::kChpUpper:
        sol.zeta_up[static_cast<size_t>(ref.bus)](ref.index) = std::max(y, 0.0);
        break;
      case RowRef::kChpLower:
        sol.zeta_dn[static_cast<size_t>(ref.bus)](ref.index) = std::max(-y, 0.0);
        break;
      case RowRef::kLine:
        sol.sigma_hi(ref.index) = std::max(y, 0.0);
        sol.sigma_lo(ref.index) = std::max(-y, 0.0);
        break;
    }
  }

  for (int l = 0; l < m; ++l)
    sol.virtual_flow(l) =
        dc_flow(topo.susceptance(l), sol.phi(topo.line_from(l)), sol.phi(topo.line_to(l)));

  // Physical flows reachable from the zero-flow start lie in the range of
  // B C^T; solve the pinned Laplacian system for the generating potential.
  {
    Eigen::MatrixXd lap = Eigen::MatrixXd::Zero(n, n);
    for (int l = 0; l < m; ++l) {
      const int f = topo.line_from(l), t = topo.line_to(l);
      const double b = topo.susceptance(l);
      lap(f, f) += b;
      lap(t, t) += b;
      lap(f, t) -= b;
      lap(t, f) -= b;
    }
    Eigen::VectorXd rhs = problem.phys.p_in - sol.d;
    std::vector<int> pinned(static_cast<size_t>(topo.component_count()), -1);
    for (int i = 0; i < n; ++i) {
      int& pin = pinned[static_cast<size_t>(topo.component_of()[static_cast<size_t>(i)])];
      if (pin < 0) pin = i;
    }
    for (int pin : pinned) {
      lap.row(pin).setZero();
      lap(pin, pin) = 1.0;
      rhs(pin) = 0.0;
    }
    const Eigen::VectorXd psi = lap.fullPivLu().solve(rhs);
    sol.line_flow = Eigen::VectorXd::Zero(m);
    for (int l = 0; l < m; ++l)
      sol.line_flow(l) = dc_flow(topo.susceptance(l), psi(topo.line_from(l)), psi(topo.line_to(l)));
  }

  sol.objective = problem.objective(sol.d, sol.q, sol.omega);

  const KktResidual check = kkt_residual(problem, sol);
  if (check.max() > options.tol)
    throw NonConvergenceError("centralized solution failed its own optimality check",
                              qr.iterations, check.max());
  return sol;
}

}  // namespace olfc
