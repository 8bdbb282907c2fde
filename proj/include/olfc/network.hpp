#pragma once

#include <Eigen/Dense>
#include <vector>

#include "olfc/types.hpp"

namespace olfc {

/// Directed electricity network. Buses are split into generator buses
/// (rotating inertia, dynamic frequency) and load buses (no inertia, frequency
/// follows the local power balance directly). Lines carry electricity only.
class NetworkTopology {
public:
  struct Line {
    BusId from = 0;
    BusId to = 0;
    double susceptance = 0.0;  // p.u./rad, > 0
  };

  /// Incident line as seen from one bus: +1 if the line leaves the bus,
  /// -1 if it enters.
  struct Incidence {
    int line = 0;
    double sign = 0.0;
    int other = 0;  // bus index of the far endpoint
  };

  NetworkTopology() = default;

  /// Throws ValidationError (all violations listed) if the bus partition or
  /// line set is malformed.
  NetworkTopology(std::vector<BusId> buses, std::vector<bool> is_generator, std::vector<Line> lines);

  int bus_count() const { return static_cast<int>(buses_.size()); }
  int line_count() const { return static_cast<int>(lines_.size()); }
  const std::vector<BusId>& buses() const { return buses_; }
  const std::vector<Line>& lines() const { return lines_; }
  bool is_generator(int bus) const { return is_generator_[static_cast<size_t>(bus)]; }

  BusId bus_id(int index) const { return buses_[static_cast<size_t>(index)]; }
  int bus_index(BusId id) const;
  bool has_bus(BusId id) const;

  int line_from(int line) const { return from_index_[static_cast<size_t>(line)]; }
  int line_to(int line) const { return to_index_[static_cast<size_t>(line)]; }
  double susceptance(int line) const { return lines_[static_cast<size_t>(line)].susceptance; }

  /// Lines touching a bus, in line order.
  const std::vector<Incidence>& incident(int bus) const { return incident_[static_cast<size_t>(bus)]; }
  /// Neighbor bus indices, ascending, without duplicates.
  const std::vector<int>& neighbors(int bus) const { return neighbors_[static_cast<size_t>(bus)]; }

  /// Connected components over the undirected line set; entry per bus, ids 0..k-1,
  /// numbered by lowest contained bus index.
  const std::vector<int>& component_of() const { return component_; }
  int component_count() const { return component_count_; }

  /// Human-readable line label, e.g. "2-3" for the line from bus 2 to bus 3.
  std::string line_label(int line) const;

private:
  std::vector<BusId> buses_;
  std::vector<bool> is_generator_;
  std::vector<Line> lines_;
  std::vector<int> from_index_, to_index_;
  std::vector<std::vector<Incidence>> incident_;
  std::vector<std::vector<int>> neighbors_;
  std::vector<int> component_;
  int component_count_ = 0;
};

/// Per-bus physical constants and (current) uncontrollable injections.
/// All injection values are deviations from the dispatch operating point.
struct BusPhysicalParams {
  Eigen::VectorXd inertia;     // M_i, p.u.*s; meaningful for generator buses
  Eigen::VectorXd damping;     // D_i, p.u./(rad/s); > 0 everywhere
  Eigen::VectorXd p_in;        // uncontrollable electric injection deviation
  Eigen::VectorXd q_in;        // uncontrollable heat injection deviation
  Eigen::VectorXd buffer_min;  // lower bound on the heat buffer usage, <= 0
  Eigen::VectorXd buffer_max;  // upper bound on the heat buffer usage, >= 0
};

/// Physical-layer snapshot. The heat buffer is algebraic: it always equals
/// q_in - q for the controllable heat load q of the same instant.
struct PhysicalState {
  Eigen::VectorXd omega;        // rad/s deviation, every bus
  Eigen::VectorXd line_flow;    // p.u. deviation per line
  Eigen::VectorXd heat_buffer;  // p.u. per bus
};

/// Rates produced by the physical layer. Load-bus frequencies are not states;
/// the solved values are returned alongside the generator rates.
struct PhysicalDerivatives {
  Eigen::VectorXd omega_dot;   // per bus; zero at load buses (algebraic)
  Eigen::VectorXd flow_dot;    // per line
  Eigen::VectorXd omega_full;  // per bus; load entries freshly solved
};

/// Bus-by-line incidence matrix with entries in {-1, 0, +1}; column l has +1
/// at the tail of line l and -1 at its head.
Eigen::MatrixXd build_incidence(const NetworkTopology& topology);

/// DC line flow between two angles.
inline double dc_flow(double susceptance, double angle_from, double angle_to) {
  return susceptance * (angle_from - angle_to);
}

/// Net power leaving a bus over its incident lines: sum of flows on leaving
/// lines minus sum of flows on entering lines.
double net_line_injection(int bus, const Eigen::VectorXd& line_flow, const NetworkTopology& topology);

/// Heat buffer usage for a heat injection and a served heat load.
inline double heat_buffer(double q_in, double q) { return q_in - q; }

/// Swing dynamics at generator buses, algebraic frequency at load buses, and
/// DC line-flow dynamics. `d` must hold an entry for every bus (zero where no
/// controllable load exists). Load-bus frequencies are solved in closed form;
/// positivity of D is enforced at construction time, not here.
PhysicalDerivatives physical_derivatives(const Eigen::VectorXd& omega_gen,
                                         const Eigen::VectorXd& line_flow,
                                         const Eigen::VectorXd& d,
                                         const BusPhysicalParams& params,
                                         const NetworkTopology& topology);

/// Weighted graph Laplacian (C diag(B) C^T) applied to a nodal vector.
Eigen::VectorXd laplacian_apply(const NetworkTopology& topology, const Eigen::VectorXd& nodal);

}  // namespace olfc
