#include "olfc/network.hpp"

#include <algorithm>
#include <numeric>
#include <set>
#include <sstream>

namespace olfc {

NetworkTopology::NetworkTopology(std::vector<BusId> buses, std::vector<bool> is_generator,
                                 std::vector<Line> lines)
    : buses_(std::move(buses)), is_generator_(std::move(is_generator)), lines_(std::move(lines)) {
  std::vector<std::string> issues;
  if (buses_.empty()) issues.push_back("network has no buses");
  if (is_generator_.size() != buses_.size())
    issues.push_back("generator flags do not match the bus list");

  std::set<BusId> seen;
  for (BusId id : buses_) {
    if (!seen.insert(id).second) {
      std::ostringstream os;
      os << "duplicate bus id " << id;
      issues.push_back(os.str());
    }
  }

  const int n = static_cast<int>(buses_.size());
  from_index_.reserve(lines_.size());
  to_index_.reserve(lines_.size());
  std::set<std::pair<int, int>> seen_lines;
  for (size_t l = 0; l < lines_.size(); ++l) {
    const Line& line = lines_[l];
    int from = -1, to = -1;
    for (int i = 0; i < n; ++i) {
      if (buses_[static_cast<size_t>(i)] == line.from) from = i;
      if (buses_[static_cast<size_t>(i)] == line.to) to = i;
    }
    std::ostringstream label;
    label << "line " << line.from << "-" << line.to;
    if (from < 0) issues.push_back(label.str() + ": unknown from bus");
    if (to < 0) issues.push_back(label.str() + ": unknown to bus");
    if (from >= 0 && from == to) issues.push_back(label.str() + ": self loop");
    if (!(line.susceptance > 0.0))
      issues.push_back(label.str() + ": susceptance must be positive");
    if (from >= 0 && to >= 0 && from != to) {
      auto key = std::minmax(from, to);
      if (!seen_lines.insert({key.first, key.second}).second)
        issues.push_back(label.str() + ": parallel line between the same buses");
    }
    from_index_.push_back(from);
    to_index_.push_back(to);
  }
  if (!issues.empty()) throw ValidationError(issues);

  incident_.assign(static_cast<size_t>(n), {});
  neighbors_.assign(static_cast<size_t>(n), {});
  for (size_t l = 0; l < lines_.size(); ++l) {
    int from = from_index_[l], to = to_index_[l];
    incident_[static_cast<size_t>(from)].push_back({static_cast<int>(l), +1.0, to});
    incident_[static_cast<size_t>(to)].push_back({static_cast<int>(l), -1.0, from});
    neighbors_[static_cast<size_t>(from)].push_back(to);
    neighbors_[static_cast<size_t>(to)].push_back(from);
  }
  for (auto& nb : neighbors_) {
    std::sort(nb.begin(), nb.end());
    nb.erase(std::unique(nb.begin(), nb.end()), nb.end());
  }

  component_.assign(static_cast<size_t>(n), -1);
  component_count_ = 0;
  for (int root = 0; root < n; ++root) {
    if (component_[static_cast<size_t>(root)] >= 0) continue;
    std::vector<int> stack{root};
    component_[static_cast<size_t>(root)] = component_count_;
    while (!stack.empty()) {
      int bus = stack.back();
      stack.pop_back();
      for (int nb : neighbors_[static_cast<size_t>(bus)]) {
        if (component_[static_cast<size_t>(nb)] < 0) {
          component_[static_cast<size_t>(nb)] = component_count_;
          stack.push_back(nb);
        }
      }
    }
    ++component_count_;
  }
}

int NetworkTopology::bus_index(BusId id) const {
  for (int i = 0; i < bus_count(); ++i)
    if (buses_[static_cast<size_t>(i)] == id) return i;
  std::ostringstream os;
  os << "unknown bus id " << id;
  throw ValidationError({os.str()});
}

bool NetworkTopology::has_bus(BusId id) const {
  return std::find(buses_.begin(), buses_.end(), id) != buses_.end();
}

std::string NetworkTopology::line_label(int line) const {
  const Line& l = lines_[static_cast<size_t>(line)];
  std::ostringstream os;
  os << l.from << "-" << l.to;
  return os.str();
}

Eigen::MatrixXd build_incidence(const NetworkTopology& topology) {
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(topology.bus_count(), topology.line_count());
  for (int l = 0; l < topology.line_count(); ++l) {
    c(topology.line_from(l), l) = 1.0;
    c(topology.line_to(l), l) = -1.0;
  }
  return c;
}

double net_line_injection(int bus, const Eigen::VectorXd& line_flow, const NetworkTopology& topology) {
  double total = 0.0;
  for (const auto& inc : topology.incident(bus)) total += inc.sign * line_flow(inc.line);
  return total;
}

PhysicalDerivatives physical_derivatives(const Eigen::VectorXd& omega_gen,
                                         const Eigen::VectorXd& line_flow,
                                         const Eigen::VectorXd& d,
                                         const BusPhysicalParams& params,
                                         const NetworkTopology& topology) {
  const int n = topology.bus_count();
  PhysicalDerivatives out;
  out.omega_dot = Eigen::VectorXd::Zero(n);
  out.omega_full = Eigen::VectorXd::Zero(n);
  out.flow_dot = Eigen::VectorXd::Zero(topology.line_count());

  int g = 0;
  for (int i = 0; i < n; ++i) {
    const double net = net_line_injection(i, line_flow, topology);
    const double mismatch = params.p_in(i) - d(i) - net;
    if (topology.is_generator(i)) {
      const double w = omega_gen(g++);
      out.omega_full(i) = w;
      out.omega_dot(i) = (mismatch - params.damping(i) * w) / params.inertia(i);
    } else {
      out.omega_full(i) = mismatch / params.damping(i);
    }
  }
  for (int l = 0; l < topology.line_count(); ++l) {
    out.flow_dot(l) = topology.susceptance(l) *
                      (out.omega_full(topology.line_from(l)) - out.omega_full(topology.line_to(l)));
  }
  return out;
}

Eigen::VectorXd laplacian_apply(const NetworkTopology& topology, const Eigen::VectorXd& nodal) {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(topology.bus_count());
  for (int l = 0; l < topology.line_count(); ++l) {
    const double diff = topology.susceptance(l) * (nodal(topology.line_from(l)) - nodal(topology.line_to(l)));
    out(topology.line_from(l)) += diff;
    out(topology.line_to(l)) -= diff;
  }
  return out;
}

}  // namespace olfc
