#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace olfc {

/// External bus identifier as given in scenario files. Internal code works
/// with dense indices into the topology's bus order.
using BusId = int;

/// Twice pi; frequencies are tracked in rad/s internally and reported in Hz.
inline constexpr double kTwoPi = 6.283185307179586476925286766559;

/// Scenario file could not be parsed at all.
class ParseError : public std::runtime_error {
public:
  explicit ParseError(const std::string& what) : std::runtime_error(what) {}
};

/// Scenario parsed but violates one or more model invariants. Carries the
/// full list of violations, not just the first.
class ValidationError : public std::runtime_error {
public:
  explicit ValidationError(std::vector<std::string> issues)
      : std::runtime_error(join(issues)), issues_(std::move(issues)) {}
  const std::vector<std::string>& issues() const { return issues_; }

private:
  static std::string join(const std::vector<std::string>& issues) {
    std::string s = "validation failed:";
    for (const auto& i : issues) s += "\n  - " + i;
    return s;
  }
  std::vector<std::string> issues_;
};

/// Constraint set is provably empty (detected by the feasibility pre-checks).
class InfeasibleError : public std::runtime_error {
public:
  explicit InfeasibleError(const std::string& what) : std::runtime_error(what) {}
};

/// Centralized solver hit its iteration cap before reaching tolerance.
class NonConvergenceError : public std::runtime_error {
public:
  NonConvergenceError(int iterations, double residual)
      : NonConvergenceError("solver did not converge", iterations, residual) {}
  NonConvergenceError(const std::string& context, int iterations, double residual)
      : std::runtime_error(context + " after " + std::to_string(iterations) +
                           " iterations (residual " + std::to_string(residual) + ")"),
        iterations(iterations), residual(residual) {}
  int iterations;
  double residual;
};

/// A state left the sane numeric range during integration.
class NumericalBlowup : public std::runtime_error {
public:
  explicit NumericalBlowup(double time)
      : std::runtime_error("numerical blowup at t = " + std::to_string(time) + " s"),
        time(time) {}
  double time;
};

/// The synchronous exchange failed to deliver a required neighbor message.
class MissingNeighborMessage : public std::runtime_error {
public:
  MissingNeighborMessage(BusId bus, BusId neighbor)
      : std::runtime_error("bus " + std::to_string(bus) + " is missing the round message from neighbor " +
                           std::to_string(neighbor)),
        bus(bus), neighbor(neighbor) {}
  BusId bus;
  BusId neighbor;
};

}  // namespace olfc
