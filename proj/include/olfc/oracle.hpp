#pragma once

#include "olfc/problem.hpp"

namespace olfc {

struct OracleOptions {
  double tol = 1e-6;         // KKT residual the returned solution must meet
  int max_iterations = 300000;
};

/// Centralized reference solver. Reduces the planning problem to a convex QP
/// over (d, q, phi) (the frequency term vanishes because the two balance
/// constraints force omega* = 0), solves it with an ADMM splitting plus an
/// active-set polish, and reconstructs the physical line flows reachable from
/// the zero-flow start.
///
/// Throws InfeasibleError for infeasibilities the structured pre-checks can
/// prove (per-bus load/heat region empty, component power balance out of
/// range, isolated-bus pinning), NonConvergenceError otherwise.
OlfcSolution centralized_solve(const OlfcProblem& problem, const OracleOptions& options = {});

/// Runs only the structured feasibility pre-checks; throws InfeasibleError
/// with the offending bus or component named.
void check_feasible(const OlfcProblem& problem);

}  // namespace olfc
