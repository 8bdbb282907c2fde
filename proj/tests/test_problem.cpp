#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <random>

#include "doctest.h"
#include "helpers.hpp"
#include "olfc/oracle.hpp"
#include "olfc/problem.hpp"

using namespace olfc;

TEST_CASE("quadratic cost marginal and inverse are mutual inverses") {
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> a(0.1, 5.0), b(-1.0, 1.0), x(-2.0, 2.0);
  for (int trial = 0; trial < 50; ++trial) {
    const QuadraticCost cost{a(rng), b(rng)};
    const double v = x(rng);
    CHECK(cost.inverse_marginal(cost.marginal(v)) == doctest::Approx(v).epsilon(1e-12));
  }
  const QuadraticCost unit{};
  CHECK(unit.value(0.3) == doctest::Approx(0.045));
  CHECK(unit.marginal(0.3) == doctest::Approx(0.3));
}

TEST_CASE("objective vanishes at the all-zero point with linear terms off") {
  OlfcProblem p = test::chain_problem(2);
  const Eigen::VectorXd zero2 = Eigen::VectorXd::Zero(2);
  CHECK(p.objective(zero2, zero2, zero2) == 0.0);
}

TEST_CASE("objective adds electric, heat, and frequency-penalty terms") {
  OlfcProblem p = test::chain_problem(2);
  p.heat_load[1] = true;
  p.cost_h[1] = QuadraticCost{2.0, 0.0};
  p.phys.damping << 1.0, 3.0;
  Eigen::VectorXd d(2), q(2), omega(2);
  d << 0.2, -0.1;
  q << 0.7, 0.5;  // q(0) dead: no heat load at bus 1
  omega << 0.1, 0.2;
  const double expected = 0.5 * 0.04 + 0.5 * 0.01  // electric
                          + 0.5 * 2.0 * 0.25       // heat at bus 2
                          + 0.5 * 1.0 * 0.01 + 0.5 * 3.0 * 0.04;
  CHECK(p.objective(d, q, omega) == doctest::Approx(expected));
}

TEST_CASE("chp feasibility measures the worst half-plane violation") {
  OlfcProblem p = test::chain_problem(1);
  p.heat_load[0] = true;
  p.chp[0].upper.push_back({0.5, 0.0});  // q <= 0.5 d
  p.chp[0].lower.push_back({0.0, -0.4});  // q >= -0.4
  CHECK(p.chp_feasible(0, 0.2, 0.1));
  CHECK(!p.chp_feasible(0, 0.2, 0.15));
  Eigen::VectorXd d(1), q(1);
  d << 0.2;
  q << 0.15;
  CHECK(p.chp_violation(d, q) == doctest::Approx(0.05));
  q << -0.5;
  CHECK(p.chp_violation(d, q) == doctest::Approx(0.1));
  q << 0.05;
  CHECK(p.chp_violation(d, q) == 0.0);
}

TEST_CASE("problem validation lists every violation with its bus") {
  OlfcProblem p = test::chain_problem(3);
  p.phys.damping(2) = 0.0;
  p.cost_e[0].a = -1.0;
  p.d_min(1) = 0.5;  // range no longer contains 0
  try {
    p.validate();
    FAIL("expected ValidationError");
  } catch (const ValidationError& e) {
    REQUIRE(e.issues().size() >= 3);
    bool saw_damping = false, saw_cost = false, saw_range = false;
    for (const std::string& issue : e.issues()) {
      saw_damping |= issue.find("bus 3: damping must be positive") != std::string::npos;
      saw_cost |= issue.find("bus 1: electric cost curvature") != std::string::npos;
      saw_range |= issue.find("bus 2: load-adjustment range") != std::string::npos;
    }
    CHECK(saw_damping);
    CHECK(saw_cost);
    CHECK(saw_range);
  }
}

TEST_CASE("chp region without heat load or controllable d is rejected") {
  OlfcProblem p = test::chain_problem(2);
  p.chp[0].upper.push_back({0.5, 0.0});
  CHECK_THROWS_AS(p.validate(), ValidationError);
  p = test::chain_problem(2);
  p.heat_load[1] = true;
  p.controllable[1] = false;
  p.chp[1].upper.push_back({0.5, 0.0});
  CHECK_THROWS_AS(p.validate(), ValidationError);
}

TEST_CASE("kkt residual is small only at the optimum") {
  OlfcProblem p = test::chain_problem(2);
  p.phys.p_in << 0.3, 0.0;
  const OlfcSolution sol = centralized_solve(p);
  CHECK(kkt_residual(p, sol).max() <= 1e-6);

  // Strong convexity: moving d off the optimum by 0.1 shows up in the
  // stationarity block with at least curvature * distance.
  OlfcSolution shifted = sol;
  shifted.d(0) += 0.1;
  const KktResidual res = kkt_residual(p, shifted);
  CHECK(res.stationarity >= 1.0 * 0.1 - 1e-3);

  OlfcSolution negative = sol;
  negative.gamma_lo(0) = -0.05;
  CHECK(kkt_residual(p, negative).dual > 0.0);
  CHECK(kkt_residual(p, sol).dual == 0.0);
}

TEST_CASE("kkt blocks respond to primal infeasibility") {
  OlfcProblem p = test::chain_problem(2);
  p.phys.p_in << 0.3, 0.0;
  const OlfcSolution sol = centralized_solve(p);
  OlfcSolution infeasible = sol;
  infeasible.d(0) = p.d_max(0) + 0.2;
  CHECK(kkt_residual(p, infeasible).primal >= 0.2 - 1e-9);
}
