#include <catch2/catch_amalgamated.hpp>

#include "test_helpers.hpp"

using namespace gwbcm;
using gwbcm::testing::random_planar_network;
using Catch::Approx;

TEST_CASE("rho_update fixes a template against itself") {
  const Network X = random_planar_network(1, 5);
  GwSolverConfig cfg;
  cfg.restarts = 3;
  SimplexWeights one{Vector::Ones(1)};
  const RhoResult r = rho_update({X}, one, X, cfg);
  REQUIRE((r.updated.weights - X.weights).cwiseAbs().maxCoeff() <= 1e-12);
  REQUIRE(r.plan_costs[0] <= 1e-12);
}

TEST_CASE("rho_update under an anti-diagonal optimal self-plan") {
  Matrix w(2, 2);
  w << 0, 2, 2, 0;
  const Network X = validate_network(w, Vector::Constant(2, 0.5));
  Matrix anti(2, 2);
  anti << 0, 0.5, 0.5, 0;
  GwSolverConfig cfg;
  cfg.init = GwInit::custom;
  cfg.custom_init = anti;  // starts at the optimum and stays there
  SimplexWeights one{Vector::Ones(1)};
  const RhoResult r = rho_update({X}, one, X, cfg);
  REQUIRE((r.updated.weights - w).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("rho_update at a degenerate simplex vertex") {
  std::vector<Network> templates{random_planar_network(2, 4),
                                 random_planar_network(3, 5)};
  GwSolverConfig cfg;
  cfg.restarts = 3;
  Vector e1(2);
  e1 << 1.0, 0.0;
  // with lambda = e_1 the operator reduces to the single-template case
  const RhoResult r = rho_update(templates, SimplexWeights{e1},
                                 templates[0], cfg);
  REQUIRE((r.updated.weights - templates[0].weights).cwiseAbs().maxCoeff() <= 1e-9);
}

TEST_CASE("synthesize_barycenter recovers a single template") {
  const Network X = random_planar_network(4, 6);
  SynthesisConfig cfg;
  cfg.target_size = X.size();
  cfg.target_masses = X.masses;
  cfg.solver.restarts = 3;
  auto [bary, diag] = synthesize_barycenter({X}, SimplexWeights{Vector::Ones(1)}, cfg);
  REQUIRE(diag.converged);
  GwSolverConfig check;
  check.restarts = 3;
  REQUIRE(gw_frank_wolfe(bary, X, check).cost <=
          1e-12 * std::max(1.0, X.weights.squaredNorm()));
}

TEST_CASE("synthesize_barycenter with duplicate templates") {
  const Network X = random_planar_network(5, 5);
  SynthesisConfig cfg;
  cfg.target_size = X.size();
  cfg.target_masses = X.masses;
  cfg.solver.restarts = 3;
  auto [bary, diag] =
      synthesize_barycenter({X, X}, SimplexWeights{Vector::Constant(2, 0.5)}, cfg);
  REQUIRE(diag.converged);
  GwSolverConfig check;
  check.restarts = 3;
  REQUIRE(gw_frank_wolfe(bary, X, check).cost <=
          1e-12 * std::max(1.0, X.weights.squaredNorm()));
}

TEST_CASE("synthesize_barycenter: trace, fixed point, and masses") {
  std::vector<Network> templates{random_planar_network(10, 10),
                                 random_planar_network(11, 10),
                                 random_planar_network(12, 10)};
  const SimplexWeights lambda = sample_simplex_dirichlet(3, 0);
  SynthesisConfig cfg;
  cfg.target_size = 10;
  cfg.solver.restarts = 3;
  cfg.solver.seed = 1;
  auto [bary, diag] = synthesize_barycenter(templates, lambda, cfg);
  REQUIRE(diag.converged);
  for (std::size_t i = 1; i < diag.objective_trace.size(); ++i)
    REQUIRE(diag.objective_trace[i] <= diag.objective_trace[i - 1] + 1e-12);
  // output masses are exactly the target masses
  REQUIRE((bary.masses - Vector::Constant(10, 0.1)).cwiseAbs().maxCoeff() <= 1e-12);
  // fixed-point property: one more rho application does not move it
  const RhoResult again = rho_update(templates, lambda, bary, cfg.solver);
  REQUIRE((again.updated.weights - bary.weights).norm() <=
          1e-6 * std::max(1.0, bary.weights.norm()));
}

TEST_CASE("rho_update is plan-independent at certified optima") {
  // tiny instances where the brute oracle certifies that frank-wolfe found
  // the global plan; then the combined update must not depend on the seed
  const Network T = random_planar_network(20, 3);
  const Network Y = random_planar_network(21, 3);
  GwSolverConfig a;
  a.restarts = 5;
  a.seed = 1;
  GwSolverConfig b = a;
  b.seed = 99;
  const double certified = gw_bruteforce(T, Y).cost;
  REQUIRE(gw_frank_wolfe(T, Y, a).cost <= certified + 1e-10);
  REQUIRE(gw_frank_wolfe(T, Y, b).cost <= certified + 1e-10);
  SimplexWeights one{Vector::Ones(1)};
  const RhoResult ra = rho_update({T}, one, Y, a);
  const RhoResult rb = rho_update({T}, one, Y, b);
  REQUIRE((ra.updated.weights - rb.updated.weights).cwiseAbs().maxCoeff() <=
          1e-6 * std::max(1.0, ra.updated.weights.cwiseAbs().maxCoeff()));
}

TEST_CASE("synthesize_barycenter flags non-convergence") {
  std::vector<Network> templates{random_planar_network(30, 6),
                                 random_planar_network(31, 7)};
  SynthesisConfig cfg;
  cfg.target_size = 6;
  cfg.max_outer_iter = 1;
  cfg.fp_tol = 1e-16;
  auto [bary, diag] = synthesize_barycenter(
      templates, SimplexWeights{Vector::Constant(2, 0.5)}, cfg);
  REQUIRE_FALSE(diag.converged);
  REQUIRE(diag.iterations == 1);
  REQUIRE(bary.size() == 6);
}

TEST_CASE("geodesic endpoints are weakly isomorphic to the inputs") {
  const Network X = random_planar_network(40, 4);
  const Network Y = random_planar_network(41, 5);
  GwSolverConfig cfg;
  cfg.restarts = 5;
  GwSolverConfig check = cfg;
  check.init = GwInit::identity_like;
  const Network at0 = geodesic_interpolate(X, Y, 0.0, cfg);
  const Network at1 = geodesic_interpolate(X, Y, 1.0, cfg);
  REQUIRE(gw_frank_wolfe(at0, X, check).cost <=
          1e-12 * std::max(1.0, X.weights.squaredNorm()));
  REQUIRE(gw_frank_wolfe(at1, Y, check).cost <=
          1e-12 * std::max(1.0, Y.weights.squaredNorm()));
  REQUIRE_THROWS_AS(geodesic_interpolate(X, Y, 1.5, cfg), Infeasible);
}

TEST_CASE("geodesic midpoint splits the distance") {
  const Network X = random_planar_network(42, 4);
  const Network Y = random_planar_network(43, 5);
  GwSolverConfig cfg;
  cfg.restarts = 5;
  const double d = gw_frank_wolfe(X, Y, cfg).gw();
  const Network mid = geodesic_interpolate(X, Y, 0.5, cfg);
  GwSolverConfig check = cfg;
  check.init = GwInit::identity_like;
  const double dx = gw_frank_wolfe(X, mid, check).gw();
  const double dy = gw_frank_wolfe(Y, mid, check).gw();
  REQUIRE(dx == Approx(0.5 * d).epsilon(0.02));
  REQUIRE(dy == Approx(0.5 * d).epsilon(0.02));
}

TEST_CASE("blowup_barycenter special cases") {
  const Network X = random_planar_network(50, 5);
  GwSolverConfig cfg;
  cfg.restarts = 3;
  SECTION("single template with lambda = (1)") {
    auto [bary, a] = blowup_barycenter({X}, SimplexWeights{Vector::Ones(1)}, X, cfg);
    REQUIRE((bary.weights - a.templates_b[0]).cwiseAbs().maxCoeff() == 0.0);
    GwSolverConfig check = cfg;
    check.init = GwInit::identity_like;
    REQUIRE(gw_frank_wolfe(bary, X, check).cost <=
          1e-12 * std::max(1.0, X.weights.squaredNorm()));
  }
  SECTION("identical templates collapse to the aligned copy") {
    Vector lam(2);
    lam << 0.3, 0.7;
    auto [bary, a] = blowup_barycenter({X, X}, SimplexWeights{lam}, X, cfg);
    REQUIRE((bary.weights - a.templates_b[0]).cwiseAbs().maxCoeff() <= 1e-12);
  }
}
