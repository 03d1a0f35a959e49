#include <catch2/catch_amalgamated.hpp>

#include "test_helpers.hpp"

using namespace gwbcm;
using gwbcm::testing::random_general_network;
using gwbcm::testing::random_planar_network;
using Catch::Approx;

namespace {

Network weakiso_point() {
  Matrix w(1, 1);
  w << 3;
  return validate_network(w, Vector::Ones(1));
}

Network weakiso_double() {
  Matrix w(2, 2);
  w << 3, 3, 3, 3;
  return validate_network(w, Vector::Constant(2, 0.5));
}

Network weakiso2_small() {
  Matrix w(2, 2);
  w << 3, 2, 2, 0;
  Vector p(2);
  p << 0.6, 0.4;
  return validate_network(w, p);
}

Network weakiso2_large() {
  Matrix w(3, 3);
  w << 3, 3, 2, 3, 3, 2, 2, 2, 0;
  Vector p(3);
  p << 0.3, 0.3, 0.4;
  return validate_network(w, p);
}

}  // namespace

TEST_CASE("frank-wolfe reference cases") {
  SECTION("self distance is zero") {
    const Network X = random_planar_network(1, 5);
    const GwResult r = gw_frank_wolfe(X, X);
    REQUIRE(r.cost <= 1e-10 * X.weights.squaredNorm());
    REQUIRE(r.converged);
  }
  SECTION("single point vs duplicated pair") {
    const GwResult r = gw_frank_wolfe(weakiso_point(), weakiso_double());
    REQUIRE(r.cost <= 1e-15);
    REQUIRE(r.coupling.plan(0, 0) == Approx(0.5));
    REQUIRE(r.coupling.plan(0, 1) == Approx(0.5));
  }
  SECTION("weakly isomorphic 2-node vs 3-node pair") {
    const GwResult r = gw_frank_wolfe(weakiso2_small(), weakiso2_large());
    REQUIRE(r.cost <= 1e-12);
  }
  SECTION("cost field matches the objective at the coupling") {
    const Network X = random_planar_network(2, 4);
    const Network Y = random_planar_network(3, 5);
    const GwResult r = gw_frank_wolfe(X, Y);
    REQUIRE(r.cost == Approx(gw_objective(X, Y, r.coupling)).epsilon(1e-9));
  }
  SECTION("objective trace is nonincreasing") {
    const Network X = random_planar_network(4, 6);
    const Network Y = random_planar_network(5, 6);
    const GwResult r = gw_frank_wolfe(X, Y);
    REQUIRE(r.trace.size() >= 2);
    for (std::size_t i = 1; i < r.trace.size(); ++i)
      REQUIRE(r.trace[i] <= r.trace[i - 1] + 1e-14);
  }
}

TEST_CASE("entropic backend") {
  GwSolverConfig cfg;
  cfg.method = GwMethod::entropic;
  cfg.max_iter = 200;
  SECTION("self distance stays near zero") {
    const Network X = random_planar_network(6, 5);
    const double scale2 = X.weights.squaredNorm();
    REQUIRE(gw_entropic(X, X, cfg).cost <= 1e-4 * scale2);
  }
  SECTION("weak isomorphism pair") {
    const Network A = weakiso2_small(), B = weakiso2_large();
    const double scale2 = std::max(A.weights.squaredNorm(), B.weights.squaredNorm());
    REQUIRE(gw_entropic(A, B, cfg).cost <= 1e-4 * scale2);
  }
  SECTION("random pair within 1% of multi-restart frank-wolfe") {
    const Network X = random_planar_network(7, 5);
    const Network Y = random_planar_network(8, 5);
    GwSolverConfig fw;
    fw.restarts = 5;
    const double reference = gw_frank_wolfe(X, Y, fw).cost;
    GwSolverConfig ent = cfg;
    ent.restarts = 5;  // same restart budget as the reference
    const double entropic = gw_entropic(X, Y, ent).cost;
    REQUIRE(std::abs(entropic - reference) <= 0.01 * std::max(1.0, reference));
  }
}

TEST_CASE("brute-force oracle") {
  SECTION("1x1 networks have the unique coupling") {
    Matrix a(1, 1), b(1, 1);
    a << 2.0;
    b << 5.0;
    const GwResult r = gw_bruteforce(validate_network(a, Vector::Ones(1)),
                                     validate_network(b, Vector::Ones(1)));
    REQUIRE(r.cost == Approx(9.0));
    REQUIRE(r.coupling.plan(0, 0) == Approx(1.0));
  }
  SECTION("anti-diagonal self instance has two optimal plans") {
    Matrix w(2, 2);
    w << 0, 2, 2, 0;
    const Network X = validate_network(w, Vector::Constant(2, 0.5));
    const GwResult r = gw_bruteforce(X, X);
    REQUIRE(r.cost <= 1e-12);
    const Matrix& plan = r.coupling.plan;
    const bool diag = std::abs(plan(0, 0) - 0.5) < 1e-6 && std::abs(plan(1, 1) - 0.5) < 1e-6;
    const bool anti = std::abs(plan(0, 1) - 0.5) < 1e-6 && std::abs(plan(1, 0) - 0.5) < 1e-6;
    REQUIRE((diag || anti));
  }
  SECTION("brute dominates frank-wolfe on random 2x3 instances") {
    for (std::uint64_t seed = 10; seed < 16; ++seed) {
      const Network X = random_general_network(seed, 2);
      const Network Y = random_general_network(seed + 50, 3);
      GwSolverConfig fw;
      fw.restarts = 3;
      REQUIRE(gw_bruteforce(X, Y).cost <= gw_frank_wolfe(X, Y, fw).cost + 1e-8);
    }
  }
  SECTION("guard rejects instances beyond N*M = 9") {
    const Network X = random_planar_network(1, 10);
    GwSolverConfig cfg;
    cfg.method = GwMethod::brute;
    REQUIRE_THROWS_AS(gw_distance(X, X, cfg), TooLarge);
  }
}

TEST_CASE("dispatch determinism and restart merging") {
  const Network X = random_planar_network(20, 5);
  const Network Y = random_planar_network(21, 6);
  GwSolverConfig cfg;
  cfg.restarts = 5;
  cfg.seed = 7;
  const GwResult a = gw_distance(X, Y, cfg);
  const GwResult b = gw_distance(X, Y, cfg);
  REQUIRE(a.cost == b.cost);
  REQUIRE((a.coupling.plan - b.coupling.plan).cwiseAbs().maxCoeff() == 0.0);
  // thread count must not change the merged result
  GwSolverConfig threaded = cfg;
  threaded.threads = 2;
  const GwResult c = gw_distance(X, Y, threaded);
  REQUIRE(c.cost == a.cost);
  REQUIRE((c.coupling.plan - a.coupling.plan).cwiseAbs().maxCoeff() == 0.0);
  REQUIRE(a.gw() == Approx(std::sqrt(a.cost)));
}

TEST_CASE("symmetry of the distance") {
  for (std::uint64_t seed = 30; seed < 34; ++seed) {
    const Network X = random_planar_network(seed, 4);
    const Network Y = random_planar_network(seed + 11, 5);
    GwSolverConfig cfg;
    cfg.restarts = 5;
    cfg.seed = 3;
    const double xy = gw_frank_wolfe(X, Y, cfg).cost;
    const double yx = gw_frank_wolfe(Y, X, cfg).cost;
    const double scale2 =
        std::max({1.0, X.weights.squaredNorm(), Y.weights.squaredNorm()});
    REQUIRE(std::abs(xy - yx) <= 1e-8 * scale2);
  }
}

TEST_CASE("brute-force oracle satisfies the triangle inequality") {
  for (std::uint64_t seed = 40; seed < 44; ++seed) {
    const Network X = random_planar_network(seed, 3);
    const Network Y = random_planar_network(seed + 7, 3);
    const Network Z = random_planar_network(seed + 13, 3);
    const double xy = gw_bruteforce(X, Y).gw();
    const double yz = gw_bruteforce(Y, Z).gw();
    const double xz = gw_bruteforce(X, Z).gw();
    REQUIRE(xz <= xy + yz + 1e-6);
  }
}
