#include <catch2/catch_amalgamated.hpp>

#include "test_helpers.hpp"

using namespace gwbcm;
using gwbcm::testing::naive_gw_objective;
using gwbcm::testing::random_general_network;
using gwbcm::testing::random_planar_network;
using Catch::Approx;

TEST_CASE("validate_network accepts well-formed inputs") {
  Matrix w(2, 2);
  w << 0, 1, 1, 0;
  Vector p(2);
  p << 0.5, 0.5;
  const Network net = validate_network(w, p);
  REQUIRE(net.size() == 2);
  REQUIRE(net.symmetric);

  // single node: the smallest network, unit mass
  Matrix w1(1, 1);
  w1 << 3;
  Vector p1(1);
  p1 << 1.0;
  REQUIRE(validate_network(w1, p1).size() == 1);
}

TEST_CASE("validate_network rejects bad inputs") {
  Matrix w(2, 2);
  w << 0, 1, 1, 0;
  Vector zero_mass(2);
  zero_mass << 1.0, 0.0;
  REQUIRE_THROWS_AS(validate_network(w, zero_mass), NonPositiveMass);

  Vector p(2);
  p << 0.5, 0.5;
  REQUIRE_THROWS_AS(validate_network(Matrix::Zero(2, 3), Vector::Constant(2, 0.5)),
                    NonSquare);
  REQUIRE_THROWS_AS(validate_network(w, Vector::Constant(3, 1.0 / 3)),
                    DimensionMismatch);
  Vector half(2);
  half << 0.25, 0.25;
  REQUIRE_THROWS_AS(validate_network(w, half), MassSumMismatch);
  Matrix bad = w;
  bad(0, 1) = std::numeric_limits<double>::infinity();
  REQUIRE_THROWS_AS(validate_network(bad, p), NonFiniteEntry);
}

TEST_CASE("validate_network renormalizes tiny mass drift") {
  Matrix w(2, 2);
  w << 0, 1, 1, 0;
  Vector p(2);
  p << 0.5, 0.5 + 5e-10;
  const Network net = validate_network(w, p);
  REQUIRE(net.masses.sum() == Approx(1.0).margin(1e-15));
}

TEST_CASE("weighted_trace basics") {
  const Vector q2 = Vector::Constant(2, 0.5);
  REQUIRE(weighted_trace(Matrix::Zero(2, 2), Matrix::Ones(2, 2), q2) == 0.0);
  REQUIRE(weighted_trace(Matrix::Identity(2, 2), Matrix::Identity(2, 2), q2) ==
          Approx(0.5));
  Vector q(2);
  q << 0.3, 0.7;
  // direct summation: all entries 1, so the total is (sum q)^2 = 1
  REQUIRE(weighted_trace(Matrix::Ones(2, 2), Matrix::Ones(2, 2), q) == Approx(1.0));
  REQUIRE_THROWS_AS(weighted_trace(Matrix::Ones(2, 2), Matrix::Ones(3, 3), q),
                    DimensionMismatch);
}

TEST_CASE("gw_objective on reference cases") {
  const Network X = random_planar_network(3, 4);
  REQUIRE(gw_objective(X, X, diagonal_coupling(X.masses)) <=
          1e-14 * X.weights.squaredNorm());

  // one point against two duplicated points: weakly isomorphic, cost zero
  Matrix wx(1, 1);
  wx << 3;
  Vector px(1);
  px << 1;
  Matrix wy(2, 2);
  wy << 3, 3, 3, 3;
  Vector py = Vector::Constant(2, 0.5);
  Matrix plan(1, 2);
  plan << 0.5, 0.5;
  REQUIRE(gw_objective(validate_network(wx, px), validate_network(wy, py),
                       Coupling{plan, px, py}) == Approx(0.0).margin(1e-15));

  // hand-checked: 8 of the 16 index tuples mismatch at weight 1/16 each
  Matrix w(2, 2);
  w << 0, 1, 1, 0;
  const Network Z = validate_network(w, Vector::Constant(2, 0.5));
  const Coupling quarter = product_coupling(Z.masses, Z.masses);
  REQUIRE(gw_objective(Z, Z, quarter) == Approx(0.5));
  REQUIRE(naive_gw_objective(Z, Z, quarter.plan) == Approx(0.5));
}

TEST_CASE("three-term decomposition equals the quadruple loop") {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    Rng rng(seed);
    const int n = 1 + static_cast<int>(rng.below(4));
    const int m = 1 + static_cast<int>(rng.below(4));
    const Network X = random_general_network(seed * 2 + 1, n);
    const Network Y = random_general_network(seed * 2 + 2, m);
    const Coupling pi = product_coupling(X.masses, Y.masses);
    const double fast = gw_objective(X, Y, pi);
    const double slow = naive_gw_objective(X, Y, pi.plan);
    REQUIRE(fast == Approx(slow).epsilon(1e-10).margin(1e-12));
    REQUIRE(fast >= -1e-12);
  }
}

TEST_CASE("gw_objective_gradient reference cases") {
  const Network Y = random_general_network(5, 3);
  Network zero = Y;
  zero.weights.setZero();
  const Coupling pi = product_coupling(zero.masses, Y.masses);
  REQUIRE(gw_objective_gradient(zero, Y, pi).cwiseAbs().maxCoeff() == 0.0);

  // scalar case: d/dpi of -2ab pi^2 at pi = 1 is -4ab
  Matrix a(1, 1), b(1, 1);
  a << 2.5;
  b << -1.5;
  Vector one = Vector::Ones(1);
  const Matrix g = gw_objective_gradient(validate_network(a, one),
                                         validate_network(b, one),
                                         Coupling{Matrix::Ones(1, 1), one, one});
  REQUIRE(g(0, 0) == Approx(-4.0 * 2.5 * -1.5));
}

TEST_CASE("gradient matches marginal-preserving finite differences") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const Network X = random_planar_network(seed, 3);
    const Network Y = random_planar_network(seed + 100, 3);
    Coupling pi = product_coupling(X.masses, Y.masses);
    const Matrix grad = gw_objective_gradient(X, Y, pi);

    Rng rng(seed);
    Matrix dir(3, 3);
    for (Index i = 0; i < 9; ++i) dir(i / 3, i % 3) = rng.normal();
    // double centering projects onto the marginal null space
    const Vector rsum = dir.rowwise().sum();
    const Vector csum = dir.colwise().sum();
    const double total = dir.sum();
    dir -= rsum * Matrix::Ones(1, 3) / 3.0;
    dir -= Matrix::Ones(3, 1) * csum.transpose() / 3.0;
    dir.array() += total / 9.0;
    REQUIRE(dir.rowwise().sum().cwiseAbs().maxCoeff() < 1e-12);
    REQUIRE(dir.colwise().sum().cwiseAbs().maxCoeff() < 1e-12);

    const double h = 1e-6;
    Coupling plus{pi.plan + h * dir, pi.row_marginal, pi.col_marginal};
    Coupling minus{pi.plan - h * dir, pi.row_marginal, pi.col_marginal};
    const double fd =
        (gw_objective(X, Y, plus) - gw_objective(X, Y, minus)) / (2 * h);
    const double analytic = (grad.array() * dir.array()).sum();
    REQUIRE(fd == Approx(analytic).epsilon(1e-5).margin(1e-9));
  }
}

TEST_CASE("kronecker spectrum of SPD pairs is nonnegative") {
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    Rng rng(seed);
    auto spd = [&] {
      Matrix r(3, 3);
      for (Index i = 0; i < 9; ++i) r(i / 3, i % 3) = rng.normal();
      return Matrix(r * r.transpose() + 0.05 * Matrix::Identity(3, 3));
    };
    const Matrix X = spd(), Y = spd();
    Matrix kron(9, 9);
    for (Index i = 0; i < 3; ++i)
      for (Index j = 0; j < 3; ++j)
        kron.block(3 * i, 3 * j, 3, 3) = X(i, j) * Y;
    Eigen::SelfAdjointEigenSolver<Matrix> eig(kron);
    REQUIRE(eig.eigenvalues().minCoeff() >= -1e-10);
  }
}

TEST_CASE("coupling validation") {
  Vector p(2), q(2);
  p << 0.5, 0.5;
  q << 0.4, 0.6;
  REQUIRE_NOTHROW(validate_coupling(p * q.transpose(), p, q));
  Matrix bad = p * q.transpose();
  bad(0, 0) -= 0.1;
  REQUIRE_THROWS_AS(validate_coupling(bad, p, q), MarginalMismatch);
  REQUIRE_THROWS_AS(validate_coupling(Matrix::Ones(2, 3) / 6.0, p, q),
                    DimensionMismatch);
}
