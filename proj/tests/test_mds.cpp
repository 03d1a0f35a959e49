#include <catch2/catch_amalgamated.hpp>

#include "test_helpers.hpp"

using namespace gwbcm;
using Catch::Approx;

TEST_CASE("classical_mds on two points") {
  Matrix d(2, 2);
  d << 0, 1, 1, 0;
  const Embedding e = classical_mds(d, 1);
  REQUIRE(std::abs(e.points(0, 0) - e.points(1, 0)) == Approx(1.0).margin(1e-12));
  REQUIRE(e.strain <= 1e-12);
}

TEST_CASE("classical_mds recovers a unit square exactly") {
  Matrix pts(4, 2);
  pts << 0, 0, 1, 0, 1, 1, 0, 1;
  const Matrix d = pairwise_distances(pts);
  const Embedding e = classical_mds(d, 2);
  const Matrix rebuilt = pairwise_distances(e.points);
  REQUIRE((rebuilt - d).cwiseAbs().maxCoeff() <= 1e-10);
  REQUIRE(e.eigenvalues[0] >= e.eigenvalues[1]);
  REQUIRE(e.points.colwise().mean().cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("classical_mds on planted configurations") {
  for (const Index dim : {Index(2), Index(3)}) {
    Rng rng(5 + static_cast<std::uint64_t>(dim));
    Matrix pts(8, dim);
    for (Index i = 0; i < pts.size(); ++i) pts(i / dim, i % dim) = rng.normal();
    const Matrix d = pairwise_distances(pts);
    const Embedding e = classical_mds(d, dim);
    const double scale = d.maxCoeff();
    REQUIRE(procrustes_rms(pts, e.points) <= 1e-8 * scale);
    REQUIRE(e.strain <= 1e-8);
  }
}

TEST_CASE("classical_mds reports strain on non-Euclidean input") {
  // barycenter-style matrix with a nonzero diagonal and a perturbation
  Matrix pts(5, 2);
  Rng rng(9);
  for (Index i = 0; i < 10; ++i) pts(i / 2, i % 2) = rng.normal();
  Matrix d = pairwise_distances(pts);
  d.diagonal().setConstant(0.7);  // self-weights are ignored by design
  const Embedding clean = classical_mds(d, 2);
  REQUIRE(clean.strain <= 1e-8);

  Matrix warped = d;
  warped(0, 1) = warped(1, 0) = d(0, 1) + 2.0;  // break the triangle inequality
  const Embedding e = classical_mds(warped, 2);
  REQUIRE(e.strain > clean.strain);
  REQUIRE(e.strain > 0.0);
}

TEST_CASE("classical_mds argument handling") {
  REQUIRE_THROWS_AS(classical_mds(Matrix::Zero(2, 3), 2), DimensionMismatch);
  REQUIRE_THROWS_AS(classical_mds(Matrix::Zero(3, 3), 0), EmptyVector);
  // requested dimension is clamped to the point count
  const Embedding e = classical_mds(Matrix::Zero(2, 2), 5);
  REQUIRE(e.points.cols() == 2);
}

TEST_CASE("eigenvector sign convention is deterministic") {
  Matrix pts(6, 2);
  Rng rng(11);
  for (Index i = 0; i < 12; ++i) pts(i / 2, i % 2) = rng.normal();
  const Matrix d = pairwise_distances(pts);
  const Embedding a = classical_mds(d, 2);
  const Embedding b = classical_mds(d, 2);
  REQUIRE((a.points - b.points).cwiseAbs().maxCoeff() == 0.0);
}
