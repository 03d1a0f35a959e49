#include <catch2/catch_amalgamated.hpp>

#include "test_helpers.hpp"

using namespace gwbcm;
using gwbcm::testing::random_planar_network;
using gwbcm::testing::same_class_pair;
using Catch::Approx;

TEST_CASE("experiment_recover on the fixed-point path") {
  std::vector<Network> templates{random_planar_network(1, 7),
                                 random_planar_network(2, 8),
                                 random_planar_network(3, 7)};
  SynthesisConfig syn;
  syn.target_size = 7;
  syn.solver.restarts = 3;
  syn.solver.seed = 5;
  const SimplexWeights lambda = sample_simplex_dirichlet(3, 9);
  const RecoveryReport rep =
      experiment_recover(templates, lambda, AnalysisMethod::fixed_point, syn);
  REQUIRE(rep.linf_error <= 1e-6);
  REQUIRE(rep.reconstruction_gw <= 1e-8);
  REQUIRE(rep.method == AnalysisMethod::fixed_point);

  // deterministic given all seeds
  const RecoveryReport again =
      experiment_recover(templates, lambda, AnalysisMethod::fixed_point, syn);
  REQUIRE(again.linf_error == rep.linf_error);
  REQUIRE((again.estimated_lambda.lambda - rep.estimated_lambda.lambda)
              .cwiseAbs()
              .maxCoeff() == 0.0);
}

TEST_CASE("experiment_recover on the blow-up path") {
  const std::vector<Network> templates = same_class_pair(4, 7, 8);
  SynthesisConfig syn;
  syn.solver.restarts = 20;
  syn.solver.seed = 6;
  const RecoveryReport rep = experiment_recover(
      templates, std::uint64_t(12), AnalysisMethod::blowup, syn);
  REQUIRE(rep.linf_error <= 1e-8);
}

TEST_CASE("experiment_recover requires at least two templates") {
  SynthesisConfig syn;
  syn.target_size = 4;
  REQUIRE_THROWS_AS(
      experiment_recover({random_planar_network(5, 4)},
                         SimplexWeights{Vector::Ones(1)},
                         AnalysisMethod::fixed_point, syn),
      EmptyInput);
}

TEST_CASE("classify_max_coordinate") {
  std::vector<std::string> labels{"A", "B"};
  Vector strong(2);
  strong << 0.9, 0.1;
  REQUIRE(classify_max_coordinate(SimplexWeights{strong}, labels) == "A");
  Vector tie(2);
  tie << 0.5, 0.5;
  REQUIRE(classify_max_coordinate(SimplexWeights{tie}, labels) == "A");
  Vector wrong_len(3);
  wrong_len << 0.2, 0.3, 0.5;
  REQUIRE_THROWS_AS(classify_max_coordinate(SimplexWeights{wrong_len}, labels),
                    DimensionMismatch);
}

TEST_CASE("kmeans_lambda reference cases") {
  SECTION("two well-separated singletons") {
    Vector a(2), b(2);
    a << 0.95, 0.05;
    b << 0.05, 0.95;
    std::vector<int> labels{0, 1};
    const KmeansResult r = kmeans_lambda({a, b}, 2, 0, &labels);
    REQUIRE(r.accuracy == 1.0);
  }
  SECTION("identical vectors trigger the empty-cluster reseed") {
    Vector same(2);
    same << 0.5, 0.5;
    const KmeansResult r = kmeans_lambda({same, same, same}, 2, 1);
    REQUIRE(r.assignments.size() == 3);
  }
  SECTION("planted clusters at opposite corners") {
    std::vector<Vector> pts;
    std::vector<int> labels;
    Rng rng(3);
    for (int i = 0; i < 40; ++i) {
      Vector x(2);
      const bool first = i % 2 == 0;
      x << (first ? 0.9 : 0.1) + 0.05 * rng.normal(),
          (first ? 0.1 : 0.9) + 0.05 * rng.normal();
      pts.push_back(x);
      labels.push_back(first ? 0 : 1);
    }
    const KmeansResult r = kmeans_lambda(pts, 2, 7, &labels);
    REQUIRE(r.accuracy >= 0.95);
  }
  SECTION("empty input") {
    REQUIRE_THROWS_AS(kmeans_lambda({}, 2, 0), EmptyInput);
  }
}

TEST_CASE("synthetic generators are seeded and shaped") {
  const PointCloud c = make_circle_cloud(12, 5);
  REQUIRE(c.size() == 12);
  const PointCloud c2 = make_circle_cloud(12, 5);
  REQUIRE((c.coords - c2.coords).cwiseAbs().maxCoeff() == 0.0);
  const PointCloud s = make_segment_cloud(10, 6);
  REQUIRE(s.size() == 10);
  const PointCloud g = make_grid_cloud(3, 7);
  REQUIRE(g.size() == 9);
}

TEST_CASE("two-class separation of lambda coordinates") {
  const int nodes = 15;
  const std::vector<Network> templates{
      pairwise_distance_network(make_circle_cloud(nodes, 100)),
      pairwise_distance_network(make_segment_cloud(nodes, 200))};
  const std::vector<int> labels{0, 1};
  GwSolverConfig solver;
  solver.restarts = 2;
  int correct = 0;
  const int queries = 10;
  for (int i = 0; i < queries; ++i) {
    const int truth = i % 2;
    const Network query = pairwise_distance_network(
        truth == 0 ? make_circle_cloud(nodes, 300 + i)
                   : make_segment_cloud(nodes, 400 + i));
    const AnalysisResult res = analyze_fixed_point(templates, query, solver);
    if (classify_max_coordinate(res.lambda, labels) == truth) ++correct;
  }
  REQUIRE(correct >= 9);
}

TEST_CASE("experiment_occlusion") {
  const int nodes = 12;
  const PointCloud circle = make_circle_cloud(nodes, 1);
  const PointCloud segment = make_segment_cloud(nodes, 2);
  const PointCloud query = make_circle_cloud(nodes, 3);
  SynthesisConfig syn;
  syn.target_size = nodes;
  syn.solver.restarts = 2;
  syn.solver.seed = 4;
  syn.max_outer_iter = 30;
  Vector center(2);
  center << 1.0, 0.0;

  SECTION("mask removing nothing reduces to plain recovery") {
    Vector far(2);
    far << 50, 50;
    auto [recon, report] = experiment_occlusion(
        query, {circle, segment}, OcclusionMask::ball(far, 0.1),
        AnalysisMethod::fixed_point, syn, 11);
    REQUIRE(report.estimated_lambda.lambda[0] > report.estimated_lambda.lambda[1]);
  }
  SECTION("partial mask still favors the matching template") {
    auto [recon, report] = experiment_occlusion(
        query, {circle, segment}, OcclusionMask::ball(center, 0.6),
        AnalysisMethod::fixed_point, syn, 12);
    REQUIRE(report.estimated_lambda.lambda[0] > 0.5);
    REQUIRE(recon.size() == nodes);
  }
  SECTION("mask wiping out a template is an error") {
    Vector origin = Vector::Zero(2);
    REQUIRE_THROWS_AS(
        experiment_occlusion(query, {circle, segment},
                             OcclusionMask::ball(origin, 100.0),
                             AnalysisMethod::fixed_point, syn, 13),
        AllPointsRemoved);
  }
}
