#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "gwbcm/analysis.hpp"
#include "gwbcm/dataio.hpp"
#include "gwbcm/errors.hpp"
#include "gwbcm/gw_solver.hpp"
#include "gwbcm/network.hpp"
#include "gwbcm/parallel.hpp"
#include "gwbcm/rng.hpp"
#include "gwbcm/synthesis.hpp"

namespace gwbcm {

struct RecoveryReport {
  SimplexWeights true_lambda;
  SimplexWeights estimated_lambda;
  double linf_error = 0.0;
  double reconstruction_gw = 0.0;  // GW^2 between input and reconstruction
  AnalysisMethod method = AnalysisMethod::fixed_point;
  double residual = 0.0;
};

// Round trip of the coding model: synthesize a barycenter for a known lambda
// (fixed-point iteration, or a convex combination of aligned templates for
// the blow-up route), recover lambda with the matching analysis algorithm,
// and rate the recovery by the sup-norm error plus the GW misfit of the
// reconstruction.
inline RecoveryReport experiment_recover(const std::vector<Network>& templates,
                                         const SimplexWeights& lambda,
                                         AnalysisMethod method,
                                         const SynthesisConfig& synthesis,
                                         const QpConfig& qp = {}) {
  if (templates.size() < 2) throw EmptyInput("recovery needs at least two templates");
  RecoveryReport report;
  report.true_lambda = lambda;
  report.method = method;

  if (method == AnalysisMethod::fixed_point) {
    auto [bary, diag] = synthesize_barycenter(templates, lambda, synthesis);
    AnalysisResult analyzed = analyze_fixed_point(templates, bary, synthesis.solver, qp);
    Network rebuilt =
        reconstruct_fixed_point(templates, bary, analyzed.lambda, analyzed.plans);
    GwSolverConfig check = synthesis.solver;
    check.init = GwInit::identity_like;
    report.estimated_lambda = analyzed.lambda;
    report.residual = analyzed.normalized_residual;
    report.reconstruction_gw = gw_frank_wolfe(bary, rebuilt, check).cost;
  } else {
    auto [bary, alignment] =
        blowup_barycenter(templates, lambda, templates.front(), synthesis.solver);
    AnalysisResult analyzed =
        analyze_blowup(templates, bary, synthesis.solver, 1e-10, qp);
    Network rebuilt = reconstruct_blowup(*analyzed.alignment, analyzed.lambda);
    GwSolverConfig check = synthesis.solver;
    check.init = GwInit::identity_like;
    report.estimated_lambda = analyzed.lambda;
    report.residual = analyzed.normalized_residual;
    report.reconstruction_gw = gw_frank_wolfe(bary, rebuilt, check).cost;
  }
  report.linf_error =
      (report.true_lambda.lambda - report.estimated_lambda.lambda).cwiseAbs().maxCoeff();
  return report;
}

inline RecoveryReport experiment_recover(const std::vector<Network>& templates,
                                         std::uint64_t lambda_seed,
                                         AnalysisMethod method,
                                         const SynthesisConfig& synthesis,
                                         const QpConfig& qp = {}) {
  const SimplexWeights lambda =
      sample_simplex_dirichlet(static_cast<Index>(templates.size()), lambda_seed);
  return experiment_recover(templates, lambda, method, synthesis, qp);
}

// Label of the largest coordinate; ties break toward the lowest index.
template <typename Label>
inline Label classify_max_coordinate(const SimplexWeights& lambda,
                                     const std::vector<Label>& labels) {
  if (static_cast<Index>(labels.size()) != lambda.size())
    throw DimensionMismatch("one label per coordinate required");
  Index best = 0;
  for (Index s = 1; s < lambda.size(); ++s)
    if (lambda[s] > lambda[best]) best = s;
  return labels[static_cast<std::size_t>(best)];
}

struct KmeansResult {
  std::vector<int> assignments;
  Matrix centroids;  // k x d
  double accuracy = 0.0;  // vs provided labels under the best permutation; 0 if none given
  int iterations = 0;
};

namespace detail {

inline double accuracy_best_permutation(const std::vector<int>& assignments,
                                        const std::vector<int>& labels, int k) {
  std::vector<int> perm(k);
  std::iota(perm.begin(), perm.end(), 0);
  double best = 0.0;
  do {
    int hits = 0;
    for (std::size_t i = 0; i < assignments.size(); ++i)
      if (perm[static_cast<std::size_t>(assignments[i])] == labels[i]) ++hits;
    best = std::max(best, static_cast<double>(hits) /
                              static_cast<double>(assignments.size()));
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

}  // namespace detail

// Lloyd iterations with seeded k-means++ initialization. Empty clusters are
// re-seeded at the point farthest from its centroid. When true labels are
// supplied, accuracy is scored under the best cluster-label permutation
// (exhaustive; callers keep k <= 8).
inline KmeansResult kmeans_lambda(const std::vector<Vector>& points, int k,
                                  std::uint64_t seed,
                                  const std::vector<int>* labels = nullptr,
                                  int max_iter = 200) {
  if (points.empty()) throw EmptyInput("no vectors to cluster");
  if (k < 1) throw EmptyInput("k must be at least 1");
  const int n = static_cast<int>(points.size());
  const Index d = points.front().size();
  for (const auto& x : points)
    if (x.size() != d) throw DimensionMismatch("inconsistent vector lengths");

  Rng rng(seed);
  Matrix centroids(k, d);
  // k-means++ seeding.
  centroids.row(0) = points[rng.below(static_cast<std::uint64_t>(n))].transpose();
  Vector dist2 = Vector::Constant(n, std::numeric_limits<double>::infinity());
  for (int c = 1; c < k; ++c) {
    for (int i = 0; i < n; ++i)
      dist2[i] = std::min(dist2[i],
                          (points[i].transpose() - centroids.row(c - 1)).squaredNorm());
    const double total = dist2.sum();
    int chosen = n - 1;
    if (total > 0) {
      double ticket = rng.uniform01() * total, cum = 0.0;
      for (int i = 0; i < n; ++i) {
        cum += dist2[i];
        if (cum >= ticket) {
          chosen = i;
          break;
        }
      }
    } else {
      chosen = static_cast<int>(rng.below(static_cast<std::uint64_t>(n)));
    }
    centroids.row(c) = points[chosen].transpose();
  }

  std::vector<int> assignments(n, 0);
  int it = 0;
  for (; it < max_iter; ++it) {
    bool moved = false;
    for (int i = 0; i < n; ++i) {
      int best = 0;
      double best_d = (points[i].transpose() - centroids.row(0)).squaredNorm();
      for (int c = 1; c < k; ++c) {
        const double dd = (points[i].transpose() - centroids.row(c)).squaredNorm();
        if (dd < best_d) {
          best_d = dd;
          best = c;
        }
      }
      if (assignments[i] != best) {
        assignments[i] = best;
        moved = true;
      }
    }
    Matrix sums = Matrix::Zero(k, d);
    std::vector<int> counts(k, 0);
    for (int i = 0; i < n; ++i) {
      sums.row(assignments[i]) += points[i].transpose();
      ++counts[assignments[i]];
    }
    for (int c = 0; c < k; ++c) {
      if (counts[c] > 0) {
        centroids.row(c) = sums.row(c) / counts[c];
      } else {
        // Re-seed a dead centroid at the point farthest from its cluster mean.
        int far = 0;
        double far_d = -1.0;
        for (int i = 0; i < n; ++i) {
          const double dd =
              (points[i].transpose() - centroids.row(assignments[i])).squaredNorm();
          if (dd > far_d) {
            far_d = dd;
            far = i;
          }
        }
        centroids.row(c) = points[far].transpose();
        assignments[far] = c;
        moved = true;
      }
    }
    if (!moved && it > 0) break;
  }

  KmeansResult out;
  out.assignments = std::move(assignments);
  out.centroids = std::move(centroids);
  out.iterations = it;
  if (labels) {
    if (labels->size() != points.size())
      throw DimensionMismatch("labels length does not match points");
    out.accuracy = detail::accuracy_best_permutation(out.assignments, *labels, k);
  }
  return out;
}

// Seeded synthetic point-cloud generators. These stand in for external shape
// datasets in the classification and occlusion experiments: circles and
// segments are geometrically well separated, grids sit in between.
inline PointCloud make_circle_cloud(int n, std::uint64_t seed, double noise = 0.05,
                                    double radius = 1.0) {
  Rng rng(seed);
  Matrix coords(n, 2);
  for (int i = 0; i < n; ++i) {
    const double angle = 2.0 * M_PI * (i + rng.uniform(-0.2, 0.2)) / n;
    const double r = radius * (1.0 + noise * rng.normal());
    coords(i, 0) = r * std::cos(angle);
    coords(i, 1) = r * std::sin(angle);
  }
  return make_point_cloud(std::move(coords));
}

inline PointCloud make_segment_cloud(int n, std::uint64_t seed, double noise = 0.02,
                                     double length = 2.0) {
  Rng rng(seed);
  Matrix coords(n, 2);
  for (int i = 0; i < n; ++i) {
    coords(i, 0) = length * (static_cast<double>(i) / (n - 1) - 0.5) +
                   noise * rng.normal();
    coords(i, 1) = noise * rng.normal();
  }
  return make_point_cloud(std::move(coords));
}

inline PointCloud make_grid_cloud(int side, std::uint64_t seed, double noise = 0.0) {
  Rng rng(seed);
  Matrix coords(side * side, 2);
  int row = 0;
  for (int a = 0; a < side; ++a)
    for (int b = 0; b < side; ++b, ++row) {
      coords(row, 0) = a + noise * rng.normal();
      coords(row, 1) = b + noise * rng.normal();
    }
  return make_point_cloud(std::move(coords));
}

struct OcclusionReport {
  SimplexWeights estimated_lambda;
  SimplexWeights random_lambda;
  double reconstruction_gw = 0.0;  // GW^2(reconstruction, clean query)
  double random_gw = 0.0;          // GW^2(random-lambda reconstruction, clean query)
  bool beats_random = false;
};

// Occlusion pipeline: apply the same mask to the query and every template,
// recover lambda from the occluded data, then synthesize from the clean
// templates with the recovered weights. The random-lambda reconstruction is
// the comparison baseline.
inline std::pair<Network, OcclusionReport> experiment_occlusion(
    const PointCloud& query, const std::vector<PointCloud>& templates,
    const OcclusionMask& mask, AnalysisMethod method,
    const SynthesisConfig& synthesis, std::uint64_t random_seed,
    const QpConfig& qp = {}) {
  if (templates.empty()) throw EmptyInput("no templates");

  const PointCloud occluded_query = occlude(query, mask);
  std::vector<Network> occluded_templates, clean_templates;
  occluded_templates.reserve(templates.size());
  clean_templates.reserve(templates.size());
  for (const auto& t : templates) {
    occluded_templates.push_back(pairwise_distance_network(occlude(t, mask)));
    clean_templates.push_back(pairwise_distance_network(t));
  }
  const Network occluded_net = pairwise_distance_network(occluded_query);
  const Network clean_query = pairwise_distance_network(query);

  AnalysisResult analyzed =
      method == AnalysisMethod::fixed_point
          ? analyze_fixed_point(occluded_templates, occluded_net, synthesis.solver, qp)
          : analyze_blowup(occluded_templates, occluded_net, synthesis.solver, 1e-10, qp);

  auto synthesize = [&](const SimplexWeights& lambda) {
    return synthesize_barycenter(clean_templates, lambda, synthesis).first;
  };
  const Network reconstruction = synthesize(analyzed.lambda);
  const SimplexWeights random_lambda = sample_simplex_dirichlet(
      static_cast<Index>(templates.size()), random_seed);
  const Network random_reconstruction = synthesize(random_lambda);

  GwSolverConfig check = synthesis.solver;
  check.restarts = std::max(check.restarts, 3);
  OcclusionReport report;
  report.estimated_lambda = analyzed.lambda;
  report.random_lambda = random_lambda;
  report.reconstruction_gw = gw_frank_wolfe(clean_query, reconstruction, check).cost;
  report.random_gw = gw_frank_wolfe(clean_query, random_reconstruction, check).cost;
  report.beats_random = report.reconstruction_gw < report.random_gw;
  return {reconstruction, report};
}

}  // namespace gwbcm
