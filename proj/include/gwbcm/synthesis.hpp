#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <utility>
#include <vector>

#include "gwbcm/blowup.hpp"
#include "gwbcm/errors.hpp"
#include "gwbcm/gw_solver.hpp"
#include "gwbcm/network.hpp"
#include "gwbcm/parallel.hpp"
#include "gwbcm/rng.hpp"
#include "gwbcm/simplex_qp.hpp"

namespace gwbcm {

enum class SynthesisInit { random_seeded, first_template_resampled, custom };

struct SynthesisConfig {
  Index target_size = 0;  // M; required
  Vector target_masses;   // empty = uniform 1/M
  int max_outer_iter = 100;
  double fp_tol = 1e-9;  // relative Frobenius change of the iterate
  SynthesisInit init = SynthesisInit::random_seeded;
  Matrix custom_init;
  GwSolverConfig solver;
};

struct RhoResult {
  Network updated;
  std::vector<Coupling> plans;
  std::vector<double> plan_costs;  // GW^2 per template at the input iterate
};

namespace detail {

inline void check_synthesis_inputs(const std::vector<Network>& templates,
                                   const SimplexWeights& lambda) {
  if (templates.empty()) throw EmptyInput("no templates");
  if (static_cast<Index>(templates.size()) != lambda.size())
    throw DimensionMismatch("lambda length does not match template count");
}

}  // namespace detail

// One application of the barycenter fixed-point operator: solve the S
// transport problems against the current iterate (in parallel, each solved
// fresh so a later analysis pass reproduces the same plans), then combine
//   rho(Y)[j,l] = (1 / (q_j q_l)) * sum_s lambda_s (pi_s^T X_s pi_s)[j,l].
inline RhoResult rho_update(const std::vector<Network>& templates,
                            const SimplexWeights& lambda, const Network& Y,
                            const GwSolverConfig& solver) {
  detail::check_synthesis_inputs(templates, lambda);
  const std::size_t count = templates.size();
  std::vector<GwResult> solved(count);
  parallel_for(count, solver.threads, [&](std::size_t s) {
    GwSolverConfig cfg = solver;
    cfg.threads = 1;
    solved[s] = gw_distance(templates[s], Y, cfg);
  });

  const Vector& q = Y.masses;
  Matrix combined = Matrix::Zero(Y.size(), Y.size());
  for (std::size_t s = 0; s < count; ++s) {
    const Matrix& pi = solved[s].coupling.plan;
    combined.noalias() +=
        lambda[static_cast<Index>(s)] * (pi.transpose() * templates[s].weights * pi);
  }
  combined.array() /= (q * q.transpose()).array();

  RhoResult out;
  out.updated = validate_network(std::move(combined), q);
  out.plans.reserve(count);
  out.plan_costs.reserve(count);
  for (auto& r : solved) {
    out.plans.push_back(std::move(r.coupling));
    out.plan_costs.push_back(r.cost);
  }
  return out;
}

struct SynthesisDiagnostics {
  std::vector<double> objective_trace;  // sum_s lambda_s GW^2 per outer iteration
  bool converged = false;
  int iterations = 0;
  double final_change = 0.0;
};

namespace detail {

inline Matrix synthesis_initial(const std::vector<Network>& templates,
                                const SynthesisConfig& cfg) {
  const Index m = cfg.target_size;
  switch (cfg.init) {
    case SynthesisInit::custom:
      if (cfg.custom_init.rows() != m || cfg.custom_init.cols() != m)
        throw DimensionMismatch("custom synthesis init has the wrong size");
      return cfg.custom_init;
    case SynthesisInit::first_template_resampled: {
      const Matrix& src = templates.front().weights;
      const Index n = src.rows();
      Matrix out(m, m);
      for (Index a = 0; a < m; ++a)
        for (Index b = 0; b < m; ++b)
          out(a, b) = src((a * n) / m, (b * n) / m);
      return out;
    }
    case SynthesisInit::random_seeded:
    default: {
      double peak = 0.0;
      for (const auto& t : templates)
        peak = std::max(peak, t.weights.cwiseAbs().maxCoeff());
      if (peak <= 0) peak = 1.0;
      Rng rng(cfg.solver.seed);
      Matrix out(m, m);
      for (Index a = 0; a < m; ++a)
        for (Index b = 0; b < m; ++b) out(a, b) = rng.uniform(0.0, peak);
      return out;
    }
  }
}

}  // namespace detail

// Iterative barycenter synthesis: repeat Y <- rho_lambda(Y) from the chosen
// initialization until the relative Frobenius change drops below fp_tol.
// A fixed point exists but convergence is not guaranteed; on stalling, the
// best-objective iterate seen is returned with converged = false.
inline std::pair<Network, SynthesisDiagnostics> synthesize_barycenter(
    const std::vector<Network>& templates, const SimplexWeights& lambda,
    const SynthesisConfig& cfg) {
  detail::check_synthesis_inputs(templates, lambda);
  if (cfg.target_size < 1) throw EmptyInput("target_size must be at least 1");
  Vector q = cfg.target_masses;
  if (q.size() == 0)
    q = Vector::Constant(cfg.target_size, 1.0 / static_cast<double>(cfg.target_size));
  if (q.size() != cfg.target_size)
    throw DimensionMismatch("target_masses length does not match target_size");
  if ((q.array() <= 0).any()) throw NonPositiveMass("target masses");

  Network iterate = validate_network(detail::synthesis_initial(templates, cfg), q);
  SynthesisDiagnostics diag;
  Network best = iterate;
  double best_objective = std::numeric_limits<double>::infinity();
  for (int it = 0; it < cfg.max_outer_iter; ++it) {
    RhoResult step = rho_update(templates, lambda, iterate, cfg.solver);
    double objective = 0.0;
    for (std::size_t s = 0; s < templates.size(); ++s)
      objective += lambda[static_cast<Index>(s)] * step.plan_costs[s];
    diag.objective_trace.push_back(objective);
    if (objective < best_objective) {
      best_objective = objective;
      best = iterate;
    }
    const double denom = std::max(iterate.weights.norm(), 1e-300);
    diag.final_change = (step.updated.weights - iterate.weights).norm() / denom;
    iterate = std::move(step.updated);
    diag.iterations = it + 1;
    if (diag.final_change <= cfg.fp_tol) {
      diag.converged = true;
      return {std::move(iterate), std::move(diag)};
    }
  }
  diag.converged = false;
  // Unconverged: hand back the iterate with the best recorded objective.
  return {std::move(best), std::move(diag)};
}

// GW geodesic sample: blow the pair up along an optimal plan and mix the
// aligned representatives, gamma(t) = ((1-t) X_b + t Y_b, q_b).
inline Network geodesic_interpolate(const Network& X, const Network& Y, double t,
                                    const GwSolverConfig& solver = {}) {
  if (t < 0.0 || t > 1.0) throw Infeasible("interpolation parameter must lie in [0,1]");
  const GwResult solved = gw_distance(X, Y, solver);
  const BlowupAlignment a = blowup_pair(X, Y, solved.coupling);
  Matrix mixed = (1.0 - t) * a.templates_b.front() + t * a.reference_b;
  return validate_network(std::move(mixed), a.q_b);
}

// Convex combination of templates aligned against a reference network:
// (sum_s lambda_s X^s_b, q_b). For two templates this parametrizes a true
// GW geodesic; for more it produces a weak (Karcher-type) barycenter.
inline std::pair<Network, BlowupAlignment> blowup_barycenter(
    const std::vector<Network>& templates, const SimplexWeights& lambda,
    const Network& reference, const GwSolverConfig& solver = {},
    double support_tol = 1e-10) {
  detail::check_synthesis_inputs(templates, lambda);
  BlowupAlignment a = blowup_multi(templates, reference, solver, support_tol);
  Matrix mixed = Matrix::Zero(a.size_b, a.size_b);
  for (std::size_t s = 0; s < templates.size(); ++s)
    mixed += lambda[static_cast<Index>(s)] * a.templates_b[s];
  Network net = validate_network(std::move(mixed), a.q_b);
  return {std::move(net), std::move(a)};
}

}  // namespace gwbcm
