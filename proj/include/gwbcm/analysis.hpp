#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <optional>
#include <utility>
#include <vector>

#include "gwbcm/blowup.hpp"
#include "gwbcm/errors.hpp"
#include "gwbcm/gw_solver.hpp"
#include "gwbcm/network.hpp"
#include "gwbcm/parallel.hpp"
#include "gwbcm/simplex_qp.hpp"

namespace gwbcm {

enum class AnalysisMethod { fixed_point, blowup };

inline const char* analysis_method_name(AnalysisMethod m) {
  return m == AnalysisMethod::fixed_point ? "fixed_point" : "blowup";
}

// The S x S quadratic system of either analysis route: the Gram matrix
// minimized over the simplex plus the equivalent constrained linear system.
struct AnalysisSystem {
  Matrix gram;           // Q (fixed point) or A (blow-up)
  Matrix linear_matrix;  // K or L
  Vector linear_rhs;     // b or c
  AnalysisMethod method = AnalysisMethod::fixed_point;
};

struct AnalysisResult {
  SimplexWeights lambda;
  double residual = 0.0;        // min lambda^T gram lambda
  double normalized_residual = 0.0;
  double kkt_residual = 0.0;
  std::vector<Coupling> plans;               // fixed-point route
  std::optional<BlowupAlignment> alignment;  // blow-up route
  bool unique = true;

  // Default membership threshold on the normalized residual: below it the
  // input is treated as lying in the coding model of the templates.
  bool in_model(double threshold = 1e-6) const {
    return normalized_residual <= threshold;
  }
};

// F(Y, s) = (1 / (q q^T)) (.) pi^T X pi: the single-template contribution of
// the fixed-point operator.
inline Matrix f_matrix(const Network& X, const Network& Y, const Coupling& pi) {
  if (pi.rows() != X.size() || pi.cols() != Y.size())
    throw DimensionMismatch("coupling shape does not match the networks");
  Matrix f = pi.plan.transpose() * X.weights * pi.plan;
  f.array() /= (Y.masses * Y.masses.transpose()).array();
  return f;
}

namespace detail {

inline double trace_inner(const Matrix& A, const Matrix& B, const Vector* weight) {
  if (weight) return weighted_trace(A, B, *weight);
  return (A.array() * B.array()).sum();
}

inline bool system_unique(const Matrix& K) {
  Eigen::FullPivLU<Matrix> lu(K);
  lu.setThreshold(1e-10);
  return lu.rank() == K.cols();
}

}  // namespace detail

// Builds the fixed-point analysis system at Y: one GW solve per template
// (run in parallel), then
//   Q[s,r] = tr((F_s - Y)^T (F_r - Y)),
//   K[s,r] = tr(F_s^T F_r),  b[s] = tr(Y^T F_s),
// with the plain Frobenius trace. Passing trace_weight switches to the
// q-weighted trace, which reproduces the blow-up system on aligned inputs.
inline AnalysisSystem build_fixed_point_system(
    const std::vector<Network>& templates, const Network& Y,
    const GwSolverConfig& solver = {}, std::vector<Coupling>* plans_out = nullptr,
    const Vector* trace_weight = nullptr) {
  if (templates.empty()) throw EmptyInput("no templates");
  const Index s_count = static_cast<Index>(templates.size());

  std::vector<Matrix> f(templates.size());
  std::vector<Coupling> plans(templates.size(),
                              Coupling{Matrix(), Vector(), Vector()});
  parallel_for(templates.size(), solver.threads, [&](std::size_t s) {
    GwSolverConfig cfg = solver;
    cfg.threads = 1;
    GwResult solved = gw_distance(templates[s], Y, cfg);
    f[s] = f_matrix(templates[s], Y, solved.coupling);
    plans[s] = std::move(solved.coupling);
  });

  AnalysisSystem sys;
  sys.method = AnalysisMethod::fixed_point;
  sys.gram.resize(s_count, s_count);
  sys.linear_matrix.resize(s_count, s_count);
  sys.linear_rhs.resize(s_count);
  for (Index s = 0; s < s_count; ++s) {
    const Matrix ds = f[s] - Y.weights;
    for (Index r = s; r < s_count; ++r) {
      const Matrix dr = f[r] - Y.weights;
      sys.gram(s, r) = detail::trace_inner(ds, dr, trace_weight);
      sys.gram(r, s) = sys.gram(s, r);
      sys.linear_matrix(s, r) = detail::trace_inner(f[s], f[r], trace_weight);
      sys.linear_matrix(r, s) = sys.linear_matrix(s, r);
    }
    sys.linear_rhs[s] = detail::trace_inner(Y.weights, f[s], trace_weight);
  }
  if (plans_out) *plans_out = std::move(plans);
  return sys;
}

// Gram assembly over an existing alignment:
//   A[s,r] = tr_{q_b}((X^s_b - Y_b)^T (X^r_b - Y_b)),
//   L[s,r] = tr_{q_b}((X^s_b)^T X^r_b),  c[s] = tr_{q_b}(Y_b^T X^s_b).
inline AnalysisSystem assemble_blowup_system(const BlowupAlignment& a) {
  const Index s_count = static_cast<Index>(a.templates_b.size());
  AnalysisSystem sys;
  sys.method = AnalysisMethod::blowup;
  sys.gram.resize(s_count, s_count);
  sys.linear_matrix.resize(s_count, s_count);
  sys.linear_rhs.resize(s_count);
  for (Index s = 0; s < s_count; ++s) {
    const Matrix ds = a.templates_b[s] - a.reference_b;
    for (Index r = s; r < s_count; ++r) {
      const Matrix dr = a.templates_b[r] - a.reference_b;
      sys.gram(s, r) = weighted_trace(ds, dr, a.q_b);
      sys.gram(r, s) = sys.gram(s, r);
      sys.linear_matrix(s, r) =
          weighted_trace(a.templates_b[s], a.templates_b[r], a.q_b);
      sys.linear_matrix(r, s) = sys.linear_matrix(s, r);
    }
    sys.linear_rhs[s] = weighted_trace(a.reference_b, a.templates_b[s], a.q_b);
  }
  return sys;
}

inline std::pair<AnalysisSystem, BlowupAlignment> build_blowup_system(
    const std::vector<Network>& templates, const Network& Y,
    const GwSolverConfig& solver = {}, double support_tol = 1e-10) {
  BlowupAlignment a = blowup_multi(templates, Y, solver, support_tol);
  return {assemble_blowup_system(a), std::move(a)};
}

namespace detail {

inline AnalysisResult finish_analysis(AnalysisSystem sys, double norm_scale,
                                      const QpConfig& qp) {
  QpResult solved = min_quad_simplex(sys.gram, qp);
  AnalysisResult out;
  out.lambda = std::move(solved.lambda);
  out.residual = std::max(solved.value, 0.0);
  out.normalized_residual = out.residual / std::max(norm_scale, 1e-300);
  out.kkt_residual = solved.kkt_residual;
  out.unique = system_unique(sys.linear_matrix);
  return out;
}

}  // namespace detail

// Fixed-point analysis: minimize lambda^T Q lambda over the simplex. A zero
// residual certifies that Y sits in the fixed-size barycenter space of the
// templates; otherwise lambda is a projection-style estimate and the raw and
// tr(Y^T Y)-normalized residuals quantify the misfit.
inline AnalysisResult analyze_fixed_point(const std::vector<Network>& templates,
                                          const Network& Y,
                                          const GwSolverConfig& solver = {},
                                          const QpConfig& qp = {}) {
  std::vector<Coupling> plans;
  AnalysisSystem sys = build_fixed_point_system(templates, Y, solver, &plans);
  const double scale = (Y.weights.array().square()).sum();
  AnalysisResult out = detail::finish_analysis(std::move(sys), scale, qp);
  out.plans = std::move(plans);
  return out;
}

// Blow-up analysis: minimize lambda^T A lambda over the simplex. The residual
// vanishes exactly when [Y] is a weak (Karcher) barycenter of the templates.
inline AnalysisResult analyze_blowup(const std::vector<Network>& templates,
                                     const Network& Y,
                                     const GwSolverConfig& solver = {},
                                     double support_tol = 1e-10,
                                     const QpConfig& qp = {}) {
  auto [sys, alignment] = build_blowup_system(templates, Y, solver, support_tol);
  const double scale =
      weighted_trace(alignment.reference_b, alignment.reference_b, alignment.q_b);
  AnalysisResult out = detail::finish_analysis(std::move(sys), scale, qp);
  out.alignment = std::move(alignment);
  return out;
}

// Gradient of the weighted Frechet objective after alignment:
// sum_s lambda_s X^s_b - Y_b. Its squared q_b-weighted norm is lambda^T A lambda.
inline Matrix barycenter_gradient(const SimplexWeights& lambda,
                                  const BlowupAlignment& a) {
  if (lambda.size() != static_cast<Index>(a.templates_b.size()))
    throw DimensionMismatch("lambda length does not match alignment");
  Matrix g = -a.reference_b;
  for (std::size_t s = 0; s < a.templates_b.size(); ++s)
    g += lambda[static_cast<Index>(s)] * a.templates_b[s];
  return g;
}

// Reconstruction through the fixed-point formula:
// ((1/(q q^T)) (.) sum_s lambda_s pi_s^T X^s pi_s, q).
inline Network reconstruct_fixed_point(const std::vector<Network>& templates,
                                       const Network& Y,
                                       const SimplexWeights& lambda,
                                       const std::vector<Coupling>& plans) {
  if (templates.size() != plans.size() ||
      lambda.size() != static_cast<Index>(templates.size()))
    throw DimensionMismatch("templates, plans and lambda must align");
  Matrix combined = Matrix::Zero(Y.size(), Y.size());
  for (std::size_t s = 0; s < templates.size(); ++s) {
    const Matrix& pi = plans[s].plan;
    if (pi.rows() != templates[s].size() || pi.cols() != Y.size())
      throw DimensionMismatch("plan " + std::to_string(s) + " has the wrong shape");
    combined.noalias() +=
        lambda[static_cast<Index>(s)] * (pi.transpose() * templates[s].weights * pi);
  }
  combined.array() /= (Y.masses * Y.masses.transpose()).array();
  return validate_network(std::move(combined), Y.masses);
}

// Reconstruction through the blow-up formula: (sum_s lambda_s X^s_b, q_b).
inline Network reconstruct_blowup(const BlowupAlignment& a,
                                  const SimplexWeights& lambda) {
  if (lambda.size() != static_cast<Index>(a.templates_b.size()))
    throw DimensionMismatch("lambda length does not match alignment");
  Matrix mixed = Matrix::Zero(a.size_b, a.size_b);
  for (std::size_t s = 0; s < a.templates_b.size(); ++s)
    mixed += lambda[static_cast<Index>(s)] * a.templates_b[s];
  return validate_network(std::move(mixed), a.q_b);
}

}  // namespace gwbcm
