#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <utility>
#include <vector>

#include "gwbcm/errors.hpp"
#include "gwbcm/gw_solver.hpp"
#include "gwbcm/network.hpp"

namespace gwbcm {

// Equal-size aligned representatives produced by node duplication along a
// coupling's support. After alignment the identity coupling diag(q_b)
// transports each template to the reference at the original GW cost.
struct BlowupAlignment {
  Index size_b = 0;
  Vector q_b;
  std::vector<Matrix> templates_b;
  Matrix reference_b;
  std::vector<std::vector<Index>> index_maps;  // per template, into source nodes
  std::vector<Index> reference_map;            // into reference source nodes
  double dropped_mass = 0.0;  // support mass discarded below threshold

  Network reference_network() const {
    return validate_network(reference_b, q_b);
  }
  Network template_network(std::size_t s) const {
    return validate_network(templates_b.at(s), q_b);
  }
};

namespace detail {

struct Support {
  std::vector<Index> rows;
  std::vector<Index> cols;
  Vector mass;
  double dropped = 0.0;
};

// Row-major enumeration of plan entries above support_tol * max(plan).
// Exact-solver plans are sparse vertices; entropic plans are dense, so the
// surviving mass is renormalized to sum one and the discarded mass reported.
inline Support enumerate_support(const Matrix& plan, double support_tol) {
  Support s;
  const double peak = plan.maxCoeff();
  if (peak <= 0) throw EmptySupport("plan has no positive entry");
  const double threshold = support_tol * peak;
  double kept = 0.0;
  for (Index i = 0; i < plan.rows(); ++i) {
    for (Index j = 0; j < plan.cols(); ++j) {
      if (plan(i, j) > threshold) {
        s.rows.push_back(i);
        s.cols.push_back(j);
        kept += plan(i, j);
      }
    }
  }
  if (s.rows.empty()) throw EmptySupport("all plan entries fall below the threshold");
  s.mass.resize(static_cast<Index>(s.rows.size()));
  for (std::size_t l = 0; l < s.rows.size(); ++l)
    s.mass[static_cast<Index>(l)] = plan(s.rows[l], s.cols[l]);
  s.dropped = std::max(0.0, 1.0 - kept);
  if (s.dropped > 0) s.mass /= s.mass.sum();
  return s;
}

inline Matrix pull_back(const Matrix& source, const std::vector<Index>& map) {
  const Index mb = static_cast<Index>(map.size());
  Matrix out(mb, mb);
  for (Index a = 0; a < mb; ++a)
    for (Index b = 0; b < mb; ++b) out(a, b) = source(map[a], map[b]);
  return out;
}

inline std::vector<Index> compose(const std::vector<Index>& earlier,
                                  const std::vector<Index>& latest) {
  std::vector<Index> out(latest.size());
  for (std::size_t l = 0; l < latest.size(); ++l) out[l] = earlier[latest[l]];
  return out;
}

}  // namespace detail

// Blow-up of a single pair along the support of pi: the l-th support entry
// (row-major) becomes the l-th aligned node, carrying mass pi at that entry;
// weight matrices replicate source rows and columns through the index maps.
inline BlowupAlignment blowup_pair(const Network& X, const Network& Y,
                                   const Coupling& pi, double support_tol = 1e-10) {
  if (pi.rows() != X.size() || pi.cols() != Y.size())
    throw DimensionMismatch("coupling shape does not match the networks");
  const double row_err = (pi.plan.rowwise().sum() - X.masses).cwiseAbs().maxCoeff();
  const double col_err =
      (pi.plan.colwise().sum().transpose() - Y.masses).cwiseAbs().maxCoeff();
  if (std::max(row_err, col_err) > 1e-8)
    throw MarginalMismatch("plan is not a coupling of the two networks");

  const detail::Support s = detail::enumerate_support(pi.plan, support_tol);
  BlowupAlignment out;
  out.size_b = static_cast<Index>(s.rows.size());
  out.q_b = s.mass;
  out.index_maps.push_back(s.rows);
  out.reference_map = s.cols;
  out.templates_b.push_back(detail::pull_back(X.weights, s.rows));
  out.reference_b = detail::pull_back(Y.weights, s.cols);
  out.dropped_mass = s.dropped;
  return out;
}

// Sequential alignment of S templates against a fixed reference. Step s
// solves GW(template_s, current reference), expands along the plan support,
// and re-expands every earlier template through the new reference-side index
// list; the reference's GW problems are never re-solved. Inherently
// sequential: each step depends on the previous expansion.
inline BlowupAlignment blowup_multi(const std::vector<Network>& templates,
                                    const Network& Y,
                                    const GwSolverConfig& solver = {},
                                    double support_tol = 1e-10,
                                    Index max_size = 5000) {
  if (templates.empty()) throw EmptyInput("at least one template is required");

  Network work = Y;
  std::vector<Index> ref_map(Y.size());
  for (Index j = 0; j < Y.size(); ++j) ref_map[j] = j;
  std::vector<std::vector<Index>> template_maps;
  double dropped = 0.0;

  for (std::size_t s = 0; s < templates.size(); ++s) {
    // The working reference stays weakly isomorphic to Y, so the step-s
    // problem is solved against the pristine original and the plan is
    // pushed through the accumulated index map: the composed plan splits
    // each entry pi[i,j] across the aligned copies of node j in proportion
    // to their masses, and is optimal for the working problem whenever pi
    // is optimal for the original one.
    const GwResult solved = gw_distance(templates[s], Y, solver);
    Matrix lifted(templates[s].size(), work.size());
    for (Index l = 0; l < work.size(); ++l)
      lifted.col(l) = solved.coupling.plan.col(ref_map[l]) *
                      (work.masses[l] / Y.masses[ref_map[l]]);
    const detail::Support sup = detail::enumerate_support(lifted, support_tol);
    const Index mb = static_cast<Index>(sup.rows.size());
    if (mb > max_size)
      throw BlowupTooLarge("alignment grew to " + std::to_string(mb) +
                           " nodes (limit " + std::to_string(max_size) + ")");
    dropped = std::max(dropped, sup.dropped);

    // Earlier templates and the reference are re-indexed through the
    // reference-side support list of this step.
    for (auto& map : template_maps) map = detail::compose(map, sup.cols);
    ref_map = detail::compose(ref_map, sup.cols);
    template_maps.push_back(sup.rows);

    work = validate_network(detail::pull_back(work.weights, sup.cols), sup.mass);
  }

  BlowupAlignment out;
  out.size_b = work.size();
  out.q_b = work.masses;
  out.reference_b = detail::pull_back(Y.weights, ref_map);
  out.reference_map = std::move(ref_map);
  out.templates_b.reserve(templates.size());
  for (std::size_t s = 0; s < templates.size(); ++s)
    out.templates_b.push_back(
        detail::pull_back(templates[s].weights, template_maps[s]));
  out.index_maps = std::move(template_maps);
  out.dropped_mass = dropped;
  return out;
}

}  // namespace gwbcm
