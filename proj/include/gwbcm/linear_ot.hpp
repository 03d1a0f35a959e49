#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "gwbcm/errors.hpp"
#include "gwbcm/network.hpp"

namespace gwbcm {

struct LinOtResult {
  Coupling plan;
  double cost = 0.0;
  Vector dual_row;
  Vector dual_col;
  bool converged = true;
};

namespace detail {

struct BasisArc {
  int i;  // source (row) node
  int j;  // sink (column) node
  double flow;
};

// Northwest-corner rule. Consuming the row on ties keeps the arc sequence a
// staircase, so it always yields exactly N + M - 1 arcs (some possibly with
// zero flow) forming a spanning tree of the bipartite graph.
inline std::vector<BasisArc> northwest_corner(const Vector& p, const Vector& q) {
  const int n = static_cast<int>(p.size());
  const int m = static_cast<int>(q.size());
  std::vector<BasisArc> basis;
  basis.reserve(n + m - 1);
  Vector rp = p, rq = q;
  int i = 0, j = 0;
  while (true) {
    const double amount = std::min(rp[i], rq[j]);
    basis.push_back({i, j, amount});
    rp[i] -= amount;
    rq[j] -= amount;
    if (i == n - 1 && j == m - 1) break;
    if (rp[i] <= rq[j] && i < n - 1) {
      ++i;
    } else if (j < m - 1) {
      ++j;
    } else {
      ++i;
    }
  }
  return basis;
}

}  // namespace detail

// Exact solver for the transportation LP
//   min <C, pi>  s.t.  pi 1 = p, pi^T 1 = q, pi >= 0
// via the transportation (MODI) simplex on a spanning-tree basis. Returns a
// vertex solution, so the support size is at most N + M - 1. Entering arcs
// are chosen by most-negative reduced cost; if an unusually long run of
// degenerate pivots is detected the rule switches to Bland's, which cannot
// cycle.
inline LinOtResult solve_exact_ot(const Matrix& C, const Vector& p, const Vector& q) {
  const int n = static_cast<int>(p.size());
  const int m = static_cast<int>(q.size());
  if (C.rows() != n || C.cols() != m)
    throw DimensionMismatch("cost matrix shape does not match marginals");
  if (n == 0 || m == 0) throw EmptyVector("empty marginal");
  if (std::abs(p.sum() - q.sum()) > 1e-9)
    throw Infeasible("marginal sums differ by " + std::to_string(std::abs(p.sum() - q.sum())));
  if ((p.array() < 0).any() || (q.array() < 0).any())
    throw Infeasible("negative marginal entry");

  using detail::BasisArc;
  std::vector<BasisArc> basis = detail::northwest_corner(p, q);

  // Tree adjacency over nodes [0, n) = rows, [n, n+m) = columns.
  const int nodes = n + m;
  std::vector<std::vector<int>> adj(nodes);
  auto rebuild_adj = [&] {
    for (auto& a : adj) a.clear();
    for (int k = 0; k < static_cast<int>(basis.size()); ++k) {
      adj[basis[k].i].push_back(k);
      adj[n + basis[k].j].push_back(k);
    }
  };
  rebuild_adj();

  Vector u = Vector::Zero(n), v = Vector::Zero(m);
  std::vector<int> order(nodes), parent_arc(nodes);
  std::vector<char> seen(nodes);

  const double scale = 1.0 + C.cwiseAbs().maxCoeff();
  const double enter_tol = 1e-13 * scale;
  const long max_pivots = 2000L * (n + m) * std::max(n, m) + 10000L;
  long degenerate_run = 0;
  bool bland = false;

  for (long pivot = 0;; ++pivot) {
    if (pivot > max_pivots)
      throw NotConverged("transportation simplex exceeded pivot budget");

    // Duals from the spanning tree: u[0] = 0, then C = u + v on basic arcs.
    std::fill(seen.begin(), seen.end(), 0);
    int head = 0, tail = 0;
    order[tail++] = 0;
    seen[0] = 1;
    u[0] = 0.0;
    while (head < tail) {
      const int node = order[head++];
      for (const int k : adj[node]) {
        const BasisArc& a = basis[k];
        const int other = (node == a.i) ? n + a.j : a.i;
        if (seen[other]) continue;
        seen[other] = 1;
        if (other >= n)
          v[other - n] = C(a.i, a.j) - u[a.i];
        else
          u[other] = C(a.i, a.j) - v[a.j];
        order[tail++] = other;
      }
    }

    // Entering arc.
    int ei = -1, ej = -1;
    double best = -enter_tol;
    for (int i = 0; i < n && (!bland || ei < 0); ++i) {
      for (int j = 0; j < m; ++j) {
        const double r = C(i, j) - u[i] - v[j];
        if (r < best) {
          best = r;
          ei = i;
          ej = j;
          if (bland) break;
        }
      }
    }
    if (ei < 0) break;  // optimal

    // Unique tree path from row node ei to column node n + ej.
    std::fill(seen.begin(), seen.end(), 0);
    std::fill(parent_arc.begin(), parent_arc.end(), -1);
    head = 0;
    tail = 0;
    order[tail++] = ei;
    seen[ei] = 1;
    const int target = n + ej;
    while (head < tail && !seen[target]) {
      const int node = order[head++];
      for (const int k : adj[node]) {
        const BasisArc& a = basis[k];
        const int other = (node == a.i) ? n + a.j : a.i;
        if (seen[other]) continue;
        seen[other] = 1;
        parent_arc[other] = k;
        order[tail++] = other;
      }
    }

    // Walk back from the column node; arcs alternate -, +, -, ... starting
    // with - on the arc incident to the entering column.
    double theta = std::numeric_limits<double>::infinity();
    int leave = -1;
    {
      int node = target;
      bool minus = true;
      while (node != ei) {
        const int k = parent_arc[node];
        if (minus && basis[k].flow < theta - 1e-18) {
          theta = basis[k].flow;
          leave = k;
        }
        node = (node == basis[k].i) ? n + basis[k].j : basis[k].i;
        minus = !minus;
      }
    }
    if (theta <= 1e-15) ++degenerate_run; else degenerate_run = 0;
    if (degenerate_run > 4L * nodes) bland = true;

    {
      int node = target;
      bool minus = true;
      while (node != ei) {
        const int k = parent_arc[node];
        basis[k].flow += minus ? -theta : theta;
        node = (node == basis[k].i) ? n + basis[k].j : basis[k].i;
        minus = !minus;
      }
    }
    basis[leave] = BasisArc{ei, ej, theta};
    rebuild_adj();
  }

  Matrix plan = Matrix::Zero(n, m);
  for (const auto& a : basis) plan(a.i, a.j) += std::max(a.flow, 0.0);
  const double cost = (C.array() * plan.array()).sum();
  return LinOtResult{validate_coupling(std::move(plan), p, q), cost, u, v, true};
}

namespace detail {

inline Vector logsumexp_rows(const Matrix& Z) {
  Vector c = Z.rowwise().maxCoeff();
  return c.array() +
         ((Z.colwise() - c).array().exp().rowwise().sum()).log();
}

// Rounds a nonnegative plan to exact marginals (scale rows, scale columns,
// then spread the leftover mass as a rank-one correction).
inline Matrix round_to_marginals(Matrix plan, const Vector& p, const Vector& q) {
  Vector r = plan.rowwise().sum();
  for (Index i = 0; i < plan.rows(); ++i)
    if (r[i] > p[i] && r[i] > 0) plan.row(i) *= p[i] / r[i];
  Vector c = plan.colwise().sum();
  for (Index j = 0; j < plan.cols(); ++j)
    if (c[j] > q[j] && c[j] > 0) plan.col(j) *= q[j] / c[j];
  Vector ep = p - plan.rowwise().sum().cwiseMin(p);
  Vector eq = q - plan.colwise().sum().transpose().cwiseMin(q);
  const double total = ep.sum();
  if (total > 0) plan += ep * (eq / total).transpose();
  return plan;
}

}  // namespace detail

// Entropic OT. Runs in the log domain by default, which is stable for any
// epsilon > 0; the plain-kernel mode exists for speed on mild epsilon and
// throws NumericalUnderflow when exp(-C/eps) degenerates. Potentials can be
// warm-started through f0/g0 (callers iterating over slowly-changing costs).
inline LinOtResult sinkhorn(const Matrix& C, const Vector& p, const Vector& q,
                            double epsilon, int max_iter = 10000,
                            double tol = 1e-9, bool log_domain = true,
                            const Vector* f0 = nullptr, const Vector* g0 = nullptr) {
  const Index n = p.size(), m = q.size();
  if (C.rows() != n || C.cols() != m)
    throw DimensionMismatch("cost matrix shape does not match marginals");
  if (epsilon <= 0) throw Infeasible("epsilon must be positive");
  if (std::abs(p.sum() - q.sum()) > 1e-9)
    throw Infeasible("marginal sums differ");

  Matrix plan;
  Vector f = f0 ? *f0 : Vector::Zero(n);
  Vector g = g0 ? *g0 : Vector::Zero(m);
  bool converged = false;

  if (log_domain) {
    const Vector logp = p.array().log();
    const Vector logq = q.array().log();
    double best_err = std::numeric_limits<double>::infinity();
    Vector best_f = f, best_g = g;
    for (int it = 0; it < max_iter; ++it) {
      // f_i = eps * (log p_i - LSE_j((g_j - C_ij)/eps))
      Matrix Z = ((g.transpose().replicate(n, 1) - C) / epsilon);
      f = epsilon * (logp - detail::logsumexp_rows(Z)).eval();
      // g-update against transposed kernel
      Matrix Zt = ((f.transpose().replicate(m, 1) - C.transpose()) / epsilon);
      g = epsilon * (logq - detail::logsumexp_rows(Zt)).eval();
      // After a g-update columns are exact; measure the row violation.
      // The check costs as much as an iteration, so amortize it.
      if (it % 4 == 3 || it == max_iter - 1) {
        Matrix logpi = ((f * Vector::Ones(m).transpose() +
                         Vector::Ones(n) * g.transpose() - C) / epsilon);
        Vector rows = logpi.array().exp().matrix().rowwise().sum();
        const double err = (rows - p).cwiseAbs().sum();
        if (err < best_err) {
          best_err = err;
          best_f = f;
          best_g = g;
        }
        if (err <= tol) {
          converged = true;
          break;
        }
      }
    }
    if (!converged) {
      f = best_f;
      g = best_g;
    }
    plan = (((f * Vector::Ones(m).transpose() +
              Vector::Ones(n) * g.transpose() - C) / epsilon).array().exp()).matrix();
  } else {
    const Matrix K = (-C / epsilon).array().exp().matrix();
    // vectorized exp saturates at a denormal rather than flushing to zero,
    // so degenerate kernels are detected by a threshold
    if ((K.rowwise().sum().array() < 1e-300).any() ||
        (K.colwise().sum().array() < 1e-300).any())
      throw NumericalUnderflow(
          "kernel underflow at epsilon=" + std::to_string(epsilon) +
          "; use log-domain mode (the default)");
    Vector a = Vector::Ones(n), b = Vector::Ones(m);
    for (int it = 0; it < max_iter; ++it) {
      a = p.array() / (K * b).array();
      b = q.array() / (K.transpose() * a).array();
      if (!a.allFinite() || !b.allFinite())
        throw NumericalUnderflow("scaling diverged; use log-domain mode");
      plan = a.asDiagonal() * K * b.asDiagonal();
      const double err = (plan.rowwise().sum() - p).cwiseAbs().sum();
      if (err <= tol) {
        converged = true;
        break;
      }
    }
    if (plan.size() == 0) plan = a.asDiagonal() * K * b.asDiagonal();
    f = epsilon * a.array().log();
    g = epsilon * b.array().log();
  }

  plan = detail::round_to_marginals(std::move(plan), p, q);
  const double cost = (C.array() * plan.array()).sum();
  return LinOtResult{validate_coupling(std::move(plan), p, q), cost, f, g, converged};
}

}  // namespace gwbcm
