#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <vector>

#include "gwbcm/errors.hpp"
#include "gwbcm/linear_ot.hpp"
#include "gwbcm/network.hpp"
#include "gwbcm/parallel.hpp"
#include "gwbcm/rng.hpp"

namespace gwbcm {

enum class GwMethod { frank_wolfe, entropic, brute };
enum class GwInit { product, identity_like, custom };

struct GwSolverConfig {
  GwMethod method = GwMethod::frank_wolfe;
  double tol = 1e-9;     // relative objective decrease
  int max_iter = 1000;
  double epsilon = 0.0;  // entropic regularization; 0 = 5e-3 * max|linearized cost|
  GwInit init = GwInit::product;
  std::uint64_t seed = 0;
  int restarts = 1;
  Matrix custom_init;
  int threads = 1;
};

namespace detail {

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// Feasible diagonal-like plan: northwest corner after sorting both marginals
// in decreasing order. Coincides with diag(p) whenever p == q.
inline Matrix identity_like_plan(const Vector& p, const Vector& q) {
  const Index n = p.size(), m = q.size();
  std::vector<Index> rp(n), cq(m);
  std::iota(rp.begin(), rp.end(), 0);
  std::iota(cq.begin(), cq.end(), 0);
  std::stable_sort(rp.begin(), rp.end(), [&](Index a, Index b) { return p[a] > p[b]; });
  std::stable_sort(cq.begin(), cq.end(), [&](Index a, Index b) { return q[a] > q[b]; });
  Vector ps(n), qs(m);
  for (Index a = 0; a < n; ++a) ps[a] = p[rp[a]];
  for (Index b = 0; b < m; ++b) qs[b] = q[cq[b]];
  Matrix plan = Matrix::Zero(n, m);
  for (const auto& arc : northwest_corner(ps, qs))
    plan(rp[arc.i], cq[arc.j]) += arc.flow;
  return plan;
}

// Random feasible plan: rows drawn as p_i * Dirichlet, rebalanced to exact
// column marginals by a rank-one correction, then blended with the product
// coupling just enough to restore nonnegativity.
inline Matrix dirichlet_feasible_plan(const Vector& p, const Vector& q, Rng& rng) {
  const Index n = p.size(), m = q.size();
  Matrix plan(n, m);
  for (Index i = 0; i < n; ++i) plan.row(i) = p[i] * rng.dirichlet(m).transpose();
  const Vector c = plan.colwise().sum();
  plan += p * (q - c).transpose();
  const double lowest = plan.minCoeff();
  if (lowest < 0) {
    double beta = 0.0;
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j < m; ++j)
        if (plan(i, j) < 0)
          beta = std::max(beta, -plan(i, j) / (p[i] * q[j] - plan(i, j)));
    beta = std::min(1.0, beta * (1.0 + 1e-12) + 1e-15);
    plan = (1.0 - beta) * plan + beta * (p * q.transpose());
  }
  return plan.cwiseMax(0.0);
}

inline Matrix initial_plan(const Network& X, const Network& Y,
                           const GwSolverConfig& cfg, int restart) {
  if (restart > 0) {
    Rng rng(mix_seed(cfg.seed, static_cast<std::uint64_t>(restart)));
    return dirichlet_feasible_plan(X.masses, Y.masses, rng);
  }
  switch (cfg.init) {
    case GwInit::identity_like:
      return identity_like_plan(X.masses, Y.masses);
    case GwInit::custom:
      if (cfg.custom_init.rows() != X.size() || cfg.custom_init.cols() != Y.size())
        throw DimensionMismatch("custom initial plan has the wrong shape");
      return cfg.custom_init;
    case GwInit::product:
    default:
      return X.masses * Y.masses.transpose();
  }
}

// One conditional-gradient run from a fixed initial plan. Each step
// linearizes the quadratic objective, solves the transportation LP exactly,
// and minimizes the 1-D quadratic along the segment in closed form; if that
// quadratic is concave the better endpoint is taken. The objective trace is
// nonincreasing by construction.
inline GwResult frank_wolfe_single(const Network& X, const Network& Y,
                                   const GwSolverConfig& cfg, Matrix plan) {
  const Vector& p = X.masses;
  const Vector& q = Y.masses;
  Coupling pi{plan, p, q};
  double energy = gw_objective(X, Y, pi);
  const double ref = std::max(1.0, std::abs(energy));
  std::vector<double> trace{energy};
  bool converged = false;
  int it = 0;
  for (; it < cfg.max_iter; ++it) {
    const Matrix grad = gw_objective_gradient(X, Y, pi);
    const LinOtResult lin = solve_exact_ot(grad, p, q);
    const Matrix D = lin.plan.plan - pi.plan;
    const double b = (grad.array() * D.array()).sum();  // slope, -b is the FW gap
    const double a = -2.0 * (D.array() * (X.weights.transpose() * (D * Y.weights)).array()).sum();
    double t;
    if (a > 0) {
      t = std::clamp(-b / (2.0 * a), 0.0, 1.0);
    } else {
      // Concave or flat along the segment: a vanishing gap does not rule
      // out second-order descent, so compare the endpoints.
      t = (a + b < 0) ? 1.0 : 0.0;
    }
    const double predicted = (a * t + b) * t;  // phi(t) - phi(0) <= 0
    if (t <= 0.0 || predicted >= -cfg.tol * ref) {
      converged = true;  // stationary within tolerance
      break;
    }
    pi.plan += t * D;
    pi.plan = pi.plan.cwiseMax(0.0);
    const double updated = gw_objective(X, Y, pi);
    const double decrease = energy - updated;
    energy = std::min(energy, updated);
    trace.push_back(energy);
    if (decrease <= cfg.tol * std::max(1.0, std::abs(energy))) {
      converged = true;
      ++it;
      break;
    }
  }
  GwResult out;
  out.coupling = Coupling{pi.plan, p, q};
  out.cost = std::max(energy, 0.0);
  out.converged = converged;
  out.iterations = it;
  out.trace = std::move(trace);
  return out;
}

// Entropic mirror scheme: alternate the objective linearization with a
// Sinkhorn projection until the (unregularized) objective stalls.
inline GwResult entropic_single(const Network& X, const Network& Y,
                                const GwSolverConfig& cfg, Matrix plan) {
  const Vector& p = X.masses;
  const Vector& q = Y.masses;
  Coupling pi{plan, p, q};
  double energy = gw_objective(X, Y, pi);
  double best_energy = energy;
  Matrix best_plan = pi.plan;
  double epsilon = cfg.epsilon;
  bool converged = false;
  std::vector<double> trace{energy};
  Vector f = Vector::Zero(p.size()), g = Vector::Zero(q.size());
  int it = 0;
  for (; it < cfg.max_iter; ++it) {
    const Matrix cost = gw_objective_gradient(X, Y, pi);  // linearized cost
    if (epsilon <= 0) epsilon = 5e-3 * std::max(cost.cwiseAbs().maxCoeff(), 1e-12);
    // Warm-started potentials: the linearized cost drifts slowly across
    // outer iterations, so the previous duals are a good starting guess.
    const LinOtResult step =
        sinkhorn(cost, p, q, epsilon, 500, 1e-10, true, &f, &g);
    f = step.dual_row;
    g = step.dual_col;
    pi.plan = step.plan.plan;
    const double updated = gw_objective(X, Y, pi);
    if (updated < best_energy) {
      best_energy = updated;
      best_plan = pi.plan;
    }
    trace.push_back(updated);
    const double change = std::abs(energy - updated);
    energy = updated;
    if (change <= cfg.tol * std::max(1.0, std::abs(energy))) {
      converged = true;
      ++it;
      break;
    }
  }
  GwResult out;
  out.coupling = Coupling{best_plan, p, q};
  out.cost = std::max(best_energy, 0.0);
  out.converged = converged;
  out.iterations = it;
  out.trace = std::move(trace);
  return out;
}

// Entropic annealing: a short epsilon-scaling sweep from the product
// coupling. Used as one of the restart initializations of the
// conditional-gradient solver; deterministic, no randomness involved.
inline Matrix annealed_plan(const Network& X, const Network& Y,
                            const GwSolverConfig& base) {
  Coupling pi{X.masses * Y.masses.transpose(), X.masses, Y.masses};
  const double scale = gw_objective_gradient(X, Y, pi).cwiseAbs().maxCoeff();
  if (scale <= 0) return pi.plan;
  for (const double factor : {1e-1, 3e-2, 1e-2, 3e-3, 1e-3}) {
    GwSolverConfig cfg = base;
    cfg.epsilon = factor * scale;
    cfg.max_iter = 30;
    cfg.tol = std::max(base.tol, 1e-7);
    const GwResult r = entropic_single(X, Y, cfg, pi.plan);
    pi.plan = r.coupling.plan;
  }
  return pi.plan;
}

inline GwResult run_with_restarts(const Network& X, const Network& Y,
                                  const GwSolverConfig& cfg, bool entropic) {
  const int restarts = std::max(1, cfg.restarts);
  std::vector<Matrix> inits(restarts);
  for (int r = 0; r < restarts; ++r) {
    if (r == 1 && !entropic)
      inits[r] = annealed_plan(X, Y, cfg);
    else
      inits[r] = initial_plan(X, Y, cfg, r);
  }
  std::vector<GwResult> results(restarts);
  parallel_for(static_cast<std::size_t>(restarts), cfg.threads, [&](std::size_t r) {
    results[r] = entropic ? entropic_single(X, Y, cfg, inits[r])
                          : frank_wolfe_single(X, Y, cfg, inits[r]);
  });
  int best = 0;
  for (int r = 1; r < restarts; ++r)
    if (results[r].cost < results[best].cost) best = r;
  return results[best];
}

}  // namespace detail

inline GwResult gw_frank_wolfe(const Network& X, const Network& Y,
                               const GwSolverConfig& cfg = {}) {
  return detail::run_with_restarts(X, Y, cfg, false);
}

inline GwResult gw_entropic(const Network& X, const Network& Y,
                            const GwSolverConfig& cfg = {}) {
  return detail::run_with_restarts(X, Y, cfg, true);
}

namespace detail {

// Projection onto the affine set {Z : Z 1 = p, Z^T 1 = q}; the correction
// lies in the span of the constraint normals.
inline Matrix project_marginal_affine(const Matrix& Z, const Vector& p, const Vector& q) {
  const Index n = Z.rows(), m = Z.cols();
  const Vector r = p - Z.rowwise().sum();
  const Vector c = q - Z.colwise().sum().transpose();
  const Vector u = r / static_cast<double>(m);
  const Vector v = (c.array() - r.sum() / static_cast<double>(m)).matrix() /
                   static_cast<double>(n);
  return Z + u * Vector::Ones(m).transpose() + Vector::Ones(n) * v.transpose();
}

// Dykstra alternation between the marginal affine set and the nonnegative
// orthant; converges to the Euclidean projection onto their intersection.
// The correction increment is carried on the orthant only: projections onto
// affine sets need none.
inline Matrix project_transport_polytope(Matrix Z, const Vector& p, const Vector& q,
                                         int max_iter = 2000, double tol = 1e-14) {
  Matrix x = std::move(Z);
  Matrix inc = Matrix::Zero(x.rows(), x.cols());
  for (int it = 0; it < max_iter; ++it) {
    const Matrix y = project_marginal_affine(x, p, q);
    x = (y + inc).cwiseMax(0.0);
    inc = y + inc - x;
    const double row_err = (x.rowwise().sum() - p).cwiseAbs().maxCoeff();
    const double col_err = (x.colwise().sum().transpose() - q).cwiseAbs().maxCoeff();
    if (std::max(row_err, col_err) <= tol && (x - y).cwiseAbs().maxCoeff() <= tol)
      break;
  }
  return x;
}

inline double brute_energy(const Network& X, const Network& Y, const Matrix& plan) {
  Coupling pi{plan, X.masses, Y.masses};
  return gw_objective(X, Y, pi);
}

}  // namespace detail

// Global search for tiny instances (N*M <= 9, so at most four free plan
// entries). Scans a grid over the free (N-1)x(M-1) block at resolution 1e-2
// (plus the exact feasibility caps, so vertices are hit), then polishes the
// best 20 candidates by projected gradient descent to 1e-12.
inline GwResult gw_bruteforce(const Network& X, const Network& Y,
                              const GwSolverConfig& cfg = {}) {
  (void)cfg;  // the oracle's grid resolution and refinement depth are fixed
  const Index n = X.size(), m = Y.size();
  if (n * m > 9)
    throw TooLarge("brute-force oracle requires N*M <= 9, got " +
                   std::to_string(n * m));
  const Vector& p = X.masses;
  const Vector& q = Y.masses;
  const double grid_step = 1e-2;
  const int keep = 20;

  // (value, free-block) candidates, worst-first so the top stays at [0].
  std::vector<std::pair<double, Matrix>> best;
  long evaluated = 0;

  Matrix plan = Matrix::Zero(n, m);
  Vector rowrem = p, colrem = q;

  auto consider = [&](const Matrix& candidate) {
    const double value = detail::brute_energy(X, Y, candidate);
    ++evaluated;
    if (static_cast<int>(best.size()) < keep) {
      best.emplace_back(value, candidate);
      std::push_heap(best.begin(), best.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
    } else if (value < best.front().first) {
      std::pop_heap(best.begin(), best.end(),
                    [](const auto& a, const auto& b) { return a.first < b.first; });
      best.back() = {value, candidate};
      std::push_heap(best.begin(), best.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
    }
  };

  // Recursive scan over free cells in row-major order; the last column and
  // last row are determined by the marginals.
  auto scan = [&](auto&& self, Index i, Index j) -> void {
    if (i >= n - 1 || m == 1) {
      // Fill determined entries: last column for free rows, full last row.
      Matrix candidate = plan;
      bool ok = true;
      for (Index r = 0; r + 1 < n; ++r) candidate(r, m - 1) = rowrem[r];
      for (Index c = 0; c < m; ++c) {
        double rest = q[c];
        for (Index r = 0; r + 1 < n; ++r) rest -= candidate(r, c);
        if (rest < -1e-12) { ok = false; break; }
        candidate(n - 1, c) = std::max(rest, 0.0);
      }
      if (ok) consider(candidate);
      return;
    }
    const double cap = std::min(rowrem[i], colrem[j]);
    const Index next_i = (j + 2 < m) ? i : i + 1;
    const Index next_j = (j + 2 < m) ? j + 1 : 0;
    double value = 0.0;
    bool at_cap = cap <= 0.0;
    while (true) {
      plan(i, j) = value;
      rowrem[i] -= value;
      colrem[j] -= value;
      self(self, next_i, next_j);
      rowrem[i] += value;
      colrem[j] += value;
      if (at_cap) break;
      value += grid_step;
      if (value >= cap) {
        value = cap;
        at_cap = true;
      }
    }
    plan(i, j) = 0.0;
  };
  scan(scan, 0, 0);

  if (best.empty()) throw EmptySupport("grid search produced no feasible plan");

  // Projected-gradient refinement of the retained candidates, with a
  // Barzilai-Borwein step (safeguarded by the Lipschitz step, which always
  // descends) so flat valleys are crossed quickly. Convergence is measured
  // by the projected-gradient residual at the reference step.
  const double lipschitz =
      4.0 * std::max(X.weights.norm() * Y.weights.norm(), 1e-12);
  const double eta0 = 1.0 / lipschitz;
  Matrix champion;
  double champion_value = std::numeric_limits<double>::infinity();
  for (auto& [value, candidate] : best) {
    Matrix cur = candidate;
    double cur_value = value;
    Matrix prev = cur, prev_grad;
    double step = eta0;
    for (int it = 0; it < 5000; ++it) {
      const Matrix grad = gw_objective_gradient(X, Y, Coupling{cur, p, q});
      const Matrix residual =
          detail::project_transport_polytope(cur - eta0 * grad, p, q) - cur;
      if (residual.cwiseAbs().maxCoeff() <= 1e-12) break;
      if (it > 0) {
        const Matrix dx = cur - prev;
        const Matrix dg = grad - prev_grad;
        const double num = (dx.array() * dx.array()).sum();
        const double den = (dx.array() * dg.array()).sum();
        step = (den > 1e-300) ? num / den : eta0;
        step = std::clamp(step, eta0, 1e4 * eta0);
      }
      prev = cur;
      prev_grad = grad;
      auto feasibility = [&](const Matrix& m) {
        return std::max(
            (m.rowwise().sum() - p).cwiseAbs().maxCoeff(),
            (m.colwise().sum().transpose() - q).cwiseAbs().maxCoeff());
      };
      Matrix stepped = detail::project_transport_polytope(cur - step * grad, p, q);
      double stepped_value = detail::brute_energy(X, Y, stepped);
      // a long step may land too far for the projection budget, and the
      // objective is meaningless off the polytope; retry with the safe step
      if ((feasibility(stepped) > 1e-9 || stepped_value > cur_value) &&
          step > eta0) {
        stepped = detail::project_transport_polytope(cur - eta0 * grad, p, q);
        stepped_value = detail::brute_energy(X, Y, stepped);
      }
      if (stepped_value <= cur_value && feasibility(stepped) <= 1e-9) {
        cur = std::move(stepped);
        cur_value = stepped_value;
      } else {
        break;  // only projection noise is left
      }
    }
    if (cur_value < champion_value) {
      champion_value = cur_value;
      champion = cur;
    }
  }

  GwResult out;
  out.coupling = validate_coupling(champion, p, q, 1e-8);
  out.cost = std::max(champion_value, 0.0);
  out.converged = true;
  out.iterations = static_cast<int>(std::min<long>(evaluated, INT32_MAX));
  return out;
}

// Dispatch wrapper over the three backends.
inline GwResult gw_distance(const Network& X, const Network& Y,
                            const GwSolverConfig& cfg = {}) {
  switch (cfg.method) {
    case GwMethod::entropic:
      return gw_entropic(X, Y, cfg);
    case GwMethod::brute:
      return gw_bruteforce(X, Y, cfg);
    case GwMethod::frank_wolfe:
    default:
      return gw_frank_wolfe(X, Y, cfg);
  }
}

}  // namespace gwbcm
