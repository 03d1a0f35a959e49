#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "gwbcm/errors.hpp"
#include "gwbcm/network.hpp"

namespace gwbcm {

struct SimplexWeights {
  Vector lambda;

  Index size() const { return lambda.size(); }
  double operator[](Index s) const { return lambda[s]; }
};

// Clips entries within -1e-12 of zero before checking, per the type contract.
inline SimplexWeights validate_simplex(Vector lambda, double sum_tol = 1e-9) {
  if (lambda.size() == 0) throw EmptyVector("simplex weights");
  if (!lambda.allFinite()) throw NonFiniteEntry("simplex weights");
  for (Index i = 0; i < lambda.size(); ++i) {
    if (lambda[i] < 0.0) {
      if (lambda[i] < -1e-12)
        throw NonPositiveMass("negative simplex coordinate " + std::to_string(lambda[i]));
      lambda[i] = 0.0;
    }
  }
  const double sum = lambda.sum();
  if (std::abs(sum - 1.0) > sum_tol)
    throw MassSumMismatch("simplex coordinates sum to " + std::to_string(sum));
  return SimplexWeights{std::move(lambda)};
}

// Euclidean projection onto the probability simplex (sort and threshold).
inline SimplexWeights project_simplex(const Vector& v) {
  const Index s = v.size();
  if (s == 0) throw EmptyVector("cannot project an empty vector");
  std::vector<double> sorted(v.data(), v.data() + s);
  std::sort(sorted.begin(), sorted.end(), std::greater<double>());
  double cum = 0.0, tau = 0.0;
  for (Index k = 0; k < s; ++k) {
    cum += sorted[k];
    const double t = (cum - 1.0) / static_cast<double>(k + 1);
    if (sorted[k] - t > 0) tau = t;
  }
  Vector out = (v.array() - tau).cwiseMax(0.0);
  out /= out.sum();  // absorb rounding drift
  return SimplexWeights{std::move(out)};
}

enum class QpMethod { projected_gradient, conditional_gradient };

struct QpConfig {
  QpMethod method = QpMethod::projected_gradient;
  double tol = 1e-10;  // KKT residual
  int max_iter = 10000;
};

struct QpResult {
  SimplexWeights lambda;
  double value = 0.0;
  double kkt_residual = 0.0;
  bool converged = false;
  int iterations = 0;
};

namespace detail {

// KKT residual for min x^T G x over the simplex: with g = 2 G x and
// mu = min_{x_s > tol} g_s, optimality requires g_s = mu on the support
// and g_s >= mu elsewhere.
inline double simplex_kkt_residual(const Matrix& G, const Vector& x,
                                   double active_tol = 1e-12) {
  const Vector g = 2.0 * (G * x);
  double mu = std::numeric_limits<double>::infinity();
  for (Index s = 0; s < x.size(); ++s)
    if (x[s] > active_tol) mu = std::min(mu, g[s]);
  double res = 0.0;
  for (Index s = 0; s < x.size(); ++s) {
    if (x[s] > active_tol)
      res = std::max(res, std::abs(g[s] - mu));
    else
      res = std::max(res, std::max(0.0, mu - g[s]));
  }
  return res;
}

// Once projected gradient has identified the active set, the minimizer on
// that face solves an equality-constrained system; taking it when it is
// feasible and KKT-consistent sharpens the answer to solver precision.
inline bool polish_on_support(const Matrix& G, Vector& x, double active_tol) {
  std::vector<Index> support;
  for (Index s = 0; s < x.size(); ++s)
    if (x[s] > active_tol) support.push_back(s);
  const Index k = static_cast<Index>(support.size());
  if (k == 0) return false;
  Matrix kkt = Matrix::Zero(k + 1, k + 1);
  Vector rhs = Vector::Zero(k + 1);
  for (Index a = 0; a < k; ++a) {
    for (Index b = 0; b < k; ++b) kkt(a, b) = 2.0 * G(support[a], support[b]);
    kkt(a, k) = 1.0;
    kkt(k, a) = 1.0;
  }
  rhs[k] = 1.0;
  Eigen::FullPivLU<Matrix> lu(kkt);
  if (!lu.isInvertible()) return false;
  Vector sol = lu.solve(rhs);
  for (Index a = 0; a < k; ++a)
    if (sol[a] < -1e-14) return false;
  Vector candidate = Vector::Zero(x.size());
  for (Index a = 0; a < k; ++a) candidate[support[a]] = std::max(sol[a], 0.0);
  candidate /= candidate.sum();
  if (simplex_kkt_residual(G, candidate) <= simplex_kkt_residual(G, x)) {
    x = candidate;
    return true;
  }
  return false;
}

}  // namespace detail

// Minimizes lambda^T gram lambda over the probability simplex. The default
// backend is projected gradient with a Barzilai-Borwein step (fallback
// 1/(2 ||gram||)) from the uniform start, followed by an active-set polish;
// the conditional-gradient backend trades accuracy for simplicity.
inline QpResult min_quad_simplex(const Matrix& gram, const QpConfig& cfg = {}) {
  const Index s = gram.rows();
  if (s == 0 || gram.cols() != s)
    throw DimensionMismatch("gram matrix must be square and nonempty");
  if ((gram - gram.transpose()).cwiseAbs().maxCoeff() >
      1e-8 * (1.0 + gram.cwiseAbs().maxCoeff()))
    throw DimensionMismatch("gram matrix is not symmetric");
  const Matrix G = 0.5 * (gram + gram.transpose());

  Vector x = Vector::Constant(s, 1.0 / static_cast<double>(s));
  const double gnorm = std::max(G.cwiseAbs().maxCoeff() * s, 1e-300);
  const double base_step = 1.0 / (2.0 * gnorm);

  int used = 0;
  if (cfg.method == QpMethod::conditional_gradient) {
    for (int it = 0; it < cfg.max_iter; ++it) {
      used = it + 1;
      const Vector g = 2.0 * (G * x);
      Index best;
      g.minCoeff(&best);
      Vector d = -x;
      d[best] += 1.0;
      const double dGd = d.dot(G * d);
      const double gd = g.dot(d);
      if (gd >= -cfg.tol) break;
      double gamma = 1.0;
      if (dGd > 0) gamma = std::clamp(-gd / (2.0 * dGd), 0.0, 1.0);
      x += gamma * d;
      if (detail::simplex_kkt_residual(G, x) <= cfg.tol) break;
    }
  } else {
    Vector prev_x = x, prev_g = 2.0 * (G * x);
    double step = base_step;
    for (int it = 0; it < cfg.max_iter; ++it) {
      used = it + 1;
      const Vector g = 2.0 * (G * x);
      if (it > 0) {
        const Vector dx = x - prev_x;
        const Vector dg = g - prev_g;
        const double num = dx.dot(dx);
        const double den = dx.dot(dg);
        step = (den > 1e-300) ? num / den : base_step;
        step = std::clamp(step, 1e-6 * base_step, 1e12 * base_step);
      }
      prev_x = x;
      prev_g = g;
      x = project_simplex(x - step * g).lambda;
      if (detail::simplex_kkt_residual(G, x) <= cfg.tol) break;
      if ((x - prev_x).cwiseAbs().maxCoeff() == 0.0 && it > 2) break;
    }
    detail::polish_on_support(G, x, 1e-12);
  }

  const double kkt = detail::simplex_kkt_residual(G, x);
  QpResult out;
  out.lambda = SimplexWeights{x};
  out.value = x.dot(G * x);
  out.kkt_residual = kkt;
  out.converged = kkt <= cfg.tol;
  out.iterations = used;
  return out;
}

struct LinearSimplexResult {
  SimplexWeights lambda;
  double residual = 0.0;  // ||K lambda - rhs||
  bool in_simplex = false;  // residual <= 1e-8: a true solution exists in the simplex
  bool unique = true;       // false when K is rank-deficient
  double kkt_residual = 0.0;
};

// Solves K lambda = rhs constrained to the simplex, as the least-squares
// problem min ||K lambda - rhs||^2. On the simplex this equals
// lambda^T M^T M lambda with M = K - rhs 1^T, a Gram form handled by
// min_quad_simplex.
inline LinearSimplexResult solve_linear_simplex(const Matrix& K, const Vector& rhs,
                                                const QpConfig& cfg = {}) {
  if (K.rows() != rhs.size())
    throw DimensionMismatch("rhs length does not match K");
  const Matrix M = K - rhs * Vector::Ones(K.cols()).transpose();
  QpResult qp = min_quad_simplex(M.transpose() * M, cfg);
  LinearSimplexResult out;
  out.lambda = qp.lambda;
  out.residual = std::sqrt(std::max(qp.value, 0.0));
  out.in_simplex = out.residual <= 1e-8;
  out.kkt_residual = qp.kkt_residual;
  Eigen::FullPivLU<Matrix> lu(K);
  lu.setThreshold(1e-10);
  out.unique = lu.rank() == K.cols();
  return out;
}

}  // namespace gwbcm
