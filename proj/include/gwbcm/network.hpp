#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <utility>
#include <vector>

#include "gwbcm/errors.hpp"

namespace gwbcm {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

// A finite measure network: a square weight matrix together with a strictly
// positive probability vector over its nodes.
struct Network {
  Matrix weights;  // M x M edge weights, arbitrary units
  Vector masses;   // length M, every entry > 0, sums to 1
  bool symmetric = false;

  Index size() const { return weights.rows(); }
};

// Validates and normalizes the (weights, masses) pair. Masses whose sum
// deviates from 1 by at most mass_tol are renormalized; larger deviations
// are rejected. Zero or negative mass is rejected outright: downstream
// uniqueness results require fully supported measures.
inline Network validate_network(Matrix weights, Vector masses,
                                double mass_tol = 1e-9) {
  if (weights.rows() != weights.cols())
    throw NonSquare("weight matrix is " + std::to_string(weights.rows()) +
                    "x" + std::to_string(weights.cols()));
  if (masses.size() != weights.rows())
    throw DimensionMismatch("masses length " + std::to_string(masses.size()) +
                            " vs matrix side " + std::to_string(weights.rows()));
  if (masses.size() == 0) throw EmptyVector("network must have at least one node");
  if (!weights.allFinite()) throw NonFiniteEntry("weight matrix");
  if (!masses.allFinite()) throw NonFiniteEntry("mass vector");
  if ((masses.array() <= 0.0).any())
    throw NonPositiveMass("every node must carry strictly positive mass");
  const double sum = masses.sum();
  if (std::abs(sum - 1.0) > mass_tol)
    throw MassSumMismatch("masses sum to " + std::to_string(sum));
  if (sum != 1.0) masses /= sum;
  Network net{std::move(weights), std::move(masses), false};
  net.symmetric = net.weights == net.weights.transpose();
  return net;
}

// A transport plan with its prescribed marginals.
struct Coupling {
  Matrix plan;          // N x M, entrywise nonnegative
  Vector row_marginal;  // length N
  Vector col_marginal;  // length M

  Index rows() const { return plan.rows(); }
  Index cols() const { return plan.cols(); }
};

inline Coupling validate_coupling(Matrix plan, Vector row_marginal,
                                  Vector col_marginal,
                                  double marginal_tol = 1e-9) {
  if (plan.rows() != row_marginal.size() || plan.cols() != col_marginal.size())
    throw DimensionMismatch("plan shape does not match marginal lengths");
  if (!plan.allFinite()) throw NonFiniteEntry("transport plan");
  if ((plan.array() < -marginal_tol).any())
    throw MarginalMismatch("negative plan entry");
  plan = plan.cwiseMax(0.0);
  const double row_err = (plan.rowwise().sum() - row_marginal).cwiseAbs().maxCoeff();
  const double col_err = (plan.colwise().sum().transpose() - col_marginal).cwiseAbs().maxCoeff();
  if (row_err > marginal_tol || col_err > marginal_tol)
    throw MarginalMismatch("marginal violation " +
                           std::to_string(std::max(row_err, col_err)));
  return Coupling{std::move(plan), std::move(row_marginal), std::move(col_marginal)};
}

// Independence coupling p q^T, feasible for any pair of marginals.
inline Coupling product_coupling(const Vector& p, const Vector& q) {
  return Coupling{p * q.transpose(), p, q};
}

// Self-coupling diag(p).
inline Coupling diagonal_coupling(const Vector& p) {
  Matrix plan = Matrix::Zero(p.size(), p.size());
  plan.diagonal() = p;
  return Coupling{std::move(plan), p, p};
}

// Inner product of square matrices weighted entrywise by q (x) q:
// sum_{i,j} A[i,j] B[i,j] q[i] q[j].
inline double weighted_trace(const Matrix& A, const Matrix& B, const Vector& q) {
  if (A.rows() != A.cols() || B.rows() != B.cols() || A.rows() != B.rows() ||
      q.size() != A.rows())
    throw DimensionMismatch("weighted_trace expects equal-size square matrices");
  return (A.array() * B.array() * (q * q.transpose()).array()).sum();
}

namespace detail {

// sum_{ijkl} X[i,k] Y[j,l] pi[i,j] pi[k,l] = <pi, X^T pi Y>_F, in
// O(N^2 M + N M^2) instead of the naive quadruple loop.
inline double gw_cross_term(const Matrix& X, const Matrix& Y, const Matrix& pi) {
  return (pi.array() * (X.transpose() * (pi * Y)).array()).sum();
}

inline void check_gw_dims(const Network& X, const Network& Y, const Coupling& pi) {
  if (pi.rows() != X.size() || pi.cols() != Y.size())
    throw DimensionMismatch("coupling shape does not match the networks");
}

}  // namespace detail

// Squared GW discrepancy of a fixed plan:
//   sum_{ijkl} |X[i,k] - Y[j,l]|^2 pi[i,j] pi[k,l],
// computed through the three-term split
//   sum X^2 p p + sum Y^2 q q - 2 <pi, X^T pi Y>_F,
// which is valid whenever pi has marginals (p, q).
inline double gw_objective(const Network& X, const Network& Y, const Coupling& pi) {
  detail::check_gw_dims(X, Y, pi);
  const double xx = (X.weights.array().square() *
                     (X.masses * X.masses.transpose()).array()).sum();
  const double yy = (Y.weights.array().square() *
                     (Y.masses * Y.masses.transpose()).array()).sum();
  return xx + yy - 2.0 * detail::gw_cross_term(X.weights, Y.weights, pi.plan);
}

// Gradient of the plan-dependent part of the objective,
//   d/dpi [-2 tr(pi^T X^T pi Y)] = -2 (X^T pi Y + X pi Y^T),
// which collapses to -4 X pi Y for symmetric inputs. The discarded terms of
// the three-term split are constant along feasible directions, so this is
// the full objective gradient for any linearization over Pi(p, q).
inline Matrix gw_objective_gradient(const Network& X, const Network& Y,
                                    const Coupling& pi) {
  detail::check_gw_dims(X, Y, pi);
  if (X.symmetric && Y.symmetric)
    return -4.0 * (X.weights * (pi.plan * Y.weights));
  return -2.0 * (X.weights.transpose() * (pi.plan * Y.weights) +
                 X.weights * (pi.plan * Y.weights.transpose()));
}

// Carrier for a solved GW problem. cost stores GW^2; gw() derives the root.
struct GwResult {
  Coupling coupling;
  double cost = 0.0;
  bool converged = false;
  int iterations = 0;
  std::vector<double> trace;  // objective after each accepted iterate

  double gw() const { return std::sqrt(std::max(cost, 0.0)); }
};

}  // namespace gwbcm
