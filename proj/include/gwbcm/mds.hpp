#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <vector>

#include "gwbcm/errors.hpp"
#include "gwbcm/network.hpp"

namespace gwbcm {

struct Embedding {
  Matrix points;       // M x d, column means zero
  Vector eigenvalues;  // retained spectrum, nonincreasing
  double strain = 0.0; // relative residual of the discarded/negative spectrum
};

// Classical multidimensional scaling. The input is treated as a distance
// matrix: the diagonal is zeroed before squaring (barycenter matrices carry
// nonzero self-weights, which are meaningless as self-distances), the squared
// matrix is double-centered, and the top-d nonnegative eigenpairs give the
// coordinates. Negative eigenvalues are clipped to zero and, together with
// the discarded tail, counted in the strain. Each eigenvector's sign is fixed
// by making its first nonzero coordinate positive.
inline Embedding classical_mds(const Matrix& D, Index dim) {
  if (D.rows() != D.cols()) throw DimensionMismatch("distance matrix must be square");
  if (dim < 1) throw EmptyVector("embedding dimension must be at least 1");
  const Index m = D.rows();
  dim = std::min(dim, m);

  Matrix sq = D;
  sq.diagonal().setZero();
  sq = sq.array().square().matrix();
  // Symmetrize so the eigensolver sees an exactly self-adjoint operator.
  sq = 0.5 * (sq + sq.transpose());

  const Matrix centering = Matrix::Identity(m, m) -
                           Matrix::Constant(m, m, 1.0 / static_cast<double>(m));
  const Matrix b = -0.5 * centering * sq * centering;

  Eigen::SelfAdjointEigenSolver<Matrix> eig(b);
  if (eig.info() != Eigen::Success)
    throw NotConverged("eigendecomposition failed in classical MDS");

  // SelfAdjointEigenSolver sorts ascending; walk from the top.
  std::vector<Index> order(m);
  for (Index i = 0; i < m; ++i) order[i] = m - 1 - i;

  double total = 0.0, residual = 0.0;
  for (Index i = 0; i < m; ++i) total += eig.eigenvalues()[i] * eig.eigenvalues()[i];

  Embedding out;
  out.points = Matrix::Zero(m, dim);
  out.eigenvalues = Vector::Zero(dim);
  for (Index k = 0; k < m; ++k) {
    const double value = eig.eigenvalues()[order[k]];
    if (k < dim && value > 0) {
      out.eigenvalues[k] = value;
      Vector axis = eig.eigenvectors().col(order[k]);
      for (Index i = 0; i < m; ++i) {
        if (axis[i] != 0.0) {
          if (axis[i] < 0.0) axis = -axis;
          break;
        }
      }
      out.points.col(k) = std::sqrt(value) * axis;
    } else {
      residual += value * value;
    }
  }
  out.strain = total > 0 ? std::sqrt(residual / total) : 0.0;
  // Center exactly: the double-centering already guarantees this up to
  // rounding, and downstream checks expect zero column means.
  out.points.rowwise() -= out.points.colwise().mean();
  return out;
}

// Pairwise Euclidean distances of an embedding/point matrix (M x d).
inline Matrix pairwise_distances(const Matrix& points) {
  const Index m = points.rows();
  Matrix d = Matrix::Zero(m, m);
  for (Index i = 0; i < m; ++i)
    for (Index j = i + 1; j < m; ++j) {
      d(i, j) = (points.row(i) - points.row(j)).norm();
      d(j, i) = d(i, j);
    }
  return d;
}

// RMS misfit after the best rigid alignment (rotation/reflection plus
// translation) of `fitted` onto `target`; used to validate embeddings
// against planted configurations.
inline double procrustes_rms(const Matrix& target, const Matrix& fitted) {
  if (target.rows() != fitted.rows())
    throw DimensionMismatch("point counts differ");
  const Index m = target.rows();
  const Index d = std::max(target.cols(), fitted.cols());
  Matrix a = Matrix::Zero(m, d), b = Matrix::Zero(m, d);
  a.leftCols(target.cols()) = target;
  b.leftCols(fitted.cols()) = fitted;
  a.rowwise() -= a.colwise().mean();
  b.rowwise() -= b.colwise().mean();
  Eigen::JacobiSVD<Matrix> svd(b.transpose() * a,
                               Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Matrix rot = svd.matrixU() * svd.matrixV().transpose();
  return std::sqrt((b * rot - a).squaredNorm() / static_cast<double>(m));
}

}  // namespace gwbcm
