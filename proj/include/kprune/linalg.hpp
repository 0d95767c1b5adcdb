// SPDX-License-Identifier: Apache-2.0
//
// Dense kernels sized for trajectory data: N parameters by a few hundred
// snapshots at most, with N much larger than the snapshot count.

#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "kprune/error.hpp"

namespace kprune {

using cdouble = std::complex<double>;

/// Real matrix with finite entries. Storage is column-major.
class DenseMatrix {
 public:
  DenseMatrix() = default;
  DenseMatrix(std::size_t rows, std::size_t cols);
  DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> column_major);
  explicit DenseMatrix(Eigen::MatrixXd m);

  std::size_t rows() const noexcept { return static_cast<std::size_t>(m_.rows()); }
  std::size_t cols() const noexcept { return static_cast<std::size_t>(m_.cols()); }
  double operator()(std::size_t r, std::size_t c) const {
    return m_(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
  }
  std::span<const double> column(std::size_t c) const {
    return {m_.data() + c * rows(), rows()};
  }
  std::span<const double> data() const noexcept {
    return {m_.data(), static_cast<std::size_t>(m_.size())};
  }

  const Eigen::MatrixXd& eigen() const noexcept { return m_; }
  double frobenius_norm() const { return m_.norm(); }

 private:
  Eigen::MatrixXd m_;
};

/// Complex matrix with finite entries.
class ComplexMatrix {
 public:
  ComplexMatrix() = default;
  explicit ComplexMatrix(Eigen::MatrixXcd m);

  std::size_t rows() const noexcept { return static_cast<std::size_t>(m_.rows()); }
  std::size_t cols() const noexcept { return static_cast<std::size_t>(m_.cols()); }
  cdouble operator()(std::size_t r, std::size_t c) const {
    return m_(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
  }
  const Eigen::MatrixXcd& eigen() const noexcept { return m_; }

 private:
  Eigen::MatrixXcd m_;
};

/// Reduced SVD X = Q diag(sigma) V^T keeping r singular values.
struct SvdResult {
  DenseMatrix Q;              // N x r, orthonormal columns
  std::vector<double> sigma;  // length r, positive, nonincreasing
  DenseMatrix V;              // tau x r, orthonormal columns
  std::size_t rank = 0;
};

struct EigResult {
  std::vector<cdouble> eigenvalues;
  ComplexMatrix eigenvectors;  // one eigenvector per column, unit 2-norm
};

inline constexpr double kDefaultSvFloor = 1e-10;
inline constexpr std::size_t kDefaultEigMaxSide = 1024;

/// Reduced SVD by the method of snapshots. Wide inputs are decomposed
/// through their transpose.
///
/// The tau x tau Gram matrix X^T X is diagonalized with a symmetric solver
/// (negative round-off eigenvalues clamped to zero), the left vectors
/// X v / |X v| are re-orthonormalized, and the small projected matrix Q^T X
/// is decomposed once more so that singular values below sqrt(eps) * sigma_1
/// are resolved accurately. Every step costs O(N tau^2 + tau^3); no N x N
/// object is formed. Singular values below sv_floor * sigma_1 are dropped.
///
/// Throws Error{ZeroMatrix} for a zero input and Error{NumericalFailure} if
/// the eigensolve fails.
SvdResult reduced_svd(const DenseMatrix& X, double sv_floor = kDefaultSvFloor);

/// All eigenpairs of a real square matrix, unsorted.
EigResult eig_dense(const DenseMatrix& A, std::size_t max_side = kDefaultEigMaxSide);

/// Moore-Penrose pseudoinverse V Sigma^-1 Q^T from the truncated reduced SVD.
/// Wide inputs are handled through the transpose.
DenseMatrix pseudoinverse(const DenseMatrix& X, double sv_floor = kDefaultSvFloor);

/// argmin_x |A x - b|_2 for a full-column-rank complex A.
/// Throws Error{RankDeficient} when a column-pivoted QR finds
/// rank < cols at relative tolerance sv_floor.
Eigen::VectorXcd least_squares_solve(const ComplexMatrix& A, const Eigen::VectorXcd& b,
                                     double sv_floor = kDefaultSvFloor);

/// max |M_ij| of M.
double max_abs(const Eigen::MatrixXd& m);

}  // namespace kprune
