// SPDX-License-Identifier: Apache-2.0

#include "kprune/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace kprune {

namespace {

bool all_finite(const Eigen::MatrixXd& m) { return m.allFinite(); }

bool all_finite(const Eigen::MatrixXcd& m) {
  return m.real().allFinite() && m.imag().allFinite();
}

std::string shape(Eigen::Index r, Eigen::Index c) {
  return std::to_string(r) + "x" + std::to_string(c);
}

}  // namespace

const char* errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::ZeroMatrix: return "ZeroMatrix";
    case Errc::NumericalFailure: return "NumericalFailure";
    case Errc::NotSquare: return "NotSquare";
    case Errc::RankDeficient: return "RankDeficient";
    case Errc::ShapeMismatch: return "ShapeMismatch";
    case Errc::NonFinite: return "NonFinite";
    case Errc::TooFewSnapshots: return "TooFewSnapshots";
    case Errc::NoUnitEigenvalue: return "NoUnitEigenvalue";
    case Errc::NoDecayingModes: return "NoDecayingModes";
    case Errc::LengthMismatch: return "LengthMismatch";
    case Errc::UnequalCompression: return "UnequalCompression";
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::Io: return "Io";
    case Errc::Config: return "Config";
  }
  return "Unknown";
}

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols)
    : m_(Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols))) {}

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> column_major) {
  if (rows * cols != column_major.size()) {
    throw Error(Errc::ShapeMismatch, "entry count " + std::to_string(column_major.size()) +
                                         " does not match " + shape(rows, cols));
  }
  m_ = Eigen::Map<const Eigen::MatrixXd>(column_major.data(), static_cast<Eigen::Index>(rows),
                                         static_cast<Eigen::Index>(cols));
  if (!all_finite(m_)) throw Error(Errc::NonFinite, "matrix entries must be finite");
}

DenseMatrix::DenseMatrix(Eigen::MatrixXd m) : m_(std::move(m)) {
  if (!all_finite(m_)) throw Error(Errc::NonFinite, "matrix entries must be finite");
}

ComplexMatrix::ComplexMatrix(Eigen::MatrixXcd m) : m_(std::move(m)) {
  if (!all_finite(m_)) throw Error(Errc::NonFinite, "matrix entries must be finite");
}

double max_abs(const Eigen::MatrixXd& m) { return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff(); }

SvdResult reduced_svd(const DenseMatrix& X, double sv_floor) {
  const Eigen::MatrixXd& x = X.eigen();
  if (x.cols() > x.rows()) {
    // X^T = Q S V^T  =>  X = V S Q^T
    SvdResult t = reduced_svd(DenseMatrix(Eigen::MatrixXd(x.transpose())), sv_floor);
    std::swap(t.Q, t.V);
    return t;
  }
  if (x.size() == 0 || x.norm() == 0.0) {
    throw Error(Errc::ZeroMatrix, "reduced_svd of a zero matrix");
  }

  // Method of snapshots: eigenvectors of the small Gram matrix.
  const Eigen::MatrixXd gram = x.transpose() * x;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> gram_eig(gram);
  if (gram_eig.info() != Eigen::Success) {
    throw Error(Errc::NumericalFailure, "Gram eigensolve did not converge");
  }
  const Eigen::MatrixXd xv = x * gram_eig.eigenvectors();

  // Left vectors X v_i / |X v_i| in order of decreasing Gram eigenvalue,
  // orthonormalized with two passes of modified Gram-Schmidt.
  const Eigen::Index n = x.rows();
  const Eigen::Index tau = x.cols();
  Eigen::MatrixXd basis(n, tau);
  Eigen::Index kept = 0;
  for (Eigen::Index i = tau - 1; i >= 0; --i) {
    if (std::max(gram_eig.eigenvalues()(i), 0.0) == 0.0) continue;
    Eigen::VectorXd q = xv.col(i);
    const double norm0 = q.norm();
    if (norm0 == 0.0) continue;
    q /= norm0;
    for (int pass = 0; pass < 2; ++pass) {
      for (Eigen::Index j = 0; j < kept; ++j) q -= basis.col(j).dot(q) * basis.col(j);
    }
    const double rest = q.norm();
    if (rest < 1e-10) continue;
    basis.col(kept++) = q / rest;
  }
  if (kept == 0) throw Error(Errc::ZeroMatrix, "reduced_svd found no nonzero direction");
  basis.conservativeResize(n, kept);

  // Refinement on the kept x tau projection recovers singular values that
  // the squared Gram spectrum cannot resolve.
  const Eigen::MatrixXd projected = basis.transpose() * x;
  Eigen::JacobiSVD<Eigen::MatrixXd> small(projected, Eigen::ComputeThinU | Eigen::ComputeThinV);
  if (small.info() != Eigen::Success) {
    throw Error(Errc::NumericalFailure, "projected SVD did not converge");
  }
  const Eigen::VectorXd& s = small.singularValues();
  const double cutoff = sv_floor * s(0);
  Eigen::Index r = 0;
  while (r < s.size() && s(r) > 0.0 && s(r) >= cutoff) ++r;
  if (r == 0) throw Error(Errc::ZeroMatrix, "reduced_svd found no singular value above floor");

  SvdResult out;
  out.Q = DenseMatrix(Eigen::MatrixXd(basis * small.matrixU().leftCols(r)));
  out.V = DenseMatrix(Eigen::MatrixXd(small.matrixV().leftCols(r)));
  out.sigma.assign(s.data(), s.data() + r);
  out.rank = static_cast<std::size_t>(r);
  return out;
}

EigResult eig_dense(const DenseMatrix& A, std::size_t max_side) {
  const Eigen::MatrixXd& a = A.eigen();
  if (a.rows() != a.cols()) {
    throw Error(Errc::NotSquare, "eig_dense of " + shape(a.rows(), a.cols()));
  }
  if (A.rows() > max_side) {
    throw Error(Errc::InvalidArgument, "eig_dense side " + std::to_string(A.rows()) +
                                           " exceeds limit " + std::to_string(max_side));
  }
  EigResult out;
  if (a.rows() == 0) {
    out.eigenvectors = ComplexMatrix(Eigen::MatrixXcd(0, 0));
    return out;
  }
  Eigen::EigenSolver<Eigen::MatrixXd> solver(a, true);
  if (solver.info() != Eigen::Success) {
    throw Error(Errc::NumericalFailure, "eigensolver did not converge");
  }
  Eigen::MatrixXcd vectors = solver.eigenvectors();
  for (Eigen::Index j = 0; j < vectors.cols(); ++j) {
    const double norm = vectors.col(j).norm();
    if (norm > 0.0) vectors.col(j) /= norm;
  }
  const Eigen::VectorXcd values = solver.eigenvalues();
  out.eigenvalues.assign(values.data(), values.data() + values.size());
  out.eigenvectors = ComplexMatrix(std::move(vectors));
  return out;
}

DenseMatrix pseudoinverse(const DenseMatrix& X, double sv_floor) {
  if (X.cols() > X.rows()) {
    const DenseMatrix xt(Eigen::MatrixXd(X.eigen().transpose()));
    return DenseMatrix(Eigen::MatrixXd(pseudoinverse(xt, sv_floor).eigen().transpose()));
  }
  const SvdResult svd = reduced_svd(X, sv_floor);
  const Eigen::Map<const Eigen::VectorXd> sigma(svd.sigma.data(),
                                                static_cast<Eigen::Index>(svd.sigma.size()));
  Eigen::MatrixXd pinv = svd.V.eigen() * sigma.cwiseInverse().asDiagonal() *
                         svd.Q.eigen().transpose();
  return DenseMatrix(std::move(pinv));
}

Eigen::VectorXcd least_squares_solve(const ComplexMatrix& A, const Eigen::VectorXcd& b,
                                     double sv_floor) {
  const Eigen::MatrixXcd& a = A.eigen();
  if (a.rows() != b.size()) {
    throw Error(Errc::ShapeMismatch, "least_squares_solve: A is " + shape(a.rows(), a.cols()) +
                                         " but b has length " + std::to_string(b.size()));
  }
  if (a.cols() == 0) return Eigen::VectorXcd(0);
  if (a.rows() < a.cols()) {
    throw Error(Errc::RankDeficient, "least_squares_solve: more unknowns than equations");
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXcd> qr(a.rows(), a.cols());
  qr.setThreshold(sv_floor);
  qr.compute(a);
  if (qr.rank() < a.cols()) {
    throw Error(Errc::RankDeficient, "least_squares_solve: numerical rank " +
                                         std::to_string(qr.rank()) + " < " +
                                         std::to_string(a.cols()) + " columns");
  }
  return qr.solve(b);
}

}  // namespace kprune
