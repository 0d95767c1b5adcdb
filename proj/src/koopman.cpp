// SPDX-License-Identifier: Apache-2.0

#include "kprune/koopman.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace kprune {

namespace {

cdouble power(cdouble lambda, double t) {
  if (t == 0.0) return {1.0, 0.0};
  const double r = std::abs(lambda);
  if (r == 0.0) return {0.0, 0.0};
  return std::polar(std::pow(r, t), t * std::arg(lambda));
}

}  // namespace

SnapshotMatrix::SnapshotMatrix(DenseMatrix d, Provenance provenance)
    : d_(std::move(d)), provenance_(provenance) {
  if (d_.cols() < 3) {
    throw Error(Errc::TooFewSnapshots,
                "need tau >= 2 (at least 3 snapshots), got " + std::to_string(d_.cols()));
  }
}

std::pair<DenseMatrix, DenseMatrix> build_xy(const SnapshotMatrix& d) {
  const Eigen::MatrixXd& m = d.data().eigen();
  const Eigen::Index tau = m.cols() - 1;
  return {DenseMatrix(Eigen::MatrixXd(m.leftCols(tau))),
          DenseMatrix(Eigen::MatrixXd(m.rightCols(tau)))};
}

Eigen::VectorXcd fit_amplitudes(const ComplexMatrix& modes, const Eigen::VectorXd& theta0,
                                double sv_floor) {
  return least_squares_solve(modes, theta0.cast<cdouble>(), sv_floor);
}

KoopmanDecomposition exact_dmd(const DenseMatrix& X, const DenseMatrix& Y,
                               const DmdOptions& options) {
  if (X.rows() != Y.rows() || X.cols() != Y.cols()) {
    throw Error(Errc::ShapeMismatch, "X and Y must have the same shape");
  }
  const SvdResult svd = reduced_svd(X, options.sv_floor);
  const Eigen::MatrixXd& q = svd.Q.eigen();
  const Eigen::MatrixXd& v = svd.V.eigen();
  const Eigen::Map<const Eigen::VectorXd> sigma(svd.sigma.data(),
                                                static_cast<Eigen::Index>(svd.sigma.size()));
  const Eigen::MatrixXd& y = Y.eigen();

  // Y V Sigma^-1 (N x r) and the reduced operator Q^T Y V Sigma^-1 (r x r).
  const Eigen::MatrixXd yv = y * v;
  const Eigen::MatrixXd yvs = yv * sigma.cwiseInverse().asDiagonal();
  const Eigen::MatrixXd reduced = q.transpose() * yvs;
  const EigResult eig = eig_dense(DenseMatrix(reduced));

  const auto r = static_cast<Eigen::Index>(svd.rank);
  const Eigen::MatrixXcd& w = eig.eigenvectors.eigen();
  Eigen::MatrixXcd modes(q.rows(), r);
  const Eigen::MatrixXcd exact = yvs.cast<cdouble>() * w;
  const Eigen::MatrixXcd projected = q.cast<cdouble>() * w;
  for (Eigen::Index i = 0; i < r; ++i) {
    const cdouble lambda = eig.eigenvalues[static_cast<std::size_t>(i)];
    const bool use_projected =
        options.modes == ModeKind::Projected || std::abs(lambda) <= options.zero_lambda;
    Eigen::VectorXcd mode = use_projected ? Eigen::VectorXcd(projected.col(i))
                                          : Eigen::VectorXcd(exact.col(i) / lambda);
    const double norm = mode.norm();
    if (norm == 0.0 || !std::isfinite(norm)) {
      throw Error(Errc::NumericalFailure, "degenerate DMD mode");
    }
    modes.col(i) = mode / norm;
  }

  const Eigen::VectorXd theta0 = X.eigen().col(0);
  const Eigen::VectorXcd phi = fit_amplitudes(ComplexMatrix(modes), theta0, options.sv_floor);

  KoopmanDecomposition out;
  out.rank = svd.rank;
  const double y_norm = y.norm();
  out.consistency_residual =
      y_norm > 0.0 ? (y - yv * v.transpose()).norm() / y_norm : 0.0;

  std::vector<std::size_t> order(static_cast<std::size_t>(r));
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const cdouble la = eig.eigenvalues[a];
    const cdouble lb = eig.eigenvalues[b];
    if (la.real() != lb.real()) return la.real() > lb.real();
    return la.imag() > lb.imag();
  });

  Eigen::VectorXcd sum = Eigen::VectorXcd::Zero(q.rows());
  out.triplets.reserve(order.size());
  for (std::size_t i : order) {
    const auto col = static_cast<Eigen::Index>(i);
    KoopmanTriplet t;
    t.lambda = eig.eigenvalues[i];
    t.amplitude = phi(col);
    t.mode = modes.col(col);
    t.scaled_mode = t.amplitude * t.mode;
    t.norm = t.scaled_mode.norm();
    sum += t.scaled_mode;
    out.triplets.push_back(std::move(t));
  }
  out.amplitude_residual = (theta0.cast<cdouble>() - sum).norm();
  return out;
}

KoopmanDecomposition decompose(const SnapshotMatrix& d, const DmdOptions& options) {
  const auto [x, y] = build_xy(d);
  return exact_dmd(x, y, options);
}

FixedPoint predicted_fixed_point(const KoopmanDecomposition& decomp, double lambda_tol) {
  Eigen::VectorXcd sum = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(decomp.dim()));
  FixedPoint fp;
  for (const KoopmanTriplet& t : decomp.triplets) {
    if (std::abs(t.lambda - 1.0) <= lambda_tol) {
      sum += t.scaled_mode;
      ++fp.modes_used;
    }
  }
  if (fp.modes_used == 0) {
    throw Error(Errc::NoUnitEigenvalue, "no eigenvalue within " + std::to_string(lambda_tol) +
                                            " of 1; trajectory is not near a fixed point");
  }
  fp.theta = sum.real();
  fp.discarded_imag = sum.size() ? sum.imag().cwiseAbs().maxCoeff() : 0.0;
  return fp;
}

bool is_decaying_candidate(const KoopmanTriplet& t, double lambda_tol) {
  return std::abs(t.lambda.imag()) <= lambda_tol && t.lambda.real() > 0.0 &&
         std::abs(t.lambda - 1.0) > lambda_tol;
}

std::vector<KoopmanTriplet> decaying_modes(const KoopmanDecomposition& decomp, double norm_floor,
                                           double lambda_tol) {
  std::vector<KoopmanTriplet> out;
  double largest = 0.0;
  for (const KoopmanTriplet& t : decomp.triplets) {
    if (is_decaying_candidate(t, lambda_tol)) largest = std::max(largest, t.norm);
  }
  if (largest == 0.0) return out;
  for (const KoopmanTriplet& t : decomp.triplets) {
    if (is_decaying_candidate(t, lambda_tol) && t.norm >= norm_floor * largest) out.push_back(t);
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const KoopmanTriplet& a, const KoopmanTriplet& b) { return a.norm > b.norm; });
  return out;
}

Eigen::VectorXcd evolve(const KoopmanDecomposition& decomp, double t) {
  Eigen::VectorXcd sum = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(decomp.dim()));
  for (const KoopmanTriplet& tr : decomp.triplets) sum += power(tr.lambda, t) * tr.scaled_mode;
  return sum;
}

Eigen::VectorXd extrapolate(const KoopmanDecomposition& decomp, double t) {
  return evolve(decomp, t).real();
}

}  // namespace kprune
