// SPDX-License-Identifier: Apache-2.0
//
// Koopman mode decomposition of a parameter trajectory by Exact DMD, using
// the identity observable g(theta) = theta.

#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "kprune/linalg.hpp"

namespace kprune {

struct Provenance {
  std::size_t epoch = 0;
  std::uint64_t seed = 0;
  std::uint64_t spec_hash = 0;
};

/// D = [theta(0), ..., theta(tau)] with tau >= 2.
class SnapshotMatrix {
 public:
  SnapshotMatrix(DenseMatrix d, Provenance provenance = {});

  const DenseMatrix& data() const noexcept { return d_; }
  const Provenance& provenance() const noexcept { return provenance_; }
  std::size_t dim() const noexcept { return d_.rows(); }
  std::size_t iterations() const noexcept { return d_.cols() - 1; }

 private:
  DenseMatrix d_;
  Provenance provenance_;
};

struct KoopmanTriplet {
  cdouble lambda;
  cdouble amplitude;             // phi_i evaluated at theta(0)
  Eigen::VectorXcd mode;         // unit 2-norm
  Eigen::VectorXcd scaled_mode;  // amplitude * mode
  double norm = 0.0;             // |scaled_mode|_2
};

struct KoopmanDecomposition {
  std::vector<KoopmanTriplet> triplets;  // descending re(lambda)
  std::size_t rank = 0;
  double consistency_residual = 0.0;  // |Y - A X|_F / |Y|_F
  double amplitude_residual = 0.0;    // |theta(0) - sum_i scaled_mode_i|_2

  std::size_t dim() const noexcept {
    return triplets.empty() ? 0 : static_cast<std::size_t>(triplets.front().mode.size());
  }
};

enum class ModeKind {
  Exact,      // Y V Sigma^-1 w / lambda, projected only where lambda ~ 0
  Projected,  // Q w for every eigenvalue
};

struct DmdOptions {
  double sv_floor = kDefaultSvFloor;
  ModeKind modes = ModeKind::Exact;
  // |lambda| at or below this counts as zero and gets a projected mode
  double zero_lambda = 1e-12;
};

inline constexpr double kDefaultLambdaTol = 1e-2;
inline constexpr double kDefaultNormFloor = 0.85;

/// X = columns 0..tau-1, Y = columns 1..tau.
std::pair<DenseMatrix, DenseMatrix> build_xy(const SnapshotMatrix& d);

/// Least-squares amplitudes phi with sum_i phi_i v_i ~ theta0.
/// Throws Error{RankDeficient} when the modes are dependent at sv_floor.
Eigen::VectorXcd fit_amplitudes(const ComplexMatrix& modes, const Eigen::VectorXd& theta0,
                                double sv_floor = kDefaultSvFloor);

/// Exact DMD of the pair (X, Y); amplitudes are fit to the first column of X.
KoopmanDecomposition exact_dmd(const DenseMatrix& X, const DenseMatrix& Y,
                               const DmdOptions& options = {});

/// build_xy followed by exact_dmd.
KoopmanDecomposition decompose(const SnapshotMatrix& d, const DmdOptions& options = {});

struct FixedPoint {
  Eigen::VectorXd theta;
  double discarded_imag = 0.0;  // inf-norm of the dropped imaginary part
  std::size_t modes_used = 0;
};

/// Real part of the sum of scaled modes with |lambda - 1| <= lambda_tol.
/// Throws Error{NoUnitEigenvalue} when none qualifies.
FixedPoint predicted_fixed_point(const KoopmanDecomposition& decomp,
                                 double lambda_tol = kDefaultLambdaTol);

/// Real, positive, non-unit eigenvalues whose scaled-mode norm is at least
/// norm_floor times the largest norm among such candidates; sorted by
/// descending norm. May be empty.
std::vector<KoopmanTriplet> decaying_modes(const KoopmanDecomposition& decomp,
                                           double norm_floor = kDefaultNormFloor,
                                           double lambda_tol = kDefaultLambdaTol);

/// True when the triplet passes the eigenvalue tests of decaying_modes.
bool is_decaying_candidate(const KoopmanTriplet& t, double lambda_tol = kDefaultLambdaTol);

/// sum_i lambda_i^t scaled_mode_i (complex).
Eigen::VectorXcd evolve(const KoopmanDecomposition& decomp, double t);

/// Real part of evolve().
Eigen::VectorXd extrapolate(const KoopmanDecomposition& decomp, double t);

}  // namespace kprune
