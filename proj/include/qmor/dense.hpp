#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <utility>
#include <vector>

#include "qmor/errors.hpp"

namespace qmor {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Rank-truncated thin SVD, A = U * diag(s) * Y^T with s strictly positive
/// and descending.  U and Y keep only the retained columns.
struct ThinSvd {
  Matrix left_vectors;    // m x k
  Vector singular_values; // k, descending, all > 0
  Matrix right_vectors;   // p x k
  Index rank() const { return singular_values.size(); }
};

/// Thin SVD of a (generally rectangular) matrix.  Singular values at or below
/// max(m, p) * machine_eps * sigma_max are treated as numerical zeros and
/// dropped together with their vectors.  An all-zero matrix has no retained
/// direction at all and is rejected.
ThinSvd thin_svd(const Matrix& a);

/// Minimum-norm Tikhonov solution of one least-squares row fit
///   min over h of |Qbar^T h - rhs|^2 + alpha^2 |h|^2
/// written through the SVD of the feature matrix Qbar (= svd):
///   h = sum_l  sigma_l^2/(sigma_l^2 + alpha^2) * (y_l . rhs)/sigma_l * u_l.
/// alpha = 0 reproduces the plain pseudoinverse solution.
Vector tikhonov_row_solve(const ThinSvd& svd, const Vector& rhs, double alpha);

/// Generalized cross-validation score of the regularized row fit above:
///   G(alpha) = |(I - A(alpha)) rhs|^2 / (N_s - tr A(alpha))^2
/// with the influence matrix A(alpha) = Y diag(f_l) Y^T, evaluated in terms of
/// filter factors f_l = sigma_l^2/(sigma_l^2 + alpha^2) without forming A.
/// Returns +inf when the denominator is not positive.
double gcv_score(const ThinSvd& svd, const Vector& rhs, double alpha);

/// Sparse nonnegative weight vector produced by nnls_early_stop.
struct NnlsSolution {
  Index size = 0;                                  // logical length (columns of C)
  std::vector<std::pair<Index, double>> weights;   // (index, value), value > 0, sorted by index
  double residual_norm = 0.0;                      // |C xi - d|
  int iterations = 0;                              // outer passes consumed

  Index support_size() const { return static_cast<Index>(weights.size()); }
  Vector dense() const;                            // expand to a full vector
};

/// Thrown when the early-termination target is unreachable; carries the best
/// feasible iterate seen so far.
struct NnlsFailure : NumericError {
  NnlsFailure(const std::string& what, NnlsSolution best_seen)
      : NumericError(what), best(std::move(best_seen)) {}
  NnlsSolution best;
};

/// Nonnegative least squares min |C xi - d| over xi >= 0, solved with the
/// active-set method of Lawson and Hanson, terminated early as soon as
/// |C xi - d| <= tau * |d|.  tau must lie in (0, 1]; tau = 1 is satisfied by
/// xi = 0 immediately.  max_passes = 0 means the default cap of 10 * cols(C).
NnlsSolution nnls_early_stop(const Matrix& c, const Vector& d, double tau,
                             int max_passes = 0);

}  // namespace qmor
