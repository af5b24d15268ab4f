#pragma once

#include <optional>
#include <string>
#include <vector>

#include "qmor/dense.hpp"
#include "qmor/snapshots.hpp"

namespace qmor {

/// Deduplicated quadratic feature layout for coordinates of dimension n: all
/// pairs (i, j) with 0 <= i <= j < n in lexicographic order.  Off-diagonal
/// products appear once and carry no symmetry factor of 2; the learned
/// coefficients absorb it.
struct QuadraticFeatureIndex {
  explicit QuadraticFeatureIndex(Index n);
  Index dimension;                              // n
  Index count;                                  // n(n+1)/2
  std::vector<std::pair<Index, Index>> pairs;   // flat index -> (i, j)
  Index flat(Index i, Index j) const;           // (i, j), i <= j -> flat index
};

Index quad_feature_count(Index n);

/// kappa(q): products q_i q_j for i <= j, in QuadraticFeatureIndex order.
Vector unique_kron(const Vector& q);

/// d kappa / d q: row (i, j) has q_j in column i and q_i in column j
/// (diagonal rows reduce to a single entry 2 q_i).
Matrix unique_kron_tangent(const Vector& q);

/// Dimension heuristic balancing quadratic-manifold capacity against the
/// affine training dimension, capped by the snapshot count:
///   n_quad_raw = round((sqrt(9 + 8 n_train) - 3)/2)
///   n_quad     = round((1 + zeta) n_quad_raw)
///   cap        = floor((sqrt(1 + 8 N_s) - 1)/2)
///   n          = min(n_quad, cap)
struct DimensionChoice {
  Index n_quad_raw = 0;
  Index n_quad = 0;
  Index snapshot_cap = 0;
  Index n = 0;
};
DimensionChoice dimension_heuristic(Index n_train, double zeta, Index n_snapshots);

/// Everything the quadratic construction derives from snapshots and basis:
/// the affine approximation errors E, the quadratic features Qbar of the
/// projected coordinates, and the thin SVD of Qbar.
struct BuildIntermediates {
  Matrix error_matrix;    // N x N_s, column l = u_l - V q_l - u_ref
  Matrix feature_matrix;  // n(n+1)/2 x N_s, column l = kappa(q_l)
  ThinSvd feature_svd;
};
BuildIntermediates build_intermediates(const SnapshotSet& snaps, const Matrix& basis);

/// Regularization picked by generalized cross-validation: a log-uniform grid
/// of ceil(omega * rank(Qbar)) values spanning the retained singular-value
/// range, scored per state row, decided by the mode over rows (ties go to the
/// larger value).
struct AlphaSelection {
  double alpha_star = 0.0;
  Vector grid;                    // ascending trial values
  std::vector<Index> row_votes;   // votes per grid value
};
AlphaSelection select_alpha_gcv(const BuildIntermediates& im, double omega);

/// Provenance of a quadratic build, stored with the manifold.
struct BuildRecord {
  double epsilon_s = 0.0;
  double zeta = 0.0;
  double omega = 0.0;
  Index n_train = 0;
  Index n_quad_raw = 0;
  Index n_quad = 0;
  double alpha_star = 0.0;
  double sigma_max = 0.0;  // extremes of the feature spectrum
  double sigma_min = 0.0;
  double discarded_energy = 0.0;
};

struct InvertConfig {
  double gradient_tol = 1e-10;  // scaled by the reduced dimension
  double step_tol = 1e-12;
  int max_iters = 50;
};

/// Thrown when coordinate recovery stagnates (the state is too far from the
/// manifold); carries the last iterate and its reconstruction residual.
struct InvertFailure : NumericError {
  InvertFailure(const std::string& what, Vector iterate, double residual)
      : NumericError(what), last_iterate(std::move(iterate)), residual_norm(residual) {}
  Vector last_iterate;
  double residual_norm;
};

/// Approximation manifold  u(q) = correction * kappa(q) + basis * q + u_ref.
/// An affine manifold is the correction-free special case.
class Manifold {
 public:
  static Manifold affine(Matrix basis, Vector u_ref, BuildRecord record = {});
  static Manifold quadratic(Matrix basis, Matrix correction, Vector u_ref,
                            BuildRecord record);

  bool is_quadratic() const { return correction_.size() != 0; }
  Index full_dimension() const { return u_ref_.size(); }
  Index reduced_dimension() const { return basis_.cols(); }
  const Matrix& basis() const { return basis_; }
  const Matrix& correction() const { return correction_; }
  const Vector& reference() const { return u_ref_; }
  const BuildRecord& record() const { return record_; }

  /// u(q); exactly u_ref at q = 0.
  Vector evaluate(const Vector& q) const;
  /// du/dq; exactly the basis at q = 0.
  Matrix tangent(const Vector& q) const;
  /// evaluate restricted to the given state rows, with kappa(q) precomputed.
  Vector evaluate_rows(const std::vector<Index>& rows, const Vector& q,
                       const Vector& kappa) const;
  /// tangent restricted to the given state rows, with the kappa tangent
  /// precomputed.
  Matrix tangent_rows(const std::vector<Index>& rows, const Matrix& kappa_tangent) const;
  /// Gauss-Newton recovery of coordinates from a state: q0 = basis^T (u - u_ref),
  /// updates through the tangent pseudoinverse.  Affine manifolds return the
  /// projection directly.
  Vector invert(const Vector& u, const InvertConfig& cfg = {}) const;

 private:
  Manifold() = default;
  Matrix basis_;
  Matrix correction_;  // empty for affine manifolds
  Vector u_ref_;
  BuildRecord record_;
};

struct BuildOptions {
  double omega = 0.1;
  std::optional<double> alpha_star;  // set to skip the GCV sweep
  BuildRecord seed;                  // provenance fields filled by the caller
  unsigned threads = 0;              // 0 = hardware concurrency
};

/// Fits the quadratic correction row by row against the affine approximation
/// errors, regularized by alpha_star (GCV-selected unless supplied).
Manifold build_quadratic(const SnapshotSet& snaps, const Matrix& basis,
                         const BuildOptions& opts = {});

/// Manifold artifact, lossless round trip.
void save_manifold(const Manifold& manifold, const std::string& path);
Manifold load_manifold(const std::string& path);

}  // namespace qmor
