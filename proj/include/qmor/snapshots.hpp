#pragma once

#include <string>

#include "qmor/dense.hpp"

namespace qmor {

/// Time-stamped solution states of a simulation run plus the reference state
/// the reduction is centered on (here: the initial condition).
struct SnapshotSet {
  Matrix states;  // N x N_s, one column per recorded step
  Vector times;   // N_s, strictly increasing
  Vector u_ref;   // N

  Index dimension() const { return states.rows(); }
  Index count() const { return states.cols(); }
};

/// Orthonormal basis of the leading left singular subspace of the centered
/// snapshot matrix, together with what the energy criterion kept and dropped.
struct ReducedBasis {
  Matrix basis;                    // N x n, orthonormal columns
  Vector retained_singular_values; // n
  double discarded_energy = 0.0;   // fraction of squared spectral energy dropped
};

/// Proper orthogonal decomposition of the u_ref-centered snapshots.  Keeps the
/// smallest n with  sum_{i<=n} sigma_i^2 / sum_j sigma_j^2  >=  1 - epsilon.
ReducedBasis pod_basis(const SnapshotSet& snaps, double epsilon);

/// Binary snapshot artifact, lossless round trip.
void save_snapshots(const SnapshotSet& snaps, const std::string& path);
SnapshotSet load_snapshots(const std::string& path);

}  // namespace qmor
