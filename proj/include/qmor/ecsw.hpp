#pragma once

#include <string>
#include <vector>

#include "qmor/dense.hpp"
#include "qmor/hdm.hpp"
#include "qmor/manifold.hpp"

namespace qmor {

/// Manifold coordinates of every stride-th snapshot, the states the cubature
/// training system is assembled at.
struct TrainingCoordinates {
  std::vector<Vector> coordinates;     // N_h entries
  std::vector<Index> snapshot_indices; // positions in the snapshot set
  Vector times;                        // N_h time stamps
};
TrainingCoordinates training_coordinates(const Manifold& manifold,
                                         const SnapshotSet& snaps, Index stride);

/// Cubature training system: block row l stacks, per entity e, the reduced
/// residual contribution (L_e W_l)^T r_e at training state l; d holds the row
/// sums, i.e. the exact full-mesh contractions.
struct TrainingSystem {
  Matrix c;                            // (N_h * n) x N_e
  Vector d;                            // N_h * n
  std::vector<Index> snapshot_indices; // length N_h
  Index reduced_dimension = 0;         // n
};
TrainingSystem build_training_system(const SemiDiscreteModel& model,
                                     const Manifold& manifold,
                                     const TrainingCoordinates& coords,
                                     TimeScheme scheme);

/// Entity subset selected by nonnegative least squares on the training
/// system, plus the stencil-closure needed to evaluate it.
struct ReducedMesh {
  std::vector<std::pair<Index, double>> weights; // (entity id, xi > 0), sorted by id
  std::vector<Index> selected;                   // support of the weights
  std::vector<Index> augmented;                  // selected plus stencil neighbors
  Index entity_count = 0;                        // N_e of the parent mesh
  Index reduced_dimension = 0;                   // manifold dimension the mesh was trained for
  double tau = 0.0;
  double achieved_ratio = 0.0;                   // |C xi - d| / |d|
  int nnls_iterations = 0;

  Index size() const { return static_cast<Index>(selected.size()); }
};
ReducedMesh train_reduced_mesh(const TrainingSystem& system,
                               const SemiDiscreteModel& model, double tau);

/// Reduced-mesh artifact (text format), lossless round trip.
void save_reduced_mesh(const ReducedMesh& mesh, const std::string& path);
ReducedMesh load_reduced_mesh(const std::string& path);

}  // namespace qmor
