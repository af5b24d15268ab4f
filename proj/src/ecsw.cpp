#include "qmor/ecsw.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "qmor/artifact_io.hpp"
#include "qmor/errors.hpp"

namespace qmor {

TrainingCoordinates training_coordinates(const Manifold& manifold,
                                         const SnapshotSet& snaps, Index stride) {
  if (stride < 1) throw InvalidArgument("training_coordinates: stride must be >= 1");
  if (manifold.full_dimension() != snaps.dimension())
    throw InvalidArgument("training_coordinates: manifold/snapshot dimension mismatch");

  TrainingCoordinates out;
  for (Index l = 0; l < snaps.count(); l += stride) out.snapshot_indices.push_back(l);
  out.times.resize(static_cast<Index>(out.snapshot_indices.size()));
  out.coordinates.reserve(out.snapshot_indices.size());
  for (size_t k = 0; k < out.snapshot_indices.size(); ++k) {
    const Index l = out.snapshot_indices[k];
    out.times(static_cast<Index>(k)) = snaps.times(l);
    try {
      out.coordinates.push_back(manifold.invert(snaps.states.col(l)));
    } catch (const NumericError& err) {
      std::ostringstream msg;
      msg << "coordinate recovery failed on snapshot " << l << ": " << err.what();
      throw NumericError(msg.str());
    }
  }
  return out;
}

TrainingSystem build_training_system(const SemiDiscreteModel& model,
                                     const Manifold& manifold,
                                     const TrainingCoordinates& coords,
                                     TimeScheme scheme) {
  const auto n_h = static_cast<Index>(coords.coordinates.size());
  if (n_h < 1) throw InvalidArgument("build_training_system: no training states");
  if (manifold.full_dimension() != model.dimension())
    throw InvalidArgument("build_training_system: manifold/model dimension mismatch");

  const Index n = manifold.reduced_dimension();
  const Index n_e = model.entity_count();
  TrainingSystem sys;
  sys.c = Matrix::Zero(n_h * n, n_e);
  sys.d.resize(n_h * n);
  sys.snapshot_indices = coords.snapshot_indices;
  sys.reduced_dimension = n;

  // Reconstructed training states; these also provide the BDF history, with
  // the startup rows falling back to the two-point scheme exactly like the
  // simulation itself does.
  std::vector<Vector> rec(static_cast<size_t>(n_h));
  for (Index l = 0; l < n_h; ++l)
    rec[static_cast<size_t>(l)] = manifold.evaluate(coords.coordinates[static_cast<size_t>(l)]);

  Vector d_direct(n_h * n);  // independent global-path assembly of d
  for (Index l = 0; l < n_h; ++l) {
    TimeDiscretization td;
    td.scheme = l >= 2 ? scheme : TimeScheme::Bdf1;
    if (l == 0) {
      td.dt = n_h > 1 ? coords.times(1) - coords.times(0) : 1.0;
      td.history = {manifold.reference()};
    } else {
      td.dt = coords.times(l) - coords.times(l - 1);
      td.history = {rec[static_cast<size_t>(l - 1)]};
      if (l >= 2) td.history.push_back(rec[static_cast<size_t>(l - 2)]);
    }
    if (!(td.dt > 0.0))
      throw InvalidArgument("build_training_system: nonincreasing training times");

    const Vector& u_l = rec[static_cast<size_t>(l)];
    const double t_l = coords.times(l);
    const Matrix w =
        apply_step_jacobian(model, u_l, td, manifold.tangent(coords.coordinates[static_cast<size_t>(l)]));
    d_direct.segment(l * n, n) = w.transpose() * discrete_residual(model, u_l, t_l, td);

    for (Index e = 0; e < n_e; ++e) {
      const MeshEntity& ent = model.entity(e);
      Vector u_stencil(static_cast<Index>(ent.stencil.size()));
      for (size_t s = 0; s < ent.stencil.size(); ++s)
        u_stencil(static_cast<Index>(s)) = u_l(ent.stencil[s]);
      const Vector r_e = entity_residual(model, ent, u_stencil, t_l, td);
      Vector contribution = Vector::Zero(n);
      for (size_t k = 0; k < ent.owned.size(); ++k)
        contribution += w.row(ent.owned[k]).transpose() * r_e(static_cast<Index>(k));
      if (!contribution.allFinite()) {
        std::ostringstream msg;
        msg << "build_training_system: non-finite entry at training state " << l
            << ", entity " << e;
        throw NumericError(msg.str());
      }
      sys.c.block(l * n, e, n, 1) = contribution;
    }
  }

  // d is the row sum of C by definition; verify it against the global-path
  // contraction W^T r, which exercises the entity decomposition end to end.
  sys.d = sys.c.rowwise().sum();
  const double scale = std::max(sys.d.norm(), 1e-300);
  if ((sys.d - d_direct).norm() > 1e-10 * scale)
    throw NumericError("build_training_system: entity assembly disagrees with the global residual");
  return sys;
}

ReducedMesh train_reduced_mesh(const TrainingSystem& system,
                               const SemiDiscreteModel& model, double tau) {
  if (system.c.cols() != model.entity_count())
    throw InvalidArgument("train_reduced_mesh: system/model entity count mismatch");
  const NnlsSolution sol = nnls_early_stop(system.c, system.d, tau);

  ReducedMesh mesh;
  mesh.weights = sol.weights;
  mesh.entity_count = model.entity_count();
  mesh.reduced_dimension = system.reduced_dimension;
  mesh.tau = tau;
  mesh.achieved_ratio = sol.residual_norm / system.d.norm();
  mesh.nnls_iterations = sol.iterations;
  for (const auto& [e, xi] : mesh.weights) {
    (void)xi;
    mesh.selected.push_back(e);
  }

  // Stencil closure: every dof a selected entity reads must be owned by some
  // entity of the augmented set.
  std::vector<Index> dof_owner(static_cast<size_t>(model.dimension()), -1);
  for (const MeshEntity& ent : model.entities())
    for (const Index dof : ent.owned) dof_owner[static_cast<size_t>(dof)] = ent.id;
  std::set<Index> augmented(mesh.selected.begin(), mesh.selected.end());
  for (const Index e : mesh.selected)
    for (const Index dof : model.entity(e).stencil) {
      const Index owner = dof_owner[static_cast<size_t>(dof)];
      if (owner >= 0) augmented.insert(owner);
    }
  mesh.augmented.assign(augmented.begin(), augmented.end());
  return mesh;
}

void save_reduced_mesh(const ReducedMesh& mesh, const std::string& path) {
  std::ostringstream body;
  body.precision(17);
  for (const auto& [e, xi] : mesh.weights) body << e << ' ' << xi << '\n';
  body << "augmented " << mesh.augmented.size() << '\n';
  for (size_t k = 0; k < mesh.augmented.size(); ++k)
    body << mesh.augmented[k] << (k + 1 == mesh.augmented.size() ? '\n' : ' ');
  if (mesh.augmented.empty()) body << '\n';
  const std::string payload = body.str();

  std::ostringstream tau;
  tau.precision(17);
  tau << mesh.tau;
  io::write_artifact(path, "QMOR-MESH",
                     {{"Ne", std::to_string(mesh.entity_count)},
                      {"ne", std::to_string(mesh.size())},
                      {"tau", tau.str()},
                      {"n", std::to_string(mesh.reduced_dimension)},
                      {"ratio", [&] {
                         std::ostringstream r;
                         r.precision(17);
                         r << mesh.achieved_ratio;
                         return r.str();
                       }()}},
                     payload);
}

ReducedMesh load_reduced_mesh(const std::string& path) {
  const io::ArtifactFile file = io::read_artifact(path, "QMOR-MESH");
  ReducedMesh mesh;
  mesh.entity_count = io::token_index(file.tokens, "Ne", path);
  const Index n_e = io::token_index(file.tokens, "ne", path);
  mesh.tau = io::token_double(file.tokens, "tau", path);
  mesh.reduced_dimension = io::token_index(file.tokens, "n", path);
  mesh.achieved_ratio = io::token_double(file.tokens, "ratio", path);

  std::istringstream in(file.payload);
  for (Index k = 0; k < n_e; ++k) {
    Index e;
    double xi;
    if (!(in >> e >> xi))
      throw InvalidArgument(path + ": expected " + std::to_string(n_e) +
                            " weight lines, got " + std::to_string(k));
    if (e < 0 || e >= mesh.entity_count || !(xi > 0.0))
      throw InvalidArgument(path + ": bad weight line for entity " + std::to_string(e));
    mesh.weights.emplace_back(e, xi);
    mesh.selected.push_back(e);
  }
  std::string word;
  Index count = 0;
  if (!(in >> word >> count) || word != "augmented")
    throw InvalidArgument(path + ": missing augmented-set section");
  for (Index k = 0; k < count; ++k) {
    Index e;
    if (!(in >> e))
      throw InvalidArgument(path + ": truncated augmented-set list");
    mesh.augmented.push_back(e);
  }
  return mesh;
}

}  // namespace qmor
