#include "qmor/snapshots.hpp"

#include <cmath>

#include "qmor/artifact_io.hpp"
#include "qmor/errors.hpp"

namespace qmor {

ReducedBasis pod_basis(const SnapshotSet& snaps, double epsilon) {
  if (snaps.count() < 1) throw InvalidArgument("pod_basis: empty snapshot set");
  if (!(epsilon > 0.0) || !(epsilon < 1.0))
    throw InvalidArgument("pod_basis: epsilon must lie in (0, 1)");

  Matrix centered = snaps.states.colwise() - snaps.u_ref;
  if (centered.norm() == 0.0) throw InvalidArgument("zero-energy snapshot set");

  const ThinSvd svd = thin_svd(centered);
  const Index k = svd.rank();
  double total = 0.0;
  for (Index i = 0; i < k; ++i)
    total += svd.singular_values(i) * svd.singular_values(i);

  Index n = k;
  double kept = 0.0;
  for (Index i = 0; i < k; ++i) {
    kept += svd.singular_values(i) * svd.singular_values(i);
    if (kept / total >= 1.0 - epsilon) {
      n = i + 1;
      break;
    }
  }

  ReducedBasis out;
  out.basis = svd.left_vectors.leftCols(n);
  out.retained_singular_values = svd.singular_values.head(n);
  out.discarded_energy = std::max(0.0, 1.0 - kept / total);
  return out;
}

void save_snapshots(const SnapshotSet& snaps, const std::string& path) {
  if (snaps.times.size() != snaps.count())
    throw InvalidArgument("save_snapshots: times/states column mismatch");
  if (snaps.u_ref.size() != snaps.dimension())
    throw InvalidArgument("save_snapshots: u_ref length mismatch");
  std::string payload;
  io::append_f64(payload, snaps.times);
  io::append_f64(payload, snaps.states);
  io::append_f64(payload, snaps.u_ref);  // reference state as one extra column
  io::write_artifact(path, "QMOR-SNAP",
                     {{"N", std::to_string(snaps.dimension())},
                      {"NS", std::to_string(snaps.count())},
                      {"UREF", "1"}},
                     payload);
}

SnapshotSet load_snapshots(const std::string& path) {
  const io::ArtifactFile file = io::read_artifact(path, "QMOR-SNAP");
  const Index n = io::token_index(file.tokens, "N", path);
  const Index ns = io::token_index(file.tokens, "NS", path);
  if (io::token_index(file.tokens, "UREF", path) != 1)
    throw InvalidArgument(path + ": reference-state column missing");

  io::PayloadReader reader(file.payload, "snapshot payload of " + path);
  SnapshotSet snaps;
  snaps.times = reader.take_vector(ns);
  snaps.states = reader.take_matrix(n, ns);
  snaps.u_ref = reader.take_vector(n);
  if (!reader.exhausted())
    throw InvalidArgument(path + ": payload longer than header declares (" +
                          std::to_string(reader.remaining()) + " extra bytes)");
  for (Index i = 1; i < ns; ++i)
    if (!(snaps.times(i) > snaps.times(i - 1)))
      throw InvalidArgument(path + ": time stamps not strictly increasing");
  return snaps;
}

}  // namespace qmor
