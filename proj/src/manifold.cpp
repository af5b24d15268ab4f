#include "qmor/manifold.hpp"

#include <cmath>
#include <sstream>
#include <utility>

#include "qmor/artifact_io.hpp"
#include "qmor/errors.hpp"
#include "qmor/parallel.hpp"

namespace qmor {

Index quad_feature_count(Index n) { return n * (n + 1) / 2; }

QuadraticFeatureIndex::QuadraticFeatureIndex(Index n)
    : dimension(n), count(quad_feature_count(n)) {
  if (n < 0) throw InvalidArgument("feature index needs a nonnegative dimension");
  pairs.reserve(static_cast<size_t>(count));
  for (Index i = 0; i < n; ++i)
    for (Index j = i; j < n; ++j) pairs.emplace_back(i, j);
}

Index QuadraticFeatureIndex::flat(Index i, Index j) const {
  if (i > j || i < 0 || j >= dimension)
    throw InvalidArgument("feature pair out of range");
  return i * dimension - i * (i - 1) / 2 + (j - i);
}

Vector unique_kron(const Vector& q) {
  const Index n = q.size();
  Vector kappa(quad_feature_count(n));
  Index k = 0;
  for (Index i = 0; i < n; ++i)
    for (Index j = i; j < n; ++j) kappa(k++) = q(i) * q(j);
  return kappa;
}

Matrix unique_kron_tangent(const Vector& q) {
  const Index n = q.size();
  Matrix t = Matrix::Zero(quad_feature_count(n), n);
  Index k = 0;
  for (Index i = 0; i < n; ++i)
    for (Index j = i; j < n; ++j) {
      t(k, i) += q(j);
      t(k, j) += q(i);  // i == j doubles up to 2 q_i
      ++k;
    }
  return t;
}

DimensionChoice dimension_heuristic(Index n_train, double zeta, Index n_snapshots) {
  if (n_train < 1) throw InvalidArgument("dimension_heuristic: n_train must be >= 1");
  if (n_snapshots < 1)
    throw InvalidArgument("dimension_heuristic: n_snapshots must be >= 1");
  if (zeta < 0.0) throw InvalidArgument("dimension_heuristic: zeta must be >= 0");

  DimensionChoice out;
  out.n_quad_raw = static_cast<Index>(
      std::llround((std::sqrt(9.0 + 8.0 * static_cast<double>(n_train)) - 3.0) / 2.0));
  out.n_quad = static_cast<Index>(
      std::llround((1.0 + zeta) * static_cast<double>(out.n_quad_raw)));
  out.snapshot_cap = static_cast<Index>(
      std::floor((std::sqrt(1.0 + 8.0 * static_cast<double>(n_snapshots)) - 1.0) / 2.0));
  out.n = std::min(out.n_quad, out.snapshot_cap);
  return out;
}

BuildIntermediates build_intermediates(const SnapshotSet& snaps, const Matrix& basis) {
  if (basis.rows() != snaps.dimension())
    throw InvalidArgument("build_intermediates: basis rows do not match snapshots");
  const Matrix centered = snaps.states.colwise() - snaps.u_ref;
  const Matrix coords = basis.transpose() * centered;  // q_l per column

  BuildIntermediates im;
  im.error_matrix = centered - basis * coords;
  im.feature_matrix.resize(quad_feature_count(basis.cols()), snaps.count());
  for (Index l = 0; l < snaps.count(); ++l)
    im.feature_matrix.col(l) = unique_kron(coords.col(l));
  if (im.feature_matrix.size() == 0 || im.feature_matrix.norm() == 0.0)
    throw InvalidArgument("degenerate generalized coordinates");
  im.feature_svd = thin_svd(im.feature_matrix);
  return im;
}

AlphaSelection select_alpha_gcv(const BuildIntermediates& im, double omega) {
  if (!(omega > 0.0) || omega > 1.0)
    throw InvalidArgument("select_alpha_gcv: omega must lie in (0, 1]");
  const Index rank = im.feature_svd.rank();
  const double sigma_max = im.feature_svd.singular_values(0);
  const double sigma_min = im.feature_svd.singular_values(rank - 1);
  const auto samples =
      static_cast<Index>(std::ceil(omega * static_cast<double>(rank)));

  AlphaSelection sel;
  sel.grid.resize(samples);
  if (samples == 1) {
    sel.grid(0) = sigma_max;
  } else {
    const double lo = std::log(sigma_min);
    const double hi = std::log(sigma_max);
    for (Index t = 0; t < samples; ++t)
      sel.grid(t) = std::exp(lo + (hi - lo) * static_cast<double>(t) /
                                      static_cast<double>(samples - 1));
  }

  sel.row_votes.assign(static_cast<size_t>(samples), 0);
  const Index rows = im.error_matrix.rows();
  std::vector<Index> row_best(static_cast<size_t>(rows), 0);
  detail::parallel_for(0, rows, [&](std::ptrdiff_t i) {
    const Vector rhs = im.error_matrix.row(i).transpose();
    Index best = samples - 1;
    double best_score = gcv_score(im.feature_svd, rhs, sel.grid(best));
    for (Index t = samples - 2; t >= 0; --t) {
      const double score = gcv_score(im.feature_svd, rhs, sel.grid(t));
      if (score < best_score) {  // strict: per-row ties keep the larger alpha
        best_score = score;
        best = t;
      }
    }
    row_best[static_cast<size_t>(i)] = best;
  });
  for (const Index b : row_best) sel.row_votes[static_cast<size_t>(b)] += 1;

  Index winner = 0;
  for (Index t = 0; t < samples; ++t)
    if (sel.row_votes[static_cast<size_t>(t)] >= sel.row_votes[static_cast<size_t>(winner)])
      winner = t;  // >= : cross-row ties resolve toward the larger alpha
  sel.alpha_star = sel.grid(winner);
  return sel;
}

Manifold Manifold::affine(Matrix basis, Vector u_ref, BuildRecord record) {
  if (basis.rows() != u_ref.size())
    throw InvalidArgument("manifold: basis rows do not match the reference state");
  Manifold m;
  m.basis_ = std::move(basis);
  m.u_ref_ = std::move(u_ref);
  m.record_ = record;
  return m;
}

Manifold Manifold::quadratic(Matrix basis, Matrix correction, Vector u_ref,
                             BuildRecord record) {
  if (basis.rows() != u_ref.size())
    throw InvalidArgument("manifold: basis rows do not match the reference state");
  if (correction.rows() != basis.rows() ||
      correction.cols() != quad_feature_count(basis.cols()))
    throw InvalidArgument("manifold: correction shape does not match the basis");
  Manifold m;
  m.basis_ = std::move(basis);
  m.correction_ = std::move(correction);
  m.u_ref_ = std::move(u_ref);
  m.record_ = record;
  return m;
}

Vector Manifold::evaluate(const Vector& q) const {
  if (q.size() != reduced_dimension())
    throw InvalidArgument("manifold: coordinate length mismatch");
  Vector u = u_ref_ + basis_ * q;
  if (is_quadratic()) u += correction_ * unique_kron(q);
  return u;
}

Matrix Manifold::tangent(const Vector& q) const {
  if (q.size() != reduced_dimension())
    throw InvalidArgument("manifold: coordinate length mismatch");
  if (!is_quadratic()) return basis_;
  return basis_ + correction_ * unique_kron_tangent(q);
}

Vector Manifold::evaluate_rows(const std::vector<Index>& rows, const Vector& q,
                               const Vector& kappa) const {
  Vector u(static_cast<Index>(rows.size()));
  for (size_t k = 0; k < rows.size(); ++k) {
    const Index r = rows[k];
    double v = u_ref_(r) + basis_.row(r) * q;
    if (is_quadratic()) v += correction_.row(r) * kappa;
    u(static_cast<Index>(k)) = v;
  }
  return u;
}

Matrix Manifold::tangent_rows(const std::vector<Index>& rows,
                              const Matrix& kappa_tangent) const {
  Matrix t(static_cast<Index>(rows.size()), reduced_dimension());
  for (size_t k = 0; k < rows.size(); ++k) {
    const Index r = rows[k];
    t.row(static_cast<Index>(k)) = basis_.row(r);
    if (is_quadratic()) t.row(static_cast<Index>(k)) += correction_.row(r) * kappa_tangent;
  }
  return t;
}

Vector Manifold::invert(const Vector& u, const InvertConfig& cfg) const {
  if (u.size() != full_dimension())
    throw InvalidArgument("manifold: state length mismatch");
  Vector q = basis_.transpose() * (u - u_ref_);
  if (!is_quadratic()) return q;

  const double gtol = cfg.gradient_tol * static_cast<double>(reduced_dimension());
  Vector delta = evaluate(q) - u;
  for (int it = 0; it < cfg.max_iters; ++it) {
    const Matrix t = tangent(q);
    if ((t.transpose() * delta).norm() <= gtol) return q;
    const Vector step =
        t.completeOrthogonalDecomposition().solve(delta);  // pseudoinverse action
    q -= step;
    delta = evaluate(q) - u;
    if (step.norm() <= cfg.step_tol) return q;
  }
  std::ostringstream msg;
  msg << "manifold inversion did not converge in " << cfg.max_iters
      << " iterations (reconstruction residual " << delta.norm() << ")";
  throw InvertFailure(msg.str(), q, delta.norm());
}

Manifold build_quadratic(const SnapshotSet& snaps, const Matrix& basis,
                         const BuildOptions& opts) {
  if (basis.cols() < 1)
    throw InvalidArgument("build_quadratic: basis must have at least one column");
  const BuildIntermediates im = build_intermediates(snaps, basis);

  BuildRecord record = opts.seed;
  record.omega = opts.omega;
  record.sigma_max = im.feature_svd.singular_values(0);
  record.sigma_min = im.feature_svd.singular_values(im.feature_svd.rank() - 1);
  if (opts.alpha_star) {
    record.alpha_star = *opts.alpha_star;
  } else {
    record.alpha_star = select_alpha_gcv(im, opts.omega).alpha_star;
  }

  const Index rows = im.error_matrix.rows();
  Matrix correction(rows, im.feature_matrix.rows());
  detail::parallel_for(
      0, rows,
      [&](std::ptrdiff_t i) {
        const Vector rhs = im.error_matrix.row(i).transpose();
        correction.row(i) =
            tikhonov_row_solve(im.feature_svd, rhs, record.alpha_star).transpose();
      },
      opts.threads);
  return Manifold::quadratic(basis, std::move(correction), snaps.u_ref, record);
}

namespace {
constexpr Index kRecordSlots = 10;

void append_record(std::string& payload, const BuildRecord& rec) {
  const double slots[kRecordSlots] = {
      rec.epsilon_s,
      rec.zeta,
      rec.omega,
      static_cast<double>(rec.n_train),
      static_cast<double>(rec.n_quad_raw),
      static_cast<double>(rec.n_quad),
      rec.alpha_star,
      rec.sigma_max,
      rec.sigma_min,
      rec.discarded_energy,
  };
  io::append_f64(payload, slots, kRecordSlots);
}

BuildRecord take_record(io::PayloadReader& reader) {
  const Vector slots = reader.take_vector(kRecordSlots);
  BuildRecord rec;
  rec.epsilon_s = slots(0);
  rec.zeta = slots(1);
  rec.omega = slots(2);
  rec.n_train = static_cast<Index>(std::llround(slots(3)));
  rec.n_quad_raw = static_cast<Index>(std::llround(slots(4)));
  rec.n_quad = static_cast<Index>(std::llround(slots(5)));
  rec.alpha_star = slots(6);
  rec.sigma_max = slots(7);
  rec.sigma_min = slots(8);
  rec.discarded_energy = slots(9);
  return rec;
}
}  // namespace

void save_manifold(const Manifold& manifold, const std::string& path) {
  std::string payload;
  io::append_f64(payload, manifold.reference());
  io::append_f64(payload, manifold.basis());
  if (manifold.is_quadratic()) io::append_f64(payload, manifold.correction());
  append_record(payload, manifold.record());
  io::write_artifact(path, "QMOR-MAN",
                     {{"N", std::to_string(manifold.full_dimension())},
                      {"n", std::to_string(manifold.reduced_dimension())},
                      {"kind", manifold.is_quadratic() ? "quadratic" : "affine"}},
                     payload);
}

Manifold load_manifold(const std::string& path) {
  const io::ArtifactFile file = io::read_artifact(path, "QMOR-MAN");
  const Index full = io::token_index(file.tokens, "N", path);
  const Index reduced = io::token_index(file.tokens, "n", path);
  const std::string kind = io::token_string(file.tokens, "kind", path);
  if (kind != "affine" && kind != "quadratic")
    throw InvalidArgument(path + ": unknown manifold kind \"" + kind + "\"");

  io::PayloadReader reader(file.payload, "manifold payload of " + path);
  Vector u_ref = reader.take_vector(full);
  Matrix basis = reader.take_matrix(full, reduced);
  if (kind == "affine") {
    const BuildRecord rec = take_record(reader);
    if (!reader.exhausted())
      throw InvalidArgument(path + ": payload longer than header declares");
    return Manifold::affine(std::move(basis), std::move(u_ref), rec);
  }
  Matrix correction = reader.take_matrix(full, quad_feature_count(reduced));
  const BuildRecord rec = take_record(reader);
  if (!reader.exhausted())
    throw InvalidArgument(path + ": payload longer than header declares");
  return Manifold::quadratic(std::move(basis), std::move(correction),
                             std::move(u_ref), rec);
}

}  // namespace qmor
