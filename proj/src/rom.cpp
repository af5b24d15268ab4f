#include "qmor/rom.hpp"

#include <Eigen/Cholesky>
#include <Eigen/QR>
#include <cmath>
#include <sstream>

#include "qmor/errors.hpp"

namespace qmor {

namespace {

[[noreturn]] void gauss_newton_stall(const char* what, const Vector& q,
                                     double grad_norm, int iters) {
  std::ostringstream msg;
  msg << what << " did not converge in " << iters
      << " iterations (gradient norm " << grad_norm << "; iterate";
  for (Index i = 0; i < q.size(); ++i) msg << ' ' << q(i);
  msg << ")";
  throw NumericError(msg.str());
}

}  // namespace

LspgStepResult lspg_step(const SemiDiscreteModel& model, const Manifold& manifold,
                         const Vector& q_m, const TimeDiscretization& td,
                         double t_new, const LspgConfig& cfg) {
  const Index n = manifold.reduced_dimension();
  Vector q = q_m;
  double g0 = 0.0;
  double grad_norm = 0.0;
  for (int it = 0; it <= cfg.gn_max_iters; ++it) {
    const Vector u = manifold.evaluate(q);
    if (!u.allFinite()) throw NumericError("non-finite state");
    const Vector r = discrete_residual(model, u, t_new, td);
    const Matrix w = apply_step_jacobian(model, u, td, manifold.tangent(q));
    grad_norm = (w.transpose() * r).norm();
    if (it == 0) g0 = grad_norm;
    if (grad_norm <= cfg.gn_tol_rel * g0 + cfg.gn_tol_abs) return {q, it};
    if (it == cfg.gn_max_iters) break;

    Eigen::ColPivHouseholderQR<Matrix> qr(w);
    if (qr.rank() < n) throw NumericError("tangent rank collapse");
    q += qr.solve(-r);
  }
  gauss_newton_stall("LSPG step", q, grad_norm, cfg.gn_max_iters);
}

LspgStepResult hyper_lspg_step(const SemiDiscreteModel& model, const Manifold& manifold,
                               const Vector& q_m, const TimeDiscretization& td,
                               double t_new, const ReducedMesh& mesh,
                               const LspgConfig& cfg) {
  if (mesh.weights.empty()) throw NumericError("singular hyperreduced system");
  if (mesh.entity_count != model.entity_count() ||
      mesh.reduced_dimension != manifold.reduced_dimension())
    throw InvalidArgument("hyper_lspg_step: mesh does not match model/manifold");

  const Index n = manifold.reduced_dimension();
  Vector q = q_m;
  double g0 = 0.0;
  double grad_norm = 0.0;
  for (int it = 0; it <= cfg.gn_max_iters; ++it) {
    const Vector kappa = manifold.is_quadratic() ? unique_kron(q) : Vector();
    const Matrix kappa_tan =
        manifold.is_quadratic() ? unique_kron_tangent(q) : Matrix();
    Matrix g = Matrix::Zero(n, n);
    Vector b = Vector::Zero(n);
    for (const auto& [e, xi] : mesh.weights) {
      const MeshEntity& ent = model.entity(e);
      const Vector u_stencil = manifold.evaluate_rows(ent.stencil, q, kappa);
      if (!u_stencil.allFinite()) throw NumericError("non-finite state");
      const Vector r_e = entity_residual(model, ent, u_stencil, t_new, td);
      const Matrix t_stencil = manifold.tangent_rows(ent.stencil, kappa_tan);
      const Matrix a_e = entity_jacobian(model, ent, u_stencil, td) * t_stencil;
      g.noalias() += xi * a_e.transpose() * a_e;
      b.noalias() -= xi * a_e.transpose() * r_e;
    }
    grad_norm = b.norm();
    if (it == 0) g0 = grad_norm;
    if (grad_norm <= cfg.gn_tol_rel * g0 + cfg.gn_tol_abs) return {q, it};
    if (it == cfg.gn_max_iters) break;

    Eigen::LLT<Matrix> llt(g);
    if (llt.info() != Eigen::Success)
      throw NumericError("singular hyperreduced system");
    const Vector step = llt.solve(b);
    if (!step.allFinite()) throw NumericError("singular hyperreduced system");
    q += step;
  }
  gauss_newton_stall("hyperreduced LSPG step", q, grad_norm, cfg.gn_max_iters);
}

RomTrajectory run_rom(const SemiDiscreteModel& model, const Manifold& manifold,
                      const std::optional<ReducedMesh>& mesh, TimeScheme scheme,
                      double dt, double t_final, const std::vector<Index>& probes,
                      const LspgConfig& cfg, const RomStepObserver& observer,
                      RomStats* stats) {
  if (!(dt > 0.0)) throw InvalidArgument("dt must be positive");
  if (t_final < 0.0) throw InvalidArgument("t_final must be nonnegative");
  if (manifold.full_dimension() != model.dimension())
    throw InvalidArgument("run_rom: manifold/model dimension mismatch");
  for (const Index p : probes)
    if (p < 0 || p >= model.dimension())
      throw InvalidArgument("run_rom: probe cell out of range");

  const auto steps = static_cast<Index>(std::llround(t_final / dt));
  const Index n = manifold.reduced_dimension();
  RomTrajectory traj;
  traj.coordinates.resize(n, steps + 1);
  traj.times.resize(steps + 1);
  traj.qoi.resize(steps + 1, static_cast<Index>(probes.size()) + 1);
  for (const Index p : probes) traj.qoi_names.push_back("probe_" + std::to_string(p));
  traj.qoi_names.push_back("integral_qoi");

  const auto record = [&](Index row, double t, const Vector& q, const Vector& u) {
    traj.coordinates.col(row) = q;
    traj.times(row) = t;
    for (size_t k = 0; k < probes.size(); ++k)
      traj.qoi(row, static_cast<Index>(k)) = u(probes[k]);
    traj.qoi(row, static_cast<Index>(probes.size())) = model.mass_diag().dot(u);
    if (observer) observer(t, q, u);
  };

  Vector q = manifold.invert(model.initial_state());
  Vector u = manifold.evaluate(q);
  record(0, 0.0, q, u);

  TimeDiscretization td{scheme, dt, {u}};
  for (Index m = 1; m <= steps; ++m) {
    const double t_new = static_cast<double>(m) * dt;
    LspgStepResult step;
    try {
      step = mesh ? hyper_lspg_step(model, manifold, q, td, t_new, *mesh, cfg)
                  : lspg_step(model, manifold, q, td, t_new, cfg);
    } catch (const NumericError& err) {
      std::ostringstream msg;
      msg << "ROM step at t = " << t_new << " failed: " << err.what();
      throw NumericError(msg.str());
    }
    q = std::move(step.q);
    u = manifold.evaluate(q);
    if (stats) {
      stats->steps += 1;
      stats->max_gn_iterations = std::max(stats->max_gn_iterations, step.iterations);
      stats->total_gn_iterations += step.iterations;
    }
    td.history.insert(td.history.begin(), u);
    if (td.history.size() > 2) td.history.pop_back();
    record(m, t_new, q, u);
  }
  return traj;
}

double relative_error(const Vector& approx, const Vector& reference) {
  if (approx.size() != reference.size())
    throw InvalidArgument("relative_error: series lengths differ");
  const double denom = reference.norm();
  if (!(denom > 0.0)) throw InvalidArgument("zero reference QoI");
  return (approx - reference).norm() / denom;
}

}  // namespace qmor
