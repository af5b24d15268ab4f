#include "qmor/hdm.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <utility>

#include "qmor/errors.hpp"

namespace qmor {

namespace {

void check_finite(const Vector& u, const char* what = "non-finite state") {
  if (!u.allFinite()) throw NumericError(what);
}

void check_history(const TimeDiscretization& td) {
  if (!(td.dt > 0.0)) throw InvalidArgument("time step must be positive");
  if (td.history.empty())
    throw InvalidArgument("time discretization has no history state");
}

/// Backward-difference combination for one dof.
double bdf_combination(const TimeDiscretization& td, double u_new, Index i) {
  if (td.two_point_fallback()) return u_new - td.history[0](i);
  return (3.0 * u_new - 4.0 * td.history[0](i) + td.history[1](i)) / 2.0;
}

Index stencil_position(const MeshEntity& e, Index dof) {
  const auto it = std::lower_bound(e.stencil.begin(), e.stencil.end(), dof);
  if (it == e.stencil.end() || *it != dof) {
    std::ostringstream msg;
    msg << "entity " << e.id << ": dof " << dof << " not in stencil";
    throw InvalidArgument(msg.str());
  }
  return static_cast<Index>(it - e.stencil.begin());
}

}  // namespace

SemiDiscreteModel::SemiDiscreteModel(Vector mass_diag, ScalarFn flux,
                                     ScalarFn flux_derivative, double inflow,
                                     SourceFn source, Vector initial_state)
    : mass_diag_(std::move(mass_diag)),
      flux_(std::move(flux)),
      dflux_(std::move(flux_derivative)),
      inflow_(inflow),
      source_(std::move(source)),
      initial_state_(std::move(initial_state)) {
  if (mass_diag_.size() == 0) throw InvalidArgument("model has no cells");
  if ((mass_diag_.array() <= 0.0).any())
    throw InvalidArgument("mass entries must be strictly positive");
  if (initial_state_.size() != mass_diag_.size())
    throw InvalidArgument("initial state length does not match the mesh");
  entities_.reserve(static_cast<size_t>(mass_diag_.size()));
  for (Index i = 0; i < mass_diag_.size(); ++i) {
    MeshEntity e;
    e.id = i;
    e.owned = {i};
    e.stencil = i == 0 ? std::vector<Index>{0} : std::vector<Index>{i - 1, i};
    entities_.push_back(std::move(e));
  }
}

Vector SemiDiscreteModel::flux_vector(const Vector& u) const {
  Vector f(u.size());
  double upwind = flux_(inflow_);
  for (Index i = 0; i < u.size(); ++i) {
    const double right = flux_(u(i));
    f(i) = right - upwind;
    upwind = right;
  }
  return f;
}

SemiDiscreteModel make_burgers_model(const BurgersParams& params) {
  if (params.cells < 1) throw InvalidArgument("cells must be >= 1");
  if (!(params.length > 0.0)) throw InvalidArgument("length must be positive");
  const double dx = params.length / static_cast<double>(params.cells);
  Vector mass = Vector::Constant(params.cells, dx);
  Vector g(params.cells);
  for (Index i = 0; i < params.cells; ++i) {
    const double x = (static_cast<double>(i) + 0.5) * dx;
    g(i) = dx * params.source_amplitude * std::exp(params.source_rate * x);
  }
  return SemiDiscreteModel(
      std::move(mass), [](double u) { return 0.5 * u * u; },
      [](double u) { return u; }, params.inflow,
      [g](double) { return g; },
      Vector::Constant(params.cells, params.initial_value));
}

Vector discrete_residual(const SemiDiscreteModel& model, const Vector& u_new,
                         double t_new, const TimeDiscretization& td) {
  check_history(td);
  if (u_new.size() != model.dimension())
    throw InvalidArgument("discrete_residual: state length mismatch");
  check_finite(u_new);
  Vector r = model.flux_vector(u_new) - model.source(t_new);
  for (Index i = 0; i < u_new.size(); ++i)
    r(i) += model.mass_diag()(i) * bdf_combination(td, u_new(i), i) / td.dt;
  return r;
}

Vector entity_residual(const SemiDiscreteModel& model, const MeshEntity& e,
                       const Vector& u_stencil, double t, const TimeDiscretization& td) {
  check_history(td);
  if (u_stencil.size() != static_cast<Index>(e.stencil.size()))
    throw InvalidArgument("entity_residual: stencil state length mismatch");
  check_finite(u_stencil);
  const Vector g = model.source(t);
  Vector r(static_cast<Index>(e.owned.size()));
  for (size_t k = 0; k < e.owned.size(); ++k) {
    const Index dof = e.owned[k];
    const double u = u_stencil(stencil_position(e, dof));
    const double upwind =
        dof == 0 ? model.inflow() : u_stencil(stencil_position(e, dof - 1));
    r(static_cast<Index>(k)) =
        model.mass_diag()(dof) * bdf_combination(td, u, dof) / td.dt +
        model.flux(u) - model.flux(upwind) - g(dof);
  }
  return r;
}

Matrix entity_jacobian(const SemiDiscreteModel& model, const MeshEntity& e,
                       const Vector& u_stencil, const TimeDiscretization& td) {
  check_history(td);
  if (u_stencil.size() != static_cast<Index>(e.stencil.size()))
    throw InvalidArgument("entity_jacobian: stencil state length mismatch");
  check_finite(u_stencil);
  const double lead = td.leading_coefficient();
  Matrix j = Matrix::Zero(static_cast<Index>(e.owned.size()),
                          static_cast<Index>(e.stencil.size()));
  for (size_t k = 0; k < e.owned.size(); ++k) {
    const Index dof = e.owned[k];
    const Index pos = stencil_position(e, dof);
    j(static_cast<Index>(k), pos) =
        lead * model.mass_diag()(dof) / td.dt + model.flux_derivative(u_stencil(pos));
    if (dof > 0) {
      const Index up = stencil_position(e, dof - 1);
      j(static_cast<Index>(k), up) = -model.flux_derivative(u_stencil(up));
    }
  }
  return j;
}

Matrix apply_step_jacobian(const SemiDiscreteModel& model, const Vector& u,
                           const TimeDiscretization& td, const Matrix& t_mat) {
  check_history(td);
  if (u.size() != model.dimension() || t_mat.rows() != model.dimension())
    throw InvalidArgument("apply_step_jacobian: dimension mismatch");
  const double lead = td.leading_coefficient();
  Matrix w(t_mat.rows(), t_mat.cols());
  for (Index i = 0; i < u.size(); ++i) {
    const double diag = lead * model.mass_diag()(i) / td.dt + model.flux_derivative(u(i));
    w.row(i) = diag * t_mat.row(i);
    if (i > 0) w.row(i) -= model.flux_derivative(u(i - 1)) * t_mat.row(i - 1);
  }
  return w;
}

namespace {

/// One implicit step: Newton on discrete_residual with the exact
/// lower-bidiagonal Jacobian, solved by forward substitution.
Vector newton_step(const SemiDiscreteModel& model, const TimeDiscretization& td,
                   double t_new, const NewtonConfig& cfg, int step_index,
                   int* iterations_out) {
  Vector u = td.history[0];
  Vector r = discrete_residual(model, u, t_new, td);
  const double r0 = r.norm();
  const double lead = td.leading_coefficient();
  int it = 0;
  for (; it < cfg.max_iters; ++it) {
    if (r.norm() <= cfg.tol_abs + cfg.tol_rel * r0) break;
    Vector delta(u.size());
    double below = 0.0;  // subdiagonal contribution carried into row i
    for (Index i = 0; i < u.size(); ++i) {
      const double diag = lead * model.mass_diag()(i) / td.dt + model.flux_derivative(u(i));
      if (diag == 0.0) throw NumericError("singular step Jacobian");
      delta(i) = (-r(i) - below) / diag;
      below = -model.flux_derivative(u(i)) * delta(i);
    }
    u += delta;
    check_finite(u);
    r = discrete_residual(model, u, t_new, td);
  }
  if (r.norm() > cfg.tol_abs + cfg.tol_rel * r0) {
    std::ostringstream msg;
    msg << "Newton did not converge at step " << step_index << " (t = " << t_new
        << "): residual " << r.norm() << " after " << it << " iterations";
    throw NumericError(msg.str());
  }
  if (iterations_out) *iterations_out = it;
  return u;
}

}  // namespace

SnapshotSet hdm_simulate(const SemiDiscreteModel& model, TimeScheme scheme,
                         double dt, double t_final, Index snapshot_stride,
                         const NewtonConfig& newton, const StepObserver& observer,
                         SimulationStats* stats) {
  if (!(dt > 0.0)) throw InvalidArgument("dt must be positive");
  if (t_final < 0.0) throw InvalidArgument("t_final must be nonnegative");
  if (snapshot_stride < 1) throw InvalidArgument("snapshot_stride must be >= 1");

  const auto steps = static_cast<Index>(std::llround(t_final / dt));
  SnapshotSet snaps;
  snaps.u_ref = model.initial_state();
  const Index recorded = steps / snapshot_stride + 1;
  snaps.states.resize(model.dimension(), recorded);
  snaps.times.resize(recorded);

  Vector u = model.initial_state();
  snaps.states.col(0) = u;
  snaps.times(0) = 0.0;
  if (observer) observer(0.0, u);

  TimeDiscretization td{scheme, dt, {u}};
  Index written = 1;
  for (Index m = 1; m <= steps; ++m) {
    const double t_new = static_cast<double>(m) * dt;
    int iters = 0;
    Vector u_new = newton_step(model, td, t_new, newton, static_cast<int>(m), &iters);
    if (stats) {
      stats->steps += 1;
      stats->max_newton_iterations = std::max(stats->max_newton_iterations, iters);
      stats->total_newton_iterations += iters;
    }
    td.history.insert(td.history.begin(), u_new);
    if (td.history.size() > 2) td.history.pop_back();
    u = std::move(u_new);
    if (m % snapshot_stride == 0) {
      snaps.states.col(written) = u;
      snaps.times(written) = t_new;
      ++written;
    }
    if (observer) observer(t_new, u);
  }
  return snaps;
}

}  // namespace qmor
