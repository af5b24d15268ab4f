#pragma once

#include <functional>
#include <vector>

#include "qmor/dense.hpp"
#include "qmor/snapshots.hpp"

namespace qmor {

/// One mesh entity (here: one finite-volume cell): the degrees of freedom it
/// owns and the stencil it reads (owned dofs plus upwind neighbors).
struct MeshEntity {
  Index id = 0;
  std::vector<Index> owned;    // strictly increasing, disjoint across entities
  std::vector<Index> stencil;  // strictly increasing, superset of owned
};

enum class TimeScheme { Bdf1, Bdf2 };

/// Implicit multistep time context for one step: the scheme, the step size,
/// and the one or two preceding states (history[0] is the most recent).  A
/// Bdf2 context with a single history state falls back to Bdf1, which is how
/// the first step after initialization is handled.
struct TimeDiscretization {
  TimeScheme scheme = TimeScheme::Bdf2;
  double dt = 0.0;
  std::vector<Vector> history;

  bool two_point_fallback() const {
    return scheme == TimeScheme::Bdf1 || history.size() < 2;
  }
  /// Coefficient of u_new in the backward-difference combination.
  double leading_coefficient() const { return two_point_fallback() ? 1.0 : 1.5; }
};

/// Semi-discrete conservation law  M du/dt + f(u) - g(t) = 0  on a 1D cell
/// mesh with first-order upwind interface fluxes and a fixed inflow state at
/// the left boundary.  The scalar flux and its derivative are supplied as
/// callables; the source may depend on time.
class SemiDiscreteModel {
 public:
  using ScalarFn = std::function<double(double)>;
  using SourceFn = std::function<Vector(double)>;

  SemiDiscreteModel(Vector mass_diag, ScalarFn flux, ScalarFn flux_derivative,
                    double inflow, SourceFn source, Vector initial_state);

  Index dimension() const { return mass_diag_.size(); }
  Index entity_count() const { return static_cast<Index>(entities_.size()); }
  const std::vector<MeshEntity>& entities() const { return entities_; }
  const MeshEntity& entity(Index e) const { return entities_[static_cast<size_t>(e)]; }
  const Vector& mass_diag() const { return mass_diag_; }
  const Vector& initial_state() const { return initial_state_; }
  double inflow() const { return inflow_; }

  double flux(double u) const { return flux_(u); }
  double flux_derivative(double u) const { return dflux_(u); }
  /// Net upwind flux balance per cell: flux(u_i) - flux(u_{i-1} or inflow).
  Vector flux_vector(const Vector& u) const;
  Vector source(double t) const { return source_(t); }

 private:
  Vector mass_diag_;
  ScalarFn flux_, dflux_;
  double inflow_;
  SourceFn source_;
  Vector initial_state_;
  std::vector<MeshEntity> entities_;
};

/// Benchmark problem: inviscid Burgers u_t + (u^2/2)_x = a e^{b x} on
/// x in [0, length], fixed inflow on the left, constant initial state.
struct BurgersParams {
  Index cells = 512;
  double length = 100.0;
  double inflow = 4.3;
  double initial_value = 1.0;
  double source_amplitude = 0.02;
  double source_rate = 0.02;
};
SemiDiscreteModel make_burgers_model(const BurgersParams& params = {});

/// Fully implicit residual of one time step:
///   r(u_new) = M (bdf combination)/dt + f(u_new) - g(t_new)
/// with combination u_new - u_m (two-point) or (3 u_new - 4 u_m + u_{m-1})/2.
Vector discrete_residual(const SemiDiscreteModel& model, const Vector& u_new,
                         double t_new, const TimeDiscretization& td);

/// Rows of discrete_residual owned by entity e, computed from the stencil-
/// local state only (u_stencil ordered like e.stencil).  History states in td
/// stay full-length and are indexed by global dof.
Vector entity_residual(const SemiDiscreteModel& model, const MeshEntity& e,
                       const Vector& u_stencil, double t, const TimeDiscretization& td);

/// Exact derivative of entity_residual with respect to u_stencil.
Matrix entity_jacobian(const SemiDiscreteModel& model, const MeshEntity& e,
                       const Vector& u_stencil, const TimeDiscretization& td);

/// Product J(u) * T of the step Jacobian with a tall matrix, assembled from
/// the lower-bidiagonal structure without forming J.
Matrix apply_step_jacobian(const SemiDiscreteModel& model, const Vector& u,
                           const TimeDiscretization& td, const Matrix& t_mat);

struct NewtonConfig {
  double tol_rel = 1e-8;
  double tol_abs = 1e-12;
  int max_iters = 25;
};

struct SimulationStats {
  int steps = 0;
  int max_newton_iterations = 0;
  long total_newton_iterations = 0;
};

/// Called after the initial state and after every accepted step.
using StepObserver = std::function<void(double t, const Vector& u)>;

/// Implicit time integration of the model from its initial state to t_final,
/// recording every snapshot_stride-th state (the initial state included) and
/// stamping the initial state as the reference.
SnapshotSet hdm_simulate(const SemiDiscreteModel& model, TimeScheme scheme,
                         double dt, double t_final, Index snapshot_stride,
                         const NewtonConfig& newton = {},
                         const StepObserver& observer = {},
                         SimulationStats* stats = nullptr);

}  // namespace qmor
