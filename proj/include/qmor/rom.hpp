#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "qmor/dense.hpp"
#include "qmor/ecsw.hpp"
#include "qmor/hdm.hpp"
#include "qmor/manifold.hpp"

namespace qmor {

struct LspgConfig {
  double gn_tol_rel = 1e-8;
  double gn_tol_abs = 1e-12;
  int gn_max_iters = 25;
};

struct LspgStepResult {
  Vector q;
  int iterations = 0;
};

/// One implicit ROM step: Gauss-Newton on  min_q |r(evaluate(q), t_new)|_2
/// starting from q_m.  Each iterate forms W = J * tangent(q) and solves the
/// least-squares update through an orthogonal factorization of W.  The BDF
/// history in td holds full-order (reconstructed) states.
LspgStepResult lspg_step(const SemiDiscreteModel& model, const Manifold& manifold,
                         const Vector& q_m, const TimeDiscretization& td,
                         double t_new, const LspgConfig& cfg = {});

/// The same iteration with every contraction restricted to the weighted
/// reduced mesh: G = sum_e xi_e (J_e T_e+)^T (J_e T_e+), b = -sum_e ... r_e,
/// update solved from the n x n normal equations G dq = b.  With unit weights
/// on the full mesh this reproduces lspg_step.
LspgStepResult hyper_lspg_step(const SemiDiscreteModel& model, const Manifold& manifold,
                               const Vector& q_m, const TimeDiscretization& td,
                               double t_new, const ReducedMesh& mesh,
                               const LspgConfig& cfg = {});

/// Reduced trajectory: coordinates per accepted step (initial state included)
/// plus quantity-of-interest histories (probe values and the mass-weighted
/// domain integral).
struct RomTrajectory {
  Matrix coordinates;              // n x N_t
  Vector times;                    // N_t
  Matrix qoi;                      // N_t x (probes + 1), last column integral
  std::vector<std::string> qoi_names;
};

/// Called after the initial state and after every accepted step with the
/// reconstructed full state.
using RomStepObserver = std::function<void(double t, const Vector& q, const Vector& u)>;

struct RomStats {
  int steps = 0;
  int max_gn_iterations = 0;
  long total_gn_iterations = 0;
};

/// Integrates the ROM from invert(u0) to t_final with the model's time
/// discretization, hyperreduced when a mesh is supplied.  Step failures are
/// rethrown with the failing time attached.
RomTrajectory run_rom(const SemiDiscreteModel& model, const Manifold& manifold,
                      const std::optional<ReducedMesh>& mesh, TimeScheme scheme,
                      double dt, double t_final, const std::vector<Index>& probes,
                      const LspgConfig& cfg = {}, const RomStepObserver& observer = {},
                      RomStats* stats = nullptr);

/// sqrt(sum_t (approx - ref)^2) / sqrt(sum_t ref^2) over aligned samples.
double relative_error(const Vector& approx, const Vector& reference);

}  // namespace qmor
