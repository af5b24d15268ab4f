#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "qmor/errors.hpp"
#include "qmor/hdm.hpp"

using qmor::Index;
using qmor::Matrix;
using qmor::TimeDiscretization;
using qmor::TimeScheme;
using qmor::Vector;

namespace {

Vector random_state(Index n, unsigned seed, double offset = 2.0) {
  std::mt19937 gen(seed);
  std::uniform_real_distribution<double> dist(-0.5, 0.5);
  Vector u(n);
  for (Index i = 0; i < n; ++i) u(i) = offset + dist(gen);
  return u;
}

TimeDiscretization make_td(TimeScheme scheme, double dt, std::vector<Vector> history) {
  TimeDiscretization td;
  td.scheme = scheme;
  td.dt = dt;
  td.history = std::move(history);
  return td;
}

/// Stacks the per-entity residual rows into a full vector.  The history in td
/// stays full-length; only the new state is restricted to each stencil.
Vector assemble_by_entity(const qmor::SemiDiscreteModel& model, const Vector& u,
                          double t, const TimeDiscretization& td) {
  Vector out(model.dimension());
  for (const qmor::MeshEntity& e : model.entities()) {
    Vector u_stencil(static_cast<Index>(e.stencil.size()));
    for (size_t k = 0; k < e.stencil.size(); ++k) u_stencil(static_cast<Index>(k)) = u(e.stencil[k]);
    const Vector r = qmor::entity_residual(model, e, u_stencil, t, td);
    for (size_t k = 0; k < e.owned.size(); ++k) out(e.owned[k]) = r(static_cast<Index>(k));
  }
  return out;
}

/// Semi-discrete benchmark with a manufactured time-dependent source chosen so
/// that u_i(t) = 2 + 0.5 sin(t + phi_i) solves the spatially discrete ODE
/// exactly; the remaining error is purely the time integrator's.
struct ManufacturedProblem {
  Index cells = 16;
  double dx = 1.0 / 16.0;
  double inflow = 2.0;

  double exact(Index i, double t) const {
    return 2.0 + 0.5 * std::sin(t + 0.3 * static_cast<double>(i + 1));
  }
  Vector exact_state(double t) const {
    Vector u(cells);
    for (Index i = 0; i < cells; ++i) u(i) = exact(i, t);
    return u;
  }
  qmor::SemiDiscreteModel model() const {
    const auto flux = [](double u) { return 0.5 * u * u; };
    const auto source = [this, flux](double t) {
      Vector g(cells);
      for (Index i = 0; i < cells; ++i) {
        const double dudt = 0.5 * std::cos(t + 0.3 * static_cast<double>(i + 1));
        const double left = i == 0 ? inflow : exact(i - 1, t);
        g(i) = dx * dudt + flux(exact(i, t)) - flux(left);
      }
      return g;
    };
    return qmor::SemiDiscreteModel(Vector::Constant(cells, dx), flux,
                                   [](double u) { return u; }, inflow, source,
                                   exact_state(0.0));
  }
};

double manufactured_terminal_error(double dt) {
  const ManufacturedProblem problem;
  const qmor::SemiDiscreteModel model = problem.model();
  const qmor::SnapshotSet snaps =
      qmor::hdm_simulate(model, TimeScheme::Bdf2, dt, 1.0, 1);
  const Index last = snaps.count() - 1;
  REQUIRE(snaps.times(last) == doctest::Approx(1.0));
  return (snaps.states.col(last) - problem.exact_state(1.0)).norm();
}

}  // namespace

TEST_CASE("time discretization: fallback and leading coefficients") {
  const Vector u = Vector::Ones(3);
  CHECK(make_td(TimeScheme::Bdf1, 0.1, {u}).leading_coefficient() == 1.0);
  CHECK(make_td(TimeScheme::Bdf2, 0.1, {u}).two_point_fallback());
  CHECK(make_td(TimeScheme::Bdf2, 0.1, {u, u}).leading_coefficient() == 1.5);
  CHECK_FALSE(make_td(TimeScheme::Bdf2, 0.1, {u, u}).two_point_fallback());
}

TEST_CASE("benchmark mesh: upwind stencils") {
  const qmor::SemiDiscreteModel model = qmor::make_burgers_model();
  CHECK(model.dimension() == 512);
  CHECK(model.entity_count() == 512);
  CHECK(model.entity(0).owned == std::vector<Index>{0});
  CHECK(model.entity(0).stencil == std::vector<Index>{0});
  CHECK(model.entity(5).owned == std::vector<Index>{5});
  CHECK(model.entity(5).stencil == std::vector<Index>{4, 5});
  CHECK(model.mass_diag()(0) == doctest::Approx(100.0 / 512.0));
}

TEST_CASE("discrete_residual: single-cell balance by hand") {
  // One cell of width dx: r = dx (u - u_m)/dt + u^2/2 - u_in^2/2 - g.
  const double dx = 0.25, dt = 0.1, u_in = 4.3, g0 = 0.7;
  qmor::SemiDiscreteModel model(
      Vector::Constant(1, dx), [](double u) { return 0.5 * u * u; },
      [](double u) { return u; }, u_in,
      [g0](double) { return Vector::Constant(1, g0); }, Vector::Constant(1, 1.0));
  const Vector u_m = Vector::Constant(1, 1.2);
  const Vector u = Vector::Constant(1, 1.5);
  const TimeDiscretization td = make_td(TimeScheme::Bdf1, dt, {u_m});
  const Vector r = qmor::discrete_residual(model, u, 0.3, td);
  const double expected =
      dx * (1.5 - 1.2) / dt + 0.5 * 1.5 * 1.5 - 0.5 * u_in * u_in - g0;
  CHECK(r(0) == doctest::Approx(expected));
}

TEST_CASE("discrete_residual: pure mass dynamics under both schemes") {
  const Index n = 4;
  const Vector mass = random_state(n, 3, 1.0);
  qmor::SemiDiscreteModel model(
      mass, [](double) { return 0.0; }, [](double) { return 0.0; }, 0.0,
      [n](double) { return Vector::Zero(n); }, Vector::Zero(n));
  const double dt = 0.2;
  const Vector u = random_state(n, 5), u_m = random_state(n, 7), u_mm = random_state(n, 11);

  const Vector r1 = qmor::discrete_residual(model, u, 1.0, make_td(TimeScheme::Bdf1, dt, {u_m}));
  CHECK((r1 - (mass.array() * (u - u_m).array() / dt).matrix()).norm() < 1e-14);

  const Vector r2 =
      qmor::discrete_residual(model, u, 1.0, make_td(TimeScheme::Bdf2, dt, {u_m, u_mm}));
  const Vector combo = 1.5 * u - 2.0 * u_m + 0.5 * u_mm;
  CHECK((r2 - (mass.array() * combo.array() / dt).matrix()).norm() < 1e-14);

  // Bdf2 with a single history state falls back to the two-point formula.
  const Vector r_fb =
      qmor::discrete_residual(model, u, 1.0, make_td(TimeScheme::Bdf2, dt, {u_m}));
  CHECK((r_fb - r1).norm() < 1e-14);
}

TEST_CASE("entity assembly reproduces the global residual") {
  qmor::BurgersParams params;
  params.cells = 64;
  const qmor::SemiDiscreteModel model = qmor::make_burgers_model(params);
  const Vector u = random_state(64, 13), u_m = random_state(64, 17),
               u_mm = random_state(64, 19);
  for (const TimeScheme scheme : {TimeScheme::Bdf1, TimeScheme::Bdf2}) {
    const TimeDiscretization td = make_td(scheme, 0.05, {u_m, u_mm});
    const Vector global = qmor::discrete_residual(model, u, 2.5, td);
    const Vector stacked = assemble_by_entity(model, u, 2.5, td);
    CHECK((global - stacked).norm() < 1e-12 * (1.0 + global.norm()));
  }
}

TEST_CASE("entity_jacobian matches finite differences") {
  qmor::BurgersParams params;
  params.cells = 32;
  const qmor::SemiDiscreteModel model = qmor::make_burgers_model(params);
  const Vector u_m = random_state(32, 23);
  const TimeDiscretization td = make_td(TimeScheme::Bdf1, 0.05, {u_m});
  const double h = 1e-6;
  for (const Index e : {Index{0}, Index{1}, Index{17}, Index{31}}) {
    const qmor::MeshEntity& entity = model.entity(e);
    Vector u_stencil = random_state(static_cast<Index>(entity.stencil.size()), 29 + static_cast<unsigned>(e));
    const Matrix jac = qmor::entity_jacobian(model, entity, u_stencil, td);
    for (Index c = 0; c < u_stencil.size(); ++c) {
      Vector up = u_stencil, dn = u_stencil;
      up(c) += h;
      dn(c) -= h;
      const Vector diff = (qmor::entity_residual(model, entity, up, 1.0, td) -
                           qmor::entity_residual(model, entity, dn, 1.0, td)) /
                          (2.0 * h);
      CHECK((jac.col(c) - diff).norm() < 1e-6 * (1.0 + jac.col(c).norm()));
    }
  }
}

TEST_CASE("apply_step_jacobian matches global finite differences") {
  qmor::BurgersParams params;
  params.cells = 24;
  const qmor::SemiDiscreteModel model = qmor::make_burgers_model(params);
  const Vector u_m = random_state(24, 31), u_mm = random_state(24, 37);
  const TimeDiscretization td = make_td(TimeScheme::Bdf2, 0.05, {u_m, u_mm});
  const double h = 1e-6;

  std::mt19937 gen(41);
  for (int trial = 0; trial < 10; ++trial) {
    const Vector u = random_state(24, gen());
    const Matrix jac = qmor::apply_step_jacobian(model, u, td, Matrix::Identity(24, 24));
    Matrix fd(24, 24);
    for (Index c = 0; c < 24; ++c) {
      Vector up = u, dn = u;
      up(c) += h;
      dn(c) -= h;
      fd.col(c) = (qmor::discrete_residual(model, up, 1.0, td) -
                   qmor::discrete_residual(model, dn, 1.0, td)) /
                  (2.0 * h);
    }
    CHECK((jac - fd).norm() < 1e-5 * (1.0 + fd.norm()));
  }
}

TEST_CASE("apply_step_jacobian: constant-coefficient advection structure") {
  const Index n = 6;
  const double dx = 0.5, dt = 0.1, speed = 1.7;
  qmor::SemiDiscreteModel model(
      Vector::Constant(n, dx), [speed](double u) { return speed * u; },
      [speed](double) { return speed; }, 1.0,
      [n](double) { return Vector::Zero(n); }, Vector::Zero(n));
  const TimeDiscretization td = make_td(TimeScheme::Bdf1, dt, {Vector::Zero(n)});
  const Matrix jac =
      qmor::apply_step_jacobian(model, random_state(n, 43), td, Matrix::Identity(n, n));
  Matrix expected = Matrix::Zero(n, n);
  for (Index i = 0; i < n; ++i) {
    expected(i, i) = dx / dt + speed;
    if (i > 0) expected(i, i - 1) = -speed;
  }
  CHECK((jac - expected).norm() < 1e-12);
}

TEST_CASE("apply_step_jacobian applies to tall matrices consistently") {
  qmor::BurgersParams params;
  params.cells = 20;
  const qmor::SemiDiscreteModel model = qmor::make_burgers_model(params);
  const TimeDiscretization td =
      make_td(TimeScheme::Bdf2, 0.05, {random_state(20, 47), random_state(20, 53)});
  const Vector u = random_state(20, 59);
  const Matrix t_mat = Matrix::Random(20, 3);
  const Matrix full = qmor::apply_step_jacobian(model, u, td, Matrix::Identity(20, 20));
  const Matrix applied = qmor::apply_step_jacobian(model, u, td, t_mat);
  CHECK((applied - full * t_mat).norm() < 1e-12 * (1.0 + applied.norm()));
}

TEST_CASE("discrete_residual rejects non-finite states") {
  const qmor::SemiDiscreteModel model = qmor::make_burgers_model();
  Vector u = Vector::Ones(512);
  u(3) = std::numeric_limits<double>::quiet_NaN();
  const TimeDiscretization td = make_td(TimeScheme::Bdf1, 0.05, {Vector::Ones(512)});
  CHECK_THROWS_AS(qmor::discrete_residual(model, u, 1.0, td), qmor::NumericError);
}

TEST_CASE("hdm_simulate: source-free uniform flow is preserved exactly") {
  qmor::BurgersParams params;
  params.cells = 16;
  params.inflow = 1.0;
  params.initial_value = 1.0;
  params.source_amplitude = 0.0;
  const qmor::SemiDiscreteModel model = qmor::make_burgers_model(params);
  const qmor::SnapshotSet snaps =
      qmor::hdm_simulate(model, TimeScheme::Bdf2, 0.1, 1.0, 1);
  CHECK(snaps.count() == 11);
  for (Index l = 0; l < snaps.count(); ++l)
    CHECK((snaps.states.col(l) - Vector::Ones(16)).norm() < 1e-12);
}

TEST_CASE("hdm_simulate: advection front moves at the flux speed") {
  const Index n = 32;
  const double dx = 10.0 / n;
  qmor::SemiDiscreteModel model(
      Vector::Constant(n, dx), [](double u) { return u; }, [](double) { return 1.0; },
      2.0, [n](double) { return Vector::Zero(n); }, Vector::Zero(n));
  const qmor::SnapshotSet snaps =
      qmor::hdm_simulate(model, TimeScheme::Bdf2, 0.05, 5.0, 100);
  const Vector u_final = snaps.states.col(snaps.count() - 1);
  // After t = 5 the inflow front sits near x = 5: converged well behind it,
  // and ahead of it only the smeared first-order tail remains.
  CHECK(u_final(3) == doctest::Approx(2.0).epsilon(1e-3));  // x ~ 1.1
  CHECK(std::abs(u_final(n - 2)) < 5e-3);                   // x ~ 9.5
}

TEST_CASE("hdm_simulate: benchmark run is stable and well-conditioned") {
  const qmor::SemiDiscreteModel model = qmor::make_burgers_model();
  qmor::SimulationStats stats;
  const qmor::SnapshotSet snaps = qmor::hdm_simulate(
      model, TimeScheme::Bdf2, 0.05, 25.0, 1, qmor::NewtonConfig{}, {}, &stats);
  CHECK(snaps.count() == 501);
  CHECK(stats.steps == 500);
  CHECK(stats.max_newton_iterations <= 12);
  CHECK((snaps.states.col(0) - Vector::Ones(512)).norm() == 0.0);
  CHECK((snaps.u_ref - snaps.states.col(0)).norm() == 0.0);
  CHECK(snaps.states.allFinite());
  for (Index l = 1; l < snaps.count(); ++l) CHECK(snaps.times(l) > snaps.times(l - 1));
  // The inflow feeds a rightward-moving profile: the final state is far from
  // the initial one and bounded by the inflow value plus source growth.
  CHECK((snaps.states.col(500) - snaps.states.col(0)).norm() > 1.0);
  CHECK(snaps.states.maxCoeff() < 10.0);
}

TEST_CASE("hdm_simulate: snapshot stride subsamples but keeps the initial state") {
  qmor::BurgersParams params;
  params.cells = 8;
  const qmor::SemiDiscreteModel model = qmor::make_burgers_model(params);
  const qmor::SnapshotSet every = qmor::hdm_simulate(model, TimeScheme::Bdf1, 0.1, 1.0, 1);
  const qmor::SnapshotSet strided = qmor::hdm_simulate(model, TimeScheme::Bdf1, 0.1, 1.0, 5);
  CHECK(strided.count() == 3);  // t = 0, 0.5, 1.0
  CHECK((strided.states.col(0) - every.states.col(0)).norm() == 0.0);
  CHECK((strided.states.col(1) - every.states.col(5)).norm() == 0.0);
  CHECK((strided.states.col(2) - every.states.col(10)).norm() == 0.0);
}

TEST_CASE("hdm_simulate: observer sees every accepted step") {
  qmor::BurgersParams params;
  params.cells = 8;
  const qmor::SemiDiscreteModel model = qmor::make_burgers_model(params);
  std::vector<double> seen;
  qmor::hdm_simulate(model, TimeScheme::Bdf2, 0.25, 1.0, 2, qmor::NewtonConfig{},
                     [&](double t, const Vector& u) {
                       seen.push_back(t);
                       CHECK(u.size() == 8);
                     });
  REQUIRE(seen.size() == 5);  // initial state + 4 steps
  CHECK(seen.front() == 0.0);
  CHECK(seen.back() == doctest::Approx(1.0));
}

TEST_CASE("hdm_simulate: Newton failure names the step") {
  const qmor::SemiDiscreteModel model = qmor::make_burgers_model();
  qmor::NewtonConfig newton;
  newton.tol_rel = 0.0;
  newton.tol_abs = 0.0;
  newton.max_iters = 1;
  CHECK_THROWS_WITH_AS(
      qmor::hdm_simulate(model, TimeScheme::Bdf2, 0.05, 0.1, 1, newton),
      doctest::Contains("Newton did not converge at step"), qmor::NumericError);
}

TEST_CASE("hdm_simulate: second-order convergence on a manufactured solution") {
  const double coarse = manufactured_terminal_error(0.05);
  const double fine = manufactured_terminal_error(0.025);
  const double ratio = coarse / fine;
  CHECK(ratio > 3.0);
  CHECK(ratio < 5.0);
}

TEST_CASE("hdm_simulate: rejects bad stride and step") {
  const qmor::SemiDiscreteModel model = qmor::make_burgers_model();
  CHECK_THROWS_AS(qmor::hdm_simulate(model, TimeScheme::Bdf2, 0.05, 1.0, 0),
                  qmor::InvalidArgument);
  CHECK_THROWS_AS(qmor::hdm_simulate(model, TimeScheme::Bdf2, 0.0, 1.0, 1),
                  qmor::InvalidArgument);
  CHECK_THROWS_AS(qmor::hdm_simulate(model, TimeScheme::Bdf2, 0.05, -1.0, 1),
                  qmor::InvalidArgument);
}
