#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>

#include "qmor/config.hpp"
#include "qmor/dense.hpp"
#include "qmor/ecsw.hpp"
#include "qmor/errors.hpp"
#include "qmor/hdm.hpp"
#include "qmor/manifold.hpp"
#include "qmor/rom.hpp"
#include "qmor/snapshots.hpp"

namespace py = pybind11;

PYBIND11_MODULE(qmor, m) {
  m.doc() = "Projection-based model reduction: manifolds, hyperreduction, reduced models";

  py::register_exception<qmor::InvalidArgument>(m, "InvalidArgumentError", PyExc_ValueError);
  py::register_exception<qmor::NumericError>(m, "NumericError", PyExc_RuntimeError);

  // -- dense kernels --------------------------------------------------------
  py::class_<qmor::ThinSvd>(m, "ThinSvd")
      .def_readonly("left_vectors", &qmor::ThinSvd::left_vectors)
      .def_readonly("singular_values", &qmor::ThinSvd::singular_values)
      .def_readonly("right_vectors", &qmor::ThinSvd::right_vectors)
      .def("rank", &qmor::ThinSvd::rank);
  m.def("thin_svd", &qmor::thin_svd, py::arg("matrix"));
  m.def("tikhonov_row_solve", &qmor::tikhonov_row_solve, py::arg("svd"), py::arg("rhs"),
        py::arg("alpha"));
  m.def("gcv_score", &qmor::gcv_score, py::arg("svd"), py::arg("rhs"), py::arg("alpha"));

  py::class_<qmor::NnlsSolution>(m, "NnlsSolution")
      .def_readonly("size", &qmor::NnlsSolution::size)
      .def_readonly("weights", &qmor::NnlsSolution::weights)
      .def_readonly("residual_norm", &qmor::NnlsSolution::residual_norm)
      .def_readonly("iterations", &qmor::NnlsSolution::iterations)
      .def("support_size", &qmor::NnlsSolution::support_size)
      .def("dense", &qmor::NnlsSolution::dense);
  m.def("nnls_early_stop", &qmor::nnls_early_stop, py::arg("c"), py::arg("d"),
        py::arg("tau"), py::arg("max_passes") = 0);

  // -- snapshots and bases --------------------------------------------------
  py::class_<qmor::SnapshotSet>(m, "SnapshotSet")
      .def(py::init<>())
      .def_readwrite("states", &qmor::SnapshotSet::states)
      .def_readwrite("times", &qmor::SnapshotSet::times)
      .def_readwrite("u_ref", &qmor::SnapshotSet::u_ref)
      .def("dimension", &qmor::SnapshotSet::dimension)
      .def("count", &qmor::SnapshotSet::count);
  py::class_<qmor::ReducedBasis>(m, "ReducedBasis")
      .def_readonly("basis", &qmor::ReducedBasis::basis)
      .def_readonly("retained_singular_values", &qmor::ReducedBasis::retained_singular_values)
      .def_readonly("discarded_energy", &qmor::ReducedBasis::discarded_energy);
  m.def("pod_basis", &qmor::pod_basis, py::arg("snapshots"), py::arg("epsilon"));
  m.def("save_snapshots", &qmor::save_snapshots, py::arg("snapshots"), py::arg("path"));
  m.def("load_snapshots", &qmor::load_snapshots, py::arg("path"));

  // -- manifolds ------------------------------------------------------------
  m.def("quad_feature_count", &qmor::quad_feature_count, py::arg("n"));
  m.def("unique_kron", &qmor::unique_kron, py::arg("q"));
  m.def("unique_kron_tangent", &qmor::unique_kron_tangent, py::arg("q"));

  py::class_<qmor::DimensionChoice>(m, "DimensionChoice")
      .def_readonly("n_quad_raw", &qmor::DimensionChoice::n_quad_raw)
      .def_readonly("n_quad", &qmor::DimensionChoice::n_quad)
      .def_readonly("snapshot_cap", &qmor::DimensionChoice::snapshot_cap)
      .def_readonly("n", &qmor::DimensionChoice::n);
  m.def("dimension_heuristic", &qmor::dimension_heuristic, py::arg("n_train"),
        py::arg("zeta"), py::arg("n_snapshots"));

  py::class_<qmor::BuildRecord>(m, "BuildRecord")
      .def(py::init<>())
      .def_readwrite("epsilon_s", &qmor::BuildRecord::epsilon_s)
      .def_readwrite("zeta", &qmor::BuildRecord::zeta)
      .def_readwrite("omega", &qmor::BuildRecord::omega)
      .def_readwrite("n_train", &qmor::BuildRecord::n_train)
      .def_readwrite("n_quad_raw", &qmor::BuildRecord::n_quad_raw)
      .def_readwrite("n_quad", &qmor::BuildRecord::n_quad)
      .def_readwrite("alpha_star", &qmor::BuildRecord::alpha_star)
      .def_readwrite("sigma_max", &qmor::BuildRecord::sigma_max)
      .def_readwrite("sigma_min", &qmor::BuildRecord::sigma_min)
      .def_readwrite("discarded_energy", &qmor::BuildRecord::discarded_energy);

  py::class_<qmor::Manifold>(m, "Manifold")
      .def_static("affine", &qmor::Manifold::affine, py::arg("basis"), py::arg("u_ref"),
                  py::arg("record") = qmor::BuildRecord{})
      .def_static("quadratic", &qmor::Manifold::quadratic, py::arg("basis"),
                  py::arg("correction"), py::arg("u_ref"), py::arg("record"))
      .def("is_quadratic", &qmor::Manifold::is_quadratic)
      .def("full_dimension", &qmor::Manifold::full_dimension)
      .def("reduced_dimension", &qmor::Manifold::reduced_dimension)
      .def("basis", &qmor::Manifold::basis)
      .def("correction", &qmor::Manifold::correction)
      .def("reference", &qmor::Manifold::reference)
      .def("record", &qmor::Manifold::record)
      .def("evaluate", &qmor::Manifold::evaluate, py::arg("q"))
      .def("tangent", &qmor::Manifold::tangent, py::arg("q"))
      .def(
          "invert",
          [](const qmor::Manifold& self, const qmor::Vector& u) {
            return self.invert(u);
          },
          py::arg("u"));
  m.def(
      "build_quadratic",
      [](const qmor::SnapshotSet& snaps, const qmor::Matrix& basis, double omega,
         std::optional<double> alpha_star, unsigned threads) {
        qmor::BuildOptions opts;
        opts.omega = omega;
        opts.alpha_star = alpha_star;
        opts.threads = threads;
        return qmor::build_quadratic(snaps, basis, opts);
      },
      py::arg("snapshots"), py::arg("basis"), py::arg("omega") = 0.1,
      py::arg("alpha_star") = std::nullopt, py::arg("threads") = 0u);
  m.def("save_manifold", &qmor::save_manifold, py::arg("manifold"), py::arg("path"));
  m.def("load_manifold", &qmor::load_manifold, py::arg("path"));

  // -- full-order model -----------------------------------------------------
  py::enum_<qmor::TimeScheme>(m, "TimeScheme")
      .value("BDF1", qmor::TimeScheme::Bdf1)
      .value("BDF2", qmor::TimeScheme::Bdf2);

  py::class_<qmor::BurgersParams>(m, "BurgersParams")
      .def(py::init<>())
      .def_readwrite("cells", &qmor::BurgersParams::cells)
      .def_readwrite("length", &qmor::BurgersParams::length)
      .def_readwrite("inflow", &qmor::BurgersParams::inflow)
      .def_readwrite("initial_value", &qmor::BurgersParams::initial_value)
      .def_readwrite("source_amplitude", &qmor::BurgersParams::source_amplitude)
      .def_readwrite("source_rate", &qmor::BurgersParams::source_rate);

  py::class_<qmor::SemiDiscreteModel>(m, "SemiDiscreteModel")
      .def("dimension", &qmor::SemiDiscreteModel::dimension)
      .def("entity_count", &qmor::SemiDiscreteModel::entity_count)
      .def("mass_diag", &qmor::SemiDiscreteModel::mass_diag)
      .def("initial_state", &qmor::SemiDiscreteModel::initial_state);
  m.def("make_burgers_model", &qmor::make_burgers_model,
        py::arg("params") = qmor::BurgersParams{});
  m.def(
      "hdm_simulate",
      [](const qmor::SemiDiscreteModel& model, qmor::TimeScheme scheme, double dt,
         double t_final, qmor::Index stride) {
        return qmor::hdm_simulate(model, scheme, dt, t_final, stride);
      },
      py::arg("model"), py::arg("scheme"), py::arg("dt"), py::arg("t_final"),
      py::arg("snapshot_stride") = 1);

  // -- hyperreduction -------------------------------------------------------
  py::class_<qmor::TrainingCoordinates>(m, "TrainingCoordinates")
      .def_readonly("coordinates", &qmor::TrainingCoordinates::coordinates)
      .def_readonly("snapshot_indices", &qmor::TrainingCoordinates::snapshot_indices)
      .def_readonly("times", &qmor::TrainingCoordinates::times);
  m.def("training_coordinates", &qmor::training_coordinates, py::arg("manifold"),
        py::arg("snapshots"), py::arg("stride") = 1);

  py::class_<qmor::TrainingSystem>(m, "TrainingSystem")
      .def_readonly("c", &qmor::TrainingSystem::c)
      .def_readonly("d", &qmor::TrainingSystem::d)
      .def_readonly("reduced_dimension", &qmor::TrainingSystem::reduced_dimension);
  m.def("build_training_system", &qmor::build_training_system, py::arg("model"),
        py::arg("manifold"), py::arg("coordinates"), py::arg("scheme"));

  py::class_<qmor::ReducedMesh>(m, "ReducedMesh")
      .def_readonly("weights", &qmor::ReducedMesh::weights)
      .def_readonly("selected", &qmor::ReducedMesh::selected)
      .def_readonly("augmented", &qmor::ReducedMesh::augmented)
      .def_readonly("entity_count", &qmor::ReducedMesh::entity_count)
      .def_readonly("reduced_dimension", &qmor::ReducedMesh::reduced_dimension)
      .def_readonly("tau", &qmor::ReducedMesh::tau)
      .def_readonly("achieved_ratio", &qmor::ReducedMesh::achieved_ratio)
      .def("size", &qmor::ReducedMesh::size);
  m.def("train_reduced_mesh", &qmor::train_reduced_mesh, py::arg("system"),
        py::arg("model"), py::arg("tau"));
  m.def("save_reduced_mesh", &qmor::save_reduced_mesh, py::arg("mesh"), py::arg("path"));
  m.def("load_reduced_mesh", &qmor::load_reduced_mesh, py::arg("path"));

  // -- reduced-order models -------------------------------------------------
  py::class_<qmor::RomTrajectory>(m, "RomTrajectory")
      .def_readonly("coordinates", &qmor::RomTrajectory::coordinates)
      .def_readonly("times", &qmor::RomTrajectory::times)
      .def_readonly("qoi", &qmor::RomTrajectory::qoi)
      .def_readonly("qoi_names", &qmor::RomTrajectory::qoi_names);
  m.def(
      "run_rom",
      [](const qmor::SemiDiscreteModel& model, const qmor::Manifold& manifold,
         std::optional<qmor::ReducedMesh> mesh, qmor::TimeScheme scheme, double dt,
         double t_final, const std::vector<qmor::Index>& probes) {
        return qmor::run_rom(model, manifold, mesh, scheme, dt, t_final, probes);
      },
      py::arg("model"), py::arg("manifold"), py::arg("mesh") = std::nullopt,
      py::arg("scheme") = qmor::TimeScheme::Bdf2, py::arg("dt") = 0.05,
      py::arg("t_final") = 25.0, py::arg("probes") = std::vector<qmor::Index>{});

  m.def("relative_error", &qmor::relative_error, py::arg("approx"), py::arg("reference"));
}
