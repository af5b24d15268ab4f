#include <CLI11.hpp>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "qmor/config.hpp"
#include "qmor/ecsw.hpp"
#include "qmor/errors.hpp"
#include "qmor/hdm.hpp"
#include "qmor/manifold.hpp"
#include "qmor/rom.hpp"
#include "qmor/snapshots.hpp"

namespace {

using qmor::Index;
using qmor::Matrix;
using qmor::Vector;

double seconds_since(const std::chrono::steady_clock::time_point& start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::string stem_of(const std::string& path) {
  return std::filesystem::path(path).stem().string();
}

// ---------------------------------------------------------------------------
// Trajectory CSV: "time,probe_<c1>,probe_<c2>,integral_qoi" rows in '%.17g'.

struct TrajectoryTable {
  std::vector<std::string> columns;  // QoI names, time excluded
  Vector times;
  Matrix values;  // rows = samples, cols = QoIs
};

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_csv_header(std::ostream& out, const std::vector<std::string>& columns) {
  out << "time";
  for (const auto& c : columns) out << ',' << c;
  out << '\n';
}

void write_csv_row(std::ostream& out, double t, const std::vector<double>& values) {
  out << format_double(t);
  for (const double v : values) out << ',' << format_double(v);
  out << '\n';
}

TrajectoryTable read_trajectory_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw qmor::InvalidArgument("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw qmor::InvalidArgument(path + ": empty file");
  while (!line.empty() && (line.back() == '\r' || line.back() == '\n')) line.pop_back();

  TrajectoryTable table;
  std::istringstream header(line);
  std::string cell;
  bool first = true;
  while (std::getline(header, cell, ',')) {
    if (first) {
      if (cell != "time")
        throw qmor::InvalidArgument(path + ": first column must be \"time\"");
      first = false;
    } else {
      table.columns.push_back(cell);
    }
  }
  if (first) throw qmor::InvalidArgument(path + ": missing header");

  std::vector<std::vector<double>> rows;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    while (!line.empty() && (line.back() == '\r' || line.back() == '\n')) line.pop_back();
    if (line.empty()) continue;
    std::istringstream row(line);
    std::vector<double> values;
    while (std::getline(row, cell, ',')) {
      try {
        std::size_t used = 0;
        values.push_back(std::stod(cell, &used));
        if (used != cell.size()) throw std::invalid_argument(cell);
      } catch (const std::exception&) {
        throw qmor::InvalidArgument(path + ":" + std::to_string(line_no) +
                                    ": cannot parse \"" + cell + "\"");
      }
    }
    if (values.size() != table.columns.size() + 1)
      throw qmor::InvalidArgument(path + ":" + std::to_string(line_no) +
                                  ": wrong column count");
    rows.push_back(std::move(values));
  }
  if (rows.empty()) throw qmor::InvalidArgument(path + ": no samples");

  table.times.resize(static_cast<Index>(rows.size()));
  table.values.resize(static_cast<Index>(rows.size()),
                      static_cast<Index>(table.columns.size()));
  for (size_t r = 0; r < rows.size(); ++r) {
    table.times(static_cast<Index>(r)) = rows[r][0];
    for (size_t c = 0; c + 1 < rows[r].size(); ++c)
      table.values(static_cast<Index>(r), static_cast<Index>(c)) = rows[r][c + 1];
  }
  return table;
}

// ---------------------------------------------------------------------------
// Subcommand bodies.  Each returns normally on success; qmor exceptions map
// to exit codes in main.

struct CommonArgs {
  std::string config_path;
  qmor::PipelineConfig cfg;
  void load() {
    if (!config_path.empty()) cfg = qmor::load_pipeline_config(config_path);
  }
};

int run_hdm(CommonArgs& common, const std::string& out_path) {
  common.load();
  const qmor::PipelineConfig& cfg = common.cfg;
  const qmor::SemiDiscreteModel model = qmor::make_burgers_model(cfg.burgers());

  std::ofstream traj(cfg.trajectory_path);
  if (!traj) throw qmor::InvalidArgument("cannot open " + cfg.trajectory_path + " for writing");
  write_csv_header(traj, {"probe_" + std::to_string(cfg.probe1),
                          "probe_" + std::to_string(cfg.probe2), "integral_qoi"});

  qmor::SimulationStats stats;
  const auto start = std::chrono::steady_clock::now();
  const qmor::SnapshotSet snaps = qmor::hdm_simulate(
      model, cfg.scheme, cfg.dt, cfg.t_final, cfg.snapshot_stride, cfg.newton(),
      [&](double t, const Vector& u) {
        write_csv_row(traj, t,
                      {u(cfg.probe1), u(cfg.probe2), model.mass_diag().dot(u)});
      },
      &stats);
  const double elapsed = seconds_since(start);

  qmor::save_snapshots(snaps, out_path);
  std::ofstream timing(cfg.timing_path);
  if (timing) timing << "hdm_wall_seconds = " << format_double(elapsed) << '\n';

  std::cout << "simulated " << stats.steps << " steps in " << format_double(elapsed)
            << " s (max Newton iterations " << stats.max_newton_iterations << ")\n"
            << "wrote " << snaps.count() << " snapshots to " << out_path << '\n'
            << "wrote trajectory to " << cfg.trajectory_path << '\n';
  return 0;
}

int run_build(CommonArgs& common, bool quadratic, const std::string& snaps_path,
              const std::string& out_path, double alpha_override) {
  common.load();
  qmor::PipelineConfig cfg = common.cfg;
  if (alpha_override >= 0.0) cfg.alpha_star = alpha_override;

  const qmor::SnapshotSet snaps = qmor::load_snapshots(snaps_path);
  const qmor::ReducedBasis pod = qmor::pod_basis(snaps, cfg.epsilon_s);
  const Index n_train = pod.basis.cols();

  if (!quadratic) {
    qmor::BuildRecord record;
    record.epsilon_s = cfg.epsilon_s;
    record.n_train = n_train;
    record.discarded_energy = pod.discarded_energy;
    const qmor::Manifold manifold =
        qmor::Manifold::affine(pod.basis, snaps.u_ref, record);
    qmor::save_manifold(manifold, out_path);
    std::cout << "affine manifold: n = " << n_train << " (discarded energy "
              << format_double(pod.discarded_energy) << ")\n"
              << "wrote " << out_path << '\n';
    return 0;
  }

  const qmor::DimensionChoice dims =
      qmor::dimension_heuristic(n_train, cfg.zeta, snaps.count());
  qmor::BuildOptions opts;
  opts.omega = cfg.omega;
  if (cfg.alpha_star >= 0.0) opts.alpha_star = cfg.alpha_star;
  opts.seed.epsilon_s = cfg.epsilon_s;
  opts.seed.zeta = cfg.zeta;
  opts.seed.n_train = n_train;
  opts.seed.n_quad_raw = dims.n_quad_raw;
  opts.seed.n_quad = dims.n_quad;
  opts.seed.discarded_energy = pod.discarded_energy;

  const Matrix basis = pod.basis.leftCols(dims.n);
  const qmor::Manifold manifold = qmor::build_quadratic(snaps, basis, opts);
  qmor::save_manifold(manifold, out_path);

  const qmor::BuildRecord& rec = manifold.record();
  std::cout << "n_tra = " << n_train << ", n_qua' = " << dims.n_quad_raw
            << ", n_qua = " << dims.n_quad << ", n = " << dims.n << '\n';
  if (cfg.alpha_star >= 0.0)
    std::cout << "alpha* override = " << format_double(rec.alpha_star) << '\n';
  std::cout << "alpha*/sigma_1 = " << format_double(rec.alpha_star / rec.sigma_max)
            << '\n'
            << "wrote " << out_path << '\n';
  return 0;
}

int run_ecsw_train(CommonArgs& common, const std::string& manifold_path,
                   const std::string& snaps_path, const std::string& out_path,
                   double tau_override) {
  common.load();
  qmor::PipelineConfig cfg = common.cfg;
  if (tau_override > 0.0) cfg.tau = tau_override;

  const qmor::Manifold manifold = qmor::load_manifold(manifold_path);
  const qmor::SnapshotSet snaps = qmor::load_snapshots(snaps_path);
  const qmor::SemiDiscreteModel model = qmor::make_burgers_model(cfg.burgers());
  if (manifold.full_dimension() != model.dimension())
    throw qmor::InvalidArgument("manifold dimension does not match the configured mesh");

  const qmor::TrainingCoordinates coords =
      qmor::training_coordinates(manifold, snaps, cfg.train_stride);
  const qmor::TrainingSystem system =
      qmor::build_training_system(model, manifold, coords, cfg.scheme);

  const auto start = std::chrono::steady_clock::now();
  const qmor::ReducedMesh mesh = qmor::train_reduced_mesh(system, model, cfg.tau);
  const double nnls_seconds = seconds_since(start);

  qmor::save_reduced_mesh(mesh, out_path);
  const double percent = 100.0 * static_cast<double>(mesh.size()) /
                         static_cast<double>(mesh.entity_count);
  std::cout << "n_e = " << mesh.size() << " of " << mesh.entity_count << " ("
            << format_double(percent) << " %), achieved ratio "
            << format_double(mesh.achieved_ratio) << ", NNLS time "
            << format_double(nnls_seconds) << " s\n";
  if (mesh.size() < manifold.reduced_dimension())
    std::cout << "warning: reduced mesh has fewer entities than the manifold dimension ("
              << mesh.size() << " < " << manifold.reduced_dimension() << ")\n";
  std::cout << "wrote " << out_path << '\n';
  return 0;
}

int run_rom_cmd(CommonArgs& common, const std::string& manifold_path,
                const std::string& mesh_path, const std::string& out_path,
                const std::string& coords_path) {
  common.load();
  const qmor::PipelineConfig& cfg = common.cfg;

  const qmor::Manifold manifold = qmor::load_manifold(manifold_path);
  std::optional<qmor::ReducedMesh> mesh;
  if (!mesh_path.empty()) {
    mesh = qmor::load_reduced_mesh(mesh_path);
    if (mesh->reduced_dimension != manifold.reduced_dimension())
      throw qmor::InvalidArgument("mesh/manifold mismatch: mesh trained for n = " +
                                  std::to_string(mesh->reduced_dimension) +
                                  ", manifold has n = " +
                                  std::to_string(manifold.reduced_dimension()));
  }
  const qmor::SemiDiscreteModel model = qmor::make_burgers_model(cfg.burgers());
  if (manifold.full_dimension() != model.dimension())
    throw qmor::InvalidArgument("manifold dimension does not match the configured mesh");
  if (mesh && mesh->entity_count != model.entity_count())
    throw qmor::InvalidArgument("mesh/manifold mismatch: mesh has " +
                                std::to_string(mesh->entity_count) +
                                " entities, model has " +
                                std::to_string(model.entity_count()));

  std::ofstream traj(out_path);
  if (!traj) throw qmor::InvalidArgument("cannot open " + out_path + " for writing");
  write_csv_header(traj, {"probe_" + std::to_string(cfg.probe1),
                          "probe_" + std::to_string(cfg.probe2), "integral_qoi"});

  qmor::RomStats stats;
  const auto start = std::chrono::steady_clock::now();
  qmor::RomTrajectory result;
  try {
    result = qmor::run_rom(
        model, manifold, mesh, cfg.scheme, cfg.dt, cfg.t_final,
        {cfg.probe1, cfg.probe2}, cfg.lspg(),
        [&](double t, const Vector&, const Vector& u) {
          write_csv_row(traj, t,
                        {u(cfg.probe1), u(cfg.probe2), model.mass_diag().dot(u)});
          traj.flush();
        },
        &stats);
  } catch (const qmor::NumericError&) {
    traj.flush();
    std::cerr << "partial trajectory flushed to " << out_path << '\n';
    throw;
  }
  const double elapsed = seconds_since(start);

  std::cout << (mesh ? "hyperreduced " : "") << "ROM ran " << stats.steps
            << " steps in " << format_double(elapsed) << " s (max Gauss-Newton iterations "
            << stats.max_gn_iterations << ")\n"
            << "wrote trajectory to " << out_path << '\n';
  std::ifstream timing(cfg.timing_path);
  std::string key, equals;
  double hdm_seconds = 0.0;
  if (timing >> key >> equals >> hdm_seconds && key == "hdm_wall_seconds" &&
      equals == "=" && hdm_seconds > 0.0 && elapsed > 0.0)
    std::cout << "speed-up vs recorded HDM run: " << format_double(hdm_seconds / elapsed)
              << "x\n";

  if (!coords_path.empty()) {
    qmor::SnapshotSet dump;
    dump.states = result.coordinates;
    dump.times = result.times;
    dump.u_ref = Vector::Zero(manifold.reduced_dimension());
    qmor::save_snapshots(dump, coords_path);
    std::cout << "wrote coordinates to " << coords_path << '\n';
  }
  return 0;
}

int run_compare(const std::string& hdm_path, const std::vector<std::string>& rom_paths,
                const std::string& out_path) {
  const TrajectoryTable hdm = read_trajectory_csv(hdm_path);
  std::vector<TrajectoryTable> roms;
  for (const auto& p : rom_paths) roms.push_back(read_trajectory_csv(p));

  for (size_t r = 0; r < roms.size(); ++r) {
    const TrajectoryTable& rom = roms[r];
    if (rom.times.size() != hdm.times.size() ||
        (rom.times - hdm.times).lpNorm<Eigen::Infinity>() > 1e-9)
      throw qmor::InvalidArgument(rom_paths[r] + ": time stamps misaligned with " + hdm_path);
    if (rom.columns != hdm.columns)
      throw qmor::InvalidArgument(rom_paths[r] + ": QoI columns differ from " + hdm_path);
  }

  std::ofstream report(out_path);
  if (!report) throw qmor::InvalidArgument("cannot open " + out_path + " for writing");
  report << "trajectory,qoi,relative_error\n";
  for (size_t r = 0; r < roms.size(); ++r) {
    for (size_t c = 0; c < hdm.columns.size(); ++c) {
      const double err = qmor::relative_error(roms[r].values.col(static_cast<Index>(c)),
                                              hdm.values.col(static_cast<Index>(c)));
      report << stem_of(rom_paths[r]) << ',' << hdm.columns[c] << ','
             << format_double(err) << '\n';
      std::cout << stem_of(rom_paths[r]) << " " << hdm.columns[c]
                << " relative error = " << format_double(err) << '\n';
    }
  }

  const std::string histories_path =
      (std::filesystem::path(out_path).parent_path() /
       (stem_of(out_path) + "_histories.csv"))
          .string();
  std::ofstream histories(histories_path);
  if (!histories)
    throw qmor::InvalidArgument("cannot open " + histories_path + " for writing");
  histories << "time,series,qoi,value\n";
  const auto emit = [&](const std::string& series, const TrajectoryTable& t) {
    for (Index i = 0; i < t.times.size(); ++i)
      for (size_t c = 0; c < t.columns.size(); ++c)
        histories << format_double(t.times(i)) << ',' << series << ',' << t.columns[c]
                  << ',' << format_double(t.values(i, static_cast<Index>(c))) << '\n';
  };
  emit(stem_of(hdm_path), hdm);
  for (size_t r = 0; r < roms.size(); ++r) emit(stem_of(rom_paths[r]), roms[r]);

  std::cout << "wrote report to " << out_path << " and histories to "
            << histories_path << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Model-order-reduction pipeline: simulate, build manifolds, train "
               "hyperreduction, run ROMs, compare trajectories"};
  app.require_subcommand(1);

  CommonArgs common;
  app.add_option("--config", common.config_path, "pipeline config file (key = value lines)");

  auto* hdm_cmd = app.add_subcommand("hdm-run", "simulate the full-order benchmark");
  std::string hdm_out = "snapshots.qsnap";
  hdm_cmd->add_option("--out", hdm_out, "snapshot artifact path");

  auto* affine_cmd = app.add_subcommand("build-affine", "build an affine manifold from snapshots");
  std::string affine_snaps, affine_out = "affine.qman";
  affine_cmd->add_option("snapshots", affine_snaps, "snapshot artifact")->required();
  affine_cmd->add_option("--out", affine_out, "manifold artifact path");

  auto* quad_cmd = app.add_subcommand("build-quadratic", "build a quadratic manifold from snapshots");
  std::string quad_snaps, quad_out = "quadratic.qman";
  double quad_alpha = -1.0;
  quad_cmd->add_option("snapshots", quad_snaps, "snapshot artifact")->required();
  quad_cmd->add_option("--out", quad_out, "manifold artifact path");
  quad_cmd->add_option("--alpha-star", quad_alpha, "fixed regularization (skips the GCV sweep)");

  auto* train_cmd = app.add_subcommand("ecsw-train", "train a reduced mesh for a manifold");
  std::string train_manifold, train_snaps, train_out = "reduced.qmesh";
  double train_tau = -1.0;
  train_cmd->add_option("manifold", train_manifold, "manifold artifact")->required();
  train_cmd->add_option("snapshots", train_snaps, "snapshot artifact")->required();
  train_cmd->add_option("--out", train_out, "reduced-mesh path");
  train_cmd->add_option("--tau", train_tau, "training tolerance override");

  auto* rom_cmd = app.add_subcommand("rom-run", "integrate a reduced-order model");
  std::string rom_manifold, rom_mesh, rom_out = "rom_trajectory.csv", rom_coords;
  rom_cmd->add_option("manifold", rom_manifold, "manifold artifact")->required();
  rom_cmd->add_option("--mesh", rom_mesh, "reduced mesh for hyperreduction");
  rom_cmd->add_option("--out", rom_out, "trajectory CSV path");
  rom_cmd->add_option("--dump-coords", rom_coords, "also dump coordinates to this path");

  auto* compare_cmd = app.add_subcommand("compare", "relative errors of ROM trajectories vs a reference");
  std::string cmp_hdm, cmp_out = "compare_report.csv";
  std::vector<std::string> cmp_roms;
  compare_cmd->add_option("reference", cmp_hdm, "reference trajectory CSV")->required();
  compare_cmd->add_option("trajectories", cmp_roms, "ROM trajectory CSVs")->required();
  compare_cmd->add_option("--out", cmp_out, "report CSV path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (hdm_cmd->parsed()) return run_hdm(common, hdm_out);
    if (affine_cmd->parsed()) return run_build(common, false, affine_snaps, affine_out, -1.0);
    if (quad_cmd->parsed()) return run_build(common, true, quad_snaps, quad_out, quad_alpha);
    if (train_cmd->parsed())
      return run_ecsw_train(common, train_manifold, train_snaps, train_out, train_tau);
    if (rom_cmd->parsed())
      return run_rom_cmd(common, rom_manifold, rom_mesh, rom_out, rom_coords);
    if (compare_cmd->parsed()) return run_compare(cmp_hdm, cmp_roms, cmp_out);
  } catch (const qmor::NumericError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return 2;
  } catch (const qmor::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
