#pragma once

#include <string>

#include "qmor/dense.hpp"
#include "qmor/hdm.hpp"
#include "qmor/rom.hpp"

namespace qmor {

/// Every knob of the pipeline with its documented default, loadable from a
/// flat "key = value" text file ('#' starts a comment).  Unknown keys are
/// rejected by name.
struct PipelineConfig {
  // Benchmark problem
  Index cells = 512;
  double length = 100.0;
  double inflow = 4.3;
  double initial_value = 1.0;
  double source_a = 0.02;  // source amplitude a in a e^{b x}
  double source_b = 0.02;  // source rate b

  // Time integration
  double dt = 0.05;
  double t_final = 25.0;
  TimeScheme scheme = TimeScheme::Bdf2;
  Index snapshot_stride = 1;
  double newton_tol = 1e-8;       // relative residual drop per step
  double newton_tol_abs = 1e-12;
  int newton_max_iters = 25;

  // Reduction
  double epsilon_s = 1e-4;  // POD energy tolerance
  double zeta = 0.15;       // dimension-heuristic margin
  double omega = 0.1;       // GCV grid density
  double alpha_star = -1.0; // >= 0 overrides the GCV sweep

  // Hyperreduction
  double tau = 1e-2;
  Index train_stride = 4;

  // ROM solver
  double gn_tol_rel = 1e-8;
  double gn_tol_abs = 1e-12;
  int gn_max_iters = 25;

  // Outputs
  Index probe1 = 128;
  Index probe2 = 256;
  std::string trajectory_path = "hdm_trajectory.csv";
  std::string timing_path = "hdm_timing.txt";

  BurgersParams burgers() const;
  NewtonConfig newton() const;
  LspgConfig lspg() const;
};

/// Parses the file at path over the defaults.  Unknown keys, unparsable
/// values, and duplicate keys raise InvalidArgument naming the key.
PipelineConfig load_pipeline_config(const std::string& path);

/// Parses config text (used by load_pipeline_config and tests).
PipelineConfig parse_pipeline_config(const std::string& text, const std::string& origin);

}  // namespace qmor
