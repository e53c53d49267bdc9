// Experiment driver: runs a configured trajectory and emits the trajectory
// CSV, a diagnostics summary JSON and the bounds report JSON. Outputs are
// deterministic for a given (config, seed) and written atomically.
#pragma once

#include "plapflow/analysis.hpp"
#include "plapflow/config.hpp"

#include <string>
#include <vector>

namespace plapflow {

struct RunPaths {
  std::string trajectory_csv;
  std::string diagnostics_json;
  std::string bounds_json;
};

RunPaths run_experiment(const ExperimentConfig& config);

// Bounds report only, no simulation.
std::string run_bounds(const ExperimentConfig& config);

std::string trajectory_csv_text(const Trajectory& traj, const ExperimentConfig& config);
std::string bounds_json_text(const BoundsReport& report);

void write_text_atomic(const std::string& path, const std::string& content);

std::string format_g17(double v);

// Parallel map over configs; worker count capped by PLAPFLOW_THREADS.
void run_sweep(const std::vector<ExperimentConfig>& configs);

}  // namespace plapflow
