// Experiment configuration: flat key = value text with sections, lossless
// round-trip, validated at load.
#pragma once

#include "plapflow/analysis.hpp"
#include "plapflow/flow.hpp"
#include "plapflow/geometry.hpp"
#include "plapflow/weights.hpp"

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace plapflow {

class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

enum class InitialKind { Constant, Cosine, SmoothRandom, Step };

struct GridConfig {
  int nx = 17, ny = 17;
  double x0 = 0.0, y0 = 0.0, lx = 1.0, ly = 1.0;
  bool operator==(const GridConfig&) const = default;
};

struct WeightConfig {
  WeightSpec spec;
  int n = 2;
  bool operator==(const WeightConfig&) const = default;
};

struct InitialConfig {
  InitialKind kind = InitialKind::Cosine;
  double amplitude = 1.0;
  int mode_x = 1, mode_y = 1;  // cosine
  bool operator==(const InitialConfig&) const = default;
};

enum class TimeKind { Uniform, Geometric, Explicit };

struct TimeConfig {
  TimeKind kind = TimeKind::Uniform;
  double t_end = 1.0;
  int steps = 10;
  double t0 = 1e-2;
  double ratio = 1.5;
  std::vector<double> times;
  bool operator==(const TimeConfig&) const = default;
};

enum class EpsKind { Fixed, Adaptive };

struct StepConfig {
  double h = 1e-2;
  double newton_tol = 1e-11;
  int max_newton = 60;
  double linear_tol = 1e-3;
  EpsKind eps_kind = EpsKind::Fixed;
  double eps = 0.0;
  double eps0 = 1e-3;
  double theta = 0.1;
  double eps_min = 1e-9;
  bool operator==(const StepConfig&) const = default;
};

struct AnalysisConfig {
  std::vector<double> q_extra;
  std::vector<double> deltas;
  double extinction_dev_factor = 1e-6;  // threshold = factor * dev2(0)
  bool operator==(const AnalysisConfig&) const = default;
};

struct OutputConfig {
  std::string dir = "out";
  std::string prefix = "run";
  bool operator==(const OutputConfig&) const = default;
};

struct ExperimentConfig {
  int schema_version = 1;
  std::uint64_t seed = 0;
  GridConfig grid;
  WeightConfig weight;
  double p = 3.0;
  InitialConfig initial;
  TimeConfig time;
  StepConfig step;
  AnalysisConfig analysis;
  OutputConfig output;
  bool operator==(const ExperimentConfig&) const = default;
};

// Parse the canonical text form; throws ConfigError with line context.
ExperimentConfig parse_config(const std::string& text, const std::string& origin = "<config>");

// Canonical serialization; parse_config(serialize_config(c)) == c.
std::string serialize_config(const ExperimentConfig& config);

ExperimentConfig load_config_file(const std::string& path);

// Cross-field validation (p != 2, delta list against p0, weight gates, ...).
void validate_config(const ExperimentConfig& config);

Grid build_grid(const ExperimentConfig& config);
WeightField build_weight(const ExperimentConfig& config, const Grid& g);
ScalarField build_initial(const ExperimentConfig& config, const Grid& g);
TimeGrid build_time_grid(const ExperimentConfig& config);
StepParams build_step_params(const ExperimentConfig& config);

}  // namespace plapflow
