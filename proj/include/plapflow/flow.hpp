// Backward-Euler resolvent of the flow via damped Newton on the strictly
// convex step functional J_eps(u) + (1/2h) ||u - u_prev||^2, and the time
// integrator iterating it into the semigroup trajectory.
#pragma once

#include "plapflow/analysis.hpp"
#include "plapflow/energy.hpp"

#include <functional>
#include <stdexcept>
#include <variant>
#include <vector>

namespace plapflow {

struct FixedEps {
  double eps = 0.0;
  bool operator==(const FixedEps&) const = default;
};

// eps per step = max(eps_min, theta * median edge |grad u|); tracks the
// degenerate p < 2 flow into extinction instead of smearing it.
struct AdaptiveEps {
  double eps0 = 1e-3;
  double theta = 0.1;
  double eps_min = 1e-9;
  bool operator==(const AdaptiveEps&) const = default;
};

using EpsPolicy = std::variant<FixedEps, AdaptiveEps>;

struct StepParams {
  double h = 1e-2;
  double newton_tol = 1e-11;  // scaled residual tolerance
  int max_newton = 60;
  double linear_tol = 1e-3;  // relative inner CG tolerance
  EpsPolicy eps_policy = FixedEps{0.0};
};

void validate(const StepParams& step);

struct TimeGrid {
  std::vector<double> times;  // strictly increasing, positive

  static TimeGrid uniform(double t_end, int steps);
  static TimeGrid geometric(double t0, double t_end, double ratio);
  static TimeGrid explicit_times(std::vector<double> times);
};

struct NewtonStats {
  int iterations = 0;
  double residual = 0.0;
  double eps_used = 0.0;
};

class NewtonDivergence : public std::runtime_error {
 public:
  NewtonDivergence(const std::string& msg, std::vector<double> history,
                   std::vector<double> iterate)
      : std::runtime_error(msg),
        residual_history(std::move(history)),
        last_iterate(std::move(iterate)) {}
  std::vector<double> residual_history;
  std::vector<double> last_iterate;
};

// Solver failure annotated with the trajectory time it occurred at.
class SolverError : public std::runtime_error {
 public:
  SolverError(const std::string& msg, double t) : std::runtime_error(msg), at_time(t) {}
  double at_time = 0.0;
};

// Minimize model.value(u) + (1/2h) sum vol (u - u_prev)^2 by damped Newton
// with CG inner solves (dense factorization below 200 unknowns).
std::vector<double> proximal_newton(const EnergyModel& model, std::vector<double> u_prev,
                                    double h, const StepParams& step,
                                    NewtonStats* stats = nullptr);

double resolve_eps(const EpsPolicy& policy, const ScalarField& u);

// One backward-Euler step (I + h A_eps)^{-1} u_prev.
ScalarField resolvent(const ScalarField& u_prev, const StepParams& step,
                      const EnergyParams& energy, NewtonStats* stats = nullptr);

using Observer = std::function<void(const ScalarField&, const DiagnosticsRecord&)>;

// Iterated resolvents through the output times. Output intervals are cut
// into uniform substeps of size at most step.h; a substep count is doubled
// when Newton fails or runs long.
Trajectory evolve(const ScalarField& u0, const TimeGrid& times, const StepParams& step,
                  const EnergyParams& energy, const std::vector<double>& q_extra = {},
                  const Observer& observer = {});

struct ScalingReport {
  double discrepancy_l2 = 0.0;
  double alpha = 1.0;
  double t = 0.0;
  int substeps_left = 0;
  int substeps_right = 0;
};

// Compares T(t)(alpha u0) against alpha T(alpha^{p-2} t) u0 at matched step
// size: both runs use the same absolute substep, so the discrepancy is the
// first-order self-convergence gap and shrinks under substep refinement.
ScalingReport scaling_check(const ScalarField& u0, double alpha, double t, int substeps,
                            const StepParams& step, const EnergyParams& energy);

// || T(t)(u0 + c) - (T(t) u0 + c) ||_2 after `steps` uniform steps.
double translation_check(const ScalarField& u0, double c, double t, int steps,
                         const StepParams& step, const EnergyParams& energy);

}  // namespace plapflow
