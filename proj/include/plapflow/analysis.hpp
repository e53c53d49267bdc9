// Trajectory diagnostics, the explicit constants feeding the decay and
// extinction bounds, the ODE comparison lemma, extinction detection and
// decay-rate fitting.
#pragma once

#include "plapflow/energy.hpp"
#include "plapflow/geometry.hpp"
#include "plapflow/weights.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace plapflow {

struct DiagnosticsRecord {
  double t = 0.0;
  double mass = 0.0;
  double dev_l1 = 0.0;
  double dev_l2 = 0.0;
  double dev_linf = 0.0;
  std::vector<double> dev_extra;  // matches the trajectory's q_extra order
  double energy_p = 0.0;          // unregularized stencil value of the p-energy
  double f_u = 0.0;               // squared L2 deviation from the mean
  int newton_iters = 0;
  double eps_used = 0.0;
};

struct Trajectory {
  std::vector<double> q_extra;
  std::vector<DiagnosticsRecord> records;
  ScalarField final_state;
};

DiagnosticsRecord record(const ScalarField& u, double t, const EnergyParams& prm,
                         const std::vector<double>& q_extra = {}, int newton_iters = 0,
                         double eps_used = 0.0);

// Backward-difference pairing matching the implicit scheme: per interval
// |(f_u(t_{k+1}) - f_u(t_k)) / dt + 2 energy_p(t_{k+1})| normalized by
// max(2 energy_p(t_{k+1}), 1e-30).
std::vector<double> dissipation_residual(const Trajectory& traj);

// Exact solution of f' = -alpha f^k with f(0) = f0, k in (0,1): zero from
// T_star = f0^(1-k) / (alpha (1-k)) onward.
struct OdeComparison {
  double f0 = 0.0;
  double alpha = 1.0;
  double k = 0.5;
  double t_star = 0.0;
  double operator()(double t) const;
};
OdeComparison ode_comparison(double f0, double alpha, double k);

enum class Rigor { Rigorous, Estimated };

struct ConstantValue {
  double value = 0.0;
  Rigor rigor = Rigor::Estimated;
  std::string source;
};

// Published upper bounds for the mean-deviation Poincare constant on convex
// domains: q=2 diam/pi, q=1 diam/2, otherwise the diameter.
ConstantValue poincare_bound(const Grid& g, double q);

// Lower estimate of the operator norm of W^{1,q} -> L^target (target 2 or
// infinity) by the max Rayleigh ratio over trigonometric probe fields.
ConstantValue embedding_norm_estimate(const Grid& g, double sobolev_q, double target_q,
                                      std::uint64_t seed = 20170601);

struct TstarReport {
  double t_star = 0.0;
  double alpha = 0.0;   // coefficient of the differential inequality f' + alpha f^k <= 0
  double k = 0.0;       // = p/2
  double f0 = 0.0;
  Rigor rigor = Rigor::Estimated;
};

// Extinction time bound for p in the window (p0*2n/(n+2), 2). The Sobolev
// factor is numerically estimated, so the report is flagged estimated.
TstarReport extinction_bound(const ScalarField& u0, const WeightField& w, double p, int n,
                             std::uint64_t probe_seed = 20170601);

struct Envelope {
  double q = 0.0;  // deviation norm exponent; q_infinity for the sup norm
  double coefficient = 0.0;  // dev_q(t) <= coefficient * dev2(0)^(2/p) * t^(-1/p)
  Rigor rigor = Rigor::Estimated;
  std::string constants;
};

struct BoundsReport {
  double p = 0.0;
  int n = 2;
  double p0 = 0.0;
  double admissible_delta_max = 0.0;
  std::map<double, double> gamma_delta;  // delta -> Gamma_{delta,p}
  std::optional<double> gamma_tilde_np;
  double gradient_coefficient = 0.0;  // (2/|p-2|)^(1/p), rigorous
  std::map<double, ConstantValue> poincare;
  std::map<double, ConstantValue> sobolev_embedding;  // W^{1,q} -> (q < 2 ? L2 : Linf)
  std::vector<Envelope> envelopes;
  std::optional<TstarReport> t_star;
  std::string muckenhoupt;  // family assertion or "unverified"
  double muckenhoupt_spot = 0.0;  // dyadic diagnostic, estimated
};

BoundsReport compute_bounds(const WeightField& w, double p, int n,
                            const std::vector<double>& deltas, const ScalarField* u0 = nullptr,
                            std::uint64_t probe_seed = 20170601);

struct EnvelopeVerdict {
  bool applicable = false;
  bool pass_fail = false;  // false when the constants are only estimated
  bool passed = true;
  double worst_ratio = 0.0;
  double worst_t = 0.0;
};

// dev_q(t) against the report envelope at every positive output time.
EnvelopeVerdict decay_envelope_check(const Trajectory& traj, const BoundsReport& report,
                                     double norm_q);

// energy_p(t) <= (2/|p-2|) * dev2(0)^2 / t at every positive output time.
EnvelopeVerdict gradient_envelope_check(const Trajectory& traj, const BoundsReport& report);

struct DecayFit {
  double slope = 0.0;
  double stderr_ = 0.0;
  int points = 0;
  bool extinct = false;
};

// Log-log least squares of dev_q against t over [t_min, t_max]. Reports
// extinct instead of fitting when a deviation in the window is nonpositive.
DecayFit fit_decay_exponent(const Trajectory& traj, double norm_q, double t_min, double t_max);

// First output time with dev_2 <= threshold, refined linearly between
// outputs; empty when never crossed.
std::optional<double> detect_extinction(const Trajectory& traj, double threshold);

// Componentwise clamp to [-k, k]; requires k > 0.
ScalarField truncate(const ScalarField& u, double k);

double deviation_norm(const DiagnosticsRecord& rec, const Trajectory& traj, double norm_q);

}  // namespace plapflow
