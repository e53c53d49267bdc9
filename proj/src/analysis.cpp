#include "plapflow/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace plapflow {

DiagnosticsRecord record(const ScalarField& u, double t, const EnergyParams& prm,
                         const std::vector<double>& q_extra, int newton_iters, double eps_used) {
  require_finite(u, "record");
  const Grid& g = *u.grid;
  DiagnosticsRecord rec;
  rec.t = t;
  double mass = 0.0;
  for (int i = 0; i < g.num_nodes(); ++i) mass += u[i] * g.node_volume[static_cast<std::size_t>(i)];
  rec.mass = mass;
  const double mean = mass / g.area();

  ScalarField dev(g);
  for (int i = 0; i < g.num_nodes(); ++i) dev[i] = u[i] - mean;
  rec.dev_l1 = lq_norm(dev, 1.0);
  rec.dev_l2 = lq_norm(dev, 2.0);
  rec.dev_linf = lq_norm(dev, q_infinity);
  rec.dev_extra.reserve(q_extra.size());
  for (double q : q_extra) rec.dev_extra.push_back(lq_norm(dev, q));

  // diagnostics use the unregularized stencil value
  rec.energy_p = weighted_p_integral(*prm.weight, gradient(u), prm.p);
  double fu = 0.0;
  for (int i = 0; i < g.num_nodes(); ++i)
    fu += dev[i] * dev[i] * g.node_volume[static_cast<std::size_t>(i)];
  rec.f_u = fu;
  rec.newton_iters = newton_iters;
  rec.eps_used = eps_used;
  return rec;
}

std::vector<double> dissipation_residual(const Trajectory& traj) {
  if (traj.records.size() < 2)
    throw std::invalid_argument("dissipation_residual: needs at least 2 records");
  std::vector<double> out;
  out.reserve(traj.records.size() - 1);
  for (std::size_t k = 0; k + 1 < traj.records.size(); ++k) {
    const DiagnosticsRecord& a = traj.records[k];
    const DiagnosticsRecord& b = traj.records[k + 1];
    const double dt = b.t - a.t;
    const double num = std::abs((b.f_u - a.f_u) / dt + 2.0 * b.energy_p);
    out.push_back(num / std::max(2.0 * b.energy_p, 1e-30));
  }
  return out;
}

double OdeComparison::operator()(double t) const {
  if (f0 == 0.0 || t >= t_star) return 0.0;
  const double base = std::pow(f0, 1.0 - k) - alpha * (1.0 - k) * t;
  if (base <= 0.0) return 0.0;
  return std::pow(base, 1.0 / (1.0 - k));
}

OdeComparison ode_comparison(double f0, double alpha, double k) {
  if (!(f0 >= 0.0)) throw std::invalid_argument("ode_comparison: f0 must be >= 0");
  if (!(alpha > 0.0)) throw std::invalid_argument("ode_comparison: alpha must be > 0");
  if (!(k > 0.0 && k < 1.0)) throw std::invalid_argument("ode_comparison: k must be in (0,1)");
  OdeComparison ode;
  ode.f0 = f0;
  ode.alpha = alpha;
  ode.k = k;
  ode.t_star = f0 == 0.0 ? 0.0 : std::pow(f0, 1.0 - k) / (alpha * (1.0 - k));
  return ode;
}

ConstantValue poincare_bound(const Grid& g, double q) {
  if (!(q >= 1.0)) throw std::invalid_argument("poincare_bound: q must be >= 1");
  const double d = g.diameter();
  if (q == 2.0) return {d / M_PI, Rigor::Rigorous, "Payne-Weinberger (convex)"};
  if (q == 1.0) return {0.5 * d, Rigor::Rigorous, "Acosta-Duran (convex)"};
  return {d, Rigor::Rigorous, "diameter bound (convex)"};
}

namespace {

double grad_q_norm_pow(const GradientField& gf, double q) {
  const Grid& g = *gf.grid;
  double acc = 0.0;
  for (int cy = 0; cy < g.ny - 1; ++cy)
    for (int cx = 0; cx < g.nx - 1; ++cx) {
      const CellGradient cg = cell_gradient(gf, cx, cy);
      acc += std::pow(cg.gx * cg.gx + cg.gy * cg.gy, 0.5 * q) * g.cell_volume();
    }
  return acc;
}

double uniform_from(std::uint64_t& state) {
  // splitmix64; fully deterministic across platforms
  state += 0x9e3779b97f4a7c15ull;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  z = z ^ (z >> 31);
  return 2.0 * (static_cast<double>(z >> 11) * 0x1.0p-53) - 1.0;
}

}  // namespace

ConstantValue embedding_norm_estimate(const Grid& g, double sobolev_q, double target_q,
                                      std::uint64_t seed) {
  if (!(sobolev_q >= 1.0))
    throw std::invalid_argument("embedding_norm_estimate: sobolev exponent must be >= 1");
  const int kmax = 4;
  double best = 0.0;
  auto ratio_of = [&](const ScalarField& f) {
    const double target =
        target_q == q_infinity ? lq_norm(f, q_infinity) : lq_norm(f, target_q);
    const double fq = std::pow(lq_norm(f, sobolev_q), sobolev_q);
    const double gq = grad_q_norm_pow(gradient(f), sobolev_q);
    const double wnorm = std::pow(fq + gq, 1.0 / sobolev_q);
    return wnorm > 0.0 ? target / wnorm : 0.0;
  };
  // single cosine modes, then seeded random trigonometric polynomials
  for (int j = 0; j <= kmax; ++j)
    for (int k = 0; k <= kmax; ++k) {
      ScalarField f = sample_nodes(g, [&](double x, double y) {
        return std::cos(j * M_PI * (x - g.x0) / g.lx) * std::cos(k * M_PI * (y - g.y0) / g.ly);
      });
      best = std::max(best, ratio_of(f));
    }
  std::uint64_t state = seed;
  for (int probe = 0; probe < 24; ++probe) {
    double coeff[kmax + 1][kmax + 1];
    for (int j = 0; j <= kmax; ++j)
      for (int k = 0; k <= kmax; ++k)
        coeff[j][k] = uniform_from(state) / (1.0 + j * j + k * k);
    ScalarField f = sample_nodes(g, [&](double x, double y) {
      double acc = 0.0;
      for (int j = 0; j <= kmax; ++j)
        for (int k = 0; k <= kmax; ++k)
          acc += coeff[j][k] * std::cos(j * M_PI * (x - g.x0) / g.lx) *
                 std::cos(k * M_PI * (y - g.y0) / g.ly);
      return acc;
    });
    best = std::max(best, ratio_of(f));
  }
  return {best, Rigor::Estimated, "probe Rayleigh ratio (trigonometric polynomials)"};
}

TstarReport extinction_bound(const ScalarField& u0, const WeightField& w, double p, int n,
                             std::uint64_t probe_seed) {
  const double lower = extinction_window_lower(p0(w), n);
  if (!(lower < 2.0))
    throw std::invalid_argument("extinction_bound: extinction window is empty");
  if (!(p > lower && p < 2.0))
    throw std::invalid_argument("extinction_bound: p outside the extinction window (" +
                                std::to_string(lower) + ", 2)");
  const Grid& g = *u0.grid;
  const double qs = 2.0 * n / (n + 2.0);
  const ConstantValue cq = poincare_bound(g, qs);
  const ConstantValue ct = embedding_norm_estimate(g, qs, 2.0, probe_seed);
  const double gt = gamma_tilde(w, n, p);

  const double mean = average(u0);
  double f0 = 0.0;
  for (int i = 0; i < g.num_nodes(); ++i) {
    const double d = u0[i] - mean;
    f0 += d * d * g.node_volume[static_cast<std::size_t>(i)];
  }
  const double bracket = std::pow(ct.value, p) *
                         std::pow(std::pow(cq.value, qs) + 1.0, (n * p + 2.0 * p) / (2.0 * n)) * gt;
  TstarReport rep;
  rep.f0 = f0;
  rep.k = 0.5 * p;
  rep.alpha = 2.0 / bracket;
  rep.t_star = f0 == 0.0 ? 0.0 : std::pow(f0, 1.0 - 0.5 * p) / (2.0 - p) * bracket;
  rep.rigor = Rigor::Estimated;  // the embedding norm is an estimate
  return rep;
}

BoundsReport compute_bounds(const WeightField& w, double p, int n,
                            const std::vector<double>& deltas, const ScalarField* u0,
                            std::uint64_t probe_seed) {
  if (!(p > 1.0)) throw std::invalid_argument("compute_bounds: requires p > 1");
  if (p == 2.0) throw std::invalid_argument("compute_bounds: excluded parameter p = 2");
  const Grid& g = *w.grid;
  BoundsReport rep;
  rep.p = p;
  rep.n = n;
  rep.p0 = p0(w);
  rep.admissible_delta_max = (p - rep.p0) / rep.p0;
  rep.gradient_coefficient = std::pow(2.0 / std::abs(p - 2.0), 1.0 / p);

  auto add_deviation_envelope = [&](double delta) {
    const double q = 1.0 + delta;
    const double gamma = gamma_delta_p(w, delta, p);
    rep.gamma_delta[delta] = gamma;
    const ConstantValue cp = poincare_bound(g, q);
    rep.poincare.emplace(q, cp);
    Envelope env;
    env.q = q;
    env.coefficient = cp.value * gamma;
    env.rigor = cp.rigor;
    env.constants = "C_poincare(q=" + std::to_string(q) + ") * Gamma(delta=" +
                    std::to_string(delta) + ")";
    rep.envelopes.push_back(env);
  };

  add_deviation_envelope(0.0);  // L1 envelope, always admissible
  for (double d : deltas) {
    if (d == 0.0) continue;
    if (!(d >= 0.0) || !(d < rep.admissible_delta_max))
      throw std::invalid_argument("compute_bounds: delta " + std::to_string(d) +
                                  " outside [0, " + std::to_string(rep.admissible_delta_max) +
                                  ")");
    add_deviation_envelope(d);
  }
  if (rep.admissible_delta_max > 1.0 &&
      std::none_of(deltas.begin(), deltas.end(), [](double d) { return d == 1.0; }))
    add_deviation_envelope(1.0);  // L2 envelope when admissible

  // sup-norm envelope needs p0 < p/n; constants only estimated
  if (rep.p0 < p / n && rep.admissible_delta_max > n - 1.0) {
    const double dinf = 0.5 * ((n - 1.0) + rep.admissible_delta_max);
    const double q = 1.0 + dinf;
    const double gamma = gamma_delta_p(w, dinf, p);
    rep.gamma_delta[dinf] = gamma;
    const ConstantValue cp = poincare_bound(g, q);
    rep.poincare.emplace(q, cp);
    const ConstantValue ce = embedding_norm_estimate(g, q, q_infinity, probe_seed);
    rep.sobolev_embedding.emplace(q, ce);
    const double cstar = ce.value * std::pow(std::pow(cp.value, q) + 1.0, 1.0 / q);
    Envelope env;
    env.q = q_infinity;
    env.coefficient = cstar * gamma;
    env.rigor = Rigor::Estimated;
    env.constants = "C*(delta=" + std::to_string(dinf) + ") * Gamma(delta=" +
                    std::to_string(dinf) + "), embedding norm estimated";
    rep.envelopes.push_back(env);
  }

  const double lower = extinction_window_lower(rep.p0, n);
  if (lower < 2.0 && p > lower && p < 2.0) {
    rep.gamma_tilde_np = gamma_tilde(w, n, p);
    const double qs = 2.0 * n / (n + 2.0);
    rep.poincare.emplace(qs, poincare_bound(g, qs));
    rep.sobolev_embedding.emplace(qs, embedding_norm_estimate(g, qs, 2.0, probe_seed));
    if (u0 != nullptr) rep.t_star = extinction_bound(*u0, w, p, n, probe_seed);
  }

  rep.muckenhoupt = w.spec.family == WeightFamily::Table
                        ? "unverified (table family has no extension certificate)"
                        : (muckenhoupt_admissible(w.spec, p, n)
                               ? "asserted from family parameters"
                               : "inadmissible family parameters");
  rep.muckenhoupt_spot = muckenhoupt_spot_check(w, p, 3);
  return rep;
}

double deviation_norm(const DiagnosticsRecord& rec, const Trajectory& traj, double norm_q) {
  if (norm_q == 1.0) return rec.dev_l1;
  if (norm_q == 2.0) return rec.dev_l2;
  if (norm_q == q_infinity) return rec.dev_linf;
  for (std::size_t i = 0; i < traj.q_extra.size(); ++i)
    if (traj.q_extra[i] == norm_q) return rec.dev_extra[i];
  throw std::invalid_argument("deviation norm q = " + std::to_string(norm_q) +
                              " not recorded in this trajectory");
}

EnvelopeVerdict decay_envelope_check(const Trajectory& traj, const BoundsReport& report,
                                     double norm_q) {
  const Envelope* env = nullptr;
  for (const Envelope& e : report.envelopes)
    if (e.q == norm_q) env = &e;
  if (env == nullptr)
    throw std::invalid_argument("decay_envelope_check: no envelope constants for this norm");
  if (traj.records.empty()) throw std::invalid_argument("decay_envelope_check: empty trajectory");

  EnvelopeVerdict v;
  v.applicable = true;
  v.pass_fail = env->rigor == Rigor::Rigorous;
  const double dev2_0 = traj.records.front().dev_l2;
  const double amp = env->coefficient * std::pow(dev2_0, 2.0 / report.p);
  for (const DiagnosticsRecord& rec : traj.records) {
    if (!(rec.t > 0.0)) continue;
    const double bound = amp * std::pow(rec.t, -1.0 / report.p);
    const double dev = deviation_norm(rec, traj, norm_q);
    const double ratio = bound > 0.0 ? dev / bound : (dev > 0.0 ? q_infinity : 0.0);
    if (ratio > v.worst_ratio) {
      v.worst_ratio = ratio;
      v.worst_t = rec.t;
    }
  }
  v.passed = v.worst_ratio <= 1.0;
  return v;
}

EnvelopeVerdict gradient_envelope_check(const Trajectory& traj, const BoundsReport& report) {
  if (traj.records.empty())
    throw std::invalid_argument("gradient_envelope_check: empty trajectory");
  EnvelopeVerdict v;
  v.applicable = true;
  v.pass_fail = true;  // every factor is explicit
  const double dev2_0 = traj.records.front().dev_l2;
  const double amp = std::pow(report.gradient_coefficient, report.p) * dev2_0 * dev2_0;
  for (const DiagnosticsRecord& rec : traj.records) {
    if (!(rec.t > 0.0)) continue;
    const double bound = amp / rec.t;
    const double ratio = bound > 0.0 ? rec.energy_p / bound : (rec.energy_p > 0.0 ? q_infinity : 0.0);
    if (ratio > v.worst_ratio) {
      v.worst_ratio = ratio;
      v.worst_t = rec.t;
    }
  }
  v.passed = v.worst_ratio <= 1.0;
  return v;
}

DecayFit fit_decay_exponent(const Trajectory& traj, double norm_q, double t_min, double t_max) {
  std::vector<double> xs, ys;
  bool nonpositive = false;
  for (const DiagnosticsRecord& rec : traj.records) {
    if (rec.t < t_min || rec.t > t_max || !(rec.t > 0.0)) continue;
    const double dev = deviation_norm(rec, traj, norm_q);
    if (!(dev > 0.0)) {
      nonpositive = true;
      continue;
    }
    xs.push_back(std::log(rec.t));
    ys.push_back(std::log(dev));
  }
  if (nonpositive) {
    DecayFit fit;
    fit.extinct = true;
    fit.points = static_cast<int>(xs.size());
    return fit;
  }
  if (xs.size() < 5)
    throw std::invalid_argument("fit_decay_exponent: needs at least 5 points in the window, got " +
                                std::to_string(xs.size()));
  const std::size_t n = xs.size();
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
  }
  DecayFit fit;
  fit.slope = sxy / sxx;
  double ssr = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = ys[i] - my - fit.slope * (xs[i] - mx);
    ssr += r * r;
  }
  fit.stderr_ = n > 2 ? std::sqrt(ssr / (static_cast<double>(n) - 2.0) / sxx) : 0.0;
  fit.points = static_cast<int>(n);
  return fit;
}

std::optional<double> detect_extinction(const Trajectory& traj, double threshold) {
  if (!(threshold > 0.0)) throw std::invalid_argument("detect_extinction: threshold must be > 0");
  for (std::size_t k = 0; k < traj.records.size(); ++k) {
    const DiagnosticsRecord& rec = traj.records[k];
    if (rec.dev_l2 <= threshold) {
      if (k == 0) return rec.t;
      const DiagnosticsRecord& prev = traj.records[k - 1];
      const double span = prev.dev_l2 - rec.dev_l2;
      if (span <= 0.0) return rec.t;
      return prev.t + (prev.dev_l2 - threshold) / span * (rec.t - prev.t);
    }
  }
  return std::nullopt;
}

ScalarField truncate(const ScalarField& u, double k) {
  if (!(k > 0.0)) throw std::invalid_argument("truncate: k must be > 0");
  ScalarField out = u;
  for (double& v : out.values) v = std::clamp(v, -k, k);
  return out;
}

}  // namespace plapflow
