#include "plapflow/verify.hpp"

#include "plapflow/analysis.hpp"
#include "plapflow/config.hpp"
#include "plapflow/flow.hpp"
#include "plapflow/run.hpp"

#include <cmath>
#include <functional>
#include <sstream>

namespace plapflow {

namespace {

double unit_from(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ull;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  z = z ^ (z >> 31);
  return 2.0 * (static_cast<double>(z >> 11) * 0x1.0p-53) - 1.0;
}

ScalarField random_field(const Grid& g, std::uint64_t seed, double amplitude) {
  ScalarField u(g);
  std::uint64_t state = seed;
  for (double& v : u.values) v = amplitude * unit_from(state);
  return u;
}

ScalarField smooth_random_field(const Grid& g, std::uint64_t seed, double amplitude) {
  ExperimentConfig c;
  c.seed = seed;
  c.initial.kind = InitialKind::SmoothRandom;
  c.initial.amplitude = amplitude;
  return build_initial(c, g);
}

// Derivative-free 1D line minimization by golden section with an expanding
// bracket, used by the brute-force oracle.
double golden_min(const std::function<double(double)>& f, double x0, double radius,
                  double tol) {
  double lo = x0 - radius, hi = x0 + radius;
  for (int grow = 0; grow < 60; ++grow) {
    const double m1 = lo + 0.381966011250105 * (hi - lo);
    const double m2 = hi - 0.381966011250105 * (hi - lo);
    if (f(lo) < std::min(f(m1), std::min(f(m2), f(hi)))) {
      lo -= (hi - lo);
      continue;
    }
    if (f(hi) < std::min(f(m1), std::min(f(m2), f(lo)))) {
      hi += (hi - lo);
      continue;
    }
    break;
  }
  double a = lo, b = hi;
  double x1 = a + 0.381966011250105 * (b - a);
  double x2 = b - 0.381966011250105 * (b - a);
  double f1 = f(x1), f2 = f(x2);
  while (b - a > tol) {
    if (f1 < f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = a + 0.381966011250105 * (b - a);
      f1 = f(x1);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = b - 0.381966011250105 * (b - a);
      f2 = f(x2);
    }
  }
  return 0.5 * (a + b);
}

// Multi-start coordinate descent with a golden-section polish.
std::vector<double> coordinate_descent_minimize(
    const std::function<double(const std::vector<double>&)>& f, const std::vector<double>& x0,
    std::uint64_t seed, int starts = 3) {
  const std::size_t n = x0.size();
  std::vector<double> best;
  double fbest = q_infinity;
  std::uint64_t state = seed;
  for (int s = 0; s < starts; ++s) {
    std::vector<double> x = x0;
    if (s > 0)
      for (double& v : x) v += 0.5 * unit_from(state);
    double radius = 1.0;
    for (int sweep = 0; sweep < 400; ++sweep) {
      double moved = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double xi = x[i];
        const double xs = golden_min(
            [&](double t) {
              std::vector<double> y = x;
              y[i] = t;
              return f(y);
            },
            xi, radius, 1e-13 * (1.0 + std::abs(xi)));
        x[i] = xs;
        moved = std::max(moved, std::abs(xs - xi));
      }
      radius = std::max(4.0 * moved, 1e-10);
      if (moved < 1e-12) break;
    }
    const double fx = f(x);
    if (fx < fbest) {
      fbest = fx;
      best = x;
    }
  }
  return best;
}

// Two-node proximal fixture: nodes at distance 1, unit volumes, one
// quadrature cell of volume 1, gamma = 1, eps = 0.
class TwoNodeEnergy final : public EnergyModel {
 public:
  explicit TwoNodeEnergy(double p) : p_(p), vol_{1.0, 1.0} {}
  int size() const override { return 2; }
  double value(std::span<const double> u) const override {
    return std::pow(std::abs(u[1] - u[0]), p_) / p_;
  }
  void gradient(std::span<const double> u, std::span<double> out) const override {
    const double d = u[1] - u[0];
    const double flux = std::pow(std::abs(d), p_ - 2.0) * d;
    out[0] = -flux;
    out[1] = flux;
  }
  void hessian_apply(std::span<const double> u, std::span<const double> v,
                     std::span<double> out) const override {
    const double d = u[1] - u[0];
    const double w = (p_ - 1.0) * std::pow(std::abs(d), p_ - 2.0);
    const double dv = v[1] - v[0];
    out[0] = -w * dv;
    out[1] = w * dv;
  }
  void hessian_diagonal(std::span<const double> u, std::span<double> out) const override {
    const double d = u[1] - u[0];
    const double w = (p_ - 1.0) * std::pow(std::abs(d), p_ - 2.0);
    out[0] = out[1] = w;
  }
  std::span<const double> node_volume() const override { return {vol_, 2}; }

 private:
  double p_;
  double vol_[2];
};

struct Suite {
  std::vector<CheckResult> results;

  void check(const std::string& name, bool passed, const std::string& detail) {
    results.push_back({name, passed, detail});
  }
  template <class T>
  std::string with_value(const std::string& label, T v) {
    std::ostringstream os;
    os << label << " = " << v;
    return os.str();
  }
};

void oracles_suite(Suite& s) {
  {
    TwoNodeEnergy model(3.0);
    StepParams step;
    step.h = 1.0;
    NewtonStats st;
    const std::vector<double> u = proximal_newton(model, {1.0, -1.0}, 1.0, step, &st);
    const double target = (std::sqrt(17.0) - 1.0) / 8.0;
    const double err = std::max(std::abs(u[0] - target), std::abs(u[1] + target));
    s.check("oracles: two-node resolvent analytic root", err <= 1e-10,
            s.with_value("|u - (sqrt(17)-1)/8|", err));
  }
  {
    double worst = 0.0;
    int cases = 0;
    for (int nx : {2, 3})
      for (double p : {1.5, 3.0}) {
        const Grid g = build_grid(nx, 3, 0.0, 0.0, 1.0, 1.0);
        WeightSpec spec;
        const WeightField w = make_weight(g, spec);
        EnergyParams prm;
        prm.p = p;
        prm.eps = p < 2.0 ? 1e-2 : 0.0;
        prm.weight = &w;
        for (std::uint64_t seed : {11u, 12u, 13u}) {
          const ScalarField u_prev = random_field(g, seed, 1.0);
          StepParams step;
          step.h = 0.5;
          step.eps_policy = FixedEps{prm.eps};
          const ScalarField u = resolvent(u_prev, step, prm);
          GridEnergy model(prm);
          auto objective = [&](const std::vector<double>& x) {
            double quad = 0.0;
            for (int i = 0; i < g.num_nodes(); ++i) {
              const double d = x[static_cast<std::size_t>(i)] - u_prev[i];
              quad += g.node_volume[static_cast<std::size_t>(i)] * d * d;
            }
            return model.value(x) + 0.5 * quad / step.h;
          };
          const std::vector<double> ref =
              coordinate_descent_minimize(objective, u_prev.values, seed * 977 + 3);
          double err = 0.0;
          for (int i = 0; i < g.num_nodes(); ++i)
            err = std::max(err, std::abs(u[i] - ref[static_cast<std::size_t>(i)]));
          worst = std::max(worst, err);
          ++cases;
        }
      }
    s.check("oracles: resolvent matches coordinate-descent minimizer", worst <= 1e-8,
            s.with_value("worst Linf over " + std::to_string(cases) + " cases", worst));
  }
  {
    const Grid g = build_grid(3, 3, 0.0, 0.0, 1.0, 1.0);
    WeightSpec spec;
    const WeightField w = make_weight(g, spec);
    EnergyParams prm{3.0, 0.1, &w};
    const ScalarField u = random_field(g, 77, 1.0);
    const ScalarField v = random_field(g, 78, 1.0);
    const ScalarField grad = energy_gradient(u, prm);
    const double slope = node_inner(grad, v);
    const double t = 1e-5;
    ScalarField up(g), um(g);
    for (int i = 0; i < g.num_nodes(); ++i) {
      up[i] = u[i] + t * v[i];
      um[i] = u[i] - t * v[i];
    }
    const double fd = (energy(up, prm) - energy(um, prm)) / (2.0 * t);
    const double rel = std::abs(fd - slope) / std::max(std::abs(slope), 1e-14);
    s.check("oracles: energy gradient matches central differences", rel <= 1e-6,
            s.with_value("relative error", rel));
  }
  {
    const Grid g = build_grid(4, 4, 0.0, 0.0, 1.0, 1.0);
    const ScalarField u = random_field(g, 5, 1.0);
    GradientField flux(g);
    std::uint64_t state = 6;
    for (double& v : flux.values) v = unit_from(state);
    const ScalarField div = divergence(flux);
    const double lhs = node_inner(div, u);
    const double rhs = -edge_inner(flux, gradient(u));
    const double scale = std::sqrt(edge_inner(flux, flux)) *
                         std::sqrt(edge_inner(gradient(u), gradient(u)));
    const double err = std::abs(lhs - rhs) / std::max(scale, 1e-30);
    s.check("oracles: divergence adjoint to gradient", err <= 1e-12,
            s.with_value("relative defect", err));
  }
}

void semigroup_suite(Suite& s) {
  const Grid g = build_grid(17, 17, 0.0, 0.0, 1.0, 1.0);
  WeightSpec spec;
  const WeightField w = make_weight(g, spec);

  for (double p : {1.5, 3.0}) {
    EnergyParams prm;
    prm.p = p;
    prm.weight = &w;
    StepParams step;
    step.h = 0.025;
    step.eps_policy = p < 2.0 ? EpsPolicy{AdaptiveEps{}} : EpsPolicy{FixedEps{0.0}};
    const ScalarField u0 = smooth_random_field(g, 301, 1.0);
    const Trajectory traj = evolve(u0, TimeGrid::uniform(1.0, 40), step, prm);
    double drift = 0.0;
    for (const DiagnosticsRecord& r : traj.records)
      drift = std::max(drift, std::abs(r.mass - traj.records.front().mass));
    const double tol = 1e-10 * (1.0 + std::abs(traj.records.front().mass));
    s.check("semigroup: mass conserved (p = " + std::to_string(p) + ")", drift <= tol,
            s.with_value("max drift", drift));

    double linf_excess = 0.0;
    const double sup0 = lq_norm(u0, q_infinity);
    ScalarField state = u0;
    for (int k = 0; k < 10; ++k) {
      state = resolvent(state, step, prm);
      linf_excess = std::max(linf_excess, lq_norm(state, q_infinity) - sup0);
    }
    s.check("semigroup: sup norm bounded by initial (p = " + std::to_string(p) + ")",
            linf_excess <= 1e-9, s.with_value("max excess", linf_excess));
  }

  {
    const Grid g9 = build_grid(9, 9, 0.0, 0.0, 1.0, 1.0);
    const WeightField w9 = make_weight(g9, spec);
    double worst = 0.0;
    for (double p : {1.5, 3.0}) {
      EnergyParams prm;
      prm.p = p;
      prm.weight = &w9;
      StepParams step;
      step.h = 0.05;
      step.eps_policy = p < 2.0 ? EpsPolicy{AdaptiveEps{}} : EpsPolicy{FixedEps{0.0}};
      for (std::uint64_t seed : {401u, 402u, 403u}) {
        ScalarField u = smooth_random_field(g9, seed, 1.0);
        ScalarField v = smooth_random_field(g9, seed + 50, 1.0);
        for (int k = 0; k < 8; ++k) {
          ScalarField un = resolvent(u, step, prm);
          ScalarField vn = resolvent(v, step, prm);
          for (double q : {1.0, 2.0, q_infinity}) {
            ScalarField din(g9), dout(g9);
            for (int i = 0; i < g9.num_nodes(); ++i) {
              din[i] = u[i] - v[i];
              dout[i] = un[i] - vn[i];
            }
            const double num = lq_norm(dout, q);
            const double den = lq_norm(din, q);
            if (den > 0.0) worst = std::max(worst, num / den - 1.0);
          }
          u = std::move(un);
          v = std::move(vn);
        }
      }
    }
    s.check("semigroup: L1/L2/Linf contraction of pairs", worst <= 1e-8,
            s.with_value("worst ratio excess", worst));
  }

  {
    EnergyParams prm;
    prm.p = 3.0;
    prm.weight = &w;
    StepParams step;
    step.h = 0.01;
    const ScalarField u0 = smooth_random_field(g, 311, 1.0);
    const double one = translation_check(u0, 5.0, 0.01, 1, step, prm);
    const double many = translation_check(u0, -3.0, 0.2, 20, step, prm);
    s.check("semigroup: translation equivariance (one step, c = 5)", one <= 1e-10,
            s.with_value("L2 defect", one));
    s.check("semigroup: translation equivariance (20 steps, c = -3)", many <= 1e-9,
            s.with_value("L2 defect", many));
  }

  {
    EnergyParams prm;
    prm.p = 3.0;
    prm.weight = &w;
    StepParams step;
    step.h = 1.0;  // substep count decides the step here
    const ScalarField u0 = sample_nodes(g, [](double x, double y) {
      return 0.5 * std::cos(M_PI * x) * std::cos(M_PI * y);
    });
    const ScalingReport r64 = scaling_check(u0, 2.0, 0.05, 64, step, prm);
    const ScalingReport r128 = scaling_check(u0, 2.0, 0.05, 128, step, prm);
    const double budget = 5e-4 * 2.0 * lq_norm(u0, 2.0);
    const double ratio = r64.discrepancy_l2 > 0.0 ? r128.discrepancy_l2 / r64.discrepancy_l2 : 0.0;
    s.check("semigroup: homogeneity scaling discrepancy within budget",
            r64.discrepancy_l2 <= budget,
            s.with_value("discrepancy", r64.discrepancy_l2) + ", budget " +
                std::to_string(budget));
    s.check("semigroup: scaling discrepancy shrinks under refinement", ratio <= 0.7,
            s.with_value("refinement ratio", ratio));
  }
}

void decay_suite(Suite& s) {
  const Grid g = build_grid(33, 33, 0.0, 0.0, 1.0, 1.0);
  WeightSpec spec;
  const WeightField w = make_weight(g, spec);
  EnergyParams prm;
  prm.p = 3.0;
  prm.weight = &w;
  StepParams step;
  step.h = 1e-3;
  const ScalarField u0 =
      sample_nodes(g, [](double x, double y) { return std::cos(M_PI * x) * std::cos(M_PI * y); });
  const Trajectory traj = evolve(u0, TimeGrid::uniform(1.0, 1000), step, prm);

  const std::vector<double> res = dissipation_residual(traj);
  double worst = 0.0;
  for (double r : res) worst = std::max(worst, r);
  s.check("decay: dissipation identity residual below 0.05", worst <= 0.05,
          s.with_value("max normalized residual", worst));

  const BoundsReport rep = compute_bounds(w, 3.0, 2, {}, &u0);
  const EnvelopeVerdict grad = gradient_envelope_check(traj, rep);
  s.check("decay: gradient decay envelope", grad.passed,
          s.with_value("worst ratio", grad.worst_ratio));
  const EnvelopeVerdict l1 = decay_envelope_check(traj, rep, 1.0);
  s.check("decay: L1 deviation envelope", l1.passed, s.with_value("worst ratio", l1.worst_ratio));

  const DecayFit fit = fit_decay_exponent(traj, 1.0, 0.1, 1.0);
  s.check("decay: fitted log-log slope within bound", fit.slope <= -1.0 / 3.0 + 0.05,
          s.with_value("slope", fit.slope));
}

void extinction_suite(Suite& s) {
  const Grid g = build_grid(17, 17, 0.0, 0.0, 1.0, 1.0);
  WeightSpec spec;
  const WeightField w = make_weight(g, spec);
  const ScalarField u0 =
      sample_nodes(g, [](double x, double y) { return std::cos(M_PI * x) * std::cos(M_PI * y); });

  EnergyParams fast;
  fast.p = 1.5;
  fast.weight = &w;
  StepParams step;
  step.h = 5e-3;
  step.eps_policy = AdaptiveEps{};
  const Trajectory traj = evolve(u0, TimeGrid::uniform(5.0, 1000), step, fast);
  const double threshold = 1e-6 * traj.records.front().dev_l2;
  const std::optional<double> t_ext = detect_extinction(traj, threshold);
  s.check("extinction: fast-diffusion run crosses the threshold", t_ext.has_value(),
          t_ext ? s.with_value("t_ext", *t_ext) : std::string("never crossed"));

  const TstarReport tsr = extinction_bound(u0, w, 1.5, 2);
  s.check("extinction: estimated T* finite and positive", tsr.t_star > 0.0,
          s.with_value("T* (estimated)", tsr.t_star) +
              (t_ext ? ", observed " + std::to_string(*t_ext) : ""));

  EnergyParams slow;
  slow.p = 3.0;
  slow.weight = &w;
  StepParams cstep;
  cstep.h = 0.01;
  const Trajectory control = evolve(u0, TimeGrid::uniform(5.0, 500), cstep, slow);
  const std::optional<double> t_none =
      detect_extinction(control, 1e-12 * control.records.front().dev_l2);
  s.check("extinction: degenerate regime control never crosses", !t_none.has_value(),
          t_none ? s.with_value("unexpected t_ext", *t_none) : std::string("no crossing"));

  const OdeComparison ode = ode_comparison(1.0, 2.0, 0.5);
  double worst = 0.0;
  for (int k = 1; k <= 98; ++k) {
    const double t = 0.01 * k * ode.t_star;
    const double dt = 1e-6;
    const double fd = (ode(t + dt) - ode(t - dt)) / (2.0 * dt);
    const double target = -ode.alpha * std::pow(ode(t), ode.k);
    worst = std::max(worst, std::abs(fd - target) / std::max(std::abs(target), 1e-14));
  }
  s.check("extinction: comparison ODE satisfied by the evaluator", worst <= 1e-6,
          s.with_value("max relative residual", worst));
}

}  // namespace

std::vector<CheckResult> run_verify_suite(const std::string& suite) {
  Suite s;
  if (suite == "oracles") {
    oracles_suite(s);
  } else if (suite == "semigroup") {
    semigroup_suite(s);
  } else if (suite == "decay") {
    decay_suite(s);
  } else if (suite == "extinction") {
    extinction_suite(s);
  } else if (suite == "all") {
    oracles_suite(s);
    semigroup_suite(s);
    decay_suite(s);
    extinction_suite(s);
  } else {
    throw std::invalid_argument("unknown verify suite '" + suite +
                                "', expected semigroup | decay | extinction | oracles | all");
  }
  return s.results;
}

}  // namespace plapflow
