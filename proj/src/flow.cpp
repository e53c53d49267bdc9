#include "plapflow/flow.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace plapflow {

void validate(const StepParams& step) {
  if (!(step.h > 0.0)) throw std::invalid_argument("StepParams: h must be > 0");
  if (!(step.newton_tol > 0.0)) throw std::invalid_argument("StepParams: newton_tol must be > 0");
  if (!(step.linear_tol > 0.0)) throw std::invalid_argument("StepParams: linear_tol must be > 0");
  if (step.max_newton < 1) throw std::invalid_argument("StepParams: max_newton must be >= 1");
}

TimeGrid TimeGrid::uniform(double t_end, int steps) {
  if (!(t_end > 0.0) || steps < 1)
    throw std::invalid_argument("TimeGrid::uniform: t_end > 0 and steps >= 1 required");
  TimeGrid tg;
  tg.times.reserve(static_cast<std::size_t>(steps));
  for (int k = 1; k <= steps; ++k) tg.times.push_back(t_end * k / steps);
  return tg;
}

TimeGrid TimeGrid::geometric(double t0, double t_end, double ratio) {
  if (!(t0 > 0.0) || !(t_end > t0) || !(ratio > 1.0))
    throw std::invalid_argument("TimeGrid::geometric: need 0 < t0 < t_end and ratio > 1");
  TimeGrid tg;
  double t = t0;
  while (t < t_end * (1.0 - 1e-12)) {
    tg.times.push_back(t);
    t *= ratio;
  }
  tg.times.push_back(t_end);
  return tg;
}

TimeGrid TimeGrid::explicit_times(std::vector<double> times) {
  if (times.empty()) throw std::invalid_argument("TimeGrid: empty output list");
  double prev = 0.0;
  for (double t : times) {
    if (!(t > prev)) throw std::invalid_argument("TimeGrid: output times must be strictly increasing and positive");
    prev = t;
  }
  TimeGrid tg;
  tg.times = std::move(times);
  return tg;
}

namespace {

double weighted_norm(std::span<const double> v, std::span<const double> vol) {
  double acc = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) acc += vol[i] * v[i] * v[i];
  return std::sqrt(acc);
}

// Preconditioned CG on K d = b with K(d) = vol .* (H_nodal d + d/h); returns
// the last iterate even at the cap (it is still a descent direction).
void pcg(const EnergyModel& model, std::span<const double> u, double h,
         const std::vector<double>& b, const std::vector<double>& diag, double rel_tol,
         std::vector<double>& d) {
  const std::size_t n = b.size();
  const std::span<const double> vol = model.node_volume();
  std::vector<double> r = b, z(n), p(n), kp(n), hp(n);
  std::fill(d.begin(), d.end(), 0.0);
  double b2 = std::inner_product(b.begin(), b.end(), b.begin(), 0.0);
  if (b2 == 0.0) return;
  for (std::size_t i = 0; i < n; ++i) z[i] = r[i] / diag[i];
  p = z;
  double rz = std::inner_product(r.begin(), r.end(), z.begin(), 0.0);
  const int cap = static_cast<int>(4 * n) + 50;
  for (int it = 0; it < cap; ++it) {
    model.hessian_apply(u, p, hp);
    for (std::size_t i = 0; i < n; ++i) kp[i] = vol[i] * (hp[i] + p[i] / h);
    const double pkp = std::inner_product(p.begin(), p.end(), kp.begin(), 0.0);
    if (!(pkp > 0.0)) break;
    const double alpha = rz / pkp;
    double r2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      d[i] += alpha * p[i];
      r[i] -= alpha * kp[i];
      r2 += r[i] * r[i];
    }
    if (r2 <= rel_tol * rel_tol * b2) break;
    for (std::size_t i = 0; i < n; ++i) z[i] = r[i] / diag[i];
    const double rz_next = std::inner_product(r.begin(), r.end(), z.begin(), 0.0);
    const double beta = rz_next / rz;
    rz = rz_next;
    for (std::size_t i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
  }
}

// Dense Cholesky solve of K d = b, K assembled column by column.
void dense_solve(const EnergyModel& model, std::span<const double> u, double h,
                 const std::vector<double>& b, std::vector<double>& d) {
  const std::size_t n = b.size();
  const std::span<const double> vol = model.node_volume();
  std::vector<double> K(n * n, 0.0), e(n, 0.0), col(n);
  for (std::size_t j = 0; j < n; ++j) {
    e[j] = 1.0;
    model.hessian_apply(u, e, col);
    e[j] = 0.0;
    for (std::size_t i = 0; i < n; ++i) K[i * n + j] = vol[i] * col[i];
    K[j * n + j] += vol[j] / h;
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double s = 0.5 * (K[i * n + j] + K[j * n + i]);
      K[i * n + j] = K[j * n + i] = s;
    }
  // in-place LL^T
  for (std::size_t j = 0; j < n; ++j) {
    double diag = K[j * n + j];
    for (std::size_t k = 0; k < j; ++k) diag -= K[j * n + k] * K[j * n + k];
    if (!(diag > 0.0)) throw std::runtime_error("proximal step: factorization lost positivity");
    const double ljj = std::sqrt(diag);
    K[j * n + j] = ljj;
    for (std::size_t i = j + 1; i < n; ++i) {
      double v = K[i * n + j];
      for (std::size_t k = 0; k < j; ++k) v -= K[i * n + k] * K[j * n + k];
      K[i * n + j] = v / ljj;
    }
  }
  d = b;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < i; ++k) d[i] -= K[i * n + k] * d[k];
    d[i] /= K[i * n + i];
  }
  for (std::size_t ii = n; ii-- > 0;) {
    for (std::size_t k = ii + 1; k < n; ++k) d[ii] -= K[k * n + ii] * d[k];
    d[ii] /= K[ii * n + ii];
  }
}

}  // namespace

std::vector<double> proximal_newton(const EnergyModel& model, std::vector<double> u_prev,
                                    double h, const StepParams& step, NewtonStats* stats) {
  validate(step);
  const std::size_t n = static_cast<std::size_t>(model.size());
  const std::span<const double> vol = model.node_volume();
  std::vector<double> u = u_prev;
  std::vector<double> g(n), r(n), b(n), d(n), diag(n), trial(n);
  std::vector<double> history;

  const double uprev_norm = weighted_norm(u_prev, vol);
  const double tol = step.newton_tol * (1.0 + uprev_norm);

  auto objective = [&](const std::vector<double>& v) {
    double quad = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double dv = v[i] - u_prev[i];
      quad += vol[i] * dv * dv;
    }
    return model.value(v) + 0.5 * quad / h;
  };

  double fu = objective(u);
  for (int iter = 0; iter <= step.max_newton; ++iter) {
    model.gradient(u, g);
    for (std::size_t i = 0; i < n; ++i) r[i] = g[i] + (u[i] - u_prev[i]) / h;
    const double rnorm = weighted_norm(r, vol);
    history.push_back(rnorm);
    if (rnorm <= tol) {
      if (stats != nullptr) {
        stats->iterations = iter;
        stats->residual = rnorm;
      }
      return u;
    }
    if (iter == step.max_newton) break;

    for (std::size_t i = 0; i < n; ++i) b[i] = -vol[i] * r[i];
    if (n < 200) {
      dense_solve(model, u, h, b, d);
    } else {
      model.hessian_diagonal(u, diag);
      for (std::size_t i = 0; i < n; ++i) diag[i] = vol[i] * (diag[i] + 1.0 / h);
      pcg(model, u, h, b, diag, step.linear_tol, d);
    }

    double slope = 0.0;
    for (std::size_t i = 0; i < n; ++i) slope += vol[i] * r[i] * d[i];
    if (!(slope < 0.0)) {
      // fall back to the steepest descent direction
      for (std::size_t i = 0; i < n; ++i) d[i] = -r[i];
      slope = 0.0;
      for (std::size_t i = 0; i < n; ++i) slope += vol[i] * r[i] * d[i];
    }

    double alpha = 1.0;
    bool accepted = false;
    while (alpha >= 1e-14) {
      for (std::size_t i = 0; i < n; ++i) trial[i] = u[i] + alpha * d[i];
      const double ft = objective(trial);
      if (ft <= fu + 1e-4 * alpha * slope) {
        u.swap(trial);
        fu = ft;
        accepted = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!accepted)
      throw NewtonDivergence("proximal step: line search stalled (residual " +
                                 std::to_string(rnorm) + ")",
                             std::move(history), std::move(u));
  }
  const double last_residual = history.back();
  throw NewtonDivergence("proximal step: Newton cap of " + std::to_string(step.max_newton) +
                             " iterations reached (residual " +
                             std::to_string(last_residual) + ")",
                         std::move(history), std::move(u));
}

double resolve_eps(const EpsPolicy& policy, const ScalarField& u) {
  if (const FixedEps* f = std::get_if<FixedEps>(&policy)) return f->eps;
  const AdaptiveEps& a = std::get<AdaptiveEps>(policy);
  GradientField g = gradient(u);
  std::vector<double> mags(g.values.size());
  for (std::size_t i = 0; i < mags.size(); ++i) mags[i] = std::abs(g.values[i]);
  const std::size_t mid = mags.size() / 2;
  std::nth_element(mags.begin(), mags.begin() + static_cast<std::ptrdiff_t>(mid), mags.end());
  return std::max(a.eps_min, a.theta * mags[mid]);
}

ScalarField resolvent(const ScalarField& u_prev, const StepParams& step,
                      const EnergyParams& energy, NewtonStats* stats) {
  require_finite(u_prev, "resolvent");
  EnergyParams prm = energy;
  prm.eps = resolve_eps(step.eps_policy, u_prev);
  GridEnergy model(prm);
  NewtonStats local;
  std::vector<double> u = proximal_newton(model, u_prev.values, step.h, step, &local);
  local.eps_used = prm.eps;
  if (stats != nullptr) *stats = local;
  ScalarField out(*u_prev.grid);
  out.values = std::move(u);
  return out;
}

Trajectory evolve(const ScalarField& u0, const TimeGrid& times, const StepParams& step,
                  const EnergyParams& energy, const std::vector<double>& q_extra,
                  const Observer& observer) {
  validate(step);
  require_finite(u0, "evolve");
  if (times.times.empty()) throw std::invalid_argument("evolve: empty time grid");

  Trajectory traj;
  traj.q_extra = q_extra;
  ScalarField state = u0;
  traj.records.push_back(record(state, 0.0, energy, q_extra, 0, resolve_eps(step.eps_policy, state)));
  if (observer) observer(state, traj.records.back());

  double t_cur = 0.0;
  for (double t_next : times.times) {
    const double span = t_next - t_cur;
    int n_sub = std::max(1, static_cast<int>(std::ceil(span / step.h - 1e-12)));
    constexpr int kMaxDoublings = 20;
    int doublings = 0;
    for (;;) {
      ScalarField attempt = state;
      int max_iters = 0;
      double eps_last = 0.0;
      try {
        StepParams sub = step;
        sub.h = span / n_sub;
        bool slow = false;
        for (int k = 0; k < n_sub; ++k) {
          NewtonStats st;
          attempt = resolvent(attempt, sub, energy, &st);
          max_iters = std::max(max_iters, st.iterations);
          eps_last = st.eps_used;
          if (st.iterations > 15 && doublings < 8) {
            slow = true;
            break;
          }
        }
        if (slow) {
          n_sub *= 2;
          ++doublings;
          continue;
        }
      } catch (const NewtonDivergence& e) {
        if (doublings >= kMaxDoublings)
          throw SolverError("evolve: resolvent diverged near t = " + std::to_string(t_next) +
                                " after substep refinement: " + e.what(),
                            t_next);
        n_sub *= 2;
        ++doublings;
        continue;
      }
      state = std::move(attempt);
      traj.records.push_back(record(state, t_next, energy, q_extra, max_iters, eps_last));
      if (observer) observer(state, traj.records.back());
      break;
    }
    t_cur = t_next;
  }
  traj.final_state = std::move(state);
  return traj;
}

namespace {

ScalarField march(const ScalarField& u0, double t_end, int substeps, const StepParams& step,
                  const EnergyParams& energy) {
  ScalarField state = u0;
  StepParams sub = step;
  sub.h = t_end / substeps;
  for (int k = 0; k < substeps; ++k) state = resolvent(state, sub, energy);
  return state;
}

}  // namespace

ScalingReport scaling_check(const ScalarField& u0, double alpha, double t, int substeps,
                            const StepParams& step, const EnergyParams& energy) {
  if (!(alpha > 0.0)) throw std::invalid_argument("scaling_check: alpha must be > 0");
  if (!(t > 0.0) || substeps < 1)
    throw std::invalid_argument("scaling_check: t > 0 and substeps >= 1 required");
  const Grid& g = *u0.grid;
  const double time_factor = std::pow(alpha, energy.p - 2.0);

  ScalarField scaled(g);
  for (int i = 0; i < g.num_nodes(); ++i) scaled[i] = alpha * u0[i];

  ScalingReport rep;
  rep.alpha = alpha;
  rep.t = t;
  rep.substeps_left = substeps;
  rep.substeps_right = std::max(1, static_cast<int>(std::lround(substeps * time_factor)));

  const ScalarField left = march(scaled, t, rep.substeps_left, step, energy);
  const ScalarField right = march(u0, time_factor * t, rep.substeps_right, step, energy);

  ScalarField diff(g);
  for (int i = 0; i < g.num_nodes(); ++i) diff[i] = left[i] - alpha * right[i];
  rep.discrepancy_l2 = lq_norm(diff, 2.0);
  return rep;
}

double translation_check(const ScalarField& u0, double c, double t, int steps,
                         const StepParams& step, const EnergyParams& energy) {
  if (!std::isfinite(c)) throw std::invalid_argument("translation_check: c must be finite");
  const Grid& g = *u0.grid;
  ScalarField shifted(g);
  for (int i = 0; i < g.num_nodes(); ++i) shifted[i] = u0[i] + c;
  const ScalarField a = march(shifted, t, steps, step, energy);
  const ScalarField b = march(u0, t, steps, step, energy);
  ScalarField diff(g);
  for (int i = 0; i < g.num_nodes(); ++i) diff[i] = a[i] - (b[i] + c);
  return lq_norm(diff, 2.0);
}

}  // namespace plapflow
