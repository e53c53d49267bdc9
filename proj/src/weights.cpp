#include "plapflow/weights.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

namespace plapflow {

namespace {

struct Vec2 {
  double x = 0.0, y = 0.0;
};

struct Quad1D {
  double value = 0.0;
  double error = 0.0;
};

template <class F>
void simpson_rec(const F& f, double a, double b, double fa, double fm, double fb,
                 double whole, double tol, int depth, Quad1D& out) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double delta = left + right - whole;
  if (depth <= 0 || std::abs(delta) <= 15.0 * tol) {
    out.value += left + right + delta / 15.0;
    out.error += std::abs(delta) / 15.0;
    return;
  }
  simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1, out);
  simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1, out);
}

template <class F>
Quad1D adaptive_simpson(const F& f, double a, double b, double rel_tol) {
  if (!(b > a)) return {};
  const double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  const double tol = rel_tol * std::max(std::abs(whole), 1e-300);
  Quad1D out;
  simpson_rec(f, a, b, fa, fm, fb, whole, tol, 48, out);
  return out;
}

bool center_in_closure(const WeightSpec& s, const Grid& g) {
  return s.center_x >= g.x0 && s.center_x <= g.x0 + g.lx && s.center_y >= g.y0 &&
         s.center_y <= g.y0 + g.ly;
}

// Signed fan integral of the radial function r -> (scale*max(r^alpha,floor))^e
// over the rectangle, one triangle per boundary edge.
Quad1D fan_radial_integral(const Grid& g, const WeightSpec& s, double exponent) {
  const Vec2 c{s.center_x, s.center_y};
  const Vec2 corners[4] = {{g.x0, g.y0},
                           {g.x0 + g.lx, g.y0},
                           {g.x0 + g.lx, g.y0 + g.ly},
                           {g.x0, g.y0 + g.ly}};
  Quad1D total;
  for (int k = 0; k < 4; ++k) {
    const Vec2 A = corners[k];
    const Vec2 B = corners[(k + 1) % 4];
    const Vec2 va{A.x - c.x, A.y - c.y};
    const Vec2 vb{B.x - c.x, B.y - c.y};
    const double cross = va.x * vb.y - va.y * vb.x;
    if (cross == 0.0) continue;  // center on the edge line: degenerate triangle

    // Perpendicular foot from the center onto the line AB.
    const Vec2 ab{B.x - A.x, B.y - A.y};
    const double ab2 = ab.x * ab.x + ab.y * ab.y;
    const double tproj = (-(va.x) * ab.x - (va.y) * ab.y) / ab2;
    const Vec2 foot{A.x + tproj * ab.x - c.x, A.y + tproj * ab.y - c.y};
    const double d = std::hypot(foot.x, foot.y);
    if (d == 0.0) continue;
    const double phi = std::atan2(foot.y, foot.x);

    const double theta_a = std::atan2(va.y, va.x);
    double theta_b = std::atan2(vb.y, vb.x);
    double span = theta_b - theta_a;
    while (span > M_PI) span -= 2.0 * M_PI;
    while (span < -M_PI) span += 2.0 * M_PI;
    const double sign = span >= 0.0 ? 1.0 : -1.0;

    auto integrand = [&](double t) {
      const double theta = theta_a + sign * t;
      const double rho = d / std::cos(theta - phi);
      return radial_power_primitive(rho, s.alpha, s.floor, s.scale, exponent);
    };
    const Quad1D part = adaptive_simpson(integrand, 0.0, std::abs(span), 1e-13);
    total.value += sign * part.value;
    total.error += part.error;
  }
  return total;
}

}  // namespace

double WeightSpec::evaluate(double x, double y, const Grid& g) const {
  switch (family) {
    case WeightFamily::Constant:
      return c;
    case WeightFamily::Power: {
      if (alpha == 0.0) return scale * std::max(1.0, floor);
      const double r = std::hypot(x - center_x, y - center_y);
      return scale * std::max(std::pow(r, alpha), floor);
    }
    case WeightFamily::Checkerboard: {
      const bool right = x >= g.x0 + 0.5 * g.lx;
      const bool top = y >= g.y0 + 0.5 * g.ly;
      return (right == top) ? c1 : c2;
    }
    case WeightFamily::Table: {
      int cx = static_cast<int>((x - g.x0) / g.hx);
      int cy = static_cast<int>((y - g.y0) / g.hy);
      cx = std::clamp(cx, 0, g.nx - 2);
      cy = std::clamp(cy, 0, g.ny - 2);
      return cell_values[static_cast<std::size_t>(cy * (g.nx - 1) + cx)];
    }
  }
  throw std::logic_error("WeightSpec::evaluate: unknown family");
}

WeightField make_weight(const Grid& g, const WeightSpec& spec, int dim) {
  if (dim < 2) throw std::invalid_argument("make_weight: ambient dimension must be >= 2");
  switch (spec.family) {
    case WeightFamily::Constant:
      if (!(spec.c > 0.0) || !std::isfinite(spec.c))
        throw std::invalid_argument("make_weight: constant weight must be positive and finite");
      break;
    case WeightFamily::Power:
      if (spec.alpha < 0.0)
        throw std::invalid_argument(
            "make_weight: power weights with alpha < 0 are unbounded and not supported");
      if (spec.floor < 0.0) throw std::invalid_argument("make_weight: floor must be >= 0");
      if (!(spec.scale > 0.0)) throw std::invalid_argument("make_weight: scale must be > 0");
      break;
    case WeightFamily::Checkerboard:
      if (!(spec.c1 > 0.0) || !(spec.c2 > 0.0))
        throw std::invalid_argument("make_weight: checkerboard values must be positive");
      break;
    case WeightFamily::Table:
      if (static_cast<int>(spec.cell_values.size()) != g.num_cells())
        throw std::invalid_argument("make_weight: table needs one value per grid cell, expected " +
                                    std::to_string(g.num_cells()) + " got " +
                                    std::to_string(spec.cell_values.size()));
      for (double v : spec.cell_values)
        if (!(v > 0.0) || !std::isfinite(v))
          throw std::invalid_argument("make_weight: table values must be positive and finite");
      break;
  }

  WeightField w;
  w.grid = &g;
  w.spec = spec;
  w.dim = dim;

  w.node_gamma.resize(static_cast<std::size_t>(g.num_nodes()));
  if (spec.family == WeightFamily::Table) {
    // Node and edge samples of a table weight are means of the touching cells.
    auto cell_value = [&](int cx, int cy) {
      return spec.cell_values[static_cast<std::size_t>(cy * (g.nx - 1) + cx)];
    };
    for (int iy = 0; iy < g.ny; ++iy)
      for (int ix = 0; ix < g.nx; ++ix) {
        double acc = 0.0;
        int cnt = 0;
        for (int cy = iy - 1; cy <= iy; ++cy)
          for (int cx = ix - 1; cx <= ix; ++cx)
            if (cx >= 0 && cx < g.nx - 1 && cy >= 0 && cy < g.ny - 1) {
              acc += cell_value(cx, cy);
              ++cnt;
            }
        w.node_gamma[static_cast<std::size_t>(g.node(ix, iy))] = acc / cnt;
      }
    w.edge_gamma.resize(static_cast<std::size_t>(g.num_edges()));
    for (int e = 0; e < g.num_edges(); ++e) {
      const Edge& ed = g.edges[static_cast<std::size_t>(e)];
      const int ax = ed.a % g.nx, ay = ed.a / g.nx;
      double acc = 0.0;
      int cnt = 0;
      if (ed.axis == 0) {
        for (int cy = ay - 1; cy <= ay; ++cy)
          if (cy >= 0 && cy < g.ny - 1) {
            acc += cell_value(ax, cy);
            ++cnt;
          }
      } else {
        for (int cx = ax - 1; cx <= ax; ++cx)
          if (cx >= 0 && cx < g.nx - 1) {
            acc += cell_value(cx, ay);
            ++cnt;
          }
      }
      w.edge_gamma[static_cast<std::size_t>(e)] = acc / cnt;
    }
  } else {
    for (int iy = 0; iy < g.ny; ++iy)
      for (int ix = 0; ix < g.nx; ++ix)
        w.node_gamma[static_cast<std::size_t>(g.node(ix, iy))] =
            spec.evaluate(g.x(ix), g.y(iy), g);
    w.edge_gamma.resize(static_cast<std::size_t>(g.num_edges()));
    for (int e = 0; e < g.num_edges(); ++e) {
      const Edge& ed = g.edges[static_cast<std::size_t>(e)];
      const double mx = 0.5 * (g.x(ed.a % g.nx) + g.x(ed.b % g.nx));
      const double my = 0.5 * (g.y(ed.a / g.nx) + g.y(ed.b / g.nx));
      w.edge_gamma[static_cast<std::size_t>(e)] = spec.evaluate(mx, my, g);
    }
  }

  w.cell_gamma.resize(static_cast<std::size_t>(g.num_cells()));
  for (int cy = 0; cy < g.ny - 1; ++cy)
    for (int cx = 0; cx < g.nx - 1; ++cx) {
      const double mx = g.x0 + (cx + 0.5) * g.hx;
      const double my = g.y0 + (cy + 0.5) * g.hy;
      w.cell_gamma[static_cast<std::size_t>(cy * (g.nx - 1) + cx)] =
          spec.family == WeightFamily::Table
              ? spec.cell_values[static_cast<std::size_t>(cy * (g.nx - 1) + cx)]
              : spec.evaluate(mx, my, g);
    }

  // Positivity is required where quadrature and fluxes read the weight. A
  // power weight with floor 0 may vanish at the center itself; that point is
  // never an edge or cell midpoint of a valid configuration.
  for (double v : w.edge_gamma)
    if (!(v > 0.0) || !std::isfinite(v))
      throw std::invalid_argument(
          "make_weight: weight vanishes at an edge midpoint; shift the center or use floor > 0");
  for (double v : w.cell_gamma)
    if (!(v > 0.0) || !std::isfinite(v))
      throw std::invalid_argument(
          "make_weight: weight vanishes at a cell midpoint; shift the center or use floor > 0");

  double m = 0.0;
  for (double v : w.node_gamma) m = std::max(m, v);
  for (double v : w.edge_gamma) m = std::max(m, v);
  for (double v : w.cell_gamma) m = std::max(m, v);
  switch (spec.family) {
    case WeightFamily::Constant:
      w.sup_bound = spec.c;
      break;
    case WeightFamily::Power: {
      double rmax = 0.0;
      for (double cx2 : {g.x0, g.x0 + g.lx})
        for (double cy2 : {g.y0, g.y0 + g.ly})
          rmax = std::max(rmax, std::hypot(cx2 - spec.center_x, cy2 - spec.center_y));
      w.sup_bound = spec.alpha == 0.0
                        ? spec.scale * std::max(1.0, spec.floor)
                        : spec.scale * std::max(std::pow(rmax, spec.alpha), spec.floor);
      break;
    }
    case WeightFamily::Checkerboard:
      w.sup_bound = std::max(spec.c1, spec.c2);
      break;
    case WeightFamily::Table:
      w.sup_bound = m;
      break;
  }
  w.sup_bound = std::max(w.sup_bound, m);
  return w;
}

double p0(const WeightField& w) {
  switch (w.spec.family) {
    case WeightFamily::Constant:
    case WeightFamily::Checkerboard:
    case WeightFamily::Table:
      return 1.0;
    case WeightFamily::Power: {
      if (w.spec.alpha < 0.0)
        throw std::invalid_argument("p0: unsupported power configuration (alpha < 0)");
      if (w.spec.alpha == 0.0 || w.spec.floor > 0.0) return 1.0;
      if (!center_in_closure(w.spec, *w.grid)) return 1.0;
      return 1.0 + w.spec.alpha / w.dim;
    }
  }
  throw std::logic_error("p0: unknown family");
}

double weighted_p_integral(const WeightField& w, const GradientField& g, double p) {
  if (!(p > 1.0)) throw std::invalid_argument("weighted_p_integral: requires p > 1");
  if (w.grid != g.grid)
    throw std::invalid_argument("weighted_p_integral: weight and gradient on different grids");
  const Grid& gr = *w.grid;
  const double vol = gr.cell_volume();
  double acc = 0.0;
  for (int cy = 0; cy < gr.ny - 1; ++cy)
    for (int cx = 0; cx < gr.nx - 1; ++cx) {
      const CellGradient cg = cell_gradient(g, cx, cy);
      const double s = cg.gx * cg.gx + cg.gy * cg.gy;
      acc += w.cell_gamma[static_cast<std::size_t>(cy * (gr.nx - 1) + cx)] *
             std::pow(s, 0.5 * p) * vol;
    }
  return acc;
}

double radial_power_primitive(double rho, double alpha, double floor, double scale,
                              double exponent) {
  if (rho <= 0.0) return 0.0;
  const double se = std::pow(scale, exponent);
  if (alpha == 0.0) {
    const double base = std::max(1.0, floor);
    return se * std::pow(base, exponent) * 0.5 * rho * rho;
  }
  const double ae2 = alpha * exponent + 2.0;
  auto tail = [&](double lo, double hi) {
    // integral of r^(alpha*e + 1) dr over [lo, hi]
    if (ae2 == 0.0) return std::log(hi / lo);
    return (std::pow(hi, ae2) - std::pow(lo, ae2)) / ae2;
  };
  if (floor <= 0.0) {
    if (ae2 <= 0.0)
      throw DivergentIntegral("radial_power_primitive: integral diverges at the center");
    return se * std::pow(rho, ae2) / ae2;
  }
  const double rf = std::pow(floor, 1.0 / alpha);
  const double fe = std::pow(floor, exponent);
  if (rho <= rf) return se * fe * 0.5 * rho * rho;
  return se * (fe * 0.5 * rf * rf + tail(rf, rho));
}

IntegralEstimate gamma_power_integral(const WeightField& w, double exponent) {
  const Grid& g = *w.grid;
  const WeightSpec& s = w.spec;
  switch (s.family) {
    case WeightFamily::Constant:
      return {std::pow(s.c, exponent) * g.area(), 0.0, true};
    case WeightFamily::Checkerboard:
      return {0.5 * g.area() * (std::pow(s.c1, exponent) + std::pow(s.c2, exponent)), 0.0, true};
    case WeightFamily::Table: {
      double acc = 0.0;
      for (double v : s.cell_values) acc += std::pow(v, exponent) * g.cell_volume();
      return {acc, 0.0, true};
    }
    case WeightFamily::Power: {
      if (s.alpha == 0.0) {
        const double c = s.scale * std::max(1.0, s.floor);
        return {std::pow(c, exponent) * g.area(), 0.0, true};
      }
      if (s.floor <= 0.0 && s.alpha * exponent + 2.0 <= 0.0 && center_in_closure(s, g))
        throw DivergentIntegral(
            "gamma_power_integral: exponent at or beyond the integrability threshold "
            "(alpha*exponent <= -2 with floor 0 and center in the closed domain)");
      const Quad1D q = fan_radial_integral(g, s, exponent);
      return {q.value, q.error, false};
    }
  }
  throw std::logic_error("gamma_power_integral: unknown family");
}

double gamma_delta_p(const WeightField& w, double delta, double p) {
  if (!(p > 1.0)) throw std::invalid_argument("gamma_delta_p: requires p > 1");
  if (p == 2.0) throw std::invalid_argument("gamma_delta_p: p = 2 is excluded");
  const double dmax = admissible_delta_max(w, p);
  if (!(delta >= 0.0) || !(delta < dmax))
    throw std::invalid_argument("gamma_delta_p: delta outside admissible range [0, " +
                                std::to_string(dmax) + ")");
  const double inner = (1.0 + delta) / (1.0 + delta - p);
  const IntegralEstimate I = gamma_power_integral(w, inner);
  const double outer = (p - 1.0 - delta) / (p * (1.0 + delta));
  return std::pow(I.value, outer) * std::pow(2.0 / std::abs(p - 2.0), 1.0 / p);
}

double gamma_tilde(const WeightField& w, int n, double p) {
  if (n < 2) throw std::invalid_argument("gamma_tilde: requires n >= 2");
  const double lower = extinction_window_lower(p0(w), n);
  if (!(lower < 2.0))
    throw std::invalid_argument("gamma_tilde: extinction window is empty for this weight");
  if (!(p > lower) || !(p < 2.0))
    throw std::invalid_argument("gamma_tilde: p outside the extinction window (" +
                                std::to_string(lower) + ", 2)");
  const double inner = 2.0 * n / (2.0 * n - n * p - 2.0 * p);
  const double outer = (n * p + 2.0 * p - 2.0 * n) / (2.0 * n);
  const IntegralEstimate I = gamma_power_integral(w, inner);
  return std::pow(I.value, outer);
}

bool muckenhoupt_admissible(const WeightSpec& spec, double p, int n) {
  switch (spec.family) {
    case WeightFamily::Constant:
    case WeightFamily::Checkerboard:
      return true;
    case WeightFamily::Power:
      return spec.alpha >= 0.0 && spec.alpha < n * (p - 1.0);
    case WeightFamily::Table:
      return false;  // no certificate for arbitrary tables
  }
  return false;
}

double muckenhoupt_spot_check(const WeightField& w, double p, int levels) {
  const Grid& g = *w.grid;
  const double e = 1.0 / (1.0 - p);
  double worst = 0.0;
  for (int lev = 0; lev <= levels; ++lev) {
    const int parts = 1 << lev;
    std::vector<double> sum1(static_cast<std::size_t>(parts * parts), 0.0);
    std::vector<double> sum2(static_cast<std::size_t>(parts * parts), 0.0);
    std::vector<double> vol(static_cast<std::size_t>(parts * parts), 0.0);
    for (int cy = 0; cy < g.ny - 1; ++cy)
      for (int cx = 0; cx < g.nx - 1; ++cx) {
        const double mx = g.x0 + (cx + 0.5) * g.hx;
        const double my = g.y0 + (cy + 0.5) * g.hy;
        int bx = std::min(parts - 1, static_cast<int>((mx - g.x0) / g.lx * parts));
        int by = std::min(parts - 1, static_cast<int>((my - g.y0) / g.ly * parts));
        const double gam = w.cell_gamma[static_cast<std::size_t>(cy * (g.nx - 1) + cx)];
        const std::size_t b = static_cast<std::size_t>(by * parts + bx);
        sum1[b] += gam * g.cell_volume();
        sum2[b] += std::pow(gam, e) * g.cell_volume();
        vol[b] += g.cell_volume();
      }
    for (std::size_t b = 0; b < vol.size(); ++b) {
      if (vol[b] <= 0.0) continue;
      const double a1 = sum1[b] / vol[b];
      const double a2 = sum2[b] / vol[b];
      worst = std::max(worst, a1 * std::pow(a2, p - 1.0));
    }
  }
  return worst;
}

}  // namespace plapflow
