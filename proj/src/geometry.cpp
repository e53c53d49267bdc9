#include "plapflow/geometry.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace plapflow {

double Grid::diameter() const { return std::hypot(lx, ly); }

Grid build_grid(int nx, int ny, double x0, double y0, double lx, double ly) {
  if (nx < 2 || ny < 2)
    throw std::invalid_argument("build_grid: need at least 2 nodes per axis, got " +
                                std::to_string(nx) + "x" + std::to_string(ny));
  if (!(lx > 0.0) || !(ly > 0.0))
    throw std::invalid_argument("build_grid: domain extents must be positive");

  Grid g;
  g.nx = nx;
  g.ny = ny;
  g.x0 = x0;
  g.y0 = y0;
  g.lx = lx;
  g.ly = ly;
  g.hx = lx / (nx - 1);
  g.hy = ly / (ny - 1);

  auto wx = [&](int ix) { return (ix == 0 || ix == nx - 1) ? 0.5 * g.hx : g.hx; };
  auto wy = [&](int iy) { return (iy == 0 || iy == ny - 1) ? 0.5 * g.hy : g.hy; };

  g.node_volume.resize(static_cast<std::size_t>(nx) * ny);
  for (int iy = 0; iy < ny; ++iy)
    for (int ix = 0; ix < nx; ++ix)
      g.node_volume[static_cast<std::size_t>(g.node(ix, iy))] = wx(ix) * wy(iy);

  g.edges.reserve(static_cast<std::size_t>((nx - 1) * ny + nx * (ny - 1)));
  for (int iy = 0; iy < ny; ++iy)
    for (int ix = 0; ix < nx - 1; ++ix)
      g.edges.push_back(Edge{g.node(ix, iy), g.node(ix + 1, iy), 0, g.hx * wy(iy)});
  for (int iy = 0; iy < ny - 1; ++iy)
    for (int ix = 0; ix < nx; ++ix)
      g.edges.push_back(Edge{g.node(ix, iy), g.node(ix, iy + 1), 1, g.hy * wx(ix)});
  return g;
}

GradientField gradient(const ScalarField& u) {
  const Grid& g = *u.grid;
  GradientField out(g);
  for (int e = 0; e < g.num_edges(); ++e) {
    const Edge& ed = g.edges[static_cast<std::size_t>(e)];
    const double h = ed.axis == 0 ? g.hx : g.hy;
    out[e] = (u[ed.b] - u[ed.a]) / h;
  }
  return out;
}

ScalarField divergence(const GradientField& flux) {
  const Grid& g = *flux.grid;
  ScalarField out(g);
  for (int e = 0; e < g.num_edges(); ++e) {
    const Edge& ed = g.edges[static_cast<std::size_t>(e)];
    const double h = ed.axis == 0 ? g.hx : g.hy;
    const double w = flux[e] * ed.volume / h;
    out[ed.a] += w;
    out[ed.b] -= w;
  }
  for (int i = 0; i < g.num_nodes(); ++i) out[i] /= g.node_volume[static_cast<std::size_t>(i)];
  return out;
}

double lq_norm(const ScalarField& u, double q) {
  const Grid& g = *u.grid;
  if (q == q_infinity) {
    double m = 0.0;
    for (double v : u.values) m = std::max(m, std::abs(v));
    return m;
  }
  if (!(q >= 1.0)) throw std::invalid_argument("lq_norm: q must be >= 1 or infinity");
  double acc = 0.0;
  for (int i = 0; i < g.num_nodes(); ++i)
    acc += std::pow(std::abs(u[i]), q) * g.node_volume[static_cast<std::size_t>(i)];
  return std::pow(acc, 1.0 / q);
}

double average(const ScalarField& u) {
  const Grid& g = *u.grid;
  double acc = 0.0;
  for (int i = 0; i < g.num_nodes(); ++i) acc += u[i] * g.node_volume[static_cast<std::size_t>(i)];
  return acc / g.area();
}

double node_inner(const ScalarField& a, const ScalarField& b) {
  const Grid& g = *a.grid;
  double acc = 0.0;
  for (int i = 0; i < g.num_nodes(); ++i)
    acc += a[i] * b[i] * g.node_volume[static_cast<std::size_t>(i)];
  return acc;
}

double edge_inner(const GradientField& a, const GradientField& b) {
  const Grid& g = *a.grid;
  double acc = 0.0;
  for (int e = 0; e < g.num_edges(); ++e)
    acc += a[e] * b[e] * g.edges[static_cast<std::size_t>(e)].volume;
  return acc;
}

void require_finite(const ScalarField& u, const char* what) {
  for (double v : u.values)
    if (!std::isfinite(v))
      throw std::invalid_argument(std::string(what) + ": field has non-finite values");
}

}  // namespace plapflow
