// Structured rectangular grid, discrete calculus (gradient / divergence /
// quadrature) with zero-flux Neumann boundaries, and L^q norms.
#pragma once

#include <limits>
#include <vector>

namespace plapflow {

// Axis-aligned neighbor link. `axis` is 0 for x, 1 for y. `volume` is the
// quadrature weight pairing edge data with difference quotients; it is the
// edge length times the transverse trapezoidal width, so that the discrete
// divergence below is the exact negative adjoint of the gradient.
struct Edge {
  int a = 0;
  int b = 0;
  int axis = 0;
  double volume = 0.0;
};

// Immutable after construction. Node volumes are trapezoidal: interior
// hx*hy, boundary halved, corners quartered; they sum to lx*ly exactly.
struct Grid {
  int nx = 0, ny = 0;
  double x0 = 0.0, y0 = 0.0;
  double lx = 0.0, ly = 0.0;
  double hx = 0.0, hy = 0.0;
  std::vector<double> node_volume;
  std::vector<Edge> edges;

  int num_nodes() const { return nx * ny; }
  int num_edges() const { return static_cast<int>(edges.size()); }
  int num_cells() const { return (nx - 1) * (ny - 1); }
  int node(int ix, int iy) const { return iy * nx + ix; }
  double x(int ix) const { return x0 + ix * hx; }
  double y(int iy) const { return y0 + iy * hy; }
  double cell_volume() const { return hx * hy; }
  double area() const { return lx * ly; }
  double diameter() const;

  // Edge ids: x-edges first (row-major), then y-edges.
  int x_edge(int ix, int iy) const { return iy * (nx - 1) + ix; }
  int y_edge(int ix, int iy) const { return (nx - 1) * ny + iy * nx + ix; }
};

Grid build_grid(int nx, int ny, double x0, double y0, double lx, double ly);

// One real value per grid node.
struct ScalarField {
  const Grid* grid = nullptr;
  std::vector<double> values;

  ScalarField() = default;
  explicit ScalarField(const Grid& g, double fill = 0.0)
      : grid(&g), values(static_cast<std::size_t>(g.num_nodes()), fill) {}

  double& operator[](int i) { return values[static_cast<std::size_t>(i)]; }
  double operator[](int i) const { return values[static_cast<std::size_t>(i)]; }
  int size() const { return static_cast<int>(values.size()); }
};

// One real value per edge (directional difference quotient along the edge).
struct GradientField {
  const Grid* grid = nullptr;
  std::vector<double> values;

  GradientField() = default;
  explicit GradientField(const Grid& g, double fill = 0.0)
      : grid(&g), values(static_cast<std::size_t>(g.num_edges()), fill) {}

  double& operator[](int i) { return values[static_cast<std::size_t>(i)]; }
  double operator[](int i) const { return values[static_cast<std::size_t>(i)]; }
  int size() const { return static_cast<int>(values.size()); }
};

inline constexpr double q_infinity = std::numeric_limits<double>::infinity();

// Per-edge difference quotients (u_b - u_a) / h_axis.
GradientField gradient(const ScalarField& u);

// Nodal field with <div F, v>_nodes = -<F, grad v>_edges for every v.
// The identity is exact by construction; its volume-weighted sum vanishes,
// which is the discrete no-flux property.
ScalarField divergence(const GradientField& flux);

// (sum |u_i|^q vol_i)^(1/q); max |u_i| for q = q_infinity. Requires q >= 1.
double lq_norm(const ScalarField& u, double q);

// Volume-weighted mean.
double average(const ScalarField& u);

double node_inner(const ScalarField& a, const ScalarField& b);
double edge_inner(const GradientField& a, const GradientField& b);

// Cell-centered gradient sample: per axis, the mean of the two parallel edge
// quotients of the cell. This one stencil is shared by the energy, the
// weighted p-integral and the trajectory diagnostics.
struct CellGradient {
  double gx = 0.0;
  double gy = 0.0;
};
inline CellGradient cell_gradient(const GradientField& g, int cx, int cy) {
  const Grid& gr = *g.grid;
  return CellGradient{0.5 * (g[gr.x_edge(cx, cy)] + g[gr.x_edge(cx, cy + 1)]),
                      0.5 * (g[gr.y_edge(cx, cy)] + g[gr.y_edge(cx + 1, cy)])};
}

// Fill a field from f(x, y) at the nodes.
template <class F>
ScalarField sample_nodes(const Grid& g, F&& f) {
  ScalarField u(g);
  for (int iy = 0; iy < g.ny; ++iy)
    for (int ix = 0; ix < g.nx; ++ix)
      u[g.node(ix, iy)] = f(g.x(ix), g.y(iy));
  return u;
}

// Throws std::invalid_argument if the field holds a NaN or infinity.
void require_finite(const ScalarField& u, const char* what);

}  // namespace plapflow
