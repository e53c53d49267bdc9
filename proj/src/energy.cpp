#include "plapflow/energy.hpp"

#include <cmath>
#include <stdexcept>

namespace plapflow {

void validate(const EnergyParams& prm) {
  if (!(prm.p > 1.0))
    throw std::invalid_argument("energy: requires p > 1, got " + std::to_string(prm.p));
  if (prm.p == 2.0)
    throw std::invalid_argument("energy: excluded parameter p = 2 (linear case)");
  if (!(prm.eps >= 0.0)) throw std::invalid_argument("energy: eps must be >= 0");
  if (prm.weight == nullptr || prm.weight->grid == nullptr)
    throw std::invalid_argument("energy: weight field missing");
}

namespace {

// Cell loop shared by value/gradient/hessian. Emits per-cell the averaged
// quotients of u (and of a direction v when given).
struct CellStencil {
  int n00, n10, n01, n11;
  double gx, gy;
};

template <class Fn>
void for_each_cell(const Grid& g, std::span<const double> u, Fn&& fn) {
  const double ihx2 = 0.5 / g.hx;
  const double ihy2 = 0.5 / g.hy;
  for (int cy = 0; cy < g.ny - 1; ++cy)
    for (int cx = 0; cx < g.nx - 1; ++cx) {
      CellStencil c;
      c.n00 = g.node(cx, cy);
      c.n10 = g.node(cx + 1, cy);
      c.n01 = g.node(cx, cy + 1);
      c.n11 = g.node(cx + 1, cy + 1);
      c.gx = (u[c.n10] - u[c.n00] + u[c.n11] - u[c.n01]) * ihx2;
      c.gy = (u[c.n01] - u[c.n00] + u[c.n11] - u[c.n10]) * ihy2;
      fn(cy * (g.nx - 1) + cx, c);
    }
}

}  // namespace

GridEnergy::GridEnergy(const EnergyParams& prm)
    : grid_(prm.weight ? prm.weight->grid : nullptr),
      weight_(prm.weight),
      p_(prm.p),
      eps_(prm.eps) {
  validate(prm);
}

int GridEnergy::size() const { return grid_->num_nodes(); }

std::span<const double> GridEnergy::node_volume() const {
  return {grid_->node_volume.data(), grid_->node_volume.size()};
}

double GridEnergy::value(std::span<const double> u) const {
  const Grid& g = *grid_;
  const double eps2 = eps_ * eps_;
  const double eps_p = std::pow(eps2, 0.5 * p_);
  double acc = 0.0;
  for_each_cell(g, u, [&](int cell, const CellStencil& c) {
    const double s = c.gx * c.gx + c.gy * c.gy;
    acc += weight_->cell_gamma[static_cast<std::size_t>(cell)] *
           (std::pow(s + eps2, 0.5 * p_) - eps_p);
  });
  return acc * g.cell_volume() / p_;
}

void GridEnergy::gradient(std::span<const double> u, std::span<double> out) const {
  const Grid& g = *grid_;
  const double eps2 = eps_ * eps_;
  const double vol = g.cell_volume();
  const double ihx2 = 0.5 / g.hx;
  const double ihy2 = 0.5 / g.hy;
  std::fill(out.begin(), out.end(), 0.0);
  for_each_cell(g, u, [&](int cell, const CellStencil& c) {
    const double s = c.gx * c.gx + c.gy * c.gy;
    const double t = s + eps2;
    if (t == 0.0) {
      if (p_ < 2.0)
        throw std::invalid_argument(
            "energy_gradient: singular point (eps = 0, p < 2, vanishing gradient)");
      return;  // p > 2: the flux vanishes smoothly
    }
    const double w =
        weight_->cell_gamma[static_cast<std::size_t>(cell)] * vol * std::pow(t, 0.5 * p_ - 1.0);
    const double ax = w * c.gx * ihx2;
    const double ay = w * c.gy * ihy2;
    out[c.n00] += -ax - ay;
    out[c.n10] += ax - ay;
    out[c.n01] += -ax + ay;
    out[c.n11] += ax + ay;
  });
  for (int i = 0; i < g.num_nodes(); ++i) out[i] /= g.node_volume[static_cast<std::size_t>(i)];
}

void GridEnergy::hessian_apply(std::span<const double> u, std::span<const double> v,
                               std::span<double> out) const {
  if (!(eps_ > 0.0 || p_ > 2.0))
    throw std::invalid_argument("energy_hessian_apply: requires eps > 0 or p > 2");
  const Grid& g = *grid_;
  const double eps2 = eps_ * eps_;
  const double vol = g.cell_volume();
  const double ihx2 = 0.5 / g.hx;
  const double ihy2 = 0.5 / g.hy;
  std::fill(out.begin(), out.end(), 0.0);
  for_each_cell(g, u, [&](int cell, const CellStencil& c) {
    const double s = c.gx * c.gx + c.gy * c.gy;
    const double t = s + eps2;
    if (t == 0.0) return;
    const double vx = (v[c.n10] - v[c.n00] + v[c.n11] - v[c.n01]) * ihx2;
    const double vy = (v[c.n01] - v[c.n00] + v[c.n11] - v[c.n10]) * ihy2;
    const double gamma_vol = weight_->cell_gamma[static_cast<std::size_t>(cell)] * vol;
    const double w1 = std::pow(t, 0.5 * p_ - 1.0);
    const double w2 = (p_ - 2.0) * std::pow(t, 0.5 * p_ - 2.0);
    const double dot = c.gx * vx + c.gy * vy;
    const double bx = gamma_vol * (w1 * vx + w2 * dot * c.gx);
    const double by = gamma_vol * (w1 * vy + w2 * dot * c.gy);
    const double ax = bx * ihx2;
    const double ay = by * ihy2;
    out[c.n00] += -ax - ay;
    out[c.n10] += ax - ay;
    out[c.n01] += -ax + ay;
    out[c.n11] += ax + ay;
  });
  for (int i = 0; i < g.num_nodes(); ++i) out[i] /= g.node_volume[static_cast<std::size_t>(i)];
}

void GridEnergy::hessian_diagonal(std::span<const double> u, std::span<double> out) const {
  const Grid& g = *grid_;
  const double eps2 = eps_ * eps_;
  const double vol = g.cell_volume();
  const double ihx2 = 0.5 / g.hx;
  const double ihy2 = 0.5 / g.hy;
  std::fill(out.begin(), out.end(), 0.0);
  for_each_cell(g, u, [&](int cell, const CellStencil& c) {
    const double s = c.gx * c.gx + c.gy * c.gy;
    const double t = s + eps2;
    if (t == 0.0) return;
    const double gamma_vol = weight_->cell_gamma[static_cast<std::size_t>(cell)] * vol;
    const double w1 = std::pow(t, 0.5 * p_ - 1.0);
    const double w2 = (p_ - 2.0) * std::pow(t, 0.5 * p_ - 2.0);
    const int nodes[4] = {c.n00, c.n10, c.n01, c.n11};
    const double sx[4] = {-1.0, 1.0, -1.0, 1.0};
    const double sy[4] = {-1.0, -1.0, 1.0, 1.0};
    for (int k = 0; k < 4; ++k) {
      const double cxk = sx[k] * ihx2;
      const double cyk = sy[k] * ihy2;
      const double dirg = c.gx * cxk + c.gy * cyk;
      out[nodes[k]] += gamma_vol * (w1 * (cxk * cxk + cyk * cyk) + w2 * dirg * dirg);
    }
  });
  for (int i = 0; i < g.num_nodes(); ++i) out[i] /= g.node_volume[static_cast<std::size_t>(i)];
}

double energy(const ScalarField& u, const EnergyParams& prm) {
  GridEnergy model(prm);
  return model.value({u.values.data(), u.values.size()});
}

ScalarField energy_gradient(const ScalarField& u, const EnergyParams& prm) {
  GridEnergy model(prm);
  ScalarField out(*u.grid);
  model.gradient({u.values.data(), u.values.size()}, {out.values.data(), out.values.size()});
  return out;
}

ScalarField energy_hessian_apply(const ScalarField& u, const ScalarField& v,
                                 const EnergyParams& prm) {
  GridEnergy model(prm);
  ScalarField out(*u.grid);
  model.hessian_apply({u.values.data(), u.values.size()}, {v.values.data(), v.values.size()},
                      {out.values.data(), out.values.size()});
  return out;
}

}  // namespace plapflow
