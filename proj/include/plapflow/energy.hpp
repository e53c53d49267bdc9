// Regularized weighted p-Dirichlet energy
//   J_eps(u) = (1/p) * sum_cells gamma * ((|grad u|^2 + eps^2)^(p/2) - eps^p) * vol,
// its first variation and Hessian action. The ^ - eps^p shift pins
// J(const) = 0, so the conservation and fixed-point structure survive the
// regularization.
#pragma once

#include "plapflow/geometry.hpp"
#include "plapflow/weights.hpp"

#include <span>

namespace plapflow {

struct EnergyParams {
  double p = 3.0;
  double eps = 0.0;
  const WeightField* weight = nullptr;
};

// p in (1,inf) without 2, eps >= 0, weight present.
void validate(const EnergyParams& prm);

double energy(const ScalarField& u, const EnergyParams& prm);

// Nodal field g with <g, v>_nodes = d/dt J(u + t v) at t = 0, for every v.
// With eps = 0 and p < 2 every quadrature-point gradient magnitude must be
// nonzero, else the variation is singular and an exception is thrown.
ScalarField energy_gradient(const ScalarField& u, const EnergyParams& prm);

// Action of the second variation at u on v, as a nodal field. Requires
// eps > 0 or p > 2.
ScalarField energy_hessian_apply(const ScalarField& u, const ScalarField& v,
                                 const EnergyParams& prm);

// Discrete energies the proximal Newton step can minimize: value, gradient
// and Hessian action in the volume-weighted L2 pairing, plus the node
// volumes defining that pairing.
class EnergyModel {
 public:
  virtual ~EnergyModel() = default;
  virtual int size() const = 0;
  virtual double value(std::span<const double> u) const = 0;
  virtual void gradient(std::span<const double> u, std::span<double> out) const = 0;
  virtual void hessian_apply(std::span<const double> u, std::span<const double> v,
                             std::span<double> out) const = 0;
  virtual void hessian_diagonal(std::span<const double> u, std::span<double> out) const = 0;
  virtual std::span<const double> node_volume() const = 0;
};

// J_eps on a grid with the shared cell-centered stencil.
class GridEnergy final : public EnergyModel {
 public:
  GridEnergy(const EnergyParams& prm);

  int size() const override;
  double value(std::span<const double> u) const override;
  void gradient(std::span<const double> u, std::span<double> out) const override;
  void hessian_apply(std::span<const double> u, std::span<const double> v,
                     std::span<double> out) const override;
  void hessian_diagonal(std::span<const double> u, std::span<double> out) const override;
  std::span<const double> node_volume() const override;

 private:
  const Grid* grid_;
  const WeightField* weight_;
  double p_;
  double eps_;
};

}  // namespace plapflow
