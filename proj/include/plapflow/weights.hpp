// Weight families for the diffusion coefficient, their integrability
// threshold p0, weighted integrals, and the weight-dependent constants that
// convert weighted gradient norms into unweighted ones.
#pragma once

#include "plapflow/geometry.hpp"

#include <stdexcept>
#include <string>
#include <vector>

namespace plapflow {

enum class WeightFamily { Constant, Power, Checkerboard, Table };

// Power weights are scale * max(|x - center|^alpha, floor). Checkerboard
// takes value c1 on the bottom-left/top-right midline quadrants and c2 on
// the other two. Table is piecewise constant per grid cell.
struct WeightSpec {
  WeightFamily family = WeightFamily::Constant;
  double c = 1.0;
  double center_x = 0.0, center_y = 0.0;
  double alpha = 0.0, floor = 0.0, scale = 1.0;
  double c1 = 1.0, c2 = 1.0;
  std::vector<double> cell_values;

  double evaluate(double x, double y, const Grid& g) const;
  bool operator==(const WeightSpec&) const = default;
};

// Samples of the weight on a grid. Fluxes read the edge samples (edge
// midpoints), integrals the cell samples (cell midpoints); node samples are
// kept for inspection. `dim` is the ambient dimension entering the p0 and
// extinction-window formulas.
struct WeightField {
  const Grid* grid = nullptr;
  WeightSpec spec;
  int dim = 2;
  double sup_bound = 0.0;
  std::vector<double> node_gamma, edge_gamma, cell_gamma;
};

WeightField make_weight(const Grid& g, const WeightSpec& spec, int dim = 2);

// inf { q > 1 : gamma^(1/(1-q)) integrable }, from family metadata.
// Bounded-below families give 1; power weights with floor 0 and the center
// in the closed domain give 1 + alpha/dim.
double p0(const WeightField& w);

inline double admissible_delta_max(const WeightField& w, double p) {
  const double q0 = p0(w);
  return (p - q0) / q0;
}

// integral of gamma |grad u|^p over S, cell-centered stencil (identical to
// the energy stencil). Requires p > 1.
double weighted_p_integral(const WeightField& w, const GradientField& g, double p);

struct IntegralEstimate {
  double value = 0.0;
  double error_estimate = 0.0;
  bool closed_form = false;
};

// Thrown when integral of gamma^exponent diverges by the closed-form test.
class DivergentIntegral : public std::runtime_error {
 public:
  explicit DivergentIntegral(const std::string& msg) : std::runtime_error(msg) {}
};

// integral of gamma^exponent over S. Closed form for constant, checkerboard
// and table families; power families integrate the radial closed-form
// primitive over a fan of triangles with adaptive quadrature in the angle.
IntegralEstimate gamma_power_integral(const WeightField& w, double exponent);

// ( integral gamma^((1+delta)/(1+delta-p)) )^((p-1-delta)/(p(1+delta)))
//   * (2/|p-2|)^(1/p),   requires 0 <= delta < (p - p0)/p0 and p != 2.
double gamma_delta_p(const WeightField& w, double delta, double p);

// ( integral gamma^(2n/(2n-np-2p)) )^((np+2p-2n)/(2n)), requires p in the
// extinction window (p0*2n/(n+2), 2).
double gamma_tilde(const WeightField& w, int n, double p);

inline double extinction_window_lower(double p0_value, int n) {
  return p0_value * 2.0 * n / (n + 2.0);
}

// closed form of integral_0^rho (scale * max(r^alpha, floor))^e r dr.
double radial_power_primitive(double rho, double alpha, double floor, double scale,
                              double exponent);

// Family-metadata assertion that the weight extends to a Muckenhoupt A_p
// weight. Table families cannot be certified and return false.
bool muckenhoupt_admissible(const WeightSpec& spec, double p, int n);

// Diagnostic only: max of the A_p product over dyadic sub-squares, sampled
// with cell sums. Not a verification.
double muckenhoupt_spot_check(const WeightField& w, double p, int levels);

}  // namespace plapflow
