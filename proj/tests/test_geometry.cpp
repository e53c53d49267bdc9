#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "plapflow/geometry.hpp"

#include <cmath>
#include <cstdint>

using namespace plapflow;

namespace {

double unit_from(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ull;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  z = z ^ (z >> 31);
  return 2.0 * (static_cast<double>(z >> 11) * 0x1.0p-53) - 1.0;
}

ScalarField random_field(const Grid& g, std::uint64_t seed) {
  ScalarField u(g);
  std::uint64_t state = seed;
  for (double& v : u.values) v = unit_from(state);
  return u;
}

}  // namespace

TEST_CASE("build_grid: 2x2 unit square has corner weights") {
  const Grid g = build_grid(2, 2, 0.0, 0.0, 1.0, 1.0);
  CHECK(g.num_nodes() == 4);
  CHECK(g.num_edges() == 4);
  for (double v : g.node_volume) CHECK(v == doctest::Approx(0.25).epsilon(1e-15));
}

TEST_CASE("build_grid: 3x3 quadrature weights sum to the area") {
  const Grid g = build_grid(3, 3, 0.0, 0.0, 1.0, 1.0);
  CHECK(g.num_nodes() == 9);
  CHECK(g.num_edges() == 12);
  double total = 0.0;
  for (double v : g.node_volume) total += v;
  CHECK(total == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("build_grid: 33x33 over a 2x2 square sums to 4 (summation oracle)") {
  const Grid g = build_grid(33, 33, 0.0, 0.0, 2.0, 2.0);
  double total = 0.0;
  for (double v : g.node_volume) total += v;  // the oracle is this direct sum
  CHECK(std::abs(total - 4.0) <= 4.0 * 1e-12);
}

TEST_CASE("build_grid: rejects degenerate inputs") {
  CHECK_THROWS_AS(build_grid(1, 3, 0, 0, 1, 1), std::invalid_argument);
  CHECK_THROWS_AS(build_grid(3, 1, 0, 0, 1, 1), std::invalid_argument);
  CHECK_THROWS_AS(build_grid(3, 3, 0, 0, 0.0, 1), std::invalid_argument);
  CHECK_THROWS_AS(build_grid(3, 3, 0, 0, 1, -2.0), std::invalid_argument);
}

TEST_CASE("gradient: constants vanish, linear fields are exact") {
  const Grid g = build_grid(3, 3, 0.0, 0.0, 1.0, 1.0);
  const ScalarField c(g, 4.2);
  for (double v : gradient(c).values) CHECK(v == 0.0);

  const ScalarField u = sample_nodes(g, [](double x, double) { return x; });
  const GradientField du = gradient(u);
  for (int e = 0; e < g.num_edges(); ++e) {
    const double expected = g.edges[static_cast<std::size_t>(e)].axis == 0 ? 1.0 : 0.0;
    CHECK(du[e] == doctest::Approx(expected).epsilon(1e-14));
  }
}

TEST_CASE("gradient: x^2 difference quotients on a 3-node axis") {
  // nodes at x = 0, 1/2, 1: quotients (0.25-0)/0.5 = 0.5 and (1-0.25)/0.5 = 1.5
  const Grid g = build_grid(3, 2, 0.0, 0.0, 1.0, 1.0);
  const ScalarField u = sample_nodes(g, [](double x, double) { return x * x; });
  const GradientField du = gradient(u);
  for (int iy = 0; iy < 2; ++iy) {
    CHECK(du[g.x_edge(0, iy)] == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(du[g.x_edge(1, iy)] == doctest::Approx(1.5).epsilon(1e-14));
  }
}

TEST_CASE("divergence: zero flux, conservation, adjointness oracle") {
  const Grid g = build_grid(3, 3, 0.0, 0.0, 1.0, 1.0);

  const GradientField zero(g);
  for (double v : divergence(zero).values) CHECK(v == 0.0);

  GradientField flux(g);
  std::uint64_t state = 99;
  for (double& v : flux.values) v = unit_from(state);

  const ScalarField div = divergence(flux);
  double mass = 0.0;
  for (int i = 0; i < g.num_nodes(); ++i)
    mass += div[i] * g.node_volume[static_cast<std::size_t>(i)];
  CHECK(std::abs(mass) <= 1e-13);

  // brute-force inner products on both sides of the adjointness identity
  const ScalarField u = random_field(g, 7);
  const GradientField du = gradient(u);
  double lhs = 0.0;
  for (int i = 0; i < g.num_nodes(); ++i)
    lhs += div[i] * u[i] * g.node_volume[static_cast<std::size_t>(i)];
  double rhs = 0.0;
  for (int e = 0; e < g.num_edges(); ++e)
    rhs -= flux[e] * du[e] * g.edges[static_cast<std::size_t>(e)].volume;
  CHECK(std::abs(lhs - rhs) <= 1e-13);
}

TEST_CASE("divergence: adjointness property over grids up to 5x5") {
  for (int nx = 2; nx <= 5; ++nx)
    for (int ny = 2; ny <= 5; ++ny) {
      const Grid g = build_grid(nx, ny, -0.3, 0.2, 1.7, 0.9);
      for (std::uint64_t seed = 1; seed <= 3; ++seed) {
        GradientField flux(g);
        std::uint64_t state = seed * 131;
        for (double& v : flux.values) v = unit_from(state);
        const ScalarField u = random_field(g, seed);
        const GradientField du = gradient(u);
        const double lhs = node_inner(divergence(flux), u);
        const double rhs = -edge_inner(flux, du);
        const double scale = std::sqrt(edge_inner(flux, flux) * edge_inner(du, du));
        CHECK(std::abs(lhs - rhs) <= 1e-12 * std::max(scale, 1e-10));
      }
    }
}

TEST_CASE("divergence: conservation kernel for any edge field") {
  const Grid g = build_grid(5, 4, 0.0, 0.0, 2.0, 1.0);
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    GradientField flux(g);
    std::uint64_t state = seed;
    double magnitude = 0.0;
    for (double& v : flux.values) {
      v = unit_from(state);
      magnitude = std::max(magnitude, std::abs(v));
    }
    double mass = 0.0;
    for (int i = 0; i < g.num_nodes(); ++i)
      mass += divergence(flux)[i] * g.node_volume[static_cast<std::size_t>(i)];
    CHECK(std::abs(mass) <= 1e-13 * std::max(magnitude, 1.0));
  }
}

TEST_CASE("lq_norm: constants and the analytic x integral") {
  const Grid g = build_grid(9, 9, 0.0, 0.0, 1.0, 1.0);
  CHECK(lq_norm(ScalarField(g, 1.0), 1.0) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(lq_norm(ScalarField(g, 2.0), 2.0) == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(lq_norm(ScalarField(g, -3.0), q_infinity) == doctest::Approx(3.0).epsilon(1e-15));

  // integral of x^2 over the unit square is 1/3; trapezoid error <= 1e-3 at 33x33
  const Grid g33 = build_grid(33, 33, 0.0, 0.0, 1.0, 1.0);
  const ScalarField u = sample_nodes(g33, [](double x, double) { return x; });
  CHECK(std::abs(lq_norm(u, 2.0) - 1.0 / std::sqrt(3.0)) <= 1e-3);

  CHECK_THROWS_AS(lq_norm(u, 0.5), std::invalid_argument);
}

TEST_CASE("average: exact on constants and linears, zero on odd fields") {
  const Grid g = build_grid(9, 9, 0.0, 0.0, 1.0, 1.0);
  CHECK(average(ScalarField(g, 2.5)) == doctest::Approx(2.5).epsilon(1e-14));

  const ScalarField linear = sample_nodes(g, [](double x, double) { return x; });
  CHECK(std::abs(average(linear) - 0.5) <= 1e-12);

  const ScalarField odd = sample_nodes(g, [](double x, double y) {
    return (x - 0.5) * (y - 0.5) * (y - 0.5) * (y - 0.5);
  });
  CHECK(std::abs(average(odd)) <= 1e-13);
}

TEST_CASE("quadrature is exact on affine fields") {
  const Grid g = build_grid(7, 5, -1.0, 2.0, 3.0, 0.5);
  const ScalarField u = sample_nodes(g, [](double x, double y) { return 2.0 * x - y + 0.75; });
  // mean of 2x - y + 0.75 over [-1,2]x[2,2.5] is 2*0.5 - 2.25 + 0.75 = -0.5
  CHECK(average(u) == doctest::Approx(-0.5).epsilon(1e-12));
}
