#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "overlapq/dist.hpp"
#include "overlapq/numerics.hpp"
#include "overlapq/quadrature.hpp"

using namespace overlapq;

namespace {

// Uniform grid [0, hi] with the given step count per unit.
std::vector<double> make_grid(double hi, int per_unit) {
  std::vector<double> g;
  const int n = static_cast<int>(std::lround(hi * per_unit));
  g.reserve(static_cast<std::size_t>(n) + 1);
  for (int i = 0; i <= n; ++i) g.push_back(static_cast<double>(i) / per_unit);
  return g;
}

}  // namespace

TEST_CASE("semi-infinite integrals of exponentials") {
  const auto e = ContinuousDist::exponential(1.0);
  const auto r1 = integrate_semiinfinite([](double x) { return std::exp(-x); }, e);
  CHECK(r1.value == Catch::Approx(1.0).margin(1e-10));

  const auto r2 = integrate_semiinfinite([](double x) { return std::exp(-2.0 * x); }, e);
  CHECK(r2.value == Catch::Approx(0.5).margin(1e-10));

  const auto g = ContinuousDist::erlang(2, 1.0);
  const auto r3 = integrate_semiinfinite([](double x) { return x * std::exp(-x); }, g);
  CHECK(r3.value == Catch::Approx(1.0).margin(1e-8));
}

TEST_CASE("semi-infinite integral of each density is one") {
  const std::vector<ContinuousDist> families = {
      ContinuousDist::exponential(0.7), ContinuousDist::erlang(3, 2.0),
      ContinuousDist::uniform(0.5, 2.0), ContinuousDist::lognormal(0.0, 0.5),
      ContinuousDist::hyperexponential({0.4, 0.6}, {0.5, 2.0})};
  for (const auto& d : families) {
    const auto r = integrate_semiinfinite([&](double x) { return d.density(x); }, d);
    INFO(d.family_name());
    CHECK(r.value == Catch::Approx(1.0).margin(1e-6));
    CHECK(r.truncated_mass <= 1e-9);
  }
}

TEST_CASE("quadrature reports convergence failure with its best estimate") {
  Quadrature q;
  q.max_subdivisions = 4;
  bool thrown = false;
  try {
    integrate_adaptive([](double x) { return std::exp(-x); }, 0.0, 10.0, q);
  } catch (const ConvergenceError& e) {
    thrown = true;
    CHECK(std::isfinite(e.best_estimate));
    CHECK(e.best_estimate > 0.0);
    CHECK(e.achieved_error >= 0.0);
  }
  CHECK(thrown);
}

TEST_CASE("quadrature input validation") {
  Quadrature q;
  q.abs_tol = 0.0;
  CHECK_THROWS_AS(integrate_adaptive([](double x) { return x; }, 0.0, 1.0, q),
                  std::invalid_argument);
  Quadrature q2;
  q2.truncation_quantile = 1.0;
  CHECK_THROWS_AS(
      integrate_semiinfinite([](double x) { return x; },
                             ContinuousDist::exponential(1.0), q2),
      std::invalid_argument);
}

TEST_CASE("grid convolution reproduces the Erlang density") {
  const auto grid = make_grid(22.0, 1024);
  std::vector<double> f;
  f.reserve(grid.size());
  for (double x : grid) f.push_back(std::exp(-x));

  const auto conv = grid_convolve(f, f, grid);
  const std::size_t at1 = 1024;
  CHECK(conv.values[at1] == Catch::Approx(std::exp(-1.0)).margin(1e-4));
  // Mass is preserved through the fold.
  CHECK(std::abs(conv.mass_defect) < 1e-6);
}

TEST_CASE("grid convolution of uniforms gives the triangle") {
  const auto grid = make_grid(2.0, 512);
  std::vector<double> f;
  f.reserve(grid.size());
  for (double x : grid) f.push_back(x < 1.0 ? 1.0 : (x == 1.0 ? 0.5 : 0.0));
  const auto conv = grid_convolve(f, f, grid);
  CHECK(conv.values[256] == Catch::Approx(0.5).margin(1e-4));
  CHECK(conv.values[768] == Catch::Approx(0.5).margin(2e-3));
}

TEST_CASE("grid convolution commutes") {
  const auto grid = make_grid(8.0, 256);
  std::vector<double> f;
  std::vector<double> g;
  for (double x : grid) {
    f.push_back(std::exp(-x));
    g.push_back(x * std::exp(-x));
  }
  const auto fg = grid_convolve(f, g, grid);
  const auto gf = grid_convolve(g, f, grid);
  for (std::size_t i = 0; i < grid.size(); ++i)
    CHECK(fg.values[i] == Catch::Approx(gf.values[i]).margin(1e-12));
}

TEST_CASE("grid convolution rejects bad grids") {
  std::vector<double> nonuniform = {0.0, 0.1, 0.3};
  std::vector<double> vals = {1.0, 1.0, 1.0};
  CHECK_THROWS_AS(grid_convolve(vals, vals, nonuniform), std::domain_error);
  std::vector<double> shifted = {1.0, 1.1, 1.2};
  CHECK_THROWS_AS(grid_convolve(vals, vals, shifted), std::domain_error);
  std::vector<double> grid = {0.0, 0.1, 0.2};
  std::vector<double> wrong = {1.0, 1.0};
  CHECK_THROWS_AS(grid_convolve(wrong, vals, grid), std::domain_error);
}

TEST_CASE("empirical tail basics") {
  const std::vector<double> grid = {0.0, 1.0, 2.0, 3.0};
  const auto t1 = empirical_tail({1.0, 2.0, 3.0}, grid);
  CHECK(t1[0] == 1.0);
  CHECK(t1[2] == Catch::Approx(1.0 / 3.0).margin(1e-15));
  const auto t2 = empirical_tail({0.0, 0.0, 0.0}, grid);
  CHECK(t2[0] == 0.0);
  CHECK_THROWS_AS(empirical_tail({}, grid), std::domain_error);
}

TEST_CASE("empirical tail is a tail function") {
  std::vector<double> samples;
  std::uint64_t state = 12345;
  for (int i = 0; i < 5000; ++i) {
    state = state * 6364136223846793005ULL + 1442695040888963407ULL;
    samples.push_back(static_cast<double>(state >> 11) / 9007199254740992.0 * 4.0);
  }
  std::vector<double> grid;
  for (int i = 0; i <= 100; ++i) grid.push_back(0.05 * i);
  const auto tail = empirical_tail(samples, grid);
  double prev = 1.0;
  for (double v : tail) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
    CHECK(v <= prev + 1e-15);
    prev = v;
  }
}

TEST_CASE("dkw half-width closed form") {
  CHECK(dkw_epsilon(1000000, 0.01) == Catch::Approx(0.001628).margin(2e-6));
  CHECK(dkw_epsilon(100, 0.05) == Catch::Approx(0.13581).margin(1e-4));
  CHECK_THROWS_AS(dkw_epsilon(0, 0.01), std::domain_error);
  CHECK_THROWS_AS(dkw_epsilon(100, 1.5), std::domain_error);
}
