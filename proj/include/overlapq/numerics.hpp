#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "overlapq/dist.hpp"
#include "overlapq/quadrature.hpp"

namespace overlapq {

struct SemiInfiniteResult {
  double value = 0.0;
  double error_estimate = 0.0;
  double truncation_point = 0.0;
  double truncated_mass = 0.0;  // mass of d beyond the truncation point
};

// Integral of f over [0, inf), truncated where the reference distribution d
// has negligible mass. The discarded-mass bound rides along in the result.
// When d is an atom at v the cutoff collapses to v and the caller is expected
// to have folded the atom into f by exact point evaluation (see Kfold).
template <typename F>
SemiInfiniteResult integrate_semiinfinite(F&& f, const ContinuousDist& d,
                                          const Quadrature& q = {}) {
  q.validate();
  const double hi = d.quantile(q.truncation_quantile);
  const double truncated = d.tail(hi);
  if (hi <= 0.0) return {0.0, 0.0, hi, truncated};
  const auto r = integrate_adaptive(f, 0.0, hi, q, d.density_jumps());
  return {r.value, r.error_estimate, hi, truncated};
}

inline void check_uniform_grid(const std::vector<double>& grid) {
  if (grid.size() < 2) throw std::domain_error("grid: need at least two points");
  const double h = grid[1] - grid[0];
  if (!(h > 0.0)) throw std::domain_error("grid: must be strictly increasing");
  for (std::size_t i = 1; i + 1 < grid.size(); ++i) {
    const double step = grid[i + 1] - grid[i];
    if (std::abs(step - h) > 1e-9 * std::max(1.0, std::abs(h)))
      throw std::domain_error("grid: must be uniform");
  }
}

namespace detail {

// Direct trapezoid-weight convolution of samples on a shared uniform step.
// out_len may exceed either input; indices outside an input read as zero.
inline std::vector<double> convolve_raw(const std::vector<double>& a,
                                        const std::vector<double>& b, double h,
                                        std::size_t out_len) {
  std::vector<double> out(out_len, 0.0);
  const std::size_t na = a.size();
  const std::size_t nb = b.size();
  for (std::size_t i = 0; i < out_len; ++i) {
    const std::size_t jmax = std::min(i, na - 1);
    const std::size_t jmin = (i >= nb) ? i - (nb - 1) : 0;
    if (jmin > jmax) continue;
    double acc = 0.0;
    for (std::size_t j = jmin; j <= jmax; ++j) {
      const double w = (j == jmin || j == jmax) ? 0.5 : 1.0;
      acc += w * a[j] * b[i - j];
    }
    out[i] = acc * h;
  }
  return out;
}

inline double trapezoid_mass(const std::vector<double>& v, double h) {
  if (v.size() < 2) return 0.0;
  double acc = 0.5 * (v.front() + v.back());
  for (std::size_t i = 1; i + 1 < v.size(); ++i) acc += v[i];
  return acc * h;
}

}  // namespace detail

struct ConvolveResult {
  std::vector<double> values;
  double mass_defect = 0.0;  // 1 minus the trapezoid mass captured by the grid
};

// Trapezoid-rule convolution of two densities sampled on the same uniform
// grid, restricted to that grid. Mass carried past the last grid point shows
// up in mass_defect.
inline ConvolveResult grid_convolve(const std::vector<double>& f,
                                    const std::vector<double>& g,
                                    const std::vector<double>& grid) {
  check_uniform_grid(grid);
  if (f.size() != grid.size() || g.size() != grid.size())
    throw std::domain_error("grid_convolve: values and grid lengths differ");
  if (std::abs(grid[0]) > 1e-12)
    throw std::domain_error("grid_convolve: grid must start at 0");
  const double h = grid[1] - grid[0];
  ConvolveResult r;
  r.values = detail::convolve_raw(f, g, h, grid.size());
  r.mass_defect = 1.0 - detail::trapezoid_mass(r.values, h);
  return r;
}

// Fraction of samples strictly greater than each grid point.
inline std::vector<double> empirical_tail(const std::vector<double>& samples,
                                          const std::vector<double>& grid) {
  if (samples.empty()) throw std::domain_error("empirical_tail: no samples");
  std::vector<double> sorted(samples);
  std::sort(sorted.begin(), sorted.end());
  std::vector<double> out;
  out.reserve(grid.size());
  const double n = static_cast<double>(sorted.size());
  for (double t : grid) {
    const auto it = std::upper_bound(sorted.begin(), sorted.end(), t);
    out.push_back(static_cast<double>(sorted.end() - it) / n);
  }
  return out;
}

// Same on a pre-sorted sample vector, one point at a time.
inline double empirical_tail_sorted(const std::vector<double>& sorted, double t) {
  if (sorted.empty()) throw std::domain_error("empirical_tail: no samples");
  const auto it = std::upper_bound(sorted.begin(), sorted.end(), t);
  return static_cast<double>(sorted.end() - it) / static_cast<double>(sorted.size());
}

// Two-sided DKW half-width: with probability at least 1-delta the empirical
// cdf sits uniformly within this of the truth.
inline double dkw_epsilon(std::size_t n, double delta) {
  if (n == 0) throw std::domain_error("dkw_epsilon: n must be > 0");
  if (!(delta > 0.0 && delta < 1.0))
    throw std::domain_error("dkw_epsilon: delta must be in (0,1)");
  return std::sqrt(std::log(2.0 / delta) / (2.0 * static_cast<double>(n)));
}

}  // namespace overlapq
