#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "overlapq/dist.hpp"
#include "overlapq/numerics.hpp"
#include "overlapq/quadrature.hpp"

namespace overlapq {

// Law of the sum of k i.i.d. inter-arrival times. Three representations:
//   exponential/erlang base -> Erlang with shape multiplied by k (closed),
//   deterministic base      -> atom at k * value (exact),
//   anything else           -> node values on a uniform grid, built by
//                              iterated trapezoid convolution.
// Grid node values are hat-function projections (second differences of the
// integrated cdf), so the trapezoid mass of the base equals cdf(T) exactly
// and convolution composes mass up to the truncated tails.
class Kfold {
 public:
  Kfold(const ContinuousDist& base, int k, const Quadrature& q = {})
      : k_(k), closed_(ContinuousDist::exponential(1.0)) {
    if (k < 1) throw std::domain_error("kfold: k must be >= 1");
    q.validate();
    if (const auto* e = std::get_if<Exponential>(&base.family())) {
      rep_ = Rep::Closed;
      closed_ = ContinuousDist::erlang(k, e->rate);
    } else if (const auto* e = std::get_if<Erlang>(&base.family())) {
      rep_ = Rep::Closed;
      closed_ = ContinuousDist::erlang(k * e->shape, e->rate);
    } else if (const auto* d = std::get_if<Deterministic>(&base.family())) {
      rep_ = Rep::Atom;
      atom_ = k * d->value;
      closed_ = ContinuousDist::deterministic(atom_);
    } else {
      rep_ = Rep::Grid;
      build_grid(base, q);
    }
  }

  int k() const { return k_; }
  bool atomic() const { return rep_ == Rep::Atom; }
  double atom() const {
    if (rep_ != Rep::Atom) throw std::domain_error("kfold: not atomic");
    return atom_;
  }
  // True when cdf/density evaluate through a closed form rather than a grid.
  bool closed_cdf() const { return rep_ != Rep::Grid; }

  double cdf(double x) const {
    switch (rep_) {
      case Rep::Closed:
      case Rep::Atom:
        return closed_.cdf(x);
      case Rep::Grid:
      default: {
        if (x <= 0.0) return 0.0;
        const double last = step_ * static_cast<double>(cum_.size() - 1);
        if (x >= last) return cum_.back();
        const double pos = x / step_;
        const auto i = static_cast<std::size_t>(pos);
        const double frac = pos - static_cast<double>(i);
        return cum_[i] + frac * (cum_[i + 1] - cum_[i]);
      }
    }
  }

  double tail(double x) const { return 1.0 - cdf(x); }

  double density_at(double x) const {
    switch (rep_) {
      case Rep::Atom:
        throw std::domain_error("kfold: atomic, no density");
      case Rep::Closed:
        return closed_.density(x);
      case Rep::Grid:
      default: {
        if (x < 0.0) return 0.0;
        const double last = step_ * static_cast<double>(values_.size() - 1);
        if (x >= last) return 0.0;
        const double pos = x / step_;
        const auto i = static_cast<std::size_t>(pos);
        const double frac = pos - static_cast<double>(i);
        return values_[i] + frac * (values_[i + 1] - values_[i]);
      }
    }
  }

  // E[f(Y)] for the k-fold sum Y. Atoms evaluate f at the atom exactly;
  // the closed representation integrates f against the Erlang density with
  // adaptive quadrature (f_breakpoints marks discontinuities of f); the grid
  // representation contracts f against the stored node values.
  template <typename F>
  double expect(F&& f, const Quadrature& q = {},
                const std::vector<double>& f_breakpoints = {}) const {
    switch (rep_) {
      case Rep::Atom:
        return f(atom_);
      case Rep::Closed: {
        const double hi = closed_.quantile(q.truncation_quantile);
        const auto integrand = [&](double x) { return f(x) * closed_.density(x); };
        return integrate_adaptive(integrand, 0.0, hi, q, f_breakpoints).value;
      }
      case Rep::Grid:
      default: {
        double acc = 0.0;
        const std::size_t n = values_.size();
        for (std::size_t i = 0; i < n; ++i) {
          const double w = (i == 0 || i + 1 == n) ? 0.5 : 1.0;
          acc += w * f(step_ * static_cast<double>(i)) * values_[i];
        }
        return acc * step_;
      }
    }
  }

  double grid_step() const { return step_; }
  const std::vector<double>& grid_values() const { return values_; }
  // Shortfall of the captured mass: 1 minus the trapezoid mass of the grid
  // (zero for the closed and atomic representations).
  double mass_defect() const { return mass_defect_; }

 private:
  enum class Rep { Closed, Atom, Grid };

  void build_grid(const ContinuousDist& base, const Quadrature& q) {
    const double t_base = base.quantile(q.truncation_quantile);
    if (!(t_base > 0.0)) throw std::domain_error("kfold: degenerate base support");
    // Step targets both tail coverage and bulk resolution; heavy-tailed bases
    // would otherwise starve the bulk of nodes.
    const double bulk = std::max(base.quantile(0.999), 1e-12);
    std::size_t cells = static_cast<std::size_t>(std::ceil(t_base / (bulk / 2048.0)));
    cells = std::clamp<std::size_t>(cells, 4096, 32768);
    const double h = t_base / static_cast<double>(cells);
    step_ = h;

    // Hat projection: v_j = (C(x_{j+1}) - 2 C(x_j) + C(x_{j-1})) / h^2 with
    // one-sided variants at the ends; trapezoid mass then telescopes to
    // cdf(T) exactly.
    std::vector<double> node_c(cells + 1);
    for (std::size_t j = 0; j <= cells; ++j)
      node_c[j] = base.integrated_cdf(h * static_cast<double>(j));
    std::vector<double> v(cells + 1);
    v[0] = 2.0 * (node_c[1] - node_c[0]) / (h * h);
    for (std::size_t j = 1; j < cells; ++j)
      v[j] = (node_c[j + 1] - 2.0 * node_c[j] + node_c[j - 1]) / (h * h);
    v[cells] =
        2.0 * (node_c[cells - 1] - node_c[cells] + h * base.cdf(t_base)) / (h * h);
    for (double& x : v) x = std::max(0.0, x);

    values_ = v;
    for (int fold = 2; fold <= k_; ++fold) {
      const std::size_t out_len = static_cast<std::size_t>(fold) * cells + 1;
      values_ = detail::convolve_raw(values_, v, h, out_len);
    }
    mass_defect_ = 1.0 - detail::trapezoid_mass(values_, h);

    cum_.assign(values_.size(), 0.0);
    for (std::size_t i = 1; i < values_.size(); ++i)
      cum_[i] = cum_[i - 1] + 0.5 * h * (values_[i - 1] + values_[i]);
  }

  int k_;
  Rep rep_ = Rep::Closed;
  ContinuousDist closed_;
  double atom_ = 0.0;
  double step_ = 0.0;
  std::vector<double> values_;
  std::vector<double> cum_;
  double mass_defect_ = 0.0;
};

struct KfoldDensity {
  bool atomic = false;
  double atom = 0.0;              // location of the point mass when atomic
  std::vector<double> values;     // density on the query grid when not atomic
  double mass_defect = 0.0;       // grid-representation shortfall (0 if closed)
};

// Density of the sum of k i.i.d. draws of d, evaluated at the given points.
// A deterministic base yields a point mass at k*value, flagged instead of
// gridded.
inline KfoldDensity kfold_density(const ContinuousDist& d, int k,
                                  const std::vector<double>& grid,
                                  const Quadrature& q = {}) {
  if (k < 1) throw std::domain_error("kfold_density: k must be >= 1");
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (grid[i] < 0.0) throw std::domain_error("kfold_density: grid must be nonnegative");
    if (i > 0 && !(grid[i] > grid[i - 1]))
      throw std::domain_error("kfold_density: grid must be strictly increasing");
  }
  const Kfold kf(d, k, q);
  KfoldDensity out;
  if (kf.atomic()) {
    out.atomic = true;
    out.atom = kf.atom();
    return out;
  }
  // The base law needs no convolution; report it exactly.
  const bool direct = (k == 1 && !kf.closed_cdf());
  out.values.reserve(grid.size());
  for (double x : grid) out.values.push_back(direct ? d.density(x) : kf.density_at(x));
  out.mass_defect = kf.mass_defect();
  return out;
}

}  // namespace overlapq
