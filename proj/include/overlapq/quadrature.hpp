#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace overlapq {

struct Quadrature {
  double abs_tol = 1e-10;
  double rel_tol = 1e-8;
  std::size_t max_subdivisions = std::size_t{1} << 20;
  double truncation_quantile = 1.0 - 1e-10;

  void validate() const {
    if (!(abs_tol > 0.0)) throw std::invalid_argument("quadrature.abs_tol: must be > 0");
    if (!(rel_tol > 0.0)) throw std::invalid_argument("quadrature.rel_tol: must be > 0");
    if (!(truncation_quantile > 0.0 && truncation_quantile < 1.0))
      throw std::invalid_argument("quadrature.truncation_quantile: must be in (0,1)");
  }
};

// Thrown when the subdivision budget runs out before the requested tolerance
// is met; carries the best estimate and the error actually achieved.
class ConvergenceError : public std::runtime_error {
 public:
  ConvergenceError(double estimate, double achieved_error)
      : std::runtime_error("quadrature failed to converge (best estimate " +
                           std::to_string(estimate) + ", achieved error " +
                           std::to_string(achieved_error) + ")"),
        best_estimate(estimate),
        achieved_error(achieved_error) {}

  double best_estimate;
  double achieved_error;
};

namespace detail {

struct SimpsonState {
  std::size_t intervals_used = 0;
  std::size_t budget = 0;
  double error_accum = 0.0;
};

inline double simpson(double fa, double fm, double fb, double a, double b) {
  return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
}

// Bisecting adaptive Simpson; the error estimate on each interval is the
// Richardson difference |S2 - S1| / 15.
template <typename F>
double adaptive_simpson_rec(const F& f, double a, double b, double fa, double fm,
                            double fb, double whole, double tol,
                            SimpsonState& st, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m);
  const double rm = 0.5 * (m + b);
  const double flm = f(lm);
  const double frm = f(rm);
  const double left = simpson(fa, flm, fm, a, m);
  const double right = simpson(fm, frm, fb, m, b);
  const double delta = left + right - whole;
  if ((std::abs(delta) <= 15.0 * tol && depth >= 4) || depth >= 52) {
    st.error_accum += std::abs(delta) / 15.0;
    return left + right + delta / 15.0;
  }
  st.intervals_used += 2;
  if (st.intervals_used > st.budget) {
    const double est = left + right + delta / 15.0;
    throw ConvergenceError(est, std::abs(delta) / 15.0);
  }
  return adaptive_simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, st, depth + 1) +
         adaptive_simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, st, depth + 1);
}

}  // namespace detail

struct IntegralResult {
  double value = 0.0;
  double error_estimate = 0.0;
};

// Adaptive Simpson on [a, b]. Breakpoints are interior points where the
// integrand (or a derivative) jumps; the interval is split there first so each
// piece is smooth.
template <typename F>
IntegralResult integrate_adaptive(const F& f, double a, double b,
                                  const Quadrature& q = {},
                                  const std::vector<double>& breakpoints = {}) {
  q.validate();
  if (!(b > a)) return {0.0, 0.0};

  std::vector<double> knots;
  knots.push_back(a);
  for (double x : breakpoints)
    if (x > a && x < b) knots.push_back(x);
  knots.push_back(b);
  std::sort(knots.begin(), knots.end());

  detail::SimpsonState st;
  st.budget = q.max_subdivisions;
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < knots.size(); ++i) {
    const double lo = knots[i];
    const double hi = knots[i + 1];
    if (!(hi > lo)) continue;
    const double fa = f(lo);
    const double fm = f(0.5 * (lo + hi));
    const double fb = f(hi);
    const double whole = detail::simpson(fa, fm, fb, lo, hi);
    const double tol =
        std::max(q.abs_tol, q.rel_tol * std::abs(whole)) * (hi - lo) / (b - a);
    total += detail::adaptive_simpson_rec(f, lo, hi, fa, fm, fb, whole, tol, st, 0);
  }
  return {total, st.error_accum};
}

}  // namespace overlapq
