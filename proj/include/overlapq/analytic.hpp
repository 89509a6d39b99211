#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "overlapq/curve.hpp"
#include "overlapq/dist.hpp"
#include "overlapq/kfold.hpp"
#include "overlapq/numerics.hpp"
#include "overlapq/parallel.hpp"
#include "overlapq/query.hpp"
#include "overlapq/rng.hpp"

namespace overlapq {

// Requested model/query/method combination has no implementation.
class UnsupportedError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class MethodChoice { Auto, Closed, Quadrature, Mc };

struct AnalyticOptions {
  MethodChoice method = MethodChoice::Auto;
  Quadrature quad{};
  std::size_t mc_samples = 1000000;
  std::uint64_t seed = 0x6f766c71;
};

// Signed binomial expansions of (1-x)^b cancel catastrophically for large b;
// the closed batch-max forms are only offered below this support size.
inline constexpr int kBinomialSupportCap = 25;

enum class MinMax { Min, Max };

// P(min of a batch's services > t) and P(max > t): the batch-size pgf
// evaluated at the service tail and cdf.
inline double min_max_tail(const BatchDist& b, const ContinuousDist& g, MinMax mode, double t) {
  return mode == MinMax::Min ? b.pgf(g.tail(t)) : 1.0 - b.pgf(g.cdf(t));
}

namespace detail {

inline const Exponential* exp_service(const QueueModel& m) {
  return std::get_if<Exponential>(&m.service.family());
}

inline bool kfold_closed_family(const ContinuousDist& d) {
  return std::holds_alternative<Exponential>(d.family()) ||
         std::holds_alternative<Erlang>(d.family()) ||
         std::holds_alternative<Deterministic>(d.family());
}

// P(sum of k inter-arrivals < z); strict at atoms, cdf elsewhere.
inline double prob_sum_less(const Kfold& kf, double z) {
  if (z <= 0.0) return 0.0;
  if (kf.atomic()) return kf.atom() < z ? 1.0 : 0.0;
  return kf.cdf(z);
}

// Pascal triangle in doubles; exact for the support sizes the cap allows.
inline std::vector<std::vector<double>> binomial_table(int n) {
  std::vector<std::vector<double>> c(static_cast<std::size_t>(n) + 1);
  for (int j = 0; j <= n; ++j) {
    auto& row = c[static_cast<std::size_t>(j)];
    row.assign(static_cast<std::size_t>(j) + 1, 1.0);
    for (int w = 1; w < j; ++w)
      row[static_cast<std::size_t>(w)] = c[static_cast<std::size_t>(j - 1)][static_cast<std::size_t>(w - 1)] +
                                         c[static_cast<std::size_t>(j - 1)][static_cast<std::size_t>(w)];
  }
  return c;
}

// Discontinuities of x -> f(t + x) induced by the service law, shifted into
// the integration variable.
inline std::vector<double> shifted_service_breaks(const ContinuousDist& service, double t) {
  std::vector<double> out;
  for (double j : service.density_jumps())
    if (j - t > 0.0) out.push_back(j - t);
  return out;
}

struct McMoments {
  std::vector<double> sum;
  std::vector<double> sumsq;
};

// Averages a per-replicate grid evaluation over n independent streams.
// Chunk size is fixed so the reduction order, and hence the result, does not
// depend on the worker count.
template <typename Per>
McMoments mc_reduce(std::size_t grid_size, std::size_t n, std::uint64_t seed, Per&& per) {
  constexpr std::size_t kChunk = 4096;
  McMoments init;
  init.sum.assign(grid_size, 0.0);
  init.sumsq.assign(grid_size, 0.0);
  return parallel_chunked<McMoments>(
      n, kChunk,
      [&](std::size_t b, std::size_t e) {
        McMoments part;
        part.sum.assign(grid_size, 0.0);
        part.sumsq.assign(grid_size, 0.0);
        std::vector<double> vals(grid_size);
        for (std::size_t r = b; r < e; ++r) {
          Stream rng(seed, r);
          per(rng, vals);
          for (std::size_t i = 0; i < grid_size; ++i) {
            part.sum[i] += vals[i];
            part.sumsq[i] += vals[i] * vals[i];
          }
        }
        return part;
      },
      std::move(init),
      [](McMoments acc, McMoments part) {
        for (std::size_t i = 0; i < acc.sum.size(); ++i) {
          acc.sum[i] += part.sum[i];
          acc.sumsq[i] += part.sumsq[i];
        }
        return acc;
      });
}

inline double se_of_mean(double sum, double sumsq, std::size_t n) {
  if (n < 2) return 0.0;
  const double nn = static_cast<double>(n);
  const double mean = sum / nn;
  const double var = std::max(0.0, (sumsq - nn * mean * mean) / (nn - 1.0));
  return std::sqrt(var / nn);
}

// Draws the block gaps Y_l (sums of d_l inter-arrivals) and writes the
// suffix sums g_i = A_{n_m} - A_{n_i}; g_m = 0.
inline void draw_suffix_gaps(const ContinuousDist& inter, const std::vector<int>& d,
                             Stream& rng, std::vector<double>& g) {
  const std::size_t m = d.size() + 1;
  g.assign(m, 0.0);
  for (std::size_t l = 0; l < d.size(); ++l) {
    double y = 0.0;
    for (int i = 0; i < d[static_cast<std::size_t>(l)]; ++i) y += inter.sample(rng);
    g[l] = y;
  }
  for (std::size_t i = m - 1; i-- > 0;) g[i] += g[i + 1];
}

inline TailCurve start_curve(const QueueModel& m, OverlapQuery q, std::vector<double> grid,
                             Method method) {
  TailCurve c;
  c.grid = std::move(grid);
  c.method = method;
  c.model = m;
  c.query = std::move(q);
  return c;
}

}  // namespace detail

// True when the (model, query) pair hits one of the closed-form corollaries.
inline bool closed_form_available(const QueueModel& m, const OverlapQuery& q) {
  const bool exp_closed =
      detail::exp_service(m) != nullptr && m.interarrival.laplace_closed_form();
  const bool det_closed =
      m.service.is_atom() && detail::kfold_closed_family(m.interarrival);
  if (const auto* p = std::get_if<PairIndividualQuery>(&q)) {
    if (p->lag == 0) return true;
    return exp_closed || det_closed;
  }
  if (const auto* p = std::get_if<PairBatchQuery>(&q)) {
    if (p->mode == BatchMode::First) return exp_closed || det_closed;
    return (exp_closed && m.batch.max_support() <= kBinomialSupportCap) || det_closed;
  }
  const auto& tq = std::get<TupleQuery>(q);
  if (tq.mode == TupleMode::Individual || tq.mode == TupleMode::First) return exp_closed;
  if (tq.semantics == BatchSemantics::Shared)
    return exp_closed && tq.indices.size() <= 20;
  return exp_closed && m.batch.max_support() <= kBinomialSupportCap;
}

namespace detail {

inline Method resolve_method(bool closed_avail, bool quad_avail, MethodChoice req) {
  switch (req) {
    case MethodChoice::Auto:
      if (closed_avail) return Method::ClosedForm;
      if (quad_avail) return Method::Quadrature;
      return Method::GapMonteCarlo;
    case MethodChoice::Closed:
      if (!closed_avail)
        throw UnsupportedError("closed form not available for this model and query");
      return Method::ClosedForm;
    case MethodChoice::Quadrature:
      if (!quad_avail)
        throw UnsupportedError("quadrature not available for this query type");
      return Method::Quadrature;
    case MethodChoice::Mc:
    default:
      return Method::GapMonteCarlo;
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Pair of individual customers, batches n and n+k.

inline TailCurve pair_individual_tail(const QueueModel& m, const PairIndividualQuery& q,
                                      const std::vector<double>& grid,
                                      const AnalyticOptions& opt = {}) {
  q.validate();
  const int k = q.lag;
  const auto& g = m.service;

  // Lag zero has no inter-arrival integral: the tail is the service tail
  // (self-overlap) or its square (two customers of one batch).
  if (k == 0) {
    TailCurve c = detail::start_curve(m, q, grid, Method::ClosedForm);
    c.values.reserve(grid.size());
    for (double t : grid) {
      const double gb = g.tail(t);
      c.values.push_back(q.same_customer ? gb : gb * gb);
    }
    return c;
  }

  const bool exp_closed =
      detail::exp_service(m) != nullptr && m.interarrival.laplace_closed_form();
  const bool det_closed = g.is_atom() && detail::kfold_closed_family(m.interarrival);
  const Method method =
      detail::resolve_method(exp_closed || det_closed, true, opt.method);

  if (method == Method::ClosedForm && exp_closed) {
    const double mu = detail::exp_service(m)->rate;
    const double lk = std::pow(m.interarrival.laplace(mu), k);
    TailCurve c = detail::start_curve(m, q, grid, method);
    for (double t : grid) c.values.push_back(g.tail(t) * std::exp(-mu * t) * lk);
    return c;
  }

  if (g.is_atom() && method != Method::GapMonteCarlo) {
    // Constant service depth: overlap iff the k arrivals fit inside it.
    const Kfold kf(m.interarrival, k, opt.quad);
    const double delta = g.atom_value();
    TailCurve c = detail::start_curve(m, q, grid, method);
    c.tolerance = kf.closed_cdf() ? 0.0 : opt.quad.abs_tol + kf.mass_defect();
    for (double t : grid)
      c.values.push_back(t < delta ? detail::prob_sum_less(kf, delta - t) : 0.0);
    return c;
  }

  if (method == Method::Quadrature) {
    const Kfold kf(m.interarrival, k, opt.quad);
    TailCurve c = detail::start_curve(m, q, grid, method);
    c.tolerance = opt.quad.abs_tol + kf.mass_defect();
    for (double t : grid) {
      const double inner = kf.expect([&](double x) { return g.tail(t + x); }, opt.quad,
                                     detail::shifted_service_breaks(g, t));
      c.values.push_back(g.tail(t) * inner);
    }
    return c;
  }

  // Gap Monte Carlo: average G-bar(t + Y) over draws of the k-gap Y.
  TailCurve c = detail::start_curve(m, q, grid, Method::GapMonteCarlo);
  c.mc_samples = opt.mc_samples;
  c.seed = opt.seed;
  const auto mom = detail::mc_reduce(
      grid.size(), opt.mc_samples, opt.seed, [&](Stream& rng, std::vector<double>& vals) {
        double y = 0.0;
        for (int i = 0; i < k; ++i) y += m.interarrival.sample(rng);
        for (std::size_t i = 0; i < grid.size(); ++i) vals[i] = g.tail(grid[i] + y);
      });
  const double n = static_cast<double>(opt.mc_samples);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double gb = g.tail(grid[i]);
    c.values.push_back(gb * mom.sum[i] / n);
    c.stderrs.push_back(gb * detail::se_of_mean(mom.sum[i], mom.sumsq[i], opt.mc_samples));
  }
  return c;
}

// ---------------------------------------------------------------------------
// Pair of batches, first-to-leave representative.

inline TailCurve pair_batch_first_tail(const QueueModel& m, const PairBatchQuery& q,
                                       const std::vector<double>& grid,
                                       const AnalyticOptions& opt = {}) {
  if (q.mode != BatchMode::First)
    throw std::invalid_argument("query.mode: expected first");
  q.validate();
  const int k = q.lag;
  const auto& g = m.service;
  const auto& b = m.batch;

  const bool exp_closed =
      detail::exp_service(m) != nullptr && m.interarrival.laplace_closed_form();
  const bool det_closed = g.is_atom() && detail::kfold_closed_family(m.interarrival);
  const Method method =
      detail::resolve_method(exp_closed || det_closed, true, opt.method);

  if (method == Method::ClosedForm && exp_closed) {
    // sum_j p_j e^{-mu t j} L(mu j)^k  times  pgf(e^{-mu t})
    const double mu = detail::exp_service(m)->rate;
    std::vector<double> lk(static_cast<std::size_t>(b.max_support()) + 1, 1.0);
    for (int j = 1; j <= b.max_support(); ++j)
      lk[static_cast<std::size_t>(j)] = std::pow(m.interarrival.laplace(mu * j), k);
    TailCurve c = detail::start_curve(m, q, grid, method);
    for (double t : grid) {
      double first = 0.0;
      for (int j = 1; j <= b.max_support(); ++j)
        first += b.pmf(j) * std::exp(-mu * t * j) * lk[static_cast<std::size_t>(j)];
      c.values.push_back(first * b.pgf(std::exp(-mu * t)));
    }
    return c;
  }

  if (g.is_atom() && method != Method::GapMonteCarlo) {
    // All batch modes coincide for constant service: every member departs
    // arrival + delta.
    const Kfold kf(m.interarrival, k, opt.quad);
    const double delta = g.atom_value();
    TailCurve c = detail::start_curve(m, q, grid, method);
    c.tolerance = kf.closed_cdf() ? 0.0 : opt.quad.abs_tol + kf.mass_defect();
    for (double t : grid)
      c.values.push_back(t < delta ? detail::prob_sum_less(kf, delta - t) : 0.0);
    return c;
  }

  if (method == Method::Quadrature) {
    const Kfold kf(m.interarrival, k, opt.quad);
    TailCurve c = detail::start_curve(m, q, grid, method);
    c.tolerance = opt.quad.abs_tol + kf.mass_defect();
    for (double t : grid) {
      const double inner =
          kf.expect([&](double x) { return b.pgf(g.tail(t + x)); }, opt.quad,
                    detail::shifted_service_breaks(g, t));
      c.values.push_back(inner * b.pgf(g.tail(t)));
    }
    return c;
  }

  TailCurve c = detail::start_curve(m, q, grid, Method::GapMonteCarlo);
  c.mc_samples = opt.mc_samples;
  c.seed = opt.seed;
  const auto mom = detail::mc_reduce(
      grid.size(), opt.mc_samples, opt.seed, [&](Stream& rng, std::vector<double>& vals) {
        double y = 0.0;
        for (int i = 0; i < k; ++i) y += m.interarrival.sample(rng);
        for (std::size_t i = 0; i < grid.size(); ++i) vals[i] = b.pgf(g.tail(grid[i] + y));
      });
  const double n = static_cast<double>(opt.mc_samples);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double outer = b.pgf(g.tail(grid[i]));
    c.values.push_back(outer * mom.sum[i] / n);
    c.stderrs.push_back(outer * detail::se_of_mean(mom.sum[i], mom.sumsq[i], opt.mc_samples));
  }
  return c;
}

// ---------------------------------------------------------------------------
// Pair of batches, last-to-leave representative.

inline TailCurve pair_batch_last_tail(const QueueModel& m, const PairBatchQuery& q,
                                      const std::vector<double>& grid,
                                      const AnalyticOptions& opt = {}) {
  if (q.mode != BatchMode::Last)
    throw std::invalid_argument("query.mode: expected last");
  q.validate();
  const int k = q.lag;
  const auto& g = m.service;
  const auto& b = m.batch;

  const bool exp_closed = detail::exp_service(m) != nullptr &&
                          m.interarrival.laplace_closed_form() &&
                          b.max_support() <= kBinomialSupportCap;
  const bool det_closed = g.is_atom() && detail::kfold_closed_family(m.interarrival);
  const Method method =
      detail::resolve_method(exp_closed || det_closed, true, opt.method);

  if (method == Method::ClosedForm && exp_closed) {
    // 1 - sum_j p_j sum_w C(j,w)(-1)^w e^{-mu t w} L(mu w)^k, times
    // 1 - pgf(1 - e^{-mu t}); the inner sum is the binomial expansion of
    // E[G(t + Y)^B].
    const double mu = detail::exp_service(m)->rate;
    const int bmax = b.max_support();
    const auto binom = detail::binomial_table(bmax);
    std::vector<double> lk(static_cast<std::size_t>(bmax) + 1, 1.0);
    for (int w = 1; w <= bmax; ++w)
      lk[static_cast<std::size_t>(w)] = std::pow(m.interarrival.laplace(mu * w), k);
    TailCurve c = detail::start_curve(m, q, grid, method);
    for (double t : grid) {
      double expg = 0.0;
      for (int j = 1; j <= bmax; ++j) {
        if (b.pmf(j) == 0.0) continue;
        double inner = 0.0;
        double sign = 1.0;
        for (int w = 0; w <= j; ++w) {
          inner += sign * binom[static_cast<std::size_t>(j)][static_cast<std::size_t>(w)] *
                   std::exp(-mu * t * w) * lk[static_cast<std::size_t>(w)];
          sign = -sign;
        }
        expg += b.pmf(j) * inner;
      }
      const double first = 1.0 - expg;
      const double second = 1.0 - b.pgf(-std::expm1(-mu * t));
      c.values.push_back(std::clamp(first * second, 0.0, 1.0));
    }
    return c;
  }

  if (g.is_atom() && method != Method::GapMonteCarlo) {
    const Kfold kf(m.interarrival, k, opt.quad);
    const double delta = g.atom_value();
    TailCurve c = detail::start_curve(m, q, grid, method);
    c.tolerance = kf.closed_cdf() ? 0.0 : opt.quad.abs_tol + kf.mass_defect();
    for (double t : grid)
      c.values.push_back(t < delta ? detail::prob_sum_less(kf, delta - t) : 0.0);
    return c;
  }

  if (method == Method::Quadrature) {
    const Kfold kf(m.interarrival, k, opt.quad);
    TailCurve c = detail::start_curve(m, q, grid, method);
    c.tolerance = opt.quad.abs_tol + kf.mass_defect();
    for (double t : grid) {
      const double inner =
          kf.expect([&](double x) { return b.pgf(g.cdf(t + x)); }, opt.quad,
                    detail::shifted_service_breaks(g, t));
      c.values.push_back((1.0 - inner) * (1.0 - b.pgf(g.cdf(t))));
    }
    return c;
  }

  TailCurve c = detail::start_curve(m, q, grid, Method::GapMonteCarlo);
  c.mc_samples = opt.mc_samples;
  c.seed = opt.seed;
  const auto mom = detail::mc_reduce(
      grid.size(), opt.mc_samples, opt.seed, [&](Stream& rng, std::vector<double>& vals) {
        double y = 0.0;
        for (int i = 0; i < k; ++i) y += m.interarrival.sample(rng);
        for (std::size_t i = 0; i < grid.size(); ++i) vals[i] = b.pgf(g.cdf(grid[i] + y));
      });
  const double n = static_cast<double>(opt.mc_samples);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double outer = 1.0 - b.pgf(g.cdf(grid[i]));
    c.values.push_back(outer * (1.0 - mom.sum[i] / n));
    c.stderrs.push_back(outer * detail::se_of_mean(mom.sum[i], mom.sumsq[i], opt.mc_samples));
  }
  return c;
}

// ---------------------------------------------------------------------------
// Tuples of batches n_1 < ... < n_m.

namespace detail {

// Closed evaluation for exponential service. Every variant reduces to sums
// of Laplace-transform products over the block gaps: a weight w_i attached to
// batch i contributes L(mu * c_l)^{d_l} per gap l, with c_l the prefix sum
// w_1 + ... + w_l.
struct TupleClosed {
  const QueueModel& m;
  double mu;
  std::vector<int> d;  // consecutive index differences

  double lap(double s) const { return m.interarrival.laplace(s); }

  // E[prod_j Gbar(t + A_m - A_j)]: all weights are 1.
  double individual(double t) const {
    const auto mm = static_cast<double>(d.size() + 1);
    double acc = std::exp(-mu * mm * t);
    for (std::size_t l = 0; l < d.size(); ++l)
      acc *= std::pow(lap(mu * static_cast<double>(l + 1)), d[l]);
    return acc;
  }

  // Independent batch sizes: dynamic program over the prefix sum of the
  // per-batch weights, which are p_b e^{-mu t b} for first mode and the
  // signed binomial weights of 1 - (1-x)^b for last mode.
  double weighted_dp(double t, const std::vector<double>& weight) const {
    const std::size_t mm = d.size() + 1;
    const std::size_t wmax = weight.size() - 1;  // weights indexed 1..wmax
    std::vector<double> dp(mm * wmax + 1, 0.0);
    dp[0] = 1.0;
    std::size_t reach = 0;
    for (std::size_t i = 0; i < mm; ++i) {
      std::vector<double> next(mm * wmax + 1, 0.0);
      for (std::size_t c = 0; c <= reach; ++c) {
        if (dp[c] == 0.0) continue;
        for (std::size_t w = 1; w <= wmax; ++w)
          next[c + w] += dp[c] * weight[w] * std::exp(-mu * t * static_cast<double>(w));
      }
      reach += wmax;
      if (i + 1 < mm) {
        for (std::size_t c = 1; c <= reach; ++c)
          next[c] *= std::pow(lap(mu * static_cast<double>(c)), d[i]);
      }
      dp = std::move(next);
    }
    double acc = 0.0;
    for (double v : dp) acc += v;
    return acc;
  }

  double first_independent(double t) const {
    const auto& b = m.batch;
    std::vector<double> weight(static_cast<std::size_t>(b.max_support()) + 1, 0.0);
    for (int j = 1; j <= b.max_support(); ++j) weight[static_cast<std::size_t>(j)] = b.pmf(j);
    return weighted_dp(t, weight);
  }

  double last_independent(double t) const {
    const auto& b = m.batch;
    const int bmax = b.max_support();
    const auto binom = binomial_table(bmax);
    // alpha_w = sum_{b >= w} p_b C(b,w) (-1)^{w+1}
    std::vector<double> weight(static_cast<std::size_t>(bmax) + 1, 0.0);
    for (int w = 1; w <= bmax; ++w) {
      double a = 0.0;
      for (int j = w; j <= bmax; ++j)
        a += b.pmf(j) * binom[static_cast<std::size_t>(j)][static_cast<std::size_t>(w)];
      weight[static_cast<std::size_t>(w)] = (w % 2 == 1) ? a : -a;
    }
    return weighted_dp(t, weight);
  }

  // One batch size drawn once and reused by every batch in the tuple.
  double first_shared(double t) const {
    const auto& b = m.batch;
    const auto mm = static_cast<double>(d.size() + 1);
    double acc = 0.0;
    for (int j = 1; j <= b.max_support(); ++j) {
      if (b.pmf(j) == 0.0) continue;
      double term = std::exp(-mu * j * mm * t);
      for (std::size_t l = 0; l < d.size(); ++l)
        term *= std::pow(lap(mu * j * static_cast<double>(l + 1)), d[l]);
      acc += b.pmf(j) * term;
    }
    return acc;
  }

  // 1 - E[prod_i (1 - e^{-mu B (t+g_i)})] by inclusion-exclusion over the
  // factor subsets; c_l counts chosen batches with index <= l.
  double last_shared(double t) const {
    const auto& b = m.batch;
    const std::size_t mm = d.size() + 1;
    double expectation = 0.0;
    for (int j = 1; j <= b.max_support(); ++j) {
      if (b.pmf(j) == 0.0) continue;
      double sum = 0.0;
      for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << mm); ++mask) {
        int size = 0;
        double term = 1.0;
        int c = 0;
        for (std::size_t l = 0; l < mm; ++l) {
          if (mask & (std::uint64_t{1} << l)) {
            ++size;
            ++c;
          }
          if (l < d.size() && c > 0)
            term *= std::pow(lap(mu * j * c), d[l]);
        }
        term *= std::exp(-mu * j * size * t);
        sum += (size % 2 == 0 ? 1.0 : -1.0) * term;
      }
      expectation += b.pmf(j) * sum;
    }
    return 1.0 - expectation;
  }
};

}  // namespace detail

inline TailCurve tuple_tail(const QueueModel& m, const TupleQuery& q,
                            const std::vector<double>& grid,
                            const AnalyticOptions& opt = {}) {
  q.validate();
  const auto& g = m.service;
  const auto& b = m.batch;
  const std::vector<int> d = q.gaps();
  const std::size_t mm = q.indices.size();

  const bool shared_last = q.mode == TupleMode::Last && q.semantics == BatchSemantics::Shared;
  if (shared_last && detail::exp_service(m) == nullptr)
    throw UnsupportedError(
        "shared batch semantics in last mode requires exponential service");

  const Method method =
      detail::resolve_method(closed_form_available(m, OverlapQuery{q}), false, opt.method);

  if (method == Method::ClosedForm) {
    const detail::TupleClosed tc{m, detail::exp_service(m)->rate, d};
    TailCurve c = detail::start_curve(m, q, grid, method);
    for (double t : grid) {
      double v = 0.0;
      switch (q.mode) {
        case TupleMode::Individual: v = tc.individual(t); break;
        case TupleMode::First:
          v = q.semantics == BatchSemantics::Shared ? tc.first_shared(t)
                                                    : tc.first_independent(t);
          break;
        case TupleMode::Last:
          v = q.semantics == BatchSemantics::Shared ? tc.last_shared(t)
                                                    : tc.last_independent(t);
          break;
      }
      c.values.push_back(std::clamp(v, 0.0, 1.0));
    }
    return c;
  }

  // Gap Monte Carlo over the m-1 block gaps.
  TailCurve c = detail::start_curve(m, q, grid, Method::GapMonteCarlo);
  c.mc_samples = opt.mc_samples;
  c.seed = opt.seed;
  const auto mom = detail::mc_reduce(
      grid.size(), opt.mc_samples, opt.seed, [&](Stream& rng, std::vector<double>& vals) {
        std::vector<double> gaps;
        detail::draw_suffix_gaps(m.interarrival, d, rng, gaps);
        for (std::size_t i = 0; i < grid.size(); ++i) {
          const double t = grid[i];
          double v = 1.0;
          switch (q.mode) {
            case TupleMode::Individual:
              for (std::size_t j = 0; j < mm; ++j) v *= g.tail(t + gaps[j]);
              break;
            case TupleMode::First:
              if (q.semantics == BatchSemantics::Shared) {
                for (std::size_t j = 0; j < mm; ++j) v *= g.tail(t + gaps[j]);
                v = b.pgf(v);
              } else {
                for (std::size_t j = 0; j < mm; ++j) v *= b.pgf(g.tail(t + gaps[j]));
              }
              break;
            case TupleMode::Last:
              if (q.semantics == BatchSemantics::Shared) {
                // averaged below as 1 - E[prod]; store the product
                const double mu = detail::exp_service(m)->rate;
                double acc = 0.0;
                for (int j = 1; j <= b.max_support(); ++j) {
                  if (b.pmf(j) == 0.0) continue;
                  double prod = 1.0;
                  for (std::size_t l = 0; l < mm; ++l)
                    prod *= -std::expm1(-mu * j * (t + gaps[l]));
                  acc += b.pmf(j) * prod;
                }
                v = acc;
              } else {
                for (std::size_t j = 0; j < mm; ++j) v *= 1.0 - b.pgf(g.cdf(t + gaps[j]));
              }
              break;
          }
          vals[i] = v;
        }
      });
  const double n = static_cast<double>(opt.mc_samples);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double mean = mom.sum[i] / n;
    const double se = detail::se_of_mean(mom.sum[i], mom.sumsq[i], opt.mc_samples);
    if (shared_last) {
      c.values.push_back(1.0 - mean);
    } else {
      c.values.push_back(mean);
    }
    c.stderrs.push_back(se);
  }
  return c;
}

inline TailCurve tuple_individual_tail(const QueueModel& m, const TupleQuery& q,
                                       const std::vector<double>& grid,
                                       const AnalyticOptions& opt = {}) {
  if (q.mode != TupleMode::Individual)
    throw std::invalid_argument("query.mode: expected individual");
  return tuple_tail(m, q, grid, opt);
}

inline TailCurve tuple_first_tail(const QueueModel& m, const TupleQuery& q,
                                  const std::vector<double>& grid,
                                  const AnalyticOptions& opt = {}) {
  if (q.mode != TupleMode::First) throw std::invalid_argument("query.mode: expected first");
  return tuple_tail(m, q, grid, opt);
}

inline TailCurve tuple_last_tail(const QueueModel& m, const TupleQuery& q,
                                 const std::vector<double>& grid,
                                 const AnalyticOptions& opt = {}) {
  if (q.mode != TupleMode::Last) throw std::invalid_argument("query.mode: expected last");
  return tuple_tail(m, q, grid, opt);
}

// ---------------------------------------------------------------------------
// Dispatch, default grids, means.

inline TailCurve eval_tail(const QueueModel& m, const OverlapQuery& q,
                           const std::vector<double>& grid, const AnalyticOptions& opt = {}) {
  if (const auto* p = std::get_if<PairIndividualQuery>(&q))
    return pair_individual_tail(m, *p, grid, opt);
  if (const auto* p = std::get_if<PairBatchQuery>(&q))
    return p->mode == BatchMode::First ? pair_batch_first_tail(m, *p, grid, opt)
                                       : pair_batch_last_tail(m, *p, grid, opt);
  return tuple_tail(m, std::get<TupleQuery>(q), grid, opt);
}

// Cheap pointwise upper bound on the tail: the service tail, or the batch
// maximum's tail for last-of-batch modes.
inline double tail_upper_bound(const QueueModel& m, const OverlapQuery& q, double t) {
  bool last = false;
  if (const auto* p = std::get_if<PairBatchQuery>(&q)) last = p->mode == BatchMode::Last;
  if (const auto* p = std::get_if<TupleQuery>(&q)) last = p->mode == TupleMode::Last;
  return last ? 1.0 - m.batch.pgf(m.service.cdf(t)) : m.service.tail(t);
}

// Smallest t at which the bound falls below the floor; the default grid ends
// there.
inline double tail_cutoff(const QueueModel& m, const OverlapQuery& q,
                          double floor_value = 1e-6) {
  if (m.service.is_atom()) return m.service.atom_value();
  const auto bound = [&](double t) { return tail_upper_bound(m, q, t); };
  double h = std::max(m.service.mean(), 1e-9);
  double t = h;
  int steps = 0;
  while (bound(t) >= floor_value && t < 1e12) {
    t += h;
    if (++steps % 64 == 0) h *= 2.0;
  }
  double lo = std::max(0.0, t - h);
  double hi = t;
  for (int i = 0; i < 200 && hi - lo > 1e-12 * std::max(1.0, hi); ++i) {
    const double mid = 0.5 * (lo + hi);
    (bound(mid) < floor_value ? hi : lo) = mid;
  }
  return hi;
}

inline std::vector<double> default_grid(const QueueModel& m, const OverlapQuery& q,
                                        std::size_t steps = 101,
                                        double floor_value = 1e-6) {
  if (steps < 2) throw std::invalid_argument("grid steps: must be >= 2");
  const double t_max = tail_cutoff(m, q, floor_value);
  std::vector<double> grid;
  grid.reserve(steps);
  for (std::size_t i = 0; i < steps; ++i)
    grid.push_back(t_max * static_cast<double>(i) / static_cast<double>(steps - 1));
  return grid;
}

struct MeanResult {
  double value = 0.0;
  double error = 0.0;
  Method method = Method::ClosedForm;
  bool has_closed_shared = false;
  double closed_shared = 0.0;
};

// E[O] = integral of the tail. Deterministic methods integrate the pointwise
// tail adaptively; Monte Carlo integrates a dense curve by trapezoid.
inline MeanResult overlap_mean(const QueueModel& m, const OverlapQuery& q,
                               const AnalyticOptions& opt = {}) {
  validate(q);
  const double cut = tail_cutoff(m, q, 1e-9);
  MeanResult r;
  if (cut <= 0.0) return r;

  // Probe with a single-point evaluation to resolve the method identically
  // to the tail operations.
  const Method method = eval_tail(m, q, {0.0}, [&] {
    AnalyticOptions probe = opt;
    probe.mc_samples = 2;
    return probe;
  }()).method;
  r.method = method;

  if (method == Method::GapMonteCarlo) {
    std::vector<double> grid;
    const std::size_t steps = 1001;
    grid.reserve(steps);
    for (std::size_t i = 0; i < steps; ++i)
      grid.push_back(cut * static_cast<double>(i) / static_cast<double>(steps - 1));
    const TailCurve curve = eval_tail(m, q, grid, opt);
    double acc = 0.0;
    double se_acc = 0.0;
    const double h = grid[1] - grid[0];
    for (std::size_t i = 0; i + 1 < grid.size(); ++i) {
      acc += 0.5 * h * (curve.values[i] + curve.values[i + 1]);
      se_acc += 0.5 * h * (curve.stderrs[i] + curve.stderrs[i + 1]);
    }
    r.value = acc;
    r.error = se_acc;
  } else {
    AnalyticOptions point_opt = opt;
    point_opt.method =
        method == Method::ClosedForm ? MethodChoice::Closed : MethodChoice::Quadrature;
    const auto point = [&](double t) {
      return eval_tail(m, q, {t}, point_opt).values[0];
    };
    const auto integ =
        integrate_adaptive(point, 0.0, cut, opt.quad, m.service.density_jumps());
    r.value = integ.value;
    r.error = integ.error_estimate + 1e-9 * std::max(cut, 1.0);
  }

  // Closed shared-size first-of-batch mean, reported alongside the integral
  // when service is exponential.
  if (const auto* tq = std::get_if<TupleQuery>(&q)) {
    const auto* es = detail::exp_service(m);
    if (es != nullptr && tq->mode == TupleMode::First &&
        tq->semantics == BatchSemantics::Shared) {
      const double mu = es->rate;
      const auto d = tq->gaps();
      const auto mmm = static_cast<double>(tq->indices.size());
      double acc = 0.0;
      for (int j = 1; j <= m.batch.max_support(); ++j) {
        if (m.batch.pmf(j) == 0.0) continue;
        double term = m.batch.pmf(j) / static_cast<double>(j);
        for (std::size_t l = 0; l < d.size(); ++l)
          term *= std::pow(m.interarrival.laplace(mu * j * static_cast<double>(l + 1)),
                           d[l]);
        acc += term;
      }
      r.has_closed_shared = true;
      r.closed_shared = acc / (mu * mmm);
    }
  }
  return r;
}

}  // namespace overlapq
