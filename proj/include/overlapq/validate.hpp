#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "overlapq/analytic.hpp"
#include "overlapq/json_io.hpp"
#include "overlapq/sim.hpp"

namespace overlapq {

// Band widening factor on the analytic standard error when the analytic curve
// is itself a Monte-Carlo estimate.
inline constexpr double kAnalyticSeBand = 3.0;

struct ValidationReport {
  QueueModel model;
  OverlapQuery query;

  std::vector<double> grid;
  std::vector<double> analytic_values;
  std::vector<double> empirical_values;
  std::vector<double> band;
  std::vector<bool> per_point;

  double max_absolute_deviation = 0.0;
  bool pass = false;
  std::size_t n = 0;
  double delta = 0.0;
  double epsilon = 0.0;
  std::uint64_t analytic_seed = 0;
  std::uint64_t sim_seed = 0;
  std::string analytic_method;
  std::string semantics_compared;

  const char* verdict() const { return pass ? "pass" : "fail"; }
};

// Checks the analytic curve against the empirical tail point by point.  The
// allowance is the DKW half-width, widened by the analytic method's own error
// (3 standard errors for gap Monte Carlo, the stated tolerance otherwise).
inline ValidationReport compare_curves(const TailCurve& analytic, const SimEstimate& sim) {
  if (analytic.grid.size() != sim.grid.size())
    throw std::domain_error("compare_curves: grids differ");
  for (std::size_t i = 0; i < analytic.grid.size(); ++i)
    if (analytic.grid[i] != sim.grid[i])
      throw std::domain_error("compare_curves: grids differ");

  ValidationReport r;
  r.model = analytic.model;
  r.query = analytic.query;
  r.grid = analytic.grid;
  r.analytic_values = analytic.values;
  r.empirical_values = sim.values;
  r.n = sim.n;
  r.delta = sim.delta;
  r.epsilon = sim.epsilon;
  r.analytic_seed = analytic.seed;
  r.sim_seed = sim.seed;
  r.analytic_method = method_name(analytic.method);
  if (const auto* t = std::get_if<TupleQuery>(&analytic.query))
    r.semantics_compared = to_string(t->semantics);
  else
    r.semantics_compared = "none";

  const bool mc = analytic.method == Method::GapMonteCarlo;
  r.pass = true;
  for (std::size_t i = 0; i < r.grid.size(); ++i) {
    const double dev = std::abs(r.analytic_values[i] - r.empirical_values[i]);
    const double widen = mc ? kAnalyticSeBand * analytic.stderrs[i] : analytic.tolerance;
    const double allowed = sim.epsilon + widen;
    r.band.push_back(allowed);
    const bool ok = dev <= allowed;
    r.per_point.push_back(ok);
    r.pass = r.pass && ok;
    r.max_absolute_deviation = std::max(r.max_absolute_deviation, dev);
  }
  return r;
}

inline Json to_json(const ValidationReport& r) {
  Json j;
  j["query"] = to_json(r.query);
  j["model"] = to_json(r.model);
  j["max_absolute_deviation"] = r.max_absolute_deviation;
  Json pts = Json::array();
  for (std::size_t i = 0; i < r.grid.size(); ++i) {
    Json p;
    p["t"] = r.grid[i];
    p["analytic"] = r.analytic_values[i];
    p["empirical"] = r.empirical_values[i];
    p["band"] = r.band[i];
    p["pass"] = static_cast<bool>(r.per_point[i]);
    pts.push_back(std::move(p));
  }
  j["per_point"] = std::move(pts);
  j["verdict"] = r.verdict();
  j["n"] = r.n;
  j["delta"] = r.delta;
  j["epsilon"] = r.epsilon;
  j["seeds"] = Json{{"analytic", r.analytic_seed}, {"simulation", r.sim_seed}};
  j["analytic_method"] = r.analytic_method;
  j["semantics_compared"] = r.semantics_compared;
  return j;
}

// ---------------------------------------------------------------------------
// Reduction identities.

struct ReductionCheck {
  std::string name;
  double max_deviation = 0.0;
  double tolerance = 0.0;
  bool pass = false;
};

namespace detail {

inline double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

inline ReductionCheck make_check(std::string name, double dev, double tol) {
  return ReductionCheck{std::move(name), dev, tol, dev <= tol};
}

}  // namespace detail

// Exercises the collapse identities on an exponential-arrival,
// exponential-service base model: unit batches reduce batch formulas to
// individual ones, two-index tuples reduce to pairs, and the two-index
// closed form matches e^{-2 mu t} (lambda/(lambda+mu))^k.
inline std::vector<ReductionCheck> reduction_suite(double lambda, double mu,
                                                   std::uint64_t seed = 0x7265647563ULL,
                                                   std::size_t mc_samples = 400000) {
  const ContinuousDist inter = ContinuousDist::exponential(lambda);
  const ContinuousDist service = ContinuousDist::exponential(mu);
  const QueueModel unit{inter, BatchDist::fixed(1), service};
  const QueueModel mixed{inter, BatchDist::explicit_pmf({0.5, 0.5}), service};

  std::vector<double> grid;
  for (int i = 0; i <= 40; ++i) grid.push_back(6.0 / mu * i / 40.0);

  const double exact_tol = 1e-10;
  AnalyticOptions closed;
  closed.method = MethodChoice::Closed;
  AnalyticOptions quad;
  quad.method = MethodChoice::Quadrature;
  quad.quad.abs_tol = 1e-12;
  quad.quad.rel_tol = 1e-10;
  quad.quad.truncation_quantile = 1.0 - 1e-12;

  std::vector<ReductionCheck> out;

  // Unit batches: all three pair operations coincide, on both exact paths.
  {
    double dev_first = 0.0, dev_last = 0.0, dev_first_q = 0.0, dev_last_q = 0.0;
    for (int k = 1; k <= 3; ++k) {
      const auto ind = pair_individual_tail(unit, {k, false}, grid, closed);
      const auto first = pair_batch_first_tail(unit, {BatchMode::First, k}, grid, closed);
      const auto last = pair_batch_last_tail(unit, {BatchMode::Last, k}, grid, closed);
      dev_first = std::max(dev_first, detail::max_abs_diff(ind.values, first.values));
      dev_last = std::max(dev_last, detail::max_abs_diff(ind.values, last.values));
      const auto first_q = pair_batch_first_tail(unit, {BatchMode::First, k}, grid, quad);
      const auto last_q = pair_batch_last_tail(unit, {BatchMode::Last, k}, grid, quad);
      dev_first_q = std::max(dev_first_q, detail::max_abs_diff(ind.values, first_q.values));
      dev_last_q = std::max(dev_last_q, detail::max_abs_diff(ind.values, last_q.values));
    }
    out.push_back(detail::make_check("unit-batch-pair-first", dev_first, exact_tol));
    out.push_back(detail::make_check("unit-batch-pair-last", dev_last, exact_tol));
    out.push_back(detail::make_check("unit-batch-pair-first-quadrature", dev_first_q, exact_tol));
    out.push_back(detail::make_check("unit-batch-pair-last-quadrature", dev_last_q, exact_tol));
  }

  // Unit batches collapse tuple modes onto the individual tuple.
  {
    TupleQuery base{{1, 2, 4}, TupleMode::Individual, BatchSemantics::Independent};
    const auto ind = tuple_individual_tail(unit, base, grid, closed);
    TupleQuery qf = base;
    qf.mode = TupleMode::First;
    TupleQuery ql = base;
    ql.mode = TupleMode::Last;
    const auto first = tuple_first_tail(unit, qf, grid, closed);
    const auto last = tuple_last_tail(unit, ql, grid, closed);
    out.push_back(detail::make_check(
        "unit-batch-tuple-first", detail::max_abs_diff(ind.values, first.values), exact_tol));
    out.push_back(detail::make_check(
        "unit-batch-tuple-last", detail::max_abs_diff(ind.values, last.values), exact_tol));
  }

  // Two-index tuples are pairs.
  {
    const auto pair_ind = pair_individual_tail(unit, {2, false}, grid, closed);
    const auto tup_ind = tuple_individual_tail(
        unit, {{1, 3}, TupleMode::Individual, BatchSemantics::Independent}, grid, closed);
    out.push_back(detail::make_check(
        "tuple-pair-individual", detail::max_abs_diff(pair_ind.values, tup_ind.values),
        exact_tol));

    const auto pair_first =
        pair_batch_first_tail(mixed, {BatchMode::First, 2}, grid, closed);
    const auto tup_first = tuple_first_tail(
        mixed, {{2, 4}, TupleMode::First, BatchSemantics::Independent}, grid, closed);
    out.push_back(detail::make_check(
        "tuple-pair-first", detail::max_abs_diff(pair_first.values, tup_first.values),
        exact_tol));

    const auto pair_last = pair_batch_last_tail(mixed, {BatchMode::Last, 2}, grid, closed);
    const auto tup_last = tuple_last_tail(
        mixed, {{2, 4}, TupleMode::Last, BatchSemantics::Independent}, grid, closed);
    out.push_back(detail::make_check(
        "tuple-pair-last", detail::max_abs_diff(pair_last.values, tup_last.values), exact_tol));
  }

  // Two-index closed form equals e^{-2 mu t} (lambda/(lambda+mu))^k.
  {
    double dev = 0.0;
    for (int k = 1; k <= 3; ++k) {
      const auto tup = tuple_individual_tail(
          unit, {{1, 1 + k}, TupleMode::Individual, BatchSemantics::Independent}, grid, closed);
      for (std::size_t i = 0; i < grid.size(); ++i) {
        const double expect = std::exp(-2.0 * mu * grid[i]) *
                              std::pow(lambda / (lambda + mu), static_cast<double>(k));
        dev = std::max(dev, std::abs(tup.values[i] - expect));
      }
    }
    out.push_back(detail::make_check("tuple-exponential-identity", dev, exact_tol));
  }

  // Closed form vs gap Monte Carlo on the three-index tuple.
  {
    const TupleQuery tq{{1, 2, 3}, TupleMode::Individual, BatchSemantics::Independent};
    const auto exact = tuple_individual_tail(unit, tq, grid, closed);
    AnalyticOptions mc;
    mc.method = MethodChoice::Mc;
    mc.mc_samples = mc_samples;
    mc.seed = seed;
    const auto est = tuple_individual_tail(unit, tq, grid, mc);
    double excess = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
      const double dev = std::abs(exact.values[i] - est.values[i]);
      excess = std::max(excess, dev - kAnalyticSeBand * est.stderrs[i]);
    }
    out.push_back(detail::make_check("tuple-closed-vs-gap-mc", excess, 0.0));
  }

  return out;
}

inline Json to_json(const std::vector<ReductionCheck>& checks) {
  Json j = Json::array();
  for (const auto& c : checks) {
    Json e;
    e["name"] = c.name;
    e["max_deviation"] = c.max_deviation;
    e["tolerance"] = c.tolerance;
    e["verdict"] = c.pass ? "pass" : "fail";
    j.push_back(std::move(e));
  }
  return j;
}

// ---------------------------------------------------------------------------
// Shared-vs-independent batch-size adjudication.

struct AdjudicationOptions {
  std::size_t anchors = 1000000;
  double delta = 0.01;
  std::uint64_t seed = 0x61646a75ULL;
  std::size_t grid_steps = 101;
  AnalyticOptions analytic{};
};

struct AdjudicationReport {
  QueueModel model;
  TupleQuery query;

  std::vector<double> grid;
  TailCurve independent;
  TailCurve shared;
  SimEstimate trajectory;

  double max_dev_independent = 0.0;
  double max_dev_shared = 0.0;
  bool independent_within = false;
  bool shared_within = false;
  std::string verdict;  // independent | shared | coincide | both | neither
  double rejected_deviation = 0.0;

  std::size_t n = 0;
  double delta = 0.0;
  double epsilon = 0.0;
  std::uint64_t seed = 0;

  bool decisive() const { return verdict == "independent" || verdict == "shared"; }
};

namespace detail {

inline bool curve_within(const TailCurve& c, const SimEstimate& sim, double& max_dev) {
  const bool mc = c.method == Method::GapMonteCarlo;
  bool ok = true;
  max_dev = 0.0;
  for (std::size_t i = 0; i < c.grid.size(); ++i) {
    const double dev = std::abs(c.values[i] - sim.values[i]);
    const double allowed =
        sim.epsilon + (mc ? kAnalyticSeBand * c.stderrs[i] : c.tolerance);
    ok = ok && dev <= allowed;
    max_dev = std::max(max_dev, dev);
  }
  return ok;
}

}  // namespace detail

// Evaluates the tuple tail under both batch-size semantics and asks a
// trajectory simulation which one the queue actually produces.  A degenerate
// batch size makes the two coincide and short-circuits the simulation.
inline AdjudicationReport semantics_adjudication(const QueueModel& m, const TupleQuery& q,
                                                 const AdjudicationOptions& opt = {}) {
  q.validate();
  AdjudicationReport r;
  r.model = m;
  r.query = q;
  r.delta = opt.delta;
  r.seed = opt.seed;

  TupleQuery qi = q;
  qi.semantics = BatchSemantics::Independent;
  TupleQuery qs = q;
  qs.semantics = BatchSemantics::Shared;

  r.grid = default_grid(m, qi, opt.grid_steps);
  r.independent = eval_tail(m, qi, r.grid, opt.analytic);
  r.shared = eval_tail(m, qs, r.grid, opt.analytic);

  if (m.batch.degenerate()) {
    r.verdict = "coincide";
    r.max_dev_independent = r.max_dev_shared =
        detail::max_abs_diff(r.independent.values, r.shared.values);
    return r;
  }

  const auto traj = simulate_trajectory(m, batches_needed(q, opt.anchors), opt.seed);
  const auto samples = overlaps_from_trajectory(traj, q);
  r.trajectory = estimate_tail(samples.values, r.grid, opt.delta, opt.seed);
  r.n = r.trajectory.n;
  r.epsilon = r.trajectory.epsilon;

  r.independent_within = detail::curve_within(r.independent, r.trajectory, r.max_dev_independent);
  r.shared_within = detail::curve_within(r.shared, r.trajectory, r.max_dev_shared);

  if (r.independent_within && r.shared_within) {
    r.verdict = "both";
  } else if (r.independent_within) {
    r.verdict = "independent";
    r.rejected_deviation = r.max_dev_shared;
  } else if (r.shared_within) {
    r.verdict = "shared";
    r.rejected_deviation = r.max_dev_independent;
  } else {
    r.verdict = "neither";
  }
  return r;
}

inline Json to_json(const AdjudicationReport& r) {
  Json j;
  j["model"] = to_json(r.model);
  j["query"] = to_json(OverlapQuery{r.query});
  j["verdict"] = r.verdict;
  j["max_dev_independent"] = r.max_dev_independent;
  j["max_dev_shared"] = r.max_dev_shared;
  j["independent_within"] = r.independent_within;
  j["shared_within"] = r.shared_within;
  j["rejected_deviation"] = r.rejected_deviation;
  j["n"] = r.n;
  j["delta"] = r.delta;
  j["epsilon"] = r.epsilon;
  j["seed"] = r.seed;
  Json pts = Json::array();
  for (std::size_t i = 0; i < r.grid.size(); ++i) {
    Json p;
    p["t"] = r.grid[i];
    p["independent"] = r.independent.values[i];
    p["shared"] = r.shared.values[i];
    if (!r.trajectory.values.empty()) p["empirical"] = r.trajectory.values[i];
    pts.push_back(std::move(p));
  }
  j["per_point"] = std::move(pts);
  return j;
}

}  // namespace overlapq
