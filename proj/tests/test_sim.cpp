#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "overlapq/dist.hpp"
#include "overlapq/numerics.hpp"
#include "overlapq/query.hpp"
#include "overlapq/sim.hpp"

using namespace overlapq;

namespace {

std::vector<double> linspace(double hi, std::size_t n) {
  std::vector<double> g;
  g.reserve(n);
  for (std::size_t i = 0; i < n; ++i)
    g.push_back(hi * static_cast<double>(i) / static_cast<double>(n - 1));
  return g;
}

double frac_positive(const std::vector<double>& v) {
  std::size_t hits = 0;
  for (double x : v)
    if (x > 0.0) ++hits;
  return static_cast<double>(hits) / static_cast<double>(v.size());
}

}  // namespace

// ---------------------------------------------------------------------------
// Trajectories.

TEST_CASE("constant gaps produce the integer arrival times", "[sim][trajectory]") {
  const QueueModel m{ContinuousDist::deterministic(1.0), BatchDist::fixed(1),
                     ContinuousDist::exponential(1.0)};
  const auto log = simulate_trajectory(m, 3, 1);
  REQUIRE(log.batches() == 3);
  CHECK(log.arrival == std::vector<double>{1.0, 2.0, 3.0});
}

TEST_CASE("fixed batch size fills every batch", "[sim][trajectory]") {
  const QueueModel m{ContinuousDist::exponential(1.0), BatchDist::fixed(2),
                     ContinuousDist::exponential(1.0)};
  const auto log = simulate_trajectory(m, 50, 2);
  for (std::size_t n = 0; n < log.batches(); ++n) REQUIRE(log.batch_size(n) == 2);
}

TEST_CASE("mean arrival gap obeys the law of large numbers", "[sim][trajectory]") {
  const QueueModel m{ContinuousDist::exponential(2.0), BatchDist::fixed(1),
                     ContinuousDist::exponential(1.0)};
  const std::size_t n = 100000;
  const auto log = simulate_trajectory(m, n, 3);
  CHECK(log.arrival.back() / static_cast<double>(n) == Catch::Approx(0.5).margin(0.01));
}

TEST_CASE("trajectories are deterministic in the seed", "[sim][trajectory]") {
  const QueueModel m{ContinuousDist::exponential(1.0), BatchDist::explicit_pmf({0.5, 0.5}),
                     ContinuousDist::exponential(1.0)};
  const auto a = simulate_trajectory(m, 200, 7);
  const auto b = simulate_trajectory(m, 200, 7);
  const auto c = simulate_trajectory(m, 200, 8);
  REQUIRE(a.arrival == b.arrival);
  REQUIRE(a.service == b.service);
  CHECK(a.arrival != c.arrival);
}

TEST_CASE("arrival skeleton ignores the batch and service laws", "[sim][trajectory]") {
  const QueueModel m1{ContinuousDist::exponential(1.0), BatchDist::fixed(1),
                      ContinuousDist::exponential(1.0)};
  const QueueModel m2{ContinuousDist::exponential(1.0), BatchDist::explicit_pmf({0.2, 0.8}),
                      ContinuousDist::uniform(0.5, 2.0)};
  const auto a = simulate_trajectory(m1, 100, 9);
  const auto b = simulate_trajectory(m2, 100, 9);
  CHECK(a.arrival == b.arrival);
}

TEST_CASE("empty trajectories are rejected", "[sim][trajectory]") {
  const QueueModel m{ContinuousDist::exponential(1.0), BatchDist::fixed(1),
                     ContinuousDist::exponential(1.0)};
  CHECK_THROWS_AS(simulate_trajectory(m, 0, 1), std::invalid_argument);
}

// ---------------------------------------------------------------------------
// Reading overlaps off a trajectory.

TEST_CASE("hand-computed pair overlap", "[sim][extract]") {
  const TrajectoryLog log{{0.0, 1.0}, {{2.0}, {2.0}}};
  const auto out = overlaps_from_trajectory(log, PairIndividualQuery{1, false});
  REQUIRE(out.values.size() == 1);
  CHECK(out.values[0] == 1.0);
  CHECK(out.skipped == 0);
}

TEST_CASE("hand-computed pair with no overlap", "[sim][extract]") {
  const TrajectoryLog log{{0.0, 1.0}, {{0.5}, {2.0}}};
  const auto out = overlaps_from_trajectory(log, PairIndividualQuery{1, false});
  REQUIRE(out.values.size() == 1);
  CHECK(out.values[0] == 0.0);
}

TEST_CASE("hand-computed batch extremes", "[sim][extract]") {
  const TrajectoryLog log{{0.0, 1.0}, {{0.5, 3.0}, {2.0, 0.2}}};
  const auto last = overlaps_from_trajectory(log, PairBatchQuery{BatchMode::Last, 1});
  REQUIRE(last.values.size() == 1);
  CHECK(last.values[0] == 2.0);
  // min departures: min(0.5, 1 + 0.2) = 0.5 before the second arrival.
  const auto first = overlaps_from_trajectory(log, PairBatchQuery{BatchMode::First, 1});
  CHECK(first.values[0] == 0.0);
}

TEST_CASE("windows are disjoint and span the lag", "[sim][extract]") {
  const QueueModel m{ContinuousDist::exponential(1.0), BatchDist::fixed(1),
                     ContinuousDist::exponential(1.0)};
  const auto log = simulate_trajectory(m, 10, 11);
  CHECK(overlaps_from_trajectory(log, PairIndividualQuery{1, false}).values.size() == 5);
  const TupleQuery tq{{1, 2, 4}, TupleMode::Individual, {}};
  CHECK(query_span(OverlapQuery{tq}) == 3);
  CHECK(batches_needed(OverlapQuery{tq}, 1000) == 4000);
  CHECK(overlaps_from_trajectory(log, tq).values.size() == 2);
  CHECK_THROWS_AS(overlaps_from_trajectory(log, PairIndividualQuery{10, false}),
                  std::domain_error);
}

TEST_CASE("small batches are skipped for same-batch pairs", "[sim][extract]") {
  const TrajectoryLog log{{1.0, 2.0, 3.0}, {{1.0}, {1.0, 2.0}, {3.0}}};
  const auto out = overlaps_from_trajectory(log, PairIndividualQuery{0, false});
  REQUIRE(out.values.size() == 1);
  CHECK(out.values[0] == 1.0);
  CHECK(out.skipped == 2);
  const auto same = overlaps_from_trajectory(log, PairIndividualQuery{0, true});
  CHECK(same.values == std::vector<double>{1.0, 1.0, 3.0});
}

TEST_CASE("pair samples never exceed the participating services", "[sim][extract]") {
  const QueueModel m{ContinuousDist::exponential(1.0), BatchDist::fixed(1),
                     ContinuousDist::uniform(0.5, 2.0)};
  const auto log = simulate_trajectory(m, 20000, 13);
  const auto out = overlaps_from_trajectory(log, PairIndividualQuery{1, false});
  REQUIRE(out.values.size() == 10000);
  // Differencing departure clocks of size ~2e4 loses ~ulp(A) per sample.
  const double slack = 1e-12 * (1.0 + log.arrival.back());
  for (std::size_t w = 0; w < out.values.size(); ++w) {
    const double cap = std::min(log.service[2 * w][0], log.service[2 * w + 1][0]);
    CHECK(out.values[w] >= 0.0);
    CHECK(out.values[w] <= cap + slack);
  }
}

// ---------------------------------------------------------------------------
// Direct sampling.

TEST_CASE("constant self overlap equals the service depth", "[sim][direct]") {
  const QueueModel m{ContinuousDist::exponential(1.0), BatchDist::fixed(1),
                     ContinuousDist::deterministic(1.5)};
  const auto out = direct_sample_overlap(m, PairIndividualQuery{0, true}, 100, 17);
  for (double v : out.values) REQUIRE(v == 1.5);
}

TEST_CASE("adjacent pair overlap probability", "[sim][direct]") {
  const QueueModel m{ContinuousDist::exponential(1.0), BatchDist::fixed(1),
                     ContinuousDist::exponential(1.0)};
  const auto out = direct_sample_overlap(m, PairIndividualQuery{1, false}, 1000000, 19);
  CHECK(frac_positive(out.values) == Catch::Approx(0.5).margin(0.002));

  // The whole curve sits inside the DKW band around the exact tail.
  const auto grid = linspace(4.0, 21);
  const auto est = estimate_tail(out.values, grid, 0.01, 19);
  for (std::size_t i = 0; i < grid.size(); ++i)
    CHECK(std::abs(est.values[i] - 0.5 * std::exp(-2.0 * grid[i])) <= est.epsilon);
}

TEST_CASE("first-of-batch overlap probability for batches of two", "[sim][direct]") {
  const QueueModel m{ContinuousDist::exponential(1.0), BatchDist::fixed(2),
                     ContinuousDist::exponential(1.0)};
  const auto out =
      direct_sample_overlap(m, PairBatchQuery{BatchMode::First, 1}, 1000000, 23);
  CHECK(frac_positive(out.values) == Catch::Approx(1.0 / 3.0).margin(0.002));
}

TEST_CASE("direct samples are deterministic in the seed", "[sim][direct]") {
  const QueueModel m{ContinuousDist::exponential(1.0), BatchDist::explicit_pmf({0.5, 0.5}),
                     ContinuousDist::exponential(1.0)};
  const TupleQuery q{{1, 2, 3}, TupleMode::Last, {}};
  const auto a = direct_sample_overlap(m, q, 5000, 29);
  const auto b = direct_sample_overlap(m, q, 5000, 29);
  const auto c = direct_sample_overlap(m, q, 5000, 30);
  REQUIRE(a.values == b.values);
  CHECK(a.values != c.values);
  CHECK_THROWS_AS(direct_sample_overlap(m, q, 0, 1), std::invalid_argument);
}

TEST_CASE("every overlap sample is nonnegative", "[sim][direct]") {
  const QueueModel m{ContinuousDist::lognormal(0.0, 0.5), BatchDist::geometric(0.4),
                     ContinuousDist::uniform(0.5, 2.0)};
  for (const OverlapQuery q :
       {OverlapQuery{PairIndividualQuery{2, false}}, OverlapQuery{PairBatchQuery{BatchMode::Last, 1}},
        OverlapQuery{TupleQuery{{1, 3}, TupleMode::First, {}}}}) {
    const auto out = direct_sample_overlap(m, q, 20000, 31);
    CHECK(*std::min_element(out.values.begin(), out.values.end()) >= 0.0);
  }
}

// ---------------------------------------------------------------------------
// Empirical estimates.

TEST_CASE("confidence widths follow the closed form", "[sim][estimate]") {
  std::vector<double> samples(1000000, 1.0);
  const auto est = estimate_tail(samples, {0.0, 2.0}, 0.01, 5);
  CHECK(est.epsilon == Catch::Approx(0.00162762).margin(2e-6));
  CHECK(est.n == 1000000);
  CHECK(est.delta == 0.01);
  CHECK(est.seed == 5);
  CHECK(est.values == std::vector<double>{1.0, 0.0});
  std::vector<double> small(100, 1.0);
  CHECK(estimate_tail(small, {0.0}, 0.05).epsilon == Catch::Approx(0.13581).margin(1e-4));
}

TEST_CASE("all-zero samples estimate a zero tail", "[sim][estimate]") {
  const std::vector<double> zeros(1000, 0.0);
  const auto est = estimate_tail(zeros, {0.0, 0.5, 1.0}, 0.01);
  for (double v : est.values) CHECK(v == 0.0);
}

// ---------------------------------------------------------------------------
// The two samplers draw the same law.

TEST_CASE("direct sampling matches trajectory extraction", "[sim][oracle]") {
  const QueueModel m{ContinuousDist::exponential(1.0), BatchDist::explicit_pmf({0.5, 0.5}),
                     ContinuousDist::exponential(1.0)};
  const std::size_t anchors = 100000;
  const auto grid = linspace(4.0, 17);

  const std::vector<OverlapQuery> queries = {
      PairIndividualQuery{1, false},
      PairBatchQuery{BatchMode::Last, 1},
      PairBatchQuery{BatchMode::First, 2},
      TupleQuery{{1, 2}, TupleMode::Individual, {}},
      TupleQuery{{1, 2, 3}, TupleMode::First, {}},
      TupleQuery{{1, 3}, TupleMode::Last, {}},
  };
  for (const auto& q : queries) {
    const auto direct = direct_sample_overlap(m, q, anchors, 37);
    const auto log = simulate_trajectory(m, batches_needed(q, anchors), 38);
    const auto walked = overlaps_from_trajectory(log, q);
    REQUIRE(walked.values.size() >= anchors);
    const auto e1 = estimate_tail(direct.values, grid, 0.01);
    const auto e2 = estimate_tail(walked.values, grid, 0.01);
    const double band = 2.0 * (e1.epsilon + e2.epsilon);
    for (std::size_t i = 0; i < grid.size(); ++i)
      CHECK(std::abs(e1.values[i] - e2.values[i]) <= band);
  }
}
