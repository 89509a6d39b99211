#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <vector>

#include "overlapq/curve.hpp"
#include "overlapq/dist.hpp"
#include "overlapq/numerics.hpp"
#include "overlapq/parallel.hpp"
#include "overlapq/query.hpp"
#include "overlapq/rng.hpp"

namespace overlapq {

// One realized arrival process: batch n has arrival time arrival[n] and
// service[n][j] for its customers. Departures are arrival + service.
struct TrajectoryLog {
  std::vector<double> arrival;
  std::vector<std::vector<double>> service;

  std::size_t batches() const { return arrival.size(); }
  int batch_size(std::size_t n) const { return static_cast<int>(service[n].size()); }
  double departure(std::size_t n, std::size_t j) const { return arrival[n] + service[n][j]; }
};

// A_1 is the first inter-arrival draw; sizes and services are i.i.d.
// Substreams: 0 inter-arrivals, 1 batch sizes, 2 services, so the arrival
// skeleton is unchanged by batch/service family swaps.
inline TrajectoryLog simulate_trajectory(const QueueModel& m, std::size_t n_batches,
                                         std::uint64_t seed) {
  if (n_batches < 1) throw std::invalid_argument("n_batches: must be >= 1");
  Stream arr(seed, 0);
  Stream bat(seed, 1);
  Stream svc(seed, 2);
  TrajectoryLog log;
  log.arrival.reserve(n_batches);
  log.service.reserve(n_batches);
  double t = 0.0;
  for (std::size_t n = 0; n < n_batches; ++n) {
    t += m.interarrival.sample(arr);
    log.arrival.push_back(t);
    const int b = m.batch.sample(bat);
    std::vector<double> s(static_cast<std::size_t>(b));
    for (auto& x : s) x = m.service.sample(svc);
    log.service.push_back(std::move(s));
  }
  return log;
}

struct OverlapSamples {
  std::vector<double> values;
  std::size_t skipped = 0;  // anchors dropped for missing customer indices
};

// Batch distance between the first and last batch the query touches.
inline int query_span(const OverlapQuery& q) {
  if (const auto* p = std::get_if<PairIndividualQuery>(&q)) return p->lag;
  if (const auto* p = std::get_if<PairBatchQuery>(&q)) return p->lag;
  const auto& t = std::get<TupleQuery>(q);
  return t.indices.back() - t.indices.front();
}

// Batches required for n_samples independent anchors: windows span span+1
// batches and consecutive windows share none, so neither services nor the
// gaps inside a window recur.
inline std::size_t batches_needed(const OverlapQuery& q, std::size_t n_samples) {
  return n_samples * (static_cast<std::size_t>(query_span(q)) + 1);
}

namespace detail {

inline double batch_stat_min(const TrajectoryLog& log, std::size_t n) {
  const auto& s = log.service[n];
  return log.arrival[n] + *std::min_element(s.begin(), s.end());
}

inline double batch_stat_max(const TrajectoryLog& log, std::size_t n) {
  const auto& s = log.service[n];
  return log.arrival[n] + *std::max_element(s.begin(), s.end());
}

}  // namespace detail

// Reads overlap samples off a trajectory, one per window of span+1 batches.
// The sample is (min of the participating departures - last arrival)^+.
inline OverlapSamples overlaps_from_trajectory(const TrajectoryLog& log,
                                               const OverlapQuery& q) {
  validate(q);
  const int span = query_span(q);
  const std::size_t window = static_cast<std::size_t>(span) + 1;
  if (log.batches() < window)
    throw std::domain_error("trajectory: fewer batches than the query span needs");

  OverlapSamples out;
  out.values.reserve(log.batches() / window);

  for (std::size_t a = 0; a + window <= log.batches(); a += window) {
    if (const auto* p = std::get_if<PairIndividualQuery>(&q)) {
      if (p->lag == 0) {
        if (p->same_customer) {
          out.values.push_back(log.service[a][0]);
        } else {
          if (log.batch_size(a) < 2) {
            ++out.skipped;
            continue;
          }
          out.values.push_back(std::min(log.service[a][0], log.service[a][1]));
        }
      } else {
        const std::size_t b = a + static_cast<std::size_t>(p->lag);
        const double d = std::min(log.departure(a, 0), log.departure(b, 0));
        out.values.push_back(std::max(0.0, d - log.arrival[b]));
      }
    } else if (const auto* p = std::get_if<PairBatchQuery>(&q)) {
      const std::size_t b = a + static_cast<std::size_t>(p->lag);
      const bool first = p->mode == BatchMode::First;
      const double ra = first ? detail::batch_stat_min(log, a) : detail::batch_stat_max(log, a);
      const double rb = first ? detail::batch_stat_min(log, b) : detail::batch_stat_max(log, b);
      out.values.push_back(std::max(0.0, std::min(ra, rb) - log.arrival[b]));
    } else {
      const auto& tq = std::get<TupleQuery>(q);
      const std::size_t last = a + static_cast<std::size_t>(span);
      double dmin = std::numeric_limits<double>::infinity();
      for (int idx : tq.indices) {
        const std::size_t n = a + static_cast<std::size_t>(idx - tq.indices.front());
        double rep = 0.0;
        switch (tq.mode) {
          case TupleMode::Individual: rep = log.departure(n, 0); break;
          case TupleMode::First: rep = detail::batch_stat_min(log, n); break;
          case TupleMode::Last: rep = detail::batch_stat_max(log, n); break;
        }
        dmin = std::min(dmin, rep);
      }
      out.values.push_back(std::max(0.0, dmin - log.arrival[last]));
    }
  }
  return out;
}

// Samples the query's defining formula directly: draw the arrival gaps and
// exactly the service (and batch size) variables the formula mentions.
// Distributionally identical to reading a trajectory, without the calendar.
inline OverlapSamples direct_sample_overlap(const QueueModel& m, const OverlapQuery& q,
                                            std::size_t n, std::uint64_t seed) {
  validate(q);
  if (n < 1) throw std::invalid_argument("N: must be >= 1");

  OverlapSamples out;
  out.values.assign(n, 0.0);

  const auto sample_one = [&](Stream& rng) -> double {
    if (const auto* p = std::get_if<PairIndividualQuery>(&q)) {
      if (p->lag == 0) {
        const double s1 = m.service.sample(rng);
        if (p->same_customer) return s1;
        return std::min(s1, m.service.sample(rng));
      }
      double y = 0.0;
      for (int i = 0; i < p->lag; ++i) y += m.interarrival.sample(rng);
      const double s1 = m.service.sample(rng);
      const double s2 = m.service.sample(rng);
      return std::max(0.0, std::min(s1 - y, s2));
    }
    if (const auto* p = std::get_if<PairBatchQuery>(&q)) {
      double y = 0.0;
      for (int i = 0; i < p->lag; ++i) y += m.interarrival.sample(rng);
      const bool first = p->mode == BatchMode::First;
      const auto rep = [&]() {
        const int b = m.batch.sample(rng);
        double r = m.service.sample(rng);
        for (int j = 1; j < b; ++j) {
          const double s = m.service.sample(rng);
          r = first ? std::min(r, s) : std::max(r, s);
        }
        return r;
      };
      const double r1 = rep();
      const double r2 = rep();
      return std::max(0.0, std::min(r1 - y, r2));
    }
    const auto& tq = std::get<TupleQuery>(q);
    const auto d = tq.gaps();
    const std::size_t mm = tq.indices.size();
    // g_i = A_{n_m} - A_{n_i}; built back to front.
    std::vector<double> g(mm, 0.0);
    for (std::size_t l = mm - 1; l-- > 0;) {
      double y = 0.0;
      for (int i = 0; i < d[l]; ++i) y += m.interarrival.sample(rng);
      g[l] = g[l + 1] + y;
    }
    double dmin = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < mm; ++i) {
      double rep;
      if (tq.mode == TupleMode::Individual) {
        rep = m.service.sample(rng);
      } else {
        const int b = m.batch.sample(rng);
        rep = m.service.sample(rng);
        for (int j = 1; j < b; ++j) {
          const double s = m.service.sample(rng);
          rep = tq.mode == TupleMode::First ? std::min(rep, s) : std::max(rep, s);
        }
      }
      dmin = std::min(dmin, rep - g[i]);
    }
    return std::max(0.0, dmin);
  };

  struct Nothing {};
  parallel_chunked<Nothing>(
      n, 4096,
      [&](std::size_t b, std::size_t e) {
        for (std::size_t r = b; r < e; ++r) {
          Stream rng(seed, r);
          out.values[r] = sample_one(rng);
        }
        return Nothing{};
      },
      Nothing{}, [](Nothing acc, Nothing) { return acc; });
  return out;
}

// Empirical tail on the grid plus its DKW uniform half-width.
inline SimEstimate estimate_tail(const std::vector<double>& samples,
                                 const std::vector<double>& grid, double delta,
                                 std::uint64_t seed = 0) {
  SimEstimate est;
  est.grid = grid;
  est.values = empirical_tail(samples, grid);
  est.n = samples.size();
  est.delta = delta;
  est.epsilon = dkw_epsilon(samples.size(), delta);
  est.seed = seed;
  return est;
}

// CSV dump, one row per customer.
inline void write_trajectory_csv(const TrajectoryLog& log, std::ostream& os) {
  os << "batch_index,arrival_time,customer_index,service_time,departure_time\n";
  for (std::size_t n = 0; n < log.batches(); ++n)
    for (std::size_t j = 0; j < log.service[n].size(); ++j)
      os << (n + 1) << ',' << log.arrival[n] << ',' << (j + 1) << ','
         << log.service[n][j] << ',' << log.departure(n, j) << '\n';
}

}  // namespace overlapq
