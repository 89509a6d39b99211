#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "overlapq/dist.hpp"
#include "overlapq/query.hpp"

namespace overlapq {

enum class Method { ClosedForm, Quadrature, GapMonteCarlo };

inline const char* method_name(Method m) {
  switch (m) {
    case Method::ClosedForm: return "closed-form";
    case Method::Quadrature: return "quadrature";
    default: return "gap-monte-carlo";
  }
}

// A tail curve P(O > t) on a grid, with enough metadata to reproduce it.
struct TailCurve {
  std::vector<double> grid;
  std::vector<double> values;
  Method method = Method::ClosedForm;

  QueueModel model;
  OverlapQuery query;

  // Error metadata: tolerance for deterministic methods, per-point standard
  // errors for gap Monte Carlo.
  double tolerance = 0.0;
  std::vector<double> stderrs;
  std::size_t mc_samples = 0;
  std::uint64_t seed = 0;

  // stderr for deterministic methods reads as the stated tolerance.
  double point_error(std::size_t i) const {
    return method == Method::GapMonteCarlo ? stderrs[i] : tolerance;
  }
};

// Empirical tail from simulation with its DKW uniform band.
struct SimEstimate {
  std::vector<double> grid;
  std::vector<double> values;
  std::size_t n = 0;
  double delta = 0.0;
  double epsilon = 0.0;
  std::uint64_t seed = 0;
};

}  // namespace overlapq
