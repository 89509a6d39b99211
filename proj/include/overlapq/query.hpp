#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace overlapq {

enum class BatchMode { First, Last };
enum class TupleMode { Individual, First, Last };
enum class BatchSemantics { Independent, Shared };

inline const char* to_string(BatchMode m) { return m == BatchMode::First ? "first" : "last"; }
inline const char* to_string(TupleMode m) {
  switch (m) {
    case TupleMode::Individual: return "individual";
    case TupleMode::First: return "first";
    default: return "last";
  }
}
inline const char* to_string(BatchSemantics s) {
  return s == BatchSemantics::Independent ? "independent" : "shared";
}

// Overlap of customer j in batch n with customer l in batch n+k. For k = 0
// the only distinction that matters is whether j = l.
struct PairIndividualQuery {
  int lag = 0;
  bool same_customer = false;

  void validate() const {
    if (lag < 0) throw std::invalid_argument("query.lag: must be >= 0");
    if (same_customer && lag != 0)
      throw std::invalid_argument("query.same_customer: only valid with lag 0");
  }
};

// Overlap of batches n and n+k where each batch is represented by its first
// (min departure) or last (max departure) customer to leave.
struct PairBatchQuery {
  BatchMode mode = BatchMode::Last;
  int lag = 1;

  void validate() const {
    if (lag < 1) throw std::domain_error("batch-pair lag must be >= 1");
  }
};

// Joint overlap of batches n_1 < ... < n_m. Batch sizes of distinct batches
// are independent draws; shared semantics reuses one size across all batches
// for comparison against the single-size closed forms.
struct TupleQuery {
  std::vector<int> indices;
  TupleMode mode = TupleMode::Individual;
  BatchSemantics semantics = BatchSemantics::Independent;

  void validate() const {
    if (indices.size() < 2)
      throw std::domain_error("query.indices: need at least two batch indices");
    for (std::size_t i = 0; i < indices.size(); ++i) {
      if (indices[i] < 1)
        throw std::invalid_argument("query.indices: batch indices start at 1");
      if (i > 0 && indices[i] <= indices[i - 1])
        throw std::invalid_argument("query.indices: must be strictly increasing");
    }
  }

  // Consecutive index differences d_l = n_{l+1} - n_l.
  std::vector<int> gaps() const {
    std::vector<int> d;
    d.reserve(indices.size() - 1);
    for (std::size_t i = 0; i + 1 < indices.size(); ++i)
      d.push_back(indices[i + 1] - indices[i]);
    return d;
  }
};

using OverlapQuery = std::variant<PairIndividualQuery, PairBatchQuery, TupleQuery>;

inline void validate(const OverlapQuery& q) {
  std::visit([](const auto& v) { v.validate(); }, q);
}

}  // namespace overlapq
