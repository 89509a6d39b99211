#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "overlapq/dist.hpp"
#include "overlapq/query.hpp"

namespace overlapq {

using Json = nlohmann::json;

namespace detail {

inline const Json& require_key(const Json& j, const std::string& path, const char* key) {
  if (!j.is_object()) throw std::invalid_argument(path + ": must be an object");
  const auto it = j.find(key);
  if (it == j.end()) throw std::invalid_argument(path + "." + key + ": missing");
  return *it;
}

inline double require_number(const Json& j, const std::string& path, const char* key) {
  const Json& v = require_key(j, path, key);
  if (!v.is_number()) throw std::invalid_argument(path + "." + key + ": must be a number");
  return v.get<double>();
}

inline int require_int(const Json& j, const std::string& path, const char* key) {
  const Json& v = require_key(j, path, key);
  if (!v.is_number_integer())
    throw std::invalid_argument(path + "." + key + ": must be an integer");
  return v.get<int>();
}

inline std::string require_string(const Json& j, const std::string& path, const char* key) {
  const Json& v = require_key(j, path, key);
  if (!v.is_string()) throw std::invalid_argument(path + "." + key + ": must be a string");
  return v.get<std::string>();
}

inline std::vector<double> require_number_array(const Json& j, const std::string& path,
                                                const char* key) {
  const Json& v = require_key(j, path, key);
  if (!v.is_array()) throw std::invalid_argument(path + "." + key + ": must be an array");
  std::vector<double> out;
  for (const auto& x : v) {
    if (!x.is_number())
      throw std::invalid_argument(path + "." + key + ": entries must be numbers");
    out.push_back(x.get<double>());
  }
  return out;
}

}  // namespace detail

inline ContinuousDist parse_continuous(const Json& j, const std::string& path) {
  const std::string family = detail::require_string(j, path, "family");
  if (family == "exponential")
    return ContinuousDist::exponential(detail::require_number(j, path, "rate"));
  if (family == "erlang")
    return ContinuousDist::erlang(detail::require_int(j, path, "shape"),
                                  detail::require_number(j, path, "rate"));
  if (family == "deterministic")
    return ContinuousDist::deterministic(detail::require_number(j, path, "value"));
  if (family == "uniform")
    return ContinuousDist::uniform(detail::require_number(j, path, "lo"),
                                   detail::require_number(j, path, "hi"));
  if (family == "lognormal")
    return ContinuousDist::lognormal(detail::require_number(j, path, "log-mean"),
                                     detail::require_number(j, path, "log-sd"));
  if (family == "hyperexponential")
    return ContinuousDist::hyperexponential(
        detail::require_number_array(j, path, "weights"),
        detail::require_number_array(j, path, "rates"));
  throw std::invalid_argument(path + ".family: unknown family '" + family + "'");
}

inline BatchDist parse_batch(const Json& j, const std::string& path) {
  const std::string family = detail::require_string(j, path, "family");
  if (family == "deterministic") return BatchDist::fixed(detail::require_int(j, path, "b"));
  if (family == "explicit-pmf")
    return BatchDist::explicit_pmf(detail::require_number_array(j, path, "pmf"));
  if (family == "geometric")
    return BatchDist::geometric(detail::require_number(j, path, "success-prob"));
  if (family == "zero-truncated-poisson")
    return BatchDist::zero_truncated_poisson(detail::require_number(j, path, "mean"));
  throw std::invalid_argument(path + ".family: unknown family '" + family + "'");
}

inline QueueModel parse_model(const Json& j) {
  if (!j.is_object()) throw std::invalid_argument("model: must be an object");
  return QueueModel{parse_continuous(detail::require_key(j, "model", "arrival"), "model.arrival"),
                    parse_batch(detail::require_key(j, "model", "batch"), "model.batch"),
                    parse_continuous(detail::require_key(j, "model", "service"), "model.service")};
}

inline OverlapQuery parse_query(const Json& j) {
  const std::string type = detail::require_string(j, "query", "type");
  if (type == "pair_individual") {
    PairIndividualQuery q;
    q.lag = detail::require_int(j, "query", "lag");
    if (const auto it = j.find("same_customer"); it != j.end()) {
      if (!it->is_boolean())
        throw std::invalid_argument("query.same_customer: must be a boolean");
      q.same_customer = it->get<bool>();
    }
    q.validate();
    return q;
  }
  if (type == "pair_batch") {
    PairBatchQuery q;
    const std::string mode = detail::require_string(j, "query", "mode");
    if (mode == "first")
      q.mode = BatchMode::First;
    else if (mode == "last")
      q.mode = BatchMode::Last;
    else
      throw std::invalid_argument("query.mode: must be 'first' or 'last'");
    q.lag = detail::require_int(j, "query", "lag");
    q.validate();
    return q;
  }
  if (type == "tuple") {
    TupleQuery q;
    const Json& idx = detail::require_key(j, "query", "indices");
    if (!idx.is_array()) throw std::invalid_argument("query.indices: must be an array");
    for (const auto& x : idx) {
      if (!x.is_number_integer())
        throw std::invalid_argument("query.indices: entries must be integers");
      q.indices.push_back(x.get<int>());
    }
    if (const auto it = j.find("mode"); it != j.end()) {
      const std::string mode = it->is_string() ? it->get<std::string>() : std::string();
      if (mode == "individual")
        q.mode = TupleMode::Individual;
      else if (mode == "first")
        q.mode = TupleMode::First;
      else if (mode == "last")
        q.mode = TupleMode::Last;
      else
        throw std::invalid_argument(
            "query.mode: must be 'individual', 'first' or 'last'");
    }
    if (const auto it = j.find("batch_semantics"); it != j.end()) {
      const std::string s = it->is_string() ? it->get<std::string>() : std::string();
      if (s == "independent")
        q.semantics = BatchSemantics::Independent;
      else if (s == "shared")
        q.semantics = BatchSemantics::Shared;
      else
        throw std::invalid_argument(
            "query.batch_semantics: must be 'independent' or 'shared'");
    }
    q.validate();
    return q;
  }
  throw std::invalid_argument("query.type: unknown type '" + type + "'");
}

inline Json to_json(const ContinuousDist& d) {
  Json j;
  j["family"] = d.family_name();
  struct V {
    Json& j;
    void operator()(const Exponential& e) const { j["rate"] = e.rate; }
    void operator()(const Erlang& e) const {
      j["shape"] = e.shape;
      j["rate"] = e.rate;
    }
    void operator()(const Deterministic& x) const { j["value"] = x.value; }
    void operator()(const Uniform& u) const {
      j["lo"] = u.lo;
      j["hi"] = u.hi;
    }
    void operator()(const LogNormal& l) const {
      j["log-mean"] = l.log_mean;
      j["log-sd"] = l.log_sd;
    }
    void operator()(const HyperExponential& h) const {
      j["weights"] = h.weights;
      j["rates"] = h.rates;
    }
  };
  std::visit(V{j}, d.family());
  return j;
}

inline Json to_json(const BatchDist& b) {
  Json j;
  j["family"] = b.family_name();
  struct V {
    Json& j;
    void operator()(const BatchDist::Fixed& f) const { j["b"] = f.b; }
    void operator()(const BatchDist::ExplicitPmf& e) const { j["pmf"] = e.pmf; }
    void operator()(const BatchDist::Geometric& g) const {
      j["success-prob"] = g.success_prob;
    }
    void operator()(const BatchDist::ZeroTruncatedPoisson& z) const { j["mean"] = z.mean; }
  };
  std::visit(V{j}, b.family());
  if (b.truncation_bound() > 0.0) j["truncation-bound"] = b.truncation_bound();
  return j;
}

inline Json to_json(const QueueModel& m) {
  Json j;
  j["arrival"] = to_json(m.interarrival);
  j["batch"] = to_json(m.batch);
  j["service"] = to_json(m.service);
  return j;
}

inline Json to_json(const OverlapQuery& q) {
  Json j;
  if (const auto* p = std::get_if<PairIndividualQuery>(&q)) {
    j["type"] = "pair_individual";
    j["lag"] = p->lag;
    j["same_customer"] = p->same_customer;
  } else if (const auto* p = std::get_if<PairBatchQuery>(&q)) {
    j["type"] = "pair_batch";
    j["mode"] = to_string(p->mode);
    j["lag"] = p->lag;
  } else {
    const auto& t = std::get<TupleQuery>(q);
    j["type"] = "tuple";
    j["indices"] = t.indices;
    j["mode"] = to_string(t.mode);
    j["batch_semantics"] = to_string(t.semantics);
  }
  return j;
}

}  // namespace overlapq
