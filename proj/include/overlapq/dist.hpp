#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "overlapq/quadrature.hpp"
#include "overlapq/rng.hpp"

namespace overlapq {

// Residual probability mass allowed past the truncation point of an
// infinite batch support; the support is never renormalized.
inline constexpr double kBatchTailMass = 1e-12;

struct Exponential {
  double rate;
};
struct Erlang {
  int shape;
  double rate;
};
struct Deterministic {
  double value;
};
struct Uniform {
  double lo;
  double hi;
};
struct LogNormal {
  double log_mean;
  double log_sd;
};
struct HyperExponential {
  std::vector<double> weights;
  std::vector<double> rates;
};

namespace detail {

// cdf of the integer-shape gamma: 1 - e^{-rx} sum_{i<shape} (rx)^i / i!.
// Falls back to log-space terms once e^{-rx} underflows.
inline double erlang_cdf(int shape, double rate, double x) {
  if (x <= 0.0) return 0.0;
  const double rx = rate * x;
  if (rx < 705.0) {
    double term = std::exp(-rx);
    double acc = term;
    for (int i = 1; i < shape; ++i) {
      term *= rx / i;
      acc += term;
    }
    return std::max(0.0, 1.0 - acc);
  }
  const double lrx = std::log(rx);
  double acc = 0.0;
  for (int i = 0; i < shape; ++i) acc += std::exp(-rx + i * lrx - std::lgamma(i + 1.0));
  return std::max(0.0, 1.0 - acc);
}

}  // namespace detail

// A nonnegative continuous service or inter-arrival law. Values are immutable
// after construction, so concurrent reads are safe.
class ContinuousDist {
 public:
  using Family =
      std::variant<Exponential, Erlang, Deterministic, Uniform, LogNormal, HyperExponential>;

  explicit ContinuousDist(Family family) : family_(std::move(family)) { validate(); }

  // Unit-rate placeholder so aggregates holding a model stay default-constructible.
  ContinuousDist() : ContinuousDist(Exponential{1.0}) {}

  static ContinuousDist exponential(double rate) { return ContinuousDist(Exponential{rate}); }
  static ContinuousDist erlang(int shape, double rate) {
    return ContinuousDist(Erlang{shape, rate});
  }
  static ContinuousDist deterministic(double value) {
    return ContinuousDist(Deterministic{value});
  }
  static ContinuousDist uniform(double lo, double hi) { return ContinuousDist(Uniform{lo, hi}); }
  static ContinuousDist lognormal(double log_mean, double log_sd) {
    return ContinuousDist(LogNormal{log_mean, log_sd});
  }
  static ContinuousDist hyperexponential(std::vector<double> weights, std::vector<double> rates) {
    return ContinuousDist(HyperExponential{std::move(weights), std::move(rates)});
  }

  const Family& family() const { return family_; }

  const char* family_name() const {
    struct V {
      const char* operator()(const Exponential&) const { return "exponential"; }
      const char* operator()(const Erlang&) const { return "erlang"; }
      const char* operator()(const Deterministic&) const { return "deterministic"; }
      const char* operator()(const Uniform&) const { return "uniform"; }
      const char* operator()(const LogNormal&) const { return "lognormal"; }
      const char* operator()(const HyperExponential&) const { return "hyperexponential"; }
    };
    return std::visit(V{}, family_);
  }

  double cdf(double x) const {
    if (x < 0.0) return 0.0;
    struct V {
      double x;
      double operator()(const Exponential& e) const { return -std::expm1(-e.rate * x); }
      double operator()(const Erlang& e) const { return detail::erlang_cdf(e.shape, e.rate, x); }
      double operator()(const Deterministic& d) const { return x >= d.value ? 1.0 : 0.0; }
      double operator()(const Uniform& u) const {
        if (x <= u.lo) return 0.0;
        if (x >= u.hi) return 1.0;
        return (x - u.lo) / (u.hi - u.lo);
      }
      double operator()(const LogNormal& l) const {
        if (x <= 0.0) return 0.0;
        const double z = (std::log(x) - l.log_mean) / l.log_sd;
        return 0.5 * std::erfc(-z / std::sqrt(2.0));
      }
      double operator()(const HyperExponential& h) const {
        double acc = 0.0;
        for (std::size_t i = 0; i < h.rates.size(); ++i)
          acc += h.weights[i] * -std::expm1(-h.rates[i] * x);
        return acc;
      }
    };
    return std::visit(V{x}, family_);
  }

  double tail(double x) const { return 1.0 - cdf(x); }

  // Density where it exists. At a jump of a piecewise density (the uniform
  // endpoints) the value is the midpoint of the one-sided limits, which keeps
  // the trapezoid rule second order on grids aligned with the jump.
  double density(double x) const {
    struct V {
      double x;
      double operator()(const Exponential& e) const {
        return x < 0.0 ? 0.0 : e.rate * std::exp(-e.rate * x);
      }
      double operator()(const Erlang& e) const {
        if (x < 0.0) return 0.0;
        if (x == 0.0) return e.shape == 1 ? e.rate : 0.0;
        return std::exp(e.shape * std::log(e.rate) + (e.shape - 1) * std::log(x) -
                        e.rate * x - std::lgamma(e.shape));
      }
      double operator()(const Deterministic&) const {
        throw std::domain_error("density: deterministic distribution is atomic");
      }
      double operator()(const Uniform& u) const {
        const double h = 1.0 / (u.hi - u.lo);
        const double eps = 1e-9 * std::max(1.0, u.hi);
        if (std::abs(x - u.lo) <= eps || std::abs(x - u.hi) <= eps) return 0.5 * h;
        return (x > u.lo && x < u.hi) ? h : 0.0;
      }
      double operator()(const LogNormal& l) const {
        if (x <= 0.0) return 0.0;
        const double z = (std::log(x) - l.log_mean) / l.log_sd;
        return std::exp(-0.5 * z * z) / (x * l.log_sd * std::sqrt(2.0 * 3.14159265358979323846));
      }
      double operator()(const HyperExponential& h) const {
        if (x < 0.0) return 0.0;
        double acc = 0.0;
        for (std::size_t i = 0; i < h.rates.size(); ++i)
          acc += h.weights[i] * h.rates[i] * std::exp(-h.rates[i] * x);
        return acc;
      }
    };
    return std::visit(V{x}, family_);
  }

  // E[e^{-sX}] for s >= 0. Closed forms for exponential, erlang and
  // deterministic; adaptive quadrature over the truncated support otherwise.
  double laplace(double s, const Quadrature& q = {}) const {
    if (s < 0.0) throw std::domain_error("laplace: s must be >= 0");
    if (s == 0.0) return 1.0;
    if (const auto* e = std::get_if<Exponential>(&family_)) return e->rate / (e->rate + s);
    if (const auto* e = std::get_if<Erlang>(&family_))
      return std::pow(e->rate / (e->rate + s), e->shape);
    if (const auto* d = std::get_if<Deterministic>(&family_)) return std::exp(-s * d->value);
    const double hi = quantile(q.truncation_quantile);
    const auto integrand = [&](double x) { return std::exp(-s * x) * density(x); };
    return integrate_adaptive(integrand, 0.0, hi, q, density_jumps()).value;
  }

  // True iff the Laplace transform above is evaluated in closed form.
  bool laplace_closed_form() const {
    return std::holds_alternative<Exponential>(family_) ||
           std::holds_alternative<Erlang>(family_) ||
           std::holds_alternative<Deterministic>(family_);
  }

  // Smallest x with cdf(x) >= p; bisection when there is no closed inverse.
  double quantile(double p) const {
    if (!(p >= 0.0 && p < 1.0)) throw std::domain_error("quantile: p must be in [0,1)");
    if (const auto* e = std::get_if<Exponential>(&family_)) return -std::log1p(-p) / e->rate;
    if (const auto* d = std::get_if<Deterministic>(&family_)) return d->value;
    if (const auto* u = std::get_if<Uniform>(&family_)) return u->lo + p * (u->hi - u->lo);
    double hi = 1.0;
    while (cdf(hi) < p) {
      hi *= 2.0;
      if (hi > 1e300) return hi;
    }
    double lo = 0.0;
    for (int i = 0; i < 200 && (hi - lo) > 1e-14 * std::max(1.0, hi); ++i) {
      const double mid = 0.5 * (lo + hi);
      (cdf(mid) >= p ? hi : lo) = mid;
    }
    return hi;
  }

  // C(x) = integral of cdf over [0, x]. Second differences of C give
  // mass-exact node values for gridded densities (hat-function projection).
  double integrated_cdf(double x) const {
    if (x <= 0.0) return 0.0;
    struct V {
      double x;
      double operator()(const Exponential& e) const {
        return x - (-std::expm1(-e.rate * x)) / e.rate;
      }
      double operator()(const Erlang& e) const {
        // x F_s(x) - (s/r) F_{s+1}(x), both cdfs of integer-shape gammas
        return x * detail::erlang_cdf(e.shape, e.rate, x) -
               (e.shape / e.rate) * detail::erlang_cdf(e.shape + 1, e.rate, x);
      }
      double operator()(const Deterministic& d) const { return std::max(0.0, x - d.value); }
      double operator()(const Uniform& u) const {
        if (x <= u.lo) return 0.0;
        if (x >= u.hi) return (x - u.hi) + 0.5 * (u.hi - u.lo);
        return (x - u.lo) * (x - u.lo) / (2.0 * (u.hi - u.lo));
      }
      double operator()(const LogNormal& l) const {
        const double z = (std::log(x) - l.log_mean) / l.log_sd;
        const auto phi = [](double v) { return 0.5 * std::erfc(-v / std::sqrt(2.0)); };
        return x * phi(z) -
               std::exp(l.log_mean + 0.5 * l.log_sd * l.log_sd) * phi(z - l.log_sd);
      }
      double operator()(const HyperExponential& h) const {
        double acc = x;
        for (std::size_t i = 0; i < h.rates.size(); ++i)
          acc -= (h.weights[i] / h.rates[i]) * -std::expm1(-h.rates[i] * x);
        return acc;
      }
    };
    return std::visit(V{x}, family_);
  }

  double mean() const {
    struct V {
      double operator()(const Exponential& e) const { return 1.0 / e.rate; }
      double operator()(const Erlang& e) const { return e.shape / e.rate; }
      double operator()(const Deterministic& d) const { return d.value; }
      double operator()(const Uniform& u) const { return 0.5 * (u.lo + u.hi); }
      double operator()(const LogNormal& l) const {
        return std::exp(l.log_mean + 0.5 * l.log_sd * l.log_sd);
      }
      double operator()(const HyperExponential& h) const {
        double acc = 0.0;
        for (std::size_t i = 0; i < h.rates.size(); ++i) acc += h.weights[i] / h.rates[i];
        return acc;
      }
    };
    return std::visit(V{}, family_);
  }

  double sample(Stream& rng) const {
    struct V {
      Stream& rng;
      double operator()(const Exponential& e) const {
        return -std::log1p(-rng.next_double()) / e.rate;
      }
      double operator()(const Erlang& e) const {
        double acc = 0.0;
        for (int i = 0; i < e.shape; ++i) acc += -std::log1p(-rng.next_double());
        return acc / e.rate;
      }
      double operator()(const Deterministic& d) const { return d.value; }
      double operator()(const Uniform& u) const {
        return u.lo + rng.next_double() * (u.hi - u.lo);
      }
      double operator()(const LogNormal& l) const {
        return std::exp(l.log_mean + l.log_sd * rng.next_normal());
      }
      double operator()(const HyperExponential& h) const {
        const double u = rng.next_double();
        double acc = 0.0;
        std::size_t pick = h.rates.size() - 1;
        for (std::size_t i = 0; i < h.rates.size(); ++i) {
          acc += h.weights[i];
          if (u < acc) {
            pick = i;
            break;
          }
        }
        return -std::log1p(-rng.next_double()) / h.rates[pick];
      }
    };
    return std::visit(V{rng}, family_);
  }

  bool is_atom() const { return std::holds_alternative<Deterministic>(family_); }
  double atom_value() const { return std::get<Deterministic>(family_).value; }

  // Discontinuity points of the density, used as quadrature breakpoints and
  // grid anchors.
  std::vector<double> density_jumps() const {
    if (const auto* u = std::get_if<Uniform>(&family_)) return {u->lo, u->hi};
    if (const auto* d = std::get_if<Deterministic>(&family_)) return {d->value};
    return {};
  }

 private:
  void validate() const {
    struct V {
      void operator()(const Exponential& e) const {
        if (!(e.rate > 0.0)) throw std::invalid_argument("exponential.rate: must be > 0");
      }
      void operator()(const Erlang& e) const {
        if (e.shape < 1) throw std::invalid_argument("erlang.shape: must be >= 1");
        if (!(e.rate > 0.0)) throw std::invalid_argument("erlang.rate: must be > 0");
      }
      void operator()(const Deterministic& d) const {
        if (!(d.value >= 0.0)) throw std::invalid_argument("deterministic.value: must be >= 0");
      }
      void operator()(const Uniform& u) const {
        if (!(u.lo >= 0.0)) throw std::invalid_argument("uniform.lo: must be >= 0");
        if (!(u.lo < u.hi)) throw std::invalid_argument("uniform.hi: must be > lo");
      }
      void operator()(const LogNormal& l) const {
        if (!(l.log_sd > 0.0)) throw std::invalid_argument("lognormal.log-sd: must be > 0");
        if (!std::isfinite(l.log_mean))
          throw std::invalid_argument("lognormal.log-mean: must be finite");
      }
      void operator()(const HyperExponential& h) const {
        if (h.weights.empty()) throw std::invalid_argument("hyperexponential.weights: empty");
        if (h.weights.size() != h.rates.size())
          throw std::invalid_argument("hyperexponential.rates: size mismatch with weights");
        double sum = 0.0;
        for (double w : h.weights) {
          if (!(w > 0.0)) throw std::invalid_argument("hyperexponential.weights: must be > 0");
          sum += w;
        }
        if (std::abs(sum - 1.0) > 1e-12)
          throw std::invalid_argument("hyperexponential.weights: must sum to 1");
        for (double r : h.rates)
          if (!(r > 0.0)) throw std::invalid_argument("hyperexponential.rates: must be > 0");
      }
    };
    std::visit(V{}, family_);
  }

  Family family_;
};

// Batch-size law on {1, 2, ...}. Construction materializes the (possibly
// truncated) support weights p_1..p_M; infinite supports are cut at the
// smallest M with residual mass < kBatchTailMass and never renormalized.
class BatchDist {
 public:
  struct Fixed {
    int b;
  };
  struct ExplicitPmf {
    std::vector<double> pmf;  // p_1..p_m
  };
  struct Geometric {
    double success_prob;
  };
  struct ZeroTruncatedPoisson {
    double mean;  // mean of the untruncated Poisson
  };
  using Family = std::variant<Fixed, ExplicitPmf, Geometric, ZeroTruncatedPoisson>;

  explicit BatchDist(Family family) : family_(std::move(family)) { materialize(); }

  // Unit-batch placeholder so aggregates holding a model stay default-constructible.
  BatchDist() : BatchDist(Fixed{1}) {}

  static BatchDist fixed(int b) { return BatchDist(Fixed{b}); }
  static BatchDist explicit_pmf(std::vector<double> pmf) {
    return BatchDist(ExplicitPmf{std::move(pmf)});
  }
  static BatchDist geometric(double success_prob) { return BatchDist(Geometric{success_prob}); }
  static BatchDist zero_truncated_poisson(double mean) {
    return BatchDist(ZeroTruncatedPoisson{mean});
  }

  const Family& family() const { return family_; }

  const char* family_name() const {
    struct V {
      const char* operator()(const Fixed&) const { return "deterministic"; }
      const char* operator()(const ExplicitPmf&) const { return "explicit-pmf"; }
      const char* operator()(const Geometric&) const { return "geometric"; }
      const char* operator()(const ZeroTruncatedPoisson&) const {
        return "zero-truncated-poisson";
      }
    };
    return std::visit(V{}, family_);
  }

  // p_j for j >= 1; zero outside the (truncated) support.
  double pmf(int j) const {
    if (j < 1 || j > max_support()) return 0.0;
    return weights_[static_cast<std::size_t>(j - 1)];
  }

  // E[z^B] on [0,1]; truncation error is below kBatchTailMass.
  double pgf(double z) const {
    if (!(z >= 0.0 && z <= 1.0)) throw std::domain_error("pgf: z must be in [0,1]");
    double acc = 0.0;
    double zpow = 1.0;
    for (double w : weights_) {
      zpow *= z;
      acc += w * zpow;
    }
    return acc;
  }

  // E[f(B)] over the truncated support.
  template <typename F>
  double expect(F&& f) const {
    double acc = 0.0;
    for (int j = 1; j <= max_support(); ++j)
      acc += weights_[static_cast<std::size_t>(j - 1)] * f(j);
    return acc;
  }

  int sample(Stream& rng) const {
    const double u = rng.next_double();
    double acc = 0.0;
    for (int j = 1; j <= max_support(); ++j) {
      acc += weights_[static_cast<std::size_t>(j - 1)];
      if (u < acc) return j;
    }
    return max_support();
  }

  int max_support() const { return static_cast<int>(weights_.size()); }
  const std::vector<double>& support_weights() const { return weights_; }
  double truncation_bound() const { return truncation_bound_; }
  bool degenerate() const {
    return std::count_if(weights_.begin(), weights_.end(),
                         [](double w) { return w > 0.0; }) == 1;
  }
  double mean() const {
    double acc = 0.0;
    for (int j = 1; j <= max_support(); ++j) acc += j * weights_[static_cast<std::size_t>(j - 1)];
    return acc;
  }

 private:
  void materialize() {
    struct V {
      std::vector<double>& w;
      double& bound;
      void operator()(const Fixed& f) const {
        if (f.b < 1) throw std::invalid_argument("batch.b: must be >= 1");
        w.assign(static_cast<std::size_t>(f.b), 0.0);
        w.back() = 1.0;
      }
      void operator()(const ExplicitPmf& e) const {
        if (e.pmf.empty()) throw std::invalid_argument("batch.pmf: empty");
        double sum = 0.0;
        for (double p : e.pmf) {
          if (!(p >= 0.0)) throw std::invalid_argument("batch.pmf: entries must be >= 0");
          sum += p;
        }
        if (std::abs(sum - 1.0) > 1e-12)
          throw std::invalid_argument("batch.pmf: must sum to 1");
        w = e.pmf;
      }
      void operator()(const Geometric& g) const {
        if (!(g.success_prob > 0.0 && g.success_prob <= 1.0))
          throw std::invalid_argument("batch.success-prob: must be in (0,1]");
        const double p = g.success_prob;
        if (p == 1.0) {
          w = {1.0};
          return;
        }
        // residual mass past M is (1-p)^M
        const int m =
            static_cast<int>(std::ceil(std::log(kBatchTailMass) / std::log1p(-p)));
        w.resize(static_cast<std::size_t>(std::max(m, 1)));
        double term = p;
        for (auto& wj : w) {
          wj = term;
          term *= 1.0 - p;
        }
        bound = std::pow(1.0 - p, static_cast<double>(w.size()));
      }
      void operator()(const ZeroTruncatedPoisson& z) const {
        if (!(z.mean > 0.0)) throw std::invalid_argument("batch.mean: must be > 0");
        const double denom = -std::expm1(-z.mean);
        double term = z.mean * std::exp(-z.mean) / denom;  // p_1
        double residual = 1.0 - term;
        w.push_back(term);
        int j = 1;
        while (residual > kBatchTailMass && j < 100000) {
          ++j;
          term *= z.mean / j;
          w.push_back(term);
          residual -= term;
        }
        bound = std::max(residual, 0.0);
      }
    };
    std::visit(V{weights_, truncation_bound_}, family_);
  }

  Family family_;
  std::vector<double> weights_;
  double truncation_bound_ = 0.0;
};

// The queue model: renewal batch arrivals, i.i.d. service, infinite servers.
struct QueueModel {
  ContinuousDist interarrival;
  BatchDist batch;
  ContinuousDist service;
};

}  // namespace overlapq
