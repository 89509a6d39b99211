#include <chrono>
#include <cstdint>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "overlapq/overlapq.hpp"

namespace {

using overlapq::Json;

// Decorrelates the analytic gap-MC stream from the simulation stream when
// both derive from the one user-facing seed.
constexpr std::uint64_t kAnalyticSeedSalt = 0x9e3779b97f4a7c15ULL;

struct Config {
  std::string model_path;
  std::string query_path;
  std::string method = "auto";
  double t_max = -1.0;
  std::size_t steps = 101;
  std::size_t samples = 1000000;
  std::uint64_t seed = 0;
  double delta = 0.01;
  std::string format = "csv";
  std::string out;
  bool no_timestamp = false;
  std::string lags;
};

std::string iso_now() {
  const std::time_t t =
      std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

overlapq::MethodChoice parse_method(const std::string& s) {
  if (s == "auto") return overlapq::MethodChoice::Auto;
  if (s == "closed") return overlapq::MethodChoice::Closed;
  if (s == "quadrature") return overlapq::MethodChoice::Quadrature;
  if (s == "mc") return overlapq::MethodChoice::Mc;
  throw std::invalid_argument("method: unknown method '" + s + "'");
}

Json load_json(const std::string& path, const char* what) {
  if (path.empty())
    throw std::invalid_argument(std::string(what) + ": missing file path");
  std::ifstream in(path);
  if (!in)
    throw std::invalid_argument(std::string(what) + ": cannot open '" + path + "'");
  return Json::parse(in);
}

void check_config(const Config& cfg, bool t_max_given) {
  if (cfg.steps < 2) throw std::invalid_argument("steps: must be >= 2");
  if (cfg.samples < 1) throw std::invalid_argument("samples: must be >= 1");
  if (!(cfg.delta > 0.0 && cfg.delta < 1.0))
    throw std::invalid_argument("delta: must be in (0,1)");
  if (t_max_given && !(cfg.t_max > 0.0))
    throw std::invalid_argument("t-max: must be > 0");
}

std::vector<double> make_grid(const overlapq::QueueModel& m, const overlapq::OverlapQuery& q,
                              const Config& cfg) {
  if (cfg.t_max > 0.0) {
    std::vector<double> grid;
    grid.reserve(cfg.steps);
    for (std::size_t i = 0; i < cfg.steps; ++i)
      grid.push_back(cfg.t_max * static_cast<double>(i) /
                     static_cast<double>(cfg.steps - 1));
    return grid;
  }
  return overlapq::default_grid(m, q, cfg.steps);
}

Json resolved_config(const char* command, const Config& cfg, const Json& model_j,
                     const Json* query_j, double t_max_actual) {
  Json j;
  j["command"] = command;
  j["model"] = model_j;
  if (query_j) j["query"] = *query_j;
  j["method"] = cfg.method;
  j["steps"] = cfg.steps;
  if (t_max_actual >= 0.0) j["t_max"] = t_max_actual;
  j["samples"] = cfg.samples;
  j["seed"] = cfg.seed;
  j["delta"] = cfg.delta;
  j["format"] = cfg.format;
  if (!cfg.no_timestamp) j["timestamp"] = iso_now();
  return j;
}

void emit(const Config& cfg, const std::string& text) {
  if (cfg.out.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream f(cfg.out, std::ios::binary);
  if (!f) throw std::invalid_argument("out: cannot write '" + cfg.out + "'");
  f << text;
}

std::vector<double> point_errors(const overlapq::TailCurve& c) {
  std::vector<double> e;
  e.reserve(c.grid.size());
  for (std::size_t i = 0; i < c.grid.size(); ++i) e.push_back(c.point_error(i));
  return e;
}

int run_tail(const Config& cfg) {
  const auto model = overlapq::parse_model(load_json(cfg.model_path, "model"));
  const auto query = overlapq::parse_query(load_json(cfg.query_path, "query"));
  const auto grid = make_grid(model, query, cfg);

  overlapq::AnalyticOptions opt;
  opt.method = parse_method(cfg.method);
  opt.mc_samples = cfg.samples;
  opt.seed = cfg.seed;
  const auto curve = overlapq::eval_tail(model, query, grid, opt);

  const Json mj = overlapq::to_json(model);
  const Json qj = overlapq::to_json(query);
  Json config = resolved_config("tail", cfg, mj, &qj, grid.back());
  config["resolved_method"] = overlapq::method_name(curve.method);

  if (cfg.format == "csv") {
    std::string s = "# config: " + config.dump() + "\n";
    s += "t,tail,method,stderr_or_tol\n";
    for (std::size_t i = 0; i < grid.size(); ++i)
      s += fmt(curve.grid[i]) + "," + fmt(curve.values[i]) + "," +
           overlapq::method_name(curve.method) + "," + fmt(curve.point_error(i)) + "\n";
    emit(cfg, s);
  } else {
    Json out;
    out["config"] = config;
    Json c;
    c["t"] = curve.grid;
    c["tail"] = curve.values;
    c["method"] = overlapq::method_name(curve.method);
    c["stderr_or_tol"] = point_errors(curve);
    out["curve"] = c;
    emit(cfg, out.dump(2) + "\n");
  }
  return 0;
}

int run_validate(const Config& cfg) {
  const auto model = overlapq::parse_model(load_json(cfg.model_path, "model"));
  const auto query = overlapq::parse_query(load_json(cfg.query_path, "query"));
  const auto grid = make_grid(model, query, cfg);

  overlapq::AnalyticOptions opt;
  opt.method = parse_method(cfg.method);
  opt.mc_samples = cfg.samples;
  opt.seed = cfg.seed ^ kAnalyticSeedSalt;
  const auto curve = overlapq::eval_tail(model, query, grid, opt);

  const auto samples = overlapq::direct_sample_overlap(model, query, cfg.samples, cfg.seed);
  const auto est = overlapq::estimate_tail(samples.values, grid, cfg.delta, cfg.seed);
  const auto report = overlapq::compare_curves(curve, est);

  const Json mj = overlapq::to_json(model);
  const Json qj = overlapq::to_json(query);
  Json config = resolved_config("validate", cfg, mj, &qj, grid.back());
  config["resolved_method"] = report.analytic_method;

  if (cfg.format == "csv") {
    std::string s = "# config: " + config.dump() + "\n";
    s += "# verdict: " + std::string(report.verdict()) + "\n";
    s += "# max_absolute_deviation: " + fmt(report.max_absolute_deviation) + "\n";
    s += "# n: " + std::to_string(report.n) + "\n";
    s += "# delta: " + fmt(report.delta) + "\n";
    s += "# epsilon: " + fmt(report.epsilon) + "\n";
    s += "# seeds: analytic=" + std::to_string(report.analytic_seed) +
         " simulation=" + std::to_string(report.sim_seed) + "\n";
    s += "# semantics_compared: " + report.semantics_compared + "\n";
    s += "t,analytic,empirical,band,pass\n";
    for (std::size_t i = 0; i < report.grid.size(); ++i)
      s += fmt(report.grid[i]) + "," + fmt(report.analytic_values[i]) + "," +
           fmt(report.empirical_values[i]) + "," + fmt(report.band[i]) + "," +
           (report.per_point[i] ? "1" : "0") + "\n";
    emit(cfg, s);
  } else {
    Json out;
    out["config"] = config;
    out["report"] = overlapq::to_json(report);
    emit(cfg, out.dump(2) + "\n");
  }
  return report.pass ? 0 : 1;
}

int run_mean(const Config& cfg) {
  const auto model = overlapq::parse_model(load_json(cfg.model_path, "model"));
  const auto query = overlapq::parse_query(load_json(cfg.query_path, "query"));

  overlapq::AnalyticOptions opt;
  opt.method = parse_method(cfg.method);
  opt.mc_samples = cfg.samples;
  opt.seed = cfg.seed;
  const auto r = overlapq::overlap_mean(model, query, opt);

  const Json mj = overlapq::to_json(model);
  const Json qj = overlapq::to_json(query);
  Json config = resolved_config("mean", cfg, mj, &qj, -1.0);
  config["resolved_method"] = overlapq::method_name(r.method);

  if (cfg.format == "csv") {
    std::string s = "# config: " + config.dump() + "\n";
    if (r.has_closed_shared)
      s += "# closed-form-shared: " + fmt(r.closed_shared) + "\n";
    s += "mean,error,method\n";
    s += fmt(r.value) + "," + fmt(r.error) + "," + overlapq::method_name(r.method) + "\n";
    emit(cfg, s);
  } else {
    Json out;
    out["config"] = config;
    Json m;
    m["value"] = r.value;
    m["error"] = r.error;
    m["method"] = overlapq::method_name(r.method);
    if (r.has_closed_shared) m["closed_form_shared"] = r.closed_shared;
    out["mean"] = m;
    emit(cfg, out.dump(2) + "\n");
  }
  return 0;
}

std::pair<int, int> parse_lags(const std::string& s) {
  const auto pos = s.find("..");
  const auto to_int = [&](const std::string& part) {
    std::size_t idx = 0;
    int v = 0;
    try {
      v = std::stoi(part, &idx);
    } catch (const std::exception&) {
      idx = std::string::npos;
    }
    if (idx != part.size() || part.empty())
      throw std::invalid_argument("lags: expected A..B, got '" + s + "'");
    return v;
  };
  if (pos == std::string::npos) {
    const int k = to_int(s);
    return {k, k};
  }
  const int lo = to_int(s.substr(0, pos));
  const int hi = to_int(s.substr(pos + 2));
  if (lo > hi) throw std::invalid_argument("lags: range is empty");
  return {lo, hi};
}

int run_sweep(const Config& cfg) {
  const auto model = overlapq::parse_model(load_json(cfg.model_path, "model"));
  auto query = overlapq::parse_query(load_json(cfg.query_path, "query"));
  const auto [lo, hi] = parse_lags(cfg.lags);

  const auto with_lag = [&](int k) -> overlapq::OverlapQuery {
    auto q = query;
    if (auto* p = std::get_if<overlapq::PairIndividualQuery>(&q)) {
      p->lag = k;
      p->validate();
    } else if (auto* p = std::get_if<overlapq::PairBatchQuery>(&q)) {
      p->lag = k;
      p->validate();
    } else {
      throw std::invalid_argument("sweep: query must be a pair type");
    }
    return q;
  };

  const auto grid = make_grid(model, with_lag(lo), cfg);

  overlapq::AnalyticOptions opt;
  opt.method = parse_method(cfg.method);
  opt.mc_samples = cfg.samples;
  opt.seed = cfg.seed;

  std::vector<overlapq::TailCurve> curves;
  for (int k = lo; k <= hi; ++k)
    curves.push_back(overlapq::eval_tail(model, with_lag(k), grid, opt));

  const Json mj = overlapq::to_json(model);
  const Json qj = overlapq::to_json(query);
  Json config = resolved_config("sweep", cfg, mj, &qj, grid.back());
  config["lags"] = Json{{"from", lo}, {"to", hi}};
  config["resolved_method"] = overlapq::method_name(curves.front().method);

  if (cfg.format == "csv") {
    std::string s = "# config: " + config.dump() + "\n";
    s += "lag,t,tail,method,stderr_or_tol\n";
    for (std::size_t c = 0; c < curves.size(); ++c) {
      const auto& cur = curves[c];
      const int k = lo + static_cast<int>(c);
      for (std::size_t i = 0; i < grid.size(); ++i)
        s += std::to_string(k) + "," + fmt(cur.grid[i]) + "," + fmt(cur.values[i]) + "," +
             overlapq::method_name(cur.method) + "," + fmt(cur.point_error(i)) + "\n";
    }
    emit(cfg, s);
  } else {
    Json out;
    out["config"] = config;
    Json arr = Json::array();
    for (std::size_t c = 0; c < curves.size(); ++c) {
      const auto& cur = curves[c];
      Json e;
      e["lag"] = lo + static_cast<int>(c);
      e["t"] = cur.grid;
      e["tail"] = cur.values;
      e["method"] = overlapq::method_name(cur.method);
      e["stderr_or_tol"] = point_errors(cur);
      arr.push_back(std::move(e));
    }
    out["curves"] = std::move(arr);
    emit(cfg, out.dump(2) + "\n");
  }
  return 0;
}

int run_simulate(const Config& cfg) {
  const auto model = overlapq::parse_model(load_json(cfg.model_path, "model"));
  const auto log = overlapq::simulate_trajectory(model, cfg.samples, cfg.seed);

  const Json mj = overlapq::to_json(model);
  Json config = resolved_config("simulate", cfg, mj, nullptr, -1.0);

  if (cfg.format == "csv") {
    std::ostringstream os;
    os << std::setprecision(17);
    os << "# config: " << config.dump() << "\n";
    overlapq::write_trajectory_csv(log, os);
    emit(cfg, os.str());
  } else {
    Json out;
    out["config"] = config;
    Json t;
    t["arrival"] = log.arrival;
    t["service"] = log.service;
    out["trajectory"] = t;
    emit(cfg, out.dump(2) + "\n");
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Overlap-time tail distributions for batch-arrival infinite-server queues"};
  app.require_subcommand(1);

  Config cfg;
  const auto add_common = [&](CLI::App* sub, bool need_query) {
    sub->add_option("--model", cfg.model_path, "Model JSON file")->required();
    if (need_query) sub->add_option("--query", cfg.query_path, "Query JSON file")->required();
    sub->add_option("--method", cfg.method, "auto|closed|quadrature|mc")
        ->check(CLI::IsMember({"auto", "closed", "quadrature", "mc"}));
    sub->add_option("--t-max", cfg.t_max, "Grid endpoint (default: auto cutoff)");
    sub->add_option("--steps", cfg.steps, "Grid points (default 101)");
    sub->add_option("--samples", cfg.samples, "Monte-Carlo / simulation sample count");
    sub->add_option("--seed", cfg.seed, "RNG seed");
    sub->add_option("--delta", cfg.delta, "DKW confidence parameter");
    sub->add_option("--format", cfg.format, "csv|json")
        ->check(CLI::IsMember({"csv", "json"}));
    sub->add_option("--out", cfg.out, "Output file (default stdout)");
    sub->add_flag("--no-timestamp", cfg.no_timestamp, "Omit the timestamp field");
  };

  auto* tail = app.add_subcommand("tail", "Evaluate an analytic tail curve");
  add_common(tail, true);
  auto* validate = app.add_subcommand("validate", "Compare analytic curve with simulation");
  add_common(validate, true);
  auto* mean = app.add_subcommand("mean", "Mean overlap time");
  add_common(mean, true);
  auto* sweep = app.add_subcommand("sweep", "Tail curves over a lag range");
  add_common(sweep, true);
  sweep->add_option("--lags", cfg.lags, "Lag range A..B")->required();
  auto* simulate = app.add_subcommand("simulate", "Dump a simulated trajectory");
  add_common(simulate, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    check_config(cfg, app.get_subcommands().front()->count("--t-max") > 0);
    if (tail->parsed()) return run_tail(cfg);
    if (validate->parsed()) return run_validate(cfg);
    if (mean->parsed()) return run_mean(cfg);
    if (sweep->parsed()) return run_sweep(cfg);
    if (simulate->parsed()) return run_simulate(cfg);
    return 2;
  } catch (const overlapq::UnsupportedError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}
