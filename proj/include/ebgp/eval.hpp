#pragma once

// Error metrics, the repeated-run benchmark harness, and rate-slope fits.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <limits>
#include <map>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"

#include "ebgp/config.hpp"
#include "ebgp/datagen.hpp"
#include "ebgp/error.hpp"
#include "ebgp/estimators.hpp"
#include "ebgp/rng.hpp"

namespace ebgp {

// sqrt((1/n) sum (f_hat_i - f_star_i)^2)
inline double error_n(const Eigen::Ref<const Vector>& f_hat, const Eigen::Ref<const Vector>& f_star) {
  detail::require<InvalidInput>(f_hat.size() == f_star.size(), "prediction and truth differ in length");
  detail::require<InvalidInput>(f_hat.size() >= 1, "empty prediction");
  return std::sqrt((f_hat - f_star).squaredNorm() / static_cast<double>(f_hat.size()));
}

// Test-set estimate of the L2(P_X) error; same formula as error_n.
inline double error_2_empirical(const Eigen::Ref<const Vector>& f_hat, const Eigen::Ref<const Vector>& f_star) {
  return error_n(f_hat, f_star);
}

struct RateFit {
  double slope = 0.0;
  double intercept = 0.0;
  double stderr_slope = 0.0;
};

// OLS of log error on log n.
inline RateFit fit_rate_slope(const std::vector<double>& n, const std::vector<double>& err) {
  detail::require<InvalidInput>(n.size() == err.size(), "n and error lists differ in length");
  detail::require<InvalidInput>(n.size() >= 3, "rate fit needs at least 3 points");
  const auto m = static_cast<double>(n.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n.size(); ++i) {
    detail::require<InvalidInput>(n[i] > 0.0 && err[i] > 0.0 && std::isfinite(err[i]),
                                  "rate fit needs positive n and errors");
    mx += std::log(n[i]);
    my += std::log(err[i]);
  }
  mx /= m;
  my /= m;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n.size(); ++i) {
    const double dx = std::log(n[i]) - mx;
    sxx += dx * dx;
    sxy += dx * (std::log(err[i]) - my);
  }
  detail::require<InvalidInput>(sxx > 0.0, "rate fit needs at least two distinct n");
  RateFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  double ssr = 0.0;
  for (std::size_t i = 0; i < n.size(); ++i) {
    const double r = std::log(err[i]) - (f.intercept + f.slope * std::log(n[i]));
    ssr += r * r;
  }
  f.stderr_slope = std::sqrt(ssr / (m - 2.0) / sxx);
  return f;
}

// ---------------------------------------------------------------------------
// Benchmark

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct BenchmarkRow {
  std::string method;
  std::size_t n = 0;
  std::size_t repeat = 0;
  std::uint64_t seed = 0;  // method seed of the cell
  double in_sample_error = kNaN;
  double out_sample_error = kNaN;  // NaN for single-point
  double wall_time = 0.0;
  std::optional<double> chain_acceptance;
  std::string status = "ok";  // "ok" or "failed: <reason>"

  bool ok() const { return status == "ok"; }
};

struct SummaryStats {
  std::size_t count = 0;
  double mean = kNaN;
  double stddev = kNaN;  // sample standard deviation over runs
  double stderr_mean = kNaN;
};

struct BenchmarkAggregate {
  std::string method;
  std::size_t n = 0;
  std::size_t failures = 0;
  SummaryStats in_sample;
  SummaryStats out_sample;
};

struct RateSlope {
  std::string method;
  std::string metric;  // "out_sample" or "in_sample"
  RateFit fit;
  double half_width = 0.0;  // 1.96 standard errors
};

struct BenchmarkReport {
  ScenarioConfig config;
  std::vector<BenchmarkRow> rows;
  std::vector<BenchmarkAggregate> aggregates;
  std::vector<RateSlope> slopes;

  const BenchmarkAggregate* find(const std::string& method, std::size_t n) const {
    for (const auto& a : aggregates)
      if (a.method == method && a.n == n) return &a;
    return nullptr;
  }
};

inline SummaryStats summarize(const std::vector<double>& v) {
  SummaryStats s;
  s.count = v.size();
  if (v.empty()) return s;
  double sum = 0.0;
  for (double x : v) sum += x;
  s.mean = sum / static_cast<double>(v.size());
  if (v.size() >= 2) {
    double ss = 0.0;
    for (double x : v) ss += (x - s.mean) * (x - s.mean);
    s.stddev = std::sqrt(ss / static_cast<double>(v.size() - 1));
    s.stderr_mean = s.stddev / std::sqrt(static_cast<double>(v.size()));
  }
  return s;
}

// Aggregates keyed by (method, n) in sorted order, so the result does not
// depend on row order. Rate slopes use out-of-sample means when available.
inline void aggregate_report(BenchmarkReport& rep) {
  std::map<std::pair<std::string, std::size_t>, std::pair<std::vector<double>, std::vector<double>>> cells;
  std::map<std::pair<std::string, std::size_t>, std::size_t> failures;
  for (const auto& r : rep.rows) {
    auto& c = cells[{r.method, r.n}];
    failures[{r.method, r.n}] += r.ok() ? 0 : 1;
    if (!r.ok()) continue;
    if (std::isfinite(r.in_sample_error)) c.first.push_back(r.in_sample_error);
    if (std::isfinite(r.out_sample_error)) c.second.push_back(r.out_sample_error);
  }
  rep.aggregates.clear();
  for (auto& [key, v] : cells) {
    std::sort(v.first.begin(), v.first.end());
    std::sort(v.second.begin(), v.second.end());
    rep.aggregates.push_back({key.first, key.second, failures[key], summarize(v.first), summarize(v.second)});
  }
  rep.slopes.clear();
  std::map<std::string, std::vector<const BenchmarkAggregate*>> by_method;
  for (const auto& a : rep.aggregates) by_method[a.method].push_back(&a);
  for (const auto& [method, aggs] : by_method) {
    for (const char* metric : {"out_sample", "in_sample"}) {
      std::vector<double> ns, es;
      for (const auto* a : aggs) {
        const SummaryStats& s = std::string(metric) == "out_sample" ? a->out_sample : a->in_sample;
        if (s.count > 0 && s.mean > 0.0) {
          ns.push_back(static_cast<double>(a->n));
          es.push_back(s.mean);
        }
      }
      std::size_t distinct = 0;
      for (std::size_t i = 0; i < ns.size(); ++i) distinct += (i == 0 || ns[i] != ns[i - 1]);
      if (ns.size() < 3 || distinct < 2) continue;
      const RateFit f = fit_rate_slope(ns, es);
      rep.slopes.push_back({method, metric, f, 1.96 * f.stderr_slope});
    }
  }
}

inline Dataset generate_scenario_data(const ScenarioConfig& cfg, std::size_t n, std::uint64_t seed) {
  if (cfg.generator == "swiss-roll") return gen_swiss_roll(n, cfg.sigma, seed);
  if (cfg.generator == "mixed-union") return gen_mixed_union(n, cfg.sigma, seed);
  if (cfg.generator == "circle") return gen_circle(n, cfg.circle.radius, cfg.circle.D, cfg.sigma, seed);
  throw InvalidParameter("unknown generator: " + cfg.generator);
}

inline std::uint64_t cell_data_seed(std::uint64_t master, std::size_t n, std::size_t repeat) {
  return derive_seed(master, n, repeat);
}

inline std::uint64_t cell_method_seed(std::uint64_t master, Method m, std::size_t n, std::size_t repeat) {
  return derive_seed(master, hash_string(to_string(m)), n, repeat);
}

// Runs every (n, repeat, method) cell. Each (n, repeat) pair draws one train
// and one test set shared by all methods; failures are recorded per row.
inline BenchmarkReport run_benchmark(const ScenarioConfig& cfg) {
  cfg.validate();
  struct Cell {
    std::size_t n, repeat;
    Method method;
    std::size_t data;
  };
  std::vector<Dataset> train, test;
  std::vector<Cell> cells;
  for (std::size_t n : cfg.n_list) {
    for (std::size_t r = 0; r < cfg.repeats; ++r) {
      const std::uint64_t ds = cell_data_seed(cfg.seed, n, r);
      train.push_back(generate_scenario_data(cfg, n, derive_seed(ds, hash_string("train"))));
      test.push_back(cfg.n_test > 0 ? generate_scenario_data(cfg, cfg.n_test, derive_seed(ds, hash_string("test")))
                                    : Dataset{});
      for (Method m : cfg.methods) cells.push_back({n, r, m, train.size() - 1});
    }
  }

  BenchmarkReport rep;
  rep.config = cfg;
  rep.rows.resize(cells.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (std::size_t i = next++; i < cells.size(); i = next++) {
      const Cell& c = cells[i];
      BenchmarkRow& row = rep.rows[i];
      row.method = to_string(c.method);
      row.n = c.n;
      row.repeat = c.repeat;
      row.seed = cell_method_seed(cfg.seed, c.method, c.n, c.repeat);
      EstimatorConfig ec = cfg.estimator_for(c.method);
      ec.seed = row.seed;
      const Dataset& tr = train[c.data];
      const Dataset& te = test[c.data];
      const auto start = std::chrono::steady_clock::now();
      try {
        const Matrix X_test = c.method == Method::single_point ? Matrix(0, tr.X.cols()) : te.X;
        const Prediction p = fit_predict(tr, X_test, ec);
        const Vector& in = p.train_truncated ? *p.train_truncated : p.train_mean;
        row.in_sample_error = error_n(in, tr.f_star);
        if (p.mean.size() > 0) row.out_sample_error = error_2_empirical(p.truncated ? *p.truncated : p.mean, te.f_star);
        row.chain_acceptance = p.acceptance_rate;
      } catch (const std::exception& e) {
        row.status = std::string("failed: ") + e.what();
      }
      if (cfg.timing)
        row.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    }
  };
  const std::size_t threads = std::min(cfg.threads, std::max<std::size_t>(cells.size(), 1));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  aggregate_report(rep);
  return rep;
}

// ---------------------------------------------------------------------------
// Report I/O

namespace detail {

inline void csv_number(std::ostream& os, double v) {
  if (std::isfinite(v)) os << v;
}

inline std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c == '\n' ? ' ' : c;
  }
  return out + "\"";
}

inline Json number_or_null(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

inline Json stats_json(const SummaryStats& s) {
  return {{"count", s.count}, {"mean", number_or_null(s.mean)}, {"std", number_or_null(s.stddev)},
          {"stderr", number_or_null(s.stderr_mean)}};
}

}  // namespace detail

inline constexpr const char* kReportCsvHeader =
    "method,n,repeat,seed,in_sample_error,out_sample_error,wall_time,chain_acceptance,status";

inline void write_report_csv(std::ostream& os, const BenchmarkReport& rep) {
  os << kReportCsvHeader << '\n' << std::setprecision(17);
  for (const auto& r : rep.rows) {
    os << r.method << ',' << r.n << ',' << r.repeat << ',' << r.seed << ',';
    detail::csv_number(os, r.in_sample_error);
    os << ',';
    detail::csv_number(os, r.out_sample_error);
    os << ',' << r.wall_time << ',';
    if (r.chain_acceptance) os << *r.chain_acceptance;
    os << ',' << detail::csv_escape(r.status) << '\n';
  }
}

// method,n,count,failures,in_mean,in_std,in_stderr,out_mean,out_std,out_stderr
inline void write_aggregates_csv(std::ostream& os, const BenchmarkReport& rep) {
  os << "method,n,count,failures,in_sample_mean,in_sample_std,in_sample_stderr,out_sample_mean,out_sample_std,"
        "out_sample_stderr\n"
     << std::setprecision(17);
  for (const auto& a : rep.aggregates) {
    os << a.method << ',' << a.n << ',' << a.in_sample.count << ',' << a.failures;
    for (const SummaryStats* s : {&a.in_sample, &a.out_sample})
      for (double v : {s->mean, s->stddev, s->stderr_mean}) {
        os << ',';
        detail::csv_number(os, v);
      }
    os << '\n';
  }
}

inline Json scenario_json(const ScenarioConfig& c) {
  Json methods = Json::array();
  for (Method m : c.methods) methods.push_back(to_string(m));
  return {{"generator", c.generator}, {"sigma", c.sigma},   {"n", c.n_list},         {"repeats", c.repeats},
          {"n_test", c.n_test},       {"methods", methods}, {"seed", c.seed},        {"timing", c.timing},
          {"circle", {{"radius", c.circle.radius}, {"D", c.circle.D}}}};
}

// "schema": 1. The thread count is deliberately left out: reports are
// identical for any value.
inline Json report_json(const BenchmarkReport& rep) {
  Json rows = Json::array();
  for (const auto& r : rep.rows)
    rows.push_back({{"method", r.method},
                    {"n", r.n},
                    {"repeat", r.repeat},
                    {"seed", r.seed},
                    {"in_sample_error", detail::number_or_null(r.in_sample_error)},
                    {"out_sample_error", detail::number_or_null(r.out_sample_error)},
                    {"wall_time", r.wall_time},
                    {"chain_acceptance", r.chain_acceptance ? Json(*r.chain_acceptance) : Json(nullptr)},
                    {"status", r.status}});
  Json aggs = Json::array();
  for (const auto& a : rep.aggregates)
    aggs.push_back({{"method", a.method},
                    {"n", a.n},
                    {"failures", a.failures},
                    {"in_sample", detail::stats_json(a.in_sample)},
                    {"out_sample", detail::stats_json(a.out_sample)}});
  Json slopes = Json::array();
  for (const auto& s : rep.slopes)
    slopes.push_back({{"method", s.method},
                      {"metric", s.metric},
                      {"slope", s.fit.slope},
                      {"intercept", s.fit.intercept},
                      {"stderr", s.fit.stderr_slope},
                      {"half_width_95", s.half_width}});
  return {{"schema", 1},
          {"config", scenario_json(rep.config)},
          {"rows", rows},
          {"aggregates", aggs},
          {"slopes", slopes},
          {"notes", "errors are root-mean-square; std is the sample standard deviation over runs, stderr = std/sqrt(count)"}};
}

inline void write_report_json(std::ostream& os, const BenchmarkReport& rep) { os << report_json(rep).dump(2) << '\n'; }

// Rows from a report written by write_report_json or write_report_csv.
inline std::vector<BenchmarkRow> read_report_rows_json(const Json& j) {
  detail::require<InvalidInput>(j.is_object() && j.value("schema", 0) == 1, "report JSON must carry \"schema\": 1");
  std::vector<BenchmarkRow> rows;
  for (const auto& r : j.at("rows")) {
    BenchmarkRow row;
    row.method = r.at("method").get<std::string>();
    row.n = r.at("n").get<std::size_t>();
    row.repeat = r.at("repeat").get<std::size_t>();
    row.seed = r.at("seed").get<std::uint64_t>();
    if (!r.at("in_sample_error").is_null()) row.in_sample_error = r.at("in_sample_error").get<double>();
    if (!r.at("out_sample_error").is_null()) row.out_sample_error = r.at("out_sample_error").get<double>();
    row.wall_time = r.at("wall_time").get<double>();
    if (!r.at("chain_acceptance").is_null()) row.chain_acceptance = r.at("chain_acceptance").get<double>();
    row.status = r.at("status").get<std::string>();
    rows.push_back(std::move(row));
  }
  return rows;
}

inline std::vector<BenchmarkRow> read_report_rows_csv(std::istream& is) {
  std::string line;
  detail::require<InvalidInput>(static_cast<bool>(std::getline(is, line)), "report CSV is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  detail::require<InvalidInput>(line == kReportCsvHeader, "report CSV header not recognized");
  std::vector<BenchmarkRow> rows;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
      const char ch = line[i];
      if (quoted) {
        if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else if (ch == '"') {
          quoted = false;
        } else {
          cur += ch;
        }
      } else if (ch == '"') {
        quoted = true;
      } else if (ch == ',') {
        f.push_back(cur);
        cur.clear();
      } else {
        cur += ch;
      }
    }
    f.push_back(cur);
    detail::require<InvalidInput>(f.size() == 9, "report CSV row has the wrong number of fields");
    BenchmarkRow r;
    try {
      r.method = f[0];
      r.n = std::stoul(f[1]);
      r.repeat = std::stoul(f[2]);
      r.seed = std::stoull(f[3]);
      if (!f[4].empty()) r.in_sample_error = std::stod(f[4]);
      if (!f[5].empty()) r.out_sample_error = std::stod(f[5]);
      r.wall_time = std::stod(f[6]);
      if (!f[7].empty()) r.chain_acceptance = std::stod(f[7]);
    } catch (const std::logic_error&) {
      throw InvalidInput("report CSV contains a non-numeric field");
    }
    r.status = f[8];
    rows.push_back(std::move(r));
  }
  return rows;
}

}  // namespace ebgp
