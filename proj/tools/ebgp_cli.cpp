// Command-line front end: data generation, single fits, benchmarks, rate
// fits, prior scans and the quadrature/concentration oracles.
//
// Exit codes: 0 success, 2 invalid input or parameters, 3 numerical failure.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "ebgp.hpp"

namespace {

using namespace ebgp;

struct Globals {
  std::uint64_t seed = 0;
  std::string config;
  std::string out;
  std::size_t threads = 1;
  bool seed_set = false;
};

// Writes to --out when given, stdout otherwise.
class Output {
 public:
  explicit Output(const std::string& path) {
    if (!path.empty()) {
      file_ = std::make_unique<std::ofstream>(path);
      if (!file_->good()) throw InvalidInput("cannot open output file " + path);
    }
  }
  std::ostream& os() { return file_ ? *file_ : std::cout; }

 private:
  std::unique_ptr<std::ofstream> file_;
};

ScenarioConfig load_scenario(const Globals& g) {
  ScenarioConfig s;
  if (!g.config.empty()) apply_scenario_json(load_json_file(g.config), s);
  if (g.seed_set) s.seed = g.seed;
  s.threads = g.threads;
  return s;
}

std::optional<double> parse_noise(const std::string& v) {
  if (v == "infer") return std::nullopt;
  try {
    return std::stod(v);
  } catch (const std::logic_error&) {
    throw InvalidParameter("--noise-variance must be a number or 'infer'");
  }
}

// ---------------------------------------------------------------------------

struct GenArgs {
  std::string generator;
  std::optional<std::size_t> n;
  std::optional<double> sigma, radius;
  std::optional<std::size_t> D;
  bool equispaced = false;
  std::string image_dir;
  bool angles_from_index = false;
};

Dataset make_dataset(const ScenarioConfig& s, const GenArgs& a, std::uint64_t seed) {
  const std::string gen = a.generator.empty() ? s.generator : a.generator;
  const double sigma = a.sigma.value_or(s.sigma);
  const std::size_t n = a.n.value_or(s.n_list.front());
  if (gen == "images") {
    if (a.image_dir.empty()) throw InvalidParameter("--image-dir is required for the images generator");
    return load_image_manifold(a.image_dir, ImageResponseSpec{sigma, seed, a.angles_from_index});
  }
  if (gen == "circle") {
    CircleOptions opt;
    opt.equispaced = a.equispaced;
    return gen_circle(n, a.radius.value_or(s.circle.radius), a.D.value_or(s.circle.D), sigma, seed, opt);
  }
  ScenarioConfig tmp = s;
  tmp.generator = gen;
  tmp.sigma = sigma;
  return generate_scenario_data(tmp, n, seed);
}

void add_gen_options(CLI::App* sub, GenArgs& a) {
  sub->add_option("--generator", a.generator, "swiss-roll | mixed-union | circle | images");
  sub->add_option("--n", a.n, "number of samples");
  sub->add_option("--sigma", a.sigma, "noise standard deviation");
  sub->add_option("--radius", a.radius, "circle radius");
  sub->add_option("--D", a.D, "ambient dimension (circle)");
  sub->add_flag("--equispaced", a.equispaced, "circle: theta_i = 2 pi i / n");
  sub->add_option("--image-dir", a.image_dir, "directory with manifest.csv and PGM images");
  sub->add_flag("--angles-from-index", a.angles_from_index, "images: theta from file index when no manifest");
}

int cmd_gen(const Globals& g, const GenArgs& a) {
  const ScenarioConfig s = load_scenario(g);
  const Dataset d = make_dataset(s, a, s.seed);
  Output out(g.out);
  write_dataset_csv(out.os(), d);
  return 0;
}

// ---------------------------------------------------------------------------

struct FitArgs {
  std::string train, test, method, noise, chain_out;
  std::optional<double> rho, truncation;
};

int cmd_fit(const Globals& g, const FitArgs& a) {
  EstimatorConfig cfg;
  if (!g.config.empty()) {
    const Json j = load_json_file(g.config);
    if (j.contains("estimator")) apply_estimator_json(j.at("estimator"), cfg);
  }
  if (!a.method.empty()) cfg.method = parse_method(a.method);
  if (!a.noise.empty()) cfg.noise_variance = parse_noise(a.noise);
  if (a.rho) cfg.rho = a.rho;
  if (a.truncation) cfg.truncation = a.truncation;
  if (g.seed_set) cfg.seed = g.seed;
  cfg.keep_chain = !a.chain_out.empty();

  const Dataset train = read_dataset_csv(a.train);
  Dataset test;
  if (!a.test.empty()) test = read_dataset_csv(a.test);
  const Matrix X_test = a.test.empty() ? Matrix(0, train.X.cols()) : test.X;
  const Prediction p = fit_predict(train, X_test, cfg);

  Output out(g.out);
  std::ostream& os = out.os();
  os << "set,index,mean" << (p.truncated ? ",truncated" : "") << '\n' << std::setprecision(17);
  auto dump = [&](const char* set, const Vector& m, const std::optional<Vector>& tr) {
    for (Eigen::Index i = 0; i < m.size(); ++i) {
      os << set << ',' << i << ',' << m(i);
      if (tr) os << ',' << (*tr)(i);
      os << '\n';
    }
  };
  dump("train", p.train_mean, p.train_truncated);
  dump("test", p.mean, p.truncated);

  std::cerr << "method " << to_string(cfg.method);
  if (p.bandwidths.size() == 1) std::cerr << "  bandwidth " << p.bandwidths.front();
  if (p.acceptance_rate) std::cerr << "  acceptance " << *p.acceptance_rate;
  if (p.rho) std::cerr << "  rho " << *p.rho;
  std::cerr << '\n';
  if (train.has_truth()) std::cerr << "in-sample error " << error_n(p.train_mean, train.f_star) << '\n';
  if (p.mean.size() > 0 && test.has_truth()) std::cerr << "test error " << error_2_empirical(p.mean, test.f_star) << '\n';

  if (p.chain) {
    std::ofstream chain(a.chain_out);
    if (!chain.good()) throw InvalidInput("cannot open chain output " + a.chain_out);
    write_chain_csv(chain, *p.chain);
  }
  return 0;
}

// ---------------------------------------------------------------------------

struct BenchArgs {
  std::string generator;
  std::vector<std::size_t> n;
  std::optional<std::size_t> repeats, n_test;
  std::vector<std::string> methods;
  std::optional<double> sigma;
  bool no_timing = false;
};

void print_aggregates(std::ostream& os, const BenchmarkReport& rep) {
  os << std::left << std::setw(17) << "method" << std::setw(7) << "n" << std::setw(6) << "runs" << std::setw(14)
     << "in-sample" << std::setw(12) << "(std)" << std::setw(14) << "test" << "(std)\n";
  for (const auto& a : rep.aggregates) {
    os << std::setw(17) << a.method << std::setw(7) << a.n << std::setw(6) << a.in_sample.count << std::setw(14)
       << a.in_sample.mean << std::setw(12) << a.in_sample.stddev << std::setw(14) << a.out_sample.mean
       << a.out_sample.stddev << '\n';
  }
  for (const auto& s : rep.slopes)
    os << "slope " << s.method << ' ' << s.metric << ": " << s.fit.slope << " +/- " << s.half_width << '\n';
}

int cmd_benchmark(const Globals& g, const BenchArgs& a) {
  ScenarioConfig s = load_scenario(g);
  if (!a.generator.empty()) s.generator = a.generator;
  if (!a.n.empty()) s.n_list = a.n;
  if (a.repeats) s.repeats = *a.repeats;
  if (a.n_test) s.n_test = *a.n_test;
  if (a.sigma) s.sigma = *a.sigma;
  if (!a.methods.empty()) {
    s.methods.clear();
    for (const auto& m : a.methods) s.methods.push_back(parse_method(m));
  }
  if (a.no_timing) s.timing = false;

  const BenchmarkReport rep = run_benchmark(s);
  if (g.out.empty()) {
    write_report_json(std::cout, rep);
  } else {
    std::filesystem::path base(g.out);
    if (base.extension() == ".json" || base.extension() == ".csv") base.replace_extension();
    std::ofstream js(base.string() + ".json"), cs(base.string() + ".csv"), ag(base.string() + ".aggregates.csv");
    if (!js.good() || !cs.good() || !ag.good()) throw InvalidInput("cannot write report files at " + base.string());
    write_report_json(js, rep);
    write_report_csv(cs, rep);
    write_aggregates_csv(ag, rep);
  }
  print_aggregates(std::cerr, rep);
  return 0;
}

// ---------------------------------------------------------------------------

int cmd_rates(const Globals& g, const std::string& report) {
  BenchmarkReport rep;
  if (std::filesystem::path(report).extension() == ".json") {
    rep.rows = read_report_rows_json(load_json_file(report));
  } else {
    std::ifstream in(report);
    if (!in.good()) throw InvalidInput("cannot open report " + report);
    rep.rows = read_report_rows_csv(in);
  }
  aggregate_report(rep);
  Output out(g.out);
  out.os() << "method,metric,slope,intercept,stderr,half_width_95\n" << std::setprecision(17);
  for (const auto& s : rep.slopes)
    out.os() << s.method << ',' << s.metric << ',' << s.fit.slope << ',' << s.fit.intercept << ','
             << s.fit.stderr_slope << ',' << s.half_width << '\n';
  return 0;
}

// ---------------------------------------------------------------------------

struct ScanArgs {
  std::string data;
  GenArgs gen;
  double t_min = 1e-6, t_max = 10.0;
  std::size_t count = 50;
  double s = 2.0;
  std::optional<double> rho;
};

void print_a3(std::ostream& os, const char* name, const A3Report& r) {
  auto part = [&](const char* which, const A3BoundFit& f, std::pair<double, double> range) {
    os << name << ' ' << which << " [" << range.first << ", " << range.second << "]: " << (f.ok ? "pass" : "fail")
       << "  a=" << f.a << " K=" << f.K << " log C=" << f.log_C << (f.vacuous ? " (vacuous: zero density)" : "")
       << '\n';
  };
  part("lower", r.lower, r.lower_interval);
  part("upper", r.upper, r.upper_interval);
}

int cmd_prior_scan(const Globals& g, const ScanArgs& a) {
  const ScenarioConfig sc = load_scenario(g);
  const Dataset d = a.data.empty() ? make_dataset(sc, a.gen, sc.seed) : read_dataset_csv(a.data);
  const EstimatorConfig& ec = sc.estimator;
  Rng rng(derive_seed(sc.seed, hash_string("eb-subset")));
  const EBPriorBuild eb = build_eb_prior(d.X, ec.eb, rng);
  const double rho = a.rho ? *a.rho : estimate_dimension(d.X, derive_seed(sc.seed, hash_string("dimension"))).dimension;
  const RescaledGammaPrior gp{ec.gamma_a0, ec.gamma_b0, rho};

  Output out(g.out);
  out.os() << "t,eb_log_prior,gamma_log_prior\n" << std::setprecision(17);
  for (double t : detail::log_grid(a.t_min, a.t_max, a.count))
    out.os() << t << ',' << eb_log_prior(t, eb.prior) << ',' << rescaled_gamma_log_prior(t, gp) << '\n';

  std::cerr << "T_n " << eb.prior.tn << "  k " << eb.k << "  support (" << eb.prior.lower() << ", 1]  rho " << rho
            << '\n';
  print_a3(std::cerr, "eb", check_a3_bounds([&](double t) { return eb_log_prior(t, eb.prior); }, a.s, rho, d.size(), d.dim()));
  A3Options whole;
  whole.lower_range = whole.upper_range = std::pair{a.t_min, a.t_max};
  print_a3(std::cerr, "gamma", check_a3_bounds([&](double t) { return rescaled_gamma_log_prior(t, gp); }, a.s, rho,
                                               d.size(), d.dim(), whole));
  return 0;
}

// ---------------------------------------------------------------------------

struct OracleArgs {
  std::string check;
  double radius = 0.0;
  std::vector<double> eps{1e-2, 1e-3, 1e-4};
  std::size_t n = 2000;
  std::size_t D = 2;
  double t_min = 1e-3, t_max = 1e-2;
  std::size_t count = 20;
  double gamma2 = 0.25;
};

int cmd_oracle(const Globals& g, const OracleArgs& a) {
  Output out(g.out);
  std::ostream& os = out.os();
  os << std::setprecision(12);
  if (a.check == "g-epsilon" || a.check == "rkhs") {
    const double r = a.radius > 0 ? a.radius : 1.0;
    os << (a.check == "g-epsilon" ? "eps,value,deviation,nodes\n" : "eps,norm_squared,normalized,nodes\n");
    std::vector<double> ns, dev;
    for (double e : a.eps) {
      const ParamManifold m = with_resolution(circle_manifold(r, a.D), e);
      if (a.check == "g-epsilon") {
        const double v = g_epsilon_apply(m, [](double) { return 1.0; }, m.point(0.0), e);
        os << e << ',' << v << ',' << std::abs(v - 1.0) << ',' << m.nodes << '\n';
        ns.push_back(e);
        dev.push_back(std::abs(v - 1.0));
      } else {
        const double v = rkhs_norm_squared(m, [](double) { return 1.0; }, e);
        os << e << ',' << v << ',' << v / (m.volume() * std::sqrt(2.0 * std::numbers::pi * e)) << ',' << m.nodes
           << '\n';
      }
    }
    if (ns.size() >= 3) std::cerr << "log-log slope of |G_eps(1) - 1| vs eps: " << fit_rate_slope(ns, dev).slope << '\n';
    return 0;
  }
  const double r = a.radius > 0 ? a.radius : 0.25;
  const Dataset d = gen_circle(a.n, r, a.D, 0.0, load_scenario(g).seed);
  const double p = 1.0 / circle_circumference(r);
  if (a.check == "affinity-band") {
    const AffinityBandReport rep = affinity_band_check(d.X, p, 1, detail::log_grid(a.t_min, a.t_max, a.count));
    os << "t,affinity,ratio,lower,upper,pass\n";
    for (const auto& row : rep.rows)
      os << row.t << ',' << row.affinity << ',' << row.ratio << ',' << row.lower << ',' << row.upper << ','
         << (row.pass ? 1 : 0) << '\n';
    std::cerr << (rep.all_pass() ? "all grid points inside the band\n" : "band violated\n");
    return 0;
  }
  if (a.check == "knn-band") {
    const KnnBandReport rep = knn_band_check(d.X, p, 1, a.gamma2);
    os << "index,distance,pass\n";
    for (std::size_t i = 0; i < rep.distances.size(); ++i)
      os << i << ',' << rep.distances[i] << ',' << (rep.pass[i] ? 1 : 0) << '\n';
    std::cerr << "k " << rep.k << "  band [" << rep.lower << ", " << rep.upper << "]  inside " << rep.pass_fraction
              << (rep.small_n ? "  (small-n)" : "") << '\n';
    return 0;
  }
  throw InvalidParameter("unknown oracle check: " + a.check);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Empirical-Bayes Gaussian-process regression on manifold data"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--seed", g.seed, "master seed")->each([&g](const std::string&) { g.seed_set = true; });
  app.add_option("--config", g.config, "JSON configuration file");
  app.add_option("--out", g.out, "output path (stdout when omitted)");
  app.add_option("--threads", g.threads, "worker threads for benchmarks")->check(CLI::PositiveNumber);

  GenArgs gen;
  auto* sub_gen = app.add_subcommand("gen", "emit a dataset CSV");
  add_gen_options(sub_gen, gen);

  FitArgs fit;
  auto* sub_fit = app.add_subcommand("fit", "fit one estimator and write predictions");
  sub_fit->add_option("--train", fit.train, "training dataset CSV")->required();
  sub_fit->add_option("--test", fit.test, "test dataset CSV");
  sub_fit->add_option("--method", fit.method, "eb-gp | gamma-gp | gp-mle | gp-median | kernel-ridge-cv | single-point");
  sub_fit->add_option("--noise-variance", fit.noise, "sigma^2, or 'infer' (eb-gp)");
  sub_fit->add_option("--rho", fit.rho, "gamma-gp dimension (estimated when omitted)");
  sub_fit->add_option("--truncation", fit.truncation, "clamp predictions to [-M, M]");
  sub_fit->add_option("--chain-out", fit.chain_out, "write the MH trace as CSV");

  BenchArgs bench;
  auto* sub_bench = app.add_subcommand("benchmark", "repeated-run benchmark (JSON + CSV report)");
  sub_bench->add_option("--generator", bench.generator, "swiss-roll | mixed-union | circle");
  sub_bench->add_option("--n", bench.n, "sample sizes");
  sub_bench->add_option("--repeats", bench.repeats, "runs per sample size");
  sub_bench->add_option("--n-test", bench.n_test, "test set size");
  sub_bench->add_option("--methods", bench.methods, "estimators to compare");
  sub_bench->add_option("--sigma", bench.sigma, "noise standard deviation");
  sub_bench->add_flag("--no-timing", bench.no_timing, "write wall_time as 0 for byte-stable reports");

  std::string report;
  auto* sub_rates = app.add_subcommand("rates", "fit log-log error slopes from a report");
  sub_rates->add_option("--report", report, "report JSON or CSV")->required();

  ScanArgs scan;
  auto* sub_scan = app.add_subcommand("prior-scan", "tabulate log-priors and check the (A3) bounds");
  sub_scan->add_option("--data", scan.data, "dataset CSV (otherwise generated)");
  add_gen_options(sub_scan, scan.gen);
  sub_scan->add_option("--t-min", scan.t_min, "smallest bandwidth");
  sub_scan->add_option("--t-max", scan.t_max, "largest bandwidth");
  sub_scan->add_option("--count", scan.count, "grid points");
  sub_scan->add_option("--smoothness", scan.s, "smoothness s");
  sub_scan->add_option("--rho", scan.rho, "dimension (estimated when omitted)");

  OracleArgs orc;
  auto* sub_oracle = app.add_subcommand("oracle", "quadrature and concentration checks on a circle");
  sub_oracle->add_option("--check", orc.check, "g-epsilon | rkhs | affinity-band | knn-band")->required();
  sub_oracle->add_option("--radius", orc.radius, "circle radius");
  sub_oracle->add_option("--eps", orc.eps, "bandwidths for g-epsilon / rkhs");
  sub_oracle->add_option("--n", orc.n, "samples for band checks");
  sub_oracle->add_option("--D", orc.D, "ambient dimension");
  sub_oracle->add_option("--t-min", orc.t_min, "affinity-band grid start");
  sub_oracle->add_option("--t-max", orc.t_max, "affinity-band grid end");
  sub_oracle->add_option("--count", orc.count, "affinity-band grid size");
  sub_oracle->add_option("--gamma2", orc.gamma2, "kNN constant");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (sub_gen->parsed()) return cmd_gen(g, gen);
    if (sub_fit->parsed()) return cmd_fit(g, fit);
    if (sub_bench->parsed()) return cmd_benchmark(g, bench);
    if (sub_rates->parsed()) return cmd_rates(g, report);
    if (sub_scan->parsed()) return cmd_prior_scan(g, scan);
    if (sub_oracle->parsed()) return cmd_oracle(g, orc);
  } catch (const InvalidParameter& e) {
    std::cerr << "invalid parameter: " << e.what() << '\n';
    return 2;
  } catch (const InvalidInput& e) {
    std::cerr << "invalid input: " << e.what() << '\n';
    return 2;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "invalid input: " << e.what() << '\n';
    return 2;
  } catch (const NumericalFailure& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return 3;
  }
  return 1;
}
