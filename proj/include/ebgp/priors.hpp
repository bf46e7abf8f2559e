#pragma once

// Bandwidth priors: the data-driven empirical-Bayes prior, the rescaled Gamma
// prior (t^{-rho/2} ~ Gamma(a0, b0)) and a log-uniform reference prior, with a
// type-erased handle used by the samplers and estimators.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <numbers>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ebgp/error.hpp"
#include "ebgp/kernel_gp.hpp"
#include "ebgp/manifold_stats.hpp"
#include "ebgp/quadrature.hpp"
#include "ebgp/rng.hpp"

namespace ebgp {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();
inline constexpr double kInf = std::numeric_limits<double>::infinity();

// (lower, upper], or [lower, upper] when lower_closed.
struct Support {
  double lower = 0.0;
  double upper = kInf;
  bool lower_closed = false;

  bool contains(double t) const {
    if (!(t <= upper)) return false;
    return lower_closed ? t >= lower : t > lower;
  }
};

enum class PriorKind { empirical_bayes, rescaled_gamma, log_uniform, custom };

inline const char* to_string(PriorKind k) {
  switch (k) {
    case PriorKind::empirical_bayes: return "empirical-bayes";
    case PriorKind::rescaled_gamma: return "rescaled-gamma";
    case PriorKind::log_uniform: return "log-uniform";
    case PriorKind::custom: return "custom";
  }
  return "custom";
}

class BandwidthPrior {
 public:
  BandwidthPrior(PriorKind kind, Support support, std::function<double(double)> log_density,
                 bool normalized)
      : kind_(kind), support_(support), log_density_(std::move(log_density)), normalized_(normalized) {}

  // -inf outside the support.
  double log_density(double t) const {
    if (!support_.contains(t)) return kNegInf;
    return log_density_(t);
  }
  double operator()(double t) const { return log_density(t); }

  PriorKind kind() const { return kind_; }
  const Support& support() const { return support_; }
  bool normalized() const { return normalized_; }

 private:
  PriorKind kind_;
  Support support_;
  std::function<double(double)> log_density_;
  bool normalized_;
};

// ---------------------------------------------------------------------------
// Empirical-Bayes prior

struct EmpiricalBayesPrior {
  double a0 = 1.0;
  double b0 = 1.0;
  double gamma1 = 0.25;
  double tn = 0.0;
  std::function<double(double)> affinity;  // t -> v_n(t)

  double lower() const { return gamma1 * tn * tn; }

  // t^{-a0} exp(-b0 / v_n(t)) in log form, without the support indicator.
  double log_kernel(double t) const { return -a0 * std::log(t) - b0 / affinity(t); }

  void validate() const {
    detail::require(a0 > 0.0 && b0 > 0.0 && gamma1 > 0.0, "a0, b0 and gamma1 must be positive");
    detail::require(tn >= 0.0 && std::isfinite(tn), "T_n must be finite and nonnegative");
    detail::require(static_cast<bool>(affinity), "affinity statistic missing");
    detail::require(lower() < 1.0, "empirical-Bayes support (gamma1 T_n^2, 1] is empty");
  }
};

// Unnormalized: -a0 log t - b0 / v_n(t) on (gamma1 T_n^2, 1], -inf elsewhere.
inline double eb_log_prior(double t, const EmpiricalBayesPrior& prior) {
  if (!(t > prior.lower() && t <= 1.0)) return kNegInf;
  return prior.log_kernel(t);
}

struct EBPriorConfig {
  double a0 = 1.0;
  double b0 = 1.0;
  double gamma1 = 0.25;
  double gamma2 = 0.25;
  AffinityVariant variant = AffinityVariant::arithmetic;
  std::size_t k = 0;            // 0: default rule
  std::size_t subset_size = 0;  // 0: default rule
};

struct EBPriorBuild {
  EmpiricalBayesPrior prior;
  std::size_t k = 0;
  std::vector<std::size_t> subset;
};

// Computes T_n on a random subset and binds the affinity statistic. With the
// harmonic variant T_n averages over every sample.
inline EBPriorBuild build_eb_prior(const Eigen::Ref<const Matrix>& X, std::shared_ptr<const Matrix> sq_dists,
                                   const EBPriorConfig& cfg, Rng& rng) {
  const auto n = static_cast<std::size_t>(X.rows());
  detail::require<InvalidInput>(n >= 2, "empirical-Bayes prior needs n >= 2");
  EBPriorBuild out;
  out.k = cfg.k ? cfg.k : default_knn_k(n, cfg.gamma2);
  detail::require(out.k >= 1 && out.k <= n, "k must lie in [1, n]");
  std::size_t size = cfg.subset_size ? cfg.subset_size : default_subset_size(n);
  if (cfg.variant == AffinityVariant::harmonic) size = n;
  out.subset = choose_subset(n, size, rng);
  auto stat = std::make_shared<AffinityStatistic>(std::move(sq_dists), cfg.variant);
  out.prior.a0 = cfg.a0;
  out.prior.b0 = cfg.b0;
  out.prior.gamma1 = cfg.gamma1;
  out.prior.tn = tn_statistic(X, out.subset, out.k);
  out.prior.affinity = [stat](double t) { return (*stat)(t); };
  out.prior.validate();
  return out;
}

inline EBPriorBuild build_eb_prior(const Eigen::Ref<const Matrix>& X, const EBPriorConfig& cfg, Rng& rng) {
  return build_eb_prior(X, std::make_shared<const Matrix>(pairwise_sq_dists(X)), cfg, rng);
}

inline BandwidthPrior as_bandwidth_prior(const EmpiricalBayesPrior& p) {
  p.validate();
  return BandwidthPrior(PriorKind::empirical_bayes, Support{p.lower(), 1.0, false},
                        [p](double t) { return p.log_kernel(t); }, false);
}

// log Z_n = log of the integral of t^{-a0} exp(-b0 / v_n(t)) over the support.
inline double eb_log_normalizer(const EmpiricalBayesPrior& p, double rel_tol = 1e-6) {
  p.validate();
  return log_integral_exp([&](double t) { return p.log_kernel(t); }, p.lower(), 1.0, rel_tol);
}

// ---------------------------------------------------------------------------
// Rescaled Gamma prior

struct RescaledGammaPrior {
  double a0 = 1.0;
  double b0 = 1.0;
  double rho = 1.0;

  void validate() const {
    detail::require(a0 > 0.0 && b0 > 0.0 && rho > 0.0, "a0, b0 and rho must be positive");
  }
};

// Normalized density of t when u = t^{-rho/2} ~ Gamma(shape a0, rate b0).
inline double rescaled_gamma_log_prior(double t, const RescaledGammaPrior& p) {
  if (!(t > 0.0) || !std::isfinite(t)) return kNegInf;
  const double half = 0.5 * p.rho;
  const double lt = std::log(t);
  return p.a0 * std::log(p.b0) - std::lgamma(p.a0) + std::log(half) + (p.a0 - 1.0) * (-half * lt) -
         p.b0 * std::exp(-half * lt) - (half + 1.0) * lt;
}

inline BandwidthPrior as_bandwidth_prior(const RescaledGammaPrior& p) {
  p.validate();
  return BandwidthPrior(PriorKind::rescaled_gamma, Support{0.0, kInf, false},
                        [p](double t) { return rescaled_gamma_log_prior(t, p); }, true);
}

// ---------------------------------------------------------------------------
// Log-uniform prior on [lower, upper]

struct LogUniformPrior {
  double lower = 1e-4;
  double upper = 1.0;
};

inline BandwidthPrior as_bandwidth_prior(const LogUniformPrior& p) {
  detail::require(p.lower > 0.0 && p.upper > p.lower, "log-uniform prior needs 0 < lower < upper");
  const double lz = std::log(std::log(p.upper / p.lower));
  return BandwidthPrior(PriorKind::log_uniform, Support{p.lower, p.upper, true},
                        [lz](double t) { return -std::log(t) - lz; }, true);
}

// ---------------------------------------------------------------------------
// Rate exponents

// s / (2s + rho)
inline double rate_exponent(double s, double rho) {
  detail::require(s > 0.0 && rho > 0.0, "s and rho must be positive");
  return s / (2.0 * s + rho);
}

// 1/2 (1 - rho_+ / min(rho_-, rho) * rho / (2s + rho_+)), defined when
// rho_+ >= rho_- > rho_+ rho / (2s + rho_+).
inline double misspecified_rate_exponent(double rho, double rho_minus, double rho_plus, double s) {
  detail::require(rho > 0.0 && rho_minus > 0.0 && rho_plus > 0.0 && s > 0.0,
                  "all exponent arguments must be positive");
  detail::require(rho_plus >= rho_minus, "need rho_+ >= rho_-");
  detail::require(rho_minus > rho_plus * rho / (2.0 * s + rho_plus), "need rho_- > rho_+ rho / (2s + rho_+)");
  return 0.5 * (1.0 - rho_plus / std::min(rho_minus, rho) * rho / (2.0 * s + rho_plus));
}

// ---------------------------------------------------------------------------
// (A3) diagnostic
//
// Lower inequality: p(t) >= C1 t^{-a1} exp(-K1 t^{-rho/2}) on
//   [c1, c2] * n^{-2/(2s+rho)} (log n)^{2(1+D)/(2s+rho)}.
// Upper inequality: p(t) <= C2 t^{-a2} exp(-K2 t^{-rho/2}) on
//   (0, c3 * n^{-2/(2s+rho)} (log n)^{-4(1+D)/((2+rho/s) rho)}].
// The asymptotic statement only fixes the functional forms, so (a, K) are
// fitted by a minimax fit in log space and C is the envelope constant.

struct A3Options {
  double c1 = 1.0;
  double c2 = 2.0;
  double c3 = 1.0;
  std::size_t grid_size = 50;
  double upper_floor_ratio = 1e-3;  // upper band gridded over [ratio, 1] * its right end
  // Explicit grid ranges replace the prescribed bands when set (lo, hi).
  std::optional<std::pair<double, double>> lower_range;
  std::optional<std::pair<double, double>> upper_range;
};

struct A3BoundFit {
  std::vector<double> grid;
  std::vector<double> log_density;
  std::vector<bool> pass;
  double a = std::numeric_limits<double>::quiet_NaN();
  double K = std::numeric_limits<double>::quiet_NaN();
  double log_C = std::numeric_limits<double>::quiet_NaN();
  double max_log_deviation = std::numeric_limits<double>::quiet_NaN();
  bool vacuous = false;  // every grid point outside the density's support
  bool ok = false;
};

struct A3Report {
  double s = 0.0, rho = 0.0;
  std::size_t n = 0, D = 0;
  std::pair<double, double> lower_interval;
  std::pair<double, double> upper_interval;
  A3BoundFit lower;
  A3BoundFit upper;
  bool decay_ok = false;  // upper fit carries at least one e-fold of exp(-K2 t^{-rho/2}) suppression
  bool passed() const { return lower.ok && upper.ok; }
};

namespace detail {

inline std::vector<double> log_grid(double lo, double hi, std::size_t m) {
  detail::require(lo > 0.0 && hi >= lo, "log grid needs 0 < lo <= hi");
  std::vector<double> g(m);
  for (std::size_t i = 0; i < m; ++i) {
    const double f = m == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(m - 1);
    g[i] = std::exp(std::log(lo) + f * (std::log(hi) - std::log(lo)));
  }
  g.front() = lo;
  if (m > 1) g.back() = hi;
  return g;
}

template <class F>
double ternary_min(F&& f, double lo, double hi, int iters = 200) {
  for (int i = 0; i < iters; ++i) {
    const double m1 = lo + (hi - lo) / 3.0;
    const double m2 = hi - (hi - lo) / 3.0;
    if (f(m1) <= f(m2)) hi = m2; else lo = m1;
  }
  return 0.5 * (lo + hi);
}

// Minimax fit of y_i ~ c - a log t_i - K u_i with a, K >= 0.
inline void fit_a3_form(A3BoundFit& fit, double rho) {
  std::vector<double> lt, u, y;
  for (std::size_t i = 0; i < fit.grid.size(); ++i) {
    if (!std::isfinite(fit.log_density[i])) continue;
    lt.push_back(std::log(fit.grid[i]));
    u.push_back(std::pow(fit.grid[i], -0.5 * rho));
    y.push_back(fit.log_density[i]);
  }
  if (y.empty()) return;
  auto spread = [&](double a, double K, double* lo_out = nullptr, double* hi_out = nullptr) {
    double lo = kInf, hi = kNegInf;
    for (std::size_t i = 0; i < y.size(); ++i) {
      const double r = y[i] + a * lt[i] + K * u[i];
      lo = std::min(lo, r);
      hi = std::max(hi, r);
    }
    if (lo_out) *lo_out = lo;
    if (hi_out) *hi_out = hi;
    return 0.5 * (hi - lo);
  };
  constexpr double kMaxA = 50.0;
  double yr = 0, ltr = 0, ur = 0;
  {
    auto [ymin, ymax] = std::minmax_element(y.begin(), y.end());
    auto [lmin, lmax] = std::minmax_element(lt.begin(), lt.end());
    auto [umin, umax] = std::minmax_element(u.begin(), u.end());
    yr = *ymax - *ymin;
    ltr = *lmax - *lmin;
    ur = *umax - *umin;
  }
  const double kmax = ur > 0 ? 4.0 * (yr + kMaxA * ltr + 1.0) / ur : 0.0;
  auto best_k = [&](double a) { return kmax > 0 ? ternary_min([&](double K) { return spread(a, K); }, 0.0, kmax) : 0.0; };
  const double a = ternary_min([&](double a_) { return spread(a_, best_k(a_)); }, 0.0, kMaxA, 100);
  fit.a = a;
  fit.K = best_k(a);
  double lo = 0, hi = 0;
  fit.max_log_deviation = spread(fit.a, fit.K, &lo, &hi);
  fit.log_C = 0.5 * (lo + hi);
}

}  // namespace detail

template <class LogDensity>
A3Report check_a3_bounds(LogDensity&& log_density, double s, double rho, std::size_t n, std::size_t D,
                         const A3Options& opt = {}) {
  detail::require(s > 0.0 && rho > 0.0, "s and rho must be positive");
  detail::require(n >= 2 && D >= 1, "need n >= 2 and D >= 1");
  detail::require(opt.grid_size >= 2, "grid needs at least 2 points");
  A3Report rep;
  rep.s = s;
  rep.rho = rho;
  rep.n = n;
  rep.D = D;
  const double ln = std::log(static_cast<double>(n));
  const double base = std::pow(static_cast<double>(n), -2.0 / (2.0 * s + rho));
  const double lower_scale = base * std::pow(ln, 2.0 * (1.0 + D) / (2.0 * s + rho));
  const double upper_scale = base * std::pow(ln, -4.0 * (1.0 + D) / ((2.0 + rho / s) * rho));
  rep.lower_interval = opt.lower_range.value_or(std::pair{opt.c1 * lower_scale, opt.c2 * lower_scale});
  rep.upper_interval =
      opt.upper_range.value_or(std::pair{opt.upper_floor_ratio * opt.c3 * upper_scale, opt.c3 * upper_scale});

  auto evaluate = [&](A3BoundFit& fit, std::pair<double, double> range) {
    fit.grid = detail::log_grid(range.first, range.second, opt.grid_size);
    for (double t : fit.grid) {
      const double v = log_density(t);
      if (std::isnan(v)) throw NumericalFailure("prior log-density returned NaN");
      fit.log_density.push_back(v);
    }
    detail::fit_a3_form(fit, rho);
  };

  evaluate(rep.lower, rep.lower_interval);
  rep.lower.ok = true;
  for (std::size_t i = 0; i < rep.lower.grid.size(); ++i) {
    const double t = rep.lower.grid[i];
    const bool p = std::isfinite(rep.lower.log_density[i]) && std::isfinite(rep.lower.log_C) &&
                   rep.lower.log_density[i] + 1e-9 >= (rep.lower.log_C - rep.lower.max_log_deviation) -
                                                          rep.lower.a * std::log(t) -
                                                          rep.lower.K * std::pow(t, -0.5 * rho);
    rep.lower.pass.push_back(p);
    rep.lower.ok = rep.lower.ok && p;
  }
  if (std::isfinite(rep.lower.log_C)) rep.lower.log_C -= rep.lower.max_log_deviation;

  evaluate(rep.upper, rep.upper_interval);
  rep.upper.vacuous = !std::isfinite(rep.upper.log_C);
  if (!rep.upper.vacuous) rep.upper.log_C += rep.upper.max_log_deviation;
  rep.upper.ok = true;
  double t_min_finite = kInf;
  for (std::size_t i = 0; i < rep.upper.grid.size(); ++i) {
    const double t = rep.upper.grid[i];
    const double v = rep.upper.log_density[i];
    bool p = true;
    if (std::isfinite(v)) {
      t_min_finite = std::min(t_min_finite, t);
      p = v <= rep.upper.log_C - rep.upper.a * std::log(t) - rep.upper.K * std::pow(t, -0.5 * rho) + 1e-9;
    }
    rep.upper.pass.push_back(p);
    rep.upper.ok = rep.upper.ok && p;
  }
  rep.decay_ok = rep.upper.vacuous || (rep.upper.K > 0.0 && rep.upper.K * std::pow(t_min_finite, -0.5 * rho) >= 1.0);
  rep.upper.ok = rep.upper.ok && rep.decay_ok;
  return rep;
}

}  // namespace ebgp
