#pragma once

// End-to-end regression estimators built on the GP posterior: empirical-Bayes
// GP, rescaled-Gamma GP, GP with marginal-likelihood or median-heuristic
// bandwidth, kernel ridge with a held-out bandwidth search, and the
// "single point" baseline that just returns Y.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <numeric>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ebgp/dataset.hpp"
#include "ebgp/error.hpp"
#include "ebgp/kernel_gp.hpp"
#include "ebgp/manifold_stats.hpp"
#include "ebgp/priors.hpp"
#include "ebgp/rng.hpp"
#include "ebgp/sampler.hpp"

namespace ebgp {

enum class Method { eb_gp, gamma_gp, gp_mle, gp_median, kernel_ridge_cv, single_point };

inline const char* to_string(Method m) {
  switch (m) {
    case Method::eb_gp: return "eb-gp";
    case Method::gamma_gp: return "gamma-gp";
    case Method::gp_mle: return "gp-mle";
    case Method::gp_median: return "gp-median";
    case Method::kernel_ridge_cv: return "kernel-ridge-cv";
    case Method::single_point: return "single-point";
  }
  return "?";
}

inline Method parse_method(std::string_view s) {
  for (Method m : {Method::eb_gp, Method::gamma_gp, Method::gp_mle, Method::gp_median, Method::kernel_ridge_cv,
                   Method::single_point})
    if (s == to_string(m)) return m;
  throw InvalidParameter("unknown method: " + std::string(s));
}

inline std::vector<double> default_bandwidth_grid() { return detail::log_grid(1e-4, 1.0, 60); }

struct EstimatorConfig {
  Method method = Method::eb_gp;
  std::optional<double> noise_variance = 0.01;  // nullopt: infer (eb-gp only)
  EBPriorConfig eb;
  double gamma_a0 = 1.0;
  double gamma_b0 = 1.0;
  std::optional<double> rho;  // gamma-gp; nullopt: estimate_dimension per run
  // mh.seed is ignored; the chain stream is derived from `seed`.
  MHConfig mh;
  std::vector<double> grid = default_bandwidth_grid();  // gp-mle and kernel-ridge-cv
  double cv_fraction = 0.1;
  std::optional<double> truncation;
  std::uint64_t seed = 0;
  bool keep_chain = false;  // store the full MH trace in the prediction

  void validate() const {
    if (!noise_variance)
      detail::require(method == Method::eb_gp, "noise variance inference is only available for eb-gp");
    else
      detail::require(*noise_variance > 0.0, "noise variance must be positive");
    if (method == Method::gp_mle || method == Method::kernel_ridge_cv) {
      detail::require(!grid.empty(), "bandwidth grid is empty");
      for (double t : grid) detail::require(t > 0.0 && std::isfinite(t), "grid bandwidths must be positive");
    }
    if (method == Method::kernel_ridge_cv)
      detail::require(cv_fraction > 0.0 && cv_fraction < 1.0, "cv_fraction must lie in (0, 1)");
    if (method == Method::gamma_gp) {
      detail::require(gamma_a0 > 0.0 && gamma_b0 > 0.0, "gamma prior a0, b0 must be positive");
      if (rho) detail::require(*rho > 0.0, "rho must be positive");
    }
    if (truncation) detail::require(*truncation > 0.0, "truncation level must be positive");
    if (method == Method::eb_gp || method == Method::gamma_gp) mh.validate();
  }

  std::uint64_t stream(std::string_view tag) const { return derive_seed(seed, hash_string(tag)); }
};

struct Prediction {
  Vector mean;        // at X_test; empty for single-point
  Vector train_mean;  // at the training inputs
  std::optional<Vector> truncated;
  std::optional<Vector> train_truncated;
  std::vector<double> bandwidths;  // chain samples, or the single selected t
  std::vector<double> noise_variances;
  std::optional<double> acceptance_rate;
  std::optional<double> rho;  // gamma-gp
  std::optional<PosteriorChain> chain;  // when keep_chain is set
};

// ---------------------------------------------------------------------------
// Posterior mean averaged over a bandwidth sequence

// Training-set quantities shared across bandwidths.
class PosteriorMeanEvaluator {
 public:
  PosteriorMeanEvaluator(std::shared_ptr<const Matrix> train_sq_dists, Vector Y, const Eigen::Ref<const Matrix>& X_train,
                         const Eigen::Ref<const Matrix>& X_test)
      : d2_(std::move(train_sq_dists)), y_(std::move(Y)) {
    detail::require<InvalidInput>(d2_->rows() == y_.size(), "X and Y disagree in length");
    if (X_test.rows() > 0) {
      detail::require<InvalidInput>(X_test.cols() == X_train.cols(),
                                    "test points differ in dimension from training points");
      c2_ = cross_sq_dists(X_test, X_train);
    }
  }

  // Posterior means at (train, test) for one (t, sigma^2).
  std::pair<Vector, Vector> operator()(double t, double noise_variance) const {
    KernelParams{t, noise_variance}.validate();
    Matrix K = kernel_from_sq_dists(*d2_, t);
    K.diagonal().setOnes();
    Matrix A = K;
    A.diagonal().array() += noise_variance;
    const CholeskyFactor f = factorize_spd(std::move(A));
    const Vector alpha = f.llt.solve(y_);
    Vector test;
    if (c2_.size() > 0) test = kernel_from_sq_dists(c2_, t) * alpha;
    return {K * alpha, std::move(test)};
  }

  Eigen::Index test_size() const { return c2_.rows(); }
  Eigen::Index train_size() const { return y_.size(); }

 private:
  std::shared_ptr<const Matrix> d2_;
  Vector y_;
  Matrix c2_;
};

// (1/B) sum_b E[f(x) | X, Y, t_b, sigma_b^2]; repeated states are evaluated once
// and weighted by multiplicity.
inline std::pair<Vector, Vector> average_posterior_mean(const PosteriorMeanEvaluator& eval,
                                                         const std::vector<double>& bandwidths,
                                                         const std::vector<double>& noise_variances) {
  detail::require<InvalidInput>(!bandwidths.empty(), "no bandwidth samples");
  detail::require<InvalidInput>(noise_variances.size() == bandwidths.size() || noise_variances.size() == 1,
                                "noise variance samples disagree with bandwidth samples");
  std::map<std::pair<double, double>, std::size_t> counts;
  for (std::size_t b = 0; b < bandwidths.size(); ++b)
    ++counts[{bandwidths[b], noise_variances.size() == 1 ? noise_variances[0] : noise_variances[b]}];
  Vector train = Vector::Zero(eval.train_size());
  Vector test = Vector::Zero(eval.test_size());
  for (const auto& [state, c] : counts) {
    const auto [tr, te] = eval(state.first, state.second);
    const double w = static_cast<double>(c);
    train += w * tr;
    if (te.size() > 0) test += w * te;
  }
  const double B = static_cast<double>(bandwidths.size());
  return {train / B, test / B};
}

// Prediction from an externally supplied bandwidth sequence (used to pin the
// chain in tests).
inline Prediction predict_with_bandwidths(const Dataset& train, const Eigen::Ref<const Matrix>& X_test,
                                          const std::vector<double>& bandwidths, double noise_variance) {
  PosteriorMeanEvaluator eval(std::make_shared<const Matrix>(pairwise_sq_dists(train.X)), train.Y, train.X, X_test);
  Prediction p;
  std::tie(p.train_mean, p.mean) = average_posterior_mean(eval, bandwidths, {noise_variance});
  p.bandwidths = bandwidths;
  p.noise_variances = {noise_variance};
  return p;
}

inline Prediction truncate_prediction(Prediction pred, double M) {
  detail::require(M > 0.0, "truncation level must be positive");
  pred.truncated = pred.mean.cwiseMax(-M).cwiseMin(M);
  pred.train_truncated = pred.train_mean.cwiseMax(-M).cwiseMin(M);
  return pred;
}

// ---------------------------------------------------------------------------
// Bandwidth selection

inline double select_bandwidth_mle(const MarginalLikelihood<>& lik, double noise_variance,
                                   const std::vector<double>& grid) {
  detail::require(!grid.empty(), "bandwidth grid is empty");
  double best_t = grid.front();
  double best = kNegInf;
  bool any = false;
  for (double t : grid) {
    const double ll = lik(t, noise_variance);
    if (!any || ll > best || (ll == best && t < best_t)) {
      best = ll;
      best_t = t;
      any = true;
    }
  }
  return best_t;
}

inline double select_bandwidth_mle(const Eigen::Ref<const Matrix>& X, const Eigen::Ref<const Vector>& Y,
                                   double noise_variance, const std::vector<double>& grid) {
  return select_bandwidth_mle(MarginalLikelihood<>(X, Y), noise_variance, grid);
}

inline MedianBandwidth select_bandwidth_median(const Eigen::Ref<const Matrix>& X) {
  detail::require<InvalidInput>(X.rows() >= 2, "median heuristic needs n >= 2");
  return median_pairwise_sq_distance(pairwise_sq_dists(X));
}

// ---------------------------------------------------------------------------
// Estimators

namespace detail {

inline void check_train(const Dataset& train, std::size_t min_n) {
  require<InvalidInput>(train.X.rows() == train.Y.size(), "X and Y disagree in length");
  require<InvalidInput>(train.size() >= min_n, ("training set needs n >= " + std::to_string(min_n)).c_str());
}

inline Prediction finish(Prediction p, const EstimatorConfig& cfg) {
  return cfg.truncation ? truncate_prediction(std::move(p), *cfg.truncation) : p;
}

inline Prediction run_chain(const Dataset& train, const Eigen::Ref<const Matrix>& X_test, const EstimatorConfig& cfg,
                            std::shared_ptr<const Matrix> d2, const BandwidthPrior& prior, bool infer_noise) {
  MHConfig mh = cfg.mh;
  mh.seed = cfg.stream("mh");
  mh.keep_trace = cfg.keep_chain;
  const MarginalLikelihood<> lik(d2, train.Y);
  const PosteriorChain chain =
      infer_noise ? mh_sample_joint(lik, prior, mh) : mh_sample_bandwidth(lik, prior, *cfg.noise_variance, mh);
  PosteriorMeanEvaluator eval(d2, train.Y, train.X, X_test);
  Prediction p;
  p.noise_variances = infer_noise ? chain.sigma2 : std::vector<double>{*cfg.noise_variance};
  std::tie(p.train_mean, p.mean) = average_posterior_mean(eval, chain.t, p.noise_variances);
  p.bandwidths = chain.t;
  p.acceptance_rate = chain.acceptance_rate;
  if (cfg.keep_chain) p.chain = chain;
  return p;
}

inline Prediction single_bandwidth(const Dataset& train, const Eigen::Ref<const Matrix>& X_test, double t,
                                   double noise_variance, std::shared_ptr<const Matrix> d2) {
  PosteriorMeanEvaluator eval(std::move(d2), train.Y, train.X, X_test);
  Prediction p;
  std::tie(p.train_mean, p.mean) = eval(t, noise_variance);
  p.bandwidths = {t};
  p.noise_variances = {noise_variance};
  return p;
}

}  // namespace detail

// Algorithm: T_n and the EB prior from X, MH over t (and sigma^2 when it is
// inferred), then the posterior mean averaged over the post-burn-in samples.
inline Prediction fit_predict_eb_gp(const Dataset& train, const Eigen::Ref<const Matrix>& X_test,
                                    const EstimatorConfig& cfg) {
  cfg.validate();
  detail::check_train(train, 2);
  auto d2 = std::make_shared<const Matrix>(pairwise_sq_dists(train.X));
  Rng rng(cfg.stream("eb-subset"));
  const EBPriorBuild build = build_eb_prior(train.X, d2, cfg.eb, rng);
  return detail::finish(
      detail::run_chain(train, X_test, cfg, d2, as_bandwidth_prior(build.prior), !cfg.noise_variance), cfg);
}

inline Prediction fit_predict_gamma_gp(const Dataset& train, const Eigen::Ref<const Matrix>& X_test,
                                       const EstimatorConfig& cfg) {
  cfg.validate();
  detail::check_train(train, 2);
  const double rho = cfg.rho ? *cfg.rho : estimate_dimension(train.X, cfg.stream("dimension")).dimension;
  auto d2 = std::make_shared<const Matrix>(pairwise_sq_dists(train.X));
  Prediction p = detail::run_chain(train, X_test, cfg, d2,
                                   as_bandwidth_prior(RescaledGammaPrior{cfg.gamma_a0, cfg.gamma_b0, rho}), false);
  p.rho = rho;
  return detail::finish(std::move(p), cfg);
}

inline Prediction fit_predict_gp_mle(const Dataset& train, const Eigen::Ref<const Matrix>& X_test,
                                     const EstimatorConfig& cfg) {
  cfg.validate();
  detail::check_train(train, 1);
  auto d2 = std::make_shared<const Matrix>(pairwise_sq_dists(train.X));
  const double t = select_bandwidth_mle(MarginalLikelihood<>(d2, train.Y), *cfg.noise_variance, cfg.grid);
  return detail::finish(detail::single_bandwidth(train, X_test, t, *cfg.noise_variance, d2), cfg);
}

// Coincident training points give a zero median; that is reported as
// invalid input since no bandwidth can be formed.
inline Prediction fit_predict_gp_median(const Dataset& train, const Eigen::Ref<const Matrix>& X_test,
                                        const EstimatorConfig& cfg) {
  cfg.validate();
  detail::check_train(train, 2);
  auto d2 = std::make_shared<const Matrix>(pairwise_sq_dists(train.X));
  const MedianBandwidth med = median_pairwise_sq_distance(*d2);
  detail::require<InvalidInput>(med.value > 0.0, "median heuristic bandwidth is zero (degenerate inputs)");
  return detail::finish(detail::single_bandwidth(train, X_test, med.value, *cfg.noise_variance, d2), cfg);
}

// Holds out ceil(cv_fraction n) points, picks the grid t with the smallest
// validation squared error (ties: smallest t), refits on all points. sigma^2
// plays the ridge parameter.
inline Prediction fit_predict_kernel_ridge_cv(const Dataset& train, const Eigen::Ref<const Matrix>& X_test,
                                              const EstimatorConfig& cfg) {
  cfg.validate();
  detail::check_train(train, 10);
  const std::size_t n = train.size();
  const auto m = static_cast<std::size_t>(std::ceil(cfg.cv_fraction * static_cast<double>(n)));
  detail::require(m >= 1 && m < n, "validation split must be nonempty and leave training points");
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  Rng rng(cfg.stream("cv"));
  std::shuffle(idx.begin(), idx.end(), rng);
  const std::vector<std::size_t> val(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(m));
  const std::vector<std::size_t> fit(idx.begin() + static_cast<std::ptrdiff_t>(m), idx.end());
  const Dataset dv = subset_rows(train, val);
  const Dataset df = subset_rows(train, fit);
  PosteriorMeanEvaluator eval(std::make_shared<const Matrix>(pairwise_sq_dists(df.X)), df.Y, df.X, dv.X);
  double best_t = cfg.grid.front();
  double best = kInf;
  for (double t : cfg.grid) {
    const double err = (eval(t, *cfg.noise_variance).second - dv.Y).squaredNorm();
    if (err < best || (err == best && t < best_t)) {
      best = err;
      best_t = t;
    }
  }
  auto d2 = std::make_shared<const Matrix>(pairwise_sq_dists(train.X));
  return detail::finish(detail::single_bandwidth(train, X_test, best_t, *cfg.noise_variance, d2), cfg);
}

// In-sample only: returns Y. Asking for out-of-sample predictions is an error.
inline Prediction fit_predict_single_point(const Dataset& train, const Eigen::Ref<const Matrix>& X_test,
                                           const EstimatorConfig& cfg) {
  detail::check_train(train, 1);
  detail::require(X_test.rows() == 0, "single-point baseline has no out-of-sample prediction");
  Prediction p;
  p.train_mean = train.Y;
  return detail::finish(std::move(p), cfg);
}

inline Prediction fit_predict(const Dataset& train, const Eigen::Ref<const Matrix>& X_test,
                              const EstimatorConfig& cfg) {
  switch (cfg.method) {
    case Method::eb_gp: return fit_predict_eb_gp(train, X_test, cfg);
    case Method::gamma_gp: return fit_predict_gamma_gp(train, X_test, cfg);
    case Method::gp_mle: return fit_predict_gp_mle(train, X_test, cfg);
    case Method::gp_median: return fit_predict_gp_median(train, X_test, cfg);
    case Method::kernel_ridge_cv: return fit_predict_kernel_ridge_cv(train, X_test, cfg);
    case Method::single_point: return fit_predict_single_point(train, X_test, cfg);
  }
  throw InvalidParameter("unknown method");
}

}  // namespace ebgp
