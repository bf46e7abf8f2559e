#pragma once

// Metropolis-Hastings over the kernel bandwidth (and optionally the noise
// variance) targeting p(t | X, Y) proportional to L(Y | X, t) p(t), plus the
// exhaustive grid posterior used to validate the chains.

#include <cmath>
#include <cstdint>
#include <iomanip>
#include <limits>
#include <optional>
#include <ostream>
#include <random>
#include <utility>
#include <vector>

#include "ebgp/error.hpp"
#include "ebgp/kernel_gp.hpp"
#include "ebgp/manifold_stats.hpp"
#include "ebgp/priors.hpp"
#include "ebgp/rng.hpp"

namespace ebgp {

struct MHConfig {
  std::size_t n_iter = 3000;
  std::size_t burn_in = 1000;
  double proposal_step = 0.3;        // std of the random walk on log t
  std::uint64_t seed = 0;
  std::optional<double> initial_t;   // nullopt: median heuristic
  // joint sampler only
  double noise_proposal_step = 0.3;  // std of the random walk on log sigma^2
  double initial_noise_variance = 0.01;
  double noise_lower = 1e-4;
  double noise_upper = 1.0;
  bool keep_trace = true;

  void validate() const {
    detail::require(n_iter >= 2, "n_iter must be at least 2");
    detail::require(burn_in < n_iter, "burn_in must be smaller than n_iter");
    detail::require(proposal_step >= 0.0 && noise_proposal_step >= 0.0, "proposal steps must be nonnegative");
    detail::require(noise_lower > 0.0 && noise_upper > noise_lower, "noise prior bounds must satisfy 0 < lo < hi");
  }
};

struct ChainRecord {
  std::size_t iter = 0;
  double t = 0.0;
  std::optional<double> sigma2;
  double log_posterior = 0.0;
  bool accepted = false;
};

struct PosteriorChain {
  std::vector<double> t;              // post burn-in
  std::vector<double> sigma2;         // post burn-in, joint sampler only
  std::vector<double> log_posterior;  // post burn-in, log L + log p
  double acceptance_rate = 0.0;       // bandwidth block: accepted / (n_iter - 1)
  std::optional<double> noise_acceptance_rate;
  std::vector<ChainRecord> trace;     // every iteration when keep_trace
};

template <class State>
struct Proposal {
  State state;
  double log_hastings = 0.0;  // log q(current | proposed) - log q(proposed | current)
};

// One accept/reject decision. A uniform variate is drawn on every call so the
// random stream does not depend on the outcome.
inline bool mh_accept(double log_ratio, Rng& rng) {
  const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  if (std::isnan(log_ratio) || log_ratio == -std::numeric_limits<double>::infinity()) return false;
  return std::log(u) < log_ratio;
}

// Generic Metropolis-Hastings kernel on an arbitrary state space.
// LogTarget: double(const State&); Propose: Proposal<State>(const State&, Rng&).
template <class State, class LogTarget, class Propose>
class MetropolisHastings {
 public:
  MetropolisHastings(State initial, LogTarget target, Propose propose)
      : target_(std::move(target)), propose_(std::move(propose)), state_(std::move(initial)) {
    log_target_ = target_(state_);
    detail::require(std::isfinite(log_target_), "initial state has zero target density");
  }

  bool step(Rng& rng) {
    Proposal<State> prop = propose_(state_, rng);
    const double lp = target_(prop.state);
    const bool ok = mh_accept(lp - log_target_ + prop.log_hastings, rng);
    if (ok) {
      state_ = std::move(prop.state);
      log_target_ = lp;
    }
    return ok;
  }

  const State& state() const { return state_; }
  double log_target() const { return log_target_; }

 private:
  LogTarget target_;
  Propose propose_;
  State state_;
  double log_target_;
};

namespace detail {

inline double initial_bandwidth(const MHConfig& cfg, const BandwidthPrior& prior, const Matrix& sq_dists) {
  const Support& s = prior.support();
  if (cfg.initial_t) {
    detail::require(std::isfinite(prior.log_density(*cfg.initial_t)), "initial_t lies outside the prior support");
    return *cfg.initial_t;
  }
  double t = median_pairwise_sq_distance(sq_dists).value;
  // projection into the support
  if (t > s.upper) t = s.upper;
  if (!s.contains(t)) t = std::isfinite(s.upper) ? std::sqrt(std::max(s.lower, 1e-300) * s.upper) : 2.0 * s.lower + 1.0;
  if (!s.contains(t)) t = s.upper;
  detail::require(std::isfinite(prior.log_density(t)), "could not place the initial bandwidth inside the prior support");
  return t;
}

}  // namespace detail

// Random-walk MH on log t at fixed sigma^2. The target in log-t coordinates is
// log L(t) + log p(t) + log t (Jacobian), so samples follow p(t | X, Y).
template <class Kernel = SquaredExponential>
PosteriorChain mh_sample_bandwidth(const MarginalLikelihood<Kernel>& lik, const BandwidthPrior& prior,
                                   double noise_variance, const MHConfig& cfg) {
  cfg.validate();
  detail::require(noise_variance > 0.0, "noise variance must be positive");
  const double t0 = detail::initial_bandwidth(cfg, prior, lik.sq_dists());

  auto log_post = [&](double t) {
    const double lp = prior.log_density(t);
    if (!std::isfinite(lp)) return lp;
    return lik(t, noise_variance) + lp;
  };

  Rng rng(cfg.seed);
  std::normal_distribution<double> z(0.0, 1.0);
  PosteriorChain chain;
  double s = std::log(t0);
  double t_cur = t0;  // kept exactly; exp(log t) may round
  double cur = log_post(t0);
  detail::require(std::isfinite(cur), "initial bandwidth has zero posterior density");
  std::size_t accepted = 0;
  auto record = [&](std::size_t it, bool acc) {
    if (cfg.keep_trace) chain.trace.push_back({it, t_cur, std::nullopt, cur, acc});
    if (it >= cfg.burn_in) {
      chain.t.push_back(t_cur);
      chain.log_posterior.push_back(cur);
    }
  };
  record(0, true);
  for (std::size_t it = 1; it < cfg.n_iter; ++it) {
    const double s_new = s + cfg.proposal_step * z(rng);
    const double t_new = std::exp(s_new);
    const double prop = log_post(t_new);
    const bool acc = mh_accept((prop + s_new) - (cur + s), rng);
    if (acc) {
      s = s_new;
      t_cur = t_new;
      cur = prop;
      ++accepted;
    }
    record(it, acc);
  }
  chain.acceptance_rate = static_cast<double>(accepted) / static_cast<double>(cfg.n_iter - 1);
  return chain;
}

// Blockwise MH over (log t, log sigma^2) with sigma^2 ~ Uniform[noise_lower,
// noise_upper]. With noise_proposal_step == 0 the noise block is skipped and
// the chain coincides with mh_sample_bandwidth at sigma^2 = initial value.
template <class Kernel = SquaredExponential>
PosteriorChain mh_sample_joint(const MarginalLikelihood<Kernel>& lik, const BandwidthPrior& prior,
                               const MHConfig& cfg) {
  cfg.validate();
  const double v0 = cfg.initial_noise_variance;
  detail::require(v0 >= cfg.noise_lower && v0 <= cfg.noise_upper, "initial noise variance outside its prior");
  const double t0 = detail::initial_bandwidth(cfg, prior, lik.sq_dists());

  auto log_post = [&](double t, double v) {
    if (!(v >= cfg.noise_lower && v <= cfg.noise_upper)) return kNegInf;
    const double lp = prior.log_density(t);
    if (!std::isfinite(lp)) return lp;
    return lik(t, v) + lp;  // flat noise prior: constant omitted
  };

  Rng rng(cfg.seed);
  std::normal_distribution<double> z(0.0, 1.0);
  PosteriorChain chain;
  double s = std::log(t0);
  double w = std::log(v0);
  double t_cur = t0, v_cur = v0;
  double cur = log_post(t0, v0);
  detail::require(std::isfinite(cur), "initial state has zero posterior density");
  std::size_t acc_t = 0, acc_v = 0;
  const bool move_noise = cfg.noise_proposal_step > 0.0;
  auto record = [&](std::size_t it, bool acc) {
    if (cfg.keep_trace) chain.trace.push_back({it, t_cur, v_cur, cur, acc});
    if (it >= cfg.burn_in) {
      chain.t.push_back(t_cur);
      chain.sigma2.push_back(v_cur);
      chain.log_posterior.push_back(cur);
    }
  };
  record(0, true);
  for (std::size_t it = 1; it < cfg.n_iter; ++it) {
    const double s_new = s + cfg.proposal_step * z(rng);
    const double t_new = std::exp(s_new);
    const double prop_t = log_post(t_new, v_cur);
    const bool acc = mh_accept((prop_t + s_new) - (cur + s), rng);
    if (acc) {
      s = s_new;
      t_cur = t_new;
      cur = prop_t;
      ++acc_t;
    }
    if (move_noise) {
      const double w_new = w + cfg.noise_proposal_step * z(rng);
      const double v_new = std::exp(w_new);
      const double prop_v = log_post(t_cur, v_new);
      if (mh_accept((prop_v + w_new) - (cur + w), rng)) {
        w = w_new;
        v_cur = v_new;
        cur = prop_v;
        ++acc_v;
      }
    }
    record(it, acc);
  }
  chain.acceptance_rate = static_cast<double>(acc_t) / static_cast<double>(cfg.n_iter - 1);
  if (move_noise) chain.noise_acceptance_rate = static_cast<double>(acc_v) / static_cast<double>(cfg.n_iter - 1);
  return chain;
}

// exp(v_i - logsumexp(v)).
inline std::vector<double> softmax_normalize(const std::vector<double>& log_weights) {
  detail::require<InvalidInput>(!log_weights.empty(), "no log weights");
  double m = -std::numeric_limits<double>::infinity();
  for (double v : log_weights) m = std::max(m, v);
  if (!std::isfinite(m)) throw InvalidInput("every grid log-density is -inf");
  double sum = 0.0;
  std::vector<double> p(log_weights.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    p[i] = std::exp(log_weights[i] - m);
    sum += p[i];
  }
  for (double& x : p) x /= sum;
  return p;
}

// Normalized posterior mass at each grid bandwidth (point masses, no
// quadrature weights).
template <class Kernel = SquaredExponential>
std::vector<double> grid_posterior(const MarginalLikelihood<Kernel>& lik, const BandwidthPrior& prior,
                                   double noise_variance, const std::vector<double>& t_grid) {
  detail::require<InvalidInput>(t_grid.size() >= 2, "grid posterior needs at least 2 points");
  std::vector<double> lw;
  lw.reserve(t_grid.size());
  for (double t : t_grid) {
    const double lp = prior.log_density(t);
    lw.push_back(std::isfinite(lp) ? lik(t, noise_variance) + lp : lp);
  }
  return softmax_normalize(lw);
}

// iter,t[,sigma2],log_posterior,accepted
inline void write_chain_csv(std::ostream& os, const PosteriorChain& chain) {
  const bool joint = !chain.trace.empty() && chain.trace.front().sigma2.has_value();
  os << "iter,t," << (joint ? "sigma2," : "") << "log_posterior,accepted\n";
  os << std::setprecision(17);
  for (const auto& r : chain.trace) {
    os << r.iter << ',' << r.t << ',';
    if (joint) os << *r.sigma2 << ',';
    os << r.log_posterior << ',' << (r.accepted ? 1 : 0) << '\n';
  }
}

}  // namespace ebgp
