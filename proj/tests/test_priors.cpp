#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "ebgp/datagen.hpp"
#include "ebgp/priors.hpp"

using namespace ebgp;

namespace {

EmpiricalBayesPrior two_point_prior(double d) {
  Matrix X(2, 1);
  X << 0.0, d;
  EmpiricalBayesPrior p;
  p.tn = d;  // k = 2
  p.affinity = [X](double t) { return kernel_affinity_stat(X, t); };
  return p;
}

}  // namespace

TEST(EBPrior, Examples) {
  const double d = 0.4;
  const EmpiricalBayesPrior p = two_point_prior(d);
  EXPECT_DOUBLE_EQ(p.lower(), 0.25 * d * d);
  EXPECT_EQ(eb_log_prior(p.lower(), p), kNegInf);
  EXPECT_EQ(eb_log_prior(0.5 * p.lower(), p), kNegInf);
  EXPECT_EQ(eb_log_prior(1.0 + 1e-12, p), kNegInf);
  EXPECT_NEAR(eb_log_prior(1.0, p), -1.0 / std::exp(-d * d / 2.0), 1e-14);
  for (double t : {0.05, 0.2, 0.7})
    EXPECT_NEAR(eb_log_prior(t, p), -std::log(t) - std::exp(d * d / (2.0 * t)), 1e-12);
}

TEST(EBPrior, FiniteExactlyOnSupport) {
  const Dataset data = gen_circle(300, 0.3, 3, 0.1, 4);
  Rng rng(1);
  const EBPriorBuild b = build_eb_prior(data.X, EBPriorConfig{}, rng);
  const BandwidthPrior prior = as_bandwidth_prior(b.prior);
  const double lo = b.prior.lower();
  EXPECT_GT(lo, 0.0);
  EXPECT_EQ(prior.log_density(lo), kNegInf);
  EXPECT_EQ(prior.log_density(std::nextafter(1.0, 2.0)), kNegInf);
  EXPECT_TRUE(std::isfinite(prior.log_density(1.0)));
  EXPECT_TRUE(std::isfinite(prior.log_density(std::nextafter(lo, 1.0))));
  for (double t : detail::log_grid(lo * 1.0001, 1.0, 40)) EXPECT_TRUE(std::isfinite(prior.log_density(t)));
  EXPECT_EQ(b.k, default_knn_k(300));
  EXPECT_EQ(b.subset.size(), default_subset_size(300));
}

TEST(EBPrior, HarmonicVariantUsesEverySample) {
  const Dataset data = gen_mixed_union(250, 0.1, 4);
  Rng rng(1);
  EBPriorConfig cfg;
  cfg.variant = AffinityVariant::harmonic;
  EXPECT_EQ(build_eb_prior(data.X, cfg, rng).subset.size(), 250u);
}

TEST(EBPrior, RatioIndependentOfNormalizer) {
  const Dataset data = gen_circle(120, 0.3, 2, 0.1, 7);
  Rng rng(2);
  const EmpiricalBayesPrior p = build_eb_prior(data.X, EBPriorConfig{}, rng).prior;
  const double log_z = eb_log_normalizer(p);
  // normalized density integrates to one under a second, independent quadrature in t
  const double mass = adaptive_simpson([&](double t) { return std::exp(p.log_kernel(t) - log_z); }, p.lower(), 1.0,
                                       1e-8, 4096);
  EXPECT_NEAR(mass, 1.0, 1e-4);
  for (auto [t1, t2] : {std::pair{0.01, 0.2}, std::pair{0.05, 0.9}}) {
    const double raw = eb_log_prior(t1, p) - eb_log_prior(t2, p);
    const double normalized = (eb_log_prior(t1, p) - log_z) - (eb_log_prior(t2, p) - log_z);
    EXPECT_NEAR(raw, normalized, 1e-12);
  }
}

TEST(EBPrior, EmptySupportRejected) {
  EmpiricalBayesPrior p = two_point_prior(0.4);
  p.tn = 3.0;  // gamma1 T_n^2 > 1
  EXPECT_THROW(p.validate(), InvalidParameter);
}

TEST(RescaledGamma, ClosedFormRhoTwo) {
  const RescaledGammaPrior p{1.0, 1.0, 2.0};
  const double c = rescaled_gamma_log_prior(1.0, p) - (-2.0 * std::log(1.0) - 1.0);
  for (double t : {1e-3, 0.1, 0.5, 3.0, 40.0})
    EXPECT_NEAR(rescaled_gamma_log_prior(t, p), -2.0 * std::log(t) - 1.0 / t + c, 1e-12);
  EXPECT_EQ(rescaled_gamma_log_prior(0.0, p), kNegInf);
  EXPECT_EQ(rescaled_gamma_log_prior(-1.0, p), kNegInf);
}

TEST(RescaledGamma, IntegratesToOne) {
  for (auto p : {RescaledGammaPrior{1.0, 1.0, 1.0}, RescaledGammaPrior{2.0, 0.5, 2.0}, RescaledGammaPrior{1.5, 3.0, 3.0}}) {
    const double lz = log_integral_exp([&](double t) { return rescaled_gamma_log_prior(t, p); }, 1e-12, 1e12, 1e-8);
    EXPECT_NEAR(std::exp(lz), 1.0, 1e-4) << "rho=" << p.rho;
  }
}

TEST(RescaledGamma, CdfIdentity) {
  // a0 = 1: P(U >= x) = exp(-b0 x)
  const RescaledGammaPrior p{1.0, 2.0, 1.5};
  for (double c : {0.05, 0.3, 1.0, 4.0}) {
    const double lcdf = log_integral_exp([&](double t) { return rescaled_gamma_log_prior(t, p); }, 1e-14, c, 1e-9);
    EXPECT_NEAR(std::exp(lcdf), std::exp(-p.b0 * std::pow(c, -p.rho / 2.0)), 1e-6);
  }
}

TEST(RescaledGamma, SamplingHistogramWithinMultinomialBands) {
  const RescaledGammaPrior p{2.0, 1.5, 1.0};
  Rng rng(11);
  std::gamma_distribution<double> ga(p.a0, 1.0 / p.b0);
  const std::vector<double> edges = detail::log_grid(1e-3, 1e3, 25);
  std::vector<int> counts(edges.size() - 1, 0);
  const int N = 100000;
  for (int i = 0; i < N; ++i) {
    const double t = std::pow(ga(rng), -2.0 / p.rho);
    const auto it = std::upper_bound(edges.begin(), edges.end(), t);
    if (it != edges.begin() && it != edges.end()) ++counts[static_cast<std::size_t>(it - edges.begin() - 1)];
  }
  for (std::size_t b = 0; b + 1 < edges.size(); ++b) {
    const double prob = std::exp(
        log_integral_exp([&](double t) { return rescaled_gamma_log_prior(t, p); }, edges[b], edges[b + 1], 1e-8));
    const double sd = std::sqrt(N * prob * (1.0 - prob));
    EXPECT_LE(std::abs(counts[b] - N * prob), 3.0 * sd + 1.0) << "bin " << b;
  }
}

TEST(LogUniform, NormalizedOnClosedSupport) {
  const BandwidthPrior p = as_bandwidth_prior(LogUniformPrior{1e-4, 1.0});
  EXPECT_TRUE(std::isfinite(p.log_density(1e-4)));
  EXPECT_EQ(p.log_density(0.99e-4), kNegInf);
  const double lz = log_integral_exp([&](double t) { return p.log_density(t); }, 1e-4, 1.0);
  EXPECT_NEAR(lz, 0.0, 1e-6);
}

TEST(RateExponent, Examples) {
  EXPECT_DOUBLE_EQ(rate_exponent(2.0, 2.0), 1.0 / 3.0);
  for (double rho : {0.5, 1.0, 2.5})
    EXPECT_NEAR(misspecified_rate_exponent(rho, rho, rho, 2.0), rate_exponent(2.0, rho), 1e-15);
  const double s = 2.0, rho = 1.0, rp = 3.0;
  const double edge = rp * rho / (2 * s + rp);
  EXPECT_LT(misspecified_rate_exponent(rho, edge * (1 + 1e-9), rp, s), 1e-8);
  EXPECT_GT(misspecified_rate_exponent(rho, edge * (1 + 1e-9), rp, s), 0.0);
  EXPECT_THROW(misspecified_rate_exponent(rho, edge, rp, s), InvalidParameter);
  EXPECT_THROW(misspecified_rate_exponent(rho, 2.0, 1.0, s), InvalidParameter);
  EXPECT_THROW(rate_exponent(0.0, 1.0), InvalidParameter);
}

TEST(RateExponent, MisspecifiedMonotone) {
  const double s = 1.5;
  for (double rho : {0.7, 1.0, 2.0}) {
    for (double rp = 0.5; rp <= 4.0; rp += 0.25) {
      const double lo = rp * rho / (2 * s + rp);
      double prev = -1.0;
      for (double rm = lo * 1.01; rm <= rp; rm += (rp - lo) / 37.0) {
        const double r = misspecified_rate_exponent(rho, rm, rp, s);
        EXPECT_GE(r, prev - 1e-15);
        prev = r;
        // the wider upper range needs rm above its own edge
        if (rm > (rp + 0.25) * rho / (2 * s + rp + 0.25)) {
          EXPECT_LE(misspecified_rate_exponent(rho, rm, rp + 0.25, s), r + 1e-15);
        }
      }
    }
  }
}

TEST(A3Check, GammaPriorPassesEverywhere) {
  for (double rho : {1.0, 2.0}) {
    const RescaledGammaPrior p{1.0, 1.0, rho};
    A3Options opt;
    opt.lower_range = opt.upper_range = std::pair{1e-6, 10.0};
    const A3Report r = check_a3_bounds([&](double t) { return rescaled_gamma_log_prior(t, p); }, 2.0, rho, 2000, 2, opt);
    EXPECT_TRUE(r.passed());
    EXPECT_NEAR(r.lower.a, p.a0 * rho / 2.0 + 1.0, 1e-3);
    EXPECT_NEAR(r.lower.K, p.b0, 1e-3);
    EXPECT_LT(r.lower.max_log_deviation, 1e-6);
  }
}

TEST(A3Check, PrescribedIntervals) {
  const RescaledGammaPrior p{1.0, 1.0, 1.0};
  const A3Report r = check_a3_bounds([&](double t) { return rescaled_gamma_log_prior(t, p); }, 2.0, 1.0, 2000, 2);
  const double ln = std::log(2000.0);
  const double base = std::pow(2000.0, -2.0 / 5.0);
  EXPECT_NEAR(r.lower_interval.first, base * std::pow(ln, 6.0 / 5.0), 1e-14);
  EXPECT_NEAR(r.lower_interval.second, 2.0 * base * std::pow(ln, 6.0 / 5.0), 1e-14);
  EXPECT_NEAR(r.upper_interval.second, base * std::pow(ln, -4.8), 1e-16);
  EXPECT_TRUE(r.passed());
}

TEST(A3Check, ConstantPriorFailsUpperBound) {
  A3Options opt;
  opt.upper_range = std::pair{1e-6, 1e-2};
  const A3Report r = check_a3_bounds([](double t) { return t <= 1.0 ? 0.0 : kNegInf; }, 2.0, 1.0, 2000, 2, opt);
  EXPECT_FALSE(r.upper.ok);
  EXPECT_FALSE(r.passed());
}
