#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ebgp/datagen.hpp"
#include "ebgp/estimators.hpp"

using namespace ebgp;

namespace {

double rms(const Vector& a, const Vector& b) { return std::sqrt((a - b).squaredNorm() / static_cast<double>(a.size())); }

EstimatorConfig config(Method m, std::uint64_t seed = 1) {
  EstimatorConfig c;
  c.method = m;
  c.seed = seed;
  return c;
}

Dataset permuted(const Dataset& d, std::uint64_t seed) {
  std::vector<std::size_t> p(d.size());
  std::iota(p.begin(), p.end(), std::size_t{0});
  Rng rng(seed);
  std::shuffle(p.begin(), p.end(), rng);
  Dataset out = subset_rows(d, p);
  return out;
}

double chain_median(std::vector<double> v) {
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2), v.end());
  return v[v.size() / 2];
}

}  // namespace

TEST(Methods, NamesRoundTrip) {
  for (Method m : {Method::eb_gp, Method::gamma_gp, Method::gp_mle, Method::gp_median, Method::kernel_ridge_cv,
                   Method::single_point})
    EXPECT_EQ(parse_method(to_string(m)), m);
  EXPECT_THROW(parse_method("lasso"), InvalidParameter);
}

TEST(PosteriorAverage, DegenerateChainEqualsSingleBandwidth) {
  const Dataset tr = gen_circle(40, 0.3, 2, 0.1, 1);
  const Dataset te = gen_circle(15, 0.3, 2, 0.1, 2);
  const Prediction p = predict_with_bandwidths(tr, te.X, std::vector<double>(7, 0.02), 0.01);
  const GPFit<> fit(tr.X, tr.Y, {0.02, 0.01});
  EXPECT_LT((p.mean - posterior_predict(fit, te.X)).norm(), 1e-10);
  EXPECT_LT((p.train_mean - posterior_predict(fit, tr.X)).norm(), 1e-10);
}

TEST(PosteriorAverage, MultiplicityWeighting) {
  const Dataset tr = gen_circle(30, 0.3, 2, 0.1, 3);
  const Dataset te = gen_circle(10, 0.3, 2, 0.1, 4);
  const Prediction p = predict_with_bandwidths(tr, te.X, {0.01, 0.1, 0.01}, 0.01);
  const Vector a = posterior_predict(GPFit<>(tr.X, tr.Y, {0.01, 0.01}), te.X);
  const Vector b = posterior_predict(GPFit<>(tr.X, tr.Y, {0.1, 0.01}), te.X);
  EXPECT_LT((p.mean - (2.0 * a + b) / 3.0).norm(), 1e-10);
}

TEST(PosteriorAverage, LinearInY) {
  Dataset tr = gen_circle(50, 0.3, 3, 0.1, 5);
  const Dataset te = gen_circle(20, 0.3, 3, 0.1, 6);
  const std::vector<double> ts{0.005, 0.02, 0.02, 0.3};
  const Prediction base = predict_with_bandwidths(tr, te.X, ts, 0.01);
  tr.Y *= -2.5;
  const Prediction scaled = predict_with_bandwidths(tr, te.X, ts, 0.01);
  EXPECT_LT((scaled.mean + 2.5 * base.mean).norm(), 1e-10 * (1.0 + base.mean.norm()));
  tr.Y.setZero();
  EXPECT_EQ(predict_with_bandwidths(tr, te.X, ts, 0.01).mean.norm(), 0.0);
}

TEST(EBGP, ZeroResponseGivesZeroPrediction) {
  Dataset tr = gen_circle(40, 0.3, 2, 0.1, 7);
  tr.Y.setZero();
  const Dataset te = gen_circle(10, 0.3, 2, 0.1, 8);
  EstimatorConfig cfg = config(Method::eb_gp);
  cfg.mh.n_iter = 400;
  cfg.mh.burn_in = 100;
  const Prediction p = fit_predict_eb_gp(tr, te.X, cfg);
  EXPECT_EQ(p.mean.norm(), 0.0);
  EXPECT_EQ(p.train_mean.norm(), 0.0);
  EXPECT_EQ(p.bandwidths.size(), 300u);
}

TEST(EBGP, SeededAndChainKept) {
  const Dataset tr = gen_circle(40, 0.3, 2, 0.1, 9);
  const Dataset te = gen_circle(10, 0.3, 2, 0.1, 10);
  EstimatorConfig cfg = config(Method::eb_gp, 77);
  cfg.mh.n_iter = 300;
  cfg.mh.burn_in = 100;
  cfg.keep_chain = true;
  const Prediction a = fit_predict(tr, te.X, cfg);
  const Prediction b = fit_predict(tr, te.X, cfg);
  EXPECT_EQ(a.bandwidths, b.bandwidths);
  EXPECT_EQ(a.mean, b.mean);
  ASSERT_TRUE(a.chain.has_value());
  EXPECT_EQ(a.chain->trace.size(), 300u);
  ASSERT_TRUE(a.acceptance_rate.has_value());
}

TEST(EBGP, BeatsSinglePointInSampleOnSwissRoll) {
  const Dataset tr = gen_swiss_roll(400, 0.1, 2024);
  const Prediction p = fit_predict_eb_gp(tr, Matrix(0, 3), config(Method::eb_gp, 3));
  const double single = rms(fit_predict_single_point(tr, Matrix(0, 3), config(Method::single_point)).train_mean, tr.f_star);
  EXPECT_LT(rms(p.train_mean, tr.f_star), single);
}

TEST(EBGP, InferredNoiseOnlyForEB) {
  const Dataset tr = gen_circle(60, 0.3, 2, 0.1, 11);
  EstimatorConfig cfg = config(Method::eb_gp);
  cfg.noise_variance.reset();
  cfg.mh.n_iter = 400;
  cfg.mh.burn_in = 100;
  const Prediction p = fit_predict(tr, Matrix(0, 2), cfg);
  EXPECT_EQ(p.noise_variances.size(), 300u);
  for (Method m : {Method::gamma_gp, Method::gp_mle, Method::gp_median, Method::kernel_ridge_cv}) {
    cfg.method = m;
    EXPECT_THROW(fit_predict(tr, Matrix(0, 2), cfg), InvalidParameter) << to_string(m);
  }
}

TEST(EBGP, RejectsTooSmallOrMismatchedInput) {
  Dataset tr = gen_circle(1, 0.3, 2, 0.1, 1);
  EXPECT_THROW(fit_predict_eb_gp(tr, Matrix(0, 2), config(Method::eb_gp)), InvalidInput);
  tr = gen_circle(20, 0.3, 2, 0.1, 1);
  EXPECT_THROW(fit_predict_eb_gp(tr, Matrix::Zero(3, 5), config(Method::eb_gp)), InvalidInput);
}

TEST(GammaGP, MisspecifiedRhoShiftsMassToLargerBandwidths) {
  const Dataset tr = gen_circle(80, 0.3, 2, 0.1, 12);
  EstimatorConfig cfg = config(Method::gamma_gp, 5);
  cfg.rho = 1.0;
  const Prediction right = fit_predict_gamma_gp(tr, Matrix(0, 2), cfg);
  cfg.rho = 20.0;
  const Prediction wrong = fit_predict_gamma_gp(tr, Matrix(0, 2), cfg);
  EXPECT_GT(chain_median(wrong.bandwidths), chain_median(right.bandwidths));
  EXPECT_EQ(*wrong.rho, 20.0);
}

TEST(GammaGP, SupportExtendsBeyondOne) {
  // pure-noise responses: the likelihood favours wide kernels, so the chain wanders past t = 1
  Dataset tr = gen_circle(40, 0.3, 2, 0.1, 13);
  tr.Y = add_noise(Vector::Zero(40), 0.1, 99);
  EstimatorConfig cfg = config(Method::gamma_gp, 6);
  cfg.rho = 1.0;
  const Prediction p = fit_predict_gamma_gp(tr, Matrix(0, 2), cfg);
  EXPECT_GT(*std::max_element(p.bandwidths.begin(), p.bandwidths.end()), 1.0);
}

TEST(GammaGP, CloseToEBOnCircle) {
  const Dataset tr = gen_circle(150, 0.3, 2, 0.1, 14);
  const Dataset te = gen_circle(300, 0.3, 2, 0.1, 15);
  EstimatorConfig cfg = config(Method::gamma_gp, 7);
  cfg.rho = 1.0;
  const double g = rms(fit_predict(tr, te.X, cfg).mean, te.f_star);
  const double e = rms(fit_predict(tr, te.X, config(Method::eb_gp, 7)).mean, te.f_star);
  EXPECT_LE(g, 2.0 * e);
  EXPECT_LE(e, 2.0 * g);
}

TEST(GammaGP, EstimatesRhoWhenAbsent) {
  const Dataset tr = gen_circle(300, 0.3, 2, 0.0, 16);
  EstimatorConfig cfg = config(Method::gamma_gp, 8);
  cfg.mh.n_iter = 200;
  cfg.mh.burn_in = 50;
  const Prediction p = fit_predict_gamma_gp(tr, Matrix(0, 2), cfg);
  ASSERT_TRUE(p.rho.has_value());
  EXPECT_EQ(*p.rho, estimate_dimension(tr.X, cfg.stream("dimension")).dimension);
}

TEST(MLE, GridExamples) {
  const Dataset d = gen_circle(50, 0.3, 2, 0.1, 17);
  EXPECT_EQ(select_bandwidth_mle(d.X, d.Y, 0.01, {0.3}), 0.3);
  EXPECT_EQ(select_bandwidth_mle(d.X, d.Y, 0.01, {0.02, 0.02}), 0.02);
  EXPECT_THROW(select_bandwidth_mle(d.X, d.Y, 0.01, {}), InvalidParameter);
}

TEST(MLE, AttainsExhaustiveMaximum) {
  const Dataset d = gen_circle(50, 0.3, 2, 0.1, 18);
  const std::vector<double> grid = default_bandwidth_grid();
  ASSERT_EQ(grid.size(), 60u);
  const double t = select_bandwidth_mle(d.X, d.Y, 0.01, grid);
  double best = kNegInf;
  for (double g : grid) best = std::max(best, marginal_log_likelihood(d.X, d.Y, {g, 0.01}));
  EXPECT_NEAR(marginal_log_likelihood(d.X, d.Y, {t, 0.01}), best, 1e-9);
}

TEST(Median, Examples) {
  Matrix two(2, 1);
  two << 0.0, 0.3;
  EXPECT_NEAR(select_bandwidth_median(two).value, 0.09, 1e-15);
  Matrix three(3, 1);
  three << 0, 1, 3;
  EXPECT_EQ(select_bandwidth_median(three).value, 4.0);
  EXPECT_TRUE(select_bandwidth_median(Matrix::Constant(4, 2, 0.1)).degenerate);
  EXPECT_THROW(select_bandwidth_median(Matrix::Zero(1, 2)), InvalidInput);
}

TEST(Median, DegenerateTrainingSetRejected) {
  Dataset d = gen_circle(5, 0.3, 2, 0.1, 19);
  d.X.setConstant(0.2);
  EXPECT_THROW(fit_predict_gp_median(d, Matrix(0, 2), config(Method::gp_median)), InvalidInput);
}

TEST(KernelRidge, SingleGridPointEqualsFullRefit) {
  const Dataset tr = gen_circle(60, 0.3, 2, 0.1, 20);
  const Dataset te = gen_circle(10, 0.3, 2, 0.1, 21);
  EstimatorConfig cfg = config(Method::kernel_ridge_cv);
  cfg.grid = {0.015};
  const Prediction p = fit_predict_kernel_ridge_cv(tr, te.X, cfg);
  EXPECT_LT((p.mean - posterior_predict(GPFit<>(tr.X, tr.Y, {0.015, 0.01}), te.X)).norm(), 1e-10);
  EXPECT_EQ(p.bandwidths, std::vector<double>{0.015});
}

TEST(KernelRidge, SplitValidation) {
  const Dataset small = gen_circle(9, 0.3, 2, 0.1, 22);
  EXPECT_THROW(fit_predict_kernel_ridge_cv(small, Matrix(0, 2), config(Method::kernel_ridge_cv)), InvalidInput);
  EstimatorConfig cfg = config(Method::kernel_ridge_cv);
  cfg.cv_fraction = 1.0;
  EXPECT_THROW(fit_predict_kernel_ridge_cv(gen_circle(20, 0.3, 2, 0.1, 1), Matrix(0, 2), cfg), InvalidParameter);
}

TEST(KernelRidge, InSampleNotBetterThanEBOnSwissRoll) {
  double krr = 0.0, eb = 0.0;
  for (std::uint64_t s = 0; s < 20; ++s) {
    const Dataset tr = gen_swiss_roll(200, 0.1, 300 + s);
    krr += rms(fit_predict(tr, Matrix(0, 3), config(Method::kernel_ridge_cv, s)).train_mean, tr.f_star);
    eb += rms(fit_predict(tr, Matrix(0, 3), config(Method::eb_gp, s)).train_mean, tr.f_star);
  }
  EXPECT_GE(krr / 20.0, eb / 20.0);
}

TEST(SinglePoint, ReturnsResponsesAndNoTestPrediction) {
  const Dataset tr = gen_circle(25, 0.3, 2, 0.1, 23);
  const Prediction p = fit_predict_single_point(tr, Matrix(0, 2), config(Method::single_point));
  EXPECT_EQ(p.train_mean, tr.Y);
  EXPECT_EQ(p.mean.size(), 0);
  EXPECT_THROW(fit_predict_single_point(tr, Matrix::Zero(2, 2), config(Method::single_point)), InvalidParameter);
}

TEST(Truncation, Clamp) {
  Prediction p;
  p.mean = Vector(3);
  p.mean << 0.5, 2.0, -3.0;
  p.train_mean = Vector::Constant(2, 0.1);
  const Prediction t = truncate_prediction(p, 1.0);
  EXPECT_EQ(*t.truncated, (Vector(3) << 0.5, 1.0, -1.0).finished());
  EXPECT_EQ(*t.train_truncated, p.train_mean);
  EXPECT_EQ(t.mean, p.mean);
  EXPECT_THROW(truncate_prediction(p, 0.0), InvalidParameter);
}

TEST(Truncation, BoundHoldsForEveryMethod) {
  const Dataset tr = gen_circle(40, 0.3, 2, 0.5, 24);
  const Dataset te = gen_circle(30, 0.3, 2, 0.5, 25);
  for (Method m : {Method::eb_gp, Method::gamma_gp, Method::gp_mle, Method::gp_median, Method::kernel_ridge_cv}) {
    EstimatorConfig cfg = config(m);
    cfg.truncation = 0.3;
    cfg.rho = 1.0;
    cfg.mh.n_iter = 300;
    cfg.mh.burn_in = 100;
    const Prediction p = fit_predict(tr, te.X, cfg);
    ASSERT_TRUE(p.truncated.has_value());
    EXPECT_LE(p.truncated->cwiseAbs().maxCoeff(), 0.3) << to_string(m);
    EXPECT_LE(p.train_truncated->cwiseAbs().maxCoeff(), 0.3) << to_string(m);
  }
}

TEST(Permutation, TrainingRowOrderIrrelevant) {
  const Dataset tr = gen_circle(60, 0.3, 2, 0.1, 26);
  const Dataset pt = permuted(tr, 4);
  const Dataset te = gen_circle(15, 0.3, 2, 0.1, 27);
  for (Method m : {Method::eb_gp, Method::gamma_gp, Method::gp_mle, Method::gp_median}) {
    EstimatorConfig cfg = config(m, 9);
    cfg.rho = 1.0;
    cfg.mh.n_iter = 500;
    cfg.mh.burn_in = 100;
    const Prediction a = fit_predict(tr, te.X, cfg);
    const Prediction b = fit_predict(pt, te.X, cfg);
    EXPECT_LT((a.mean - b.mean).norm(), 1e-8 * (1.0 + a.mean.norm())) << to_string(m);
  }
}
