#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

#include "ebgp/datagen.hpp"
#include "ebgp/manifold_stats.hpp"

using namespace ebgp;

namespace {

Matrix line_points(std::initializer_list<double> xs) {
  Matrix X(static_cast<Eigen::Index>(xs.size()), 1);
  Eigen::Index i = 0;
  for (double x : xs) X(i++, 0) = x;
  return X;
}

Matrix uniform_cloud(Rng& rng, Eigen::Index n, Eigen::Index D) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Matrix X(n, D);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < D; ++j) X(i, j) = u(rng);
  return X;
}

}  // namespace

TEST(KnnRules, DefaultsAndConfigValidation) {
  EXPECT_EQ(default_knn_k(150), 2u);
  const double l = std::log(2000.0);
  EXPECT_EQ(default_knn_k(2000), static_cast<std::size_t>(std::ceil(0.25 * l * l)));
  EXPECT_EQ(default_subset_size(100), 100u);
  EXPECT_EQ(default_subset_size(2000), static_cast<std::size_t>(std::ceil(l * l * l)));
  EXPECT_THROW((KnnConfig{5, 1, 0.25}.validate(4)), InvalidParameter);
  EXPECT_THROW((KnnConfig{2, 0, 0.25}.validate(4)), InvalidParameter);
}

TEST(KnnDistance, Examples) {
  const Matrix X = line_points({0, 1, 3});
  EXPECT_EQ(knn_distance(X, 1, 1), 0.0);
  EXPECT_EQ(knn_distance(X, 0, 2), 1.0);
  EXPECT_EQ(knn_distance(X, 2, 3), 3.0);
  EXPECT_THROW(knn_distance(X, 0, 4), InvalidParameter);
}

TEST(KnnDistance, NondecreasingInK) {
  Rng rng(1);
  const Matrix X = uniform_cloud(rng, 60, 3);
  for (std::size_t i = 0; i < 60; i += 7) {
    double prev = 0.0;
    for (std::size_t k = 1; k <= 60; ++k) {
      const double r = knn_distance(X, i, k);
      EXPECT_GE(r, prev);
      prev = r;
    }
  }
}

TEST(TnStatistic, Examples) {
  const Matrix X = line_points({0, 1, 3});
  EXPECT_NEAR(tn_statistic(X, {0, 1, 2}, 2), 4.0 / 3.0, 1e-15);
  EXPECT_EQ(tn_statistic(X, {2}, 2), knn_distance(X, 2, 2));
  EXPECT_THROW(tn_statistic(X, {}, 2), InvalidInput);
  const Matrix dup = line_points({0.5, 0.5, 0.9});
  EXPECT_EQ(knn_distance(dup, 0, 2), 0.0);
}

TEST(ChooseSubset, SizeSortedDistinctSeeded) {
  Rng a(9), b(9);
  const auto s = choose_subset(100, 20, a);
  EXPECT_EQ(s, choose_subset(100, 20, b));
  EXPECT_EQ(s.size(), 20u);
  EXPECT_TRUE(std::is_sorted(s.begin(), s.end()));
  EXPECT_EQ(std::adjacent_find(s.begin(), s.end()), s.end());
}

TEST(Affinity, Examples) {
  const Matrix two = line_points({0.0, 0.3});
  EXPECT_NEAR(kernel_affinity_stat(two, 0.02), std::exp(-0.09 / 0.04), 1e-15);
  EXPECT_NEAR(harmonic_affinity_stat(two, 0.02), std::exp(-0.09 / 0.04), 1e-15);
  const Matrix same = line_points({0.4, 0.4, 0.4});
  EXPECT_EQ(kernel_affinity_stat(same, 0.01), 1.0);
  Rng rng(2);
  const Matrix X = uniform_cloud(rng, 30, 2);
  EXPECT_NEAR(kernel_affinity_stat(X, 1e8), 1.0, 1e-8);
  EXPECT_THROW(kernel_affinity_stat(line_points({0.1}), 1.0), InvalidInput);
}

TEST(Affinity, MonotoneInBandwidth) {
  Rng rng(3);
  const AffinityStatistic stat(uniform_cloud(rng, 40, 3), AffinityVariant::arithmetic);
  const AffinityCurve c = affinity_curve(stat, {1e-4, 1e-3, 1e-2, 0.1, 1.0, 10.0});
  for (std::size_t i = 1; i < c.values.size(); ++i) EXPECT_GE(c.values[i], c.values[i - 1]);
  for (double v : c.values) {
    EXPECT_GT(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
  EXPECT_THROW(affinity_curve(stat, {0.1, 0.1}), InvalidParameter);
}

TEST(Affinity, HarmonicEqualsArithmeticForEqualRowMeans) {
  // vertices of a regular polygon: every point sees the same neighborhood
  Matrix X(8, 2);
  for (int i = 0; i < 8; ++i) X.row(i) << std::cos(i * std::numbers::pi / 4), std::sin(i * std::numbers::pi / 4);
  EXPECT_NEAR(harmonic_affinity_stat(X, 0.3), kernel_affinity_stat(X, 0.3), 1e-14);
}

TEST(Affinity, HarmonicNeverExceedsArithmetic) {
  Rng rng(4);
  for (int rep = 0; rep < 5; ++rep) {
    const Dataset d = gen_mixed_union(150, 0.1, 100 + rep);
    for (double t : {1e-4, 1e-3, 1e-2, 0.1}) {
      const double h = harmonic_affinity_stat(d.X, t);
      const double a = kernel_affinity_stat(d.X, t);
      EXPECT_LT(h, a) << "t=" << t;
    }
    const Matrix X = uniform_cloud(rng, 50, 3);
    EXPECT_LE(harmonic_affinity_stat(X, 0.05), kernel_affinity_stat(X, 0.05) * (1 + 1e-14));
  }
}

TEST(Affinity, PermutationAndRigidMotionInvariant) {
  Rng rng(5);
  const Matrix X = uniform_cloud(rng, 40, 3);
  std::vector<int> perm(40);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  Matrix P(40, 3);
  for (int i = 0; i < 40; ++i) P.row(i) = X.row(perm[i]);
  const Eigen::Matrix3d R = Eigen::AngleAxisd(0.7, Eigen::Vector3d(1, 2, 3).normalized()).toRotationMatrix();
  const Matrix M = ((X * R.transpose()).rowwise() + Eigen::RowVector3d(0.3, -2.0, 5.0));
  for (double t : {1e-3, 0.05}) {
    const double a = kernel_affinity_stat(X, t), h = harmonic_affinity_stat(X, t);
    EXPECT_NEAR(kernel_affinity_stat(P, t), a, 1e-14);
    EXPECT_NEAR(harmonic_affinity_stat(P, t), h, 1e-14);
    EXPECT_NEAR(kernel_affinity_stat(M, t), a, 1e-12);
    EXPECT_NEAR(harmonic_affinity_stat(M, t), h, 1e-12);
  }
}

TEST(EstimateDimension, SegmentGridIsOne) {
  Matrix X(2000, 3);
  for (int i = 0; i < 2000; ++i) X.row(i) << i / 1999.0, 0.5, 0.5;
  EXPECT_EQ(estimate_dimension(X, 1).dimension, 1);
}

TEST(EstimateDimension, UnitSquareMostlyTwo) {
  int hits = 0;
  for (int seed = 0; seed < 100; ++seed) {
    Rng rng(5000 + seed);
    const Matrix X = uniform_cloud(rng, 2000, 2);
    hits += estimate_dimension(X, seed).dimension == 2;
  }
  EXPECT_GE(hits, 80);
}

TEST(EstimateDimension, DegenerateAndSmallInputs) {
  const Matrix same = Matrix::Constant(10, 2, 0.3);
  EXPECT_THROW(estimate_dimension(same, 1), DegenerateRatio);
  EXPECT_THROW(estimate_dimension(line_points({0, 1, 2}), 1), InvalidInput);
}

TEST(EstimateDimension, AnchorFollowsSeed) {
  Rng rng(6);
  const Matrix X = uniform_cloud(rng, 400, 3);
  EXPECT_EQ(estimate_dimension(X, 42).anchor, estimate_dimension(X, 42).anchor);
  const DimensionEstimate e = estimate_dimension(X, 42);
  EXPECT_EQ(e.k, 20u);
  EXPECT_GE(e.dimension, 1);
  EXPECT_LE(e.dimension, 3);
}

TEST(MedianBandwidth, Examples) {
  EXPECT_NEAR(median_pairwise_sq_distance(pairwise_sq_dists(line_points({0.0, 0.5}))).value, 0.25, 1e-15);
  EXPECT_EQ(median_pairwise_sq_distance(pairwise_sq_dists(line_points({0, 1, 3}))).value, 4.0);
  // squared distances {1,1,1,4,4,9}: central pair (1, 4)
  EXPECT_EQ(median_pairwise_sq_distance(pairwise_sq_dists(line_points({0, 1, 2, 3}))).value, 2.5);
  const MedianBandwidth m = median_pairwise_sq_distance(pairwise_sq_dists(line_points({0.2, 0.2, 0.2})));
  EXPECT_EQ(m.value, 0.0);
  EXPECT_TRUE(m.degenerate);
}

TEST(BoxCounting, Examples) {
  const Matrix one = Matrix::Constant(1, 3, 0.4);
  const BoxCountResult single = box_counting_dimension(one, {0.2, 0.1, 0.05});
  EXPECT_EQ(single.counts, (std::vector<std::size_t>{1, 1, 1}));
  EXPECT_NEAR(single.slope, 0.0, 1e-12);

  Matrix grid(101 * 101, 2);
  for (int i = 0; i <= 100; ++i)
    for (int j = 0; j <= 100; ++j) grid.row(i * 101 + j) << i / 100.0, j / 100.0;
  const BoxCountResult sq = box_counting_dimension(grid, {0.25, 0.125, 0.0625});
  EXPECT_EQ(sq.counts, (std::vector<std::size_t>{4, 16, 64}));
  EXPECT_NEAR(sq.slope, 2.0, 0.2);

  Matrix seg(5000, 3);
  for (int i = 0; i < 5000; ++i) seg.row(i) << i / 4999.0, 0.3, 0.7;
  EXPECT_NEAR(box_counting_dimension(seg, {0.1, 0.05, 0.025, 0.0125}).slope, 1.0, 0.2);

  EXPECT_THROW(box_counting_dimension(grid, {0.25, 0.125}), InvalidInput);
  EXPECT_THROW(box_counting_dimension(grid, {0.125, 0.25, 0.05}), InvalidParameter);
}

TEST(BoxCounting, CircleSlopeNearOne) {
  const Dataset d = gen_circle(5000, 0.4, 2, 0.0, 3);
  EXPECT_NEAR(box_counting_dimension(d.X, {0.05, 0.025, 0.0125, 0.00625}).slope, 1.0, 0.2);
}
