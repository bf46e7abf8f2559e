#pragma once

// Nearest-neighbor and kernel-affinity statistics of a point cloud, plus the
// two intrinsic-dimension estimators (kNN ratio and box counting).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <numeric>
#include <set>
#include <utility>
#include <vector>

#include "ebgp/error.hpp"
#include "ebgp/kernel_gp.hpp"
#include "ebgp/rng.hpp"

namespace ebgp {

struct KnnConfig {
  std::size_t k = 2;
  std::size_t subset_size = 1;
  double gamma2 = 0.25;

  void validate(std::size_t n) const {
    detail::require(k >= 1 && k <= n, "k must lie in [1, n]");
    detail::require(subset_size >= 1 && subset_size <= n, "subset size must lie in [1, n]");
    detail::require(gamma2 > 0.0, "gamma2 must be positive");
  }
};

// k = ceil(gamma2 log^2 n), overridden to 2 when n < 200; never above n.
inline std::size_t default_knn_k(std::size_t n, double gamma2 = 0.25) {
  detail::require<InvalidInput>(n >= 1, "empty sample");
  std::size_t k = 2;
  if (n >= 200) {
    const double l = std::log(static_cast<double>(n));
    k = static_cast<std::size_t>(std::ceil(gamma2 * l * l));
  }
  return std::clamp<std::size_t>(k, 1, n);
}

// |S| = ceil((log n)^3), or n when n < 200.
inline std::size_t default_subset_size(std::size_t n) {
  if (n < 200) return n;
  const double l = std::log(static_cast<double>(n));
  return std::min(n, static_cast<std::size_t>(std::ceil(l * l * l)));
}

inline KnnConfig default_knn_config(std::size_t n, double gamma2 = 0.25) {
  return KnnConfig{default_knn_k(n, gamma2), default_subset_size(n), gamma2};
}

// Uniform random subset without replacement, returned in ascending order.
inline std::vector<std::size_t> choose_subset(std::size_t n, std::size_t size, Rng& rng) {
  detail::require(size >= 1 && size <= n, "subset size must lie in [1, n]");
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  if (size == n) return idx;
  // partial Fisher-Yates
  for (std::size_t i = 0; i < size; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, n - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  idx.resize(size);
  std::sort(idx.begin(), idx.end());
  return idx;
}

namespace detail {

// Distances from row i to all rows, ordered by (distance, index).
inline std::vector<std::pair<double, std::size_t>> sorted_neighbors(const Eigen::Ref<const Matrix>& X,
                                                                    std::size_t i, std::size_t upto) {
  const auto n = static_cast<std::size_t>(X.rows());
  std::vector<std::pair<double, std::size_t>> d(n);
  for (std::size_t j = 0; j < n; ++j)
    d[j] = {std::sqrt(squared_distance(X.row(static_cast<Eigen::Index>(j)),
                                       X.row(static_cast<Eigen::Index>(i)))),
            j};
  upto = std::min(upto, n);
  std::partial_sort(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(upto), d.end());
  d.resize(upto);
  return d;
}

}  // namespace detail

// Distance from X_i to its k-th nearest neighbor; X_i is its own first.
inline double knn_distance(const Eigen::Ref<const Matrix>& X, std::size_t i, std::size_t k) {
  const auto n = static_cast<std::size_t>(X.rows());
  detail::require<InvalidInput>(n >= 1, "empty sample");
  detail::require(i < n, "point index out of range");
  detail::require(k >= 1 && k <= n, "k must lie in [1, n]");
  return detail::sorted_neighbors(X, i, k)[k - 1].first;
}

// T_n: mean k-NN distance over the index subset S.
inline double tn_statistic(const Eigen::Ref<const Matrix>& X, const std::vector<std::size_t>& S,
                           std::size_t k) {
  detail::require<InvalidInput>(!S.empty(), "index subset S is empty");
  double sum = 0.0;
  for (std::size_t i : S) sum += knn_distance(X, i, k);
  return sum / static_cast<double>(S.size());
}

enum class AffinityVariant { arithmetic, harmonic };

// v_n(t) over a fixed sample. Holds the pairwise distances so that repeated
// evaluations (prior evaluation inside MCMC) cost O(n^2) exponentials only.
class AffinityStatistic {
 public:
  AffinityStatistic(std::shared_ptr<const Matrix> sq_dists, AffinityVariant variant)
      : d2_(std::move(sq_dists)), variant_(variant) {
    detail::require<InvalidInput>(d2_ && d2_->rows() >= 2, "affinity statistic needs n >= 2");
    const Eigen::Index n = d2_->rows();
    if (variant_ == AffinityVariant::arithmetic) {
      // strict upper triangle, column by column
      packed_.resize(n * (n - 1) / 2);
      Eigen::Index pos = 0;
      for (Eigen::Index j = 1; j < n; ++j) {
        packed_.segment(pos, j) = d2_->col(j).head(j);
        pos += j;
      }
    }
  }

  AffinityStatistic(const Eigen::Ref<const Matrix>& X, AffinityVariant variant)
      : AffinityStatistic(std::make_shared<const Matrix>(pairwise_sq_dists(X)), variant) {}

  double operator()(double t) const {
    detail::require(t > 0.0, "bandwidth must be positive");
    const double n = static_cast<double>(d2_->rows());
    if (variant_ == AffinityVariant::arithmetic) {
      const double s = SquaredExponential::profile_array(packed_.array() / t).sum();
      return 2.0 * s / (n * (n - 1.0));
    }
    // Per-row means of off-diagonal affinities, then their harmonic mean.
    const Matrix K = kernel_from_sq_dists(*d2_, t);
    const Vector row = (K.rowwise().sum().array() - K.diagonal().array()) / (n - 1.0);
    return n / row.cwiseInverse().sum();
  }

  AffinityVariant variant() const { return variant_; }
  std::size_t size() const { return static_cast<std::size_t>(d2_->rows()); }

 private:
  std::shared_ptr<const Matrix> d2_;
  AffinityVariant variant_;
  Vector packed_;
};

inline double kernel_affinity_stat(const Eigen::Ref<const Matrix>& X, double t) {
  detail::require<InvalidInput>(X.rows() >= 2, "affinity statistic needs n >= 2");
  detail::require(t > 0.0, "bandwidth must be positive");
  return AffinityStatistic(X, AffinityVariant::arithmetic)(t);
}

inline double harmonic_affinity_stat(const Eigen::Ref<const Matrix>& X, double t) {
  detail::require<InvalidInput>(X.rows() >= 2, "affinity statistic needs n >= 2");
  detail::require(t > 0.0, "bandwidth must be positive");
  return AffinityStatistic(X, AffinityVariant::harmonic)(t);
}

struct AffinityCurve {
  std::vector<double> bandwidths;
  std::vector<double> values;
};

inline AffinityCurve affinity_curve(const AffinityStatistic& stat, std::vector<double> grid) {
  for (std::size_t i = 1; i < grid.size(); ++i)
    detail::require(grid[i] > grid[i - 1], "bandwidth grid must be strictly ascending");
  AffinityCurve c{std::move(grid), {}};
  c.values.reserve(c.bandwidths.size());
  for (double t : c.bandwidths) c.values.push_back(stat(t));
  return c;
}

struct DimensionEstimate {
  int dimension = 1;
  double raw_ratio = 0.0;  // log 2 / (log R_k - log R_{ceil(k/2)}) before clamping
  std::size_t anchor = 0;
  std::size_t k = 0;
};

// Rounded log 2 / (log R_k(X_a) - log R_{ceil(k/2)}(X_a)) at a random anchor a,
// with k = ceil(sqrt n); the ratio is clamped to [1, D] before rounding.
inline DimensionEstimate estimate_dimension(const Eigen::Ref<const Matrix>& X, std::uint64_t seed) {
  const auto n = static_cast<std::size_t>(X.rows());
  detail::require<InvalidInput>(n >= 4, "dimension estimate needs n >= 4");
  DimensionEstimate est;
  est.k = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(n))));
  const std::size_t half = (est.k + 1) / 2;
  Rng rng(seed);
  est.anchor = std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
  const auto nb = detail::sorted_neighbors(X, est.anchor, est.k);
  const double rk = nb[est.k - 1].first;
  const double rh = nb[half - 1].first;
  if (rk == rh) throw DegenerateRatio();
  est.raw_ratio = std::log(2.0) / (std::log(rk) - std::log(rh));
  const double clamped = std::clamp(est.raw_ratio, 1.0, static_cast<double>(X.cols()));
  est.dimension = static_cast<int>(std::lround(clamped));
  return est;
}

struct MedianBandwidth {
  double value = 0.0;
  bool degenerate = false;  // every pair coincides
};

// Median of the n(n-1)/2 pairwise squared distances; mean of the central pair
// for an even count.
inline MedianBandwidth median_pairwise_sq_distance(const Matrix& sq_dists) {
  const Eigen::Index n = sq_dists.rows();
  detail::require<InvalidInput>(n >= 2, "median heuristic needs n >= 2");
  std::vector<double> v;
  v.reserve(static_cast<std::size_t>(n * (n - 1) / 2));
  for (Eigen::Index j = 1; j < n; ++j)
    for (Eigen::Index i = 0; i < j; ++i) v.push_back(sq_dists(i, j));
  const std::size_t m = v.size();
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(m / 2);
  std::nth_element(v.begin(), mid, v.end());
  double med = *mid;
  if (m % 2 == 0) med = 0.5 * (med + *std::max_element(v.begin(), mid));
  return {med, med == 0.0 && *std::max_element(v.begin(), v.end()) == 0.0};
}

struct BoxCountResult {
  std::vector<double> radii;
  std::vector<std::size_t> counts;
  double slope = 0.0;
  double intercept = 0.0;
};

// Counts occupied axis-aligned boxes of side 2r (infinity-norm balls of
// radius r) and regresses log N(r) on log(1/r). Points on the upper face of
// the unit cube are folded into the last box.
inline BoxCountResult box_counting_dimension(const Eigen::Ref<const Matrix>& X, std::vector<double> radii) {
  detail::require<InvalidInput>(X.rows() >= 1, "empty sample");
  detail::require<InvalidInput>(radii.size() >= 3, "box counting needs at least 3 radii");
  for (std::size_t i = 0; i < radii.size(); ++i) {
    detail::require(radii[i] > 0.0 && radii[i] < 1.0, "radii must lie in (0, 1)");
    if (i > 0) detail::require(radii[i] < radii[i - 1], "radii must be descending");
  }
  BoxCountResult res;
  res.radii = std::move(radii);
  std::vector<std::int64_t> key(static_cast<std::size_t>(X.cols()));
  for (double r : res.radii) {
    const double side = 2.0 * r;
    const auto last = static_cast<std::int64_t>(std::ceil(1.0 / side)) - 1;
    std::set<std::vector<std::int64_t>> boxes;
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
      for (Eigen::Index c = 0; c < X.cols(); ++c) {
        const double x = X(i, c);
        auto b = static_cast<std::int64_t>(std::floor(x / side));
        if (x <= 1.0) b = std::min(b, last);
        key[static_cast<std::size_t>(c)] = b;
      }
      boxes.insert(key);
    }
    res.counts.push_back(boxes.size());
  }
  // least squares of log N on log(1/r)
  const auto m = static_cast<double>(res.radii.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < res.radii.size(); ++i) {
    const double x = -std::log(res.radii[i]);
    const double y = std::log(static_cast<double>(res.counts[i]));
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  res.slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
  res.intercept = (sy - res.slope * sx) / m;
  return res;
}

}  // namespace ebgp
