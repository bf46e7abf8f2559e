#pragma once

// Quadrature checks of the manifold integral operator G_eps, the RKHS-norm
// double integral, and the concentration bands of the averaged affinity and
// the k-th nearest-neighbor distance. One-parameter manifolds only.

#include <cmath>
#include <functional>
#include <numbers>
#include <string>
#include <vector>

#include "ebgp/error.hpp"
#include "ebgp/kernel_gp.hpp"
#include "ebgp/manifold_stats.hpp"

namespace ebgp {

// Curve phi: [a, b] -> R^D with speed |phi'(s)|; trapezoid nodes on the
// parameter interval (periodic curves drop the duplicated endpoint).
struct ParamManifold {
  std::function<Vector(double)> phi;
  std::function<double(double)> speed;
  double a = 0.0;
  double b = 1.0;
  bool periodic = false;
  std::size_t nodes = 1000;
  std::function<double(double)> density;  // w.r.t. arc length, as a function of s
  int d = 1;

  std::vector<double> node_params() const {
    detail::require(nodes >= 2 && b > a, "manifold quadrature needs >= 2 nodes on a nonempty interval");
    std::vector<double> s(nodes);
    const double h = periodic ? (b - a) / static_cast<double>(nodes) : (b - a) / static_cast<double>(nodes - 1);
    for (std::size_t i = 0; i < nodes; ++i) s[i] = a + h * static_cast<double>(i);
    return s;
  }

  // Volume-element weights matching node_params().
  std::vector<double> node_weights() const {
    const std::vector<double> s = node_params();
    const double h = periodic ? (b - a) / static_cast<double>(nodes) : (b - a) / static_cast<double>(nodes - 1);
    std::vector<double> w(nodes);
    for (std::size_t i = 0; i < nodes; ++i) w[i] = h * speed(s[i]);
    if (!periodic) {
      w.front() *= 0.5;
      w.back() *= 0.5;
    }
    return w;
  }

  // Largest arc-length gap between neighboring nodes (sampled speed).
  double max_spacing() const {
    const std::vector<double> s = node_params();
    const double h = periodic ? (b - a) / static_cast<double>(nodes) : (b - a) / static_cast<double>(nodes - 1);
    double m = 0.0;
    for (double x : s) m = std::max(m, h * speed(x));
    return m;
  }

  double volume() const {
    double v = 0.0;
    for (double w : node_weights()) v += w;
    return v;
  }

  Vector point(double s) const { return phi(s); }
};

// Circle of the given radius in the first two coordinates of R^D, centred at c
// (all coordinates), with uniform density 1 / (2 pi radius).
inline ParamManifold circle_manifold(double radius, std::size_t D = 2, double center = 0.0, std::size_t nodes = 4096) {
  detail::require(radius > 0.0 && D >= 2, "circle needs radius > 0 and D >= 2");
  ParamManifold m;
  m.phi = [radius, D, center](double s) {
    Vector x = Vector::Constant(static_cast<Eigen::Index>(D), center);
    x(0) += radius * std::cos(s);
    x(1) += radius * std::sin(s);
    return x;
  };
  m.speed = [radius](double) { return radius; };
  m.a = 0.0;
  m.b = 2.0 * std::numbers::pi;
  m.periodic = true;
  m.nodes = nodes;
  const double p = 1.0 / (2.0 * std::numbers::pi * radius);
  m.density = [p](double) { return p; };
  return m;
}

// Straight segment from the origin along the first axis.
inline ParamManifold segment_manifold(double length, std::size_t D = 1, std::size_t nodes = 4096) {
  detail::require(length > 0.0 && D >= 1, "segment needs length > 0 and D >= 1");
  ParamManifold m;
  m.phi = [D](double s) {
    Vector x = Vector::Zero(static_cast<Eigen::Index>(D));
    x(0) = s;
    return x;
  };
  m.speed = [](double) { return 1.0; };
  m.a = 0.0;
  m.b = length;
  m.nodes = nodes;
  m.density = [length](double) { return 1.0 / length; };
  return m;
}

// Node count needed for spacing <= sqrt(eps) / 10.
inline std::size_t required_nodes(const ParamManifold& m, double eps) {
  detail::require(eps > 0.0, "eps must be positive");
  const double target = std::sqrt(eps) / 10.0;
  const double ratio = m.max_spacing() / target;
  return std::max<std::size_t>(m.nodes, static_cast<std::size_t>(std::ceil(static_cast<double>(m.nodes) * ratio)) + 1);
}

inline ParamManifold with_resolution(ParamManifold m, double eps) {
  m.nodes = required_nodes(m, eps);
  return m;
}

namespace detail {

inline void check_resolution(const ParamManifold& m, double eps) {
  require(eps > 0.0, "eps must be positive");
  if (m.max_spacing() > std::sqrt(eps) / 10.0)
    throw InvalidParameter("quadrature too coarse for eps = " + std::to_string(eps) + "; need at least " +
                           std::to_string(required_nodes(m, eps)) + " nodes");
}

}  // namespace detail

// G_eps(f)(x) = (2 pi eps)^{-d/2} int exp(-|x - y|^2 / (2 eps)) f(y) dV(y);
// f is a function of the curve parameter.
template <class F>
double g_epsilon_apply(const ParamManifold& m, F&& f, const Eigen::Ref<const Vector>& x, double eps) {
  detail::check_resolution(m, eps);
  const std::vector<double> s = m.node_params();
  const std::vector<double> w = m.node_weights();
  double acc = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double r2 = (m.phi(s[i]) - x).squaredNorm();
    acc += w[i] * std::exp(-r2 / (2.0 * eps)) * f(s[i]);
  }
  return acc * std::pow(2.0 * std::numbers::pi * eps, -0.5 * m.d);
}

// int int exp(-|x - y|^2 / (2 eps)) g(x) g(y) dV dV.
template <class G>
double rkhs_norm_squared(const ParamManifold& m, G&& g, double eps) {
  detail::check_resolution(m, eps);
  const std::vector<double> s = m.node_params();
  const std::vector<double> w = m.node_weights();
  const auto N = static_cast<Eigen::Index>(s.size());
  Matrix P(N, m.phi(s[0]).size());
  Vector u(N);
  for (Eigen::Index i = 0; i < N; ++i) {
    P.row(i) = m.phi(s[static_cast<std::size_t>(i)]).transpose();
    u(i) = w[static_cast<std::size_t>(i)] * g(s[static_cast<std::size_t>(i)]);
  }
  double acc = 0.0;
  for (Eigen::Index j = 0; j < N; ++j) {
    if (u(j) == 0.0) continue;
    const Vector k = ((P.rowwise() - P.row(j)).rowwise().squaredNorm() / (-2.0 * eps)).array().exp();
    acc += u(j) * k.dot(u);
  }
  return std::max(acc, 0.0);
}

// Volume of the unit ball in R^d.
inline double unit_ball_volume(int d) {
  detail::require(d >= 1, "dimension must be positive");
  return std::pow(std::numbers::pi, 0.5 * d) / std::tgamma(0.5 * d + 1.0);
}

// ---------------------------------------------------------------------------
// Concentration bands

struct AffinityBandRow {
  double t = 0.0;
  double affinity = 0.0;
  double ratio = 0.0;  // affinity / t^{d/2}
  double lower = 0.0;  // (1/4) (2 pi)^{d/2} p
  double upper = 0.0;  // (7/4) (2 pi)^{d/2} p
  bool pass = false;
};

struct AffinityBandReport {
  std::vector<AffinityBandRow> rows;
  double t_min = 0.0;
  double t_max = 0.0;
  bool all_pass() const {
    for (const auto& r : rows)
      if (!r.pass) return false;
    return !rows.empty();
  }
};

// Requires every t in [n^{-2/d} (log n)^{3/d}, t0].
inline AffinityBandReport affinity_band_check(const Eigen::Ref<const Matrix>& X, double p, int d,
                                              const std::vector<double>& t_grid, double t0 = 0.01) {
  const auto n = static_cast<double>(X.rows());
  detail::require<InvalidInput>(X.rows() >= 2, "band check needs n >= 2");
  detail::require(p > 0.0 && d >= 1, "density and dimension must be positive");
  AffinityBandReport rep;
  rep.t_min = std::pow(n, -2.0 / d) * std::pow(std::log(n), 3.0 / d);
  rep.t_max = t0;
  for (double t : t_grid)
    detail::require(t >= rep.t_min && t <= rep.t_max, "bandwidth outside the band-check range");
  const AffinityStatistic stat(X, AffinityVariant::arithmetic);
  const double c = std::pow(2.0 * std::numbers::pi, 0.5 * d) * p;
  for (double t : t_grid) {
    AffinityBandRow r;
    r.t = t;
    r.affinity = stat(t);
    r.ratio = r.affinity / std::pow(t, 0.5 * d);
    r.lower = 0.25 * c;
    r.upper = 1.75 * c;
    r.pass = r.ratio >= r.lower && r.ratio <= r.upper;
    rep.rows.push_back(r);
  }
  return rep;
}

struct KnnBandReport {
  std::size_t k = 0;
  double center = 0.0;  // (gamma2 / (p nu_d))^{1/d} (log^2 n / n)^{1/d}
  double lower = 0.0;   // 0.9 center
  double upper = 0.0;   // 1.2 center
  std::vector<double> distances;
  std::vector<bool> pass;
  double pass_fraction = 0.0;
  bool small_n = false;  // n < 200: outside the regime, reported only
};

inline KnnBandReport knn_band_check(const Eigen::Ref<const Matrix>& X, double p, int d, double gamma2 = 0.25) {
  const auto n = static_cast<std::size_t>(X.rows());
  detail::require<InvalidInput>(n >= 2, "band check needs n >= 2");
  detail::require(p > 0.0 && d >= 1 && gamma2 > 0.0, "density, dimension and gamma2 must be positive");
  KnnBandReport rep;
  const double l = std::log(static_cast<double>(n));
  rep.k = std::clamp<std::size_t>(static_cast<std::size_t>(std::ceil(gamma2 * l * l)), 1, n - 1);
  rep.center = std::pow(gamma2 / (p * unit_ball_volume(d)), 1.0 / d) * std::pow(l * l / static_cast<double>(n), 1.0 / d);
  rep.lower = 0.9 * rep.center;
  rep.upper = 1.2 * rep.center;
  rep.small_n = n < 200;
  std::size_t ok = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = knn_distance(X, i, rep.k);
    const bool in = r >= rep.lower && r <= rep.upper;
    rep.distances.push_back(r);
    rep.pass.push_back(in);
    ok += in;
  }
  rep.pass_fraction = static_cast<double>(ok) / static_cast<double>(n);
  return rep;
}

}  // namespace ebgp
