#pragma once

#include <cmath>
#include <limits>
#include <vector>

#include "ebgp/error.hpp"

namespace ebgp {

namespace detail {

struct SimpsonState {
  int failures = 0;
};

template <class F>
double simpson_recurse(F& f, double a, double b, double fa, double fm, double fb, double whole, double tol,
                       int depth, SimpsonState& st) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m);
  const double rm = 0.5 * (m + b);
  const double flm = f(lm);
  const double frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double delta = left + right - whole;
  if (std::abs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
  if (depth <= 0) {
    ++st.failures;
    return left + right + delta / 15.0;
  }
  return simpson_recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1, st) +
         simpson_recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1, st);
}

}  // namespace detail

// Adaptive composite Simpson rule. The absolute tolerance is rel_tol times a
// coarse estimate of the integral's magnitude; throws NumericalFailure when a
// panel exhausts its recursion depth without meeting its share of it.
template <class F>
double adaptive_simpson(F&& f, double a, double b, double rel_tol = 1e-6, int panels = 64,
                        int max_depth = 40) {
  detail::require(b > a, "integration interval must be nonempty");
  detail::require(panels >= 1, "need at least one panel");
  const double h = (b - a) / panels;
  std::vector<double> x(2 * panels + 1), fx(2 * panels + 1);
  for (int i = 0; i <= 2 * panels; ++i) {
    x[i] = a + 0.5 * h * i;
    fx[i] = f(x[i]);
    if (!std::isfinite(fx[i])) throw NumericalFailure("quadrature integrand is not finite");
  }
  double scale = 0.0;
  for (int p = 0; p < panels; ++p)
    scale += h / 6.0 * (std::abs(fx[2 * p]) + 4.0 * std::abs(fx[2 * p + 1]) + std::abs(fx[2 * p + 2]));
  if (scale == 0.0) return 0.0;
  const double tol = rel_tol * scale / panels;
  detail::SimpsonState st;
  double total = 0.0;
  for (int p = 0; p < panels; ++p) {
    const double whole = h / 6.0 * (fx[2 * p] + 4.0 * fx[2 * p + 1] + fx[2 * p + 2]);
    total += detail::simpson_recurse(f, x[2 * p], x[2 * p + 2], fx[2 * p], fx[2 * p + 1], fx[2 * p + 2],
                                     whole, tol, max_depth, st);
  }
  if (st.failures > 0) throw NumericalFailure("adaptive Simpson did not converge");
  return total;
}

// log of the integral of exp(log_f(t)) over [lower, upper], integrating in
// log t with a max shift so that sharply peaked densities do not overflow.
template <class LogF>
double log_integral_exp(LogF&& log_f, double lower, double upper, double rel_tol = 1e-6) {
  detail::require(lower > 0.0 && upper > lower, "log-space quadrature needs 0 < lower < upper");
  const double a = std::log(lower);
  const double b = std::log(upper);
  double shift = -std::numeric_limits<double>::infinity();
  constexpr int kProbe = 2048;
  for (int i = 0; i <= kProbe; ++i) {
    const double s = a + (b - a) * i / kProbe;
    shift = std::max(shift, log_f(std::exp(s)) + s);
  }
  if (!std::isfinite(shift)) throw NumericalFailure("density vanishes on the integration range");
  auto g = [&](double s) {
    const double v = log_f(std::exp(s)) + s - shift;
    return v == -std::numeric_limits<double>::infinity() ? 0.0 : std::exp(v);
  };
  return shift + std::log(adaptive_simpson(g, a, b, rel_tol, 256));
}

}  // namespace ebgp
