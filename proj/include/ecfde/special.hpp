#pragma once

#include "error.hpp"

#include <boost/math/special_functions/erf.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace ecfde::special {

namespace detail {

// Series expansion of P(a, x), convergent for x < a + 1.
inline double gamma_p_series(double a, double x)
{
  double ap = a;
  double sum = 1.0 / a;
  double del = sum;
  for (int n = 0; n < 1000; ++n) {
    ap += 1.0;
    del *= x / ap;
    sum += del;
    if (std::abs(del) < std::abs(sum) * 1e-16)
      break;
  }
  return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// Continued fraction for Q(a, x) by the modified Lentz method, x >= a + 1.
inline double gamma_q_fraction(double a, double x)
{
  constexpr double tiny = 1e-300;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < 1000; ++i) {
    double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < tiny)
      d = tiny;
    c = b + an / c;
    if (std::abs(c) < tiny)
      c = tiny;
    d = 1.0 / d;
    double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < 1e-16)
      break;
  }
  return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

} // namespace detail

//! Regularized lower incomplete gamma function P(a, x).
inline double gamma_p(double a, double x)
{
  require(a > 0.0, "gamma_p: shape must be positive");
  if (x <= 0.0)
    return 0.0;
  if (x < a + 1.0)
    return detail::gamma_p_series(a, x);
  return 1.0 - detail::gamma_q_fraction(a, x);
}

//! Regularized upper incomplete gamma function Q(a, x) = 1 - P(a, x).
inline double gamma_q(double a, double x)
{
  require(a > 0.0, "gamma_q: shape must be positive");
  if (x <= 0.0)
    return 1.0;
  if (x < a + 1.0)
    return 1.0 - detail::gamma_p_series(a, x);
  return detail::gamma_q_fraction(a, x);
}

//! Inverse of P(a, .) at probability p in (0, 1), unit scale.
//!
//! Newton steps on P(a, x) - p are kept inside a shrinking bisection bracket,
//! so the iteration is monotone-safe even where the density is tiny.
inline double gamma_p_inverse(double a, double p)
{
  require(a > 0.0, "gamma_p_inverse: shape must be positive");
  require(p > 0.0 && p < 1.0, "gamma_p_inverse: probability must lie in (0, 1)");

  // Wilson-Hilferty starting point.
  const double z = -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * p);
  const double c = 1.0 / (9.0 * a);
  double x = a * std::pow(std::max(1.0 - c + z * std::sqrt(c), 1e-3), 3.0);
  if (!(x > 0.0) || !std::isfinite(x))
    x = a;

  double lo = 0.0;
  double hi = std::max(2.0 * x, a + 50.0 * std::sqrt(a) + 50.0);
  while (gamma_p(a, hi) < p)
    hi *= 2.0;
  x = std::clamp(x, lo, hi);

  // In the upper half the residual is taken on Q, which keeps its relative
  // accuracy where P rounds to 1.
  const bool upper = p > 0.5;
  const double q = 1.0 - p;
  const double log_norm = std::lgamma(a);
  for (int iter = 0; iter < 200; ++iter) {
    const double f = upper ? q - gamma_q(a, x) : gamma_p(a, x) - p;
    if (f < 0.0)
      lo = x;
    else
      hi = x;
    const double density = std::exp((a - 1.0) * std::log(x) - x - log_norm);
    double next = (density > 0.0 && std::isfinite(density)) ? x - f / density
                                                              : 0.5 * (lo + hi);
    if (!(next > lo && next < hi))
      next = 0.5 * (lo + hi);
    if (std::abs(next - x) <= 1e-14 * std::max(1.0, x) || hi - lo <= 1e-15 * std::max(1.0, hi))
      return next;
    x = next;
  }
  return x;
}

inline double normal_cdf(double z)
{
  return 0.5 * std::erfc(-z / std::numbers::sqrt2);
}

inline double normal_quantile(double p)
{
  require(p > 0.0 && p < 1.0, "normal_quantile: probability must lie in (0, 1)");
  return -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * p);
}

} // namespace ecfde::special
