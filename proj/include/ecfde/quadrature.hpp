#pragma once

#include <cmath>
#include <cstddef>
#include <numbers>
#include <vector>

namespace ecfde::quad {

//! Nodes and weights of an n-point Gauss-Legendre rule on [-1, 1].
struct Rule
{
  std::vector<double> nodes;
  std::vector<double> weights;
};

//! Computes the rule by Newton iteration on the Legendre polynomial P_n,
//! starting from the Tricomi approximation of each root.
inline Rule gauss_legendre(std::size_t n)
{
  Rule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  const std::size_t half = (n + 1) / 2;
  for (std::size_t i = 0; i < half; ++i) {
    double z = std::cos(std::numbers::pi * (static_cast<double>(i) + 0.75) /
                        (static_cast<double>(n) + 0.5));
    double pp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p1 = 1.0, p2 = 0.0;
      for (std::size_t j = 1; j <= n; ++j) {
        double p3 = p2;
        p2 = p1;
        p1 = ((2.0 * j - 1.0) * z * p2 - (j - 1.0) * p3) / static_cast<double>(j);
      }
      pp = static_cast<double>(n) * (z * p1 - p2) / (z * z - 1.0);
      double z1 = z;
      z = z1 - p1 / pp;
      if (std::abs(z - z1) < 1e-15)
        break;
    }
    double w = 2.0 / ((1.0 - z * z) * pp * pp);
    rule.nodes[i] = -z;
    rule.nodes[n - 1 - i] = z;
    rule.weights[i] = w;
    rule.weights[n - 1 - i] = w;
  }
  return rule;
}

//! Shared 64-point rule.
inline const Rule& gl64()
{
  static const Rule rule = gauss_legendre(64);
  return rule;
}

//! Composite Gauss-Legendre integral of f over [a, b] with `panels` equal
//! panels of the given rule.
template<class F>
auto integrate(F&& f, double a, double b, std::size_t panels = 1,
               const Rule& rule = gl64())
{
  using R = decltype(f(a));
  R total{};
  const double h = (b - a) / static_cast<double>(panels);
  for (std::size_t p = 0; p < panels; ++p) {
    const double lo = a + h * static_cast<double>(p);
    const double mid = lo + 0.5 * h;
    R panel{};
    for (std::size_t i = 0; i < rule.nodes.size(); ++i)
      panel += rule.weights[i] * f(mid + 0.5 * h * rule.nodes[i]);
    total += panel * (0.5 * h);
  }
  return total;
}

} // namespace ecfde::quad
