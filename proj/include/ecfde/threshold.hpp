#pragma once

#include "error.hpp"
#include "fourier.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace ecfde {

enum class ThresholdKind
{
  SqrtLog,   //!< (1 + kappa sqrt(log n)) / sqrt(n)
  Log,       //!< (1 + kappa log n) / sqrt(n), for tau-dependent data
  UDependent //!< kappa sqrt(log(h(u) n) / n), h(u) = prod_k (1 + |u_k|)
};

inline const char* to_string(ThresholdKind kind)
{
  switch (kind) {
    case ThresholdKind::SqrtLog: return "sqrtlog";
    case ThresholdKind::Log: return "log";
    case ThresholdKind::UDependent: return "udependent";
  }
  return "?";
}

inline ThresholdKind parse_threshold_kind(const std::string& s)
{
  if (s == "sqrtlog" || s == "SqrtLog")
    return ThresholdKind::SqrtLog;
  if (s == "log" || s == "Log")
    return ThresholdKind::Log;
  if (s == "udependent" || s == "UDependent")
    return ThresholdKind::UDependent;
  throw invalid_argument("unknown threshold rule '" + s + "'");
}

struct ThresholdRule
{
  ThresholdKind kind = ThresholdKind::SqrtLog;
  double kappa = 1.0;

  //! Modulus below which an ECF value is discarded at frequency u.
  double level(std::size_t n, std::span<const double> u = {}) const
  {
    require(n >= 2, "threshold: sample count must be at least 2");
    require(kappa >= 0.0, "threshold: kappa must be nonnegative");
    const double nn = static_cast<double>(n);
    const double log_n = std::log(nn);
    switch (kind) {
      case ThresholdKind::SqrtLog: return (1.0 + kappa * std::sqrt(log_n)) / std::sqrt(nn);
      case ThresholdKind::Log: return (1.0 + kappa * log_n) / std::sqrt(nn);
      case ThresholdKind::UDependent: {
        double h = 1.0;
        for (double v : u)
          h *= 1.0 + std::abs(v);
        return kappa * std::sqrt(std::log(h * nn) / nn);
      }
    }
    return 0.0;
  }
};

//! Boolean lattice on a frequency grid; bits are stored one per byte.
struct BinaryMask
{
  FrequencyGrid grid;
  std::vector<std::uint8_t> bits;

  BinaryMask() = default;
  BinaryMask(FrequencyGrid g, std::vector<std::uint8_t> b)
    : grid(std::move(g))
    , bits(std::move(b))
  {
    require(bits.size() == grid.size(), "BinaryMask: bit count differs from node count");
  }

  std::size_t size() const { return bits.size(); }
  bool operator[](std::size_t i) const { return bits[i] != 0; }

  std::size_t count() const
  {
    std::size_t c = 0;
    for (auto b : bits)
      c += b != 0;
    return c;
  }
};

namespace detail {

inline std::vector<std::uint8_t> mask_bits_at(const std::vector<double>& modulus, double level)
{
  std::vector<std::uint8_t> bits(modulus.size());
  for (std::size_t i = 0; i < modulus.size(); ++i)
    bits[i] = modulus[i] >= level;
  return bits;
}

inline std::vector<double> modulus_of(const GridField& field)
{
  std::vector<double> m(field.size());
  for (std::size_t i = 0; i < m.size(); ++i)
    m[i] = std::abs(field.values[i]);
  return m;
}

} // namespace detail

//! Nodes whose modulus reaches the rule's level (inclusive comparison).
inline BinaryMask threshold_mask(const GridField& field, const ThresholdRule& rule, std::size_t n)
{
  require(n >= 2, "threshold_mask: sample count must be at least 2");
  const FrequencyGrid& g = field.grid;
  std::vector<std::uint8_t> bits(g.size());
  if (rule.kind == ThresholdKind::UDependent) {
    for (std::size_t i = 0; i < g.size(); ++i) {
      const auto u = g.node(i);
      bits[i] = std::abs(field.values[i]) >= rule.level(n, std::span<const double>(u.data(), g.dim()));
    }
  } else {
    const double level = rule.level(n);
    for (std::size_t i = 0; i < g.size(); ++i)
      bits[i] = std::abs(field.values[i]) >= level;
  }
  return BinaryMask(g, std::move(bits));
}

//! Zeroes the field outside the mask.
inline GridField apply_threshold(const GridField& field, const BinaryMask& mask)
{
  require(field.grid == mask.grid, "apply_threshold: grid mismatch");
  std::vector<cplx> v(field.size());
  for (std::size_t i = 0; i < v.size(); ++i)
    v[i] = mask.bits[i] ? field.values[i] : cplx{};
  return GridField(field.grid, std::move(v));
}

namespace detail {

// V - E + F of the union of closed unit cells; rows x cols cells.
inline long euler_2d(const std::uint8_t* bits, std::size_t rows, std::size_t cols)
{
  auto cell = [&](std::ptrdiff_t r, std::ptrdiff_t c) -> bool {
    if (r < 0 || c < 0 || r >= static_cast<std::ptrdiff_t>(rows) || c >= static_cast<std::ptrdiff_t>(cols))
      return false;
    return bits[static_cast<std::size_t>(r) * cols + static_cast<std::size_t>(c)] != 0;
  };
  long v = 0, e = 0, f = 0;
  for (std::ptrdiff_t a = 0; a <= static_cast<std::ptrdiff_t>(rows); ++a)
    for (std::ptrdiff_t b = 0; b <= static_cast<std::ptrdiff_t>(cols); ++b) {
      const bool nw = cell(a - 1, b - 1), ne = cell(a - 1, b);
      const bool sw = cell(a, b - 1), se = cell(a, b);
      v += nw || ne || sw || se;
      e += ne || se; // edge (a,b)-(a,b+1)
      e += sw || se; // edge (a,b)-(a+1,b)
      f += se;
    }
  return v - e + f;
}

inline long euler_1d(const std::uint8_t* bits, std::size_t count)
{
  long v = 0, e = 0;
  for (std::size_t a = 0; a <= count; ++a) {
    const bool left = a > 0 && bits[a - 1];
    const bool right = a < count && bits[a];
    v += left || right;
    e += right;
  }
  return v - e;
}

} // namespace detail

//! Euler characteristic of the union of closed cells centred on true nodes.
//! Dimension 3 is not supported.
inline long euler_characteristic(const BinaryMask& mask)
{
  const auto& p = mask.grid.points();
  switch (mask.grid.dim()) {
    case 1: return detail::euler_1d(mask.bits.data(), p[0]);
    case 2: return detail::euler_2d(mask.bits.data(), p[0], p[1]);
    default: throw invalid_argument("euler_characteristic: only dimensions 1 and 2 are supported");
  }
}

enum class StabilizationStep
{
  Index, //!< compare chi at consecutive scan indices
  Unit   //!< compare chi at kappa and kappa - 1
};

inline StabilizationStep parse_stabilization_step(const std::string& s)
{
  if (s == "index")
    return StabilizationStep::Index;
  if (s == "unit")
    return StabilizationStep::Unit;
  throw invalid_argument("unknown stabilization step '" + s + "'");
}

inline const char* to_string(StabilizationStep s)
{
  return s == StabilizationStep::Index ? "index" : "unit";
}

struct KappaSelection
{
  double delta = 0.05;
  double kappa_max = 5.0;
  int window = 1;
  double selected_kappa = 0.0;
  bool stabilized = false;
  std::vector<std::pair<double, long>> chi_curve;
};

//! Index k* of the first k >= window * lag with
//! chi[k] == chi[k - lag] == ... == chi[k - window * lag], or -1.
inline long first_stable_index(std::span<const long> chi, int window, std::size_t lag = 1)
{
  require(window >= 1, "select_kappa: window must be at least 1");
  require(lag >= 1, "select_kappa: lag must be at least 1");
  const std::size_t span = static_cast<std::size_t>(window) * lag;
  for (std::size_t k = span; k < chi.size(); ++k) {
    bool equal = true;
    for (int w = 1; w <= window && equal; ++w)
      equal = chi[k - static_cast<std::size_t>(w) * lag] == chi[k];
    if (equal)
      return static_cast<long>(k);
  }
  return -1;
}

//! Applies the stopping rule to a precomputed chi sequence, chi[k] at kappa = k * delta.
inline KappaSelection select_from_curve(std::span<const long> chi, double delta, double kappa_max,
                                        int window = 1,
                                        StabilizationStep step = StabilizationStep::Index)
{
  require(delta > 0.0 && std::isfinite(delta), "select_kappa: delta must be positive");
  require(kappa_max >= delta, "select_kappa: kappa_max must be at least delta");
  require(window >= 1, "select_kappa: window must be at least 1");
  KappaSelection sel;
  sel.delta = delta;
  sel.kappa_max = kappa_max;
  sel.window = window;
  for (std::size_t k = 0; k < chi.size(); ++k)
    sel.chi_curve.emplace_back(static_cast<double>(k) * delta, chi[k]);
  const std::size_t lag = step == StabilizationStep::Index
                            ? 1
                            : std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(1.0 / delta)));
  const long k = first_stable_index(chi, window, lag);
  if (k >= 0) {
    sel.selected_kappa = static_cast<double>(k) * delta;
    sel.stabilized = true;
  } else {
    sel.selected_kappa = kappa_max;
    sel.stabilized = false;
  }
  return sel;
}

//! Euler characteristic of the excursion set at kappa = k * delta for
//! k = 0 .. floor(kappa_max / delta).
inline std::vector<long> euler_curve(const GridField& field, std::size_t n, ThresholdKind kind,
                                     double delta, double kappa_max)
{
  require(kind != ThresholdKind::UDependent, "select_kappa: rule must be sqrtlog or log");
  require(delta > 0.0 && std::isfinite(delta), "select_kappa: delta must be positive");
  require(kappa_max >= delta, "select_kappa: kappa_max must be at least delta");
  require(n >= 2, "select_kappa: sample count must be at least 2");
  require(field.grid.dim() <= 2, "euler_characteristic: only dimensions 1 and 2 are supported");
  const auto steps = static_cast<std::size_t>(std::floor(kappa_max / delta + 1e-9)) + 1;
  const std::vector<double> modulus = detail::modulus_of(field);
  std::vector<long> chi(steps);
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t k = 0; k < static_cast<std::ptrdiff_t>(steps); ++k) {
    const ThresholdRule rule{ kind, static_cast<double>(k) * delta };
    const BinaryMask mask(field.grid, detail::mask_bits_at(modulus, rule.level(n)));
    chi[static_cast<std::size_t>(k)] = euler_characteristic(mask);
  }
  return chi;
}

//! Scans kappa over {k delta} and returns the first value where the Euler
//! characteristic of the excursion set stops changing. If it never does,
//! kappa_max is returned with `stabilized == false`.
inline KappaSelection select_kappa(const GridField& field, std::size_t n,
                                   ThresholdKind kind = ThresholdKind::SqrtLog, double delta = 0.05,
                                   double kappa_max = 5.0, int window = 1,
                                   StabilizationStep step = StabilizationStep::Index)
{
  require(window >= 1, "select_kappa: window must be at least 1");
  const auto chi = euler_curve(field, n, kind, delta, kappa_max);
  return select_from_curve(chi, delta, kappa_max, window, step);
}

//! Plain PBM (P1). For d = 2 the image has points[0] rows and points[1]
//! columns in storage order; d = 1 gives a single row.
inline void write_mask_pbm(std::ostream& os, const BinaryMask& mask)
{
  const auto& p = mask.grid.points();
  std::size_t rows = 1, cols = p[0];
  if (mask.grid.dim() == 2) {
    rows = p[0];
    cols = p[1];
  } else {
    require(mask.grid.dim() == 1, "dump-mask: only dimensions 1 and 2 can be written as PBM");
  }
  os << "P1\n" << cols << ' ' << rows << '\n';
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      os << (mask.bits[r * cols + c] ? '1' : '0');
      os << (c + 1 < cols ? ' ' : '\n');
    }
  }
}

} // namespace ecfde
