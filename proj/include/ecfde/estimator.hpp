#pragma once

#include "error.hpp"
#include "fourier.hpp"
#include "samples.hpp"
#include "targets.hpp"
#include "threshold.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace ecfde {

enum class DomainKind
{
  FullBox,     //!< [-n, n]^d
  HyperbolicDn //!< [-n, n]^d intersected with |u_1 ... u_d| <= n
};

inline DomainKind parse_domain_kind(const std::string& s)
{
  if (s == "full" || s == "FullBox")
    return DomainKind::FullBox;
  if (s == "hyperbolic" || s == "HyperbolicDn")
    return DomainKind::HyperbolicDn;
  throw invalid_argument("unknown integration domain '" + s + "'");
}

inline const char* to_string(DomainKind k)
{
  return k == DomainKind::FullBox ? "full" : "hyperbolic";
}

struct IntegrationDomain
{
  DomainKind kind = DomainKind::FullBox;
  double n = 0.0;

  bool contains(std::span<const double> u) const
  {
    double prod = 1.0;
    for (double v : u) {
      if (std::abs(v) > n)
        return false;
      prod *= std::abs(v);
    }
    return kind == DomainKind::FullBox || prod <= n;
  }
};

//! Regular spatial lattice, `points[k]` nodes from lo[k] to hi[k] inclusive.
struct SpatialGrid
{
  std::vector<double> lo, hi;
  std::vector<std::size_t> points;

  SpatialGrid() = default;
  SpatialGrid(std::vector<double> lo_, std::vector<double> hi_, std::vector<std::size_t> points_)
    : lo(std::move(lo_))
    , hi(std::move(hi_))
    , points(std::move(points_))
  {
    require(lo.size() == hi.size() && lo.size() == points.size() && !lo.empty() && lo.size() <= 3,
            "SpatialGrid: inconsistent dimensions");
    for (std::size_t k = 0; k < lo.size(); ++k) {
      require(points[k] >= 1, "SpatialGrid: at least one point per axis");
      require(hi[k] >= lo[k], "SpatialGrid: hi must not be below lo");
    }
  }

  std::size_t dim() const { return lo.size(); }

  std::size_t size() const
  {
    std::size_t s = 1;
    for (auto p : points)
      s *= p;
    return s;
  }

  double step(std::size_t k) const
  {
    return points[k] > 1 ? (hi[k] - lo[k]) / static_cast<double>(points[k] - 1) : 0.0;
  }

  double coordinate(std::size_t k, std::size_t j) const
  {
    return lo[k] + static_cast<double>(j) * step(k);
  }

  std::array<double, 3> node(std::size_t flat) const
  {
    std::array<double, 3> x{};
    for (std::size_t k = dim(); k-- > 0;) {
      x[k] = coordinate(k, flat % points[k]);
      flat /= points[k];
    }
    return x;
  }

  double cell_volume() const
  {
    double v = 1.0;
    for (std::size_t k = 0; k < dim(); ++k)
      v *= step(k);
    return v;
  }
};

//! Plotting lattice over the model's default box: 512 nodes for d = 1,
//! 201 x 201 for d = 2, 41^3 for d = 3.
inline SpatialGrid default_spatial_grid(const Box& box)
{
  const std::size_t d = box.lo.size();
  const std::size_t m = d == 1 ? 512 : (d == 2 ? 201 : 41);
  return SpatialGrid(box.lo, box.hi, std::vector<std::size_t>(d, m));
}

//! Bounding box of the observations padded by 10% on each side.
inline Box sample_box(const SampleSet& samples)
{
  const std::size_t d = samples.dim();
  Box b{ std::vector<double>(d, 0.0), std::vector<double>(d, 0.0) };
  for (std::size_t k = 0; k < d; ++k) {
    double lo = samples(0, k), hi = lo;
    for (std::size_t j = 1; j < samples.size(); ++j) {
      lo = std::min(lo, samples(j, k));
      hi = std::max(hi, samples(j, k));
    }
    const double pad = 0.1 * std::max(hi - lo, 1e-3);
    b.lo[k] = lo - pad;
    b.hi[k] = hi + pad;
  }
  return b;
}

struct DensityEstimate
{
  SpatialGrid x_grid;
  std::vector<double> values;
};

namespace detail {

inline void check_domain(const FrequencyGrid& g, const IntegrationDomain& domain)
{
  for (double e : g.extent())
    require(domain.n >= e, "invert_to_density: domain n smaller than grid extent");
}

// phi_tilde restricted to the domain, as a dense row-major tensor.
inline std::vector<cplx> restrict_to_domain(const GridField& field, const IntegrationDomain& domain)
{
  const FrequencyGrid& g = field.grid;
  std::vector<cplx> v = field.values;
  if (domain.kind == DomainKind::HyperbolicDn) {
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (v[i] == cplx{})
        continue;
      const auto u = g.node(i);
      if (!domain.contains(std::span<const double>(u.data(), g.dim())))
        v[i] = cplx{};
    }
  }
  return v;
}

} // namespace detail

//! Fourier inversion of a thresholded characteristic function,
//!   f(x) = (2 pi)^-d sum_u exp(-i <u, x>) phi(u) prod_k du_k,
//! over the nodes of the domain. The real part is returned, clipped at zero
//! unless `clip` is false.
//!
//! The sum is separable on a regular spatial lattice, so it is carried out
//! one axis at a time as dense matrix products: the result equals the direct
//! masked sum up to rounding.
inline DensityEstimate invert_to_density(const GridField& field_tilde, const IntegrationDomain& domain,
                                         const SpatialGrid& x_grid, bool clip = true)
{
  using CMatrix = Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  const FrequencyGrid& g = field_tilde.grid;
  const std::size_t d = g.dim();
  require(x_grid.dim() == d, "invert_to_density: dimension mismatch");
  detail::check_domain(g, domain);

  std::vector<cplx> tensor = detail::restrict_to_domain(field_tilde, domain);
  std::vector<std::size_t> shape = g.points();

  // Contract the last axis first; the tensor keeps shape (pre, axis, post).
  for (std::size_t axis = d; axis-- > 0;) {
    const std::size_t M = g.points()[axis];
    const std::size_t K = x_grid.points[axis];
    CMatrix phase(K, M);
    for (std::size_t a = 0; a < K; ++a) {
      const double x = x_grid.coordinate(axis, a);
      for (std::size_t j = 0; j < M; ++j)
        phase(a, j) = std::polar(1.0, -g.coordinate(axis, j) * x);
    }
    std::size_t pre = 1, post = 1;
    for (std::size_t k = 0; k < axis; ++k)
      pre *= shape[k];
    for (std::size_t k = axis + 1; k < d; ++k)
      post *= shape[k];
    std::vector<cplx> next(pre * K * post);
    for (std::size_t p = 0; p < pre; ++p) {
      Eigen::Map<const CMatrix> in(tensor.data() + p * M * post, static_cast<Eigen::Index>(M),
                                   static_cast<Eigen::Index>(post));
      Eigen::Map<CMatrix> out(next.data() + p * K * post, static_cast<Eigen::Index>(K),
                              static_cast<Eigen::Index>(post));
      out.noalias() = phase * in;
    }
    tensor = std::move(next);
    shape[axis] = K;
  }

  const double scale = g.cell_volume() / std::pow(2.0 * std::numbers::pi, static_cast<double>(d));
  DensityEstimate est{ x_grid, std::vector<double>(tensor.size()) };
  for (std::size_t i = 0; i < tensor.size(); ++i) {
    const double v = scale * tensor[i].real();
    est.values[i] = clip ? std::max(0.0, v) : v;
  }
  return est;
}

//! Direct masked Riemann sum at one point (unclipped real part).
inline double invert_at(const GridField& field_tilde, const IntegrationDomain& domain,
                        std::span<const double> x)
{
  const FrequencyGrid& g = field_tilde.grid;
  const std::size_t d = g.dim();
  require(x.size() == d, "invert_at: dimension mismatch");
  detail::check_domain(g, domain);
  double acc = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const cplx v = field_tilde.values[i];
    if (v == cplx{})
      continue;
    const auto u = g.node(i);
    if (!domain.contains(std::span<const double>(u.data(), d)))
      continue;
    double arg = 0.0;
    for (std::size_t k = 0; k < d; ++k)
      arg += u[k] * x[k];
    acc += v.real() * std::cos(arg) + v.imag() * std::sin(arg);
  }
  return acc * g.cell_volume() / std::pow(2.0 * std::numbers::pi, static_cast<double>(d));
}

inline void write_density_csv(std::ostream& os, const DensityEstimate& est)
{
  const std::size_t d = est.x_grid.dim();
  for (std::size_t k = 0; k < d; ++k)
    os << "x_" << (k + 1) << ',';
  os << "fhat\n";
  os.precision(12);
  for (std::size_t i = 0; i < est.values.size(); ++i) {
    const auto x = est.x_grid.node(i);
    for (std::size_t k = 0; k < d; ++k)
      os << x[k] << ',';
    os << est.values[i] << '\n';
  }
}

//! Lebesgue volume of [-n, n]^d intersected with { |u_1 ... u_d| <= n }.
//! The exact value is 2^d n sum_{k<d} ((d-1) log n)^k / k!; the asymptotic
//! form keeps the leading term 2^d (d-1)^(d-1) / (d-1)! n (log n)^(d-1).
inline double dn_volume(double n, int d, bool asymptotic = false)
{
  require(d == 2 || d == 3, "dn_volume: dimension must be 2 or 3");
  require(n > 1.0 && std::isfinite(n), "dn_volume: n must exceed 1");
  const double L = std::log(n);
  const double c = std::pow(2.0, d);
  if (asymptotic)
    return d == 2 ? c * n * L : c * 4.0 / 2.0 * n * L * L;
  return d == 2 ? c * n * (1.0 + L) : c * n * (1.0 + 2.0 * L + 2.0 * L * L);
}

struct RiskResult
{
  double risk = 0.0;
  double norm_f_sq = 0.0;
  double normalized_risk = 0.0;
  double tail_correction = 0.0;
  double tail_bound = 0.0;
  bool coarse_grid = false;
};

//! Squared L2 distance between the estimate and the model density, computed
//! in frequency space by Parseval:
//!   risk = (2 pi)^-d [ sum |phi_tilde 1_D - phi|^2 prod du + T ],
//! where T is the energy of phi outside the grid. When the model's total
//! energy is known exactly, T is that energy minus the grid sum of |phi|^2
//! (capped by the model's analytic tail bound); otherwise the bound itself is
//! used. `norm_f_sq` is the same expression with phi_tilde = 0.
//! `coarse_grid` flags a spacing too large to resolve the model's plotting
//! box without aliasing.
inline RiskResult l2_risk_fourier(const GridField& field_tilde, const TargetModel& model,
                                  const IntegrationDomain& domain)
{
  const FrequencyGrid& g = field_tilde.grid;
  const std::size_t d = g.dim();
  require(model.dim() == d, "l2_risk_fourier: dimension mismatch");
  const GridField phi = cf_evaluate(model, g);
  const std::vector<cplx> tilde = detail::restrict_to_domain(field_tilde, domain);

  double err = 0.0, norm = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    err += std::norm(tilde[i] - phi.values[i]);
    norm += std::norm(phi.values[i]);
  }
  const double h = g.cell_volume();
  RiskResult r;
  r.tail_bound = model.tail_energy(g.cell_extent());
  r.tail_correction = model.energy_exact()
                        ? std::clamp(model.energy() - norm * h, 0.0, r.tail_bound)
                        : r.tail_bound;
  const double scale = 1.0 / std::pow(2.0 * std::numbers::pi, static_cast<double>(d));
  r.risk = scale * (err * h + r.tail_correction);
  r.norm_f_sq = scale * (norm * h + r.tail_correction);
  r.normalized_risk = r.risk / r.norm_f_sq;
  const Box box = model.plot_box();
  for (std::size_t k = 0; k < d; ++k) {
    const double half_width = 0.5 * (box.hi[k] - box.lo[k]);
    if (g.spacing()[k] > std::numbers::pi / half_width)
      r.coarse_grid = true;
  }
  return r;
}

//! Spatial lattice covering one period 2 pi / du_k of the inverse transform
//! on each axis, centred on the model's plotting box, with `factor` nodes per
//! frequency node. The upper end is left open so the lattice tiles the period.
inline SpatialGrid period_grid(const FrequencyGrid& g, const Box& box, std::size_t factor = 2)
{
  const std::size_t d = g.dim();
  std::vector<double> lo(d), hi(d);
  std::vector<std::size_t> pts(d);
  for (std::size_t k = 0; k < d; ++k) {
    const double period = 2.0 * std::numbers::pi / g.spacing()[k];
    const double centre = 0.5 * (box.lo[k] + box.hi[k]);
    pts[k] = factor * g.points()[k];
    lo[k] = centre - 0.5 * period;
    hi[k] = lo[k] + period * static_cast<double>(pts[k] - 1) / static_cast<double>(pts[k]);
  }
  return SpatialGrid(lo, hi, pts);
}

//! Riemann sum of (f_hat - f)^2 over `x_grid`, normalized by the exact
//! squared norm of f when the model's energy is exact (otherwise by the
//! Riemann sum of f^2). With `clip` the positive part of the estimate is used.
inline RiskResult l2_risk_spatial(const GridField& field_tilde, const TargetModel& model,
                                  const IntegrationDomain& domain, const SpatialGrid& x_grid,
                                  bool clip)
{
  const std::size_t d = x_grid.dim();
  require(model.dim() == d, "l2_risk_spatial: dimension mismatch");
  const DensityEstimate est = invert_to_density(field_tilde, domain, x_grid, clip);
  double err = 0.0, norm = 0.0;
  for (std::size_t i = 0; i < x_grid.size(); ++i) {
    const auto x = x_grid.node(i);
    const double f = model.density(std::span<const double>(x.data(), d));
    err += (est.values[i] - f) * (est.values[i] - f);
    norm += f * f;
  }
  const double h = x_grid.cell_volume();
  RiskResult r;
  r.risk = err * h;
  r.norm_f_sq = model.energy_exact()
                  ? model.energy() / std::pow(2.0 * std::numbers::pi, static_cast<double>(d))
                  : norm * h;
  r.normalized_risk = r.risk / r.norm_f_sq;
  return r;
}

struct Clearance
{
  bool clear = true;
  double max_boundary_modulus = 0.0;
};

//! Whether the mask avoids the outermost shell of its grid. When `field` is
//! given, also reports the largest modulus on that shell.
inline Clearance boundary_clearance(const BinaryMask& mask, const GridField* field = nullptr)
{
  const FrequencyGrid& g = mask.grid;
  Clearance c;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const auto idx = g.unflatten(i);
    bool shell = false;
    for (std::size_t k = 0; k < g.dim(); ++k)
      shell = shell || idx[k] == 0 || idx[k] + 1 == g.points()[k];
    if (!shell)
      continue;
    if (mask.bits[i])
      c.clear = false;
    if (field != nullptr)
      c.max_boundary_modulus = std::max(c.max_boundary_modulus, std::abs(field->values[i]));
  }
  return c;
}

struct SobolevSpec
{
  std::vector<double> s;
  double L = 1.0;
  std::optional<SmallMatrix> A;
};

struct SobolevRate
{
  double s_bar = 0.0;
  std::vector<double> m_star;
  double rate_exponent = 0.0;
  double rate_value = 0.0;
};

//! Harmonic aggregate smoothness 1/s_bar = sum 1/s_k, the balancing cutoffs
//! m_k = (n / log n)^(s_bar / (s_k (2 s_bar + 1))) and the resulting rate
//! (n / log n)^(-2 s_bar / (2 s_bar + 1)).
inline SobolevRate sobolev_rate(const SobolevSpec& spec, double n)
{
  require(!spec.s.empty() && spec.s.size() <= 3, "sobolev_rate: 1 to 3 smoothness exponents");
  require(n >= 2.0, "sobolev_rate: n must be at least 2");
  double inv = 0.0;
  for (double sk : spec.s) {
    require(sk > 0.0 && std::isfinite(sk), "sobolev_rate: smoothness exponents must be positive");
    inv += 1.0 / sk;
  }
  if (spec.A) {
    require(spec.A->rows() == static_cast<Eigen::Index>(spec.s.size()),
            "sobolev_rate: matrix size does not match the dimension");
    require(is_in_class_A(*spec.A), "sobolev_rate: matrix is not invertible with row l1 norms <= 1");
  }
  SobolevRate r;
  r.s_bar = 1.0 / inv;
  const double base = n / std::log(n);
  const double two_s1 = 2.0 * r.s_bar + 1.0;
  for (double sk : spec.s)
    r.m_star.push_back(std::pow(base, 2.0 * r.s_bar / (2.0 * sk * two_s1)));
  r.rate_exponent = 2.0 * r.s_bar / two_s1;
  r.rate_value = std::pow(base, -r.rate_exponent);
  return r;
}

// ---------------------------------------------------------------------------
// Full pipeline

struct EstimatorOptions
{
  ThresholdKind rule = ThresholdKind::SqrtLog;
  std::optional<double> kappa; //!< fixed kappa; adaptive selection when empty
  double delta = 0.05;
  double kappa_max = 5.0;
  int window = 1;
  StabilizationStep step = StabilizationStep::Index;

  //! Frequency extent per axis; chosen automatically when empty.
  std::vector<double> extent;
  //! Nodes per axis (odd); derived from the spacing rule when empty.
  std::vector<std::size_t> points;
  //! Spacing is 2 pi / (oversample * sample range) per axis.
  double oversample = 2.0;
  //! Extent multiplier between attempts of the automatic extent search.
  double growth = 1.5;
  int max_attempts = 12;
  std::size_t budget = FrequencyGrid::default_budget;
};

struct EcfEstimate
{
  std::size_t n = 0;
  GridField ecf;
  std::optional<KappaSelection> selection;
  ThresholdRule rule;
  BinaryMask mask;
  GridField tilde;
  Clearance clearance;
  int attempts = 0;

  const FrequencyGrid& grid() const { return ecf.grid; }
};

namespace detail {

inline EcfEstimate estimate_on_grid(const SampleSet& samples, const FrequencyGrid& grid,
                                    const EstimatorOptions& opt)
{
  EcfEstimate e;
  e.n = samples.size();
  e.ecf = ecf_evaluate(samples, grid);
  e.rule.kind = opt.rule;
  if (opt.kappa) {
    e.rule.kappa = *opt.kappa;
  } else {
    e.selection =
      select_kappa(e.ecf, e.n, opt.rule, opt.delta, opt.kappa_max, opt.window, opt.step);
    e.rule.kappa = e.selection->selected_kappa;
  }
  e.mask = threshold_mask(e.ecf, e.rule, e.n);
  e.tilde = apply_threshold(e.ecf, e.mask);
  e.clearance = boundary_clearance(e.mask, &e.ecf);
  return e;
}

} // namespace detail

//! Thresholded ECF of the sample. Unless an extent is given, the frequency
//! box starts at about 4 / sd per axis and grows until the retained set
//! stays off the grid boundary (or the node budget or the cap |u_k| <= n is
//! reached; `clearance` then reports the failure).
inline EcfEstimate estimate(const SampleSet& samples, const EstimatorOptions& opt = {})
{
  const std::size_t d = samples.dim();
  const std::size_t n = samples.size();
  require(n >= 2, "estimate: at least two observations are required");
  require(opt.oversample > 0.0 && opt.growth > 1.0, "estimate: invalid grid search parameters");

  if (!opt.extent.empty() && !opt.points.empty())
    return detail::estimate_on_grid(samples, FrequencyGrid(opt.extent, opt.points, opt.budget), opt);

  std::vector<double> spacing(d), extent(d);
  for (std::size_t k = 0; k < d; ++k) {
    double lo = samples(0, k), hi = lo, mean = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      lo = std::min(lo, samples(j, k));
      hi = std::max(hi, samples(j, k));
      mean += samples(j, k);
    }
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t j = 0; j < n; ++j)
      var += (samples(j, k) - mean) * (samples(j, k) - mean);
    const double sd = std::sqrt(var / static_cast<double>(n - 1));
    const double range = hi - lo > 0.0 ? hi - lo : 1.0;
    spacing[k] = 2.0 * std::numbers::pi / (opt.oversample * range);
    extent[k] = opt.extent.empty() ? std::max(sd > 0.0 ? 4.0 / sd : 0.0, 10.0 * spacing[k])
                                   : opt.extent[k];
  }

  auto make = [&](const std::vector<double>& ext) {
    std::vector<std::size_t> pts(d);
    std::vector<double> e(d);
    for (std::size_t k = 0; k < d; ++k) {
      const double cap = std::min(ext[k], static_cast<double>(n));
      auto half = static_cast<std::size_t>(std::ceil(cap / spacing[k] - 1e-9));
      half = std::max<std::size_t>(half, 1);
      e[k] = static_cast<double>(half) * spacing[k];
      if (e[k] > static_cast<double>(n)) {
        half = std::max<std::size_t>(1, half - 1);
        e[k] = static_cast<double>(half) * spacing[k];
      }
      pts[k] = 2 * half + 1;
    }
    return std::make_pair(e, pts);
  };

  if (!opt.extent.empty()) {
    auto [e, pts] = make(extent);
    return detail::estimate_on_grid(samples, FrequencyGrid(e, pts, opt.budget), opt);
  }

  std::optional<EcfEstimate> best;
  for (int attempt = 1; attempt <= opt.max_attempts; ++attempt) {
    auto [e, pts] = make(extent);
    double nodes = 1.0;
    for (auto p : pts)
      nodes *= static_cast<double>(p);
    if (nodes > static_cast<double>(opt.budget))
      break;
    if (best && best->grid().points() == pts)
      break; // capped at |u_k| <= n on every axis
    best = detail::estimate_on_grid(samples, FrequencyGrid(e, pts, opt.budget), opt);
    best->attempts = attempt;
    if (best->clearance.clear)
      break;
    for (auto& x : extent)
      x *= opt.growth;
  }
  require(best.has_value(), "estimate: node budget too small for the initial grid");
  return *best;
}

} // namespace ecfde
