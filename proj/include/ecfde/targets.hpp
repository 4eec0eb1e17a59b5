#pragma once

#include "error.hpp"
#include "quadrature.hpp"
#include "rng.hpp"
#include "special.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <limits>
#include <map>
#include <memory>
#include <numbers>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace ecfde {

using cplx = std::complex<double>;
using SmallMatrix =
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor, 3, 3>;
using SmallVector = Eigen::Matrix<double, Eigen::Dynamic, 1, Eigen::ColMajor, 3, 1>;

//! Axis-aligned box, used as the default plotting window of a model.
struct Box
{
  std::vector<double> lo;
  std::vector<double> hi;
};

namespace detail {

//! Interface of an analytic distribution on R^d, d <= 3.
class ModelImpl
{
public:
  virtual ~ModelImpl() = default;

  virtual std::size_t dim() const = 0;
  virtual cplx cf(std::span<const double> u) const = 0;
  virtual double density(std::span<const double> x) const = 0;

  //! Upper bound on the energy of the characteristic function outside the
  //! box, i.e. on the integral of |cf|^2 over { u : |u_k| > U_k for some k }.
  virtual double tail_energy(std::span<const double> extent) const = 0;
  //! Integral of |cf|^2 over R^d, or an upper bound when energy_exact() is false.
  virtual double energy() const = 0;
  virtual bool energy_exact() const { return true; }

  virtual Box plot_box() const = 0;

  virtual bool has_quantile() const { return false; }
  virtual double quantile(double) const
  {
    throw invalid_argument("model has no quantile function");
  }
  virtual double cdf(double) const { throw invalid_argument("model has no cdf"); }

  virtual bool has_sampler() const { return has_quantile(); }
  virtual void sample(RngStream& rng, std::span<double> out) const
  {
    if (!has_quantile())
      throw invalid_argument("model has no sampler");
    out[0] = quantile(rng.uniform());
  }
};

} // namespace detail

//! Immutable, cheaply copyable handle on an analytic target distribution.
class TargetModel
{
public:
  TargetModel() = default;
  TargetModel(std::string name, std::shared_ptr<const detail::ModelImpl> impl)
    : name_(std::move(name))
    , impl_(std::move(impl))
  {}

  const std::string& name() const { return name_; }
  std::size_t dim() const { return impl_->dim(); }

  cplx cf(std::span<const double> u) const { return impl_->cf(u); }
  cplx cf(double u) const { return impl_->cf(std::span<const double>(&u, 1)); }
  double density(std::span<const double> x) const { return impl_->density(x); }
  double density(double x) const { return impl_->density(std::span<const double>(&x, 1)); }

  double tail_energy(std::span<const double> extent) const
  {
    return impl_->tail_energy(extent);
  }
  double energy() const { return impl_->energy(); }
  bool energy_exact() const { return impl_->energy_exact(); }
  Box plot_box() const { return impl_->plot_box(); }

  bool has_quantile() const { return impl_->has_quantile(); }
  double quantile(double p) const { return impl_->quantile(p); }
  double cdf(double x) const { return impl_->cdf(x); }

  bool has_sampler() const { return impl_->has_sampler(); }
  void sample(RngStream& rng, std::span<double> out) const { impl_->sample(rng, out); }

  const std::shared_ptr<const detail::ModelImpl>& impl() const { return impl_; }

private:
  std::string name_;
  std::shared_ptr<const detail::ModelImpl> impl_;
};

namespace detail {

inline bool all_zero(std::span<const double> u)
{
  return std::all_of(u.begin(), u.end(), [](double v) { return v == 0.0; });
}

inline double min_extent(std::span<const double> extent)
{
  return *std::min_element(extent.begin(), extent.end());
}

//! Generic quantile for a continuous 1-D law: bracket then bisection
//! refined by secant steps on the cdf.
template<class Cdf>
double invert_cdf(Cdf&& cdf, double p, double lo, double hi)
{
  require(p > 0.0 && p < 1.0, "quantile: probability must lie in (0, 1)");
  double width = std::max(1.0, hi - lo);
  while (cdf(lo) > p) {
    lo -= width;
    width *= 2.0;
  }
  width = std::max(1.0, hi - lo);
  while (cdf(hi) < p) {
    hi += width;
    width *= 2.0;
  }
  for (int iter = 0; iter < 200 && hi - lo > 1e-13 * std::max(1.0, std::abs(hi)); ++iter) {
    const double mid = 0.5 * (lo + hi);
    if (cdf(mid) < p)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

class GaussianImpl final : public ModelImpl
{
public:
  GaussianImpl(SmallVector mean, SmallMatrix cov)
    : mean_(std::move(mean))
    , cov_(std::move(cov))
  {
    const auto d = static_cast<std::size_t>(mean_.size());
    require(d >= 1 && d <= 3, "gaussian: dimension must be 1, 2 or 3");
    require(cov_.rows() == mean_.size() && cov_.cols() == mean_.size(),
            "gaussian: covariance shape does not match the mean");
    require((cov_ - cov_.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * cov_.cwiseAbs().maxCoeff(),
            "gaussian: covariance must be symmetric");
    Eigen::LLT<SmallMatrix> llt(cov_);
    require(llt.info() == Eigen::Success, "gaussian: covariance must be positive definite");
    chol_ = llt.matrixL();
    precision_ = cov_.inverse();
    det_ = cov_.determinant();
    require(det_ > 0.0, "gaussian: covariance must be positive definite");
  }

  std::size_t dim() const override { return static_cast<std::size_t>(mean_.size()); }

  cplx cf(std::span<const double> u) const override
  {
    const std::size_t d = dim();
    double phase = 0.0, quad = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      phase += u[i] * mean_[i];
      for (std::size_t j = 0; j < d; ++j)
        quad += u[i] * cov_(i, j) * u[j];
    }
    return std::polar(std::exp(-0.5 * quad), phase);
  }

  double density(std::span<const double> x) const override
  {
    const std::size_t d = dim();
    double quad = 0.0;
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j)
        quad += (x[i] - mean_[i]) * precision_(i, j) * (x[j] - mean_[j]);
    return std::exp(-0.5 * quad) /
           std::sqrt(std::pow(2.0 * std::numbers::pi, static_cast<double>(d)) * det_);
  }

  double energy() const override
  {
    return std::pow(std::numbers::pi, 0.5 * static_cast<double>(dim())) / std::sqrt(det_);
  }

  const SmallVector& mean() const { return mean_; }
  const SmallMatrix& cov() const { return cov_; }

  // |cf|^2 = exp(-u'Su). Integrating out all axes but k leaves
  // exp(-s_k u_k^2) with s_k = 1 / (S^{-1})_kk; the union bound over axes
  // gives energy * sum_k erfc(U_k sqrt(s_k)).
  double tail_energy(std::span<const double> extent) const override
  {
    double total = 0.0;
    for (std::size_t k = 0; k < dim(); ++k) {
      const double s = 1.0 / precision_(k, k);
      total += std::erfc(extent[k] * std::sqrt(s));
    }
    return std::min(energy(), energy() * total);
  }

  Box plot_box() const override
  {
    Box box;
    for (std::size_t k = 0; k < dim(); ++k) {
      const double sd = std::sqrt(cov_(k, k));
      box.lo.push_back(mean_[k] - 4.5 * sd);
      box.hi.push_back(mean_[k] + 4.5 * sd);
    }
    return box;
  }

  bool has_quantile() const override { return dim() == 1; }
  double quantile(double p) const override
  {
    require(dim() == 1, "gaussian: quantile is defined in dimension 1 only");
    return mean_[0] + std::sqrt(cov_(0, 0)) * special::normal_quantile(p);
  }
  double cdf(double x) const override
  {
    require(dim() == 1, "gaussian: cdf is defined in dimension 1 only");
    return special::normal_cdf((x - mean_[0]) / std::sqrt(cov_(0, 0)));
  }

  bool has_sampler() const override { return true; }
  void sample(RngStream& rng, std::span<double> out) const override
  {
    const std::size_t d = dim();
    std::array<double, 3> z{};
    for (std::size_t k = 0; k < d; ++k)
      z[k] = special::normal_quantile(rng.uniform());
    for (std::size_t i = 0; i < d; ++i) {
      double v = mean_[i];
      for (std::size_t j = 0; j <= i; ++j)
        v += chol_(i, j) * z[j];
      out[i] = v;
    }
  }

private:
  SmallVector mean_;
  SmallMatrix cov_;
  SmallMatrix chol_;
  SmallMatrix precision_;
  double det_ = 1.0;
};

class GammaImpl final : public ModelImpl
{
public:
  GammaImpl(double shape, double scale)
    : shape_(shape)
    , scale_(scale)
  {
    require(shape > 0.0 && std::isfinite(shape), "gamma: shape must be positive");
    require(scale > 0.0 && std::isfinite(scale), "gamma: scale must be positive");
  }

  std::size_t dim() const override { return 1; }

  // (1 - i scale u)^{-shape} in polar form, exactly conjugate-symmetric.
  cplx cf(std::span<const double> u) const override
  {
    const double t = scale_ * u[0];
    return std::polar(std::pow(1.0 + t * t, -0.5 * shape_), shape_ * std::atan(t));
  }

  double density(std::span<const double> x) const override
  {
    const double v = x[0];
    if (v <= 0.0)
      return (v == 0.0 && shape_ == 1.0) ? 1.0 / scale_ : 0.0;
    return std::exp((shape_ - 1.0) * std::log(v) - v / scale_ - std::lgamma(shape_) -
                    shape_ * std::log(scale_));
  }

  // Integral of (1 + scale^2 u^2)^{-shape} over R, finite for shape > 1/2.
  double energy() const override
  {
    if (shape_ <= 0.5)
      return std::numeric_limits<double>::infinity();
    return std::sqrt(std::numbers::pi) * std::exp(std::lgamma(shape_ - 0.5) - std::lgamma(shape_)) /
           scale_;
  }

  // With t = tan(w): int_{scale U}^inf (1+t^2)^{-shape} dt = int_{atan(scale U)}^{pi/2} cos^{2 shape-2}(w) dw,
  // a smooth finite-interval integral evaluated by Gauss-Legendre.
  double tail_energy(std::span<const double> extent) const override
  {
    const double lo = std::atan(scale_ * extent[0]);
    const double hi = 0.5 * std::numbers::pi;
    if (lo >= hi)
      return 0.0;
    const double power = 2.0 * shape_ - 2.0;
    const double half =
      quad::integrate([&](double w) { return std::pow(std::cos(w), power); }, lo, hi, 4);
    return 2.0 * half / scale_;
  }

  Box plot_box() const override { return { { 0.0 }, { quantile(0.9999) } }; }

  bool has_quantile() const override { return true; }
  double quantile(double p) const override
  {
    return scale_ * special::gamma_p_inverse(shape_, p);
  }
  double cdf(double x) const override { return special::gamma_p(shape_, x / scale_); }

  double shape() const { return shape_; }
  double scale() const { return scale_; }

private:
  double shape_;
  double scale_;
};

//! Beta(2,2), density 6x(1-x) on [0,1].
class Beta22Impl final : public ModelImpl
{
public:
  std::size_t dim() const override { return 1; }

  // Composite 64-point Gauss-Legendre; panels are added so that each spans
  // at most 40 radians of phase.
  cplx cf(std::span<const double> u) const override
  {
    const double w = u[0];
    if (w == 0.0)
      return { 1.0, 0.0 };
    const auto panels = static_cast<std::size_t>(std::ceil(std::abs(w) / 40.0));
    return quad::integrate(
      [w](double x) { return 6.0 * x * (1.0 - x) * cplx(std::cos(w * x), std::sin(w * x)); },
      0.0, 1.0, std::max<std::size_t>(1, panels));
  }

  double density(std::span<const double> x) const override
  {
    const double v = x[0];
    return (v >= 0.0 && v <= 1.0) ? 6.0 * v * (1.0 - v) : 0.0;
  }

  // 2 pi * ||f||^2 with ||f||^2 = 36/30.
  double energy() const override { return 2.0 * std::numbers::pi * 1.2; }

  // Two integrations by parts give
  //   cf(u) = e^{iu/2} (-12 cos(u/2)/u^2 + 24 sin(u/2)/u^3),
  // hence |cf|^2 <= 144/u^4 + 576/u^6 and the two-sided tail beyond U is
  // at most 96/U^3 + 230.4/U^5.
  double tail_energy(std::span<const double> extent) const override
  {
    const double U = extent[0];
    if (U <= 0.0)
      return energy();
    return std::min(energy(), 96.0 / (U * U * U) + 230.4 / std::pow(U, 5));
  }

  Box plot_box() const override { return { { -0.1 }, { 1.1 } }; }

  bool has_quantile() const override { return true; }
  // Root in [0,1] of 3x^2 - 2x^3 = p via the trigonometric cubic formula.
  double quantile(double p) const override
  {
    require(p > 0.0 && p < 1.0, "beta22: probability must lie in (0, 1)");
    return 0.5 + std::cos((std::acos(1.0 - 2.0 * p) - 2.0 * std::numbers::pi) / 3.0);
  }
  double cdf(double x) const override
  {
    if (x <= 0.0)
      return 0.0;
    if (x >= 1.0)
      return 1.0;
    return x * x * (3.0 - 2.0 * x);
  }
};

class MixtureImpl final : public ModelImpl
{
public:
  MixtureImpl(std::vector<double> weights, std::vector<TargetModel> components)
    : weights_(std::move(weights))
    , components_(std::move(components))
  {
    require(!components_.empty(), "mixture: at least one component is required");
    require(weights_.size() == components_.size(), "mixture: weight count mismatch");
    double total = 0.0;
    for (double w : weights_) {
      require(w >= 0.0, "mixture: weights must be nonnegative");
      total += w;
    }
    require(std::abs(total - 1.0) <= 1e-12, "mixture: weights must sum to 1");
    for (const auto& c : components_)
      require(c.dim() == components_.front().dim(), "mixture: component dimensions differ");
  }

  std::size_t dim() const override { return components_.front().dim(); }

  cplx cf(std::span<const double> u) const override
  {
    if (all_zero(u))
      return { 1.0, 0.0 };
    cplx total{};
    for (std::size_t j = 0; j < weights_.size(); ++j)
      total += weights_[j] * components_[j].cf(u);
    return total;
  }

  double density(std::span<const double> x) const override
  {
    double total = 0.0;
    for (std::size_t j = 0; j < weights_.size(); ++j)
      total += weights_[j] * components_[j].density(x);
    return total;
  }

  // Gaussian components: the cross terms integrate in closed form,
  //   int cf_i conj(cf_j) = (2 pi)^(d/2) / sqrt(det S) exp(-m' S^-1 m / 2),
  // with S = S_i + S_j and m = mean_i - mean_j. Otherwise the Jensen bound
  // |sum w_j cf_j|^2 <= sum w_j |cf_j|^2 is used.
  double energy() const override
  {
    std::vector<const GaussianImpl*> g;
    for (const auto& c : components_)
      g.push_back(dynamic_cast<const GaussianImpl*>(c.impl().get()));
    if (std::all_of(g.begin(), g.end(), [](const GaussianImpl* p) { return p != nullptr; })) {
      const double c = std::pow(2.0 * std::numbers::pi, 0.5 * static_cast<double>(dim()));
      double total = 0.0;
      for (std::size_t i = 0; i < g.size(); ++i)
        for (std::size_t j = 0; j < g.size(); ++j) {
          const SmallMatrix S = g[i]->cov() + g[j]->cov();
          const SmallVector m = g[i]->mean() - g[j]->mean();
          const double q = m.dot(S.llt().solve(m));
          total += weights_[i] * weights_[j] * c / std::sqrt(S.determinant()) * std::exp(-0.5 * q);
        }
      return total;
    }
    double total = 0.0;
    for (std::size_t j = 0; j < weights_.size(); ++j)
      total += weights_[j] * components_[j].energy();
    return total;
  }
  bool energy_exact() const override
  {
    return std::all_of(components_.begin(), components_.end(), [](const TargetModel& c) {
      return dynamic_cast<const GaussianImpl*>(c.impl().get()) != nullptr;
    });
  }

  // Jensen: the tail of |sum w_j cf_j|^2 is at most the weighted tails.
  double tail_energy(std::span<const double> extent) const override
  {
    double total = 0.0;
    for (std::size_t j = 0; j < weights_.size(); ++j)
      total += weights_[j] * components_[j].tail_energy(extent);
    return total;
  }

  Box plot_box() const override
  {
    Box box = components_.front().plot_box();
    for (const auto& c : components_) {
      Box b = c.plot_box();
      for (std::size_t k = 0; k < box.lo.size(); ++k) {
        box.lo[k] = std::min(box.lo[k], b.lo[k]);
        box.hi[k] = std::max(box.hi[k], b.hi[k]);
      }
    }
    return box;
  }

  bool has_quantile() const override
  {
    return dim() == 1 &&
           std::all_of(components_.begin(), components_.end(),
                       [](const TargetModel& c) { return c.has_quantile(); });
  }
  double cdf(double x) const override
  {
    double total = 0.0;
    for (std::size_t j = 0; j < weights_.size(); ++j)
      total += weights_[j] * components_[j].cdf(x);
    return total;
  }
  double quantile(double p) const override
  {
    require(has_quantile(), "mixture: quantile needs 1-D components with quantiles");
    double lo = components_.front().quantile(p), hi = lo;
    for (const auto& c : components_) {
      const double q = c.quantile(p);
      lo = std::min(lo, q);
      hi = std::max(hi, q);
    }
    // The mixture quantile lies between the component quantiles.
    return invert_cdf([this](double x) { return cdf(x); }, p, lo, hi);
  }

  bool has_sampler() const override
  {
    return std::all_of(components_.begin(), components_.end(),
                       [](const TargetModel& c) { return c.has_sampler(); });
  }
  void sample(RngStream& rng, std::span<double> out) const override
  {
    const double v = rng.uniform();
    double acc = 0.0;
    std::size_t pick = weights_.size() - 1;
    for (std::size_t j = 0; j < weights_.size(); ++j) {
      acc += weights_[j];
      if (v < acc) {
        pick = j;
        break;
      }
    }
    components_[pick].sample(rng, out);
  }

private:
  std::vector<double> weights_;
  std::vector<TargetModel> components_;
};

//! Independent coordinates: law of (Y_1, ..., Y_d) with 1-D factors.
class ProductImpl final : public ModelImpl
{
public:
  explicit ProductImpl(std::vector<TargetModel> factors)
    : factors_(std::move(factors))
  {
    require(!factors_.empty() && factors_.size() <= 3, "product: 1 to 3 factors required");
    for (const auto& f : factors_)
      require(f.dim() == 1, "product: factors must be one-dimensional");
  }

  std::size_t dim() const override { return factors_.size(); }

  cplx cf(std::span<const double> u) const override
  {
    cplx total{ 1.0, 0.0 };
    for (std::size_t k = 0; k < factors_.size(); ++k)
      total *= factors_[k].cf(u[k]);
    return total;
  }

  double density(std::span<const double> x) const override
  {
    double total = 1.0;
    for (std::size_t k = 0; k < factors_.size(); ++k)
      total *= factors_[k].density(x[k]);
    return total;
  }

  double energy() const override
  {
    double total = 1.0;
    for (const auto& f : factors_)
      total *= f.energy();
    return total;
  }
  bool energy_exact() const override
  {
    return std::all_of(factors_.begin(), factors_.end(),
                       [](const TargetModel& f) { return f.energy_exact(); });
  }

  double tail_energy(std::span<const double> extent) const override
  {
    double total = 0.0;
    for (std::size_t k = 0; k < factors_.size(); ++k) {
      double term = factors_[k].tail_energy(extent.subspan(k, 1));
      for (std::size_t j = 0; j < factors_.size(); ++j)
        if (j != k)
          term *= factors_[j].energy();
      total += term;
    }
    return std::min(total, energy());
  }

  Box plot_box() const override
  {
    Box box;
    for (const auto& f : factors_) {
      Box b = f.plot_box();
      box.lo.push_back(b.lo[0]);
      box.hi.push_back(b.hi[0]);
    }
    return box;
  }

  bool has_quantile() const override { return dim() == 1 && factors_[0].has_quantile(); }
  double quantile(double p) const override { return factors_[0].quantile(p); }
  double cdf(double x) const override { return factors_[0].cdf(x); }

  bool has_sampler() const override
  {
    return std::all_of(factors_.begin(), factors_.end(),
                       [](const TargetModel& f) { return f.has_sampler(); });
  }
  void sample(RngStream& rng, std::span<double> out) const override
  {
    for (std::size_t k = 0; k < factors_.size(); ++k)
      factors_[k].sample(rng, out.subspan(k, 1));
  }

private:
  std::vector<TargetModel> factors_;
};

//! Law of X = W Y. cf_X(u) = cf_Y(W^T u), f_X(x) = f_Y(W^{-1} x) / |det W|.
class LinearTransformImpl final : public ModelImpl
{
public:
  LinearTransformImpl(TargetModel base, SmallMatrix W)
    : base_(std::move(base))
    , W_(std::move(W))
  {
    const auto d = static_cast<Eigen::Index>(base_.dim());
    require(W_.rows() == d && W_.cols() == d, "linear_transform: matrix shape mismatch");
    det_ = W_.determinant();
    require(std::abs(det_) > 1e-12, "linear_transform: matrix must be invertible");
    inverse_ = W_.inverse();
    // Operator infinity-norm of W^{-T}: max absolute row sum of the transpose.
    const SmallMatrix inv_t = inverse_.transpose();
    inv_t_norm_ = inv_t.cwiseAbs().rowwise().sum().maxCoeff();
  }

  std::size_t dim() const override { return base_.dim(); }

  cplx cf(std::span<const double> u) const override
  {
    std::array<double, 3> v{};
    const std::size_t d = dim();
    for (std::size_t j = 0; j < d; ++j)
      for (std::size_t i = 0; i < d; ++i)
        v[j] += W_(i, j) * u[i];
    return base_.cf(std::span<const double>(v.data(), d));
  }

  double density(std::span<const double> x) const override
  {
    std::array<double, 3> y{};
    const std::size_t d = dim();
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j)
        y[i] += inverse_(i, j) * x[j];
    return base_.density(std::span<const double>(y.data(), d)) / std::abs(det_);
  }

  double energy() const override { return base_.energy() / std::abs(det_); }
  bool energy_exact() const override { return base_.energy_exact(); }

  // With v = W^T u, |u|_inf <= |W^{-T}|_inf |v|_inf, so the region outside
  // the box maps into { |v|_inf > min_k U_k / |W^{-T}|_inf }.
  double tail_energy(std::span<const double> extent) const override
  {
    const double V = min_extent(extent) / inv_t_norm_;
    std::array<double, 3> ext{ V, V, V };
    return std::min(energy(), base_.tail_energy(std::span<const double>(ext.data(), dim())) /
                                std::abs(det_));
  }

  Box plot_box() const override
  {
    const Box b = base_.plot_box();
    const std::size_t d = dim();
    Box box{ std::vector<double>(d, std::numeric_limits<double>::infinity()),
             std::vector<double>(d, -std::numeric_limits<double>::infinity()) };
    for (unsigned corner = 0; corner < (1u << d); ++corner) {
      for (std::size_t i = 0; i < d; ++i) {
        double v = 0.0;
        for (std::size_t j = 0; j < d; ++j)
          v += W_(i, j) * (((corner >> j) & 1u) ? b.hi[j] : b.lo[j]);
        box.lo[i] = std::min(box.lo[i], v);
        box.hi[i] = std::max(box.hi[i], v);
      }
    }
    return box;
  }

  bool has_quantile() const override
  {
    return dim() == 1 && base_.has_quantile() && W_(0, 0) > 0.0;
  }
  double quantile(double p) const override { return W_(0, 0) * base_.quantile(p); }
  double cdf(double x) const override { return base_.cdf(x / W_(0, 0)); }

  bool has_sampler() const override { return base_.has_sampler(); }
  void sample(RngStream& rng, std::span<double> out) const override
  {
    std::array<double, 3> y{};
    const std::size_t d = dim();
    base_.sample(rng, std::span<double>(y.data(), d));
    for (std::size_t i = 0; i < d; ++i) {
      double v = 0.0;
      for (std::size_t j = 0; j < d; ++j)
        v += W_(i, j) * y[j];
      out[i] = v;
    }
  }

  double determinant() const { return det_; }

private:
  TargetModel base_;
  SmallMatrix W_;
  SmallMatrix inverse_;
  double det_ = 1.0;
  double inv_t_norm_ = 1.0;
};

} // namespace detail

// ---------------------------------------------------------------------------
// Factories

inline SmallMatrix to_matrix(std::initializer_list<std::initializer_list<double>> rows)
{
  const auto r = static_cast<Eigen::Index>(rows.size());
  SmallMatrix m(r, r);
  Eigen::Index i = 0;
  for (const auto& row : rows) {
    require(static_cast<Eigen::Index>(row.size()) == r, "to_matrix: matrix must be square");
    Eigen::Index j = 0;
    for (double v : row)
      m(i, j++) = v;
    ++i;
  }
  return m;
}

inline TargetModel gaussian_cf(std::vector<double> mean, const SmallMatrix& cov,
                               std::string name = "gaussian")
{
  SmallVector mu(static_cast<Eigen::Index>(mean.size()));
  for (std::size_t k = 0; k < mean.size(); ++k)
    mu[static_cast<Eigen::Index>(k)] = mean[k];
  return { std::move(name), std::make_shared<detail::GaussianImpl>(mu, cov) };
}

inline TargetModel mixture_cf(std::vector<double> weights, std::vector<TargetModel> components,
                              std::string name = "mixture")
{
  return { std::move(name),
           std::make_shared<detail::MixtureImpl>(std::move(weights), std::move(components)) };
}

//! Gamma law in the shape-scale parameterization.
inline TargetModel gamma_cf(double shape, double scale, std::string name = "gamma")
{
  return { std::move(name), std::make_shared<detail::GammaImpl>(shape, scale) };
}

inline TargetModel beta22_cf(std::string name = "beta22")
{
  return { std::move(name), std::make_shared<detail::Beta22Impl>() };
}

inline TargetModel product_cf(std::vector<TargetModel> factors, std::string name = "product")
{
  return { std::move(name), std::make_shared<detail::ProductImpl>(std::move(factors)) };
}

inline TargetModel linear_transform(const TargetModel& model, const SmallMatrix& W,
                                    std::string name = {})
{
  if (name.empty())
    name = model.name() + "_transformed";
  return { std::move(name), std::make_shared<detail::LinearTransformImpl>(model, W) };
}

//! Example-1 construction X = (b X1, a X1 + b X2), X1 ~ Gamma(alpha + 1/2, 1),
//! X2 ~ Gamma(beta + 1/2, 1), with the companion matrix that straightens
//! its characteristic function.
struct Example1
{
  TargetModel model;
  SmallMatrix companion; // (1/b^2) [[b, -a], [0, b]]
  double alpha = 0, beta = 0, a = 0, b = 0;

  //! a < b - b^2, the sign condition used to lower-bound the bias of f.
  bool bias_condition() const { return a < b - b * b; }
  //! Literal range 0 < a < b(1-b); empty for b > 1.
  bool literal_range() const { return a > 0.0 && a < b * (1.0 - b); }
};

inline bool is_in_class_A(const SmallMatrix& A);

inline Example1 example1_model(double alpha, double beta, double b, double a)
{
  require(beta > 0.0 && beta < alpha, "example1: need 0 < beta < alpha");
  require(b > 1.0, "example1: need b > 1");
  require(a != 0.0 && std::isfinite(a), "example1: need a != 0");
  auto base = product_cf({ gamma_cf(alpha + 0.5, 1.0), gamma_cf(beta + 0.5, 1.0) });
  SmallMatrix W = to_matrix({ { b, 0.0 }, { a, b } });
  Example1 ex;
  ex.model = linear_transform(base, W, "Example1");
  ex.companion = to_matrix({ { b, -a }, { 0.0, b } }) / (b * b);
  ex.alpha = alpha;
  ex.beta = beta;
  ex.a = a;
  ex.b = b;
  return ex;
}

//! Invertible (|det A| > 1e-12) and every row has l1 norm at most 1.
inline bool is_in_class_A(const SmallMatrix& A)
{
  if (A.rows() != A.cols() || A.rows() == 0)
    return false;
  if (std::abs(A.determinant()) <= 1e-12)
    return false;
  return A.cwiseAbs().rowwise().sum().maxCoeff() <= 1.0;
}

// ---------------------------------------------------------------------------
// Registry

enum class GammaConvention
{
  shape_scale,
  shape_rate
};

using ModelParams = std::map<std::string, double>;

namespace detail {
inline double param(const ModelParams& p, const std::string& key, double fallback)
{
  auto it = p.find(key);
  return it == p.end() ? fallback : it->second;
}
} // namespace detail

//! Names accepted by make_model.
inline std::vector<std::string> model_names()
{
  return { "N", "MixNN", "GB", "Gamma32", "Mix1D", "Example1", "Gauss1D" };
}

//! Builds a shipped model by name. Parameters override the defaults:
//!   Gamma32:  shape (3), theta (2; scale or rate depending on convention)
//!   Example1: alpha (2), beta (1), a (-1), b (2)
//!   Gauss1D:  mean (0), sd (1)
inline TargetModel make_model(const std::string& name, const ModelParams& params = {},
                              GammaConvention convention = GammaConvention::shape_scale)
{
  using detail::param;
  auto gamma_second = [&](double theta) {
    return convention == GammaConvention::shape_scale ? theta : 1.0 / theta;
  };
  if (name == "N")
    return gaussian_cf({ 0.0, 0.0 }, to_matrix({ { 1.0, 0.5 }, { 0.5, 3.0 } }), "N");
  if (name == "MixNN")
    return mixture_cf({ 0.4, 0.6 },
                      { gaussian_cf({ -2.0, -2.0 }, to_matrix({ { 1.0, 0.2 }, { 0.2, 3.0 } })),
                        gaussian_cf({ 2.0, 2.0 }, to_matrix({ { 1.0, 0.3 }, { 0.3, 1.0 } })) },
                      "MixNN");
  if (name == "GB") {
    auto y = product_cf({ gamma_cf(5.0, gamma_second(1.0)), beta22_cf() });
    return linear_transform(y, to_matrix({ { 1.0, 0.1 }, { 0.2, 1.0 } }), "GB");
  }
  if (name == "Gamma32")
    return gamma_cf(param(params, "shape", 3.0), gamma_second(param(params, "theta", 2.0)),
                    "Gamma32");
  if (name == "Mix1D") {
    // N(m, v) read as mean and variance.
    return mixture_cf({ 0.7, 0.3 },
                      { gaussian_cf({ 3.0 }, to_matrix({ { 2.0 } })),
                        gaussian_cf({ 8.0 }, to_matrix({ { 1.0 } })) },
                      "Mix1D");
  }
  if (name == "Example1")
    return example1_model(param(params, "alpha", 2.0), param(params, "beta", 1.0),
                          param(params, "b", 2.0), param(params, "a", -1.0))
      .model;
  if (name == "Gauss1D") {
    const double sd = param(params, "sd", 1.0);
    return gaussian_cf({ param(params, "mean", 0.0) }, to_matrix({ { sd * sd } }), "Gauss1D");
  }
  throw invalid_argument("unknown model '" + name + "'");
}

// ---------------------------------------------------------------------------
// Bias quadrature

//! Integral of |cf(A u)|^2 over the complement of the box [-m, m] (A = Id
//! when empty). Multiplying by |det A| gives the integral of |cf|^2 over the
//! complement of A([-m, m]).
//!
//! The part inside [-quad_extent, quad_extent]^d is integrated with 10-point
//! Gauss-Legendre panels of width at most `panel_width`; the part outside is
//! replaced by the model's analytic tail bound. Dimensions 1 and 2.
inline double bias_quadrature(const TargetModel& model, std::span<const double> m,
                              const SmallMatrix* A, double quad_extent,
                              double panel_width = 0.5)
{
  const std::size_t d = model.dim();
  require(d == 1 || d == 2, "bias_quadrature: dimension 1 or 2 required");
  require(m.size() == d, "bias_quadrature: cutoff vector length mismatch");
  for (double mk : m)
    require(mk >= 0.0 && quad_extent > mk, "bias_quadrature: quad_extent must exceed every cutoff");

  TargetModel target = model;
  if (A != nullptr)
    target = linear_transform(model, A->transpose());

  static const quad::Rule rule = quad::gauss_legendre(10);
  // Quadrature nodes along an axis, split at +-m so the box edge is a panel edge.
  auto axis_nodes = [&](double mk, std::vector<double>& x, std::vector<double>& w,
                        std::vector<char>& inside) {
    const double edges[4] = { -quad_extent, -mk, mk, quad_extent };
    for (int piece = 0; piece < 3; ++piece) {
      const double a = edges[piece], b = edges[piece + 1];
      if (b <= a)
        continue;
      const auto panels = static_cast<std::size_t>(std::ceil((b - a) / panel_width));
      const double h = (b - a) / static_cast<double>(panels);
      for (std::size_t p = 0; p < panels; ++p) {
        const double mid = a + h * (static_cast<double>(p) + 0.5);
        for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
          x.push_back(mid + 0.5 * h * rule.nodes[i]);
          w.push_back(0.5 * h * rule.weights[i]);
          inside.push_back(piece == 1);
        }
      }
    }
  };

  std::array<std::vector<double>, 2> x, w;
  std::array<std::vector<char>, 2> inside;
  for (std::size_t k = 0; k < d; ++k)
    axis_nodes(m[k], x[k], w[k], inside[k]);

  double total = 0.0;
  if (d == 1) {
    for (std::size_t i = 0; i < x[0].size(); ++i)
      if (!inside[0][i])
        total += w[0][i] * std::norm(target.cf(x[0][i]));
  } else {
    std::vector<double> rows(x[0].size(), 0.0);
#pragma omp parallel for schedule(dynamic, 16)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(x[0].size()); ++i) {
      double acc = 0.0;
      std::array<double, 2> u{ x[0][i], 0.0 };
      for (std::size_t j = 0; j < x[1].size(); ++j) {
        if (inside[0][i] && inside[1][j])
          continue;
        u[1] = x[1][j];
        acc += w[1][j] * std::norm(target.cf(u));
      }
      rows[i] = w[0][i] * acc;
    }
    for (double r : rows)
      total += r;
  }
  std::array<double, 2> ext{ quad_extent, quad_extent };
  return total + target.tail_energy(std::span<const double>(ext.data(), d));
}

} // namespace ecfde
