#pragma once

#include "error.hpp"
#include "samples.hpp"
#include "targets.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <ostream>
#include <span>
#include <vector>

namespace ecfde {

//! Regular lattice covering [-U_k, U_k] on each axis with M_k (odd) nodes,
//! so that the origin is a node. Nodes are ordered row-major, last axis
//! fastest; for odd M_k the node mirrored through the origin of flat index i
//! has flat index size() - 1 - i.
class FrequencyGrid
{
public:
  static constexpr std::size_t default_budget = std::size_t{ 1 } << 24;

  FrequencyGrid() = default;

  FrequencyGrid(std::vector<double> extent, std::vector<std::size_t> points,
                std::size_t budget = default_budget)
    : extent_(std::move(extent))
    , points_(std::move(points))
  {
    const std::size_t d = extent_.size();
    require(d >= 1 && d <= 3, "make_grid: dimension must be 1, 2 or 3");
    require(points_.size() == d, "make_grid: extent and points_per_axis lengths differ");
    double total = 1.0;
    for (std::size_t k = 0; k < d; ++k)
      total *= static_cast<double>(points_[k]);
    require(total <= static_cast<double>(budget), "make_grid: node budget exceeded");
    for (std::size_t k = 0; k < d; ++k) {
      require(points_[k] >= 3 && points_[k] % 2 == 1,
              "make_grid: points per axis must be odd and at least 3");
      require(extent_[k] > 0.0 && std::isfinite(extent_[k]), "make_grid: extent must be positive");
      spacing_.push_back(2.0 * extent_[k] / static_cast<double>(points_[k] - 1));
    }
    size_ = static_cast<std::size_t>(total);
  }

  std::size_t dim() const { return extent_.size(); }
  std::size_t size() const { return size_; }
  const std::vector<double>& extent() const { return extent_; }
  const std::vector<std::size_t>& points() const { return points_; }
  const std::vector<double>& spacing() const { return spacing_; }

  std::size_t center(std::size_t axis) const { return (points_[axis] - 1) / 2; }
  std::size_t center_index() const { return (size_ - 1) / 2; }
  std::size_t mirror(std::size_t flat) const { return size_ - 1 - flat; }

  //! Coordinate of node j on `axis`; exactly zero at the center node.
  double coordinate(std::size_t axis, std::size_t j) const
  {
    const auto offset = static_cast<std::ptrdiff_t>(j) - static_cast<std::ptrdiff_t>(center(axis));
    return static_cast<double>(offset) * spacing_[axis];
  }

  std::array<std::size_t, 3> unflatten(std::size_t flat) const
  {
    std::array<std::size_t, 3> idx{};
    for (std::size_t k = dim(); k-- > 0;) {
      idx[k] = flat % points_[k];
      flat /= points_[k];
    }
    return idx;
  }

  std::array<double, 3> node(std::size_t flat) const
  {
    const auto idx = unflatten(flat);
    std::array<double, 3> u{};
    for (std::size_t k = 0; k < dim(); ++k)
      u[k] = coordinate(k, idx[k]);
    return u;
  }

  //! Volume of one lattice cell.
  double cell_volume() const
  {
    double v = 1.0;
    for (double h : spacing_)
      v *= h;
    return v;
  }

  //! Half-widths of the region covered by the cells, [-U - h/2, U + h/2].
  std::vector<double> cell_extent() const
  {
    std::vector<double> e(dim());
    for (std::size_t k = 0; k < dim(); ++k)
      e[k] = extent_[k] + 0.5 * spacing_[k];
    return e;
  }

  bool operator==(const FrequencyGrid& other) const
  {
    return extent_ == other.extent_ && points_ == other.points_;
  }

private:
  std::vector<double> extent_;
  std::vector<std::size_t> points_;
  std::vector<double> spacing_;
  std::size_t size_ = 0;
};

inline FrequencyGrid make_grid(std::vector<double> extent, std::vector<std::size_t> points,
                               std::size_t budget = FrequencyGrid::default_budget)
{
  return FrequencyGrid(std::move(extent), std::move(points), budget);
}

//! Complex field sampled on every node of a frequency grid.
struct GridField
{
  FrequencyGrid grid;
  std::vector<cplx> values;

  GridField() = default;
  GridField(FrequencyGrid g, std::vector<cplx> v)
    : grid(std::move(g))
    , values(std::move(v))
  {
    require(values.size() == grid.size(), "GridField: value count differs from node count");
  }

  std::size_t size() const { return values.size(); }
  const cplx& operator[](std::size_t i) const { return values[i]; }
};

namespace detail {

// Fills values[k] = exp(i * (start + k * step) * x) for k in [0, count).
// Anchors every 32 nodes are evaluated directly; nodes in between come from
// the rotation recurrence, which keeps the phase error near 1e-14.
inline void phase_run(double start, double step, double x, std::size_t count, cplx* values)
{
  const cplx rot(std::cos(step * x), std::sin(step * x));
  for (std::size_t k = 0; k < count; ++k) {
    if (k % 32 == 0) {
      const double arg = (start + static_cast<double>(k) * step) * x;
      values[k] = cplx(std::cos(arg), std::sin(arg));
    } else {
      const cplx prev = values[k - 1];
      values[k] = cplx(prev.real() * rot.real() - prev.imag() * rot.imag(),
                       prev.real() * rot.imag() + prev.imag() * rot.real());
    }
  }
}

} // namespace detail

//! Empirical characteristic function (1/n) sum_j exp(i <u, X_j>) on every
//! grid node.
//!
//! Only the half-space of flat indices >= center is accumulated; the other
//! half is filled by conjugate mirroring, so the symmetry holds exactly and
//! the origin is set to 1. Sums are formed in blocks of 64 observations whose
//! partial sums are added with Kahan compensation. Rows of the leading axes
//! are distributed over threads; each node's arithmetic does not depend on
//! the partition, so the result is bit-identical for any thread count.
//! Cost is O(n * nodes / 2) complex multiply-adds.
inline GridField ecf_evaluate(const SampleSet& samples, const FrequencyGrid& grid)
{
  require(samples.dim() == grid.dim(), "ecf_evaluate: dimension mismatch");
  require(samples.size() >= 1, "ecf_evaluate: at least one observation is required");

  const std::size_t d = grid.dim();
  const std::size_t n = samples.size();
  const std::size_t inner = grid.points()[d - 1];
  const std::size_t rows = grid.size() / inner;
  const std::size_t center_row = grid.center_index() / inner;
  // In dimension 1 there is a single row and only its upper half is needed.
  const std::size_t inner_begin = (d == 1) ? grid.center(0) : 0;
  const std::size_t inner_count = inner - inner_begin;
  const double inner_start = grid.coordinate(d - 1, inner_begin);
  const double inner_step = grid.spacing()[d - 1];

  constexpr std::size_t block = 64;
  const std::size_t active_rows = rows - center_row;

  // Leading-axis coordinates of each active row.
  std::vector<std::array<double, 2>> lead(active_rows);
  for (std::size_t r = 0; r < active_rows; ++r) {
    std::size_t rem = center_row + r;
    for (std::size_t k = d - 1; k-- > 0;) {
      lead[r][k] = grid.coordinate(k, rem % grid.points()[k]);
      rem /= grid.points()[k];
    }
  }

  std::vector<cplx> sum(active_rows * inner_count), comp(active_rows * inner_count);
  std::vector<cplx> phases(block * inner_count);

  for (std::size_t start = 0; start < n; start += block) {
    const std::size_t count = std::min(n, start + block) - start;

#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t j = 0; j < static_cast<std::ptrdiff_t>(count); ++j)
      detail::phase_run(inner_start, inner_step, samples(start + static_cast<std::size_t>(j), d - 1),
                        inner_count, phases.data() + static_cast<std::size_t>(j) * inner_count);

#pragma omp parallel
    {
      std::vector<cplx> partial(inner_count);
#pragma omp for schedule(static)
      for (std::ptrdiff_t r = 0; r < static_cast<std::ptrdiff_t>(active_rows); ++r) {
        const auto row = static_cast<std::size_t>(r);
        std::fill(partial.begin(), partial.end(), cplx{});
        for (std::size_t j = 0; j < count; ++j) {
          double lead_arg = 0.0;
          for (std::size_t k = 0; k + 1 < d; ++k)
            lead_arg += lead[row][k] * samples(start + j, k);
          const double lr = std::cos(lead_arg), li = std::sin(lead_arg);
          const cplx* ph = phases.data() + j * inner_count;
          for (std::size_t i = 0; i < inner_count; ++i)
            partial[i] += cplx(lr * ph[i].real() - li * ph[i].imag(),
                               lr * ph[i].imag() + li * ph[i].real());
        }
        cplx* s = sum.data() + row * inner_count;
        cplx* c = comp.data() + row * inner_count;
        for (std::size_t i = 0; i < inner_count; ++i) {
          const cplx y = partial[i] - c[i];
          const cplx t = s[i] + y;
          c[i] = (t - s[i]) - y;
          s[i] = t;
        }
      }
    }
  }

  std::vector<cplx> values(grid.size());
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t r = 0; r < active_rows; ++r)
    for (std::size_t i = 0; i < inner_count; ++i)
      values[(center_row + r) * inner + inner_begin + i] = sum[r * inner_count + i] * inv_n;

  const std::size_t c = grid.center_index();
  for (std::size_t i = 0; i < c; ++i)
    values[i] = std::conj(values[grid.mirror(i)]);
  values[c] = cplx(1.0, 0.0);
  return GridField(grid, std::move(values));
}

//! Analytic characteristic function of `model` on every node, mirrored the
//! same way as the ECF.
inline GridField cf_evaluate(const TargetModel& model, const FrequencyGrid& grid)
{
  require(model.dim() == grid.dim(), "cf_evaluate: dimension mismatch");
  std::vector<cplx> values(grid.size());
  const std::size_t c = grid.center_index();
  const std::size_t d = grid.dim();
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = static_cast<std::ptrdiff_t>(c); i < static_cast<std::ptrdiff_t>(grid.size());
       ++i) {
    const auto u = grid.node(static_cast<std::size_t>(i));
    values[static_cast<std::size_t>(i)] = model.cf(std::span<const double>(u.data(), d));
  }
  for (std::size_t i = 0; i < c; ++i)
    values[i] = std::conj(values[grid.mirror(i)]);
  values[c] = cplx(1.0, 0.0);
  return GridField(grid, std::move(values));
}

//! CSV dump `u_1,...,u_d,re,im`, one node per line in row-major order.
inline void write_field_csv(std::ostream& os, const GridField& field)
{
  const std::size_t d = field.grid.dim();
  for (std::size_t k = 0; k < d; ++k)
    os << "u_" << (k + 1) << ',';
  os << "re,im\n";
  os.precision(17);
  for (std::size_t i = 0; i < field.size(); ++i) {
    const auto u = field.grid.node(i);
    for (std::size_t k = 0; k < d; ++k)
      os << u[k] << ',';
    os << field.values[i].real() << ',' << field.values[i].imag() << '\n';
  }
}

} // namespace ecfde
