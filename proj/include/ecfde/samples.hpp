#pragma once

#include "error.hpp"

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace ecfde {

//! n observations in R^d stored row-major (observation-major).
class SampleSet
{
public:
  SampleSet() = default;

  SampleSet(std::size_t d, std::vector<double> data)
    : d_(d)
    , data_(std::move(data))
  {
    require(d >= 1 && d <= 3, "SampleSet: dimension must be 1, 2 or 3");
    require(data_.size() % d == 0, "SampleSet: data length is not a multiple of d");
    for (double v : data_)
      require(std::isfinite(v), "SampleSet: non-finite observation");
  }

  std::size_t size() const { return d_ == 0 ? 0 : data_.size() / d_; }
  std::size_t dim() const { return d_; }
  bool empty() const { return data_.empty(); }

  std::span<const double> row(std::size_t j) const
  {
    return { data_.data() + j * d_, d_ };
  }
  double operator()(std::size_t j, std::size_t k) const { return data_[j * d_ + k]; }

  const std::vector<double>& data() const { return data_; }

  //! Concatenation, used by averaging-consistency checks.
  friend SampleSet concat(const SampleSet& a, const SampleSet& b)
  {
    require(a.dim() == b.dim(), "concat: dimension mismatch");
    std::vector<double> all = a.data_;
    all.insert(all.end(), b.data_.begin(), b.data_.end());
    return SampleSet(a.dim(), std::move(all));
  }

private:
  std::size_t d_ = 1;
  std::vector<double> data_;
};

} // namespace ecfde
