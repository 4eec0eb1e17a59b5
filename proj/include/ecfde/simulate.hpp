#pragma once

#include "error.hpp"
#include "rng.hpp"
#include "samples.hpp"
#include "targets.hpp"

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace ecfde {

enum class ChainKind
{
  IID,
  DoukhanAlpha,
  DyadicAR
};

inline ChainKind parse_chain_kind(const std::string& s)
{
  if (s == "iid" || s == "IID")
    return ChainKind::IID;
  if (s == "doukhan" || s == "DoukhanAlpha")
    return ChainKind::DoukhanAlpha;
  if (s == "dyadic" || s == "DyadicAR")
    return ChainKind::DyadicAR;
  throw invalid_argument("unknown chain kind '" + s + "'");
}

inline const char* to_string(ChainKind k)
{
  switch (k) {
    case ChainKind::IID: return "iid";
    case ChainKind::DoukhanAlpha: return "doukhan";
    case ChainKind::DyadicAR: return "dyadic";
  }
  return "?";
}

struct ChainConfig
{
  ChainKind kind = ChainKind::IID;
  double a = 3.0;            //!< Doukhan exponent, a > 1
  std::size_t burn_in = 0;   //!< dyadic chain only
};

//! n independent draws from the model.
inline SampleSet sample_iid(const TargetModel& model, std::size_t n, RngStream& rng)
{
  require(model.has_sampler(), "sample_iid: model has no sampler");
  const std::size_t d = model.dim();
  std::vector<double> data(n * d);
  for (std::size_t j = 0; j < n; ++j)
    model.sample(rng, std::span<double>(data.data() + j * d, d));
  return SampleSet(d, std::move(data));
}

//! Stationary hold-or-redraw chain on [0, 1]: Y_1 = U^(1/a) and
//! Y_{j+1} = Y_j if U_{j+1} >= Y_j, else V_{j+1}^(1/(a+1)).
//! Y_j^a is uniform, so the output target.quantile(Y_j^a) has the target law.
inline std::vector<double> doukhan_path(double a, std::size_t n, RngStream& rng)
{
  require(a > 1.0 && std::isfinite(a), "doukhan_chain: exponent a must exceed 1");
  std::vector<double> y(n);
  if (n == 0)
    return y;
  y[0] = std::pow(rng.uniform(), 1.0 / a);
  const double redraw = 1.0 / (a + 1.0);
  for (std::size_t j = 1; j < n; ++j) {
    const double u = rng.uniform();
    const double v = rng.uniform();
    y[j] = u >= y[j - 1] ? y[j - 1] : std::pow(v, redraw);
  }
  return y;
}

inline SampleSet doukhan_chain(double a, const TargetModel& target, std::size_t n, RngStream& rng)
{
  require(target.dim() == 1 && target.has_quantile(), "doukhan_chain: target needs a quantile");
  std::vector<double> y = doukhan_path(a, n, rng);
  for (double& v : y)
    v = target.quantile(std::pow(v, a));
  return SampleSet(1, std::move(y));
}

//! Z_0 ~ U[0, 1], Z_j = (Z_{j-1} + e_j) / 2 with fair bits e_j.
inline std::vector<double> dyadic_path(std::size_t n, std::size_t burn_in, RngStream& rng)
{
  std::vector<double> z(n);
  double cur = rng.uniform();
  for (std::size_t j = 0; j < burn_in; ++j)
    cur = 0.5 * (cur + rng.bit());
  for (std::size_t j = 0; j < n; ++j) {
    cur = 0.5 * (cur + rng.bit());
    z[j] = cur;
  }
  return z;
}

inline SampleSet dyadic_ar_chain(const TargetModel& target, std::size_t n, std::size_t burn_in,
                                 RngStream& rng)
{
  require(target.dim() == 1 && target.has_quantile(), "dyadic_ar_chain: target needs a quantile");
  std::vector<double> z = dyadic_path(n, burn_in, rng);
  for (double& v : z) {
    // Z can reach 0 or 1 only in the limit; guard the quantile's open domain.
    const double p = std::min(std::max(v, 0x1.0p-60), 1.0 - 0x1.0p-53);
    v = target.quantile(p);
  }
  return SampleSet(1, std::move(z));
}

inline SampleSet simulate(const ChainConfig& cfg, const TargetModel& target, std::size_t n,
                          RngStream& rng)
{
  switch (cfg.kind) {
    case ChainKind::IID: return sample_iid(target, n, rng);
    case ChainKind::DoukhanAlpha: return doukhan_chain(cfg.a, target, n, rng);
    case ChainKind::DyadicAR: return dyadic_ar_chain(target, n, cfg.burn_in, rng);
  }
  throw invalid_argument("simulate: unknown chain kind");
}

} // namespace ecfde
