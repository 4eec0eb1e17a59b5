#pragma once

#include "error.hpp"
#include "estimator.hpp"
#include "fourier.hpp"
#include "rng.hpp"
#include "simulate.hpp"
#include "targets.hpp"
#include "threshold.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <iomanip>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace ecfde {

inline GammaConvention parse_gamma_convention(const std::string& s)
{
  if (s == "shape-scale")
    return GammaConvention::shape_scale;
  if (s == "shape-rate")
    return GammaConvention::shape_rate;
  throw invalid_argument("unknown gamma convention '" + s + "'");
}

inline const char* to_string(GammaConvention c)
{
  return c == GammaConvention::shape_scale ? "shape-scale" : "shape-rate";
}

struct ExperimentPlan
{
  std::string model = "N";
  ModelParams params;
  GammaConvention convention = GammaConvention::shape_scale;
  ChainConfig chain;
  std::vector<std::size_t> n_values{ 1000 };
  std::size_t replications = 100;
  std::uint64_t seed = 1;
  EstimatorOptions estimator;
  DomainKind domain = DomainKind::FullBox;
};

namespace detail {

template<class T>
std::string join(const std::vector<T>& v)
{
  std::ostringstream os;
  os << std::setprecision(17);
  for (std::size_t i = 0; i < v.size(); ++i)
    os << (i ? "," : "") << v[i];
  return os.str();
}

template<class T>
std::vector<T> split(const std::string& s, const char* what)
{
  std::vector<T> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    if (b == std::string::npos)
      continue;
    std::istringstream is(item.substr(b));
    T v{};
    is >> v;
    if (is.fail())
      throw invalid_argument(std::string("plan: cannot parse ") + what + " '" + item + "'");
    out.push_back(v);
  }
  return out;
}

} // namespace detail

//! INI layout:
//!   [experiment] model, chain, a, burn_in, n_values, replications, seed, gamma_convention
//!   [selection]  mode (adaptive|fixed), kappa, delta, kappa_max, window, step, rule
//!   [grid]       extent, points (empty for automatic), oversample, growth, budget, domain
//!   [params]     model parameters, key = value
inline void write_plan(std::ostream& os, const ExperimentPlan& p)
{
  namespace pt = boost::property_tree;
  pt::ptree t;
  const EstimatorOptions& e = p.estimator;
  t.put("experiment.model", p.model);
  t.put("experiment.chain", to_string(p.chain.kind));
  t.put("experiment.a", detail::join(std::vector<double>{ p.chain.a }));
  t.put("experiment.burn_in", p.chain.burn_in);
  t.put("experiment.n_values", detail::join(p.n_values));
  t.put("experiment.replications", p.replications);
  t.put("experiment.seed", p.seed);
  t.put("experiment.gamma_convention", to_string(p.convention));
  t.put("selection.mode", e.kappa ? "fixed" : "adaptive");
  t.put("selection.kappa", detail::join(std::vector<double>{ e.kappa.value_or(1.0) }));
  t.put("selection.delta", detail::join(std::vector<double>{ e.delta }));
  t.put("selection.kappa_max", detail::join(std::vector<double>{ e.kappa_max }));
  t.put("selection.window", e.window);
  t.put("selection.step", to_string(e.step));
  t.put("selection.rule", to_string(e.rule));
  t.put("grid.extent", detail::join(e.extent));
  t.put("grid.points", detail::join(e.points));
  t.put("grid.oversample", detail::join(std::vector<double>{ e.oversample }));
  t.put("grid.growth", detail::join(std::vector<double>{ e.growth }));
  t.put("grid.budget", e.budget);
  t.put("grid.domain", to_string(p.domain));
  for (const auto& [k, v] : p.params)
    t.put("params." + k, detail::join(std::vector<double>{ v }));
  pt::write_ini(os, t);
}

inline ExperimentPlan read_plan(std::istream& is)
{
  namespace pt = boost::property_tree;
  pt::ptree t;
  try {
    pt::read_ini(is, t);
  } catch (const pt::ini_parser_error& err) {
    throw invalid_argument(std::string("plan: ") + err.what());
  }
  ExperimentPlan p;
  EstimatorOptions& e = p.estimator;
  try {
    p.model = t.get("experiment.model", p.model);
    p.chain.kind = parse_chain_kind(t.get<std::string>("experiment.chain", "iid"));
    p.chain.a = t.get("experiment.a", p.chain.a);
    p.chain.burn_in = t.get("experiment.burn_in", p.chain.burn_in);
    if (auto nv = t.get_optional<std::string>("experiment.n_values"))
      p.n_values = detail::split<std::size_t>(*nv, "n_values");
    p.replications = t.get("experiment.replications", p.replications);
    p.seed = t.get("experiment.seed", p.seed);
    p.convention =
      parse_gamma_convention(t.get<std::string>("experiment.gamma_convention", "shape-scale"));
    const std::string mode = t.get<std::string>("selection.mode", "adaptive");
    if (mode == "fixed")
      e.kappa = t.get("selection.kappa", 1.0);
    else if (mode != "adaptive")
      throw invalid_argument("plan: selection.mode must be adaptive or fixed");
    e.delta = t.get("selection.delta", e.delta);
    e.kappa_max = t.get("selection.kappa_max", e.kappa_max);
    e.window = t.get("selection.window", e.window);
    e.step = parse_stabilization_step(t.get<std::string>("selection.step", "index"));
    e.rule = parse_threshold_kind(t.get<std::string>("selection.rule", "sqrtlog"));
    e.extent = detail::split<double>(t.get<std::string>("grid.extent", ""), "extent");
    e.points = detail::split<std::size_t>(t.get<std::string>("grid.points", ""), "points");
    e.oversample = t.get("grid.oversample", e.oversample);
    e.growth = t.get("grid.growth", e.growth);
    e.budget = t.get("grid.budget", e.budget);
    p.domain = parse_domain_kind(t.get<std::string>("grid.domain", "full"));
    if (auto params = t.get_child_optional("params"))
      for (const auto& [k, v] : *params)
        p.params[k] = v.get_value<double>();
  } catch (const pt::ptree_error& err) {
    throw invalid_argument(std::string("plan: ") + err.what());
  }
  require(p.replications >= 2, "plan: replications must be at least 2");
  require(!p.n_values.empty(), "plan: n_values must not be empty");
  return p;
}

struct ReplicationRecord
{
  std::size_t n = 0;
  std::size_t replication = 0;
  double risk = 0.0; //!< normalized
  double kappa = 0.0;
  bool stabilized = true;
  bool boundary_clear = true;
  bool failed = false;
  std::size_t mask_size = 0;
  double tail_correction = 0.0;
  std::size_t grid_nodes = 0;
  std::string error;
};

struct RiskRow
{
  std::string model;
  std::string chain;
  double a = 0.0;
  std::size_t n = 0;
  std::size_t count = 0; //!< successful replications
  double risk_mean = 0.0, risk_std = 0.0;
  double kappa_mean = 0.0, kappa_std = 0.0;
  std::size_t not_stabilized = 0;
  std::size_t boundary_violations = 0;
  std::size_t failures = 0;
  double wall_seconds = 0.0;

  double risk_se() const { return count > 0 ? risk_std / std::sqrt(static_cast<double>(count)) : 0.0; }
  double failure_fraction() const
  {
    const auto total = count + failures;
    return total ? static_cast<double>(failures) / static_cast<double>(total) : 0.0;
  }
};

struct RiskReport
{
  std::vector<RiskRow> rows;
  std::vector<ReplicationRecord> replications;
};

//! Welford running mean and sample variance.
class RunningStats
{
public:
  void add(double x)
  {
    ++count_;
    const double d = x - mean_;
    mean_ += d / static_cast<double>(count_);
    m2_ += d * (x - mean_);
  }
  std::size_t count() const { return count_; }
  double mean() const { return mean_; }
  double variance() const { return count_ > 1 ? m2_ / static_cast<double>(count_ - 1) : 0.0; }
  double stddev() const { return std::sqrt(variance()); }

private:
  std::size_t count_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
};

inline TargetModel plan_model(const ExperimentPlan& plan)
{
  return make_model(plan.model, plan.params, plan.convention);
}

//! One replication: simulate, estimate, score.
inline ReplicationRecord run_replication(const ExperimentPlan& plan, const TargetModel& model,
                                         std::size_t n, std::uint64_t cell_seed, std::size_t r)
{
  ReplicationRecord rec;
  rec.n = n;
  rec.replication = r;
  try {
    RngStream rng(cell_seed, r);
    const SampleSet x = simulate(plan.chain, model, n, rng);
    const EcfEstimate est = estimate(x, plan.estimator);
    const RiskResult risk =
      l2_risk_fourier(est.tilde, model, { plan.domain, static_cast<double>(n) });
    rec.risk = risk.normalized_risk;
    rec.kappa = est.rule.kappa;
    rec.stabilized = !est.selection || est.selection->stabilized;
    rec.boundary_clear = est.clearance.clear;
    rec.failed = !rec.stabilized || !rec.boundary_clear;
    rec.mask_size = est.mask.count();
    rec.tail_correction = risk.tail_correction;
    rec.grid_nodes = est.grid().size();
  } catch (const std::exception& err) {
    rec.failed = true;
    rec.error = err.what();
  }
  return rec;
}

//! Aggregates one (model, n) cell from its replication records.
inline RiskRow aggregate(const ExperimentPlan& plan, std::size_t n,
                         const std::vector<ReplicationRecord>& recs)
{
  RiskRow row;
  row.model = plan.model;
  row.chain = to_string(plan.chain.kind);
  row.a = plan.chain.kind == ChainKind::DoukhanAlpha ? plan.chain.a : 0.0;
  row.n = n;
  RunningStats risk, kappa;
  for (const auto& r : recs) {
    row.not_stabilized += !r.stabilized;
    row.boundary_violations += !r.boundary_clear;
    if (r.failed) {
      ++row.failures;
      continue;
    }
    risk.add(r.risk);
    kappa.add(r.kappa);
  }
  row.count = risk.count();
  row.risk_mean = risk.mean();
  row.risk_std = risk.stddev();
  row.kappa_mean = kappa.mean();
  row.kappa_std = kappa.stddev();
  return row;
}

inline std::uint64_t cell_seed(std::uint64_t seed, std::size_t cell)
{
  return mix_seed(seed ^ static_cast<std::uint64_t>(cell));
}

//! Runs every (n, replication) pair of the plan. Replication r of cell c
//! uses the stream (mix(seed ^ c), r), so results do not depend on the
//! order or parallelism of execution.
inline RiskReport run_experiment(const ExperimentPlan& plan,
                                 const std::function<void(const RiskRow&)>& on_row = {})
{
  require(plan.replications >= 2, "run_experiment: replications must be at least 2");
  require(!plan.n_values.empty(), "run_experiment: n_values must not be empty");
  const TargetModel model = plan_model(plan);
  RiskReport report;
  for (std::size_t c = 0; c < plan.n_values.size(); ++c) {
    const std::size_t n = plan.n_values[c];
    const auto start = std::chrono::steady_clock::now();
    std::vector<ReplicationRecord> recs(plan.replications);
    const std::uint64_t seed = cell_seed(plan.seed, c);
#pragma omp parallel for schedule(dynamic, 1)
    for (std::ptrdiff_t r = 0; r < static_cast<std::ptrdiff_t>(plan.replications); ++r)
      recs[static_cast<std::size_t>(r)] =
        run_replication(plan, model, n, seed, static_cast<std::size_t>(r));
    RiskRow row = aggregate(plan, n, recs);
    row.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (on_row)
      on_row(row);
    report.rows.push_back(row);
    report.replications.insert(report.replications.end(), recs.begin(), recs.end());
  }
  return report;
}

inline void write_report_csv(std::ostream& os, const RiskReport& report)
{
  os << "model,chain,n,risk_mean_x100,risk_std_x100,kappa_mean,kappa_std,failures\n";
  os << std::setprecision(8);
  for (const auto& r : report.rows) {
    os << r.model << ',' << r.chain;
    if (r.chain == std::string("doukhan"))
      os << "(a=" << r.a << ')';
    os << ',' << r.n << ',' << 100.0 * r.risk_mean << ',' << 100.0 * r.risk_std << ','
       << r.kappa_mean << ',' << r.kappa_std << ',' << r.failures << '\n';
  }
}

inline void write_replications_csv(std::ostream& os, const RiskReport& report)
{
  os << "n,replication,risk,kappa,stabilized,boundary_clear,failed,mask_size,tail_correction,"
        "grid_nodes,error\n";
  os << std::setprecision(17);
  for (const auto& r : report.replications)
    os << r.n << ',' << r.replication << ',' << r.risk << ',' << r.kappa << ',' << r.stabilized
       << ',' << r.boundary_clear << ',' << r.failed << ',' << r.mask_size << ','
       << r.tail_correction << ',' << r.grid_nodes << ",\"" << r.error << "\"\n";
}

// ---------------------------------------------------------------------------
// Reference cells and tolerance policy

struct ReferenceCell
{
  std::string model;
  ChainKind chain;
  double a; //!< Doukhan exponent, 0 otherwise
  std::size_t n;
  double risk_x100, risk_std_x100;
  double kappa, kappa_std;
};

//! Published risks (x100) and selected kappas for the benchmark cells.
inline const std::vector<ReferenceCell>& reference_cells()
{
  using C = ChainKind;
  static const std::vector<ReferenceCell> cells = {
    { "N", C::IID, 0, 1000, 1.04, 0.56, 0.88, 0.19 },
    { "N", C::IID, 0, 10000, 0.12, 0.05, 0.81, 0.15 },
    { "N", C::IID, 0, 100000, 1.32e-2, 0.58e-2, 0.79, 0.13 },
    { "MixNN", C::IID, 0, 1000, 3.02, 0.59, 1.06, 0.09 },
    { "MixNN", C::IID, 0, 10000, 0.39, 0.07, 1.01, 0.09 },
    { "MixNN", C::IID, 0, 100000, 4.70e-2, 1.05e-2, 0.94, 0.09 },
    { "GB", C::IID, 0, 1000, 5.96, 1.47, 1.09, 0.08 },
    { "GB", C::IID, 0, 10000, 1.65, 0.24, 1.01, 0.09 },
    { "GB", C::IID, 0, 100000, 0.27, 0.08, 1.00, 0.15 },
    { "Gamma32", C::DoukhanAlpha, 3, 500, 1.66, 0.88, 0.74, 0.26 },
    { "Gamma32", C::DoukhanAlpha, 6, 500, 1.37, 0.65, 0.62, 0.22 },
    { "Gamma32", C::DoukhanAlpha, 10, 500, 1.20, 0.59, 0.55, 0.20 },
    { "Gamma32", C::DoukhanAlpha, 3, 2000, 0.57, 0.28, 0.72, 0.24 },
    { "Gamma32", C::DoukhanAlpha, 6, 2000, 0.49, 0.23, 0.61, 0.22 },
    { "Gamma32", C::DoukhanAlpha, 10, 2000, 0.42, 0.20, 0.57, 0.23 },
    { "Gamma32", C::DoukhanAlpha, 3, 5000, 0.28, 0.13, 0.73, 0.27 },
    { "Gamma32", C::DoukhanAlpha, 6, 5000, 0.22, 0.10, 0.61, 0.23 },
    { "Gamma32", C::DoukhanAlpha, 10, 5000, 0.19, 0.08, 0.46, 0.19 },
    { "Mix1D", C::DoukhanAlpha, 3, 500, 3.32, 1.68, 0.76, 0.16 },
    { "Mix1D", C::DoukhanAlpha, 6, 500, 2.62, 0.69, 0.69, 0.18 },
    { "Mix1D", C::DoukhanAlpha, 10, 500, 2.44, 0.91, 0.68, 0.20 },
    { "Mix1D", C::DoukhanAlpha, 3, 2000, 0.91, 0.43, 0.71, 0.16 },
    { "Mix1D", C::DoukhanAlpha, 6, 2000, 0.72, 0.34, 0.62, 0.17 },
    { "Mix1D", C::DoukhanAlpha, 10, 2000, 0.65, 0.24, 0.58, 0.16 },
    { "Mix1D", C::DoukhanAlpha, 3, 5000, 0.51, 0.23, 0.76, 0.15 },
    { "Mix1D", C::DoukhanAlpha, 6, 5000, 0.38, 0.15, 0.67, 0.15 },
    { "Mix1D", C::DoukhanAlpha, 10, 5000, 0.34, 0.13, 0.64, 0.16 },
    // The dyadic chain cells are reported as raw risks: 8.62e-3 etc.
    { "Gamma32", C::DyadicAR, 0, 500, 0.862, 0.540, 0.12, 0.06 },
    { "Gamma32", C::DyadicAR, 0, 2000, 0.257, 0.139, 0.12, 0.05 },
    { "Gamma32", C::DyadicAR, 0, 5000, 0.125, 0.067, 0.13, 0.05 },
  };
  return cells;
}

inline std::optional<ReferenceCell> find_reference(const std::string& model, ChainKind chain,
                                                   double a, std::size_t n)
{
  for (const auto& c : reference_cells())
    if (c.model == model && c.chain == chain && c.n == n &&
        (chain != ChainKind::DoukhanAlpha || c.a == a))
      return c;
  return std::nullopt;
}

//! |mean - reference| <= max(3 standard errors, 25% of the reference).
inline bool within_tolerance(double mean, double standard_error, double reference)
{
  return std::abs(mean - reference) <= std::max(3.0 * standard_error, 0.25 * std::abs(reference));
}

struct CheckOutcome
{
  bool has_reference = false;
  bool risk_ok = true;
  bool failures_ok = true;
  double reference_x100 = 0.0;

  bool ok() const { return risk_ok && failures_ok; }
};

inline CheckOutcome check_row(const RiskRow& row)
{
  CheckOutcome out;
  out.failures_ok = row.failure_fraction() <= 0.05;
  const ChainKind kind = parse_chain_kind(row.chain);
  if (auto ref = find_reference(row.model, kind, row.a, row.n)) {
    out.has_reference = true;
    out.reference_x100 = ref->risk_x100;
    out.risk_ok = within_tolerance(100.0 * row.risk_mean, 100.0 * row.risk_se(), ref->risk_x100);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Deviation experiment

struct DeviationResult
{
  double empirical_prob = 0.0;
  double bound = 0.0;
  std::size_t events = 0;
  std::size_t trials = 0;
};

//! Frequency of |ecf(u) - cf(u)| >= b sqrt(log n / n) over i.i.d. replications
//! and probe frequencies, next to the bound 4 n^(-b^2 / 4).
inline DeviationResult deviation_experiment(const TargetModel& model, std::size_t n, double b,
                                            const std::vector<std::vector<double>>& probes,
                                            std::size_t replications, std::uint64_t seed)
{
  require(n >= 2, "deviation_experiment: n must be at least 2");
  require(b >= 0.0, "deviation_experiment: b must be nonnegative");
  const std::size_t d = model.dim();
  for (const auto& u : probes)
    require(u.size() == d, "deviation_experiment: probe dimension mismatch");
  const double nn = static_cast<double>(n);
  const double radius = b * std::sqrt(std::log(nn) / nn);
  std::vector<cplx> truth;
  for (const auto& u : probes)
    truth.push_back(model.cf(u));

  std::vector<std::size_t> hits(replications, 0);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t r = 0; r < static_cast<std::ptrdiff_t>(replications); ++r) {
    RngStream rng(seed, static_cast<std::uint64_t>(r));
    const SampleSet x = sample_iid(model, n, rng);
    std::size_t h = 0;
    for (std::size_t p = 0; p < probes.size(); ++p) {
      double re = 0.0, im = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        double arg = 0.0;
        for (std::size_t k = 0; k < d; ++k)
          arg += probes[p][k] * x(j, k);
        re += std::cos(arg);
        im += std::sin(arg);
      }
      h += std::abs(cplx(re / nn, im / nn) - truth[p]) >= radius;
    }
    hits[static_cast<std::size_t>(r)] = h;
  }
  DeviationResult out;
  for (auto h : hits)
    out.events += h;
  out.trials = replications * probes.size();
  out.empirical_prob =
    out.trials ? static_cast<double>(out.events) / static_cast<double>(out.trials) : 0.0;
  out.bound = 4.0 * std::pow(nn, -b * b / 4.0);
  return out;
}

// ---------------------------------------------------------------------------
// Rate study

struct LogLogFit
{
  double slope = 0.0;
  double intercept = 0.0;
};

//! Least-squares line through (log x, log y).
inline LogLogFit fit_loglog(const std::vector<double>& x, const std::vector<double>& y)
{
  require(x.size() == y.size() && x.size() >= 2, "fit_loglog: need matching samples");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double m = static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    require(x[i] > 0.0 && y[i] > 0.0, "fit_loglog: values must be positive");
    const double lx = std::log(x[i]), ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  LogLogFit f;
  f.slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
  f.intercept = (sy - f.slope * sx) / m;
  return f;
}

struct RateStudy
{
  std::vector<std::size_t> n;
  std::vector<double> mean_risk;
  LogLogFit fit;
  double theoretical_slope = 0.0;
  RiskReport report;
};

inline void check_rate_sizes(const std::vector<std::size_t>& n_values)
{
  require(n_values.size() >= 3, "rate_study: at least three sample sizes are required");
  const auto [lo, hi] = std::minmax_element(n_values.begin(), n_values.end());
  require(*lo >= 2 && std::log10(static_cast<double>(*hi) / static_cast<double>(*lo)) >= 1.5,
          "rate_study: sample sizes must span at least 1.5 decades");
}

//! Mean normalized risk at each n of the plan, with the fitted log-log slope
//! and the slope -2 s_bar / (2 s_bar + 1) implied by smoothness `s`.
inline RateStudy rate_study(const ExperimentPlan& plan, const std::vector<double>& s)
{
  check_rate_sizes(plan.n_values);
  RateStudy out;
  out.report = run_experiment(plan);
  std::vector<double> xs;
  for (const auto& row : out.report.rows) {
    out.n.push_back(row.n);
    out.mean_risk.push_back(row.risk_mean);
    xs.push_back(static_cast<double>(row.n));
  }
  out.fit = fit_loglog(xs, out.mean_risk);
  out.theoretical_slope = -sobolev_rate({ s, 1.0, std::nullopt }, 1e3).rate_exponent;
  return out;
}

} // namespace ecfde
