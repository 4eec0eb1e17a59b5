#include <ecfde/ecfde.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

using namespace ecfde;

namespace {

ExperimentPlan small_plan()
{
  ExperimentPlan p;
  p.model = "Gamma32";
  p.chain.kind = ChainKind::DoukhanAlpha;
  p.chain.a = 6.0;
  p.n_values = { 200, 400 };
  p.replications = 6;
  p.seed = 17;
  return p;
}

} // namespace

TEST(Plan, IniRoundTrip)
{
  ExperimentPlan p = small_plan();
  p.params["shape"] = 2.5;
  p.convention = GammaConvention::shape_rate;
  p.estimator.kappa = 0.75;
  p.estimator.delta = 0.1;
  p.estimator.window = 2;
  p.estimator.step = StabilizationStep::Unit;
  p.estimator.rule = ThresholdKind::Log;
  p.estimator.extent = { 3.5 };
  p.estimator.points = { 51 };
  p.domain = DomainKind::FullBox;
  std::stringstream ss;
  write_plan(ss, p);
  const ExperimentPlan q = read_plan(ss);
  EXPECT_EQ(q.model, p.model);
  EXPECT_EQ(q.params, p.params);
  EXPECT_EQ(q.convention, p.convention);
  EXPECT_EQ(q.chain.kind, p.chain.kind);
  EXPECT_EQ(q.chain.a, p.chain.a);
  EXPECT_EQ(q.n_values, p.n_values);
  EXPECT_EQ(q.replications, p.replications);
  EXPECT_EQ(q.seed, p.seed);
  EXPECT_EQ(q.estimator.kappa, p.estimator.kappa);
  EXPECT_EQ(q.estimator.delta, p.estimator.delta);
  EXPECT_EQ(q.estimator.window, p.estimator.window);
  EXPECT_EQ(q.estimator.step, p.estimator.step);
  EXPECT_EQ(q.estimator.rule, p.estimator.rule);
  EXPECT_EQ(q.estimator.extent, p.estimator.extent);
  EXPECT_EQ(q.estimator.points, p.estimator.points);
  std::stringstream again;
  write_plan(again, q);
  std::stringstream first;
  write_plan(first, p);
  EXPECT_EQ(again.str(), first.str());
}

TEST(Plan, RejectsMalformedInput)
{
  std::istringstream bad_mode("[selection]\nmode = sometimes\n");
  EXPECT_THROW(read_plan(bad_mode), ecfde::invalid_argument);
  std::istringstream bad_n("[experiment]\nn_values = 10,abc\n");
  EXPECT_THROW(read_plan(bad_n), ecfde::invalid_argument);
  std::istringstream bad_reps("[experiment]\nreplications = 1\n");
  EXPECT_THROW(read_plan(bad_reps), ecfde::invalid_argument);
  std::istringstream bad_chain("[experiment]\nchain = markov\n");
  EXPECT_THROW(read_plan(bad_chain), ecfde::invalid_argument);
}

TEST(Stats, RunningStatsMatchesTwoPass)
{
  const std::vector<double> x{ 1.5, 2.0, -0.5, 4.25, 3.0 };
  RunningStats s;
  double mean = 0.0;
  for (double v : x) {
    s.add(v);
    mean += v;
  }
  mean /= 5.0;
  double var = 0.0;
  for (double v : x)
    var += (v - mean) * (v - mean);
  EXPECT_NEAR(s.mean(), mean, 1e-15);
  EXPECT_NEAR(s.variance(), var / 4.0, 1e-14);
}

TEST(Aggregate, FailuresExcludedButCounted)
{
  ExperimentPlan p = small_plan();
  std::vector<ReplicationRecord> recs(4);
  for (std::size_t i = 0; i < recs.size(); ++i) {
    recs[i].risk = 0.01 * static_cast<double>(i + 1);
    recs[i].kappa = 0.5;
  }
  recs[3].failed = true;
  recs[3].stabilized = false;
  const RiskRow row = aggregate(p, 100, recs);
  EXPECT_EQ(row.count, 3u);
  EXPECT_EQ(row.failures, 1u);
  EXPECT_EQ(row.not_stabilized, 1u);
  EXPECT_NEAR(row.risk_mean, 0.02, 1e-15);
  EXPECT_NEAR(row.failure_fraction(), 0.25, 1e-15);
  EXPECT_FALSE(check_row(row).failures_ok);
}

TEST(Tolerance, Policy)
{
  EXPECT_TRUE(within_tolerance(1.25, 0.0, 1.0));
  EXPECT_FALSE(within_tolerance(1.26, 0.0, 1.0));
  EXPECT_TRUE(within_tolerance(1.5, 0.2, 1.0));
  const auto ref = find_reference("GB", ChainKind::IID, 0.0, 1000);
  ASSERT_TRUE(ref.has_value());
  EXPECT_DOUBLE_EQ(ref->risk_x100, 5.96);
  EXPECT_TRUE(find_reference("Gamma32", ChainKind::DoukhanAlpha, 6.0, 2000).has_value());
  EXPECT_FALSE(find_reference("Gamma32", ChainKind::DoukhanAlpha, 4.0, 2000).has_value());
}

TEST(Experiment, DeterministicAcrossThreadCounts)
{
  const ExperimentPlan p = small_plan();
  set_thread_count(1);
  const RiskReport a = run_experiment(p);
  set_thread_count(3);
  const RiskReport b = run_experiment(p);
  set_thread_count(default_thread_count());
  ASSERT_EQ(a.replications.size(), b.replications.size());
  for (std::size_t i = 0; i < a.replications.size(); ++i) {
    EXPECT_EQ(a.replications[i].risk, b.replications[i].risk);
    EXPECT_EQ(a.replications[i].kappa, b.replications[i].kappa);
  }
  std::ostringstream ca, cb;
  write_report_csv(ca, a);
  write_report_csv(cb, b);
  EXPECT_EQ(ca.str(), cb.str());
}

TEST(Experiment, ReportLayout)
{
  ExperimentPlan p = small_plan();
  p.n_values = { 150 };
  const RiskReport r = run_experiment(p);
  std::ostringstream os;
  write_report_csv(os, r);
  std::istringstream is(os.str());
  std::string header, line;
  std::getline(is, header);
  std::getline(is, line);
  EXPECT_EQ(header, "model,chain,n,risk_mean_x100,risk_std_x100,kappa_mean,kappa_std,failures");
  EXPECT_EQ(line.rfind("Gamma32,doukhan(a=6),150,", 0), 0u);
  std::ostringstream rs;
  write_replications_csv(rs, r);
  const std::string reps = rs.str();
  EXPECT_EQ(std::count(reps.begin(), reps.end(), '\n'), 7);
}

TEST(Deviation, CountsAndBound)
{
  const TargetModel m = make_model("N");
  const std::vector<std::vector<double>> probes{ { 0.5, 0.1 }, { -1.0, 0.7 } };
  const DeviationResult zero = deviation_experiment(m, 100, 0.0, probes, 20, 1);
  EXPECT_EQ(zero.events, zero.trials);
  const DeviationResult r = deviation_experiment(m, 500, 2.0, probes, 200, 1);
  EXPECT_EQ(r.trials, 400u);
  EXPECT_NEAR(r.bound, 4.0 / 500.0, 1e-15);
  EXPECT_LE(r.empirical_prob, r.bound);
}

TEST(RateStudy, FitLogLogRecoversSlope)
{
  std::vector<double> x{ 1e2, 1e3, 1e4, 1e5 }, y;
  for (double v : x)
    y.push_back(3.0 * std::pow(v, -0.5));
  const LogLogFit f = fit_loglog(x, y);
  EXPECT_NEAR(f.slope, -0.5, 1e-12);
  EXPECT_NEAR(f.intercept, std::log(3.0), 1e-10);
}

TEST(RateStudy, RequiresThreeSizesOverOneAndAHalfDecades)
{
  ExperimentPlan p = small_plan();
  p.n_values = { 1000, 10000 };
  EXPECT_THROW(rate_study(p, { 2.5 }), ecfde::invalid_argument);
  p.n_values = { 1000, 2000, 10000 };
  EXPECT_THROW(rate_study(p, { 2.5 }), ecfde::invalid_argument);
}

TEST(GammaConventionNames, RoundTrip)
{
  EXPECT_EQ(parse_gamma_convention("shape-rate"), GammaConvention::shape_rate);
  EXPECT_EQ(parse_gamma_convention(to_string(GammaConvention::shape_scale)), GammaConvention::shape_scale);
  EXPECT_THROW(parse_gamma_convention("rate"), ecfde::invalid_argument);
}
