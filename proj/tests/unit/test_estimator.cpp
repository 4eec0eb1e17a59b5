#include <ecfde/ecfde.hpp>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <sstream>

using namespace ecfde;

namespace {

EcfEstimate gaussian_estimate(std::size_t n, std::uint64_t seed, EstimatorOptions opt = {})
{
  const TargetModel m = make_model("N");
  RngStream rng(seed, 0);
  return estimate(sample_iid(m, n, rng), opt);
}

} // namespace

TEST(Domain, HyperbolicMembership)
{
  const IntegrationDomain full{ DomainKind::FullBox, 10.0 };
  const IntegrationDomain hyp{ DomainKind::HyperbolicDn, 10.0 };
  const double a[2] = { 4.0, 3.0 }, b[2] = { 9.0, 1.0 }, c[2] = { 11.0, 0.5 };
  EXPECT_TRUE(full.contains(a));
  EXPECT_FALSE(hyp.contains(a));
  EXPECT_TRUE(hyp.contains(b));
  EXPECT_FALSE(full.contains(c));
  EXPECT_EQ(parse_domain_kind("hyperbolic"), DomainKind::HyperbolicDn);
  EXPECT_THROW(parse_domain_kind("ball"), ecfde::invalid_argument);
}

TEST(DnVolume, ExactMatchesQuadrature)
{
  using boost::math::quadrature::gauss_kronrod;
  for (double n : { 10.0, 100.0, 1e4 }) {
    // Quarter area: int_0^n min(n, n / u) du.
    const double quarter = gauss_kronrod<double, 61>::integrate([](double) { return 1.0; }, 0.0, 1.0) * n +
                           gauss_kronrod<double, 61>::integrate([n](double u) { return n / u; }, 1.0, n,
                                                                20, 1e-14);
    EXPECT_NEAR(dn_volume(n, 2), 4.0 * quarter, 1e-8 * dn_volume(n, 2)) << n;
  }
  EXPECT_NEAR(dn_volume(10.0, 2), 132.10340371976183, 1e-9);
}

TEST(DnVolume, ThreeDimensionsAndAsymptotics)
{
  using boost::math::quadrature::gauss_kronrod;
  const double n = 50.0;
  // Octant volume: int over (u1, u2) in [0, n]^2 of min(n, n / (u1 u2)).
  const double octant = gauss_kronrod<double, 61>::integrate(
    [n](double u1) {
      return gauss_kronrod<double, 61>::integrate(
        [n, u1](double u2) { return std::min(n, n / (u1 * u2)); }, 0.0, n, 25, 1e-12);
    },
    0.0, n, 25, 1e-12);
  EXPECT_NEAR(dn_volume(n, 3), 8.0 * octant, 1e-6 * dn_volume(n, 3));
  const double big = 1e6;
  EXPECT_NEAR(dn_volume(big, 2) / dn_volume(big, 2, true), 1.0 + 1.0 / std::log(big), 1e-12);
  EXPECT_THROW(dn_volume(1.0, 2), ecfde::invalid_argument);
  EXPECT_THROW(dn_volume(10.0, 4), ecfde::invalid_argument);
}

TEST(Inversion, SeparableMatchesDirectSum)
{
  const EcfEstimate est = gaussian_estimate(400, 1);
  const IntegrationDomain domain{ DomainKind::FullBox, 400.0 };
  const SpatialGrid xg({ -3.0, -4.0 }, { 3.0, 4.0 }, { 7, 9 });
  const DensityEstimate unclipped = invert_to_density(est.tilde, domain, xg, false);
  for (std::size_t i = 0; i < xg.size(); ++i) {
    const auto x = xg.node(i);
    EXPECT_NEAR(unclipped.values[i], invert_at(est.tilde, domain, std::span<const double>(x.data(), 2)),
                1e-12);
  }
}

TEST(Inversion, HyperbolicDomainRestrictsSum)
{
  const EcfEstimate est = gaussian_estimate(300, 2, [] {
    EstimatorOptions o;
    o.kappa = 0.0;
    o.extent = { 4.0, 4.0 };
    o.points = { 25, 25 };
    return o;
  }());
  const IntegrationDomain hyp{ DomainKind::HyperbolicDn, 4.0 };
  const double x[2] = { 0.3, -0.2 };
  double manual = 0.0;
  const FrequencyGrid& g = est.tilde.grid;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const auto u = g.node(i);
    if (std::abs(u[0] * u[1]) <= 4.0)
      manual += (std::polar(1.0, -(u[0] * x[0] + u[1] * x[1])) * est.tilde[i]).real();
  }
  manual *= g.cell_volume() / std::pow(2 * std::numbers::pi, 2);
  EXPECT_NEAR(invert_at(est.tilde, hyp, x), manual, 1e-13);
}

TEST(Inversion, ClippedIsNonnegative)
{
  const EcfEstimate est = gaussian_estimate(200, 3);
  const DensityEstimate d = invert_to_density(est.tilde, { DomainKind::FullBox, 200.0 },
                                              default_spatial_grid(make_model("N").plot_box()));
  for (double v : d.values)
    EXPECT_GE(v, 0.0);
  EXPECT_EQ(d.values.size(), 201u * 201u);
}

TEST(Inversion, DomainMustCoverGrid)
{
  const EcfEstimate est = gaussian_estimate(50, 4);
  const double x[2] = { 0.0, 0.0 };
  EXPECT_THROW(invert_at(est.tilde, { DomainKind::FullBox, 0.5 }, x), ecfde::invalid_argument);
}

TEST(Risk, ZeroMaskGivesUnitNormalizedRisk)
{
  const TargetModel m = make_model("N");
  const auto g = make_grid({ 5.0, 5.0 }, { 31, 31 });
  const GridField zero(g, std::vector<cplx>(g.size()));
  const RiskResult r = l2_risk_fourier(zero, m, { DomainKind::FullBox, 100.0 });
  EXPECT_NEAR(r.normalized_risk, 1.0, 1e-12);
  EXPECT_NEAR(r.norm_f_sq, m.energy() / std::pow(2 * std::numbers::pi, 2), 1e-12);
}

TEST(Risk, ExactCfHasOnlyTailRisk)
{
  const TargetModel m = make_model("MixNN");
  const auto g = make_grid({ 2.0, 2.0 }, { 41, 41 });
  const RiskResult r = l2_risk_fourier(cf_evaluate(m, g), m, { DomainKind::FullBox, 100.0 });
  EXPECT_NEAR(r.risk, r.tail_correction / std::pow(2 * std::numbers::pi, 2), 1e-15);
  EXPECT_GT(r.tail_correction, 0.0);
  EXPECT_LE(r.tail_correction, r.tail_bound);
}

TEST(Risk, ParsevalAgreesWithSpatialRisk)
{
  const TargetModel m = make_model("N");
  const EcfEstimate est = gaussian_estimate(1000, 5);
  const IntegrationDomain domain{ DomainKind::FullBox, 1000.0 };
  const RiskResult fourier = l2_risk_fourier(est.tilde, m, domain);
  const RiskResult spatial =
    l2_risk_spatial(est.tilde, m, domain, period_grid(est.tilde.grid, m.plot_box()), false);
  EXPECT_NEAR(spatial.risk / fourier.risk, 1.0, 1e-2);
}

TEST(Clearance, DetectsBoundaryNodes)
{
  const auto g = make_grid({ 1.0, 1.0 }, { 5, 5 });
  std::vector<std::uint8_t> bits(25, 0);
  bits[12] = 1;
  EXPECT_TRUE(boundary_clearance(BinaryMask(g, bits)).clear);
  bits[4] = 1;
  EXPECT_FALSE(boundary_clearance(BinaryMask(g, bits)).clear);
}

TEST(Sobolev, RateFormulas)
{
  const SobolevRate iso = sobolev_rate({ { 1.0, 1.0 }, 1.0, std::nullopt }, 1e4);
  EXPECT_DOUBLE_EQ(iso.s_bar, 0.5);
  EXPECT_DOUBLE_EQ(iso.rate_exponent, 0.5);
  const SobolevRate aniso =
    sobolev_rate({ { 2.0, 1.0 }, 1.0, example1_model(2.0, 1.0, 2.0, -1.0).companion }, 1e4);
  EXPECT_NEAR(aniso.s_bar, 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(aniso.rate_exponent, 4.0 / 7.0, 1e-15);
  const double base = 1e4 / std::log(1e4);
  EXPECT_NEAR(aniso.m_star[0], std::pow(base, (4.0 / 3.0) / (2.0 * 2.0 * 7.0 / 3.0)), 1e-12);
  EXPECT_NEAR(aniso.rate_value, std::pow(base, -4.0 / 7.0), 1e-15);
  const SobolevRate one = sobolev_rate({ { 2.5 }, 1.0, std::nullopt }, 1e3);
  EXPECT_NEAR(one.rate_exponent, 5.0 / 6.0, 1e-15);
}

TEST(Sobolev, RejectsInvalidInput)
{
  EXPECT_THROW(sobolev_rate({ { 1.0, -1.0 }, 1.0, std::nullopt }, 100), ecfde::invalid_argument);
  EXPECT_THROW(sobolev_rate({ { 1.0, 1.0 }, 1.0, to_matrix({ { 1.0, 1.0 }, { 0.0, 1.0 } }) }, 100),
               ecfde::invalid_argument);
  EXPECT_THROW(sobolev_rate({ { 1.0 }, 1.0, std::nullopt }, 1.0), ecfde::invalid_argument);
}

TEST(Pipeline, AutomaticGridClearsBoundary)
{
  const EcfEstimate est = gaussian_estimate(2000, 7);
  ASSERT_TRUE(est.selection.has_value());
  EXPECT_TRUE(est.clearance.clear);
  EXPECT_GT(est.mask.count(), 1u);
  EXPECT_EQ(est.rule.kappa, est.selection->selected_kappa);
  for (std::size_t k = 0; k < 2; ++k)
    EXPECT_LE(est.grid().extent()[k], 2000.0);
}

TEST(Pipeline, FixedKappaAndGrid)
{
  EstimatorOptions opt;
  opt.kappa = 1.0;
  opt.extent = { 4.0, 4.0 };
  opt.points = { 33, 33 };
  const EcfEstimate est = gaussian_estimate(500, 8, opt);
  EXPECT_FALSE(est.selection.has_value());
  EXPECT_EQ(est.grid().points(), (std::vector<std::size_t>{ 33, 33 }));
  const BinaryMask again = threshold_mask(est.ecf, { ThresholdKind::SqrtLog, 1.0 }, 500);
  EXPECT_EQ(est.mask.bits, again.bits);
}

TEST(Pipeline, RejectsTinySamples)
{
  EXPECT_THROW(estimate(SampleSet(1, { 0.5 })), ecfde::invalid_argument);
}

TEST(DensityCsv, Header)
{
  DensityEstimate d{ SpatialGrid({ 0.0, 0.0 }, { 1.0, 1.0 }, { 2, 2 }), { 1, 2, 3, 4 } };
  std::ostringstream os;
  write_density_csv(os, d);
  EXPECT_EQ(os.str().substr(0, os.str().find('\n')), "x_1,x_2,fhat");
}
