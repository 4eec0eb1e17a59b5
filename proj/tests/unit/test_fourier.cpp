#include <ecfde/ecfde.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <complex>
#include <sstream>

using namespace ecfde;

namespace {

SampleSet random_samples(std::size_t d, std::size_t n, std::uint64_t seed)
{
  RngStream rng(seed, 0);
  std::vector<double> v(n * d);
  for (auto& x : v)
    x = 6.0 * rng.uniform() - 3.0;
  return SampleSet(d, std::move(v));
}

cplx direct_ecf(const SampleSet& x, std::span<const double> u)
{
  cplx acc{};
  for (std::size_t j = 0; j < x.size(); ++j) {
    double arg = 0.0;
    for (std::size_t k = 0; k < x.dim(); ++k)
      arg += u[k] * x(j, k);
    acc += std::polar(1.0, arg);
  }
  return acc / static_cast<double>(x.size());
}

} // namespace

TEST(FrequencyGrid, RejectsEvenCounts)
{
  EXPECT_THROW(make_grid({ 1.0 }, { 4 }), ecfde::invalid_argument);
  EXPECT_THROW(make_grid({ 1.0, 1.0 }, { 5, 2 }), ecfde::invalid_argument);
}

TEST(FrequencyGrid, BudgetCheckedFirst)
{
  try {
    make_grid({ 1.0 }, { std::size_t{ 1 } << 25 });
    FAIL();
  } catch (const ecfde::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("budget"), std::string::npos);
  }
}

TEST(FrequencyGrid, OriginIsCentreNode)
{
  const auto g = make_grid({ 2.0, 3.0 }, { 5, 7 });
  const auto u = g.node(g.center_index());
  EXPECT_EQ(u[0], 0.0);
  EXPECT_EQ(u[1], 0.0);
  EXPECT_DOUBLE_EQ(g.coordinate(0, 0), -2.0);
  EXPECT_DOUBLE_EQ(g.coordinate(1, 6), 3.0);
  EXPECT_DOUBLE_EQ(g.cell_volume(), 1.0 * 1.0);
}

TEST(FrequencyGrid, MirrorNegatesNode)
{
  const auto g = make_grid({ 2.0, 3.0, 1.0 }, { 5, 7, 3 });
  for (std::size_t i = 0; i < g.size(); ++i) {
    const auto a = g.node(i), b = g.node(g.mirror(i));
    for (std::size_t k = 0; k < 3; ++k)
      EXPECT_DOUBLE_EQ(a[k], -b[k]);
  }
}

TEST(Ecf, MatchesDirectSum)
{
  for (std::size_t d = 1; d <= 3; ++d) {
    const SampleSet x = random_samples(d, 150, 10 + d);
    const std::vector<std::size_t> pts = d == 1 ? std::vector<std::size_t>{ 101 }
                                     : d == 2 ? std::vector<std::size_t>{ 21, 17 }
                                              : std::vector<std::size_t>{ 7, 9, 5 };
    const auto g = make_grid(std::vector<double>(d, 4.0), pts);
    const GridField f = ecf_evaluate(x, g);
    for (std::size_t i = 0; i < g.size(); ++i) {
      const auto u = g.node(i);
      const cplx want = direct_ecf(x, std::span<const double>(u.data(), d));
      EXPECT_NEAR(std::abs(f[i] - want), 0.0, 1e-12) << "d=" << d << " node " << i;
    }
  }
}

TEST(Ecf, SymmetryModulusAndOrigin)
{
  const SampleSet x = random_samples(2, 300, 3);
  const auto g = make_grid({ 5.0, 5.0 }, { 31, 31 });
  const GridField f = ecf_evaluate(x, g);
  EXPECT_EQ(f[g.center_index()], cplx(1.0, 0.0));
  for (std::size_t i = 0; i < g.size(); ++i) {
    EXPECT_EQ(f[i], std::conj(f[g.mirror(i)]));
    EXPECT_LE(std::abs(f[i]), 1.0 + 1e-12);
  }
}

TEST(Ecf, ShiftMultipliesByPhase)
{
  const SampleSet x = random_samples(2, 200, 4);
  const double c[2] = { 0.7, -1.3 };
  std::vector<double> shifted = x.data();
  for (std::size_t j = 0; j < x.size(); ++j)
    for (std::size_t k = 0; k < 2; ++k)
      shifted[j * 2 + k] += c[k];
  const SampleSet y(2, shifted);
  const auto g = make_grid({ 3.0, 3.0 }, { 25, 25 });
  const GridField fx = ecf_evaluate(x, g), fy = ecf_evaluate(y, g);
  for (std::size_t i = 0; i < g.size(); ++i) {
    const auto u = g.node(i);
    const cplx phase = std::polar(1.0, u[0] * c[0] + u[1] * c[1]);
    EXPECT_NEAR(std::abs(fy[i] - phase * fx[i]), 0.0, 1e-10);
  }
}

TEST(Ecf, ConcatenationIsWeightedAverage)
{
  const SampleSet a = random_samples(1, 120, 5), b = random_samples(1, 80, 6);
  std::vector<double> all = a.data();
  all.insert(all.end(), b.data().begin(), b.data().end());
  const SampleSet ab(1, all);
  const auto g = make_grid({ 10.0 }, { 201 });
  const GridField fa = ecf_evaluate(a, g), fb = ecf_evaluate(b, g), fab = ecf_evaluate(ab, g);
  for (std::size_t i = 0; i < g.size(); ++i)
    EXPECT_NEAR(std::abs(fab[i] - (0.6 * fa[i] + 0.4 * fb[i])), 0.0, 1e-12);
}

TEST(Ecf, IdenticalForAnyThreadCount)
{
  const SampleSet x = random_samples(2, 700, 8);
  const auto g = make_grid({ 4.0, 4.0 }, { 41, 41 });
  set_thread_count(1);
  const GridField one = ecf_evaluate(x, g);
  set_thread_count(3);
  const GridField three = ecf_evaluate(x, g);
  set_thread_count(default_thread_count());
  EXPECT_EQ(one.values, three.values);
}

TEST(Ecf, RejectsEmptySample)
{
  EXPECT_THROW(ecf_evaluate(SampleSet(1, {}), make_grid({ 1.0 }, { 3 })), ecfde::invalid_argument);
}

TEST(CfEvaluate, MatchesModel)
{
  const TargetModel m = make_model("N");
  const auto g = make_grid({ 2.0, 2.0 }, { 9, 9 });
  const GridField f = cf_evaluate(m, g);
  for (std::size_t i = 0; i < g.size(); ++i) {
    const auto u = g.node(i);
    EXPECT_NEAR(std::abs(f[i] - m.cf(std::span<const double>(u.data(), 2))), 0.0, 1e-15);
  }
}

TEST(FieldCsv, HeaderAndRows)
{
  const auto g = make_grid({ 1.0 }, { 3 });
  std::ostringstream os;
  write_field_csv(os, GridField(g, { cplx(0.5, -0.5), cplx(1.0, 0.0), cplx(0.5, 0.5) }));
  std::istringstream is(os.str());
  std::string line;
  std::getline(is, line);
  EXPECT_EQ(line, "u_1,re,im");
  int rows = 0;
  while (std::getline(is, line))
    ++rows;
  EXPECT_EQ(rows, 3);
}
