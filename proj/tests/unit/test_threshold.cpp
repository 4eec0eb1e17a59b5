#include <ecfde/ecfde.hpp>

#include "support/oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

using namespace ecfde;

namespace {

BinaryMask mask_from(std::size_t rows, std::size_t cols, const std::vector<std::uint8_t>& bits)
{
  return BinaryMask(make_grid({ 1.0, 1.0 }, { rows, cols }), bits);
}

BinaryMask mask_from_text(const std::vector<std::string>& lines)
{
  std::vector<std::uint8_t> bits;
  for (const auto& l : lines)
    for (char ch : l)
      bits.push_back(ch == '#');
  return mask_from(lines.size(), lines.front().size(), bits);
}

GridField noisy_gaussian_field(std::size_t n, std::uint64_t seed)
{
  const TargetModel m = make_model("N");
  RngStream rng(seed, 0);
  const SampleSet x = sample_iid(m, n, rng);
  return ecf_evaluate(x, make_grid({ 6.0, 6.0 }, { 41, 41 }));
}

} // namespace

TEST(ThresholdRule, Levels)
{
  const double n = 1000.0, L = std::log(n);
  EXPECT_DOUBLE_EQ((ThresholdRule{ ThresholdKind::SqrtLog, 0.8 }.level(1000)),
                   (1.0 + 0.8 * std::sqrt(L)) / std::sqrt(n));
  EXPECT_DOUBLE_EQ((ThresholdRule{ ThresholdKind::Log, 0.8 }.level(1000)), (1.0 + 0.8 * L) / std::sqrt(n));
  const double u[2] = { 1.0, -3.0 };
  EXPECT_DOUBLE_EQ((ThresholdRule{ ThresholdKind::UDependent, 2.0 }.level(1000, u)),
                   2.0 * std::sqrt(std::log(8.0 * n) / n));
  EXPECT_THROW((ThresholdRule{ ThresholdKind::SqrtLog, -1.0 }.level(1000)), ecfde::invalid_argument);
  EXPECT_THROW((ThresholdRule{ ThresholdKind::SqrtLog, 1.0 }.level(1)), ecfde::invalid_argument);
}

TEST(ThresholdRule, ParseNames)
{
  for (auto k : { ThresholdKind::SqrtLog, ThresholdKind::Log, ThresholdKind::UDependent })
    EXPECT_EQ(parse_threshold_kind(to_string(k)), k);
  EXPECT_THROW(parse_threshold_kind("median"), ecfde::invalid_argument);
}

TEST(ThresholdMask, InclusiveAndMonotoneInKappa)
{
  const GridField f = noisy_gaussian_field(500, 1);
  std::vector<std::uint8_t> previous(f.size(), 1);
  for (double kappa = 0.0; kappa <= 3.0; kappa += 0.1) {
    const BinaryMask m = threshold_mask(f, { ThresholdKind::SqrtLog, kappa }, 500);
    for (std::size_t i = 0; i < m.size(); ++i)
      EXPECT_LE(m.bits[i], previous[i]);
    previous = m.bits;
  }
  const auto g = make_grid({ 1.0 }, { 3 });
  const double level = ThresholdRule{ ThresholdKind::SqrtLog, 1.0 }.level(100);
  const GridField exact(g, { cplx(level, 0.0), cplx(1.0, 0.0), cplx(level * (1 - 1e-12), 0.0) });
  const BinaryMask m = threshold_mask(exact, { ThresholdKind::SqrtLog, 1.0 }, 100);
  EXPECT_EQ(m.bits, (std::vector<std::uint8_t>{ 1, 1, 0 }));
}

TEST(ApplyThreshold, ZeroesOutsideMask)
{
  const GridField f = noisy_gaussian_field(300, 2);
  const BinaryMask m = threshold_mask(f, { ThresholdKind::SqrtLog, 1.0 }, 300);
  const GridField t = apply_threshold(f, m);
  for (std::size_t i = 0; i < f.size(); ++i)
    EXPECT_EQ(t[i], m.bits[i] ? f[i] : cplx{});
}

TEST(Euler, Fixtures)
{
  EXPECT_EQ(euler_characteristic(mask_from_text({ ".....", ".###.", ".#.#.", ".###.", "....." })), 0);
  EXPECT_EQ(euler_characteristic(mask_from_text({ "##...", "##...", ".....", "...##", "...##" })), 2);
  EXPECT_EQ(euler_characteristic(mask_from_text({ "#....", ".#...", "..#..", "...#.", "....#" })), 1);
  EXPECT_EQ(euler_characteristic(mask_from_text({ "#####", "#...#", "#.#.#", "#...#", "#####" })), 1);
  EXPECT_EQ(euler_characteristic(mask_from_text({ ".....", ".....", "....." })), 0);
  EXPECT_EQ(euler_characteristic(mask_from_text({ "###", "###", "###" })), 1);
  // Diagonal contact closes a loop around the centre cell.
  EXPECT_EQ(euler_characteristic(mask_from_text({ ".#.", "#.#", ".#." })), 0);
}

TEST(Euler, MatchesFloodFillOnRandomMasks)
{
  RngStream rng(99, 0);
  for (int t = 0; t < 200; ++t) {
    const std::size_t rows = 31, cols = 33;
    const double p = 0.2 + 0.6 * rng.uniform();
    std::vector<std::uint8_t> bits(rows * cols);
    for (auto& b : bits)
      b = rng.uniform() < p;
    EXPECT_EQ(euler_characteristic(mask_from(rows, cols, bits)),
              ecfde::testing::flood_fill_euler(bits, rows, cols))
      << "trial " << t;
  }
}

TEST(Euler, OneDimensionalCountsRuns)
{
  RngStream rng(5, 0);
  for (int t = 0; t < 100; ++t) {
    std::vector<std::uint8_t> bits(41);
    for (auto& b : bits)
      b = rng.uniform() < 0.5;
    const BinaryMask m(make_grid({ 1.0 }, { 41 }), bits);
    EXPECT_EQ(euler_characteristic(m), ecfde::testing::count_runs(bits));
  }
}

TEST(Euler, RejectsThreeDimensions)
{
  const auto g = make_grid({ 1.0, 1.0, 1.0 }, { 3, 3, 3 });
  EXPECT_THROW(euler_characteristic(BinaryMask(g, std::vector<std::uint8_t>(27, 1))),
               ecfde::invalid_argument);
}

TEST(Selection, FirstStableIndex)
{
  const std::vector<long> chi{ 9, 7, 4, 4, 2, 1, 1, 1 };
  EXPECT_EQ(first_stable_index(chi, 1), 3);
  EXPECT_EQ(first_stable_index(chi, 2), 7);
  EXPECT_EQ(first_stable_index(chi, 3), -1);
  EXPECT_EQ(first_stable_index(chi, 1, 2), 7);
}

TEST(Selection, StepModesAndFallback)
{
  // chi[k] at kappa = k / 10.
  std::vector<long> chi(31);
  for (std::size_t k = 0; k < chi.size(); ++k)
    chi[k] = k < 12 ? 40 - static_cast<long>(k) : (k < 14 ? 5 : (k < 20 ? 3 - static_cast<long>(k % 2) : 1));
  const KappaSelection idx = select_from_curve(chi, 0.1, 3.0);
  EXPECT_TRUE(idx.stabilized);
  EXPECT_NEAR(idx.selected_kappa, 1.3, 1e-12);
  const KappaSelection unit = select_from_curve(chi, 0.1, 3.0, 1, StabilizationStep::Unit);
  EXPECT_TRUE(unit.stabilized);
  EXPECT_NEAR(unit.selected_kappa, 3.0, 1e-12);
  EXPECT_EQ(unit.chi_curve.size(), chi.size());

  std::vector<long> moving(11);
  for (std::size_t k = 0; k < moving.size(); ++k)
    moving[k] = static_cast<long>(k);
  const KappaSelection none = select_from_curve(moving, 0.5, 5.0);
  EXPECT_FALSE(none.stabilized);
  EXPECT_EQ(none.selected_kappa, 5.0);
}

TEST(Selection, RejectsBadParameters)
{
  const GridField f = noisy_gaussian_field(200, 3);
  EXPECT_THROW(select_kappa(f, 200, ThresholdKind::SqrtLog, 0.0), ecfde::invalid_argument);
  EXPECT_THROW(select_kappa(f, 200, ThresholdKind::SqrtLog, 0.05, 0.01), ecfde::invalid_argument);
  EXPECT_THROW(select_kappa(f, 200, ThresholdKind::SqrtLog, 0.05, 5.0, 0), ecfde::invalid_argument);
  EXPECT_THROW(select_kappa(f, 200, ThresholdKind::UDependent), ecfde::invalid_argument);
}

TEST(Selection, CurveMatchesDirectMasks)
{
  const GridField f = noisy_gaussian_field(800, 4);
  const auto chi = euler_curve(f, 800, ThresholdKind::SqrtLog, 0.25, 3.0);
  ASSERT_EQ(chi.size(), 13u);
  for (std::size_t k = 0; k < chi.size(); ++k) {
    const BinaryMask m = threshold_mask(f, { ThresholdKind::SqrtLog, 0.25 * static_cast<double>(k) }, 800);
    EXPECT_EQ(chi[k], ecfde::testing::flood_fill_euler(m.bits, 41, 41));
  }
}

TEST(Selection, StableForAnyThreadCount)
{
  const GridField f = noisy_gaussian_field(1000, 6);
  set_thread_count(1);
  const KappaSelection a = select_kappa(f, 1000);
  set_thread_count(4);
  const KappaSelection b = select_kappa(f, 1000);
  set_thread_count(default_thread_count());
  EXPECT_EQ(a.selected_kappa, b.selected_kappa);
  EXPECT_EQ(a.chi_curve, b.chi_curve);
}

TEST(MaskPbm, Layout)
{
  std::ostringstream os;
  write_mask_pbm(os, mask_from_text({ "#..", "##.", "..#" }));
  EXPECT_EQ(os.str(), "P1\n3 3\n1 0 0\n1 1 0\n0 0 1\n");
}
