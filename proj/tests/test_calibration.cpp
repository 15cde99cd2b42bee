#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "photoncal/calibration.hpp"
#include "photoncal/rng.hpp"

using namespace photoncal;

namespace {

std::vector<AnalogFrame> flat_means(std::size_t w, std::size_t h, std::initializer_list<double> levels,
                                    BayerPattern p = BayerPattern::none) {
  std::vector<AnalogFrame> out;
  for (double v : levels) out.emplace_back(w, h, p, v);
  return out;
}

// Random monotone means for a w x h frame: per pixel, N strictly increasing
// intensities with random steps.
std::vector<AnalogFrame> random_means(Rng& rng, std::size_t w, std::size_t h, std::size_t n, BayerPattern p) {
  std::vector<AnalogFrame> out(n, AnalogFrame(w, h, p, 0.0));
  for (std::size_t j = 0; j < w * h; ++j) {
    double v = 40.0 + 40.0 * rng.uniform();
    for (std::size_t i = 0; i < n; ++i) {
      out[i].data[j] = v;
      v += 5.0 + 600.0 * rng.uniform();
    }
  }
  return out;
}

std::vector<double> ascending_totals(Rng& rng, std::size_t n) {
  std::vector<double> a(n);
  double v = 0.0;
  for (auto& x : a) {
    x = v;
    v += 1.0 + 1e4 * rng.uniform();
  }
  return a;
}

}  // namespace

TEST(MeanFrame, Examples) {
  RawFrame a(2, 2, BayerPattern::rggb, 10);
  RawFrame b(2, 2, BayerPattern::rggb, 20);
  const std::vector<RawFrame> one = {a};
  EXPECT_EQ(mean_frame<std::uint16_t>(one).data, std::vector<double>(4, 10.0));
  const std::vector<RawFrame> two = {a, b};
  EXPECT_EQ(mean_frame<std::uint16_t>(two).data, std::vector<double>(4, 15.0));

  std::vector<RawFrame> six;
  for (std::uint16_t v = 1; v <= 6; ++v) six.emplace_back(2, 2, BayerPattern::rggb, v);
  EXPECT_EQ(mean_frame<std::uint16_t>(six).data, std::vector<double>(4, 3.5));
}

TEST(MeanFrame, RejectsEmptyAndMismatched) {
  EXPECT_THROW(mean_frame<std::uint16_t>(std::vector<RawFrame>{}), ContractError);
  const std::vector<RawFrame> mixed = {RawFrame(2, 2, BayerPattern::rggb), RawFrame(4, 2, BayerPattern::rggb)};
  EXPECT_THROW(mean_frame<std::uint16_t>(mixed), ContractError);
}

TEST(MeanFrame, ReplicateOrderDoesNotMatter) {
  Rng rng(17);
  std::vector<AnalogFrame> stack;
  for (int p = 0; p < 6; ++p) {
    AnalogFrame f(8, 8, BayerPattern::rggb);
    for (auto& v : f.data) v = 4095.0 * rng.uniform();
    stack.push_back(f);
  }
  const auto reference = mean_frame<double>(stack);
  std::reverse(stack.begin(), stack.end());
  EXPECT_EQ(mean_frame<double>(stack), reference);
  std::rotate(stack.begin(), stack.begin() + 2, stack.end());
  EXPECT_EQ(mean_frame<double>(stack), reference);
}

TEST(PhotonTotals, Examples) {
  const auto grid = uniform_grid(400.0, 500.0, 1.0);
  const Spectrum dark(grid, std::vector<double>(grid.size(), 0.0));
  const Spectrum open(grid, std::vector<double>(grid.size(), 10.0));
  const Spectrum qe({350.0, 800.0}, {0.5, 0.5});
  const std::vector<Spectrum> spectra = {dark, open};
  const auto a = photon_totals(spectra, qe);
  EXPECT_EQ(a.values, (std::vector<double>{0.0, 500.0}));  // 0.5 * 10 * 100
  EXPECT_TRUE(a.monotone);

  const std::vector<Spectrum> same = {open, open};
  const auto b = photon_totals(same, qe);
  EXPECT_EQ(b.values[0], b.values[1]);
  EXPECT_TRUE(b.monotone);
}

TEST(PhotonTotals, MisorderedInputWarns) {
  const auto grid = uniform_grid(400.0, 500.0, 1.0);
  const std::vector<Spectrum> spectra = {Spectrum(grid, std::vector<double>(grid.size(), 10.0)),
                                         Spectrum(grid, std::vector<double>(grid.size(), 0.0))};
  const auto a = photon_totals(spectra, Spectrum({350.0, 800.0}, {1.0, 1.0}));
  EXPECT_FALSE(a.monotone);
  ASSERT_EQ(a.warnings.size(), 1u);
  EXPECT_NE(a.warnings[0].find("filter order"), std::string::npos);
}

TEST(BuildTable, SingleSegmentExample) {
  const std::vector<std::vector<double>> a = {{0.0, 100.0}};
  const auto t = build_table(a, flat_means(2, 2, {10.0, 20.0}), BayerPattern::none).table;
  EXPECT_EQ(t.slopes_of(0)[0], 10.0);
  EXPECT_EQ(t.shifts_of(0)[0], -100.0);
  EXPECT_EQ(t.slopes_of(0)[0] * 10.0 + t.shifts_of(0)[0], 0.0);
}

TEST(BuildTable, TwoSegmentExample) {
  const std::vector<std::vector<double>> a = {{0.0, 50.0, 100.0}};
  const auto t = build_table(a, flat_means(2, 2, {0.0, 25.0, 100.0}), BayerPattern::none).table;
  EXPECT_NEAR(t.slopes_of(3)[0], 2.0, 1e-12);
  EXPECT_NEAR(t.slopes_of(3)[1], 2.0 / 3.0, 1e-12);
  EXPECT_NEAR(t.shifts_of(3)[0], 0.0, 1e-12);
  EXPECT_NEAR(t.shifts_of(3)[1], 50.0 - (2.0 / 3.0) * 25.0, 1e-12);
  // continuity at both knots of the second segment
  EXPECT_NEAR(t.slopes_of(3)[1] * 25.0 + t.shifts_of(3)[1], 50.0, 1e-12);
  EXPECT_NEAR(t.slopes_of(3)[1] * 100.0 + t.shifts_of(3)[1], 100.0, 1e-12);
  EXPECT_EQ(t.states, std::vector<PixelState>(4, PixelState::valid));
}

TEST(BuildTable, RequiresTwoSettingsAndMatchingSizes) {
  const std::vector<std::vector<double>> one = {{0.0}};
  EXPECT_THROW(build_table(one, flat_means(2, 2, {1.0}), BayerPattern::none), ContractError);
  const std::vector<std::vector<double>> three = {{0.0, 1.0, 2.0}};
  EXPECT_THROW(build_table(three, flat_means(2, 2, {1.0, 2.0}), BayerPattern::none), ContractError);
  const std::vector<std::vector<double>> per_channel = {{0.0, 1.0}, {0.0, 1.0}, {0.0, 1.0}};
  EXPECT_THROW(build_table(per_channel, flat_means(2, 2, {1.0, 2.0}), BayerPattern::none), ContractError);
}

TEST(BuildTable, FlatPixelIsRepairedFromSameChannel) {
  // 8x8 RGGB; pixel (2, 2) (red) has equal consecutive intensities.
  Rng rng(19);
  auto means = random_means(rng, 8, 8, 3, BayerPattern::rggb);
  const std::size_t bad = 2 * 8 + 2;
  means[1].data[bad] = means[0].data[bad];
  const std::vector<std::vector<double>> a = {{0.0, 10.0, 30.0}, {0.0, 20.0, 50.0}, {0.0, 5.0, 9.0}};
  const auto r = build_table(a, means, BayerPattern::rggb);
  EXPECT_EQ(r.report.dead_before_repair, 1u);
  EXPECT_EQ(r.report.repaired, 1u);
  EXPECT_EQ(r.report.dead, 0u);
  EXPECT_EQ(r.table.states[bad], PixelState::repaired);

  // The donor is a red site 2 pixels away (first hit of the ring search).
  const auto& t = r.table;
  bool matched = false;
  for (std::size_t donor : {bad - 16, bad - 2, bad + 2, bad + 16}) {
    EXPECT_EQ(channel_at(BayerPattern::rggb, donor % 8, donor / 8), Channel::red);
    if (std::equal(t.knots(donor).begin(), t.knots(donor).end(), t.knots(bad).begin()) &&
        std::equal(t.slopes_of(donor).begin(), t.slopes_of(donor).end(), t.slopes_of(bad).begin())) {
      matched = true;
    }
  }
  EXPECT_TRUE(matched);
}

TEST(BuildTable, DecreasingPixelIsDead) {
  Rng rng(23);
  auto means = random_means(rng, 40, 40, 4, BayerPattern::rggb);
  means[2].data[5] = means[1].data[5] - 1.0;
  const std::vector<std::vector<double>> a = {{0.0, 1.0, 2.0, 3.0}, {0.0, 1.0, 2.0, 3.0}, {0.0, 1.0, 2.0, 3.0}};
  const auto r = build_table(a, means, BayerPattern::rggb);
  EXPECT_EQ(r.report.dead_before_repair, 1u);
  EXPECT_EQ(r.table.states[5], PixelState::repaired);
}

TEST(BuildTable, TooManyDeadPixelsIsAQualityError) {
  Rng rng(29);
  auto means = random_means(rng, 10, 10, 2, BayerPattern::none);
  for (std::size_t j = 0; j < 6; ++j) means[1].data[j * 7] = means[0].data[j * 7];
  const std::vector<std::vector<double>> a = {{0.0, 1.0}};
  EXPECT_THROW(build_table(a, means, BayerPattern::none), QualityError);
  // exactly 5% is still accepted
  means[1].data[35] = means[0].data[35] + 1.0;
  EXPECT_NO_THROW(build_table(a, means, BayerPattern::none));
}

TEST(BuildTable, UnreachableDonorLeavesPixelDead) {
  // One dead pixel and a repair radius of 0.
  auto means = flat_means(2, 2, {1.0, 2.0});
  means[1].data[0] = 1.0;
  const std::vector<std::vector<double>> a = {{0.0, 1.0}};
  BuildOptions opts;
  opts.max_dead_fraction = 0.5;
  opts.repair_radius = 0;
  const auto r = build_table(a, means, BayerPattern::none, opts);
  EXPECT_EQ(r.report.dead, 1u);
  EXPECT_EQ(r.table.states[0], PixelState::dead);
  EXPECT_EQ(r.report.valid + r.report.repaired + r.report.dead, r.table.pixels());
}

TEST(BuildTable, RepairedPixelsNeverDonate) {
  // Row of single-channel pixels: 0 valid, 1..3 dead. Radius 1 reaches only
  // the immediate neighbor, so pixel 2 must not borrow from repaired pixel 1.
  AnalogFrame lo(4, 1, BayerPattern::none, 1.0);
  AnalogFrame hi(4, 1, BayerPattern::none, 1.0);
  hi.data[0] = 2.0;
  const std::vector<AnalogFrame> means = {lo, hi};
  const std::vector<std::vector<double>> a = {{0.0, 1.0}};
  BuildOptions opts;
  opts.max_dead_fraction = 1.0;
  opts.repair_radius = 1;
  const auto r = build_table(a, means, BayerPattern::none, opts);
  EXPECT_EQ(r.table.states[1], PixelState::repaired);
  EXPECT_EQ(r.table.states[2], PixelState::dead);
  EXPECT_EQ(r.table.states[3], PixelState::dead);
}

TEST(BuildTable, ContinuityAndKnotInterpolationHoldForRandomTables) {
  Rng rng(31);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 2 + rng.below(6);
    const auto means = random_means(rng, 6, 4, n, BayerPattern::gbrg);
    const std::vector<std::vector<double>> a = {ascending_totals(rng, n), ascending_totals(rng, n),
                                                ascending_totals(rng, n)};
    const auto t = build_table(a, means, BayerPattern::gbrg).table;
    for (std::size_t j = 0; j < t.pixels(); ++j) {
      ASSERT_EQ(t.states[j], PixelState::valid);
      const auto totals = t.totals(t.channel_of(j));
      const auto bp = t.knots(j);
      for (std::size_t i = 0; i + 1 < n; ++i) {
        const double scale = std::max(1.0, totals[i + 1]);
        EXPECT_NEAR(t.slopes_of(j)[i] * bp[i] + t.shifts_of(j)[i], totals[i], 1e-9 * scale);
        EXPECT_NEAR(t.slopes_of(j)[i] * bp[i + 1] + t.shifts_of(j)[i], totals[i + 1], 1e-9 * scale);
        EXPECT_GT(t.slopes_of(j)[i], 0.0);
      }
      for (std::size_t i = 0; i < n; ++i) {
        EXPECT_NEAR(evaluate(t, j, bp[i]), totals[i], 1e-9 * std::max(1.0, totals[i]));
      }
    }
  }
}

TEST(BuildTable, WorkerCountDoesNotChangeTheTable) {
  Rng rng(37);
  const auto means = random_means(rng, 16, 12, 6, BayerPattern::rggb);
  const std::vector<std::vector<double>> a = {ascending_totals(rng, 6), ascending_totals(rng, 6),
                                              ascending_totals(rng, 6)};
  BuildOptions four;
  four.workers = 4;
  EXPECT_EQ(build_table(a, means, BayerPattern::rggb).table, build_table(a, means, BayerPattern::rggb, four).table);
}

TEST(SelectSegment, FollowsTheBranchChain) {
  const std::vector<double> knots = {10.0, 20.0, 30.0, 40.0};
  EXPECT_EQ(select_segment(knots, 5.0), 0u);
  EXPECT_EQ(select_segment(knots, 10.0), 0u);
  EXPECT_EQ(select_segment(knots, 19.999), 0u);
  EXPECT_EQ(select_segment(knots, 20.0), 1u);
  EXPECT_EQ(select_segment(knots, 30.0), 2u);
  EXPECT_EQ(select_segment(knots, 40.0), 2u);
  EXPECT_EQ(select_segment(knots, 1e6), 2u);
  const std::vector<double> two = {10.0, 20.0};
  EXPECT_EQ(select_segment(two, 0.0), 0u);
  EXPECT_EQ(select_segment(two, 50.0), 0u);
}
