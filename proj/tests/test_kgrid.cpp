#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "bpdg/kgrid.hpp"

using namespace bpdg;

namespace {

const MaterialParams kSi;
const Scales kScales = build_scales(kSi);

KGrid default_grid(const KaneBand& band, std::size_t quad = 8) {
  const double ext = k_extent_for_energy(kSi, 1.4);
  return build_grid(60, 24, ext, ext, band, kScales, quad);
}

}  // namespace

TEST(KGrid, MeasuresTileTheDomain) {
  const KGrid g = default_grid(KaneBand::from(kSi));
  ASSERT_EQ(g.size(), 1440u);
  double sum = 0.0;
  for (const auto& c : g.cells()) {
    EXPECT_GT(c.measure, 0.0);
    sum += c.measure;
  }
  EXPECT_NEAR(sum, g.total_measure(), 1e-12 * g.total_measure());
}

TEST(KGrid, BreaksAreSymmetric) {
  const KGrid g(7, 3, 2.5, 1.0, 1.0);
  const auto& ub = g.u_breaks();
  for (std::size_t i = 0; i < ub.size(); ++i) EXPECT_EQ(ub[i], -ub[ub.size() - 1 - i]);
}

TEST(KGrid, EtaIsOddInU) {
  const KGrid g = default_grid(KaneBand::from(kSi));
  for (std::size_t iu = 0; iu < g.n_u(); ++iu) {
    for (std::size_t ir = 0; ir < g.n_r(); ++ir) {
      const double a = g[g.index(iu, ir)].eta_x;
      const double b = g[g.index(g.n_u() - 1 - iu, ir)].eta_x;
      EXPECT_NEAR(a, -b, 1e-13 * std::abs(a));
      EXPECT_NEAR(g[g.index(iu, ir)].mean_energy, g[g.index(g.n_u() - 1 - iu, ir)].mean_energy,
                  1e-13);
    }
  }
}

TEST(KGrid, ParabolicCoefficientsMatchClosedForm) {
  const KaneBand band = KaneBand::parabolic(kSi.m_star);
  const KGrid g = default_grid(band);
  const double kT = kSi.thermal_energy_ev();
  // v_x = hbar k_star u / m*, so eta = (hbar k_star / (m* v_star)) int u dk.
  const double c = PhysicalConstants::hbar * kScales.k_star / (kSi.m_star * kScales.v_star());
  for (const auto& cell : g.cells()) {
    const double ua = cell.u_a, ub = cell.u_b, ra = cell.r_a, rb = cell.r_b;
    const double eta = c * pi * (rb * rb - ra * ra) * (ub * ub - ua * ua) / 2.0;
    EXPECT_NEAR(cell.eta_x, eta, 1e-11 * std::abs(c) * cell.measure * 10.0);
    const double e = kT * ((ua * ua + ua * ub + ub * ub) / 3.0 + (ra * ra + rb * rb) / 2.0);
    EXPECT_NEAR(cell.mean_energy, e, 1e-12 * e);
  }
}

TEST(KGrid, KaneCoefficientsConvergeInQuadratureOrder) {
  const KaneBand band = KaneBand::from(kSi);
  const KGrid g8 = default_grid(band, 8);
  const KGrid g32 = default_grid(band, 32);
  double worst = 0.0;
  for (std::size_t a = 0; a < g8.size(); ++a) {
    const double scale = std::abs(g32[a].eta_x) + 1e-3 * g32[a].measure;
    worst = std::max(worst, std::abs(g8[a].eta_x - g32[a].eta_x) / scale);
    EXPECT_NEAR(g8[a].mean_energy, g32[a].mean_energy, 1e-6 * g32[a].mean_energy);
  }
  EXPECT_LT(worst, 1e-6);
}

TEST(KGrid, LocateAgreesWithScan) {
  const KGrid g(60, 24, 9.5, 9.5, 1.0);
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> du(-10.0, 10.0), dr(-0.5, 10.0);
  std::uniform_int_distribution<std::size_t> pick_u(0, 60), pick_r(0, 24);
  for (int i = 0; i < 100000; ++i) {
    double u = du(rng);
    double r = dr(rng);
    // A quarter of the points sit exactly on a breakpoint.
    if (i % 4 == 0) u = g.u_breaks()[pick_u(rng)];
    if (i % 4 == 1) r = g.r_breaks()[pick_r(rng)];
    ASSERT_EQ(g.locate(u, r), g.locate_by_scan(u, r)) << "u = " << u << ", r = " << r;
  }
  EXPECT_FALSE(g.locate(9.5, 1.0));
  EXPECT_FALSE(g.locate(0.0, 9.5));
  EXPECT_TRUE(g.locate(-9.5, 0.0));
}

TEST(KGrid, NeighborsFollowU) {
  const KGrid g(4, 3, 1.0, 1.0, 1.0);
  for (const auto& c : g.cells()) {
    const std::size_t iu = g.u_index(c.index);
    EXPECT_EQ(c.up_neighbor.has_value(), iu + 1 < 4);
    EXPECT_EQ(c.down_neighbor.has_value(), iu > 0);
    if (c.up_neighbor) EXPECT_EQ(g[*c.up_neighbor].u_a, c.u_b);
    if (c.up_neighbor) EXPECT_EQ(g.r_index(*c.up_neighbor), g.r_index(c.index));
  }
}

TEST(KGrid, RejectsBadShapes) {
  EXPECT_THROW(KGrid(0, 3, 1.0, 1.0, 1.0), std::invalid_argument);
  EXPECT_THROW(KGrid(3, 3, 0.0, 1.0, 1.0), std::invalid_argument);
}
