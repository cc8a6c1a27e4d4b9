#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "bpdg/mc_extract.hpp"

using namespace bpdg;

namespace {

const MaterialParams kSi;
const Scales kScales = build_scales(kSi);
const KaneBand kBand = KaneBand::from(kSi);

KGrid small_grid(std::size_t n_u = 8, std::size_t n_r = 4, double ext = 4.0) {
  return build_grid(n_u, n_r, ext, ext, kBand, kScales);
}

Mechanisms elastic_only() { return {silicon_mechanisms(kSi)[0]}; }

}  // namespace

TEST(McExtract, SeededParticlesFillTheCell) {
  const KGrid g = small_grid();
  Engine rng = substream(1, 0);
  const std::size_t cell = g.index(3, 2);
  const ParticleEnsemble ens = seed_cell(g, cell, 20000, rng);
  EXPECT_DOUBLE_EQ(ens.weight * 20000.0, g[cell].measure);
  double mean_u = 0.0, mean_r2 = 0.0;
  for (const auto& p : ens.particles) {
    ASSERT_EQ(g.locate(p.u, p.r), cell);
    mean_u += p.u;
    mean_r2 += p.r * p.r;
  }
  mean_u /= 20000.0;
  mean_r2 /= 20000.0;
  const KCell& c = g[cell];
  // Uniform in u and in r^2 with respect to dk.
  EXPECT_NEAR(mean_u, c.u_center(), 0.01 * (c.u_b - c.u_a));
  EXPECT_NEAR(mean_r2, 0.5 * (c.r_a * c.r_a + c.r_b * c.r_b),
              0.01 * (c.r_b * c.r_b - c.r_a * c.r_a));
}

TEST(McExtract, NoCouplingsNoEvents) {
  const KGrid g = small_grid();
  Mechanisms m = silicon_mechanisms(kSi);
  for (auto& x : m) x.coupling = 0.0;
  Engine rng = substream(3, 5);
  ParticleEnsemble ens = seed_cell(g, 5, 1000, rng);
  const auto before = ens.particles;
  const EvolveStats st = evolve_homogeneous(ens, g, kBand, m, 1e-12, 3);
  EXPECT_EQ(st.real_events + st.self_events + st.rejected_events, 0u);
  for (std::size_t i = 0; i < before.size(); ++i) {
    EXPECT_EQ(ens.particles[i].u, before[i].u);
    EXPECT_EQ(ens.particles[i].r, before[i].r);
  }
  const ExtractionReport rep =
      extract_k_matrix(g, kBand, m, kScales, Eigen::VectorXd::Zero(32), {1000, 1e-13, 1, 1});
  EXPECT_EQ(rep.K_mc.K.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(rep.K_mc.provenance, Provenance::monte_carlo);
}

TEST(McExtract, ElasticEventsKeepEnergy) {
  const KGrid g = small_grid();
  const Mechanisms m = elastic_only();
  const HomogeneousScatterer<KaneBand> sc(g, kBand, m);
  Engine rng = substream(4, 0);
  ParticleEnsemble ens = seed_cell(g, g.index(5, 1), 5000, rng);
  std::vector<double> radius;
  for (const auto& p : ens.particles) radius.push_back(std::hypot(p.u, p.r));
  const EvolveStats st = evolve_homogeneous(ens, g, kBand, m, sc.default_dt() * 2.0, 4);
  EXPECT_GT(st.real_events, 100u);
  for (std::size_t i = 0; i < radius.size(); ++i) {
    EXPECT_NEAR(std::hypot(ens.particles[i].u, ens.particles[i].r), radius[i], 1e-12 * radius[i]);
  }
}

TEST(McExtract, EventCountFollowsPoissonStatistics) {
  const KGrid g = small_grid(8, 4, 6.0);
  const Mechanisms m = silicon_mechanisms(kSi);
  const HomogeneousScatterer<KaneBand> sc(g, kBand, m);
  const double dt = 0.1 / sc.rate_majorant();
  const double u0 = 1.3, r0 = 1.1;
  const double gamma0 = total_rate(m, kBand, kBand.energy_of_wavenumber(g.k_star() * std::hypot(u0, r0)));
  const std::size_t n = 400000;
  ParticleEnsemble ens;
  ens.source_cell = 0;
  ens.weight = 1.0 / static_cast<double>(n);
  ens.particles.assign(n, Particle{u0, r0, 0.0});
  const EvolveStats st = evolve_homogeneous(ens, g, kBand, m, dt, 77);
  const double events = static_cast<double>(st.real_events + st.rejected_events);
  const double mean = gamma0 * dt * static_cast<double>(n);
  // Poisson count per particle; a second event within dt changes Gamma only at O((Gamma dt)^2).
  EXPECT_NEAR(events, mean, 3.0 * std::sqrt(mean));
}

TEST(McExtract, TimeStepBoundEnforced) {
  const KGrid g = small_grid();
  const Mechanisms m = silicon_mechanisms(kSi);
  const HomogeneousScatterer<KaneBand> sc(g, kBand, m);
  EXPECT_NEAR(sc.default_dt() * sc.rate_majorant(), 0.05, 1e-12);
  Engine rng = substream(1, 0);
  ParticleEnsemble ens = seed_cell(g, 0, 1000, rng);
  EXPECT_THROW(evolve_homogeneous(ens, g, kBand, m, 0.2 / sc.rate_majorant(), 1),
               std::invalid_argument);
  EXPECT_THROW(evolve_homogeneous(ens, g, kBand, m, -1.0, 1), std::invalid_argument);
  const Eigen::VectorXd gi = Eigen::VectorXd::Zero(32);
  EXPECT_THROW(extract_k_matrix(g, kBand, m, kScales, gi, {999, 0.0, 1, 1}),
               std::invalid_argument);
}

TEST(McExtract, SingleCellElasticRecoversGamma) {
  const KGrid g = small_grid(1, 1, 3.0);
  const Mechanisms m = elastic_only();
  const Eigen::VectorXd gi = gamma_integrals(g, kBand, m, kScales);
  const ExtractionReport rep = extract_k_matrix(g, kBand, m, kScales, gi, {5000, 0.0, 9, 1});
  // Every particle stays in the lone cell, so the count term cancels M exactly.
  EXPECT_NEAR(rep.K_mc.K(0, 0), gi[0], 1e-12 * gi[0]);
  EXPECT_EQ(rep.escaped, 0u);
}

TEST(McExtract, DeterministicAcrossThreadCounts) {
  const KGrid g = small_grid();
  const Mechanisms m = silicon_mechanisms(kSi);
  const Eigen::VectorXd gi = gamma_integrals(g, kBand, m, kScales);
  const ExtractionReport a = extract_k_matrix(g, kBand, m, kScales, gi, {3000, 0.0, 42, 1});
  const ExtractionReport b = extract_k_matrix(g, kBand, m, kScales, gi, {3000, 0.0, 42, 4});
  const ExtractionReport c = extract_k_matrix(g, kBand, m, kScales, gi, {3000, 0.0, 43, 1});
  EXPECT_TRUE((a.K_mc.K.array() == b.K_mc.K.array()).all());
  EXPECT_EQ(a.stats.real_events, b.stats.real_events);
  EXPECT_FALSE((a.K_mc.K.array() == c.K_mc.K.array()).all());
}

TEST(McExtract, ColumnSumsMatchGammaIntegralsInBatchMeans) {
  const KGrid g = small_grid();
  const Mechanisms m = silicon_mechanisms(kSi);
  const Eigen::VectorXd gi = gamma_integrals(g, kBand, m, kScales);
  const auto n = static_cast<Eigen::Index>(g.size());
  std::vector<Eigen::VectorXd> sums;
  for (std::uint64_t batch = 0; batch < 10; ++batch) {
    const ExtractionReport r = extract_k_matrix(g, kBand, m, kScales, gi, {2000, 0.0, batch, 1});
    sums.push_back(r.K_mc.loss);
  }
  for (Eigen::Index b = 0; b < n; ++b) {
    double mean = 0.0, var = 0.0;
    for (const auto& s : sums) mean += s[b] / 10.0;
    for (const auto& s : sums) var += (s[b] - mean) * (s[b] - mean) / 9.0;
    const double se = std::sqrt(var / 10.0);
    EXPECT_LE(std::abs(mean - gi[b]), 5.0 * se + 1e-12 * gi[b]) << "column " << b;
  }
}

TEST(McExtract, ConvergesToOracle) {
  const KGrid g = small_grid(6, 3, 4.0);
  const Mechanisms m = silicon_mechanisms(kSi);
  const CollisionMatrix ref = k_matrix_oracle(g, kBand, m, kScales);
  const ExtractionReport lo =
      extract_k_matrix(g, kBand, m, kScales, ref.gamma_int, {4000, 0.0, 5, 1});
  const ExtractionReport hi =
      extract_k_matrix(g, kBand, m, kScales, ref.gamma_int, {256000, 0.0, 5, 1});
  const MatrixErrors e_lo = compare_matrices(lo.K_mc.K, ref.K);
  const MatrixErrors e_hi = compare_matrices(hi.K_mc.K, ref.K);
  // 64x more particles: about 8x smaller error. The worst entry is a diagonal one,
  // whose estimator is the difference of two large numbers.
  EXPECT_LT(e_hi.mean_rel, e_lo.mean_rel / 4.0);
  EXPECT_LT(e_hi.max_rel, 0.3);
  EXPECT_GE(e_hi.max_abs, e_hi.mean_abs);
}

TEST(McExtract, ParticleCountIsConserved) {
  const KGrid g = small_grid(8, 4, 3.0);
  const Mechanisms m = silicon_mechanisms(kSi);
  const HomogeneousScatterer<KaneBand> sc(g, kBand, m);
  Engine rng = substream(8, 0);
  std::size_t located = 0;
  for (std::size_t cell = 0; cell < g.size(); ++cell) {
    ParticleEnsemble ens = seed_cell(g, cell, 1000, rng);
    evolve_homogeneous(ens, g, kBand, m, sc.default_dt(), 8);
    for (const auto& p : ens.particles) located += g.locate(p.u, p.r).has_value();
  }
  EXPECT_EQ(located, 1000 * g.size());
}
