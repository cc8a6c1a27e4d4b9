#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <vector>

#include "band.hpp"
#include "collision.hpp"
#include "kgrid.hpp"
#include "parallel.hpp"
#include "params.hpp"
#include "rng.hpp"

namespace bpdg {

/// Dimensionless cylindrical k-coordinates.
struct Particle {
  double u = 0.0;
  double r = 0.0;
  double theta = 0.0;
};

struct ParticleEnsemble {
  std::vector<Particle> particles;
  double weight = 0.0;  // nondimensional measure per particle
  std::size_t source_cell = 0;
};

struct EvolveStats {
  std::uint64_t real_events = 0;
  std::uint64_t self_events = 0;
  std::uint64_t rejected_events = 0;  // final state outside the domain

  EvolveStats& operator+=(const EvolveStats& o) {
    real_events += o.real_events;
    self_events += o.self_events;
    rejected_events += o.rejected_events;
    return *this;
  }
};

/// Null-collision DSMC for df/dt = Q(f) with no field and no x dependence.
template <RadialBand Band>
class HomogeneousScatterer {
 public:
  static constexpr double max_events_per_step = 0.1;

  HomogeneousScatterer(const KGrid& grid, const Band& band, Mechanisms mechs)
      : grid_(grid), band_(band), mechs_(std::move(mechs)) {
    // Gamma is nondecreasing in |k|, so the outer corner carries the majorant.
    const double e_max = band_.energy_of_wavenumber(grid_.k_star() * grid_.max_radius());
    rate_majorant_ = total_rate(mechs_, band_, e_max) * (1.0 + 1e-12);
  }

  /// Majorant of Gamma over the domain, 1/s.
  [[nodiscard]] double rate_majorant() const { return rate_majorant_; }

  /// Default step 0.05 / Gamma_max, in seconds.
  [[nodiscard]] double default_dt() const {
    return rate_majorant_ > 0.0 ? 0.05 / rate_majorant_ : 1e-15;
  }

  void check_dt(double dt) const {
    if (!(dt > 0.0) || !std::isfinite(dt)) {
      throw std::invalid_argument("evolve_homogeneous: dt must be positive");
    }
    if (dt * rate_majorant_ > max_events_per_step) {
      throw std::invalid_argument("evolve_homogeneous: dt * Gamma_max exceeds 0.1");
    }
  }

  /// Advances one particle over dt seconds.
  void advance(Particle& p, Engine& rng, double dt, EvolveStats& stats) const {
    if (rate_majorant_ <= 0.0) return;
    double t = exponential(rng, rate_majorant_);
    while (t <= dt) {
      scatter(p, rng, stats);
      t += exponential(rng, rate_majorant_);
    }
  }

 private:
  void scatter(Particle& p, Engine& rng, EvolveStats& stats) const {
    const double s = std::hypot(p.u, p.r);
    const double energy = band_.energy_of_wavenumber(grid_.k_star() * s);
    const double pick = uniform01(rng) * rate_majorant_;
    double acc = 0.0;
    const ScatterMechanism* chosen = nullptr;
    for (const auto& m : mechs_) {
      acc += m.coupling * shell_density(band_, energy + m.energy_shift);
      if (pick < acc) {
        chosen = &m;
        break;
      }
    }
    if (chosen == nullptr) {
      ++stats.self_events;
      return;
    }
    const double s_new =
        chosen->energy_shift == 0.0
            ? s
            : band_.wavenumber_of_energy(energy + chosen->energy_shift) / grid_.k_star();
    const double cos_chi = 2.0 * uniform01(rng) - 1.0;
    const double theta = 2.0 * pi * uniform01(rng);
    const double u = s_new * cos_chi;
    const double r = s_new * std::sqrt(std::max(0.0, 1.0 - cos_chi * cos_chi));
    if (!grid_.locate(u, r)) {
      ++stats.rejected_events;
      return;
    }
    p = {u, r, theta};
    ++stats.real_events;
  }

  const KGrid& grid_;
  const Band& band_;
  Mechanisms mechs_;
  double rate_majorant_ = 0.0;
};

/// n particles distributed uniformly with respect to dk inside cell `cell`.
inline ParticleEnsemble seed_cell(const KGrid& grid, std::size_t cell, std::size_t n,
                                  Engine& rng) {
  const KCell& c = grid[cell];
  ParticleEnsemble ens;
  ens.source_cell = cell;
  ens.weight = c.measure / static_cast<double>(n);
  ens.particles.resize(n);
  const double u_top = std::nextafter(c.u_b, -std::numeric_limits<double>::infinity());
  const double r_top = std::nextafter(c.r_b, -std::numeric_limits<double>::infinity());
  const double ra2 = c.r_a * c.r_a;
  const double dr2 = c.r_b * c.r_b - ra2;
  for (auto& p : ens.particles) {
    p.u = std::min(c.u_a + uniform01(rng) * (c.u_b - c.u_a), u_top);
    p.r = std::clamp(std::sqrt(ra2 + uniform01(rng) * dr2), c.r_a, r_top);
    p.theta = 2.0 * pi * uniform01(rng);
  }
  return ens;
}

template <RadialBand Band>
EvolveStats evolve_homogeneous(ParticleEnsemble& ens, const KGrid& grid, const Band& band,
                               const Mechanisms& mechs, double dt, std::uint64_t seed) {
  const HomogeneousScatterer<Band> scatterer(grid, band, mechs);
  scatterer.check_dt(dt);
  Engine rng = substream(seed, ens.source_cell);
  EvolveStats stats;
  for (auto& p : ens.particles) scatterer.advance(p, rng, dt, stats);
  return stats;
}

struct MatrixErrors {
  double max_abs = 0.0;
  double mean_abs = 0.0;
  double max_rel = 0.0;   // normalized by max |K_ref|
  double mean_rel = 0.0;  // normalized by max |K_ref|
};

inline MatrixErrors compare_matrices(const Eigen::MatrixXd& k, const Eigen::MatrixXd& ref) {
  if (k.rows() != ref.rows() || k.cols() != ref.cols()) {
    throw std::invalid_argument("compare_matrices: shape mismatch");
  }
  const Eigen::MatrixXd diff = (k - ref).cwiseAbs();
  MatrixErrors e;
  e.max_abs = diff.maxCoeff();
  e.mean_abs = diff.mean();
  const double scale = ref.cwiseAbs().maxCoeff();
  if (scale > 0.0) {
    e.max_rel = e.max_abs / scale;
    e.mean_rel = e.mean_abs / scale;
  }
  return e;
}

struct ExtractOptions {
  std::size_t n_particles = 1000;
  double dt = 0.0;  // s; <= 0 selects 0.05 / Gamma_max
  std::uint64_t seed = 1;
  std::size_t threads = 0;
};

struct ExtractionReport {
  CollisionMatrix K_mc;
  std::optional<MatrixErrors> errors;
  std::size_t n_particles = 0;
  double dt = 0.0;  // s
  std::uint64_t seed = 0;
  double rate_majorant = 0.0;  // 1/s
  std::uint64_t escaped = 0;   // particles outside the domain at binning
  EvolveStats stats;
};

/// One short DSMC solve per source cell b starting from the indicator of C_b,
/// then K_ab = (1/dt) [int_{C_a} f_MC - delta_ab M_a] + delta_ab int_{C_a} Gamma.
/// Stream b of the master seed drives source cell b, so the result does not
/// depend on the thread count.
template <RadialBand Band>
ExtractionReport extract_k_matrix(const KGrid& grid, const Band& band, const Mechanisms& mechs,
                                  const Scales& scales, const Eigen::VectorXd& gamma_int,
                                  const ExtractOptions& opt) {
  if (opt.n_particles < 1000) {
    throw std::invalid_argument("extract_k_matrix: need at least 1000 particles per cell");
  }
  const std::size_t n = grid.size();
  if (static_cast<std::size_t>(gamma_int.size()) != n) {
    throw std::invalid_argument("extract_k_matrix: gamma_int size mismatch");
  }
  const HomogeneousScatterer<Band> scatterer(grid, band, mechs);
  const double dt = opt.dt > 0.0 ? opt.dt : scatterer.default_dt();
  scatterer.check_dt(dt);
  const double dt_nd = scales.nondim_time(dt);

  ExtractionReport rep;
  rep.K_mc = CollisionMatrix::zeros(n, Provenance::monte_carlo);
  rep.K_mc.gamma_int = gamma_int;
  rep.n_particles = opt.n_particles;
  rep.dt = dt;
  rep.seed = opt.seed;
  rep.rate_majorant = scatterer.rate_majorant();

  std::vector<EvolveStats> stats(n);
  std::vector<std::uint64_t> escaped(n, 0);
  parallel_for(n, opt.threads, [&](std::size_t b) {
    Engine rng = substream(opt.seed, b);
    const KCell& cb = grid[b];
    std::vector<std::uint64_t> counts(n, 0);
    // Streams particles in chunks instead of holding the whole ensemble.
    constexpr std::size_t chunk = 4096;
    for (std::size_t done = 0; done < opt.n_particles; done += chunk) {
      const std::size_t m = std::min(chunk, opt.n_particles - done);
      ParticleEnsemble ens = seed_cell(grid, b, m, rng);
      for (auto& p : ens.particles) {
        scatterer.advance(p, rng, dt, stats[b]);
        if (const auto a = grid.locate(p.u, p.r)) {
          ++counts[*a];
        } else {
          ++escaped[b];
        }
      }
    }
    const double n_b = static_cast<double>(opt.n_particles);
    auto col = rep.K_mc.K.col(static_cast<Eigen::Index>(b));
    for (std::size_t a = 0; a < n; ++a) {
      // weight * count - delta_ab M_b, written so that count == n gives exactly 0.
      double frac = static_cast<double>(counts[a]) / n_b;
      if (a == b) frac = -static_cast<double>(opt.n_particles - counts[a]) / n_b;
      double v = frac * cb.measure / dt_nd;
      if (a == b) v += gamma_int[static_cast<Eigen::Index>(b)];
      col[static_cast<Eigen::Index>(a)] = std::max(v, 0.0);
    }
  });
  for (std::size_t b = 0; b < n; ++b) {
    rep.stats += stats[b];
    rep.escaped += escaped[b];
  }
  rep.K_mc.update_loss();
  return rep;
}

/// CSV row layout shared with the figure scripts: the first three columns
/// match the particles / maximum error / mean error table.
inline void write_error_report_header(std::ostream& os) {
  os << "particles,max_error,mean_error,max_error_abs,mean_error_abs,dt_s,seed,"
        "rejected_events,escaped\n";
}

inline void write_error_report_row(std::ostream& os, const ExtractionReport& rep) {
  const MatrixErrors e = rep.errors.value_or(MatrixErrors{});
  os.precision(15);
  os << rep.n_particles << ',' << e.max_rel << ',' << e.mean_rel << ',' << e.max_abs << ','
     << e.mean_abs << ',' << rep.dt << ',' << rep.seed << ',' << rep.stats.rejected_events << ','
     << rep.escaped << '\n';
}

}  // namespace bpdg
