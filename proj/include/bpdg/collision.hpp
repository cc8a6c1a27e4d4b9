#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "band.hpp"
#include "kgrid.hpp"
#include "parallel.hpp"
#include "params.hpp"
#include "quadrature.hpp"

namespace bpdg {

enum class MechanismKind { acoustic_elastic, optical_emit, optical_absorb };

/// One term c * delta(eps(k') - eps(k) - energy_shift) of the kernel S(k, k').
struct ScatterMechanism {
  MechanismKind kind = MechanismKind::acoustic_elastic;
  double coupling = 0.0;      // eV m^3 / s
  double energy_shift = 0.0;  // eV, final minus initial energy
};

using Mechanisms = std::vector<ScatterMechanism>;

inline double phonon_occupation(const MaterialParams& mat) {
  return 1.0 / std::expm1(mat.hbar_omega_p / mat.thermal_energy_ev());
}

/// Elastic acoustic plus optical emission/absorption with the usual silicon couplings.
inline Mechanisms silicon_mechanisms(const MaterialParams& mat) {
  using C = PhysicalConstants;
  const double xi = mat.Xi_d * C::q;          // J
  const double dtk = mat.DtK * C::q;          // J/m
  const double kT = C::kB * mat.T_L;          // J
  const double omega = mat.hbar_omega_p * C::q / C::hbar;
  const double nq = phonon_occupation(mat);
  // Couplings come out in J m^3/s; divide by q for eV m^3/s.
  const double c_ac = xi * xi * kT / (4.0 * pi * pi * C::hbar * mat.rho0 * mat.v_sound * mat.v_sound);
  const double c_op = dtk * dtk / (8.0 * pi * pi * mat.rho0 * omega);
  return {
      {MechanismKind::acoustic_elastic, c_ac / C::q, 0.0},
      {MechanismKind::optical_emit, c_op * (nq + 1.0) / C::q, -mat.hbar_omega_p},
      {MechanismKind::optical_absorb, c_op * nq / C::q, mat.hbar_omega_p},
  };
}

/// Length of the u-projection of the arc {(u, sqrt(s^2 - u^2))} inside the
/// rectangle [u_a,u_b] x [r_a,r_b]. The area of the corresponding spherical
/// zone of radius s is 2 pi s times this length.
inline double arc_u_length(double s, double u_a, double u_b, double r_a, double r_b) {
  const double s2 = s * s;
  const double hi2 = s2 - r_a * r_a;
  if (hi2 <= 0.0) return 0.0;
  const double hi = std::sqrt(hi2);
  const double lo = std::sqrt(std::max(0.0, s2 - r_b * r_b));
  if (lo >= hi) return 0.0;
  auto overlap = [&](double a, double b) {
    const double l = std::max(a, u_a);
    const double h = std::min(b, u_b);
    return h > l ? h - l : 0.0;
  };
  return overlap(lo, hi) + overlap(-hi, -lo);
}

inline double arc_u_length(double s, const KCell& c) {
  return arc_u_length(s, c.u_a, c.u_b, c.r_a, c.r_b);
}

/// Radii (in units of k_star) where arc_u_length of the rectangle is not smooth.
inline std::vector<double> arc_breakpoints(double u_a, double u_b, double r_a, double r_b) {
  std::vector<double> us{u_a, u_b};
  if (u_a < 0.0 && u_b > 0.0) us.push_back(0.0);
  std::vector<double> out;
  for (double u : us) {
    out.push_back(std::hypot(u, r_a));
    out.push_back(std::hypot(u, r_b));
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

/// Radial extent [s_min, s_max] of a rectangle in the (u, r) half-plane.
struct RadialRange {
  double lo = 0.0;
  double hi = 0.0;
};

inline RadialRange radial_range(double u_a, double u_b, double r_a, double r_b) {
  const double ud = (u_a <= 0.0 && u_b >= 0.0) ? 0.0 : std::min(std::abs(u_a), std::abs(u_b));
  return {std::hypot(ud, r_a), std::hypot(std::max(std::abs(u_a), std::abs(u_b)), r_b)};
}

/// Full-space shell density  int delta(eps(k) - E) dk = 4 pi k^2 / (d eps/d|k|),
/// in 1/(m^3 eV). Zero for E <= 0.
template <RadialBand Band>
double shell_density(const Band& band, double energy) {
  if (energy <= 0.0) return 0.0;
  const double k = band.wavenumber_of_energy(energy);
  return 4.0 * pi * k * k / band.energy_slope(k);
}

/// Total outgoing rate Gamma(k) = int S(k, k') dk' over all of k-space, 1/s.
template <RadialBand Band>
double total_rate(const Mechanisms& mechs, const Band& band, double energy) {
  double g = 0.0;
  for (const auto& m : mechs) g += m.coupling * shell_density(band, energy + m.energy_shift);
  return g;
}

template <RadialBand Band>
double total_rate(const Mechanisms& mechs, const Band& band, const Vec3& k) {
  return total_rate(mechs, band, band.energy(k));
}

/// Shell density restricted to the part of the sphere inside a rectangle of
/// the (u, r) half-plane, 1/(m^3 eV).
template <RadialBand Band>
double restricted_shell_density(const Band& band, double k_star, double energy, double u_a,
                                double u_b, double r_a, double r_b) {
  if (energy <= 0.0) return 0.0;
  const double k = band.wavenumber_of_energy(energy);
  const double s = k / k_star;
  const double len = arc_u_length(s, u_a, u_b, r_a, r_b);
  if (len <= 0.0) return 0.0;
  return 2.0 * pi * k_star * k * len / band.energy_slope(k);
}

/// Gamma restricted to final states inside the computational domain, 1/s.
/// Equals total_rate whenever the final-energy sphere fits inside the grid.
template <RadialBand Band>
double total_rate_in_domain(const Mechanisms& mechs, const Band& band, const KGrid& grid,
                            double energy) {
  double g = 0.0;
  for (const auto& m : mechs) {
    g += m.coupling * restricted_shell_density(band, grid.k_star(), energy + m.energy_shift,
                                               -grid.u_max(), grid.u_max(), 0.0, grid.r_max());
  }
  return g;
}

enum class Provenance : std::uint32_t { oracle = 0, monte_carlo = 1 };

/// Dense K (nondimensional: K t_star / k_star^3) with column sums and the
/// per-cell integrated total rate (same scaling).
struct CollisionMatrix {
  Eigen::MatrixXd K;
  Eigen::VectorXd gamma_int;
  Eigen::VectorXd loss;  // column sums of K
  Provenance provenance = Provenance::oracle;

  [[nodiscard]] std::size_t size() const { return static_cast<std::size_t>(K.rows()); }

  void update_loss() { loss = K.colwise().sum().transpose(); }

  static CollisionMatrix zeros(std::size_t n, Provenance p = Provenance::oracle) {
    const auto m = static_cast<Eigen::Index>(n);
    CollisionMatrix c{Eigen::MatrixXd::Zero(m, m), Eigen::VectorXd::Zero(m),
                      Eigen::VectorXd::Zero(m), p};
    return c;
  }
};

/// g_a = sum_b (K_ab f_b - K_ba f_a).
inline Eigen::VectorXd apply_collision(const CollisionMatrix& cm, const Eigen::VectorXd& f) {
  if (f.size() != cm.K.cols()) throw std::invalid_argument("apply_collision: size mismatch");
  return cm.K * f - cm.loss.cwiseProduct(f);
}

/// Column-wise apply_collision on an N x n_x state.
inline Eigen::MatrixXd apply_collision(const CollisionMatrix& cm, const Eigen::MatrixXd& f) {
  if (f.rows() != cm.K.cols()) throw std::invalid_argument("apply_collision: size mismatch");
  Eigen::MatrixXd g = cm.K * f;
  g.noalias() -= cm.loss.asDiagonal() * f;
  return g;
}

namespace detail {

struct CellGeometry {
  double u_a, u_b, r_a, r_b;
  RadialRange range;
  std::vector<double> breaks;
};

inline std::vector<CellGeometry> cell_geometry(const KGrid& grid) {
  std::vector<CellGeometry> out;
  out.reserve(grid.size());
  for (const auto& c : grid.cells()) {
    out.push_back({c.u_a, c.u_b, c.r_a, c.r_b, radial_range(c.u_a, c.u_b, c.r_a, c.r_b),
                   arc_breakpoints(c.u_a, c.u_b, c.r_a, c.r_b)});
  }
  return out;
}

/// Maps radii between initial and final energy for a fixed energy shift.
template <RadialBand Band>
struct ShellMap {
  const Band& band;
  double k_star;
  double shift;  // eV

  /// Final radius for initial radius s; negative when the final energy is below 0.
  [[nodiscard]] double forward(double s) const {
    if (shift == 0.0) return s;
    const double e = band.energy_of_wavenumber(k_star * s) + shift;
    return e < 0.0 ? -1.0 : band.wavenumber_of_energy(e) / k_star;
  }
  /// Initial radius for final radius s; 0 when no initial state maps there.
  [[nodiscard]] double backward(double s) const {
    if (shift == 0.0) return s;
    const double e = band.energy_of_wavenumber(k_star * s) - shift;
    return e <= 0.0 ? 0.0 : band.wavenumber_of_energy(e) / k_star;
  }
};

/// int_{lo}^{hi} f over the subintervals cut at the given breakpoints.
template <typename F>
double integrate_piecewise(const GaussLegendre& gl, F&& f, double lo, double hi,
                           std::vector<double>& cuts) {
  if (!(hi > lo)) return 0.0;
  cuts.push_back(lo);
  cuts.push_back(hi);
  std::sort(cuts.begin(), cuts.end());
  double sum = 0.0;
  double prev = lo;
  for (double c : cuts) {
    if (c <= prev) continue;
    if (c > hi) break;
    sum += gl.integrate_endpoint_regular(f, prev, c);
    prev = c;
  }
  return sum;
}

}  // namespace detail

struct OracleOptions {
  std::size_t quad_points = 16;
  std::size_t threads = 0;
};

/// Per-cell integral of the in-domain total rate, nondimensional.
template <RadialBand Band>
Eigen::VectorXd gamma_integrals(const KGrid& grid, const Band& band, const Mechanisms& mechs,
                                const Scales& scales, const OracleOptions& opt = {}) {
  const GaussLegendre gl(opt.quad_points);
  const auto geom = detail::cell_geometry(grid);
  const double U = grid.u_max();
  const double R = grid.r_max();
  const std::vector<double> domain_breaks =
      arc_breakpoints(-U, U, 0.0, R);  // {0, R, U, hypot(U, R)} as applicable
  Eigen::VectorXd out = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(grid.size()));
  parallel_for(grid.size(), opt.threads, [&](std::size_t b) {
    const auto& gb = geom[b];
    double total = 0.0;
    std::vector<double> cuts;
    for (const auto& m : mechs) {
      if (m.coupling == 0.0) continue;
      const detail::ShellMap<Band> map{band, grid.k_star(), m.energy_shift};
      cuts = gb.breaks;
      for (double s : domain_breaks) cuts.push_back(map.backward(s));
      auto integrand = [&](double s) {
        const double e = band.energy_of_wavenumber(grid.k_star() * s) + m.energy_shift;
        return 2.0 * pi * s * arc_u_length(s, gb.u_a, gb.u_b, gb.r_a, gb.r_b) *
               restricted_shell_density(band, grid.k_star(), e, -U, U, 0.0, R);
      };
      total += m.coupling *
               detail::integrate_piecewise(gl, integrand, gb.range.lo, gb.range.hi, cuts);
    }
    out[static_cast<Eigen::Index>(b)] = scales.t_star * total;
  });
  return out;
}

/// K_ab = int_{C_a} dk int_{C_b} dk' S(k', k) by the co-area reduction: both
/// cell integrals collapse onto spherical shells, leaving one radial quadrature
/// per (a, b, mechanism), split at every radius where either arc changes shape.
template <RadialBand Band>
CollisionMatrix k_matrix_oracle(const KGrid& grid, const Band& band, const Mechanisms& mechs,
                                const Scales& scales, const OracleOptions& opt = {}) {
  const std::size_t n = grid.size();
  CollisionMatrix cm = CollisionMatrix::zeros(n, Provenance::oracle);
  const GaussLegendre gl(opt.quad_points);
  const auto geom = detail::cell_geometry(grid);
  const double k_star = grid.k_star();

  parallel_for(n, opt.threads, [&](std::size_t b) {
    const auto& gb = geom[b];
    std::vector<double> cuts;
    for (const auto& m : mechs) {
      if (m.coupling == 0.0) continue;
      const detail::ShellMap<Band> map{band, k_star, m.energy_shift};
      const double t_lo = map.forward(gb.range.lo);
      const double t_hi = map.forward(gb.range.hi);
      if (t_hi <= 0.0) continue;
      for (std::size_t a = 0; a < n; ++a) {
        const auto& ga = geom[a];
        if (ga.range.hi <= std::max(t_lo, 0.0) || ga.range.lo >= t_hi) continue;
        const double lo = std::max(gb.range.lo, map.backward(ga.range.lo));
        const double hi = std::min(gb.range.hi, map.backward(ga.range.hi));
        if (!(hi > lo)) continue;
        cuts = gb.breaks;
        for (double s : ga.breaks) cuts.push_back(map.backward(s));
        auto integrand = [&](double s) {
          const double e = band.energy_of_wavenumber(k_star * s) + m.energy_shift;
          return 2.0 * pi * s * arc_u_length(s, gb.u_a, gb.u_b, gb.r_a, gb.r_b) *
                 restricted_shell_density(band, k_star, e, ga.u_a, ga.u_b, ga.r_a, ga.r_b);
        };
        const double v = detail::integrate_piecewise(gl, integrand, lo, hi, cuts);
        cm.K(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) +=
            scales.t_star * m.coupling * v;
      }
    }
  });
  cm.gamma_int = gamma_integrals(grid, band, mechs, scales, opt);
  cm.update_loss();
  return cm;
}

/// Normalized null vector of the collision operator (sum_a M_a f_a = 1).
inline Eigen::VectorXd collision_equilibrium(const CollisionMatrix& cm,
                                             const Eigen::VectorXd& measure) {
  const auto n = cm.K.rows();
  Eigen::MatrixXd A = cm.K;
  A.diagonal() -= cm.loss;
  A.row(n - 1) = measure.transpose();
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
  rhs[n - 1] = 1.0;
  return A.partialPivLu().solve(rhs);
}

}  // namespace bpdg
