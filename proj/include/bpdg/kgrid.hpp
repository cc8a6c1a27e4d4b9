#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <vector>

#include "band.hpp"
#include "params.hpp"
#include "quadrature.hpp"

namespace bpdg {

/// Annular cell [u_a,u_b] x [r_a,r_b] x [0,2pi] in k = k_star (u, r cos t, r sin t).
/// measure and eta_x are nondimensional: M / k_star^3 and eta_x / (k_star^3 v_star).
struct KCell {
  std::size_t index = 0;
  double u_a = 0.0, u_b = 0.0;
  double r_a = 0.0, r_b = 0.0;
  double measure = 0.0;
  double eta_x = 0.0;
  double mean_energy = 0.0;  // eV
  std::optional<std::size_t> up_neighbor;    // cell at larger u
  std::optional<std::size_t> down_neighbor;  // cell at smaller u

  /// Area of a constant-u face, nondimensional.
  [[nodiscard]] double face_area() const { return pi * (r_b * r_b - r_a * r_a); }
  [[nodiscard]] double u_center() const { return 0.5 * (u_a + u_b); }
  [[nodiscard]] double r_center() const { return 0.5 * (r_a + r_b); }
};

class KGrid {
 public:
  KGrid(std::size_t n_u, std::size_t n_r, double u_max, double r_max, double k_star)
      : n_u_(n_u), n_r_(n_r), u_max_(u_max), r_max_(r_max), k_star_(k_star) {
    if (n_u == 0 || n_r == 0) throw std::invalid_argument("KGrid: resolution must be >= 1");
    if (!(u_max > 0.0) || !(r_max > 0.0)) {
      throw std::invalid_argument("KGrid: extents must be positive");
    }
    u_breaks_.resize(n_u + 1);
    r_breaks_.resize(n_r + 1);
    // Written so that u_breaks_[i] == -u_breaks_[n_u - i] exactly.
    for (std::size_t i = 0; i <= n_u; ++i) {
      const double m = 2.0 * static_cast<double>(i) - static_cast<double>(n_u);
      u_breaks_[i] = u_max * m / static_cast<double>(n_u);
    }
    for (std::size_t j = 0; j <= n_r; ++j) {
      r_breaks_[j] = r_max * static_cast<double>(j) / static_cast<double>(n_r);
    }
    cells_.resize(n_u * n_r);
    for (std::size_t iu = 0; iu < n_u; ++iu) {
      for (std::size_t ir = 0; ir < n_r; ++ir) {
        KCell& c = cells_[index(iu, ir)];
        c.index = index(iu, ir);
        c.u_a = u_breaks_[iu];
        c.u_b = u_breaks_[iu + 1];
        c.r_a = r_breaks_[ir];
        c.r_b = r_breaks_[ir + 1];
        c.measure = pi * (c.r_b * c.r_b - c.r_a * c.r_a) * (c.u_b - c.u_a);
        if (iu + 1 < n_u) c.up_neighbor = index(iu + 1, ir);
        if (iu > 0) c.down_neighbor = index(iu - 1, ir);
      }
    }
  }

  [[nodiscard]] std::size_t size() const { return cells_.size(); }
  [[nodiscard]] std::size_t n_u() const { return n_u_; }
  [[nodiscard]] std::size_t n_r() const { return n_r_; }
  [[nodiscard]] double u_max() const { return u_max_; }
  [[nodiscard]] double r_max() const { return r_max_; }
  [[nodiscard]] double k_star() const { return k_star_; }
  [[nodiscard]] double du() const { return 2.0 * u_max_ / static_cast<double>(n_u_); }
  [[nodiscard]] const std::vector<double>& u_breaks() const { return u_breaks_; }
  [[nodiscard]] const std::vector<double>& r_breaks() const { return r_breaks_; }
  [[nodiscard]] const std::vector<KCell>& cells() const { return cells_; }
  [[nodiscard]] const KCell& operator[](std::size_t a) const { return cells_[a]; }
  [[nodiscard]] KCell& mutable_cell(std::size_t a) { return cells_[a]; }

  [[nodiscard]] std::size_t index(std::size_t iu, std::size_t ir) const { return iu * n_r_ + ir; }
  [[nodiscard]] std::size_t u_index(std::size_t a) const { return a / n_r_; }
  [[nodiscard]] std::size_t r_index(std::size_t a) const { return a % n_r_; }

  /// Nondimensional volume of the whole domain.
  [[nodiscard]] double total_measure() const { return pi * r_max_ * r_max_ * 2.0 * u_max_; }

  /// Largest |k| / k_star in the domain (the outer corner).
  [[nodiscard]] double max_radius() const { return std::hypot(u_max_, r_max_); }

  /// Cell containing (u, r) under the half-open convention [a, b) in both
  /// directions; nullopt outside [-u_max, u_max) x [0, r_max).
  [[nodiscard]] std::optional<std::size_t> locate(double u, double r) const {
    if (!(u >= u_breaks_.front() && u < u_breaks_.back())) return std::nullopt;
    if (!(r >= 0.0 && r < r_breaks_.back())) return std::nullopt;
    const std::size_t iu = bin(u_breaks_, u, (u + u_max_) / du());
    const std::size_t ir = bin(r_breaks_, r, r * static_cast<double>(n_r_) / r_max_);
    return index(iu, ir);
  }

  /// Locate by exhaustive comparison against every cell. Test oracle.
  [[nodiscard]] std::optional<std::size_t> locate_by_scan(double u, double r) const {
    for (const auto& c : cells_) {
      if (u >= c.u_a && u < c.u_b && r >= c.r_a && r < c.r_b) return c.index;
    }
    return std::nullopt;
  }

 private:
  // Index guess from the uniform spacing, corrected against the breakpoints.
  static std::size_t bin(const std::vector<double>& breaks, double value, double guess) {
    const auto n = static_cast<std::ptrdiff_t>(breaks.size()) - 1;
    std::ptrdiff_t i = static_cast<std::ptrdiff_t>(std::floor(guess));
    i = std::clamp<std::ptrdiff_t>(i, 0, n - 1);
    while (i > 0 && value < breaks[static_cast<std::size_t>(i)]) --i;
    while (i + 1 < n && value >= breaks[static_cast<std::size_t>(i) + 1]) ++i;
    return static_cast<std::size_t>(i);
  }

  std::size_t n_u_, n_r_;
  double u_max_, r_max_, k_star_;
  std::vector<double> u_breaks_, r_breaks_;
  std::vector<KCell> cells_;
};

/// Builds the tensor grid and fills eta_x and mean_energy by tensor Gauss-Legendre
/// quadrature (theta integrated analytically).
template <RadialBand Band>
KGrid build_grid(std::size_t n_u, std::size_t n_r, double u_max, double r_max, const Band& band,
                 const Scales& scales, std::size_t quad_points = 8) {
  KGrid grid(n_u, n_r, u_max, r_max, scales.k_star);
  const GaussLegendre gl(quad_points);
  const double k_star = scales.k_star;
  // v_x = (q/hbar) d eps/d|k| * u / |k~|, nondimensionalized by v_star.
  const double vel_scale = PhysicalConstants::q / PhysicalConstants::hbar / scales.v_star();
  for (std::size_t a = 0; a < grid.size(); ++a) {
    KCell& c = grid.mutable_cell(a);
    double eta = 0.0;
    double energy = 0.0;
    const double hu = 0.5 * (c.u_b - c.u_a);
    const double hr = 0.5 * (c.r_b - c.r_a);
    for (std::size_t i = 0; i < gl.size(); ++i) {
      const double u = 0.5 * (c.u_a + c.u_b) + hu * gl.nodes[i];
      for (std::size_t j = 0; j < gl.size(); ++j) {
        const double r = 0.5 * (c.r_a + c.r_b) + hr * gl.nodes[j];
        const double s = std::hypot(u, r);
        const double w = gl.weights[i] * gl.weights[j] * r;
        const double k = k_star * s;
        if (s > 0.0) eta += w * vel_scale * band.energy_slope(k) * u / s;
        energy += w * band.energy_of_wavenumber(k);
      }
    }
    c.eta_x = 2.0 * pi * hu * hr * eta;
    c.mean_energy = 2.0 * pi * hu * hr * energy / c.measure;
  }
  return grid;
}

template <RadialBand Band>
KGrid build_grid(const DeviceConfig& cfg, const Band& band, const Scales& scales) {
  return build_grid(cfg.n_u, cfg.n_r, cfg.u_max, cfg.r_max, band, scales);
}

/// CSV dump: index, u_a, u_b, r_a, r_b, measure, eta_x, mean_energy.
inline void write_grid_csv(std::ostream& os, const KGrid& grid) {
  os << "index,u_a,u_b,r_a,r_b,measure,eta_x,mean_energy_eV\n";
  os.precision(15);
  for (const auto& c : grid.cells()) {
    os << c.index << ',' << c.u_a << ',' << c.u_b << ',' << c.r_a << ',' << c.r_b << ','
       << c.measure << ',' << c.eta_x << ',' << c.mean_energy << '\n';
  }
}

}  // namespace bpdg
