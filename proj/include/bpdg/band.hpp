#pragma once

#include <array>
#include <cmath>
#include <concepts>
#include <stdexcept>

#include "constants.hpp"
#include "params.hpp"

namespace bpdg {

using Vec3 = std::array<double, 3>;

inline double norm(const Vec3& k) { return std::sqrt(k[0] * k[0] + k[1] * k[1] + k[2] * k[2]); }

/// Isotropic band: energy depends on |k| only. Wave numbers in 1/m, energies in eV.
template <typename B>
concept RadialBand = requires(const B& b, double x) {
  { b.energy_of_wavenumber(x) } -> std::convertible_to<double>;
  { b.wavenumber_of_energy(x) } -> std::convertible_to<double>;
  { b.energy_slope(x) } -> std::convertible_to<double>;  // d eps / d|k|, eV m
};

/// Kane nonparabolic band eps (1 + alpha eps) = hbar^2 k^2 / (2 m*).
/// alpha = 0 gives the parabolic band.
class KaneBand {
 public:
  enum class Kind { parabolic, kane };

  KaneBand(double m_star, double alpha_kane) : m_star_(m_star), alpha_(alpha_kane) {
    if (!(m_star > 0.0)) throw std::invalid_argument("KaneBand: m_star must be positive");
    if (!(alpha_kane >= 0.0)) throw std::invalid_argument("KaneBand: alpha must be >= 0");
    gamma_coeff_ = PhysicalConstants::hbar * PhysicalConstants::hbar /
                   (2.0 * m_star * PhysicalConstants::q);
  }

  static KaneBand parabolic(double m_star) { return {m_star, 0.0}; }
  static KaneBand from(const MaterialParams& mat) { return {mat.m_star, mat.alpha_kane}; }

  [[nodiscard]] Kind kind() const { return alpha_ == 0.0 ? Kind::parabolic : Kind::kane; }
  [[nodiscard]] double m_star() const { return m_star_; }
  [[nodiscard]] double alpha() const { return alpha_; }

  /// hbar^2 k^2 / (2 m*) in eV.
  [[nodiscard]] double gamma(double k) const { return gamma_coeff_ * k * k; }

  [[nodiscard]] double energy_of_gamma(double g) const {
    // Positive root written without cancellation.
    return 2.0 * g / (1.0 + std::sqrt(1.0 + 4.0 * alpha_ * g));
  }

  [[nodiscard]] double energy_of_wavenumber(double k) const { return energy_of_gamma(gamma(k)); }

  [[nodiscard]] double wavenumber_of_energy(double e) const {
    if (e < 0.0) throw std::domain_error("wavenumber_of_energy: negative energy");
    return std::sqrt(e * (1.0 + alpha_ * e) / gamma_coeff_);
  }

  /// d eps / d|k| = hbar^2 k / (m* (1 + 2 alpha eps)), in eV m.
  [[nodiscard]] double energy_slope(double k) const {
    const double e = energy_of_wavenumber(k);
    return 2.0 * gamma_coeff_ * k / (1.0 + 2.0 * alpha_ * e);
  }

  [[nodiscard]] double energy(const Vec3& k) const { return energy_of_wavenumber(norm(k)); }

  /// (1/hbar) grad_k eps in m/s.
  [[nodiscard]] Vec3 group_velocity(const Vec3& k) const {
    const double e = energy(k);
    const double c = PhysicalConstants::hbar / (m_star_ * (1.0 + 2.0 * alpha_ * e));
    return {c * k[0], c * k[1], c * k[2]};
  }

  /// Velocity along x divided by k_x, m^2/s; lets callers avoid building a Vec3.
  [[nodiscard]] double velocity_factor(double k) const {
    return PhysicalConstants::hbar / (m_star_ * (1.0 + 2.0 * alpha_ * energy_of_wavenumber(k)));
  }

 private:
  double m_star_;
  double alpha_;
  double gamma_coeff_;  // eV m^2
};

static_assert(RadialBand<KaneBand>);

}  // namespace bpdg
