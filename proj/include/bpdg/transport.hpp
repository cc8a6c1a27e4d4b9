#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include "collision.hpp"
#include "kgrid.hpp"
#include "params.hpp"

namespace bpdg {

/// f_a(x_i) as an N x n_x matrix (column i is interval i), nondimensional.
struct StateField {
  Eigen::MatrixXd values;
  double time = 0.0;  // s
};

struct BoundarySpec {
  enum class Kind { charge_neutral, periodic };
  Kind kind = Kind::charge_neutral;
  double left_doping = 0.0;   // 1/m^3
  double right_doping = 0.0;  // 1/m^3
};

struct GhostColumns {
  Eigen::VectorXd left;
  Eigen::VectorXd right;
};

/// Semidiscrete right-hand side
///   M_a df_a/dt = -eta_a df_a/dx + (E/E_star) A_a [f^_b - f^_a] + sum_b (K_ab f_b - K_ba f_a)
/// with first-order upwinding in x and the upwind face values in u.
class TransportOperator {
 public:
  TransportOperator(const KGrid& grid, const Scales& scales, double dx)
      : grid_(grid), scales_(scales), dx_nd_(scales.nondim_length(dx)) {
    if (!(dx > 0.0)) throw std::invalid_argument("TransportOperator: dx must be positive");
    const auto n = static_cast<Eigen::Index>(grid.size());
    measure_.resize(n);
    eta_.resize(n);
    face_.resize(n);
    for (const auto& c : grid.cells()) {
      const auto a = static_cast<Eigen::Index>(c.index);
      measure_[a] = c.measure;
      eta_[a] = c.eta_x;
      face_[a] = c.face_area();
    }
  }

  [[nodiscard]] const KGrid& grid() const { return grid_; }
  [[nodiscard]] const Eigen::VectorXd& measure() const { return measure_; }
  [[nodiscard]] double dx_nd() const { return dx_nd_; }

  /// Electron density (1/m^3) of every interval.
  [[nodiscard]] Eigen::RowVectorXd density(const Eigen::MatrixXd& f) const {
    return scales_.rho_star * (measure_.transpose() * f);
  }

  /// Ghost values: charge-neutral contacts rescale the boundary pdf so its
  /// density matches the contact doping.
  [[nodiscard]] GhostColumns apply_bc(const Eigen::MatrixXd& f, const BoundarySpec& bc) const {
    const Eigen::Index last = f.cols() - 1;
    if (bc.kind == BoundarySpec::Kind::periodic) return {f.col(last), f.col(0)};
    const double rho_l = scales_.rho_star * measure_.dot(f.col(0));
    const double rho_r = scales_.rho_star * measure_.dot(f.col(last));
    if (!(rho_l > 0.0) || !(rho_r > 0.0)) {
      throw std::runtime_error("apply_bc: boundary interval has non-positive density");
    }
    return {f.col(0) * (bc.left_doping / rho_l), f.col(last) * (bc.right_doping / rho_r)};
  }

  /// df/d(t/t_star). efield holds E_x (V/m) per interval.
  [[nodiscard]] Eigen::MatrixXd rhs(const Eigen::MatrixXd& f, const std::vector<double>& efield,
                                    const CollisionMatrix& cm, const BoundarySpec& bc) const {
    const Eigen::Index n = f.rows();
    const Eigen::Index nx = f.cols();
    if (n != static_cast<Eigen::Index>(grid_.size()) || nx < 1 ||
        efield.size() != static_cast<std::size_t>(nx) || cm.K.rows() != n) {
      throw std::invalid_argument("rhs: dimension mismatch");
    }
    const GhostColumns ghost = apply_bc(f, bc);
    Eigen::MatrixXd out = apply_collision(cm, f);
    const std::size_t n_r = grid_.n_r();
    const std::size_t n_u = grid_.n_u();
    for (Eigen::Index i = 0; i < nx; ++i) {
      const double e = scales_.nondim_field(efield[static_cast<std::size_t>(i)]);
      const std::span<const double> fi(f.col(i).data(), static_cast<std::size_t>(n));
      const std::span<const double> left(i > 0 ? f.col(i - 1).data() : ghost.left.data(),
                                         static_cast<std::size_t>(n));
      const std::span<const double> right(i + 1 < nx ? f.col(i + 1).data() : ghost.right.data(),
                                          static_cast<std::size_t>(n));
      const std::span<double> oi(out.col(i).data(), static_cast<std::size_t>(n));
      for (std::size_t iu = 0; iu < n_u; ++iu) {
        for (std::size_t ir = 0; ir < n_r; ++ir) {
          const std::size_t a = iu * n_r + ir;
          const double eta = eta_[static_cast<Eigen::Index>(a)];
          const double adv = eta > 0.0 ? eta * (fi[a] - left[a]) : eta * (right[a] - fi[a]);
          // Face values; outer faces of the u range carry zero.
          double f_lo = 0.0;
          double f_hi = 0.0;
          if (e >= 0.0) {
            if (iu > 0) f_lo = fi[a];
            if (iu + 1 < n_u) f_hi = fi[a + n_r];
          } else {
            if (iu > 0) f_lo = fi[a - n_r];
            if (iu + 1 < n_u) f_hi = fi[a];
          }
          const auto ai = static_cast<Eigen::Index>(a);
          oi[a] = (oi[a] - adv / dx_nd_ + e * face_[ai] * (f_hi - f_lo)) / measure_[ai];
        }
      }
    }
    return out;
  }

  /// Bound on the explicit Euler outflow rate (per unit nondimensional time).
  [[nodiscard]] double max_rate(const std::vector<double>& efield,
                                const CollisionMatrix& cm) const {
    double adv = 0.0;
    double loss = 0.0;
    for (Eigen::Index a = 0; a < measure_.size(); ++a) {
      adv = std::max(adv, std::abs(eta_[a]) / measure_[a]);
      loss = std::max(loss, cm.loss[a] / measure_[a]);
    }
    double emax = 0.0;
    for (double e : efield) emax = std::max(emax, std::abs(scales_.nondim_field(e)));
    return adv / dx_nd_ + emax / grid_.du() + loss;
  }

 private:
  const KGrid& grid_;
  Scales scales_;
  double dx_nd_;
  Eigen::VectorXd measure_;
  Eigen::VectorXd eta_;
  Eigen::VectorXd face_;
};

}  // namespace bpdg
