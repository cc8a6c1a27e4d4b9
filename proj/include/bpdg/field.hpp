#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

#include "constants.hpp"

namespace bpdg {

/// 1-D electrostatics on [0, L] with n_x equal intervals and Dirichlet ends.
struct PoissonProblem {
  std::size_t n_x = 0;
  double dx = 0.0;              // m
  std::vector<double> eps_r;    // per interval
  double v_left = 0.0;          // V
  double v_right = 0.0;         // V
};

struct PoissonSolution {
  std::vector<double> potential;  // n_x + 1 node values, V
  std::vector<double> field;      // n_x interval values, V/m
};

/// Thomas algorithm for a tridiagonal system; sub[0] and sup[n-1] unused.
inline std::vector<double> solve_tridiagonal(std::vector<double> sub, std::vector<double> diag,
                                             std::vector<double> sup, std::vector<double> rhs) {
  const std::size_t n = diag.size();
  if (sub.size() != n || sup.size() != n || rhs.size() != n) {
    throw std::invalid_argument("solve_tridiagonal: size mismatch");
  }
  for (std::size_t i = 1; i < n; ++i) {
    const double w = sub[i] / diag[i - 1];
    diag[i] -= w * sup[i - 1];
    rhs[i] -= w * rhs[i - 1];
  }
  std::vector<double> x(n);
  x[n - 1] = rhs[n - 1] / diag[n - 1];
  for (std::size_t i = n - 1; i-- > 0;) x[i] = (rhs[i] - sup[i] * x[i + 1]) / diag[i];
  return x;
}

/// Solves d/dx(eps_r dV/dx) = (q/eps0)(rho - N_D), i.e. div(eps_r E) = -(q/eps0)(rho - N_D)
/// with E = -dV/dx. rho and N_D are per-interval densities in 1/m^3; the nodal
/// source is the mean of the two adjacent intervals. E is -(V_{i+1} - V_i)/dx.
inline PoissonSolution solve_poisson(const PoissonProblem& p, const std::vector<double>& rho,
                                     const std::vector<double>& doping) {
  const std::size_t n = p.n_x;
  if (n < 2 || rho.size() != n || doping.size() != n || p.eps_r.size() != n) {
    throw std::invalid_argument("solve_poisson: dimension mismatch");
  }
  if (!(p.dx > 0.0)) throw std::invalid_argument("solve_poisson: dx must be positive");
  const double c = PhysicalConstants::q / PhysicalConstants::eps0 * p.dx * p.dx;
  const std::size_t m = n - 1;  // interior nodes 1..n-1
  std::vector<double> sub(m), diag(m), sup(m), rhs(m);
  for (std::size_t k = 0; k < m; ++k) {
    const std::size_t j = k + 1;
    const double el = p.eps_r[j - 1];
    const double er = p.eps_r[j];
    sub[k] = el;
    sup[k] = er;
    diag[k] = -(el + er);
    rhs[k] = 0.5 * c * ((rho[j - 1] - doping[j - 1]) + (rho[j] - doping[j]));
  }
  rhs[0] -= p.eps_r[0] * p.v_left;
  rhs[m - 1] -= p.eps_r[n - 1] * p.v_right;
  sub[0] = 0.0;
  sup[m - 1] = 0.0;
  const auto interior = solve_tridiagonal(std::move(sub), std::move(diag), std::move(sup),
                                          std::move(rhs));
  PoissonSolution sol;
  sol.potential.resize(n + 1);
  sol.potential[0] = p.v_left;
  sol.potential[n] = p.v_right;
  for (std::size_t k = 0; k < m; ++k) sol.potential[k + 1] = interior[k];
  sol.field.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    sol.field[i] = -(sol.potential[i + 1] - sol.potential[i]) / p.dx;
  }
  return sol;
}

}  // namespace bpdg
