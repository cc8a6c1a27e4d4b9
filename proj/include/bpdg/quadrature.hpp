#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "constants.hpp"

namespace bpdg {

/// Gauss-Legendre rule on [-1, 1]. Nodes are exactly antisymmetric.
struct GaussLegendre {
  std::vector<double> nodes;
  std::vector<double> weights;

  explicit GaussLegendre(std::size_t n) : nodes(n), weights(n) {
    if (n == 0) throw std::invalid_argument("GaussLegendre: need at least one node");
    // Legendre P_n(x) and its derivative by the three-term recurrence.
    auto legendre = [n](double x, double& dp) {
      double p0 = 1.0;
      double p1 = x;
      for (std::size_t k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / static_cast<double>(k);
        p0 = p1;
        p1 = p2;
      }
      dp = static_cast<double>(n) * (x * p1 - p0) / (x * x - 1.0);
      return p1;
    };
    for (std::size_t i = 0; i < n / 2; ++i) {
      double x = std::cos(pi * (static_cast<double>(i) + 0.75) / (static_cast<double>(n) + 0.5));
      double dp = 0.0;
      for (int it = 0; it < 100; ++it) {
        const double dx = legendre(x, dp) / dp;
        x -= dx;
        if (std::abs(dx) < 1e-16) break;
      }
      legendre(x, dp);
      const double w = 2.0 / ((1.0 - x * x) * dp * dp);
      nodes[i] = -x;
      nodes[n - 1 - i] = x;
      weights[i] = w;
      weights[n - 1 - i] = w;
    }
    if (n % 2 == 1) {
      double dp = 0.0;
      legendre(0.0, dp);
      nodes[n / 2] = 0.0;
      weights[n / 2] = n == 1 ? 2.0 : 2.0 / (dp * dp);
    }
  }

  [[nodiscard]] std::size_t size() const { return nodes.size(); }

  /// Integral of f over [a, b].
  template <typename F>
  [[nodiscard]] double integrate(F&& f, double a, double b) const {
    const double mid = 0.5 * (a + b);
    const double half = 0.5 * (b - a);
    double sum = 0.0;
    for (std::size_t i = 0; i < nodes.size(); ++i) sum += weights[i] * f(mid + half * nodes[i]);
    return sum * half;
  }

  /// Integral of f over [a, b] after s = a + (b - a)(1 - cos(pi t))/2. Square-root
  /// behaviour of f at either endpoint becomes analytic in t.
  template <typename F>
  [[nodiscard]] double integrate_endpoint_regular(F&& f, double a, double b) const {
    const double len = b - a;
    double sum = 0.0;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      const double t = 0.5 * (nodes[i] + 1.0);
      const double s = a + 0.5 * len * (1.0 - std::cos(pi * t));
      const double jac = 0.5 * len * pi * std::sin(pi * t);
      sum += weights[i] * f(s) * jac;
    }
    return 0.5 * sum;
  }
};

}  // namespace bpdg
