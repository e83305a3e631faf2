#pragma once

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace ngamd {

/// Gauss-Legendre rule mapped to (lo, hi).
struct QuadRule {
  std::vector<double> nodes;
  std::vector<double> weights;

  template <typename F>
  double integrate(F&& f) const {
    double acc = 0.0;
    for (std::size_t i = 0; i < nodes.size(); ++i) acc += weights[i] * f(nodes[i]);
    return acc;
  }
};

/// n-node Gauss-Legendre rule on (lo, hi). Nodes found by Newton iteration
/// from the Chebyshev initial guess.
inline QuadRule gauss_legendre(int n, double lo, double hi) {
  if (n < 1 || !(hi > lo)) throw std::domain_error("gauss_legendre: bad rule spec");
  QuadRule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  const double mid = 0.5 * (hi + lo);
  const double half = 0.5 * (hi - lo);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      // Legendre recurrence for P_n(x) and P'_n(x).
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    rule.nodes[i] = mid - half * x;
    rule.nodes[n - 1 - i] = mid + half * x;
    rule.weights[i] = half * w;
    rule.weights[n - 1 - i] = half * w;
  }
  return rule;
}

/// Quadrature configuration for the performance integrals: a rule on (0,1)
/// for the loss factor and a truncated rule for the signal-power variable.
struct QuadratureSpec {
  int rho_nodes = 64;
  int mu1_nodes = 128;
  /// Truncation point multiplier: mu1_max = tail_factor * max_k e_k.
  double tail_factor = 40.0;

  QuadRule rho_rule() const { return gauss_legendre(rho_nodes, 0.0, 1.0); }
  QuadRule mu1_rule(double mu1_max) const {
    return gauss_legendre(mu1_nodes, 0.0, mu1_max);
  }
};

}  // namespace ngamd
