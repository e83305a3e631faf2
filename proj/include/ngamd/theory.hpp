#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "ngamd/quadrature.hpp"
#include "ngamd/specfun.hpp"

namespace ngamd {

struct BracketError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NumericalInstability : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DegenerateSpectrum : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DetectorDims {
  int N;
  int r;
  int K;

  DetectorDims(int N_, int r_, int K_) : N(N_), r(r_), K(K_) {
    if (!(r >= 1 && r < N && K >= N))
      throw std::domain_error("DetectorDims: need 1 <= r < N <= K");
  }
};

/// Loss-factor density family. The covariance-estimation loss rho is
/// modeled as Beta(K-N+2, N-r); the family is isolated here so an
/// alternative density can be swapped without touching the integrals.
struct LossFactorModel {
  DetectorDims dims;
  double a;
  double b;

  explicit LossFactorModel(DetectorDims d)
      : dims(d), a(d.K - d.N + 2.0), b(static_cast<double>(d.N - d.r)) {}

  /// Pluggable-family escape hatch: an explicit Beta(a, b).
  LossFactorModel(DetectorDims d, double a_, double b_) : dims(d), a(a_), b(b_) {
    if (!(a > 0.0 && b > 0.0))
      throw std::domain_error("LossFactorModel: a, b must be > 0");
  }
};

inline double f_rho_pdf(double rho, const LossFactorModel& m) {
  if (!(rho > 0.0 && rho < 1.0))
    throw std::domain_error("f_rho_pdf: rho must lie in (0,1)");
  const double log_norm =
      ln_gamma(m.a + m.b) - ln_gamma(m.a) - ln_gamma(m.b);
  return std::exp(log_norm + (m.a - 1.0) * std::log(rho) +
                  (m.b - 1.0) * std::log1p(-rho));
}

/// Conditional false-alarm probability given the loss factor rho:
///   (1+c)^{-(K-N+1)} sum_{i=1..r} C(K-N+r-i, r-i) (c/(1+c))^{r-i},
/// with c = rho * lambda0. Evaluated in log-space.
inline double conditional_pfa(double rho, double lambda0, const DetectorDims& d) {
  if (!(lambda0 >= 0.0)) throw std::domain_error("conditional_pfa: lambda0 < 0");
  if (lambda0 == 0.0) return 1.0;
  const double log_c = std::log(rho) + std::log(lambda0);
  const double log1pc = std::log1p(rho * lambda0);
  std::vector<double> log_terms;
  log_terms.reserve(d.r);
  for (int i = 1; i <= d.r; ++i) {
    const int j = d.r - i;
    log_terms.push_back(std::log(binom(d.K - d.N + j, j)) + j * (log_c - log1pc) -
                        (d.K - d.N + 1.0) * log1pc);
  }
  return std::min(std::exp(log_sum_exp(log_terms)), 1.0);
}

inline double pfa(double lambda0, const DetectorDims& d, const QuadratureSpec& q,
                  const LossFactorModel& m) {
  if (lambda0 == 0.0) return 1.0;
  const QuadRule rule = q.rho_rule();
  return std::min(rule.integrate([&](double rho) {
    return conditional_pfa(rho, lambda0, d) * f_rho_pdf(rho, m);
  }), 1.0);
}

/// Threshold giving the requested false-alarm probability, by bisection on
/// log(lambda0) over [1e-8, 1e8].
inline double invert_threshold(double pfa_target, const DetectorDims& d,
                               const QuadratureSpec& q, const LossFactorModel& m) {
  if (!(pfa_target > 0.0 && pfa_target < 1.0))
    throw std::domain_error("invert_threshold: target must lie in (0,1)");
  double lo = std::log(1e-8), hi = std::log(1e8);
  if (pfa(std::exp(lo), d, q, m) < pfa_target ||
      pfa(std::exp(hi), d, q, m) > pfa_target)
    throw BracketError("invert_threshold: target not attainable in bracket");
  for (int iter = 0; iter < 200; ++iter) {
    const double mid = 0.5 * (lo + hi);
    const double p = pfa(std::exp(mid), d, q, m);
    if (p > pfa_target)
      lo = mid;
    else
      hi = mid;
    if (std::abs(p - pfa_target) <= 1e-12 * pfa_target) break;
  }
  // Polish: the loop leaves a tight bracket; take the midpoint.
  return std::exp(0.5 * (lo + hi));
}

/// Conditional detection probability for a deterministic target (fixed
/// signal power term mu1), with the inverse-gamma texture marginalized:
///
///   1 - (beta mu1)^{-alpha} / Gamma(alpha) * (c/(1+c))^r (1+c)^{-(K-N)}
///       * sum_{i=0..K-N} C(K-N+r, r+i) c^i
///         sum_{m=0..i} (1/m!) s^m (s + 1/(beta mu1))^{-(m+alpha)} Gamma(m+alpha)
///
/// with c = rho lambda0 and s = rho/(1+c).
inline double conditional_pd_deterministic(double rho, double lambda0, double mu1,
                                           const TextureParams& texture,
                                           const DetectorDims& d) {
  if (mu1 == 0.0) return conditional_pfa(rho, lambda0, d);
  if (!(mu1 > 0.0)) throw std::domain_error("conditional_pd_deterministic: mu1 < 0");
  if (lambda0 == 0.0) return 1.0;
  const int M = d.K - d.N;
  const double log_c = std::log(rho) + std::log(lambda0);
  const double log1pc = std::log1p(rho * lambda0);
  const double log_s = std::log(rho) - log1pc;
  const double inv_bmu1 = 1.0 / (texture.beta * mu1);
  const double log_shift = std::log(std::exp(log_s) + inv_bmu1);

  const double log_prefactor = -texture.alpha * std::log(texture.beta * mu1) -
                               ln_gamma(texture.alpha) + d.r * (log_c - log1pc) -
                               M * log1pc;
  std::vector<double> log_terms;
  log_terms.reserve((M + 1) * (M + 2) / 2);
  for (int i = 0; i <= M; ++i) {
    const double log_outer = std::log(binom(M + d.r, d.r + i)) + i * log_c;
    for (int m = 0; m <= i; ++m) {
      log_terms.push_back(log_outer - ln_gamma(m + 1.0) + m * log_s -
                          (m + texture.alpha) * log_shift +
                          ln_gamma(m + texture.alpha));
    }
  }
  const double miss = std::exp(log_prefactor + log_sum_exp(log_terms));
  const double pd = 1.0 - miss;
  if (pd < -1e-9 || pd > 1.0 + 1e-9)
    throw NumericalInstability("conditional_pd_deterministic: sum left [0,1]");
  return std::clamp(pd, 0.0, 1.0);
}

inline double pd_deterministic(double lambda0, double mu1, const TextureParams& texture,
                               const DetectorDims& d, const QuadratureSpec& q,
                               const LossFactorModel& m) {
  const QuadRule rule = q.rho_rule();
  return std::clamp(rule.integrate([&](double rho) {
    return conditional_pd_deterministic(rho, lambda0, mu1, texture, d) *
           f_rho_pdf(rho, m);
  }), 0.0, 1.0);
}

/// Gamma(alpha, scale beta*mu1) density of mu = mu1 / kappa; oracle
/// integrand for the texture marginalization.
inline double f_mu_pdf(double mu, double mu1, const TextureParams& texture) {
  if (!(mu > 0.0) || !(mu1 > 0.0)) throw std::domain_error("f_mu_pdf: need mu, mu1 > 0");
  const double scale = texture.beta * mu1;
  return std::exp(-texture.alpha * std::log(scale) - ln_gamma(texture.alpha) +
                  (texture.alpha - 1.0) * std::log(mu) - mu / scale);
}

/// Spectrum of the fluctuating-target power variable mu1 = x^H R0 x:
/// distinct weights e_k with multiplicities n_k + 1 summing to r.
struct EigGrouping {
  int r = 0;
  std::vector<double> values;         // e_k, descending
  std::vector<int> extra_multiplicity;  // n_k (multiplicity is n_k + 1)

  int groups() const { return static_cast<int>(values.size()); }
  double max_value() const { return values.empty() ? 0.0 : values.front(); }
};

/// Groups a_i = lambda_i u_i^H Rx u_i from the eigen-decomposition of R0,
/// merging values within tie_tol * max(a). When R0 and Rx commute these are
/// exactly the weights of the quadratic form x^H R0 x, x ~ CN(0, Rx)
/// (the eigenvalues of Rx^{1/2} R0 Rx^{1/2}); otherwise they agree in trace
/// but are a mild approximation of the exact weights.
inline EigGrouping eig_grouping(const cmat& R0, const cmat& Rx, double tie_tol = 1e-8) {
  Eigen::SelfAdjointEigenSolver<cmat> eig(R0);
  if (eig.info() != Eigen::Success)
    throw DegenerateSpectrum("eig_grouping: eigen-decomposition failed");
  const int r = static_cast<int>(R0.rows());
  std::vector<double> a(r);
  // SelfAdjointEigenSolver sorts ascending; the convention here is
  // lambda_1 >= ... >= lambda_r.
  for (int i = 0; i < r; ++i) {
    const int src = r - 1 - i;
    const cvec u = eig.eigenvectors().col(src);
    a[i] = eig.eigenvalues()(src) * u.dot(Rx * u).real();
    if (!(a[i] > 0.0))
      throw DegenerateSpectrum("eig_grouping: nonpositive quadratic-form weight");
  }
  std::sort(a.begin(), a.end(), std::greater<>());
  const double tol = tie_tol * a.front();
  EigGrouping g;
  g.r = r;
  for (double value : a) {
    if (!g.values.empty() && g.values.back() - value <= tol)
      ++g.extra_multiplicity.back();
    else {
      g.values.push_back(value);
      g.extra_multiplicity.push_back(0);
    }
  }
  return g;
}

namespace detail {

/// q-th derivative at e = e_k of
///   h(e) = [e^2 prod_{j != k} (n_j!)^{-1} (e - e_j)^{n_j+1}]^{-1},
/// via the logarithmic-derivative recursion h^{(n+1)} = sum C(n,j) h^{(j)} g^{(n-j)}
/// with g = h'/h. Exact (no numeric differencing).
inline std::vector<double> h_derivatives(const EigGrouping& g, int k, int max_order) {
  const double e = g.values[k];
  double h0 = 1.0 / (e * e);
  for (int j = 0; j < g.groups(); ++j) {
    if (j == k) continue;
    h0 *= std::exp(ln_gamma(g.extra_multiplicity[j] + 1.0)) *
          std::pow(e - g.values[j], -(g.extra_multiplicity[j] + 1.0));
  }
  // g^{(q)}(e) = (-1)^q q! [ -2 e^{-(q+1)} - sum_j (n_j+1)(e - e_j)^{-(q+1)} ]
  std::vector<double> log_deriv(max_order + 1);
  double factorial = 1.0;
  for (int q = 0; q <= max_order; ++q) {
    if (q > 0) factorial *= q;
    double acc = -2.0 * std::pow(e, -(q + 1.0));
    for (int j = 0; j < g.groups(); ++j) {
      if (j == k) continue;
      acc -= (g.extra_multiplicity[j] + 1.0) * std::pow(e - g.values[j], -(q + 1.0));
    }
    log_deriv[q] = (q % 2 == 0 ? 1.0 : -1.0) * factorial * acc;
  }
  std::vector<double> h(max_order + 1);
  h[0] = h0;
  for (int n = 0; n < max_order; ++n) {
    double acc = 0.0;
    for (int j = 0; j <= n; ++j) acc += binom(n, j) * h[j] * log_deriv[n - j];
    h[n + 1] = acc;
  }
  return h;
}

}  // namespace detail

/// Density of mu1 = x^H R0 x for x ~ CN(0, Rx): a mixture of exponentials
/// in the distinct-spectrum case, with polynomial corrections for repeated
/// weights.
inline double f_mu1_pdf(double mu1, const EigGrouping& g) {
  if (!(mu1 > 0.0)) throw std::domain_error("f_mu1_pdf: mu1 must be > 0");
  double norm = 1.0;
  for (int n : g.extra_multiplicity) norm *= std::exp(ln_gamma(n + 1.0));
  double total = 0.0;
  for (int k = 0; k < g.groups(); ++k) {
    const double e = g.values[k];
    const int nk = g.extra_multiplicity[k];
    const auto h = detail::h_derivatives(g, k, nk);
    double inner = 0.0;
    for (int i = 0; i <= nk; ++i) {
      for (int p = 0; p <= i; ++p) {
        const double coeff = binom(i, p) * h[nk - i] *
                             falling_factorial(g.r - p, i - p) *
                             std::pow(e, g.r - i - p);
        inner += binom(nk, i) * coeff * std::pow(mu1, p);
      }
    }
    total += std::exp(-mu1 / e) * inner;
  }
  return std::max(total / norm, 0.0);
}

struct PdFluctuatingResult {
  double pd;
  /// Exponential tail-mass bound beyond the mu1 truncation point.
  double tail_bound;
  bool truncation_warning;
};

/// Detection probability for a fluctuating target: nested quadrature of the
/// deterministic conditional against f_mu1 and f_rho.
inline PdFluctuatingResult pd_fluctuating_full(double lambda0, const EigGrouping& g,
                                               const TextureParams& texture,
                                               const DetectorDims& d,
                                               const QuadratureSpec& q,
                                               const LossFactorModel& m) {
  const double mu1_max = q.tail_factor * g.max_value();
  const QuadRule mu1_rule = q.mu1_rule(mu1_max);
  const QuadRule rho_rule = q.rho_rule();
  const double pd = std::clamp(rho_rule.integrate([&](double rho) {
    return f_rho_pdf(rho, m) * mu1_rule.integrate([&](double mu1) {
      return conditional_pd_deterministic(rho, lambda0, mu1, texture, d) *
             f_mu1_pdf(mu1, g);
    });
  }), 0.0, 1.0);
  // P(mu1 > mu1_max) <= sum of the r exponential tails at the largest scale.
  const double tail = g.r * std::exp(-mu1_max / g.max_value()) *
                      std::pow(mu1_max / g.max_value(), g.r - 1);
  return {pd, tail, tail > 1e-6};
}

inline double pd_fluctuating(double lambda0, const EigGrouping& g,
                             const TextureParams& texture, const DetectorDims& d,
                             const QuadratureSpec& q, const LossFactorModel& m) {
  return pd_fluctuating_full(lambda0, g, texture, d, q, m).pd;
}

}  // namespace ngamd
