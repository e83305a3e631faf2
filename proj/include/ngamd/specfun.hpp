#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <stdexcept>
#include <vector>

#include "ngamd/rng.hpp"

namespace ngamd {

/// Inverse-gamma texture parameters (shape alpha, scale beta).
struct TextureParams {
  double alpha;
  double beta;

  TextureParams(double a, double b) : alpha(a), beta(b) {
    if (!(a > 0.0) || !(b > 0.0))
      throw std::domain_error("TextureParams: alpha, beta must be > 0");
  }
};

inline double ln_gamma(double x) {
  if (!(x > 0.0)) throw std::domain_error("ln_gamma: x must be > 0");
  return std::lgamma(x);
}

/// Binomial coefficient; exact in double up to n = 60, log-space above.
inline double binom(long n, long m) {
  if (n < 0 || m < 0 || m > n) throw std::domain_error("binom: need 0 <= m <= n");
  m = std::min(m, n - m);
  if (n <= 60) {
    double result = 1.0;
    for (long i = 1; i <= m; ++i)
      result = result * static_cast<double>(n - m + i) / static_cast<double>(i);
    return std::round(result);
  }
  return std::exp(ln_gamma(n + 1.0) - ln_gamma(m + 1.0) - ln_gamma(n - m + 1.0));
}

/// Falling factorial n(n-1)...(n-m+1); 1 for m = 0.
inline double falling_factorial(double n, long m) {
  if (m < 0) throw std::domain_error("falling_factorial: m must be >= 0");
  double result = 1.0;
  for (long i = 0; i < m; ++i) result *= n - static_cast<double>(i);
  return result;
}

/// Texture draw with density ~ kappa^{-(alpha+1)} exp(-1/(beta kappa)),
/// realized as 1 / (beta * Gamma(alpha, 1)).
inline double sample_inverse_gamma(const TextureParams& p, RngStream& rng) {
  return 1.0 / (p.beta * rng.gamma(p.alpha));
}

struct FactorizationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

using cvec = Eigen::VectorXcd;
using cmat = Eigen::MatrixXcd;

/// Cholesky factor of a Hermitian PD matrix; throws FactorizationError when
/// the matrix is not numerically PD (pivot <= 1e-13 x max diagonal).
inline Eigen::LLT<cmat> cholesky(const cmat& m, const char* context) {
  Eigen::LLT<cmat> llt(m);
  if (llt.info() != Eigen::Success)
    throw FactorizationError(std::string(context) + ": matrix is not positive definite");
  const Eigen::VectorXd pivots =
      llt.matrixL().toDenseMatrix().diagonal().real().array().square();
  if (pivots.minCoeff() <= 1e-13 * m.diagonal().real().maxCoeff())
    throw FactorizationError(std::string(context) + ": matrix is numerically singular");
  return llt;
}

/// Draw from CN(mean, R). R must be Hermitian positive definite.
inline cvec sample_complex_mvn(const cvec& mean, const cmat& R, RngStream& rng) {
  const auto llt = cholesky(R, "sample_complex_mvn");
  cvec white(mean.size());
  for (Eigen::Index i = 0; i < white.size(); ++i) white(i) = rng.complex_normal();
  return mean + llt.matrixL() * white;
}

/// log(sum exp(log_terms)) with max-shift; empty input -> -inf.
inline double log_sum_exp(const std::vector<double>& log_terms) {
  if (log_terms.empty()) return -std::numeric_limits<double>::infinity();
  double peak = *std::max_element(log_terms.begin(), log_terms.end());
  if (!std::isfinite(peak)) return peak;
  double acc = 0.0;
  for (double t : log_terms) acc += std::exp(t - peak);
  return peak + std::log(acc);
}

}  // namespace ngamd
