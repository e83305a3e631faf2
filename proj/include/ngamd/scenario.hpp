#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <variant>
#include <vector>

#include "ngamd/specfun.hpp"

namespace ngamd {

/// Fixed target echo x, or Swerling-style fluctuation x ~ CN(0, Rx).
struct DeterministicTarget {
  cvec x;
};
struct FluctuatingTarget {
  cmat Rx;  // Hermitian PSD r x r
};
using TargetModel = std::variant<DeterministicTarget, FluctuatingTarget>;

enum class TextureSharing { PerCellIid, CommonAcrossCells };

enum class Hypothesis { H0, H1 };

/// Signal/noise model: y = A x + sqrt(kappa) g, with K signal-free
/// secondary cells sharing the speckle covariance R.
struct Scenario {
  int N = 0;
  int r = 0;
  int K = 0;
  cmat A;  // N x r, full column rank
  cmat R;  // Hermitian PD N x N, includes the power scale kappa0
  TextureParams texture{1.0, 1.0};
  TargetModel target;
  TextureSharing texture_sharing = TextureSharing::PerCellIid;
  /// Test hook: when set, every texture draw is replaced by this constant
  /// (degenerate-texture limit, pure Gaussian noise).
  std::optional<double> fixed_texture;

  void validate() const {
    if (!(r >= 1 && r < N && N <= K))
      throw std::domain_error("Scenario: need 1 <= r < N <= K");
    if (A.rows() != N || A.cols() != r) throw std::domain_error("Scenario: A is not N x r");
    if (R.rows() != N || R.cols() != N) throw std::domain_error("Scenario: R is not N x N");
  }
};

struct Dataset {
  cvec primary;
  std::vector<cvec> secondary;
  Hypothesis truth = Hypothesis::H0;
};

/// Default deterministic echo direction: ones / sqrt(r), unit energy.
inline cvec unit_target(int r) {
  return cvec::Constant(r, std::complex<double>(1.0 / std::sqrt(double(r)), 0.0));
}

/// Steering matrix with A(n, l) = exp(-2j pi * l * 1.8 * n / N) for
/// n = 0..N-1 and column index l = 1..r.
inline cmat build_steering_matrix(int N, int r) {
  if (!(r >= 1 && r < N)) throw std::domain_error("build_steering_matrix: need 1 <= r < N");
  cmat A(N, r);
  for (int l = 1; l <= r; ++l)
    for (int n = 0; n < N; ++n) {
      const double phase = -2.0 * std::numbers::pi * l * 1.8 * n / N;
      A(n, l - 1) = std::polar(1.0, phase);
    }
  return A;
}

/// Exponentially-correlated Toeplitz covariance R[i][j] = kappa0 * rho^|i-j|.
inline cmat build_toeplitz_cov(int N, double one_lag, double kappa0) {
  if (!(std::abs(one_lag) < 1.0))
    throw std::domain_error("build_toeplitz_cov: need |one_lag| < 1");
  if (!(kappa0 > 0.0)) throw std::domain_error("build_toeplitz_cov: need kappa0 > 0");
  cmat R(N, N);
  for (int i = 0; i < N; ++i)
    for (int j = 0; j < N; ++j) R(i, j) = kappa0 * std::pow(one_lag, std::abs(i - j));
  return R;
}

/// Noise power scale kappa0 meeting the target SNR with the signal held
/// fixed. Deterministic targets use 10 log10(|x|^2 / tr(R)); fluctuating
/// use 10 log10(tr(Rx) / tr(R)). R is given unscaled (kappa0 = 1).
inline double solve_power_scale(const cmat& unscaled_R, const TargetModel& target,
                                double target_snr_db) {
  const double trace_unit = unscaled_R.trace().real();
  double signal_energy = 0.0;
  if (const auto* det = std::get_if<DeterministicTarget>(&target))
    signal_energy = det->x.squaredNorm();
  else
    signal_energy = std::get<FluctuatingTarget>(target).Rx.trace().real();
  if (!(signal_energy > 0.0))
    throw std::domain_error("solve_power_scale: signal energy is zero");
  return signal_energy / (trace_unit * std::pow(10.0, target_snr_db / 10.0));
}

/// One primary plus K secondary snapshots under the given hypothesis.
inline Dataset generate_dataset(const Scenario& s, Hypothesis hyp, RngStream& rng) {
  s.validate();
  const bool common = s.texture_sharing == TextureSharing::CommonAcrossCells;
  const double shared =
      (common && !s.fixed_texture) ? sample_inverse_gamma(s.texture, rng) : 0.0;
  const auto draw_texture = [&]() {
    if (s.fixed_texture) return *s.fixed_texture;
    if (common) return shared;
    return sample_inverse_gamma(s.texture, rng);
  };

  Dataset data;
  data.truth = hyp;
  const cvec zero_mean = cvec::Zero(s.N);

  cvec signal = cvec::Zero(s.N);
  if (hyp == Hypothesis::H1) {
    if (const auto* det = std::get_if<DeterministicTarget>(&s.target)) {
      signal = s.A * det->x;
    } else {
      const auto& fluct = std::get<FluctuatingTarget>(s.target);
      // Fresh echo per dataset; PSD Rx handled through a self-adjoint
      // square root rather than Cholesky.
      Eigen::SelfAdjointEigenSolver<cmat> eig(fluct.Rx);
      cvec white(s.r);
      for (int i = 0; i < s.r; ++i) white(i) = rng.complex_normal();
      const cvec x = eig.eigenvectors() *
                     (eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal() * white);
      signal = s.A * x;
    }
  }

  const double kappa = draw_texture();
  data.primary = signal + std::sqrt(kappa) * sample_complex_mvn(zero_mean, s.R, rng);

  data.secondary.reserve(s.K);
  for (int k = 0; k < s.K; ++k) {
    const double kappa_k = draw_texture();
    data.secondary.push_back(std::sqrt(kappa_k) *
                             sample_complex_mvn(zero_mean, s.R, rng));
  }
  return data;
}

}  // namespace ngamd
