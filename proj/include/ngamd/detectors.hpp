#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <stdexcept>
#include <vector>

#include "ngamd/specfun.hpp"

namespace ngamd {

struct DegenerateSecondary : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct SingularGram : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ZeroSnapshot : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class CovSource { Nscm, TrueR, External };

/// Hermitian PD covariance estimate, held with its Cholesky factor so the
/// quadratic forms downstream never invert explicitly.
class CovEstimate {
 public:
  CovEstimate(cmat matrix, CovSource source)
      : matrix_(std::move(matrix)), source_(source), llt_(matrix_) {
    if (llt_.info() != Eigen::Success)
      throw DegenerateSecondary("CovEstimate: matrix is not positive definite");
  }

  const cmat& matrix() const { return matrix_; }
  CovSource source() const { return source_; }

  /// Solves R z = b for a vector or matrix right-hand side.
  template <typename Rhs>
  auto solve(const Eigen::MatrixBase<Rhs>& b) const {
    return llt_.solve(b).eval();
  }

 private:
  cmat matrix_;
  CovSource source_;
  Eigen::LLT<cmat> llt_;
};

/// Normalized sample covariance (N/K) sum y_k y_k^H / (y_k^H y_k).
/// Texture cancels snapshot-by-snapshot, so trace(Rhat) = N.
inline CovEstimate nscm(const std::vector<cvec>& secondary) {
  if (secondary.empty()) throw DegenerateSecondary("nscm: no secondary data");
  const Eigen::Index N = secondary.front().size();
  if (static_cast<Eigen::Index>(secondary.size()) < N)
    throw DegenerateSecondary("nscm: need K >= N secondary snapshots");
  cmat acc = cmat::Zero(N, N);
  for (const cvec& y : secondary) {
    const double power = y.squaredNorm();
    if (!(power > 0.0)) throw DegenerateSecondary("nscm: zero secondary snapshot");
    acc.noalias() += (y * y.adjoint()) / power;
  }
  acc *= static_cast<double>(N) / static_cast<double>(secondary.size());
  return CovEstimate(std::move(acc), CovSource::Nscm);
}

namespace detail {

/// Gram matrix A^H Rhat^{-1} A with a condition guard.
inline Eigen::LDLT<cmat> gram_factor(const cmat& A, const CovEstimate& Rhat) {
  const cmat gram = A.adjoint() * Rhat.solve(A);
  Eigen::SelfAdjointEigenSolver<cmat> eig(gram, Eigen::EigenvaluesOnly);
  const auto& ev = eig.eigenvalues();
  if (!(ev.minCoeff() > 0.0) || ev.maxCoeff() / ev.minCoeff() > 1e12)
    throw SingularGram("gram matrix is numerically singular");
  return Eigen::LDLT<cmat>(gram);
}

}  // namespace detail

/// Weighted least-squares echo estimate (A^H Rhat^{-1} A)^{-1} A^H Rhat^{-1} y.
inline cvec mle_x(const cvec& y, const cmat& A, const CovEstimate& Rhat) {
  return detail::gram_factor(A, Rhat).solve(A.adjoint() * Rhat.solve(y));
}

/// nG-AMD statistic y^H Rhat^{-1} A (A^H Rhat^{-1} A)^{-1} A^H Rhat^{-1} y.
inline double ngamd_statistic(const cvec& y, const cmat& A, const CovEstimate& Rhat) {
  const cvec whitened_match = A.adjoint() * Rhat.solve(y);
  const double value =
      whitened_match.dot(detail::gram_factor(A, Rhat).solve(whitened_match)).real();
  return std::max(value, 0.0);
}

/// Subspace-energy fraction: ngamd / (y^H Rhat^{-1} y). Scale-invariant in y.
inline double asd_statistic(const cvec& y, const cmat& A, const CovEstimate& Rhat) {
  const double total = y.dot(Rhat.solve(y)).real();
  if (!(total > 0.0)) throw ZeroSnapshot("asd_statistic: zero snapshot");
  return std::clamp(ngamd_statistic(y, A, Rhat) / total, 0.0, 1.0);
}

/// One-step GLRT with the inverse-gamma texture marginalized out:
/// (1/beta + q0) / (1/beta + q1), q0 = y^H Rhat^{-1} y, q1 = q0 - ngamd.
inline double glrt1s_statistic(const cvec& y, const cmat& A, const CovEstimate& Rhat,
                               const TextureParams& texture) {
  const double q0 = y.dot(Rhat.solve(y)).real();
  const double q1 = std::max(q0 - ngamd_statistic(y, A, Rhat), 0.0);
  return (1.0 / texture.beta + q0) / (1.0 / texture.beta + q1);
}

enum class DetectorId { NgAmd, Asd, Glrt1s };

inline double detector_statistic(DetectorId id, const cvec& y, const cmat& A,
                                 const CovEstimate& Rhat, const TextureParams& texture) {
  switch (id) {
    case DetectorId::NgAmd:
      return ngamd_statistic(y, A, Rhat);
    case DetectorId::Asd:
      return asd_statistic(y, A, Rhat);
    case DetectorId::Glrt1s:
      return glrt1s_statistic(y, A, Rhat, texture);
  }
  throw std::logic_error("detector_statistic: unknown detector");
}

}  // namespace ngamd
