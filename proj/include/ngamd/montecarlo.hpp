#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "ngamd/detectors.hpp"
#include "ngamd/scenario.hpp"
#include "ngamd/theory.hpp"

namespace ngamd {

struct InsufficientTrials : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ProbabilityEstimate {
  double p_hat;
  double ci_low;
  double ci_high;
};

/// Wilson 95% score interval for successes/trials.
inline ProbabilityEstimate wilson_interval(long successes, long trials) {
  const double z = 1.959963984540054;  // 97.5% normal quantile
  const double n = static_cast<double>(trials);
  const double p = successes / n;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / n;
  const double center = (p + z2 / (2.0 * n)) / denom;
  const double half = z / denom * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n));
  const double lo = successes == 0 ? 0.0 : std::max(center - half, 0.0);
  const double hi = successes == trials ? 1.0 : std::min(center + half, 1.0);
  return {p, lo, hi};
}

struct TrialPlan {
  Scenario scenario;
  DetectorId detector = DetectorId::NgAmd;
  Hypothesis hypothesis = Hypothesis::H0;
  long trials = 0;
  RngStream seed{0};
  double threshold = 0.0;
};

namespace detail {

constexpr long kChunkTrials = 8192;

/// Detector statistics over independent trials. Trials are partitioned
/// into fixed-size chunks, one RNG substream per chunk, so the result is
/// identical for any worker count.
inline std::vector<double> run_statistics(const Scenario& s, Hypothesis hyp,
                                          DetectorId det, long trials,
                                          const RngStream& seed,
                                          unsigned workers = 0) {
  s.validate();
  if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
  std::vector<double> stats(trials);
  const long chunks = (trials + kChunkTrials - 1) / kChunkTrials;
  std::atomic<long> next_chunk{0};
  auto worker = [&] {
    for (;;) {
      const long c = next_chunk.fetch_add(1);
      if (c >= chunks) return;
      RngStream rng = seed.substream(static_cast<std::uint64_t>(c));
      const long lo = c * kChunkTrials;
      const long hi = std::min(lo + kChunkTrials, trials);
      for (long t = lo; t < hi; ++t) {
        const Dataset data = generate_dataset(s, hyp, rng);
        const CovEstimate Rhat = nscm(data.secondary);
        stats[t] = detector_statistic(det, data.primary, s.A, Rhat, s.texture);
      }
    }
  };
  std::vector<std::thread> pool;
  for (unsigned w = 1; w < workers; ++w) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  return stats;
}

}  // namespace detail

/// Fraction of trials whose statistic exceeds the plan's threshold.
inline ProbabilityEstimate estimate_exceedance(const TrialPlan& plan,
                                               unsigned workers = 0) {
  const auto stats = detail::run_statistics(plan.scenario, plan.hypothesis,
                                            plan.detector, plan.trials, plan.seed,
                                            workers);
  const long hits = std::count_if(stats.begin(), stats.end(),
                                  [&](double s) { return s > plan.threshold; });
  return wilson_interval(hits, plan.trials);
}

/// Empirical (1 - pfa_target) quantile: the order statistic at index
/// ceil((1 - pfa_target) * n), 1-based.
inline double empirical_quantile_threshold(std::vector<double> stats, double pfa_target) {
  if (!(pfa_target > 0.0 && pfa_target < 1.0))
    throw std::domain_error("empirical_quantile_threshold: target must lie in (0,1)");
  if (stats.empty()) throw InsufficientTrials("empirical_quantile_threshold: no samples");
  std::sort(stats.begin(), stats.end());
  const long n = static_cast<long>(stats.size());
  const long index =
      static_cast<long>(std::ceil((1.0 - pfa_target) * static_cast<double>(n)));
  return stats[std::clamp(index - 1, 0l, n - 1)];
}

/// MC threshold for the requested false-alarm rate, from H0 statistics.
inline double calibrate_threshold(const Scenario& s, DetectorId det, long trials,
                                  double pfa_target, const RngStream& seed,
                                  unsigned workers = 0) {
  if (!(pfa_target > 0.0 && pfa_target < 1.0))
    throw std::domain_error("calibrate_threshold: pfa_target must lie in (0,1)");
  if (trials < static_cast<long>(std::ceil(100.0 / pfa_target)))
    throw InsufficientTrials("calibrate_threshold: need trials >= 100/pfa_target");
  return empirical_quantile_threshold(
      detail::run_statistics(s, Hypothesis::H0, det, trials, seed, workers), pfa_target);
}

enum class CurveSource { Theory, MonteCarlo };
enum class ThresholdMode { Analytic, MonteCarlo };

struct CurvePoint {
  double snr_db;
  double probability;
  double ci_low;
  double ci_high;
};

struct PerformanceCurve {
  std::vector<CurvePoint> points;
  CurveSource source = CurveSource::MonteCarlo;
  DetectorId detector = DetectorId::NgAmd;
  /// Echoed scenario parameters (alpha, beta, N, r, K, pfa target).
  double alpha = 0, beta = 0;
  int N = 0, r = 0, K = 0;
  double pfa_target = 0;
};

/// Experiment family: the scenario without its power scale, which each SNR
/// grid point fixes through solve_power_scale.
struct ScenarioTemplate {
  int N = 6;
  int r = 2;
  int K = 16;
  double one_lag = 0.9;
  TextureParams texture{2.0, 0.5};
  TargetModel target = DeterministicTarget{unit_target(2)};
  TextureSharing texture_sharing = TextureSharing::PerCellIid;
  std::optional<double> fixed_texture;

  cmat unscaled_cov() const { return build_toeplitz_cov(N, one_lag, 1.0); }

  Scenario at_power(double kappa0) const {
    Scenario s;
    s.N = N;
    s.r = r;
    s.K = K;
    s.A = build_steering_matrix(N, r);
    s.R = build_toeplitz_cov(N, one_lag, kappa0);
    s.texture = texture;
    s.target = target;
    s.texture_sharing = texture_sharing;
    s.fixed_texture = fixed_texture;
    return s;
  }

  Scenario at_snr(double snr_db) const {
    return at_power(solve_power_scale(unscaled_cov(), target, snr_db));
  }

  /// mu1 = x^H A^H R^{-1} A x with the true covariance (deterministic target).
  double mu1_at_snr(double snr_db) const {
    const Scenario s = at_snr(snr_db);
    const auto& x = std::get<DeterministicTarget>(target).x;
    const auto llt = cholesky(s.R, "mu1_at_snr");
    const cvec ax = s.A * x;
    return ax.dot(llt.solve(ax)).real();
  }

  /// Signal-subspace weight grouping for the fluctuating target at this SNR.
  EigGrouping grouping_at_snr(double snr_db, double tie_tol = 1e-8) const {
    const Scenario s = at_snr(snr_db);
    const auto llt = cholesky(s.R, "grouping_at_snr");
    const cmat R0 = s.A.adjoint() * llt.solve(s.A);
    return eig_grouping(R0, std::get<FluctuatingTarget>(target).Rx, tie_tol);
  }
};

struct SweepOptions {
  double pfa_target = 1e-2;
  long trials_per_point = 10000;
  long calibration_trials = 200000;
  ThresholdMode threshold_mode = ThresholdMode::Analytic;
  unsigned workers = 0;
};

/// Empirical P_D across an SNR grid. Analytic mode uses the closed-form
/// threshold (nG-AMD only); Monte Carlo mode calibrates the threshold on
/// H0 data at each grid point's power scale, on a substream disjoint from
/// the evaluation trials.
inline PerformanceCurve sweep_snr(const ScenarioTemplate& tmpl, DetectorId det,
                                  const std::vector<double>& snr_grid,
                                  const RngStream& seed, const SweepOptions& opt) {
  PerformanceCurve curve;
  curve.source = CurveSource::MonteCarlo;
  curve.detector = det;
  curve.alpha = tmpl.texture.alpha;
  curve.beta = tmpl.texture.beta;
  curve.N = tmpl.N;
  curve.r = tmpl.r;
  curve.K = tmpl.K;
  curve.pfa_target = opt.pfa_target;

  double analytic_threshold = 0.0;
  if (opt.threshold_mode == ThresholdMode::Analytic) {
    if (det != DetectorId::NgAmd)
      throw std::domain_error("sweep_snr: analytic thresholds exist only for nG-AMD");
    const DetectorDims dims(tmpl.N, tmpl.r, tmpl.K);
    analytic_threshold =
        invert_threshold(opt.pfa_target, dims, QuadratureSpec{}, LossFactorModel(dims));
  }

  for (std::size_t i = 0; i < snr_grid.size(); ++i) {
    const Scenario s = tmpl.at_snr(snr_grid[i]);
    double threshold = analytic_threshold;
    if (opt.threshold_mode == ThresholdMode::MonteCarlo) {
      threshold = calibrate_threshold(s, det, opt.calibration_trials, opt.pfa_target,
                                      seed.substream(1000 + 2 * i), opt.workers);
    }
    TrialPlan plan{s, det, Hypothesis::H1, opt.trials_per_point,
                   seed.substream(1001 + 2 * i), threshold};
    const auto est = estimate_exceedance(plan, opt.workers);
    curve.points.push_back({snr_grid[i], est.p_hat, est.ci_low, est.ci_high});
  }
  return curve;
}

struct CfarCell {
  DetectorId detector;
  double alpha, beta;
  double power_scale;
  double threshold;
  ProbabilityEstimate pfa;
};

/// Empirical P_FA at fixed thresholds across texture parameters and power
/// scalings. nG-AMD and 1S-GLRT use the fixed analytic nG-AMD threshold
/// family; the ASD rows (thresholds MC-calibrated once at power 1) are the
/// scale-invariance control.
inline std::vector<CfarCell> cfar_study(const ScenarioTemplate& tmpl,
                                        const std::vector<TextureParams>& texture_grid,
                                        const std::vector<double>& power_grid,
                                        double pfa_target, long trials,
                                        const RngStream& seed, unsigned workers = 0) {
  const DetectorDims dims(tmpl.N, tmpl.r, tmpl.K);
  const double lambda0 =
      invert_threshold(pfa_target, dims, QuadratureSpec{}, LossFactorModel(dims));
  std::vector<CfarCell> table;
  std::uint64_t stream = 0;
  for (const auto& texture : texture_grid) {
    ScenarioTemplate t = tmpl;
    t.texture = texture;
    // ASD control threshold, calibrated once per texture at unit power.
    const double asd_threshold =
        calibrate_threshold(t.at_power(1.0), DetectorId::Asd,
                            std::max(trials / 5, static_cast<long>(100.0 / pfa_target)),
                            pfa_target, seed.substream(900000 + stream), workers);
    for (double power : power_grid) {
      const Scenario s = t.at_power(power);
      for (DetectorId det : {DetectorId::NgAmd, DetectorId::Asd}) {
        const double threshold = det == DetectorId::Asd ? asd_threshold : lambda0;
        TrialPlan plan{s, det, Hypothesis::H0, trials, seed.substream(++stream),
                       threshold};
        table.push_back({det, texture.alpha, texture.beta, power, threshold,
                         estimate_exceedance(plan, workers)});
      }
    }
  }
  return table;
}

}  // namespace ngamd
