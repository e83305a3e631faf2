#include <catch2/catch_amalgamated.hpp>

#include "ngamd/quadrature.hpp"
#include "ngamd/scenario.hpp"
#include "ngamd/theory.hpp"
#include "oracles.hpp"

using namespace ngamd;

namespace {
const DetectorDims kDims(6, 2, 16);
const LossFactorModel kLoss(kDims);
const QuadratureSpec kQuad;
}  // namespace

TEST_CASE("gauss-legendre rule integrates polynomials exactly") {
  const QuadRule rule = gauss_legendre(8, 0.0, 1.0);
  double w = 0.0;
  for (double wi : rule.weights) {
    CHECK(wi > 0.0);
    w += wi;
  }
  CHECK(w == Catch::Approx(1.0).epsilon(1e-13));
  // degree-15 monomial is exact for an 8-node rule
  CHECK(rule.integrate([](double x) { return std::pow(x, 15); }) ==
        Catch::Approx(1.0 / 16.0).epsilon(1e-12));
}

TEST_CASE("loss factor density: normalization, mode, degenerate uniform") {
  const QuadRule rule = kQuad.rho_rule();
  CHECK(rule.integrate([&](double r) { return f_rho_pdf(r, kLoss); }) ==
        Catch::Approx(1.0).epsilon(1e-10));

  // Beta(12, 4) mode = 11/14
  const double mode = 11.0 / 14.0;
  CHECK(f_rho_pdf(mode, kLoss) > f_rho_pdf(mode - 1e-3, kLoss));
  CHECK(f_rho_pdf(mode, kLoss) > f_rho_pdf(mode + 1e-3, kLoss));

  const LossFactorModel uniform(kDims, 1.0, 1.0);
  CHECK(f_rho_pdf(0.3, uniform) == Catch::Approx(1.0).epsilon(1e-12));
  CHECK_THROWS_AS(f_rho_pdf(0.0, kLoss), std::domain_error);
  CHECK_THROWS_AS(f_rho_pdf(1.5, kLoss), std::domain_error);
}

TEST_CASE("conditional pfa endpoints") {
  CHECK(conditional_pfa(0.7, 0.0, kDims) == 1.0);
  CHECK(conditional_pfa(0.7, 1e9, kDims) < 1e-12);
}

TEST_CASE("conditional pfa equals the gamma-quotient integral") {
  // t ~ Gamma(r,1), tau ~ Gamma(K-N+1,1): P(t > rho lambda0 tau)
  for (double lambda0 : {0.3, 1.0, 4.0}) {
    for (double rho : {0.2, 0.7, 0.95}) {
      const double closed = conditional_pfa(rho, lambda0, kDims);
      const double numeric =
          oracle::gamma_ratio_exceedance(kDims.r, kDims.K - kDims.N + 1, rho * lambda0);
      CHECK(closed == Catch::Approx(numeric).margin(1e-8));
    }
  }
}

TEST_CASE("pfa monotone decreasing in the threshold") {
  double prev = pfa(1e-3, kDims, kQuad, kLoss);
  CHECK(pfa(0.0, kDims, kQuad, kLoss) == 1.0);
  for (int i = 1; i <= 20; ++i) {
    const double lambda0 = 1e-3 * std::pow(10.0, 6.0 * i / 20.0);
    const double p = pfa(lambda0, kDims, kQuad, kLoss);
    CHECK(p < prev);
    prev = p;
  }
}

TEST_CASE("pfa matches distribution-level simulation of the F representation") {
  const double lambda0 = invert_threshold(1e-2, kDims, kQuad, kLoss);
  const long trials = 1000000;
  oracle::XorShift rng(771);
  long hits = 0;
  for (long i = 0; i < trials; ++i) {
    const double rho = rng.beta(kLoss.a, kLoss.b);
    const double t = rng.gamma(double(kDims.r));
    const double tau = rng.gamma(double(kDims.K - kDims.N + 1));
    if (t > tau * rho * lambda0) ++hits;
  }
  const double p_hat = double(hits) / trials;
  const double sigma = std::sqrt(1e-2 * (1 - 1e-2) / trials);
  CHECK(std::abs(p_hat - 1e-2) < 4.0 * sigma);
}

TEST_CASE("invert_threshold round trip and extremes") {
  for (double target : {1e-1, 1e-2, 1e-3}) {
    const double lambda0 = invert_threshold(target, kDims, kQuad, kLoss);
    CHECK(pfa(lambda0, kDims, kQuad, kLoss) == Catch::Approx(target).epsilon(1e-10));
  }
  // near-unity targets land at tiny thresholds
  CHECK(invert_threshold(0.999999, kDims, kQuad, kLoss) < 1e-3);
  CHECK_THROWS_AS(invert_threshold(0.0, kDims, kQuad, kLoss), std::domain_error);
}

TEST_CASE("conditional pd: zero-signal and saturation limits") {
  const TextureParams texture(2.0, 0.5);
  const double rho = 0.7, lambda0 = 1.0;
  CHECK(conditional_pd_deterministic(rho, lambda0, 1e-10, texture, kDims) ==
        Catch::Approx(conditional_pfa(rho, lambda0, kDims)).margin(1e-6));
  CHECK(conditional_pd_deterministic(rho, lambda0, 1e12, texture, kDims) ==
        Catch::Approx(1.0).margin(1e-6));
  CHECK(conditional_pd_deterministic(rho, lambda0, 0.0, texture, kDims) ==
        conditional_pfa(rho, lambda0, kDims));
}

TEST_CASE("conditional pd equals the texture-marginalization integral") {
  const TextureParams texture(2.0, 0.5);
  const double rho = 0.7, lambda0 = 1.0, mu1 = 5.0;
  const double closed = conditional_pd_deterministic(rho, lambda0, mu1, texture, kDims);
  // integrate the printed pre-texture sum against the Gamma(alpha, beta mu1)
  // density of mu
  const double numeric = oracle::simpson(
      [&](double mu) {
        if (mu <= 0.0) return 0.0;
        const double f_mu = std::exp(-texture.alpha * std::log(texture.beta * mu1) -
                                     std::lgamma(texture.alpha) +
                                     (texture.alpha - 1.0) * std::log(mu) -
                                     mu / (texture.beta * mu1));
        return f_mu * oracle::pd_given_mu_rho(mu, rho, lambda0, kDims.N, kDims.r, kDims.K);
      },
      0.0, 400.0, 40000);
  CHECK(closed == Catch::Approx(numeric).margin(1e-7));
}

TEST_CASE("pd_deterministic limits and monotonicity in mu1") {
  const TextureParams texture(2.0, 0.5);
  const double lambda0 = invert_threshold(1e-2, kDims, kQuad, kLoss);
  CHECK(pd_deterministic(lambda0, 1e-10, texture, kDims, kQuad, kLoss) ==
        Catch::Approx(1e-2).margin(1e-6));
  double prev = 0.0;
  for (int i = 1; i <= 20; ++i) {
    const double mu1 = 0.05 * std::pow(10.0, 5.0 * i / 20.0);
    const double pd = pd_deterministic(lambda0, mu1, texture, kDims, kQuad, kLoss);
    CHECK(pd > prev);
    prev = pd;
  }
  // saturation is slow: the inverse-gamma texture keeps a polynomial miss
  // tail in mu1, so ask for 0.999 only at mu1 = 5000
  CHECK(prev > 0.999);
}

TEST_CASE("pd_deterministic matches distribution-level simulation") {
  const TextureParams texture(5.0, 2.0);
  const double lambda0 = invert_threshold(1e-2, kDims, kQuad, kLoss);
  const double mu1 = 8.0;
  const double theory = pd_deterministic(lambda0, mu1, texture, kDims, kQuad, kLoss);

  // rho ~ Beta(a,b); kappa ~ IG(alpha,beta); mu = mu1/kappa;
  // numerator chi^2_{2r}(2 rho mu)/2 via shifted normals.
  const long trials = 1000000;
  oracle::XorShift rng(772);
  long hits = 0;
  for (long i = 0; i < trials; ++i) {
    const double rho = rng.beta(kLoss.a, kLoss.b);
    const double kappa = 1.0 / (texture.beta * rng.gamma(texture.alpha));
    const double mu = mu1 / kappa;
    const double shift = std::sqrt(2.0 * rho * mu);
    double t = 0.0;
    {
      const double z0 = rng.normal() + shift;
      t += z0 * z0;
      for (int j = 1; j < 2 * kDims.r; ++j) {
        const double z = rng.normal();
        t += z * z;
      }
      t *= 0.5;
    }
    const double tau = rng.gamma(double(kDims.K - kDims.N + 1));
    if (t > tau * rho * lambda0) ++hits;
  }
  const double p_hat = double(hits) / trials;
  const double sigma = std::sqrt(theory * (1 - theory) / trials);
  CHECK(std::abs(p_hat - theory) < 4.0 * sigma);
}

TEST_CASE("eig grouping: distinct, tied, and paper setup") {
  cmat R0 = cmat::Zero(2, 2);
  R0(0, 0) = 2.0;
  R0(1, 1) = 1.0;
  const cmat I2 = cmat::Identity(2, 2);

  const EigGrouping distinct = eig_grouping(R0, I2);
  REQUIRE(distinct.groups() == 2);
  CHECK(distinct.values[0] == Catch::Approx(2.0));
  CHECK(distinct.values[1] == Catch::Approx(1.0));
  CHECK(distinct.extra_multiplicity == std::vector<int>{0, 0});

  const EigGrouping tied = eig_grouping(I2, I2);
  REQUIRE(tied.groups() == 1);
  CHECK(tied.values[0] == Catch::Approx(1.0));
  CHECK(tied.extra_multiplicity == std::vector<int>{1});

  // paper experiment: R0 = A^H R^{-1} A at 0 dB, Rx = [[1,.5j],[-.5j,1]]
  const cmat A = build_steering_matrix(6, 2);
  const cmat R = build_toeplitz_cov(6, 0.9, 1.0 / 3.0);
  const auto llt = cholesky(R, "test");
  const cmat R0p = A.adjoint() * llt.solve(A);
  cmat Rx(2, 2);
  Rx << std::complex<double>(1, 0), std::complex<double>(0, 0.5),
      std::complex<double>(0, -0.5), std::complex<double>(1, 0);
  const EigGrouping paper = eig_grouping(R0p, Rx);
  CHECK(paper.groups() == 2);
  CHECK(paper.values[0] > paper.values[1]);
  CHECK(paper.values[1] > 0.0);
  // E[x^H R0 x] = tr(R0 Rx), so the weights must sum to it
  double weight_sum = 0.0;
  for (int k = 0; k < paper.groups(); ++k)
    weight_sum += paper.values[k] * (paper.extra_multiplicity[k] + 1);
  CHECK(weight_sum == Catch::Approx((R0p * Rx).trace().real()).epsilon(1e-10));
}

TEST_CASE("f_mu1: single weight is an exponential density") {
  EigGrouping g;
  g.r = 1;
  g.values = {3.0};
  g.extra_multiplicity = {0};
  for (double t : {0.1, 1.0, 5.0})
    CHECK(f_mu1_pdf(t, g) == Catch::Approx(std::exp(-t / 3.0) / 3.0).epsilon(1e-12));
}

TEST_CASE("f_mu1: fully repeated weight is a gamma density") {
  EigGrouping g;
  g.r = 3;
  g.values = {2.0};
  g.extra_multiplicity = {2};
  for (double t : {0.5, 2.0, 7.0}) {
    const double expected = t * t * std::exp(-t / 2.0) / (2.0 * 8.0);
    CHECK(f_mu1_pdf(t, g) == Catch::Approx(expected).epsilon(1e-10));
  }
}

TEST_CASE("f_mu1: mixed multiplicities match the convolution closed form") {
  // weights (a, a, b): Gamma(2, a) convolved with Exp(b)
  const double a = 1.5, b = 0.4;
  EigGrouping g;
  g.r = 3;
  g.values = {a, b};
  g.extra_multiplicity = {1, 0};
  const double delta = 1.0 / a - 1.0 / b;
  for (double t : {0.2, 1.0, 4.0, 9.0}) {
    const double expected = std::exp(-t / b) *
                            (1.0 - std::exp(-delta * t) * (1.0 + delta * t)) /
                            (a * a * b * delta * delta);
    CHECK(f_mu1_pdf(t, g) == Catch::Approx(expected).epsilon(1e-9));
  }
}

TEST_CASE("f_mu1 normalizes over the truncated support") {
  EigGrouping g;
  g.r = 2;
  g.values = {2.0, 1.0};
  g.extra_multiplicity = {0, 0};
  const double mu1_max = kQuad.tail_factor * g.max_value();
  const QuadRule rule = kQuad.mu1_rule(mu1_max);
  CHECK(rule.integrate([&](double t) { return f_mu1_pdf(t, g); }) ==
        Catch::Approx(1.0).margin(1e-6));
}

TEST_CASE("f_mu1 matches a brute-force quadratic form histogram") {
  // mu1 = 2|x1|^2 + |x2|^2 for x ~ CN(0, I)
  EigGrouping g;
  g.r = 2;
  g.values = {2.0, 1.0};
  g.extra_multiplicity = {0, 0};

  const long n = 1000000;
  oracle::XorShift rng(773);
  const int bins = 50;
  const double hi = 25.0;
  std::vector<long> counts(bins, 0);
  long inside = 0;
  for (long i = 0; i < n; ++i) {
    const double e1 = -std::log(rng.uniform());  // |CN(0,1)|^2 ~ Exp(1)
    const double e2 = -std::log(rng.uniform());
    const double mu1 = 2.0 * e1 + e2;
    if (mu1 < hi) {
      ++counts[int(mu1 / hi * bins)];
      ++inside;
    }
  }
  // expected bin masses by fine Simpson integration of the density under test
  double chi2 = 0.0;
  double total_mass = 0.0;
  std::vector<double> masses(bins);
  for (int b = 0; b < bins; ++b) {
    masses[b] = oracle::simpson([&](double t) { return t <= 0 ? 0.0 : f_mu1_pdf(t, g); },
                                b * hi / bins, (b + 1) * hi / bins, 200);
    total_mass += masses[b];
  }
  for (int b = 0; b < bins; ++b) {
    const double expected = n * masses[b];
    chi2 += (counts[b] - expected) * (counts[b] - expected) / expected;
  }
  (void)inside;
  // dof = bins - 1 (total count is free: tail bin mass is tiny)
  CHECK(oracle::chi2_sf(chi2, bins - 1) > 0.01);
}

TEST_CASE("pd_fluctuating: zero-signal collapse and monotone scaling") {
  const TextureParams texture(2.0, 0.5);
  const double lambda0 = invert_threshold(1e-2, kDims, kQuad, kLoss);
  EigGrouping g;
  g.r = 2;
  g.extra_multiplicity = {0, 0};

  g.values = {2e-7, 1e-7};
  CHECK(pd_fluctuating(lambda0, g, texture, kDims, kQuad, kLoss) ==
        Catch::Approx(1e-2).margin(1e-4));

  double prev = 0.0;
  for (double scale : {1.0, 2.0, 4.0, 8.0}) {
    g.values = {2.0 * scale, 1.0 * scale};
    const double pd = pd_fluctuating(lambda0, g, texture, kDims, kQuad, kLoss);
    CHECK(pd > prev);
    prev = pd;
  }
}

TEST_CASE("pd_fluctuating reports its truncation tail bound") {
  const TextureParams texture(2.0, 0.5);
  EigGrouping g;
  g.r = 2;
  g.values = {2.0, 1.0};
  g.extra_multiplicity = {0, 0};
  const auto full = pd_fluctuating_full(1.0, g, texture, kDims, kQuad, kLoss);
  CHECK(full.tail_bound < 1e-6);
  CHECK_FALSE(full.truncation_warning);

  QuadratureSpec tight = kQuad;
  tight.tail_factor = 3.0;  // deliberately too short
  const auto short_rule = pd_fluctuating_full(1.0, g, texture, kDims, tight, kLoss);
  CHECK(short_rule.truncation_warning);
}

TEST_CASE("f_mu density: normalization, value, and sampled mean") {
  const TextureParams texture(2.0, 0.5);
  const double mu1 = 1.0;
  CHECK(f_mu_pdf(1.0, mu1, texture) == Catch::Approx(4.0 * std::exp(-2.0)).epsilon(1e-12));
  const double mass = oracle::simpson(
      [&](double mu) { return mu <= 0 ? 0.0 : f_mu_pdf(mu, mu1, texture); }, 0.0, 60.0,
      20000);
  CHECK(mass == Catch::Approx(1.0).epsilon(1e-10));

  oracle::XorShift rng(774);
  const long n = 100000;
  double acc = 0.0;
  for (long i = 0; i < n; ++i) acc += texture.beta * mu1 * rng.gamma(texture.alpha);
  // mean alpha beta mu1 = 1; sd of the mean = sqrt(alpha) beta mu1 / sqrt(n)
  CHECK(std::abs(acc / n - 1.0) < 3.0 * std::sqrt(2.0) * 0.5 / std::sqrt(double(n)));
}
