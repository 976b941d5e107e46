#include "covshrink/metrics.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <complex>

#include "covshrink/rng.hpp"

namespace covshrink {
namespace {

Matrix random_psd(Index n, std::uint64_t seed) {
  Rng rng(seed);
  Matrix y(n, 2 * n);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < 2 * n; ++j) {
      y(i, j) = rng.gaussian();
    }
  }
  return (y * y.transpose()) / double(2 * n);
}

TEST(FrobeniusRatio, PerfectEstimatorScoresZero) {
  const Matrix c = random_psd(6, 3);
  const Matrix e = random_psd(6, 4);
  const MetricReport report = frobenius_ratio(c, e, c);
  EXPECT_DOUBLE_EQ(report.frobenius_ratio, 0.0);
  EXPECT_DOUBLE_EQ(report.mse_estimator, 0.0);
  EXPECT_GT(report.mse_sample, 0.0);
}

TEST(FrobeniusRatio, SampleEstimatorScoresOne) {
  const Matrix c = random_psd(6, 5);
  const Matrix e = random_psd(6, 6);
  const MetricReport report = frobenius_ratio(e, e, c);
  EXPECT_DOUBLE_EQ(report.frobenius_ratio, 1.0);
  EXPECT_DOUBLE_EQ(report.mse_estimator, report.mse_sample);
}

TEST(FrobeniusRatio, RatioIsQuotientOfTraces) {
  const Matrix c = random_psd(5, 7);
  const Matrix e = random_psd(5, 8);
  const Matrix xi = random_psd(5, 9);
  const MetricReport report = frobenius_ratio(xi, e, c);
  EXPECT_DOUBLE_EQ(report.frobenius_ratio, report.mse_estimator / report.mse_sample);
  EXPECT_NEAR(report.mse_estimator, (xi - c).squaredNorm(), 1e-12);
}

TEST(FrobeniusRatio, InvariantUnderOrthogonalConjugation) {
  const Matrix c = random_psd(6, 10);
  const Matrix e = random_psd(6, 11);
  const Matrix xi = random_psd(6, 12);
  const Matrix rot = sym_eig(random_psd(6, 13)).vectors;  // orthogonal
  const MetricReport base = frobenius_ratio(xi, e, c);
  const MetricReport rotated = frobenius_ratio(rot * xi * rot.transpose(),
                                               rot * e * rot.transpose(),
                                               rot * c * rot.transpose());
  EXPECT_NEAR(rotated.frobenius_ratio, base.frobenius_ratio, 1e-12);
}

TEST(FrobeniusRatio, DegenerateDenominatorThrows) {
  const Matrix c = random_psd(4, 14);
  EXPECT_THROW(frobenius_ratio(c, c, c), NumericalError);
}

TEST(MpDensity, FrozenInteriorValue) {
  // q = 1, lambda = 2: sqrt((4-2)(2-0)) / (2 pi 1 2) = 1/(2 pi)
  EXPECT_NEAR(mp_density(2.0, 1.0), 0.15915494309189535, 1e-15);
}

TEST(MpDensity, SupportEdgesAtHalfQ) {
  const double lo = 0.08578643762690492;  // (1 - sqrt 0.5)^2
  const double hi = 2.914213562373095;    // (1 + sqrt 0.5)^2
  EXPECT_DOUBLE_EQ(mp_density(lo, 0.5), 0.0);
  EXPECT_DOUBLE_EQ(mp_density(hi, 0.5), 0.0);
  EXPECT_DOUBLE_EQ(mp_density(lo - 0.01, 0.5), 0.0);
  EXPECT_DOUBLE_EQ(mp_density(hi + 0.01, 0.5), 0.0);
  EXPECT_GT(mp_density(lo + 0.01, 0.5), 0.0);
  EXPECT_GT(mp_density(hi - 0.01, 0.5), 0.0);
  EXPECT_GT(mp_density(1.0, 0.5), 0.0);
}

TEST(MpDensity, IntegratesToOne) {
  // lambda = lo + (hi-lo) sin^2 theta turns the edge square roots into a
  // smooth integrand; midpoints avoid the exact-edge zeros of the density
  for (double q : {0.25, 0.5, 1.0}) {
    const double root = std::sqrt(q);
    const double lo = (1.0 - root) * (1.0 - root);
    const double hi = (1.0 + root) * (1.0 + root);
    const int panels = 200000;
    const double h = (M_PI / 2.0) / panels;
    double mass = 0.0;
    for (int i = 0; i < panels; ++i) {
      const double theta = h * (i + 0.5);
      const double s = std::sin(theta);
      const double lambda = lo + (hi - lo) * s * s;
      const double jac = (hi - lo) * 2.0 * s * std::cos(theta);
      mass += mp_density(lambda, q) * jac;
    }
    mass *= h;
    EXPECT_NEAR(mass, 1.0, 1e-6) << "q=" << q;
  }
}

TEST(MpDensity, RejectsBadQ) {
  EXPECT_THROW(mp_density(1.0, 0.0), std::invalid_argument);
  EXPECT_THROW(mp_density(1.0, -0.5), std::invalid_argument);
}

// ---- scalar MP verification ---------------------------------------------------

// physical root of q m^2 + m (1 + q - z) + 1 = 0 in the M-transform: the one
// with Im m opposite to Im z (the roots multiply to the real 1/q, so exactly
// one qualifies off the axis)
std::complex<double> mp_quadratic_root(std::complex<double> z, double q) {
  const std::complex<double> b = 1.0 + q - z;
  const std::complex<double> disc = std::sqrt(b * b - 4.0 * q);
  const std::complex<double> r1 = (-b + disc) / (2.0 * q);
  const std::complex<double> r2 = (-b - disc) / (2.0 * q);
  return (r1.imag() * z.imag() < 0.0) ? r1 : r2;
}

// The verifier measures |m_E - m_C(Z)|; the corrected quadratic is an
// independent oracle for the same object when C = A = I, so the Monte Carlo
// M-transform must also sit near the quadratic root wherever the verifier
// passes.
TEST(VerifyMpScalar, WhiteWishartMatchesQuadraticOracle) {
  const Index n = 300;
  const Index t = 600;
  const double q = 0.5;
  const double residual = verify_mp_scalar(ExplicitCross{Matrix::Identity(n, n)}, IdentityAuto{},
                                           n, t, 50, 12001);
  EXPECT_LT(residual, 0.02);

  // same Monte Carlo pipeline by hand at one fixed point
  const std::complex<double> z(1.0, 0.3);
  std::complex<double> trace(0.0, 0.0);
  const int draws = 50;
  for (int d = 0; d < draws; ++d) {
    const Matrix x = sample_noise(Gaussian{}, n, t, split_seed(777, 100 + std::uint64_t(d)));
    const SymEig eig = sym_eig((x * x.transpose()) / double(t));
    for (Index i = 0; i < n; ++i) {
      trace += 1.0 / (z - eig.values[i]);
    }
  }
  const std::complex<double> m_e = z * trace / (double(n) * double(draws)) - 1.0;
  const std::complex<double> oracle = mp_quadratic_root(z, q);
  EXPECT_LT(std::abs(m_e - oracle), 0.02);
}

TEST(VerifyMpScalar, ExpDecayAutocorrelation) {
  const Index n = 300;
  const double residual = verify_mp_scalar(ExplicitCross{Matrix::Identity(n, n)}, ExpDecay{3.0},
                                           n, 600, 50, 12002);
  EXPECT_LT(residual, 0.03);
}

TEST(VerifyMpScalar, ResidualShrinksWithDimension) {
  double previous = -1.0;
  for (Index n : {100, 200, 400}) {
    const double residual = verify_mp_scalar(ExplicitCross{Matrix::Identity(n, n)},
                                             IdentityAuto{}, n, 2 * n, 40, 12003);
    if (previous > 0.0) {
      EXPECT_LE(residual, 2.0 * previous / std::sqrt(2.0)) << "n=" << n;
    }
    previous = residual;
  }
}

TEST(VerifyMpScalar, RejectsTooFewDraws) {
  EXPECT_THROW(verify_mp_scalar(TwoPeak{}, IdentityAuto{}, 50, 100, 5, 1), std::invalid_argument);
}

// ---- rectangular S-transform ----------------------------------------------------

TEST(PsiSeriesReversion, IdentityMoments) {
  const auto c = detail::invert_psi_series({1.0, 1.0, 1.0, 1.0});
  EXPECT_DOUBLE_EQ(c[0], 1.0);
  EXPECT_DOUBLE_EQ(c[1], -1.0);
  EXPECT_DOUBLE_EQ(c[2], 1.0);
  EXPECT_DOUBLE_EQ(c[3], -1.0);
}

TEST(PsiSeriesReversion, InvertsTwoPointPsiToFourthOrder) {
  // moments of the spectrum {1, 3} at equal weight: m_k = (1 + 3^k)/2
  const std::array<double, 4> m = {2.0, 5.0, 14.0, 41.0};
  const auto c = detail::invert_psi_series(m);
  auto psi_exact = [](double x) {
    return 0.5 * (x / (1.0 - x) + 3.0 * x / (1.0 - 3.0 * x));
  };
  double prev = 0.0;
  for (double u : {0.02, 0.01}) {
    const double x = u * (c[0] + u * (c[1] + u * (c[2] + u * c[3])));
    const double err = std::abs(psi_exact(x) - u);
    EXPECT_LT(err, 1e-6);
    if (prev > 0.0) {
      EXPECT_LT(err, prev / 16.0);  // O(u^5) when halving u
    }
    prev = err;
  }
}

TEST(VerifySRect, GenericDiagonalAtHalfQ) {
  const SRectReport report = verify_s_rect(200, 400, 100, 31001);
  EXPECT_LT(report.max_residual, 0.03);
  EXPECT_LT(report.wishart_residual, 0.02);
}

TEST(VerifySRect, SquareCaseDegeneratesGracefully) {
  const SRectReport report = verify_s_rect(200, 200, 60, 31002);
  EXPECT_LT(report.max_residual, 0.02);
}

TEST(VerifySRect, RejectsTooFewDraws) {
  EXPECT_THROW(verify_s_rect(50, 100, 9, 1), std::invalid_argument);
}

TEST(VerifySRect, TinySampleTripsVarianceGuard) {
  EXPECT_THROW(verify_s_rect(2, 4, 10, 31003), NumericalError);
}

}  // namespace
}  // namespace covshrink
