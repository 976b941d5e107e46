#pragma once

// Loss metrics and free-probability reference curves: Frobenius ratio,
// analytic Marchenko-Pastur density, and Monte Carlo verifications of the
// scalar MP equation and the rectangular S-transform relation.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <limits>
#include <string>
#include <vector>

#include "covshrink/datagen.hpp"
#include "covshrink/errors.hpp"
#include "covshrink/linalg.hpp"
#include "covshrink/rng.hpp"
#include "covshrink/transforms.hpp"

namespace covshrink {

struct MetricReport {
  double frobenius_ratio = 0.0;
  double mse_estimator = 0.0;  // Tr (Xi - C)^2
  double mse_sample = 0.0;     // Tr (E  - C)^2
};

// Residuals of the rectangular S-transform relation and the Wishart
// closed-form check, each maximized over the test points.
struct SRectReport {
  double max_residual = 0.0;
  double wishart_residual = 0.0;
};

/// Frobenius ratio Tr(Xi - C)^2 / Tr(E - C)^2; below 1 means the estimator
/// improved on the raw sample covariance.
inline MetricReport frobenius_ratio(const Matrix& xi_matrix, const Matrix& e,
                                    const Matrix& c_true) {
  detail::require_square_finite(xi_matrix, "frobenius_ratio");
  detail::require_symmetric(xi_matrix, "frobenius_ratio");
  detail::require_square_finite(e, "frobenius_ratio");
  detail::require_symmetric(e, "frobenius_ratio");
  detail::require_square_finite(c_true, "frobenius_ratio");
  detail::require_symmetric(c_true, "frobenius_ratio");
  if (xi_matrix.rows() != c_true.rows() || e.rows() != c_true.rows()) {
    throw std::invalid_argument("frobenius_ratio: dimension mismatch");
  }
  MetricReport report;
  report.mse_estimator = (xi_matrix - c_true).squaredNorm();
  report.mse_sample = (e - c_true).squaredNorm();
  if (report.mse_sample <= 0.0) {
    throw NumericalError("frobenius_ratio: degenerate denominator, E equals C");
  }
  report.frobenius_ratio = report.mse_estimator / report.mse_sample;
  return report;
}

/// Marchenko-Pastur density at aspect ratio q, supported on [(1-sqrt q)^2,
/// (1+sqrt q)^2] and zero outside (here including the edges).
inline double mp_density(double lambda, double q) {
  if (!(q > 0.0) || !std::isfinite(q)) {
    throw std::invalid_argument("mp_density: q must be positive and finite");
  }
  const double root = std::sqrt(q);
  const double lo = (1.0 - root) * (1.0 - root);
  const double hi = (1.0 + root) * (1.0 + root);
  if (lambda <= lo || lambda >= hi) {
    return 0.0;
  }
  return std::sqrt((hi - lambda) * (lambda - lo)) / (2.0 * M_PI * q * lambda);
}

namespace detail {

// deterministic "generic" diagonal for the rectangular S-transform check:
// distinct positive values spread over [0.5, 2]
inline Vector generic_diagonal(Index t) {
  Vector d(t);
  for (Index j = 0; j < t; ++j) {
    d[j] = 0.5 + 1.5 * double(j) / double(std::max<Index>(t - 1, 1));
  }
  return d;
}

// first four coefficients of the functional inverse of
// psi(z) = m1 z + m2 z^2 + m3 z^3 + m4 z^4 (Lagrange reversion)
inline std::array<double, 4> invert_psi_series(const std::array<double, 4>& m) {
  const double m1 = m[0], m2 = m[1], m3 = m[2], m4 = m[3];
  if (m1 == 0.0) {
    throw NumericalError("invert_psi_series: vanishing first moment");
  }
  const double p3 = m1 * m1 * m1;
  const double p5 = p3 * m1 * m1;
  const double p7 = p5 * m1 * m1;
  return {1.0 / m1, -m2 / p3, (2.0 * m2 * m2 - m1 * m3) / p5,
          (5.0 * m1 * m2 * m3 - 5.0 * m2 * m2 * m2 - m1 * m1 * m4) / p7};
}

// S(z) = ((1+z)/z) chi(z) evaluated from the reverted series; polynomial in
// z, so z = 0 is regular
inline double s_from_moments(const std::array<double, 4>& m, double z) {
  const auto c = invert_psi_series(m);
  return (1.0 + z) * (c[0] + z * (c[1] + z * (c[2] + z * c[3])));
}

// Accumulates the first four normalized moments (1/dim) Tr M^k of a square
// matrix over Monte Carlo draws, tracking per-moment variance.
class MomentAccumulator {
 public:
  void add(const Matrix& m) {
    const double dim = double(m.rows());
    const Matrix m2 = m * m;
    std::array<double, 4> mk;
    mk[0] = m.trace() / dim;
    mk[1] = m2.trace() / dim;
    mk[2] = (m2 * m).trace() / dim;
    mk[3] = (m2 * m2).trace() / dim;
    for (int k = 0; k < 4; ++k) {
      sum_[k] += mk[k];
      sum_sq_[k] += mk[k] * mk[k];
    }
    draws_ += 1;
  }

  // mean moments; throws when any relative standard error exceeds 10%
  std::array<double, 4> means(const char* side) const {
    std::array<double, 4> m{};
    for (int k = 0; k < 4; ++k) {
      m[k] = sum_[k] / double(draws_);
      const double var = std::max(0.0, sum_sq_[k] / double(draws_) - m[k] * m[k]);
      const double se = std::sqrt(var / double(draws_));
      if (se > 0.1 * std::abs(m[k])) {
        throw NumericalError(std::string("verify_s_rect: relative standard error of ") + side +
                             " moment " + std::to_string(k + 1) + " exceeds 10%, need more draws");
      }
    }
    return m;
  }

 private:
  std::array<double, 4> sum_{};
  std::array<double, 4> sum_sq_{};
  int draws_ = 0;
};

}  // namespace detail

/// Monte Carlo check of the scalar MP equation: the empirical M-transform
/// m_E(z) = z (1/N) Tr (zI - E)^{-1} - 1 at five off-axis points must match
/// m_C(Z) with Z = z chi_A(q m_E) / (q m_E), where m_C is the M-transform of
/// the population spectrum. Returns the largest residual.
inline double verify_mp_scalar(const CrossModel& cross, const AutoModel& auto_model, Index n,
                               Index t, int draws, std::uint64_t seed) {
  if (draws < 10) {
    throw std::invalid_argument("verify_mp_scalar: need at least 10 draws");
  }
  if (n < 2 || t < 1) {
    throw std::invalid_argument("verify_mp_scalar: need n >= 2 and t >= 1");
  }
  using Complex = std::complex<double>;
  const Matrix c = build_cross(cross, n, split_seed(seed, 1));
  const Vector population = sym_eig(c).values;
  const Matrix sqrt_c = psd_sqrt(c);
  const bool trivial_a = std::holds_alternative<IdentityAuto>(auto_model);
  Matrix sqrt_a;
  if (!trivial_a) {
    sqrt_a = psd_sqrt(build_auto_toeplitz(auto_model, t));
  }

  std::vector<Vector> spectra;
  spectra.reserve(std::size_t(draws));
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (int d = 0; d < draws; ++d) {
    const Matrix x = sample_noise(Gaussian{}, n, t, split_seed(seed, 100 + std::uint64_t(d)));
    const Matrix y = trivial_a ? Matrix(sqrt_c * x) : Matrix(sqrt_c * x * sqrt_a);
    const SymEig eig = sym_eig((y * y.transpose()) / double(t));
    lo = std::min(lo, eig.values.minCoeff());
    hi = std::max(hi, eig.values.maxCoeff());
    spectra.push_back(eig.values);
  }

  const TransformContext ctx(auto_model);
  const double q = double(n) / double(t);
  double worst = 0.0;
  for (double frac : {0.15, 0.35, 0.55, 0.75, 0.9}) {
    const Complex z(lo + frac * (hi - lo), 0.3);
    for (const Vector& lambdas : spectra) {
      for (Index i = 0; i < lambdas.size(); ++i) {
        if (std::abs(z - Complex(lambdas[i], 0.0)) < 0.05) {
          throw NumericalError("verify_mp_scalar: test point within 0.05 of the spectrum");
        }
      }
    }
    Complex resolvent_trace(0.0, 0.0);
    for (const Vector& lambdas : spectra) {
      for (Index i = 0; i < lambdas.size(); ++i) {
        resolvent_trace += 1.0 / (z - lambdas[i]);
      }
    }
    resolvent_trace /= double(n) * double(draws);
    const Complex m_e = z * resolvent_trace - 1.0;
    const Complex u = q * m_e;
    const Complex big_z = z * chi(ctx, u) / u;
    Complex m_c(0.0, 0.0);
    for (Index i = 0; i < population.size(); ++i) {
      m_c += population[i] / (big_z - population[i]);
    }
    m_c /= double(n);
    worst = std::max(worst, std::abs(m_e - m_c));
  }
  return worst;
}

/// Monte Carlo check of the rectangular S-transform relation
/// S_WV(z) = (q(1+z)/(1+qz)) S_VW(qz) for WV = (1/T) X D X^T and
/// VW = (1/T) D X^T X with a fixed generic diagonal D. The two sides use
/// independent draw halves, so the match is statistical rather than the
/// cyclic-trace identity. Also checks the Wishart S against 1/(1+qz).
inline SRectReport verify_s_rect(Index n, Index t, int draws, std::uint64_t seed) {
  if (draws < 10) {
    throw std::invalid_argument("verify_s_rect: need at least 10 draws");
  }
  if (n < 2 || t < 2) {
    throw std::invalid_argument("verify_s_rect: need n >= 2 and t >= 2");
  }
  const double q = double(n) / double(t);
  const Vector d = detail::generic_diagonal(t);

  detail::MomentAccumulator acc_wv;
  detail::MomentAccumulator acc_vw;
  detail::MomentAccumulator acc_wishart;
  const int half = draws / 2;
  for (int i = 0; i < draws; ++i) {
    const Matrix x = sample_noise(Gaussian{}, n, t, split_seed(seed, 200 + std::uint64_t(i)));
    if (i < half) {
      acc_wv.add((x * d.asDiagonal() * x.transpose()) / double(t));
      acc_wishart.add((x * x.transpose()) / double(t));
    } else {
      acc_vw.add((d.asDiagonal() * (x.transpose() * x)) / double(t));
    }
  }
  const auto m_wv = acc_wv.means("WV");
  const auto m_vw = acc_vw.means("VW");
  const auto m_w = acc_wishart.means("Wishart");

  SRectReport report;
  for (double z : {-0.1, -0.05, 0.02, 0.05, 0.1}) {
    const double lhs = detail::s_from_moments(m_wv, z);
    const double rhs = q * (1.0 + z) / (1.0 + q * z) * detail::s_from_moments(m_vw, q * z);
    report.max_residual = std::max(report.max_residual, std::abs(lhs - rhs));
    const double wishart = detail::s_from_moments(m_w, z) - 1.0 / (1.0 + q * z);
    report.wishart_residual = std::max(report.wishart_residual, std::abs(wishart));
  }
  return report;
}

}  // namespace covshrink
