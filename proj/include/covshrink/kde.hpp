#pragma once

// Kernel estimation of the sample-spectrum density rho_E and its Hilbert
// transform h_E from observed eigenvalues, evaluated at the eigenvalues
// themselves, plus assembly of the complex points u_i = alpha_i + i beta_i
// that feed the shrinkage formulas.

#include <cmath>
#include <stdexcept>
#include <vector>

#include "covshrink/linalg.hpp"

namespace covshrink {

/// Epanechnikov kernel r(x) = (3/(4 sqrt 5)) * max(0, 1 - x^2/5).
inline double epanechnikov_density(double x) {
  const double s = 1.0 - x * x / 5.0;
  return s > 0.0 ? 0.75 / std::sqrt(5.0) * s : 0.0;
}

/// Hilbert transform of the Epanechnikov kernel,
///   h(x) = 3x/(10 pi) - (3/(4 sqrt5 pi)) (1 - x^2/5) log|(x - sqrt5)/(x + sqrt5)|,
/// with the log term taken as 0 at x = +-sqrt5 (removable limit). Odd in x.
inline double epanechnikov_hilbert(double x) {
  const double pi = 3.14159265358979323846;
  const double s5 = std::sqrt(5.0);
  const double lead = 3.0 * x / (10.0 * pi);
  const double s = 1.0 - x * x / 5.0;
  if (s == 0.0 || x == s5 || x == -s5) {
    return lead;
  }
  return lead - 0.75 / (s5 * pi) * s * std::log(std::abs((x - s5) / (x + s5)));
}

// Density and Hilbert estimates at the sample eigenvalues. lambdas are the
// clipped eigenvalues actually used as kernel centers and scales.
struct SpectralEstimate {
  Vector lambdas;
  Vector rho;
  Vector hilb;
  double bandwidth = 0.0;
};

// u_i = alpha_i + i beta_i with beta_i >= 0.
struct ComplexPoint {
  double alpha = 0.0;
  double beta = 0.0;
};

/// Kernel-mixture density (1/N) sum_j r((x - l_j)/(b l_j)) / (b l_j) at an
/// arbitrary point, reusing the estimate's centers and bandwidth.
inline double kde_density(const SpectralEstimate& spec, double x) {
  const Index n = spec.lambdas.size();
  double acc = 0.0;
  for (Index j = 0; j < n; ++j) {
    const double scale = spec.bandwidth * spec.lambdas[j];
    acc += epanechnikov_density((x - spec.lambdas[j]) / scale) / scale;
  }
  return acc / static_cast<double>(n);
}

/// Kernel-mixture Hilbert transform at an arbitrary point.
inline double kde_hilbert(const SpectralEstimate& spec, double x) {
  const Index n = spec.lambdas.size();
  double acc = 0.0;
  for (Index j = 0; j < n; ++j) {
    const double scale = spec.bandwidth * spec.lambdas[j];
    acc += epanechnikov_hilbert((x - spec.lambdas[j]) / scale) / scale;
  }
  return acc / static_cast<double>(n);
}

/// Builds the spectral estimate at the sample eigenvalues with the global
/// bandwidth b = t^(-1/3). Eigenvalues below 1e-12 * max(lambda) are clipped
/// up to that floor before use: the kernel scale b*lambda_j degenerates at 0.
/// The self-kernel term j = i is included, so rho at every eigenvalue is
/// strictly positive.
inline SpectralEstimate estimate_spectrum(const Vector& lambdas, Index t) {
  if (lambdas.size() < 1) {
    throw std::invalid_argument("estimate_spectrum: empty spectrum");
  }
  if (t < 1) {
    throw std::invalid_argument("estimate_spectrum: t must be positive");
  }
  if (!lambdas.allFinite()) {
    throw std::invalid_argument("estimate_spectrum: non-finite eigenvalues");
  }
  for (Index i = 1; i < lambdas.size(); ++i) {
    if (lambdas[i] < lambdas[i - 1]) {
      throw std::invalid_argument("estimate_spectrum: eigenvalues must be ascending");
    }
  }
  const double lmax = lambdas.maxCoeff();
  const double floor = 1e-12 * lmax;
  if (!(floor > 0.0)) {
    throw std::invalid_argument("estimate_spectrum: spectrum is entirely non-positive");
  }

  SpectralEstimate spec;
  spec.lambdas = lambdas.cwiseMax(floor);
  spec.bandwidth = std::pow(static_cast<double>(t), -1.0 / 3.0);
  const Index n = spec.lambdas.size();
  spec.rho.resize(n);
  spec.hilb.resize(n);
  for (Index i = 0; i < n; ++i) {
    spec.rho[i] = kde_density(spec, spec.lambdas[i]);
    spec.hilb[i] = kde_hilbert(spec, spec.lambdas[i]);
  }
  return spec;
}

/// u_i = q (pi lambda_i h_E(lambda_i) - 1) + i q pi lambda_i rho_E(lambda_i).
/// Tiny negative beta from roundoff is clipped to 0.
inline std::vector<ComplexPoint> compute_u(const SpectralEstimate& spec, double q) {
  if (!(q > 0.0) || !std::isfinite(q)) {
    throw std::invalid_argument("compute_u: q must be positive and finite");
  }
  const double pi = 3.14159265358979323846;
  std::vector<ComplexPoint> us(static_cast<std::size_t>(spec.lambdas.size()));
  for (Index i = 0; i < spec.lambdas.size(); ++i) {
    const double l = spec.lambdas[i];
    us[static_cast<std::size_t>(i)].alpha = q * (pi * l * spec.hilb[i] - 1.0);
    us[static_cast<std::size_t>(i)].beta = std::max(0.0, q * pi * l * spec.rho[i]);
  }
  return us;
}

}  // namespace covshrink
