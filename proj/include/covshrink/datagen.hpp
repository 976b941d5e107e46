#pragma once

// Synthetic sandwich-model data generation: population covariance models,
// autocorrelation Toeplitz builders (including VARMA autocovariances via the
// spectral density), and the Y = sqrt(C) X sqrt(A) sampler.

#include <Eigen/Eigenvalues>
#include <cmath>
#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "covshrink/errors.hpp"
#include "covshrink/linalg.hpp"
#include "covshrink/rng.hpp"

namespace covshrink {

// ---- population covariance models -----------------------------------------

// Diagonal spectrum with two eigenvalue levels; ceil(fraction_high * N)
// entries at `high`, the rest at `low`.
struct TwoPeak {
  double low = 1.0;
  double high = 3.0;
  double fraction_high = 0.5;
};

// C = (1 - q_IW) W^{-1} with W a Wishart matrix at noise ratio
// q_IW = 1/(1 + 2 kappa); normalized so the mean eigenvalue is near 1.
struct InverseWishart {
  double kappa = 2.0;
};

struct ExplicitCross {
  Matrix matrix;
};

using CrossModel = std::variant<TwoPeak, InverseWishart, ExplicitCross>;

// ---- autocorrelation models ------------------------------------------------

struct IdentityAuto {};

// a(k) = exp(-k/tau); gamma = coth(1/tau) appears in the closed-form chi.
struct ExpDecay {
  double tau = 1.0;
};

// VARMA(r1, r2): ar holds b_1..b_r1, ma holds a_0..a_r2. The autocovariance
// is always normalized to a(0) = 1, so the overall MA scale is redundant.
struct Varma {
  std::vector<double> ar;
  std::vector<double> ma;
};

using AutoModel = std::variant<IdentityAuto, ExpDecay, Varma>;

// ---- noise -----------------------------------------------------------------

struct Gaussian {};

struct StudentT {
  double nu = 5.0;
};

using NoiseDist = std::variant<Gaussian, StudentT>;

struct SandwichSample {
  Matrix y;          // N x T_total
  Matrix c_true;     // N x N
  AutoModel a_model; // A is held implicitly as (model, t_total)
  Index n = 0;
  Index t = 0;       // analysis window, columns 0..t-1
  Index t_total = 0;
  std::uint64_t seed = 0;
};

namespace detail {

inline void validate_two_peak(const TwoPeak& m) {
  if (!(m.low > 0.0) || !(m.high >= m.low)) {
    throw std::invalid_argument("two_peak: requires 0 < low <= high");
  }
  if (!(m.fraction_high >= 0.0) || !(m.fraction_high <= 1.0)) {
    throw std::invalid_argument("two_peak: fraction_high must lie in [0,1]");
  }
}

inline void validate_varma(const Varma& m) {
  if (m.ma.empty()) {
    throw std::invalid_argument("varma: MA coefficients a_0..a_r2 must be non-empty");
  }
  bool any = false;
  for (double a : m.ma) {
    if (!std::isfinite(a)) throw std::invalid_argument("varma: non-finite MA coefficient");
    any = any || a != 0.0;
  }
  if (!any) {
    throw std::invalid_argument("varma: at least one MA coefficient must be nonzero");
  }
  for (double b : m.ar) {
    if (!std::isfinite(b)) throw std::invalid_argument("varma: non-finite AR coefficient");
  }
  // stationarity: 1 - sum_beta b_beta z^beta must have all roots outside the
  // unit circle, equivalently the companion matrix of the reversed polynomial
  // z^r - b_1 z^{r-1} - ... - b_r has spectral radius < 1
  const std::size_t r = m.ar.size();
  if (r == 0) return;
  Matrix companion = Matrix::Zero(static_cast<Index>(r), static_cast<Index>(r));
  for (std::size_t j = 0; j < r; ++j) {
    companion(0, static_cast<Index>(j)) = m.ar[j];
  }
  for (std::size_t j = 1; j < r; ++j) {
    companion(static_cast<Index>(j), static_cast<Index>(j - 1)) = 1.0;
  }
  Eigen::EigenSolver<Matrix> solver(companion, /*computeEigenvectors=*/false);
  if (solver.info() != Eigen::Success) {
    throw NumericalError("varma: companion eigensolver failed");
  }
  const double radius = solver.eigenvalues().cwiseAbs().maxCoeff();
  if (radius >= 1.0 - 1e-10) {
    throw std::invalid_argument("varma: non-stationary AR coefficients (spectral radius " +
                                std::to_string(radius) + ")");
  }
}

// Spectral density H(w) = |sum_a a_alpha e^{-i alpha w}|^2 / |1 - sum_b b_beta e^{-i beta w}|^2
// sampled on a uniform grid of `points` nodes over [0, 2pi).
inline std::vector<double> varma_spectrum_grid(const Varma& m, int points) {
  validate_varma(m);
  std::vector<double> h(static_cast<std::size_t>(points));
  const double pi = 3.14159265358979323846;
  for (int k = 0; k < points; ++k) {
    const double w = 2.0 * pi * static_cast<double>(k) / static_cast<double>(points);
    std::complex<double> num(0.0, 0.0);
    for (std::size_t a = 0; a < m.ma.size(); ++a) {
      num += m.ma[a] * std::polar(1.0, -w * static_cast<double>(a));
    }
    std::complex<double> den(1.0, 0.0);
    for (std::size_t b = 0; b < m.ar.size(); ++b) {
      den -= m.ar[b] * std::polar(1.0, -w * static_cast<double>(b + 1));
    }
    h[static_cast<std::size_t>(k)] = std::norm(num) / std::norm(den);
  }
  return h;
}

// The exp-decay model is VAR(1) with b_1 = e^{-1/tau}, a_0 = sqrt(1 - b_1^2).
inline Varma exp_decay_as_var1(const ExpDecay& m) {
  if (!(m.tau > 0.0) || !std::isfinite(m.tau)) {
    throw std::invalid_argument("exp_decay: tau must be positive and finite");
  }
  const double b1 = std::exp(-1.0 / m.tau);
  return Varma{{b1}, {std::sqrt(1.0 - b1 * b1)}};
}

constexpr int kSpectrumGridPoints = 1 << 14;

}  // namespace detail

/// Population covariance builder. TwoPeak and Explicit are deterministic;
/// the seed feeds only the inverse-Wishart draw.
inline Matrix build_cross(const CrossModel& model, Index n, std::uint64_t seed) {
  if (n < 2) {
    throw std::invalid_argument("build_cross: n must be at least 2");
  }
  if (const auto* tp = std::get_if<TwoPeak>(&model)) {
    detail::validate_two_peak(*tp);
    const Index n_high = static_cast<Index>(
        std::ceil(tp->fraction_high * static_cast<double>(n) - 1e-12));
    Vector diag = Vector::Constant(n, tp->low);
    diag.tail(n_high).setConstant(tp->high);
    return diag.asDiagonal();
  }
  if (const auto* iw = std::get_if<InverseWishart>(&model)) {
    if (!(iw->kappa > 0.0)) {
      throw std::invalid_argument("inverse_wishart: kappa must be positive");
    }
    const double q_iw = 1.0 / (1.0 + 2.0 * iw->kappa);
    const Index t_iw = static_cast<Index>(std::floor(static_cast<double>(n) / q_iw));
    for (int attempt = 0; attempt < 5; ++attempt) {
      Rng rng(seed + static_cast<std::uint64_t>(attempt));
      Matrix r(n, t_iw);
      for (Index i = 0; i < n; ++i) {
        for (Index j = 0; j < t_iw; ++j) {
          r(i, j) = rng.gaussian();
        }
      }
      const Matrix w = r * r.transpose() / static_cast<double>(t_iw);
      SymEig eig = sym_eig(w);
      if (eig.values.minCoeff() < 1e-12 * eig.values.maxCoeff()) {
        continue;  // near-singular draw, retry with the next seed
      }
      const Vector inv_vals = (1.0 - q_iw) * eig.values.cwiseInverse();
      return reconstruct(eig.vectors, inv_vals);
    }
    throw NumericalError("inverse_wishart: 5 consecutive near-singular Wishart draws");
  }
  const auto& ex = std::get<ExplicitCross>(model);
  detail::require_square_finite(ex.matrix, "build_cross");
  detail::require_symmetric(ex.matrix, "build_cross");
  if (ex.matrix.rows() != n) {
    throw std::invalid_argument("build_cross: explicit matrix size " +
                                std::to_string(ex.matrix.rows()) + " does not match n = " +
                                std::to_string(n));
  }
  return ex.matrix;
}

/// Toeplitz autocorrelation matrix A_ts = a(|t-s|) with a(0) = 1.
/// VARMA autocovariances come from the spectral density on a 2^14 grid,
/// a(k) = mean_w[H(w) cos(k w)] / mean_w[H(w)]; this is the autocovariance of
/// a discrete nonnegative measure, so the result is PSD by construction. The
/// guard below still verifies min eigenvalue >= -1e-8 via a shifted Cholesky.
inline Matrix build_auto_toeplitz(const AutoModel& model, Index t) {
  if (t < 1) {
    throw std::invalid_argument("build_auto_toeplitz: t must be positive");
  }
  if (std::holds_alternative<IdentityAuto>(model)) {
    return Matrix::Identity(t, t);
  }

  std::vector<double> acov(static_cast<std::size_t>(t));
  if (const auto* ed = std::get_if<ExpDecay>(&model)) {
    if (!(ed->tau > 0.0) || !std::isfinite(ed->tau)) {
      throw std::invalid_argument("exp_decay: tau must be positive and finite");
    }
    for (Index k = 0; k < t; ++k) {
      acov[static_cast<std::size_t>(k)] = std::exp(-static_cast<double>(k) / ed->tau);
    }
  } else {
    const auto& vm = std::get<Varma>(model);
    const std::vector<double> h = detail::varma_spectrum_grid(vm, detail::kSpectrumGridPoints);
    const double pi = 3.14159265358979323846;
    const int points = detail::kSpectrumGridPoints;
    double c0 = 0.0;
    for (double v : h) c0 += v;
    c0 /= static_cast<double>(points);
    for (Index k = 0; k < t; ++k) {
      double ck = 0.0;
      for (int j = 0; j < points; ++j) {
        const double w = 2.0 * pi * static_cast<double>(j) / static_cast<double>(points);
        ck += h[static_cast<std::size_t>(j)] * std::cos(static_cast<double>(k) * w);
      }
      acov[static_cast<std::size_t>(k)] = ck / static_cast<double>(points) / c0;
    }
  }

  Matrix a(t, t);
  for (Index i = 0; i < t; ++i) {
    for (Index j = 0; j <= i; ++j) {
      const double v = acov[static_cast<std::size_t>(i - j)];
      a(i, j) = v;
      a(j, i) = v;
    }
  }
  // min eigenvalue >= -1e-8 iff A + 1e-8 I admits a Cholesky factorization
  Eigen::LLT<Matrix> llt(a + 1e-8 * Matrix::Identity(t, t));
  if (llt.info() != Eigen::Success) {
    throw NumericalError("build_auto_toeplitz: autocovariance matrix is not PSD");
  }
  return a;
}

/// i.i.d. unit-variance noise matrix, filled row by row so the draw order is
/// part of the documented determinism contract.
inline Matrix sample_noise(const NoiseDist& noise, Index n, Index t_total, std::uint64_t seed) {
  Rng rng(seed);
  Matrix x(n, t_total);
  if (const auto* st = std::get_if<StudentT>(&noise)) {
    for (Index i = 0; i < n; ++i) {
      for (Index j = 0; j < t_total; ++j) {
        x(i, j) = rng.student_t(st->nu);
      }
    }
  } else {
    for (Index i = 0; i < n; ++i) {
      for (Index j = 0; j < t_total; ++j) {
        x(i, j) = rng.gaussian();
      }
    }
  }
  return x;
}

/// Y = sqrt(C) X sqrt(A), deterministic for a fixed seed. The cross model and
/// the noise matrix consume decoupled sub-seeds, so adding draws to one does
/// not shift the other.
inline SandwichSample generate_sandwich(const CrossModel& cross, const AutoModel& auto_model,
                                        const NoiseDist& noise, Index n, Index t, Index t_total,
                                        std::uint64_t seed) {
  if (n < 2 || t < 1 || t_total < t) {
    throw std::invalid_argument("generate_sandwich: need n >= 2 and t_total >= t >= 1");
  }
  SandwichSample sample;
  sample.c_true = build_cross(cross, n, split_seed(seed, 1));
  sample.a_model = auto_model;
  sample.n = n;
  sample.t = t;
  sample.t_total = t_total;
  sample.seed = seed;

  const Matrix x = sample_noise(noise, n, t_total, split_seed(seed, 2));
  const Matrix sqrt_c = psd_sqrt(sample.c_true);
  if (std::holds_alternative<IdentityAuto>(auto_model)) {
    sample.y = sqrt_c * x;
  } else {
    const Matrix sqrt_a = psd_sqrt(build_auto_toeplitz(auto_model, t_total));
    sample.y = sqrt_c * x * sqrt_a;
  }
  return sample;
}

}  // namespace covshrink
