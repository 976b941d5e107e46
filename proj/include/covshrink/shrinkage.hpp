#pragma once

// Eigenvalue shrinkage estimators: the nonlinear correlated-sample formula
// xi_i = lambda_i Im chi_A(u_i)/Im u_i, the Ledoit-Peche special case, its
// effective-sample-size variant, and linear shrinkage; plus reconstruction of
// the cleaned matrix in the sample eigenbasis.

#include <cmath>
#include <complex>
#include <cstddef>
#include <stdexcept>
#include <variant>

#include "covshrink/kde.hpp"
#include "covshrink/linalg.hpp"
#include "covshrink/transforms.hpp"

namespace covshrink {

struct Correlated {
  AutoModel model;
};
struct LedoitPeche {};
struct EffectiveLP {
  double tau_eff = 1.0;
};
struct Linear {
  double alpha_s = 0.5;
};

using ShrinkMethod = std::variant<Correlated, LedoitPeche, EffectiveLP, Linear>;

struct ShrinkageResult {
  Vector lambdas;
  Vector xis;
  ShrinkMethod method;
  Matrix xi_matrix;  // Xi = sum_i xi_i |v_i><v_i|
};

namespace detail {

inline void require_positive_q(double q, const char* who) {
  if (!(q > 0.0) || !std::isfinite(q)) {
    throw std::invalid_argument(std::string(who) + ": q must be positive and finite");
  }
}

}  // namespace detail

/// Nonlinear shrinkage for autocorrelated samples. Eigenvalues with
/// vanishing kernel density (beta < 1e-14) take the limiting ratio from a
/// centered finite difference Im chi(alpha + i delta)/delta, delta = 1e-8.
/// Results are clipped below at 0. Roots are warm-started along the
/// ascending eigenvalue sweep.
inline Vector shrink_correlated(const SpectralEstimate& spec, double q,
                                const TransformContext& ctx) {
  detail::require_positive_q(q, "shrink_correlated");
  const auto us = compute_u(spec, q);
  const Index n = spec.lambdas.size();
  Vector xi(n);
  Complex prev_root(0.0, 0.0);
  bool have_prev = false;
  for (Index i = 0; i < n; ++i) {
    const auto& p = us[static_cast<std::size_t>(i)];
    const double div = p.beta < 1e-14 ? 1e-8 : p.beta;
    const Complex u(p.alpha, div);
    const Complex seed = have_prev ? prev_root : u / (1.0 + u);
    const Complex root = detail::chi_seeded(ctx, u, seed, have_prev);
    prev_root = root;
    have_prev = true;
    xi[i] = std::max(0.0, spec.lambdas[i] * root.imag() / div);
  }
  return xi;
}

/// Ledoit-Peche: xi_i = lambda_i / ((alpha_i + 1)^2 + beta_i^2).
inline Vector shrink_lp(const SpectralEstimate& spec, double q) {
  detail::require_positive_q(q, "shrink_lp");
  const auto us = compute_u(spec, q);
  const Index n = spec.lambdas.size();
  Vector xi(n);
  for (Index i = 0; i < n; ++i) {
    const auto& p = us[static_cast<std::size_t>(i)];
    xi[i] = spec.lambdas[i] / ((p.alpha + 1.0) * (p.alpha + 1.0) + p.beta * p.beta);
  }
  return xi;
}

/// Ledoit-Peche at the effective sample count T_eff = T(1 - e^{-1/tau_eff}):
/// u is linear in q, so u_eff = (q_eff/q) u and the LP formula applies.
inline Vector shrink_lp_effective(const SpectralEstimate& spec, Index n, Index t,
                                  double tau_eff) {
  if (n < 1 || t < 1) {
    throw std::invalid_argument("shrink_lp_effective: n and t must be positive");
  }
  if (!(tau_eff > 0.0) || !std::isfinite(tau_eff)) {
    throw std::invalid_argument("shrink_lp_effective: tau_eff must be positive and finite");
  }
  const double t_eff = static_cast<double>(t) * (1.0 - std::exp(-1.0 / tau_eff));
  if (t_eff < static_cast<double>(n) * 1e-3) {
    throw NumericalError("shrink_lp_effective: degenerate q, T_eff = " + std::to_string(t_eff) +
                         " for N = " + std::to_string(n));
  }
  const double q = static_cast<double>(n) / static_cast<double>(t);
  const double scale = static_cast<double>(t) / t_eff;  // q_eff / q
  const auto us = compute_u(spec, q);
  const Index size = spec.lambdas.size();
  Vector xi(size);
  for (Index i = 0; i < size; ++i) {
    const auto& p = us[static_cast<std::size_t>(i)];
    const double a = scale * p.alpha;
    const double b = scale * p.beta;
    xi[i] = spec.lambdas[i] / ((a + 1.0) * (a + 1.0) + b * b);
  }
  return xi;
}

/// Linear shrinkage toward the identity: xi_i = alpha_s lambda_i + 1 - alpha_s.
inline Vector shrink_linear(const Vector& lambdas, double alpha_s) {
  if (!(alpha_s >= 0.0) || !(alpha_s <= 1.0)) {
    throw std::invalid_argument("shrink_linear: alpha_s must lie in [0,1]");
  }
  return alpha_s * lambdas.array() + (1.0 - alpha_s);
}

/// Assemble Xi in the sample eigenbasis. xis is not re-sorted; monotone
/// post-processing belongs to the isotonic oracle stage only.
inline ShrinkageResult build_estimator(const SymEig& eig, const Vector& xis,
                                       ShrinkMethod method) {
  if (eig.values.size() != xis.size()) {
    throw std::invalid_argument("build_estimator: xi length does not match eigensystem");
  }
  ShrinkageResult out;
  out.lambdas = eig.values;
  out.xis = xis;
  out.method = std::move(method);
  out.xi_matrix = reconstruct(eig.vectors, xis);
  return out;
}

}  // namespace covshrink
