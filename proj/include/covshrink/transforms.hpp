#pragma once

// Free-probability transforms of the autocorrelation model: psi, its
// functional inverse chi, and the S-transform. Identity and ExpDecay have
// closed forms; general VARMA goes through spectral-density quadrature and
// damped complex Newton with radial continuation.

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <variant>
#include <vector>

#include "covshrink/datagen.hpp"
#include "covshrink/errors.hpp"

namespace covshrink {

using Complex = std::complex<double>;

// Immutable per-model evaluation context; shareable across threads.
class TransformContext {
 public:
  explicit TransformContext(AutoModel model, int quadrature_points = 1 << 14,
                            double newton_tol = 1e-12, int newton_max_iter = 80)
      : model_(std::move(model)),
        quadrature_points_(quadrature_points),
        newton_tol_(newton_tol),
        newton_max_iter_(newton_max_iter) {
    if (quadrature_points_ < 1024 || (quadrature_points_ & (quadrature_points_ - 1)) != 0) {
      throw std::invalid_argument("transform_context: quadrature_points must be a power of two >= 1024");
    }
    if (!(newton_tol_ > 0.0) || newton_tol_ > 1e-10) {
      throw std::invalid_argument("transform_context: newton_tol must lie in (0, 1e-10]");
    }
    if (newton_max_iter_ < 1) {
      throw std::invalid_argument("transform_context: newton_max_iter must be positive");
    }
    if (std::holds_alternative<IdentityAuto>(model_)) {
      return;
    }
    Varma as_varma;
    if (const auto* ed = std::get_if<ExpDecay>(&model_)) {
      as_varma = detail::exp_decay_as_var1(*ed);
      gamma_ = 1.0 / std::tanh(1.0 / ed->tau);
    } else {
      as_varma = std::get<Varma>(model_);
    }
    h_ = detail::varma_spectrum_grid(as_varma, quadrature_points_);
    double mean = 0.0;
    for (double v : h_) mean += v;
    mean /= static_cast<double>(h_.size());
    if (!(mean > 0.0)) {
      throw NumericalError("transform_context: degenerate spectral density");
    }
    double sq = 0.0;
    for (double& v : h_) {
      v /= mean;
      sq += v * v;
    }
    second_moment_ = sq / static_cast<double>(h_.size());
  }

  const AutoModel& model() const { return model_; }
  int quadrature_points() const { return quadrature_points_; }
  double newton_tol() const { return newton_tol_; }
  int newton_max_iter() const { return newton_max_iter_; }

  bool is_identity() const { return std::holds_alternative<IdentityAuto>(model_); }
  bool is_exp_decay() const { return std::holds_alternative<ExpDecay>(model_); }
  // coth(1/tau); only meaningful for ExpDecay
  double gamma() const { return gamma_; }
  // grid mean of H^2 after unit-mean normalization; drives the small-u series
  double second_moment() const { return second_moment_; }
  const std::vector<double>& grid() const { return h_; }

 private:
  AutoModel model_;
  int quadrature_points_;
  double newton_tol_;
  int newton_max_iter_;
  std::vector<double> h_;  // unit-mean spectral density samples; empty for Identity
  double gamma_ = 1.0;
  double second_moment_ = 1.0;
};

namespace detail {

struct PsiEval {
  Complex value{0.0, 0.0};
  Complex deriv{0.0, 0.0};
  bool valid = false;  // false: some node had |1 - zH| < 1e-13
};

// One pass over the grid gives psi and psi'. psi'(z) = mean[H/(1-zH)^2]
// since d/dz [zH/(1-zH)] = H/(1-zH)^2.
inline PsiEval psi_on_grid(const std::vector<double>& h, Complex z) {
  PsiEval out;
  Complex acc(0.0, 0.0);
  Complex dacc(0.0, 0.0);
  for (double hk : h) {
    const Complex d = 1.0 - z * hk;
    if (std::norm(d) < 1e-26) {
      return out;
    }
    const Complex inv = 1.0 / d;
    acc += z * hk * inv;
    dacc += hk * inv * inv;
  }
  const double m = static_cast<double>(h.size());
  out.value = acc / m;
  out.deriv = dacc / m;
  out.valid = true;
  return out;
}

// Damped Newton on psi(x) = u. Steps must both reduce |psi(x) - u| and stay
// clear of the grid poles; up to 50 halvings per iteration.
inline bool newton_psi_inverse(const std::vector<double>& h, Complex u, Complex seed,
                               double tol, int max_iter, Complex& root, double& residual) {
  Complex x = seed;
  PsiEval e = psi_on_grid(h, x);
  if (!e.valid) return false;
  double f = std::abs(e.value - u);
  for (int it = 0; it < max_iter && f > tol; ++it) {
    if (std::abs(e.deriv) < 1e-300) break;
    const Complex full_step = (e.value - u) / e.deriv;
    double t = 1.0;
    bool moved = false;
    for (int bt = 0; bt < 50; ++bt, t *= 0.5) {
      const Complex xc = x - t * full_step;
      const PsiEval ec = psi_on_grid(h, xc);
      if (!ec.valid) continue;
      const double fc = std::abs(ec.value - u);
      if (fc < f) {
        x = xc;
        e = ec;
        f = fc;
        moved = true;
        break;
      }
    }
    if (!moved) break;
  }
  residual = f;
  root = x;
  return f <= tol;
}

// Branch-resolved closed-form psi of the exp-decay model,
//   psi(z) = z / sq(z),  sq(z)^2 = 1 - 2 gamma z + z^2 = (z - r1)(z - r2),
// with the branch fixed by sq(0) = 1 and sq(z) ~ -z at infinity (cut on
// [r1, r2]). Used only to pick the root of the chi quadratic.
inline Complex exp_decay_psi(double gamma, Complex z) {
  const double disc = std::sqrt(std::max(gamma * gamma - 1.0, 0.0));
  const double r1 = gamma - disc;
  const double r2 = gamma + disc;
  const Complex wz = 1.0 - 2.0 * gamma * z + z * z;
  const double theta = std::arg(z - r1) + std::arg(z - r2);
  const Complex sq = -std::sqrt(std::abs(wz)) * std::polar(1.0, 0.5 * theta);
  return z / sq;
}

// chi of the exp-decay model: the quadratic in 1/chi gives
// chi = 1/(gamma +- w), w^2 = gamma^2 - 1 + 1/u^2; the physical root is the
// one whose branch-resolved psi lands back on u.
inline Complex exp_decay_chi(double gamma, Complex u) {
  if (std::abs(u) <= 1e-9) {
    return u * (1.0 - gamma * u);
  }
  const Complex w = std::sqrt(Complex(gamma * gamma - 1.0, 0.0) + 1.0 / (u * u));
  const Complex candidates[2] = {1.0 / (gamma + w), 1.0 / (gamma - w)};
  Complex best = candidates[0];
  double best_err = std::numeric_limits<double>::infinity();
  for (const Complex& c : candidates) {
    const Complex val = exp_decay_psi(gamma, c);
    if (!std::isfinite(val.real()) || !std::isfinite(val.imag())) continue;
    const double err = std::abs(val - u);
    if (err < best_err) {
      best_err = err;
      best = c;
    }
  }
  if (!std::isfinite(best_err)) {
    throw NumericalError("chi: exp-decay branch selection failed");
  }
  return best;
}

[[noreturn]] inline void throw_inversion_error(Complex u, double residual) {
  std::ostringstream oss;
  oss << "chi: Newton continuation failed at u = (" << u.real() << ", " << u.imag()
      << "), last residual " << residual;
  throw NumericalError(oss.str());
}

// The grid psi is a rational function whose real cut is a forest of simple
// poles; psi(x) = u has spurious roots just above that forest which satisfy
// the residual test to machine precision. A Newton result is only trusted
// when it stays near its seed, so branch jumps into the forest are rejected.
inline bool near_seed(Complex root, Complex seed) {
  return std::abs(root - seed) <= 0.3 * (0.1 + std::abs(seed));
}

// Principal-branch chi for quadrature models: radial continuation along s*u
// from s = 0, where the root is unique, with scaled warm starts and the jump
// guard at every step. Past the fold where the continuum branch meets the
// real axis this tracks the grid branch into the pole forest, which is the
// correct inverse of the grid psi there.
inline Complex quadrature_chi_homotopy(const TransformContext& ctx, Complex u) {
  const std::vector<double>& h = ctx.grid();
  const double base_tol = ctx.newton_tol();
  const int max_iter = ctx.newton_max_iter();
  Complex root;
  double residual = std::numeric_limits<double>::infinity();
  double last_residual = residual;

  double s_prev = 0.0;
  Complex x_prev(0.0, 0.0);
  double step = 0.25;
  int budget = 500;
  while (s_prev < 1.0 && budget > 0) {
    const double s_new = std::min(1.0, s_prev + step);
    const Complex target = s_new * u;
    // The achievable |psi(x) - u| floor scales with the magnitudes in the
    // grid sum, so the acceptance gate is relative to |target|.
    const double tol = base_tol * (1.0 + std::abs(target));
    const Complex guess =
        s_prev > 0.0 ? x_prev * (s_new / s_prev) : target / (1.0 + target);
    bool ok = newton_psi_inverse(h, target, guess, tol, max_iter, root, residual) &&
              near_seed(root, guess);
    --budget;
    if (!ok && s_prev > 0.0 && budget > 0) {
      ok = newton_psi_inverse(h, target, x_prev, tol, max_iter, root, residual) &&
           near_seed(root, x_prev);
      --budget;
    }
    last_residual = residual;
    if (ok) {
      s_prev = s_new;
      x_prev = root;
      step = std::min(step * 2.0, 0.25);
    } else {
      step *= 0.5;
      if (step < 1e-7) break;
    }
  }
  if (s_prev >= 1.0) return x_prev;
  throw_inversion_error(u, last_residual);
}

// Warm path: direct Newton from a caller seed (the neighbouring root in an
// eigenvalue sweep), accepted only under the jump guard; anything else goes
// through the full continuation.
inline Complex quadrature_chi(const TransformContext& ctx, Complex u, Complex seed,
                              bool trust_seed) {
  if (trust_seed) {
    Complex root;
    double residual = std::numeric_limits<double>::infinity();
    const double tol = ctx.newton_tol() * (1.0 + std::abs(u));
    if (newton_psi_inverse(ctx.grid(), u, seed, tol, ctx.newton_max_iter(), root, residual) &&
        near_seed(root, seed)) {
      return root;
    }
  }
  return quadrature_chi_homotopy(ctx, u);
}

// chi with an optional warm-start seed; shrink_correlated walks the sorted
// eigenvalues and seeds each u with the previous root.
inline Complex chi_seeded(const TransformContext& ctx, Complex u, Complex seed,
                          bool trust_seed) {
  if (u == Complex(0.0, 0.0)) return Complex(0.0, 0.0);
  if (u.imag() < 0.0) {
    return std::conj(chi_seeded(ctx, std::conj(u), std::conj(seed), trust_seed));
  }
  if (ctx.is_identity()) return u / (u + 1.0);
  if (ctx.is_exp_decay()) {
    // The closed form inverts the continuum psi; the contract is against the
    // grid psi, and the two agree only away from the pole forest (for u
    // outside the continuum image the closed root collapses onto the real
    // axis and no agreement is possible). Accept the closed form when it
    // meets the grid contract, else invert the grid like any VARMA model.
    const Complex closed = exp_decay_chi(ctx.gamma(), u);
    const PsiEval check = psi_on_grid(ctx.grid(), closed);
    if (check.valid && std::abs(check.value - u) <= ctx.newton_tol() * (1.0 + std::abs(u))) {
      return closed;
    }
    return quadrature_chi(ctx, u, seed, trust_seed);
  }
  if (std::abs(u) <= 1e-9) return u * (1.0 - ctx.second_moment() * u);
  return quadrature_chi(ctx, u, seed, trust_seed);
}

}  // namespace detail

/// psi(z) = E_w[zH/(1 - zH)] over the unit-mean spectral density; z/(1-z) for
/// Identity. Throws when z is within 1e-13 of a grid pole 1/H(w).
inline Complex psi(const TransformContext& ctx, Complex z) {
  if (ctx.is_identity()) {
    if (std::abs(1.0 - z) < 1e-13) {
      throw NumericalError("psi: z at the identity-model pole z = 1");
    }
    return z / (1.0 - z);
  }
  const detail::PsiEval e = detail::psi_on_grid(ctx.grid(), z);
  if (!e.valid) {
    throw NumericalError("psi: z within 1e-13 of a spectral-density pole");
  }
  return e.value;
}

/// Functional inverse of psi: psi(chi(u)) = u within ctx.newton_tol()
/// relative to 1 + |u|. chi(0) = 0; the lower half-plane goes through
/// conjugation symmetry.
inline Complex chi(const TransformContext& ctx, Complex u) {
  return detail::chi_seeded(ctx, u, u / (1.0 + u), /*trust_seed=*/false);
}

/// S(u) = ((1+u)/u) chi(u).
inline Complex s_transform(const TransformContext& ctx, Complex u) {
  if (u == Complex(0.0, 0.0) || u == Complex(-1.0, 0.0)) {
    throw std::invalid_argument("s_transform: u must avoid 0 and -1");
  }
  return (1.0 + u) / u * chi(ctx, u);
}

}  // namespace covshrink
