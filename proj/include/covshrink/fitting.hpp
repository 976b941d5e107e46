#pragma once

// Data-driven selection of effective shrinkage parameters: brute-force grid
// search minimizing the mean squared distance between a candidate shrinkage
// curve and the CV-oracle eigenvalues. Nothing here ever sees the true C.

#include <cmath>
#include <limits>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "covshrink/errors.hpp"
#include "covshrink/oracle.hpp"
#include "covshrink/shrinkage.hpp"
#include "covshrink/transforms.hpp"

namespace covshrink {

struct ExpDecayTau {
  std::vector<double> grid;
};

struct EffectiveTau {
  std::vector<double> grid;
};

// One grid per coefficient; candidates are the cartesian product with the
// MA coefficients (a_0, a_1, ...) as the leading lexicographic coordinates.
struct VarmaGrid {
  std::vector<std::vector<double>> ar_grids;
  std::vector<std::vector<double>> ma_grids;
};

using FitFamily = std::variant<ExpDecayTau, EffectiveTau, VarmaGrid>;

struct FitSpec {
  FitFamily family;
  OracleResult objective_ref;
};

using LabeledParams = std::vector<std::pair<std::string, double>>;

struct FitResult {
  LabeledParams best_params;
  double objective = std::numeric_limits<double>::infinity();
  std::size_t evaluations = 0;
  std::vector<std::pair<LabeledParams, double>> trace;
};

/// 60 log-spaced points in [0.05, 20], the default tau grid for both the
/// exp-decay and effective-T families.
inline std::vector<double> default_tau_grid() {
  const int points = 60;
  const double lo = std::log(0.05);
  const double hi = std::log(20.0);
  std::vector<double> grid(points);
  for (int i = 0; i < points; ++i) {
    grid[i] = std::exp(lo + (hi - lo) * double(i) / double(points - 1));
  }
  return grid;
}

/// Coarse VARMA(1,1) default: a_0 in {0.5..1.0}, a_1 and b_1 in {0.0..0.6},
/// all in steps of 0.1.
inline VarmaGrid default_varma_grid() {
  auto steps = [](double lo, double hi) {
    std::vector<double> g;
    for (int i = 0; lo + 0.1 * i <= hi + 1e-9; ++i) {
      g.push_back(lo + 0.1 * i);
    }
    return g;
  };
  VarmaGrid grid;
  grid.ma_grids = {steps(0.5, 1.0), steps(0.0, 0.6)};
  grid.ar_grids = {steps(0.0, 0.6)};
  return grid;
}

namespace detail {

// quadrature resolution for candidate evaluation; coarser than the default
// context because the fit loop builds one context per grid point
constexpr int kFitQuadraturePoints = 1 << 12;

inline void validate_tau_grid(const std::vector<double>& grid, const char* who) {
  if (grid.empty()) {
    throw std::invalid_argument(std::string(who) + ": empty tau grid");
  }
  for (double tau : grid) {
    if (!(tau > 0.0) || !std::isfinite(tau)) {
      throw std::invalid_argument(std::string(who) + ": tau grid values must be positive and finite");
    }
  }
}

inline void validate_coeff_grids(const std::vector<std::vector<double>>& grids, const char* who) {
  for (const auto& g : grids) {
    if (g.empty()) {
      throw std::invalid_argument(std::string(who) + ": empty coefficient grid");
    }
    for (double v : g) {
      if (!std::isfinite(v)) {
        throw std::invalid_argument(std::string(who) + ": coefficient grids must be finite");
      }
    }
  }
}

inline double fit_objective(const Vector& xi, const Vector& xi_ref) {
  double acc = 0.0;
  for (Index i = 0; i < xi.size(); ++i) {
    const double d = xi[i] - xi_ref[i];
    acc += d * d;
  }
  const double obj = acc / double(xi.size());
  return std::isfinite(obj) ? obj : std::numeric_limits<double>::infinity();
}

}  // namespace detail

/// Exhaustive grid search. Candidates are scored by the mean squared
/// deviation of the shrinkage curve from the raw CV-oracle eigenvalues;
/// failed evaluations score infinity, and ties go to the lexicographically
/// smallest parameter vector (the iteration order). Throws when every grid
/// point fails.
inline FitResult fit_shrinkage_params(const SpectralEstimate& spec_data, double q,
                                      const FitSpec& fit) {
  const Index n = spec_data.lambdas.size();
  if (fit.objective_ref.xi_raw.size() != n) {
    throw std::invalid_argument("fit_shrinkage_params: oracle has " +
                                std::to_string(fit.objective_ref.xi_raw.size()) +
                                " entries but the spectrum has " + std::to_string(n));
  }
  if (!(q > 0.0) || !std::isfinite(q)) {
    throw std::invalid_argument("fit_shrinkage_params: q must be positive and finite");
  }
  const Vector& xi_ref = fit.objective_ref.xi_raw;

  FitResult result;
  auto consider = [&](LabeledParams params, double objective) {
    result.trace.emplace_back(std::move(params), objective);
    result.evaluations += 1;
    if (objective < result.objective) {
      result.objective = objective;
      result.best_params = result.trace.back().first;
    }
  };

  if (const auto* family = std::get_if<ExpDecayTau>(&fit.family)) {
    detail::validate_tau_grid(family->grid, "fit_shrinkage_params");
    for (double tau : family->grid) {
      double objective = std::numeric_limits<double>::infinity();
      try {
        const TransformContext ctx(ExpDecay{tau}, detail::kFitQuadraturePoints);
        objective = detail::fit_objective(shrink_correlated(spec_data, q, ctx), xi_ref);
      } catch (const NumericalError&) {
      } catch (const std::invalid_argument&) {
      }
      consider({{"tau", tau}}, objective);
    }
  } else if (const auto* family = std::get_if<EffectiveTau>(&fit.family)) {
    detail::validate_tau_grid(family->grid, "fit_shrinkage_params");
    const Index t = static_cast<Index>(std::llround(double(n) / q));
    for (double tau : family->grid) {
      double objective = std::numeric_limits<double>::infinity();
      try {
        objective = detail::fit_objective(shrink_lp_effective(spec_data, n, t, tau), xi_ref);
      } catch (const NumericalError&) {
      } catch (const std::invalid_argument&) {
      }
      consider({{"tau_eff", tau}}, objective);
    }
  } else {
    const auto& family_ref = std::get<VarmaGrid>(fit.family);
    detail::validate_coeff_grids(family_ref.ma_grids, "fit_shrinkage_params");
    detail::validate_coeff_grids(family_ref.ar_grids, "fit_shrinkage_params");
    const std::size_t n_ma = family_ref.ma_grids.size();
    const std::size_t n_ar = family_ref.ar_grids.size();
    // odometer over the cartesian product, MA digits leading so the visit
    // order is lexicographic in (a_0, ..., b_1, ...)
    std::vector<std::size_t> digit(n_ma + n_ar, 0);
    bool done = false;
    while (!done) {
      Varma candidate;
      LabeledParams params;
      for (std::size_t j = 0; j < n_ma; ++j) {
        const double v = family_ref.ma_grids[j][digit[j]];
        candidate.ma.push_back(v);
        params.emplace_back("a" + std::to_string(j), v);
      }
      for (std::size_t j = 0; j < n_ar; ++j) {
        const double v = family_ref.ar_grids[j][digit[n_ma + j]];
        candidate.ar.push_back(v);
        params.emplace_back("b" + std::to_string(j + 1), v);
      }
      double objective = std::numeric_limits<double>::infinity();
      try {
        const TransformContext ctx(candidate, detail::kFitQuadraturePoints);
        objective = detail::fit_objective(shrink_correlated(spec_data, q, ctx), xi_ref);
      } catch (const NumericalError&) {
      } catch (const std::invalid_argument&) {
      }
      consider(std::move(params), objective);
      // increment, least significant digit last
      std::size_t pos = digit.size();
      while (pos > 0) {
        --pos;
        const std::size_t radix = pos < n_ma ? family_ref.ma_grids[pos].size()
                                             : family_ref.ar_grids[pos - n_ma].size();
        if (++digit[pos] < radix) {
          break;
        }
        digit[pos] = 0;
        if (pos == 0) {
          done = true;
        }
      }
    }
  }

  if (!std::isfinite(result.objective)) {
    throw NumericalError("fit_shrinkage_params: every grid point failed to evaluate");
  }
  return result;
}

}  // namespace covshrink
