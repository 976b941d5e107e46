#pragma once

// Reference shrinkage targets: the exact oracle (needs the true C), the
// moving-window cross-validation oracle (data only), and isotonic regression
// over the CV estimates.

#include <string>
#include <vector>

#include "covshrink/errors.hpp"
#include "covshrink/linalg.hpp"

namespace covshrink {

// Moving-window CV layout: fold mu in {0..K-1} trains on the T = t_train
// columns starting at mu*t_out and tests on the t_out columns right after,
// so the data must span at least t_train + k_folds*t_out columns. Windows
// are time-ordered by construction; there is no shuffling.
struct CvConfig {
  int k_folds = 10;
  Index t_out = 50;
  Index t_train = 0;
};

struct OracleResult {
  Vector xi_raw;       // per ascending rank, averaged over folds
  Vector xi_isotonic;  // nondecreasing fit to xi_raw
  Vector lambdas_ref;  // analysis-window eigenvalues the ranks pair with
};

namespace detail {

inline void validate_cv(const CvConfig& cfg, Index t_total, const char* who) {
  if (cfg.k_folds < 1 || cfg.t_out < 1 || cfg.t_train < 1) {
    throw std::invalid_argument(std::string(who) +
                                ": k_folds, t_out, t_train must all be >= 1");
  }
  const Index needed = cfg.t_train + static_cast<Index>(cfg.k_folds) * cfg.t_out;
  if (t_total < needed) {
    throw std::invalid_argument(std::string(who) + ": " + std::to_string(cfg.k_folds) +
                                " folds of " + std::to_string(cfg.t_out) + " after " +
                                std::to_string(cfg.t_train) + " train columns need " +
                                std::to_string(needed) + " total, got " +
                                std::to_string(t_total));
  }
}

}  // namespace detail

/// Exact oracle xi_i = v_i^T C v_i for each sample eigenvector v_i. Needs the
/// true C, so it exists only inside synthetic experiments.
inline Vector oracle_exact(const SymEig& eig_sample, const Matrix& c_true) {
  detail::require_square_finite(c_true, "oracle_exact");
  detail::require_symmetric(c_true, "oracle_exact");
  if (c_true.rows() != eig_sample.vectors.rows()) {
    throw std::invalid_argument("oracle_exact: C is " + std::to_string(c_true.rows()) +
                                "-dimensional but the eigenvectors have " +
                                std::to_string(eig_sample.vectors.rows()) + " rows");
  }
  const Index n = eig_sample.vectors.cols();
  const Matrix cv = c_true * eig_sample.vectors;
  Vector xi(n);
  for (Index i = 0; i < n; ++i) {
    xi[i] = eig_sample.vectors.col(i).dot(cv.col(i));
  }
  return xi;
}

/// Moving-window cross-validation oracle. Fold mu eigendecomposes the train
/// window, scores each eigenvector against the test-window covariance
/// E_test = (1/t_out) Y_test Y_test^T, and contributions are averaged per
/// ascending train-eigenvalue rank, mu = 0..K-1 in order.
inline Vector oracle_mwcv(const Matrix& y, const CvConfig& cfg) {
  if (y.rows() < 1 || y.cols() < 1 || !y.allFinite()) {
    throw std::invalid_argument("oracle_mwcv: data matrix must be non-empty and finite");
  }
  detail::validate_cv(cfg, y.cols(), "oracle_mwcv");
  const Index n = y.rows();
  Vector xi = Vector::Zero(n);
  for (int mu = 0; mu < cfg.k_folds; ++mu) {
    const Index train_start = static_cast<Index>(mu) * cfg.t_out;
    const Matrix y_train = y.middleCols(train_start, cfg.t_train);
    const Matrix y_test = y.middleCols(train_start + cfg.t_train, cfg.t_out);
    const SymEig eig = sym_eig((y_train * y_train.transpose()) / double(cfg.t_train));
    // xi_i += v_i^T E_test v_i without forming E_test
    const Matrix w = y_test.transpose() * eig.vectors;
    xi += w.colwise().squaredNorm().transpose() / double(cfg.t_out);
  }
  return xi / double(cfg.k_folds);
}

/// Least-squares nondecreasing fit by pool-adjacent-violators, equal weights.
/// lambdas only fixes the rank order the fit is monotone in; it must already
/// be ascending. Idempotent.
inline Vector isotonic_fit(const Vector& xi_raw, const Vector& lambdas) {
  const Index n = xi_raw.size();
  if (lambdas.size() != n) {
    throw std::invalid_argument("isotonic_fit: xi has length " + std::to_string(n) +
                                " but lambdas has length " + std::to_string(lambdas.size()));
  }
  for (Index i = 1; i < n; ++i) {
    if (lambdas[i] < lambdas[i - 1]) {
      throw std::invalid_argument("isotonic_fit: lambdas must be ascending");
    }
  }
  // blocks of pooled entries, each carrying its running mean
  std::vector<double> mean;
  std::vector<Index> count;
  mean.reserve(n);
  count.reserve(n);
  for (Index i = 0; i < n; ++i) {
    mean.push_back(xi_raw[i]);
    count.push_back(1);
    while (mean.size() > 1 && mean[mean.size() - 2] > mean.back()) {
      const double tail_mean = mean.back();
      const Index tail_count = count.back();
      mean.pop_back();
      count.pop_back();
      mean.back() = (mean.back() * double(count.back()) + tail_mean * double(tail_count)) /
                    double(count.back() + tail_count);
      count.back() += tail_count;
    }
  }
  Vector out(n);
  Index pos = 0;
  for (std::size_t b = 0; b < mean.size(); ++b) {
    for (Index k = 0; k < count[b]; ++k) {
      out[pos++] = mean[b];
    }
  }
  return out;
}

/// Full CV-oracle bundle: analysis-window eigenvalues (first t_train columns),
/// rank-paired raw CV estimates, and their isotonic fit.
inline OracleResult oracle_cv(const Matrix& y, const CvConfig& cfg) {
  detail::validate_cv(cfg, y.cols(), "oracle_cv");
  const Matrix y_an = y.leftCols(cfg.t_train);
  const SymEig eig = sym_eig((y_an * y_an.transpose()) / double(cfg.t_train));
  OracleResult result;
  result.lambdas_ref = eig.values;
  result.xi_raw = oracle_mwcv(y, cfg);
  result.xi_isotonic = isotonic_fit(result.xi_raw, result.lambdas_ref);
  return result;
}

}  // namespace covshrink
