#pragma once

// Dense symmetric-matrix primitives shared by every other header:
// eigendecomposition, PSD square root, spectral reconstruction.

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

#include "covshrink/errors.hpp"

namespace covshrink {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

// Eigenpairs of a symmetric matrix, eigenvalues ascending, eigenvectors in
// the matching column order and orthonormal.
struct SymEig {
  Vector values;
  Matrix vectors;
};

namespace detail {

inline void require_square_finite(const Matrix& m, const char* who) {
  if (m.rows() < 1 || m.cols() != m.rows()) {
    throw std::invalid_argument(std::string(who) + ": matrix must be square and non-empty, got " +
                                std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
  }
  if (!m.allFinite()) {
    throw std::invalid_argument(std::string(who) + ": matrix has non-finite entries");
  }
}

inline void require_symmetric(const Matrix& m, const char* who, double tol = 1e-8) {
  const double asym = (m - m.transpose()).cwiseAbs().maxCoeff();
  if (asym >= tol) {
    throw std::invalid_argument(std::string(who) + ": matrix is asymmetric by " +
                                std::to_string(asym));
  }
}

}  // namespace detail

/// Symmetric eigendecomposition with ascending eigenvalues.
/// The input must be square, finite, and symmetric to within 1e-8 max-abs;
/// it is symmetrized before solving so results do not depend on which
/// triangle carries roundoff.
inline SymEig sym_eig(const Matrix& m) {
  detail::require_square_finite(m, "sym_eig");
  detail::require_symmetric(m, "sym_eig");
  const Matrix sym = 0.5 * (m + m.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> solver(sym);
  if (solver.info() != Eigen::Success) {
    throw NumericalError("sym_eig: eigensolver failed to converge");
  }
  return SymEig{solver.eigenvalues(), solver.eigenvectors()};
}

/// Spectral reconstruction sum_i values[i] * v_i v_i^T. The columns of
/// eig_vectors are assumed orthonormal (callers obtain them from sym_eig);
/// only dimensions and finiteness are revalidated here.
inline Matrix reconstruct(const Matrix& eig_vectors, const Vector& new_values) {
  detail::require_square_finite(eig_vectors, "reconstruct");
  if (new_values.size() != eig_vectors.cols()) {
    throw std::invalid_argument("reconstruct: value count " + std::to_string(new_values.size()) +
                                " does not match vector count " +
                                std::to_string(eig_vectors.cols()));
  }
  if (!new_values.allFinite()) {
    throw std::invalid_argument("reconstruct: non-finite values");
  }
  Matrix r = eig_vectors * new_values.asDiagonal() * eig_vectors.transpose();
  // kill asymmetric roundoff so downstream symmetry checks are exact
  return 0.5 * (r + r.transpose());
}

/// Symmetric PSD square root via eigendecomposition. Eigenvalues in
/// [-1e-10 * max eigenvalue, 0] are treated as sampling noise and clipped
/// to 0; anything more negative is a genuine PSD violation.
inline Matrix psd_sqrt(const Matrix& m) {
  SymEig eig = sym_eig(m);
  const double scale = eig.values.cwiseAbs().maxCoeff();
  if (scale == 0.0) {
    return Matrix::Zero(m.rows(), m.cols());
  }
  const double tol = 1e-10 * scale;
  if (eig.values.minCoeff() < -tol) {
    throw std::invalid_argument("psd_sqrt: matrix is not PSD, min eigenvalue " +
                                std::to_string(eig.values.minCoeff()));
  }
  const Vector roots = eig.values.cwiseMax(0.0).cwiseSqrt();
  return reconstruct(eig.vectors, roots);
}

}  // namespace covshrink
