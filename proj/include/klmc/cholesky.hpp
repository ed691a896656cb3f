#pragma once

#include <Eigen/Dense>
#include <cmath>

#include "klmc/errors.hpp"

namespace klmc {

/// Lower-triangular factor L with L L^T = sigma.
///
/// The factorization runs on the correlation-scaled matrix D^-1 sigma D^-1
/// with D = diag(sqrt(sigma_ii)), which keeps the pivots well conditioned even
/// when the diagonal spans many orders of magnitude (the 4x4 step-noise
/// covariance has eigenvalues from ~h to ~h^7). Pivots in [-tol, 0] are
/// clipped to zero; anything below -tol signals IndefiniteMatrix.
///
/// The unblocked left-looking loop guarantees that the factor of a leading
/// principal block equals the leading block of the full factor bit-for-bit,
/// which the KLMC/KLMC2 noise-coupling contract relies on.
inline Eigen::MatrixXd chol_factor(const Eigen::MatrixXd& sigma) {
  const Eigen::Index n = sigma.rows();
  if (sigma.cols() != n) throw std::invalid_argument("chol_factor: matrix not square");

  Eigen::VectorXd scale(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double d = sigma(i, i);
    if (d < 0.0 && d < -1e-13 * std::abs(sigma.trace()))
      throw IndefiniteMatrix("chol_factor: negative diagonal entry");
    scale(i) = d > 0.0 ? std::sqrt(d) : 0.0;
  }

  const double tol = 1e-13 * static_cast<double>(n);
  Eigen::MatrixXd L = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    if (scale(j) == 0.0) continue;  // identically-zero row/column
    double diag = 1.0;  // correlation matrix has unit diagonal
    for (Eigen::Index k = 0; k < j; ++k) diag -= L(j, k) * L(j, k);
    if (diag < -tol) throw IndefiniteMatrix("chol_factor: matrix is indefinite");
    const double pivot = diag > 0.0 ? std::sqrt(diag) : 0.0;
    L(j, j) = pivot;
    for (Eigen::Index i = j + 1; i < n; ++i) {
      if (scale(i) == 0.0) continue;
      double cij = sigma(i, j) / (scale(i) * scale(j));
      for (Eigen::Index k = 0; k < j; ++k) cij -= L(i, k) * L(j, k);
      L(i, j) = pivot > 0.0 ? cij / pivot : 0.0;
    }
  }
  for (Eigen::Index i = 0; i < n; ++i) L.row(i) *= scale(i);
  return L;
}

}  // namespace klmc
