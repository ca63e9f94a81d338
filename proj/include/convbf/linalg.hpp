#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <string>

#include "convbf/errors.hpp"

namespace convbf {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

inline Matrix symmetrized(const Matrix& m) { return 0.5 * (m + m.transpose()); }

inline bool all_finite(const Vector& v) { return v.allFinite(); }

/// Relative asymmetry max|m - m^T| / max(1, max|m|).
inline double asymmetry(const Matrix& m) {
  if (m.rows() != m.cols()) return INFINITY;
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  return (m - m.transpose()).cwiseAbs().maxCoeff() / scale;
}

inline bool is_symmetric(const Matrix& m, double tol = 1e-10) { return asymmetry(m) <= tol; }

inline bool is_spd(const Matrix& m) {
  if (m.rows() != m.cols() || m.rows() == 0 || !m.allFinite()) return false;
  Eigen::LLT<Matrix> llt(m);
  return llt.info() == Eigen::Success;
}

/// Lower Cholesky factor. On failure adds 1e-9*I once and retries; a second
/// failure is a NumericalError.
inline Matrix repaired_cholesky(const Matrix& m, const char* what = "covariance") {
  if (!m.allFinite()) throw NumericalError(std::string(what) + " has non-finite entries");
  Eigen::LLT<Matrix> llt(m);
  if (llt.info() == Eigen::Success) return llt.matrixL();
  const Matrix jittered = m + 1e-9 * Matrix::Identity(m.rows(), m.cols());
  llt.compute(jittered);
  if (llt.info() == Eigen::Success) return llt.matrixL();
  throw NumericalError(std::string(what) + " is not positive definite");
}

/// Solves S X = B for SPD S, with the same repair policy.
inline Matrix spd_solve(const Matrix& s, const Matrix& b, const char* what = "innovation covariance") {
  const Matrix l = repaired_cholesky(s, what);
  const Matrix y = l.triangularView<Eigen::Lower>().solve(b);
  return l.transpose().triangularView<Eigen::Upper>().solve(y);
}

}  // namespace convbf
