#pragma once

// Linear-Gaussian filtering: KF, the convolutional KF (noise covariances
// inflated by 1/(2 rate)), and a Huber-robustified update.

#include <cmath>
#include <string>
#include <utility>

#include "convbf/convolution.hpp"
#include "convbf/distributions.hpp"
#include "convbf/errors.hpp"
#include "convbf/linalg.hpp"

namespace convbf {

struct GaussianBelief {
  Vector mean;
  Matrix covariance;

  GaussianBelief() = default;
  GaussianBelief(Vector m, Matrix p) : mean(std::move(m)), covariance(std::move(p)) {}
  explicit GaussianBelief(const GaussianSpec& spec) : mean(spec.mean()), covariance(spec.covariance()) {}

  Eigen::Index dim() const { return mean.size(); }

  friend bool operator==(const GaussianBelief& a, const GaussianBelief& b) {
    return a.mean == b.mean && a.covariance == b.covariance;
  }
};

/// Thresholds for transition (alpha) and measurement (beta) mismatch.
struct ConvConfig {
  ExponentialThreshold alpha = ExponentialThreshold::disabled();
  ExponentialThreshold beta = ExponentialThreshold::disabled();
};

namespace detail {

inline void require_shape(const Matrix& m, Eigen::Index rows, Eigen::Index cols, const char* what) {
  if (m.rows() != rows || m.cols() != cols) {
    throw InputError(std::string(what) + ": expected " + std::to_string(rows) + "x" + std::to_string(cols) +
                     ", got " + std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
  }
}

}  // namespace detail

inline GaussianBelief kf_predict(const GaussianBelief& belief, const Matrix& a, const Matrix& q) {
  const auto n = belief.dim();
  detail::require_shape(belief.covariance, n, n, "kf_predict covariance");
  detail::require_shape(a, n, n, "kf_predict A");
  detail::require_shape(q, n, n, "kf_predict Q");
  return {a * belief.mean, symmetrized(a * belief.covariance * a.transpose() + q)};
}

/// Joseph-form measurement update.
inline GaussianBelief kf_update(const GaussianBelief& belief, const Matrix& c, const Matrix& r, const Vector& y) {
  const auto n = belief.dim();
  const auto m = y.size();
  detail::require_shape(belief.covariance, n, n, "kf_update covariance");
  detail::require_shape(c, m, n, "kf_update C");
  detail::require_shape(r, m, m, "kf_update R");

  const Matrix& p = belief.covariance;
  const Vector innovation = y - c * belief.mean;
  const Matrix s = symmetrized(c * p * c.transpose() + r);
  // K = P C^T S^-1, computed as (S^-1 C P)^T.
  const Matrix gain = spd_solve(s, c * p).transpose();
  const Matrix ikc = Matrix::Identity(n, n) - gain * c;
  Matrix post = ikc * p * ikc.transpose() + gain * r * gain.transpose();
  return {belief.mean + gain * innovation, symmetrized(post)};
}

/// One ConvKF cycle: KF with Q and R replaced by their Gaussian convolutions.
inline GaussianBelief convkf_step(const GaussianBelief& belief, const Matrix& a, const Matrix& q, const Matrix& c,
                                  const Matrix& r, const Vector& y, const ConvConfig& cfg) {
  const GaussianBelief prior = kf_predict(belief, a, gaussian_conv_closed_form(q, cfg.alpha));
  return kf_update(prior, c, gaussian_conv_closed_form(r, cfg.beta), y);
}

struct HuberResult {
  GaussianBelief belief;
  bool converged = false;
  int iterations = 0;
};

/// Huber weight psi(r)/r.
inline double huber_weight(double standardized_residual, double delta) {
  const double a = std::abs(standardized_residual);
  return a <= delta ? 1.0 : delta / a;
}

/// Huber-robust update by iteratively reweighted least squares. Residuals are
/// standardized by R^{1/2} (lower Cholesky L) at the current estimate and
/// R is reweighted to L W^{-1} L^T before a Joseph-form update. Stops when the
/// mean moves less than 1e-8 or after 50 passes.
inline HuberResult huber_kf_update(const GaussianBelief& belief, const Matrix& c, const Matrix& r, const Vector& y,
                                   double delta = 1.345) {
  if (!(delta > 0.0)) throw InputError("huber_kf_update: delta must be positive");
  detail::require_shape(r, y.size(), y.size(), "huber_kf_update R");
  detail::require_shape(c, y.size(), belief.dim(), "huber_kf_update C");
  constexpr int max_iterations = 50;
  constexpr double tolerance = 1e-8;

  const Matrix l = repaired_cholesky(r, "measurement covariance");
  HuberResult out{belief, false, 0};
  Vector estimate = belief.mean;
  for (int it = 1; it <= max_iterations; ++it) {
    const Vector standardized = l.triangularView<Eigen::Lower>().solve(y - c * estimate);
    Vector inv_weights(y.size());
    for (Eigen::Index i = 0; i < y.size(); ++i) inv_weights(i) = 1.0 / huber_weight(standardized(i), delta);
    const Matrix reweighted = symmetrized(l * inv_weights.asDiagonal() * l.transpose());
    out.belief = kf_update(belief, c, reweighted, y);
    out.iterations = it;
    const double change = (out.belief.mean - estimate).norm();
    estimate = out.belief.mean;
    if (change < tolerance) {
      out.converged = true;
      break;
    }
  }
  return out;
}

}  // namespace convbf
