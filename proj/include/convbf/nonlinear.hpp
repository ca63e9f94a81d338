#pragma once

// Gaussian-approximation filters for nonlinear models: EKF, iterated EKF,
// UKF and a Huber UKF. The convolutional variants are these same filters
// run with inflated Q_eff / R_eff (see conv_noise below).

#include <cmath>
#include <string>
#include <vector>

#include "convbf/convolution.hpp"
#include "convbf/errors.hpp"
#include "convbf/kalman.hpp"
#include "convbf/linalg.hpp"
#include "convbf/models.hpp"

namespace convbf {

/// Effective Gaussian covariance of a nominal noise spec after convolution
/// with an exponential threshold. Non-Gaussian specs contribute their second
/// moment.
inline Matrix conv_noise(const NoiseSpec& nominal, const ExponentialThreshold& threshold) {
  return gaussian_conv_closed_form(noise_covariance(nominal), threshold);
}

inline GaussianBelief ekf_predict(const GaussianBelief& belief, const StateSpaceModel& model, const Matrix& q_eff) {
  detail::require_shape(q_eff, model.state_dim, model.state_dim, "ekf_predict Q");
  detail::require_shape(belief.covariance, model.state_dim, model.state_dim, "ekf_predict covariance");
  const Matrix f = model.transition_jacobian(belief.mean);
  return {model.transition_fn(belief.mean), symmetrized(f * belief.covariance * f.transpose() + q_eff)};
}

namespace detail {

/// KF update of `prior` with the measurement linearized at `point`:
/// y ≈ g(point) + G (x - point).
inline GaussianBelief linearized_update(const GaussianBelief& prior, const StateSpaceModel& model, const Matrix& r_eff,
                                        const Vector& y, const Vector& point) {
  const Matrix g = model.measurement_jacobian(point);
  const Vector shifted = y - model.measurement_fn(point) + g * point;
  return kf_update(prior, g, r_eff, shifted);
}

}  // namespace detail

inline GaussianBelief ekf_update(const GaussianBelief& belief, const StateSpaceModel& model, const Matrix& r_eff,
                                 const Vector& y) {
  detail::require_shape(r_eff, model.meas_dim, model.meas_dim, "ekf_update R");
  if (y.size() != model.meas_dim) throw InputError("ekf_update: measurement dimension mismatch");
  return detail::linearized_update(belief, model, r_eff, y, belief.mean);
}

struct IteratedResult {
  GaussianBelief belief;
  bool converged = false;
  int iterations = 0;
};

/// Gauss-Newton iterated EKF update. Each pass relinearizes g at the latest
/// posterior mean and redoes the update from the prior.
inline IteratedResult iekf_update(const GaussianBelief& belief, const StateSpaceModel& model, const Matrix& r_eff,
                                  const Vector& y, int max_iters = 10, double tol = 1e-8) {
  if (max_iters < 1) throw InputError("iekf_update: max_iters must be at least 1");
  detail::require_shape(r_eff, model.meas_dim, model.meas_dim, "iekf_update R");
  if (y.size() != model.meas_dim) throw InputError("iekf_update: measurement dimension mismatch");

  IteratedResult out{belief, false, 0};
  Vector point = belief.mean;
  for (int it = 1; it <= max_iters; ++it) {
    out.belief = detail::linearized_update(belief, model, r_eff, y, point);
    out.iterations = it;
    const double change = (out.belief.mean - point).norm();
    point = out.belief.mean;
    if (change < tol) {
      out.converged = true;
      break;
    }
  }
  return out;
}

/// Scaled unscented transform parameters: spread a_ut, prior knowledge b_ut
/// (2 is optimal for Gaussians), secondary scaling k_ut.
struct UnscentedParams {
  double spread = 1e-3;
  double prior_knowledge = 2.0;
  double secondary = 0.0;

  double lambda(Eigen::Index n) const {
    const double nd = static_cast<double>(n);
    return spread * spread * (nd + secondary) - nd;
  }

  void check(Eigen::Index n) const {
    if (!(static_cast<double>(n) + lambda(n) > 0.0)) {
      throw InputError("UnscentedParams: n + lambda must be positive for n = " + std::to_string(n));
    }
  }
};

struct SigmaSet {
  /// Columns are the 2n+1 sigma points; column 0 is the mean.
  Matrix points;
  Vector mean_weights;
  Vector cov_weights;

  Eigen::Index size() const { return points.cols(); }
};

inline SigmaSet sigma_points(const GaussianBelief& belief, const UnscentedParams& params) {
  const auto n = belief.dim();
  params.check(n);
  const double lambda = params.lambda(n);
  const double c = static_cast<double>(n) + lambda;
  const Matrix root = repaired_cholesky(c * belief.covariance, "sigma-point covariance");

  SigmaSet s;
  s.points.resize(n, 2 * n + 1);
  s.points.col(0) = belief.mean;
  for (Eigen::Index i = 0; i < n; ++i) {
    s.points.col(1 + i) = belief.mean + root.col(i);
    s.points.col(1 + n + i) = belief.mean - root.col(i);
  }
  s.mean_weights = Vector::Constant(2 * n + 1, 0.5 / c);
  s.cov_weights = s.mean_weights;
  s.mean_weights(0) = lambda / c;
  s.cov_weights(0) = lambda / c + (1.0 - params.spread * params.spread + params.prior_knowledge);
  return s;
}

struct UnscentedMoments {
  Vector mean;
  Matrix covariance;
  /// Propagated points, one per column.
  Matrix images;
};

/// Mean and covariance of fn(X) under the sigma set. The mean is accumulated
/// relative to the central image, which keeps the large negative central
/// weight of small-spread transforms from cancelling precision away.
inline UnscentedMoments unscented_transform(const SigmaSet& s, const VectorFn& fn) {
  const Vector first = fn(s.points.col(0));
  UnscentedMoments out;
  out.images.resize(first.size(), s.size());
  out.images.col(0) = first;
  for (Eigen::Index i = 1; i < s.size(); ++i) out.images.col(i) = fn(s.points.col(i));

  Vector offset = Vector::Zero(first.size());
  for (Eigen::Index i = 1; i < s.size(); ++i) offset += s.mean_weights(i) * (out.images.col(i) - first);
  out.mean = first + offset;

  out.covariance = Matrix::Zero(first.size(), first.size());
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    const Vector d = out.images.col(i) - out.mean;
    out.covariance += s.cov_weights(i) * d * d.transpose();
  }
  out.covariance = symmetrized(out.covariance);
  return out;
}

inline GaussianBelief ukf_predict(const GaussianBelief& belief, const StateSpaceModel& model, const Matrix& q_eff,
                                  const UnscentedParams& params = {}) {
  detail::require_shape(q_eff, model.state_dim, model.state_dim, "ukf_predict Q");
  const UnscentedMoments m = unscented_transform(sigma_points(belief, params), model.transition_fn);
  return {m.mean, symmetrized(m.covariance + q_eff)};
}

/// Predicted measurement statistics of a prior belief.
struct MeasurementMoments {
  Vector predicted;
  /// Innovation covariance S (includes R_eff).
  Matrix innovation_cov;
  /// State-measurement cross covariance.
  Matrix cross_cov;
};

inline MeasurementMoments unscented_measurement(const GaussianBelief& prior, const StateSpaceModel& model,
                                                const Matrix& r_eff, const UnscentedParams& params) {
  detail::require_shape(r_eff, model.meas_dim, model.meas_dim, "ukf_update R");
  const SigmaSet s = sigma_points(prior, params);
  const UnscentedMoments m = unscented_transform(s, model.measurement_fn);
  Matrix cross = Matrix::Zero(model.state_dim, model.meas_dim);
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    cross += s.cov_weights(i) * (s.points.col(i) - prior.mean) * (m.images.col(i) - m.mean).transpose();
  }
  return {m.mean, symmetrized(m.covariance + r_eff), cross};
}

inline GaussianBelief ukf_update(const GaussianBelief& prior, const StateSpaceModel& model, const Matrix& r_eff,
                                 const Vector& y, const UnscentedParams& params = {}) {
  if (y.size() != model.meas_dim) throw InputError("ukf_update: measurement dimension mismatch");
  const MeasurementMoments mm = unscented_measurement(prior, model, r_eff, params);
  // K = Pxy S^-1.
  const Matrix gain = spd_solve(mm.innovation_cov, mm.cross_cov.transpose()).transpose();
  GaussianBelief post{prior.mean + gain * (y - mm.predicted),
                      symmetrized(prior.covariance - gain * mm.innovation_cov * gain.transpose())};
  repaired_cholesky(post.covariance, "UKF posterior covariance");
  return post;
}

inline GaussianBelief ukf_step(const GaussianBelief& belief, const StateSpaceModel& model, const Matrix& q_eff,
                               const Matrix& r_eff, const Vector& y, const UnscentedParams& params = {}) {
  return ukf_update(ukf_predict(belief, model, q_eff, params), model, r_eff, y, params);
}

/// Huber UKF update. The sigma points give a statistically linearized
/// measurement y ≈ b + H x with H = Pxy^T P^-1; the linearization error joins
/// R_eff so that the quadratic case reproduces ukf_update. The Huber IRLS of
/// huber_kf_update then runs on that linear model.
inline HuberResult huber_ukf_update(const GaussianBelief& prior, const StateSpaceModel& model, const Matrix& r_eff,
                                    const Vector& y, double delta = 1.345, const UnscentedParams& params = {}) {
  if (!(delta > 0.0)) throw InputError("huber_ukf_update: delta must be positive");
  if (y.size() != model.meas_dim) throw InputError("huber_ukf_update: measurement dimension mismatch");
  const MeasurementMoments mm = unscented_measurement(prior, model, r_eff, params);
  const Matrix h = spd_solve(prior.covariance, mm.cross_cov, "prior covariance").transpose();
  const Vector offset = mm.predicted - h * prior.mean;
  Matrix r_total = symmetrized(mm.innovation_cov - h * prior.covariance * h.transpose());
  if (!is_spd(r_total)) r_total = r_eff;
  return huber_kf_update(prior, h, r_total, y - offset, delta);
}

}  // namespace convbf
