#pragma once

// Convolutional conditional probability of a 1-D base density:
//
//   p_c(y|x) ∝ ∫ (1 - F(d(y, z))) p(z|x) dz,   F the exponential-threshold CDF,
//
// evaluated by trapezoidal quadrature on a uniform grid and normalized over y
// on the same (truncated) grid. The closed form for the Gaussian/quadratic
// case adds 1/(2 rate) * I to the covariance.

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "convbf/distributions.hpp"
#include "convbf/errors.hpp"
#include "convbf/linalg.hpp"

namespace convbf {

enum class MetricKind { squared_euclidean, scaled_squared, kl_empirical };

struct DistanceMetric {
  MetricKind kind = MetricKind::squared_euclidean;
  /// sigma^2 for scaled_squared; ignored otherwise.
  double scale = 1.0;

  static DistanceMetric squared_euclidean() { return {MetricKind::squared_euclidean, 1.0}; }
  static DistanceMetric scaled_squared(double sigma2) {
    if (!(sigma2 > 0.0) || !std::isfinite(sigma2)) throw InputError("DistanceMetric: scale must be positive");
    return {MetricKind::scaled_squared, sigma2};
  }
  static DistanceMetric kl_empirical() { return {MetricKind::kl_empirical, 1.0}; }

  /// Divisor applied to |y - z|^2.
  double divisor() const { return kind == MetricKind::scaled_squared ? scale : 1.0; }
};

class Grid1D {
 public:
  Grid1D(double lo, double hi, std::size_t points) : lo_(lo), hi_(hi), points_(points) {
    if (!std::isfinite(lo) || !std::isfinite(hi) || !(lo < hi)) throw InputError("Grid1D: need lo < hi");
    if (points < 3) throw InputError("Grid1D: need at least 3 points");
  }

  double lo() const { return lo_; }
  double hi() const { return hi_; }
  std::size_t points() const { return points_; }
  double spacing() const { return (hi_ - lo_) / static_cast<double>(points_ - 1); }
  double at(std::size_t i) const { return lo_ + spacing() * static_cast<double>(i); }

 private:
  double lo_;
  double hi_;
  std::size_t points_;
};

/// Density values on a grid, normalized so that sum(values) * spacing == 1.
struct GridDensity {
  Grid1D grid;
  std::vector<double> values;
  /// Unnormalized grid mass divided by the analytic kernel integral; below
  /// 0.99 means the grid truncates the density.
  double captured_mass = 0.0;

  double mass() const {
    double acc = 0.0;
    for (double v : values) acc += v;
    return acc * grid.spacing();
  }
};

namespace detail {

inline double scalar_mean(const NoiseSpec& base) { return noise_mean(base)(0); }
inline double scalar_variance(const NoiseSpec& base) { return noise_covariance(base)(0, 0); }

inline void require_scalar(const NoiseSpec& base) {
  if (dimension(base) != 1) throw InputError("conv_density_quadrature: base density must be 1-D");
}

}  // namespace detail

/// Default grid: 4001 points over mean ± 10 combined standard deviations,
/// where the combined variance adds the kernel's own variance divisor/(2 rate).
inline Grid1D default_grid(const NoiseSpec& base, const DistanceMetric& metric,
                           const ExponentialThreshold& threshold, std::size_t points = 4001) {
  detail::require_scalar(base);
  double var = detail::scalar_variance(base);
  if (threshold.enabled()) var += metric.divisor() / (2.0 * threshold.rate());
  const double half = 10.0 * std::sqrt(var);
  const double mu = detail::scalar_mean(base);
  return {mu - half, mu + half, points};
}

inline GridDensity conv_density_quadrature(const NoiseSpec& base, const DistanceMetric& metric,
                                           const ExponentialThreshold& threshold, const Grid1D& grid) {
  detail::require_scalar(base);
  if (!threshold.enabled()) throw InputError("conv_density_quadrature: threshold must be enabled");
  if (metric.kind == MetricKind::kl_empirical) {
    throw InputError("conv_density_quadrature: kl_empirical metric is not evaluated on continuous spaces");
  }

  const std::size_t n = grid.points();
  const double h = grid.spacing();
  const double rate_over_div = threshold.rate() / metric.divisor();

  // Trapezoid weights times base density at each node z_j.
  std::vector<double> weighted_base(n);
  Vector z(1);
  for (std::size_t j = 0; j < n; ++j) {
    z(0) = grid.at(j);
    const double w = (j == 0 || j + 1 == n) ? 0.5 * h : h;
    weighted_base[j] = w * std::exp(log_density(base, z));
  }

  // Uniform grid: the kernel depends only on |i - j|.
  std::vector<double> kernel(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double diff = h * static_cast<double>(k);
    kernel[k] = std::exp(-rate_over_div * diff * diff);
  }

  std::vector<double> raw(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < n; ++j) acc += kernel[i > j ? i - j : j - i] * weighted_base[j];
    raw[i] = acc;
  }

  double raw_mass = 0.0;
  for (double v : raw) raw_mass += v;
  raw_mass *= h;

  // ∫ exp(-rate |u|^2 / divisor) du.
  const double kernel_integral = std::sqrt(std::numbers::pi / rate_over_div);
  const double captured = raw_mass / kernel_integral;
  if (!(captured >= 0.99)) {
    throw NumericalError("conv_density_quadrature: grid captures only " + std::to_string(captured) +
                         " of the mass; widen or refine the grid");
  }

  GridDensity out{grid, std::move(raw), captured};
  for (double& v : out.values) v /= raw_mass;
  return out;
}

/// Q + 1/(2 rate) * I; Q unchanged when the threshold is disabled.
inline Matrix gaussian_conv_closed_form(const Matrix& q, const ExponentialThreshold& threshold) {
  if (q.rows() != q.cols() || !is_symmetric(q, 1e-10) || !is_spd(q)) {
    throw InputError("gaussian_conv_closed_form: Q must be symmetric positive definite");
  }
  if (!threshold.enabled()) return q;
  return q + (0.5 / threshold.rate()) * Matrix::Identity(q.rows(), q.cols());
}

}  // namespace convbf
