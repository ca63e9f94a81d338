#pragma once

// Self-checks of the convolution machinery against closed forms, run by the
// `validate` CLI subcommand.

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "convbf/convolution.hpp"
#include "convbf/distributions.hpp"
#include "convbf/export.hpp"

namespace convbf {

struct CheckResult {
  std::string name;
  bool passed = false;
  double value = 0.0;
  double tolerance = 0.0;
};

namespace detail {

inline double normal_pdf(double x, double mean, double var) {
  const double d = x - mean;
  return std::exp(-0.5 * d * d / var) / std::sqrt(2.0 * std::numbers::pi * var);
}

inline double linf_against_normal(const GridDensity& d, double mean, double var) {
  double worst = 0.0;
  for (std::size_t i = 0; i < d.values.size(); ++i) {
    worst = std::max(worst, std::abs(d.values[i] - normal_pdf(d.grid.at(i), mean, var)));
  }
  return worst;
}

/// L∞ between the rescaled density and p^gamma normalized by the trapezoid
/// rule on `grid`.
inline double rescale_grid_error(const NoiseSpec& spec, const NoiseSpec& rescaled, double gamma, const Grid1D& grid) {
  std::vector<double> powered(grid.points());
  Vector x(1);
  double mass = 0.0;
  for (std::size_t i = 0; i < grid.points(); ++i) {
    x(0) = grid.at(i);
    powered[i] = std::exp(gamma * log_density(spec, x));
    const double w = (i == 0 || i + 1 == grid.points()) ? 0.5 : 1.0;
    mass += w * powered[i];
  }
  mass *= grid.spacing();
  double worst = 0.0;
  for (std::size_t i = 0; i < grid.points(); ++i) {
    x(0) = grid.at(i);
    worst = std::max(worst, std::abs(powered[i] / mass - std::exp(log_density(rescaled, x))));
  }
  return worst;
}

}  // namespace detail

inline std::vector<CheckResult> convolution_self_checks() {
  std::vector<CheckResult> out;
  const NoiseSpec base = GaussianSpec(Vector::Zero(1), Matrix::Identity(1, 1));

  for (double alpha : {0.05, 0.5, 5.0}) {
    const ExponentialThreshold t(alpha);
    const auto metric = DistanceMetric::squared_euclidean();
    const GridDensity d = conv_density_quadrature(base, metric, t, default_grid(base, metric, t));
    const double err = detail::linf_against_normal(d, 0.0, 1.0 + 0.5 / alpha);
    out.push_back({"quadrature matches Q + 1/(2 alpha), alpha=" + format_double(alpha), err <= 1e-6, err, 1e-6});
  }

  {
    const Grid1D grid(-10.0, 10.0, 4001);
    double previous = INFINITY;
    bool monotone = true;
    double last = 0.0;
    for (double sigma2 : {1.0, 1e-2, 1e-4, 1e-6}) {
      const GridDensity d =
          conv_density_quadrature(base, DistanceMetric::scaled_squared(sigma2), ExponentialThreshold(1.0), grid);
      last = detail::linf_against_normal(d, 0.0, 1.0);
      monotone = monotone && last <= previous;
      previous = last;
    }
    out.push_back({"limit sigma^2 -> 0 recovers base density (monotone)", monotone && last <= 1e-4, last, 1e-4});
  }

  for (double gamma : {0.1, 0.5, 0.9}) {
    const GaussianSpec g(Vector::Zero(1), Matrix::Identity(1, 1));
    const double sd = std::sqrt(1.0 / gamma);
    const double ge = detail::rescale_grid_error(g, rescale_exponential(g, gamma), gamma,
                                                 Grid1D(-12.0 * sd, 12.0 * sd, 4001));
    out.push_back({"gaussian rescaling, gamma=" + format_double(gamma), ge <= 1e-8, ge, 1e-8});

    const LaplaceSpec l(Vector::Zero(1), Vector::Ones(1));
    const double b = 1.0 / gamma;
    const double le = detail::rescale_grid_error(l, rescale_exponential(l, gamma), gamma,
                                                 Grid1D(-40.0 * b, 40.0 * b, 400001));
    out.push_back({"laplace rescaling, gamma=" + format_double(gamma), le <= 1e-8, le, 1e-8});
  }

  {
    const NoiseSpec lap = LaplaceSpec(Vector::Zero(1), Vector::Ones(1));
    const ExponentialThreshold t(1.0);
    const auto metric = DistanceMetric::squared_euclidean();
    const GridDensity d = conv_density_quadrature(lap, metric, t, default_grid(lap, metric, t));
    const double err = std::abs(d.mass() - 1.0);
    out.push_back({"laplace quadrature normalizes to 1", err <= 1e-8, err, 1e-8});
  }
  return out;
}

}  // namespace convbf
