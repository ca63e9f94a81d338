#pragma once

// Uncertain hidden Markov models with additive noise:
//
//   x_t = f(x_{t-1}) + xi_{t-1},   y_t = g(x_t) + zeta_t
//
// Filters see the nominal noise specs; simulation draws from the true ones.

#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "convbf/distributions.hpp"
#include "convbf/errors.hpp"
#include "convbf/linalg.hpp"
#include "convbf/random.hpp"

namespace convbf {

enum class MismatchCase { none, case_a_transition, case_b_measurement };

inline const char* to_string(MismatchCase c) {
  switch (c) {
    case MismatchCase::none: return "none";
    case MismatchCase::case_a_transition: return "a";
    case MismatchCase::case_b_measurement: return "b";
  }
  return "?";
}

using VectorFn = std::function<Vector(const Vector&)>;
using MatrixFn = std::function<Matrix(const Vector&)>;

struct StateSpaceModel {
  std::string name;
  Eigen::Index state_dim = 0;
  Eigen::Index meas_dim = 0;
  VectorFn transition_fn;
  MatrixFn transition_jacobian;
  VectorFn measurement_fn;
  MatrixFn measurement_jacobian;
  NoiseSpec nominal_process_noise = PointMass::zero(1);
  NoiseSpec nominal_meas_noise = PointMass::zero(1);
  NoiseSpec true_process_noise = PointMass::zero(1);
  NoiseSpec true_meas_noise = PointMass::zero(1);
  /// Gaussian initial distribution or a known point.
  std::variant<GaussianSpec, Vector> init = Vector();
  /// Constant A and C when the model is linear.
  std::optional<Matrix> linear_transition;
  std::optional<Matrix> linear_measurement;

  bool is_linear() const { return linear_transition.has_value() && linear_measurement.has_value(); }

  void validate() const {
    if (state_dim <= 0 || meas_dim <= 0) throw InputError(name + ": dimensions must be positive");
    if (!transition_fn || !transition_jacobian || !measurement_fn || !measurement_jacobian) {
      throw InputError(name + ": missing model function");
    }
    if (dimension(nominal_process_noise) != state_dim || dimension(true_process_noise) != state_dim) {
      throw InputError(name + ": process noise dimension must equal state dimension");
    }
    if (dimension(nominal_meas_noise) != meas_dim || dimension(true_meas_noise) != meas_dim) {
      throw InputError(name + ": measurement noise dimension must equal measurement dimension");
    }
    const auto init_dim = std::visit(
        [](const auto& i) -> Eigen::Index {
          if constexpr (std::is_same_v<std::decay_t<decltype(i)>, GaussianSpec>) {
            return i.dim();
          } else {
            return i.size();
          }
        },
        init);
    if (init_dim != state_dim) throw InputError(name + ": initial state dimension mismatch");
  }

  /// Belief handed to filters at t = 0. A point init gets covariance 1e-2 * I.
  GaussianSpec filter_prior() const {
    if (const auto* g = std::get_if<GaussianSpec>(&init)) return *g;
    return {std::get<Vector>(init), 1e-2 * Matrix::Identity(state_dim, state_dim)};
  }

  Vector draw_initial_state(Rng& rng) const {
    if (const auto* g = std::get_if<GaussianSpec>(&init)) return g->sample(rng);
    return std::get<Vector>(init);
  }
};

struct Trajectory {
  /// x_0 .. x_M.
  std::vector<Vector> states;
  /// y_1 .. y_M.
  std::vector<Vector> measurements;

  std::size_t steps() const { return measurements.size(); }
};

/// Largest elementwise |J - J_fd| / max(1, |J|) over `points` states drawn
/// from N(center, I), both Jacobians checked with central differences.
inline double max_jacobian_error(const StateSpaceModel& model, const Vector& center, Rng& rng, int points = 10,
                                 double step = 1e-6) {
  auto check = [&](const VectorFn& fn, const MatrixFn& jac, const Vector& x) {
    const Matrix analytic = jac(x);
    double worst = 0.0;
    for (Eigen::Index j = 0; j < x.size(); ++j) {
      Vector hi = x, lo = x;
      hi(j) += step;
      lo(j) -= step;
      const Vector column = (fn(hi) - fn(lo)) / (2.0 * step);
      for (Eigen::Index i = 0; i < column.size(); ++i) {
        const double err = std::abs(column(i) - analytic(i, j)) / std::max(1.0, std::abs(analytic(i, j)));
        worst = std::max(worst, err);
      }
    }
    return worst;
  };
  double worst = 0.0;
  for (int p = 0; p < points; ++p) {
    Vector x = center;
    for (Eigen::Index i = 0; i < x.size(); ++i) x(i) += standard_normal(rng);
    worst = std::max(worst, check(model.transition_fn, model.transition_jacobian, x));
    worst = std::max(worst, check(model.measurement_fn, model.measurement_jacobian, x));
  }
  return worst;
}

namespace detail {

inline NoiseSpec gaussian_outlier_mixture(const Matrix& cov, double inflation) {
  const Vector zero = Vector::Zero(cov.rows());
  return MixtureSpec({0.9, 0.1}, {GaussianSpec(zero, cov), GaussianSpec(zero, inflation * cov)});
}

inline NoiseSpec laplace_outlier_mixture(const Matrix& cov, double inflation) {
  return MixtureSpec({0.9, 0.1}, {LaplaceSpec::from_covariance_diagonal(cov),
                                  LaplaceSpec::from_covariance_diagonal(inflation * cov)});
}

}  // namespace detail

/// Constant-velocity target in the plane, position measurements.
inline StateSpaceModel build_wiener_velocity(MismatchCase mismatch) {
  Matrix a(4, 4);
  a << 1, 0, 0.1, 0,
       0, 1, 0, 0.1,
       0, 0, 1, 0,
       0, 0, 0, 1;
  Matrix c(2, 4);
  c << 1, 0, 0, 0,
       0, 1, 0, 0;
  const Matrix q = Matrix::Identity(4, 4);
  const Matrix r = Matrix::Identity(2, 2);
  const GaussianSpec process(Vector::Zero(4), q);
  const GaussianSpec meas(Vector::Zero(2), r);

  StateSpaceModel m;
  m.name = "wiener";
  m.state_dim = 4;
  m.meas_dim = 2;
  m.transition_fn = [a](const Vector& x) -> Vector { return a * x; };
  m.transition_jacobian = [a](const Vector&) -> Matrix { return a; };
  m.measurement_fn = [c](const Vector& x) -> Vector { return c * x; };
  m.measurement_jacobian = [c](const Vector&) -> Matrix { return c; };
  m.nominal_process_noise = process;
  m.nominal_meas_noise = meas;
  m.true_process_noise = mismatch == MismatchCase::case_a_transition ? detail::gaussian_outlier_mixture(q, 100.0)
                                                                    : NoiseSpec{process};
  m.true_meas_noise = mismatch == MismatchCase::case_b_measurement ? detail::gaussian_outlier_mixture(r, 1000.0)
                                                                   : NoiseSpec{meas};
  Vector x0(4);
  x0 << 0, 0, 1, 1;
  m.init = GaussianSpec(x0, Matrix::Identity(4, 4));
  m.linear_transition = a;
  m.linear_measurement = c;
  m.validate();
  return m;
}

/// Nonlinear sequence forecasting benchmark; cos and sin act elementwise.
inline StateSpaceModel build_sequence_forecast(MismatchCase mismatch) {
  constexpr double kappa1 = 0.1;
  constexpr double kappa2 = 0.1;
  Matrix b(2, 2);
  b << -1, 0,
       0.1, -1;
  const Matrix identity = Matrix::Identity(2, 2);
  const GaussianSpec process(Vector::Zero(2), identity);
  const GaussianSpec meas(Vector::Zero(2), identity);

  StateSpaceModel m;
  m.name = "sequence";
  m.state_dim = 2;
  m.meas_dim = 2;
  m.transition_fn = [b, kappa1, kappa2](const Vector& x) -> Vector {
    return x + kappa1 * (b * x) + kappa2 * x.array().cos().matrix();
  };
  m.transition_jacobian = [b, identity, kappa1, kappa2](const Vector& x) -> Matrix {
    Matrix j = identity + kappa1 * b;
    j.diagonal() -= kappa2 * x.array().sin().matrix();
    return j;
  };
  m.measurement_fn = [](const Vector& x) -> Vector { return x + x.array().sin().matrix(); };
  m.measurement_jacobian = [](const Vector& x) -> Matrix {
    return (1.0 + x.array().cos()).matrix().asDiagonal();
  };
  m.nominal_process_noise = process;
  m.nominal_meas_noise = meas;
  m.true_process_noise = mismatch == MismatchCase::case_a_transition
                             ? detail::gaussian_outlier_mixture(identity, 100.0)
                             : NoiseSpec{process};
  m.true_meas_noise = mismatch == MismatchCase::case_b_measurement
                          ? detail::gaussian_outlier_mixture(identity, 1000.0)
                          : NoiseSpec{meas};
  m.init = GaussianSpec(Vector::Zero(2), identity);
  m.validate();
  return m;
}

/// Isothermal gas-phase reactor 2A <-> B, explicit Euler with dt = 0.1.
/// State [P_A, P_B], measured total pressure. Laplace noises with the
/// diagonal read-off b_i = sqrt(Q_ii).
inline StateSpaceModel build_gas_reactor(MismatchCase mismatch) {
  constexpr double k1 = 0.16;
  constexpr double k2 = 0.0064;
  constexpr double dt = 0.1;
  const Matrix q = 1e-4 * Matrix::Identity(2, 2);
  const Matrix r = Matrix::Identity(1, 1);
  const LaplaceSpec process = LaplaceSpec::from_covariance_diagonal(q);
  const LaplaceSpec meas = LaplaceSpec::from_covariance_diagonal(r);

  StateSpaceModel m;
  m.name = "reactor";
  m.state_dim = 2;
  m.meas_dim = 1;
  m.transition_fn = [](const Vector& x) -> Vector {
    const double pa = x(0), pb = x(1);
    Vector out(2);
    out << pa + (-2.0 * k1 * pa * pa + 2.0 * k2 * pb) * dt,
           pb + (k1 * pa * pa - k2 * pb) * dt;
    return out;
  };
  m.transition_jacobian = [](const Vector& x) -> Matrix {
    const double pa = x(0);
    Matrix j(2, 2);
    j << 1.0 - 4.0 * k1 * pa * dt, 2.0 * k2 * dt,
         2.0 * k1 * pa * dt, 1.0 - k2 * dt;
    return j;
  };
  m.measurement_fn = [](const Vector& x) -> Vector { return Vector::Constant(1, x(0) + x(1)); };
  m.measurement_jacobian = [](const Vector&) -> Matrix { return Matrix::Ones(1, 2); };
  m.nominal_process_noise = process;
  m.nominal_meas_noise = meas;
  m.true_process_noise = mismatch == MismatchCase::case_a_transition ? detail::laplace_outlier_mixture(q, 1000.0)
                                                                    : NoiseSpec{process};
  m.true_meas_noise = mismatch == MismatchCase::case_b_measurement ? detail::laplace_outlier_mixture(r, 1000.0)
                                                                   : NoiseSpec{meas};
  Vector x0(2);
  x0 << 0.1, 4.5;
  m.init = x0;
  m.validate();
  return m;
}

/// Copy of `model` whose true noises are point masses at zero and whose
/// initial state is the init mean. Simulation becomes the iterate of f.
inline StateSpaceModel noiseless(StateSpaceModel model) {
  model.true_process_noise = PointMass::zero(model.state_dim);
  model.true_meas_noise = PointMass::zero(model.meas_dim);
  if (const auto* g = std::get_if<GaussianSpec>(&model.init)) model.init = Vector(g->mean());
  return model;
}

inline Trajectory simulate(const StateSpaceModel& model, std::size_t steps, Rng& rng) {
  if (steps < 1) throw InputError("simulate: steps must be at least 1");
  Trajectory traj;
  traj.states.reserve(steps + 1);
  traj.measurements.reserve(steps);
  traj.states.push_back(model.draw_initial_state(rng));
  for (std::size_t t = 1; t <= steps; ++t) {
    Vector x = model.transition_fn(traj.states.back()) + sample(model.true_process_noise, rng);
    Vector y = model.measurement_fn(x) + sample(model.true_meas_noise, rng);
    traj.states.push_back(std::move(x));
    traj.measurements.push_back(std::move(y));
  }
  return traj;
}

}  // namespace convbf
