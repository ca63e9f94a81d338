#pragma once

// Noise densities, samplers and exponential density rescaling (tempering).
//
// Every spec is an immutable value validated at construction. The tagged
// union NoiseSpec is what models and filters pass around.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "convbf/errors.hpp"
#include "convbf/linalg.hpp"
#include "convbf/random.hpp"

namespace convbf {

namespace detail {

inline void require_dim(Eigen::Index expected, Eigen::Index got, const char* what) {
  if (expected != got) {
    throw InputError(std::string(what) + ": dimension mismatch (expected " +
                     std::to_string(expected) + ", got " + std::to_string(got) + ")");
  }
}

inline double log_sum_exp(const std::vector<double>& terms) {
  double hi = -std::numeric_limits<double>::infinity();
  for (double t : terms) hi = std::max(hi, t);
  if (!std::isfinite(hi)) return hi;
  double acc = 0.0;
  for (double t : terms) acc += std::exp(t - hi);
  return hi + std::log(acc);
}

}  // namespace detail

class GaussianSpec {
 public:
  GaussianSpec(Vector mean, Matrix covariance) : mean_(std::move(mean)), cov_(std::move(covariance)) {
    if (mean_.size() == 0) throw InputError("GaussianSpec: empty mean");
    if (cov_.rows() != mean_.size() || cov_.cols() != mean_.size()) {
      throw InputError("GaussianSpec: covariance shape does not match mean");
    }
    if (!mean_.allFinite() || !cov_.allFinite()) throw InputError("GaussianSpec: non-finite parameters");
    if (!is_symmetric(cov_, 1e-10)) throw InputError("GaussianSpec: covariance not symmetric");
    Eigen::LLT<Matrix> llt(cov_);
    if (llt.info() != Eigen::Success) throw InputError("GaussianSpec: covariance not positive definite");
    chol_ = llt.matrixL();
    log_det_ = 2.0 * chol_.diagonal().array().log().sum();
  }

  static GaussianSpec standard(Eigen::Index n) {
    return {Vector::Zero(n), Matrix::Identity(n, n)};
  }

  Eigen::Index dim() const { return mean_.size(); }
  const Vector& mean() const { return mean_; }
  const Matrix& covariance() const { return cov_; }
  /// Lower Cholesky factor of the covariance.
  const Matrix& cholesky() const { return chol_; }

  double log_density(const Vector& x) const {
    detail::require_dim(dim(), x.size(), "GaussianSpec::log_density");
    const Vector z = chol_.triangularView<Eigen::Lower>().solve(x - mean_);
    return -0.5 * (static_cast<double>(dim()) * std::log(2.0 * std::numbers::pi) + log_det_ + z.squaredNorm());
  }

  Vector sample(Rng& rng) const {
    Vector z(dim());
    for (Eigen::Index i = 0; i < dim(); ++i) z(i) = standard_normal(rng);
    return mean_ + chol_ * z;
  }

  friend bool operator==(const GaussianSpec& a, const GaussianSpec& b) {
    return a.mean_ == b.mean_ && a.cov_ == b.cov_;
  }

 private:
  Vector mean_;
  Matrix cov_;
  Matrix chol_;
  double log_det_ = 0.0;
};

/// Independent per-dimension Laplace with location mu_i and diversity b_i.
class LaplaceSpec {
 public:
  LaplaceSpec(Vector location, Vector scale) : loc_(std::move(location)), scale_(std::move(scale)) {
    if (loc_.size() == 0) throw InputError("LaplaceSpec: empty location");
    if (scale_.size() != loc_.size()) throw InputError("LaplaceSpec: scale dimension does not match location");
    if (!loc_.allFinite() || !scale_.allFinite()) throw InputError("LaplaceSpec: non-finite parameters");
    if ((scale_.array() <= 0.0).any()) throw InputError("LaplaceSpec: scale entries must be positive");
  }

  /// Diagonal read-off of a matrix-valued "Laplace(0, Q)": b_i = sqrt(Q_ii).
  static LaplaceSpec from_covariance_diagonal(const Matrix& q) {
    if (q.rows() != q.cols()) throw InputError("LaplaceSpec: Q must be square");
    return {Vector::Zero(q.rows()), q.diagonal().cwiseSqrt()};
  }

  Eigen::Index dim() const { return loc_.size(); }
  const Vector& location() const { return loc_; }
  const Vector& scale() const { return scale_; }

  double log_density(const Vector& x) const {
    detail::require_dim(dim(), x.size(), "LaplaceSpec::log_density");
    double acc = 0.0;
    for (Eigen::Index i = 0; i < dim(); ++i) {
      acc += -std::log(2.0 * scale_(i)) - std::abs(x(i) - loc_(i)) / scale_(i);
    }
    return acc;
  }

  Vector sample(Rng& rng) const {
    Vector out(dim());
    for (Eigen::Index i = 0; i < dim(); ++i) {
      // Inverse CDF on u in (-1/2, 1/2).
      double u = uniform01(rng) - 0.5;
      if (u == -0.5) u = std::nextafter(-0.5, 0.0);
      const double s = u < 0.0 ? -1.0 : 1.0;
      out(i) = loc_(i) - scale_(i) * s * std::log1p(-2.0 * std::abs(u));
    }
    return out;
  }

  friend bool operator==(const LaplaceSpec& a, const LaplaceSpec& b) {
    return a.loc_ == b.loc_ && a.scale_ == b.scale_;
  }

 private:
  Vector loc_;
  Vector scale_;
};

using MixtureComponent = std::variant<GaussianSpec, LaplaceSpec>;

class MixtureSpec {
 public:
  MixtureSpec(std::vector<double> weights, std::vector<MixtureComponent> components)
      : weights_(std::move(weights)), components_(std::move(components)) {
    if (components_.empty()) throw InputError("MixtureSpec: needs at least one component");
    if (weights_.size() != components_.size()) throw InputError("MixtureSpec: one weight per component");
    double total = 0.0;
    for (double w : weights_) {
      if (!(w >= 0.0) || !std::isfinite(w)) throw InputError("MixtureSpec: weights must be nonnegative");
      total += w;
    }
    if (std::abs(total - 1.0) > 1e-12) throw InputError("MixtureSpec: weights must sum to 1");
    const auto family = components_.front().index();
    const auto n = dim_of(components_.front());
    for (const auto& c : components_) {
      if (c.index() != family) throw InputError("MixtureSpec: components must share one family");
      if (dim_of(c) != n) throw InputError("MixtureSpec: components must share one dimension");
    }
  }

  Eigen::Index dim() const { return dim_of(components_.front()); }
  const std::vector<double>& weights() const { return weights_; }
  const std::vector<MixtureComponent>& components() const { return components_; }

  double log_density(const Vector& x) const {
    detail::require_dim(dim(), x.size(), "MixtureSpec::log_density");
    std::vector<double> terms;
    terms.reserve(components_.size());
    for (std::size_t k = 0; k < components_.size(); ++k) {
      if (weights_[k] == 0.0) continue;
      terms.push_back(std::log(weights_[k]) +
                      std::visit([&](const auto& c) { return c.log_density(x); }, components_[k]));
    }
    return detail::log_sum_exp(terms);
  }

  Vector sample(Rng& rng) const {
    const double u = uniform01(rng);
    double cumulative = 0.0;
    std::size_t pick = components_.size() - 1;
    for (std::size_t k = 0; k < components_.size(); ++k) {
      cumulative += weights_[k];
      if (u < cumulative && weights_[k] > 0.0) {
        pick = k;
        break;
      }
    }
    while (weights_[pick] == 0.0 && pick > 0) --pick;
    return std::visit([&](const auto& c) { return c.sample(rng); }, components_[pick]);
  }

  friend bool operator==(const MixtureSpec& a, const MixtureSpec& b) {
    return a.weights_ == b.weights_ && a.components_ == b.components_;
  }

 private:
  static Eigen::Index dim_of(const MixtureComponent& c) {
    return std::visit([](const auto& s) { return s.dim(); }, c);
  }

  std::vector<double> weights_;
  std::vector<MixtureComponent> components_;
};

/// Multivariate Student-t with diagonal scale matrix diag(scale^2).
class StudentTSpec {
 public:
  StudentTSpec(Vector location, Vector scale, double dof)
      : loc_(std::move(location)), scale_(std::move(scale)), dof_(dof) {
    if (loc_.size() == 0) throw InputError("StudentTSpec: empty location");
    if (scale_.size() != loc_.size()) throw InputError("StudentTSpec: scale dimension does not match location");
    if ((scale_.array() <= 0.0).any() || !scale_.allFinite()) throw InputError("StudentTSpec: scale entries must be positive");
    if (!(dof_ > 0.0) || !std::isfinite(dof_)) throw InputError("StudentTSpec: dof must be positive");
    const double n = static_cast<double>(loc_.size());
    log_norm_ = std::lgamma(0.5 * (dof_ + n)) - std::lgamma(0.5 * dof_) -
                0.5 * n * std::log(dof_ * std::numbers::pi) - scale_.array().log().sum();
  }

  Eigen::Index dim() const { return loc_.size(); }
  const Vector& location() const { return loc_; }
  const Vector& scale() const { return scale_; }
  double dof() const { return dof_; }

  double log_density(const Vector& x) const {
    detail::require_dim(dim(), x.size(), "StudentTSpec::log_density");
    const double delta = ((x - loc_).array() / scale_.array()).square().sum();
    const double n = static_cast<double>(dim());
    return log_norm_ - 0.5 * (dof_ + n) * std::log1p(delta / dof_);
  }

  Vector sample(Rng& rng) const {
    Vector z(dim());
    for (Eigen::Index i = 0; i < dim(); ++i) z(i) = standard_normal(rng);
    const double g = std::chi_squared_distribution<double>(dof_)(rng);
    return loc_ + scale_.cwiseProduct(z) * std::sqrt(dof_ / g);
  }

  friend bool operator==(const StudentTSpec& a, const StudentTSpec& b) {
    return a.loc_ == b.loc_ && a.scale_ == b.scale_ && a.dof_ == b.dof_;
  }

 private:
  Vector loc_;
  Vector scale_;
  double dof_;
  double log_norm_ = 0.0;
};

/// Degenerate distribution at a single point. Used for noiseless simulation;
/// its log-density is 0 at the point and -inf elsewhere.
class PointMass {
 public:
  explicit PointMass(Vector location) : loc_(std::move(location)) {
    if (loc_.size() == 0 || !loc_.allFinite()) throw InputError("PointMass: invalid location");
  }
  static PointMass zero(Eigen::Index n) { return PointMass(Vector::Zero(n)); }

  Eigen::Index dim() const { return loc_.size(); }
  const Vector& location() const { return loc_; }

  double log_density(const Vector& x) const {
    detail::require_dim(dim(), x.size(), "PointMass::log_density");
    return x == loc_ ? 0.0 : -std::numeric_limits<double>::infinity();
  }
  Vector sample(Rng&) const { return loc_; }

  friend bool operator==(const PointMass& a, const PointMass& b) { return a.loc_ == b.loc_; }

 private:
  Vector loc_;
};

using NoiseSpec = std::variant<GaussianSpec, LaplaceSpec, MixtureSpec, StudentTSpec, PointMass>;

inline Eigen::Index dimension(const NoiseSpec& spec) {
  return std::visit([](const auto& s) { return s.dim(); }, spec);
}

inline double log_density(const NoiseSpec& spec, const Vector& x) {
  return std::visit([&](const auto& s) { return s.log_density(x); }, spec);
}

inline Vector sample(const NoiseSpec& spec, Rng& rng) {
  return std::visit([&](const auto& s) { return s.sample(rng); }, spec);
}

inline const char* family_name(const NoiseSpec& spec) {
  constexpr const char* names[] = {"gaussian", "laplace", "mixture", "student_t", "point_mass"};
  return names[spec.index()];
}

namespace detail {

inline Vector mean_of(const MixtureComponent& c) {
  return std::visit(
      [](const auto& s) -> Vector {
        if constexpr (std::is_same_v<std::decay_t<decltype(s)>, GaussianSpec>) {
          return s.mean();
        } else {
          return s.location();
        }
      },
      c);
}

inline Matrix covariance_of(const MixtureComponent& c) {
  return std::visit(
      [](const auto& s) -> Matrix {
        if constexpr (std::is_same_v<std::decay_t<decltype(s)>, GaussianSpec>) {
          return s.covariance();
        } else {
          return (2.0 * s.scale().array().square()).matrix().asDiagonal();
        }
      },
      c);
}

}  // namespace detail

inline Vector noise_mean(const NoiseSpec& spec) {
  return std::visit(
      [](const auto& s) -> Vector {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, GaussianSpec>) {
          return s.mean();
        } else if constexpr (std::is_same_v<T, MixtureSpec>) {
          Vector m = Vector::Zero(s.dim());
          for (std::size_t k = 0; k < s.components().size(); ++k) {
            m += s.weights()[k] * detail::mean_of(s.components()[k]);
          }
          return m;
        } else {
          return s.location();
        }
      },
      spec);
}

/// Second central moment. Laplace gives diag(2 b^2); Student-t needs dof > 2.
inline Matrix noise_covariance(const NoiseSpec& spec) {
  return std::visit(
      [](const auto& s) -> Matrix {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, GaussianSpec>) {
          return s.covariance();
        } else if constexpr (std::is_same_v<T, LaplaceSpec>) {
          return detail::covariance_of(MixtureComponent{s});
        } else if constexpr (std::is_same_v<T, MixtureSpec>) {
          const Vector m = noise_mean(NoiseSpec{s});
          Matrix second = Matrix::Zero(s.dim(), s.dim());
          for (std::size_t k = 0; k < s.components().size(); ++k) {
            const Vector mk = detail::mean_of(s.components()[k]);
            second += s.weights()[k] * (detail::covariance_of(s.components()[k]) + mk * mk.transpose());
          }
          return symmetrized(second - m * m.transpose());
        } else if constexpr (std::is_same_v<T, StudentTSpec>) {
          if (s.dof() <= 2.0) throw InputError("Student-t covariance undefined for dof <= 2");
          return (s.dof() / (s.dof() - 2.0) * s.scale().array().square()).matrix().asDiagonal();
        } else {
          return Matrix::Zero(s.dim(), s.dim());
        }
      },
      spec);
}

/// Rate of an exponentially distributed threshold, or "disabled" (rate = +inf,
/// which recovers the unmodified density exactly).
class ExponentialThreshold {
 public:
  static ExponentialThreshold disabled() { return ExponentialThreshold(); }

  explicit ExponentialThreshold(double rate) : rate_(rate) {
    if (std::isinf(rate) && rate > 0.0) return;
    if (!(rate > 0.0) || !std::isfinite(rate)) throw InputError("ExponentialThreshold: rate must be positive");
  }

  bool enabled() const { return std::isfinite(rate_); }
  double rate() const { return rate_; }

  /// CDF F(d) = 1 - exp(-rate d).
  double cdf(double d) const { return enabled() ? -std::expm1(-rate_ * d) : (d > 0.0 ? 1.0 : 0.0); }

  friend bool operator==(const ExponentialThreshold& a, const ExponentialThreshold& b) { return a.rate_ == b.rate_; }

 private:
  ExponentialThreshold() : rate_(std::numeric_limits<double>::infinity()) {}
  double rate_;
};

/// gamma = rate / (rate + 1); 1 when disabled.
inline double gamma_from_rate(const ExponentialThreshold& threshold) {
  if (!threshold.enabled()) return 1.0;
  return threshold.rate() / (threshold.rate() + 1.0);
}

namespace detail {
inline void require_gamma(double gamma) {
  if (!(gamma > 0.0) || gamma > 1.0) throw InputError("rescale_exponential: gamma must lie in (0, 1]");
}
}  // namespace detail

/// Normalized p^gamma of a Gaussian: same mean, covariance / gamma.
inline GaussianSpec rescale_exponential(const GaussianSpec& spec, double gamma) {
  detail::require_gamma(gamma);
  if (gamma == 1.0) return spec;
  return {spec.mean(), spec.covariance() / gamma};
}

/// Normalized p^gamma of a Laplace: same location, scale / gamma.
inline LaplaceSpec rescale_exponential(const LaplaceSpec& spec, double gamma) {
  detail::require_gamma(gamma);
  if (gamma == 1.0) return spec;
  return {spec.location(), spec.scale() / gamma};
}

/// Tempering on the tagged union; only Gaussian and Laplace are closed under it.
inline NoiseSpec rescale_exponential(const NoiseSpec& spec, double gamma) {
  detail::require_gamma(gamma);
  if (const auto* g = std::get_if<GaussianSpec>(&spec)) return rescale_exponential(*g, gamma);
  if (const auto* l = std::get_if<LaplaceSpec>(&spec)) return rescale_exponential(*l, gamma);
  throw ConfigError(std::string("exponential rescaling unsupported for noise family ") + family_name(spec));
}

inline bool supports_rescaling(const NoiseSpec& spec) {
  return std::holds_alternative<GaussianSpec>(spec) || std::holds_alternative<LaplaceSpec>(spec);
}

}  // namespace convbf
