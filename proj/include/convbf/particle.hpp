#pragma once

// Sequential Monte Carlo: bootstrap PF, the convolutional PF with exponential
// density rescaling, an auxiliary PF and a Student-t PF. Weights are formed
// in the log domain with max-subtraction before normalization.

#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "convbf/distributions.hpp"
#include "convbf/errors.hpp"
#include "convbf/kalman.hpp"
#include "convbf/linalg.hpp"
#include "convbf/models.hpp"
#include "convbf/random.hpp"

namespace convbf {

struct ParticleEnsemble {
  std::vector<Vector> particles;
  /// Normalized weights, one per particle.
  Vector weights;

  std::size_t size() const { return particles.size(); }

  void validate() const {
    if (particles.size() < 2) throw InputError("ParticleEnsemble: need at least 2 particles");
    if (static_cast<std::size_t>(weights.size()) != particles.size()) {
      throw InputError("ParticleEnsemble: one weight per particle");
    }
    if ((weights.array() < 0.0).any() || !weights.allFinite()) throw InputError("ParticleEnsemble: bad weights");
    if (std::abs(weights.sum() - 1.0) > 1e-10) throw InputError("ParticleEnsemble: weights not normalized");
  }
};

struct ResampleSpec {
  /// Resample when ESS < ess_fraction * N.
  double ess_fraction = 0.5;
  /// Resample after every step regardless of ESS.
  bool every_step = false;

  static ResampleSpec always() { return {1.0, true}; }

  void validate() const {
    if (!(ess_fraction > 0.0) || ess_fraction > 1.0) throw InputError("ResampleSpec: ess_fraction must be in (0, 1]");
  }
};

/// Result of one filter step. `estimate` is the weighted mean taken before
/// any end-of-step resampling.
struct ParticleStep {
  ParticleEnsemble ensemble;
  Vector estimate;
  bool resampled = false;
};

inline ParticleEnsemble initialize_ensemble(const GaussianSpec& prior, std::size_t count, Rng& rng) {
  if (count < 2) throw InputError("initialize_ensemble: need at least 2 particles");
  ParticleEnsemble ens;
  ens.particles.reserve(count);
  for (std::size_t i = 0; i < count; ++i) ens.particles.push_back(prior.sample(rng));
  ens.weights = Vector::Constant(static_cast<Eigen::Index>(count), 1.0 / static_cast<double>(count));
  return ens;
}

inline Vector weighted_mean(const ParticleEnsemble& ens) {
  Vector m = Vector::Zero(ens.particles.front().size());
  for (std::size_t i = 0; i < ens.size(); ++i) m += ens.weights(static_cast<Eigen::Index>(i)) * ens.particles[i];
  return m;
}

inline double ess(const Vector& weights) { return 1.0 / weights.squaredNorm(); }

/// Parent index of each of the N lattice points (offset + k) / N, k = 0..N-1,
/// through the weight CDF. `offset` lies in [0, 1).
inline std::vector<std::size_t> systematic_offspring(const Vector& weights, double offset) {
  const auto n = static_cast<std::size_t>(weights.size());
  std::vector<std::size_t> parents(n);
  double cumulative = weights(0);
  std::size_t j = 0;
  for (std::size_t k = 0; k < n; ++k) {
    const double point = (offset + static_cast<double>(k)) / static_cast<double>(n);
    while (point >= cumulative && j + 1 < n) {
      ++j;
      cumulative += weights(static_cast<Eigen::Index>(j));
    }
    parents[k] = j;
  }
  return parents;
}

inline ParticleEnsemble systematic_resample(const ParticleEnsemble& ens, Rng& rng) {
  const auto parents = systematic_offspring(ens.weights, uniform01(rng));
  ParticleEnsemble out;
  out.particles.reserve(ens.size());
  for (auto p : parents) out.particles.push_back(ens.particles[p]);
  out.weights = Vector::Constant(static_cast<Eigen::Index>(ens.size()), 1.0 / static_cast<double>(ens.size()));
  return out;
}

/// exp(log_w - max) / sum. Throws DegeneracyError if nothing survives.
inline Vector normalize_log_weights(const std::vector<double>& log_weights, std::size_t step) {
  double hi = -std::numeric_limits<double>::infinity();
  for (double lw : log_weights) {
    if (std::isnan(lw)) throw DegeneracyError(step, "NaN log-weight");
    hi = std::max(hi, lw);
  }
  if (!std::isfinite(hi)) throw DegeneracyError(step, "all weights are zero");
  Vector w(static_cast<Eigen::Index>(log_weights.size()));
  for (std::size_t i = 0; i < log_weights.size(); ++i) w(static_cast<Eigen::Index>(i)) = std::exp(log_weights[i] - hi);
  const double total = w.sum();
  if (!(total > 0.0) || !std::isfinite(total)) throw DegeneracyError(step, "weight sum not positive");
  return w / total;
}

/// log p(y | x) up to a constant independent of x.
using LogLikelihood = std::function<double(const Vector& y, const Vector& x)>;

namespace detail {

inline LogLikelihood nominal_likelihood(const StateSpaceModel& model, double power = 1.0) {
  return [&model, power](const Vector& y, const Vector& x) {
    const double lp = log_density(model.nominal_meas_noise, y - model.measurement_fn(x));
    return power == 1.0 ? lp : power * lp;
  };
}

/// Propagate with `process`, reweight with `loglik`, estimate, maybe resample.
inline ParticleStep bootstrap_step(const ParticleEnsemble& ens, const StateSpaceModel& model, const Vector& y,
                                   Rng& rng, const NoiseSpec& process, const LogLikelihood& loglik,
                                   const ResampleSpec& resample, std::size_t step) {
  ens.validate();
  resample.validate();
  if (y.size() != model.meas_dim) throw InputError("particle step: measurement dimension mismatch");

  ParticleStep out;
  out.ensemble.particles.reserve(ens.size());
  std::vector<double> log_w(ens.size());
  for (std::size_t i = 0; i < ens.size(); ++i) {
    Vector x = model.transition_fn(ens.particles[i]) + sample(process, rng);
    log_w[i] = std::log(ens.weights(static_cast<Eigen::Index>(i))) + loglik(y, x);
    out.ensemble.particles.push_back(std::move(x));
  }
  out.ensemble.weights = normalize_log_weights(log_w, step);
  out.estimate = weighted_mean(out.ensemble);
  const double threshold = resample.ess_fraction * static_cast<double>(ens.size());
  if (resample.every_step || ess(out.ensemble.weights) < threshold) {
    out.ensemble = systematic_resample(out.ensemble, rng);
    out.resampled = true;
  }
  return out;
}

}  // namespace detail

inline ParticleStep pf_step(const ParticleEnsemble& ens, const StateSpaceModel& model, const Vector& y, Rng& rng,
                            const ResampleSpec& resample = {}, std::size_t step = 0) {
  return detail::bootstrap_step(ens, model, y, rng, model.nominal_process_noise, detail::nominal_likelihood(model),
                                resample, step);
}

/// Convolutional PF step: particles move under the tempered transition
/// density p^{gamma_alpha} and are weighted by p(y|x)^{gamma_beta}. The
/// likelihood's normalizer is dropped since it cancels in normalization.
inline ParticleStep convpf_step(const ParticleEnsemble& ens, const StateSpaceModel& model, const Vector& y, Rng& rng,
                                const ConvConfig& cfg, const ResampleSpec& resample = {}, std::size_t step = 0) {
  if (!supports_rescaling(model.nominal_process_noise) || !supports_rescaling(model.nominal_meas_noise)) {
    throw ConfigError("convpf requires Gaussian or Laplace nominal noises");
  }
  const NoiseSpec process = rescale_exponential(model.nominal_process_noise, gamma_from_rate(cfg.alpha));
  return detail::bootstrap_step(ens, model, y, rng, process,
                                detail::nominal_likelihood(model, gamma_from_rate(cfg.beta)), resample, step);
}

/// Student-t weighting with location g(x), per-dimension scale equal to the
/// nominal measurement standard deviation, and `dof` degrees of freedom.
inline ParticleStep stpf_step(const ParticleEnsemble& ens, const StateSpaceModel& model, const Vector& y, Rng& rng,
                              double dof = 3.0, const ResampleSpec& resample = {}, std::size_t step = 0) {
  if (!(dof > 0.0)) throw InputError("stpf_step: dof must be positive");
  const Vector scale = noise_covariance(model.nominal_meas_noise).diagonal().cwiseSqrt();
  const StudentTSpec t(noise_mean(model.nominal_meas_noise), scale, dof);
  LogLikelihood loglik = [&model, t](const Vector& obs, const Vector& x) {
    return t.log_density(obs - model.measurement_fn(x));
  };
  return detail::bootstrap_step(ens, model, y, rng, model.nominal_process_noise, loglik, resample, step);
}

/// Auxiliary PF (Pitt-Shephard). First-stage weights use the likelihood at
/// the noiseless lookahead f(x); the selected parents are propagated with
/// noise and reweighted by p(y|child) / p(y|lookahead).
inline ParticleStep apf_step(const ParticleEnsemble& ens, const StateSpaceModel& model, const Vector& y, Rng& rng,
                             std::size_t step = 0) {
  ens.validate();
  if (y.size() != model.meas_dim) throw InputError("apf_step: measurement dimension mismatch");
  const LogLikelihood loglik = detail::nominal_likelihood(model);

  const std::size_t n = ens.size();
  std::vector<Vector> lookahead(n);
  std::vector<double> lookahead_ll(n);
  std::vector<double> first_stage(n);
  for (std::size_t i = 0; i < n; ++i) {
    lookahead[i] = model.transition_fn(ens.particles[i]);
    lookahead_ll[i] = loglik(y, lookahead[i]);
    first_stage[i] = std::log(ens.weights(static_cast<Eigen::Index>(i))) + lookahead_ll[i];
  }
  const Vector selection = normalize_log_weights(first_stage, step);
  const auto parents = systematic_offspring(selection, uniform01(rng));

  ParticleStep out;
  out.ensemble.particles.reserve(n);
  std::vector<double> second_stage(n);
  for (std::size_t k = 0; k < n; ++k) {
    const auto p = parents[k];
    Vector child = lookahead[p] + sample(model.nominal_process_noise, rng);
    second_stage[k] = loglik(y, child) - lookahead_ll[p];
    out.ensemble.particles.push_back(std::move(child));
  }
  out.ensemble.weights = normalize_log_weights(second_stage, step);
  out.estimate = weighted_mean(out.ensemble);
  out.resampled = true;
  return out;
}

}  // namespace convbf
