#pragma once

// Monte Carlo benchmark harness. A campaign simulates `runs` trajectories
// with the model's true noises and filters each one using only the nominal
// noises (plus the filter's own conv/robust parameters). Runs are seeded
// independently, so results do not depend on scheduling.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <limits>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "convbf/distributions.hpp"
#include "convbf/errors.hpp"
#include "convbf/kalman.hpp"
#include "convbf/models.hpp"
#include "convbf/nonlinear.hpp"
#include "convbf/particle.hpp"
#include "convbf/random.hpp"

namespace convbf {

enum class System { wiener, sequence, reactor };

enum class FilterKind { kf, convkf, huber_kf, ekf, convekf, iekf, ukf, convukf, huber_ukf, pf, convpf, apf, stpf };

inline constexpr FilterKind kAllFilters[] = {
    FilterKind::kf,  FilterKind::convkf,  FilterKind::huber_kf,  FilterKind::ekf, FilterKind::convekf,
    FilterKind::iekf, FilterKind::ukf,    FilterKind::convukf,   FilterKind::huber_ukf, FilterKind::pf,
    FilterKind::convpf, FilterKind::apf,  FilterKind::stpf};

inline constexpr System kAllSystems[] = {System::wiener, System::sequence, System::reactor};

inline const char* to_string(System s) {
  switch (s) {
    case System::wiener: return "wiener";
    case System::sequence: return "sequence";
    case System::reactor: return "reactor";
  }
  return "?";
}

inline const char* to_string(FilterKind f) {
  constexpr const char* names[] = {"kf",  "convkf",  "huber_kf",  "ekf", "convekf", "iekf", "ukf",
                                   "convukf", "huber_ukf", "pf", "convpf", "apf", "stpf"};
  return names[static_cast<int>(f)];
}

inline System parse_system(std::string_view s) {
  for (auto sys : kAllSystems) {
    if (s == to_string(sys)) return sys;
  }
  throw ConfigError("unknown system '" + std::string(s) + "'");
}

inline FilterKind parse_filter(std::string_view s) {
  for (auto f : kAllFilters) {
    if (s == to_string(f)) return f;
  }
  throw ConfigError("unknown filter '" + std::string(s) + "'");
}

inline MismatchCase parse_case(std::string_view s) {
  if (s == "none") return MismatchCase::none;
  if (s == "a" || s == "A") return MismatchCase::case_a_transition;
  if (s == "b" || s == "B") return MismatchCase::case_b_measurement;
  throw ConfigError("unknown case '" + std::string(s) + "'");
}

/// "off" (or "-", "inf") disables the threshold; otherwise a positive rate.
inline ExponentialThreshold parse_threshold(std::string_view s) {
  if (s == "off" || s == "-" || s == "inf" || s == "disabled") return ExponentialThreshold::disabled();
  double rate = 0.0;
  try {
    std::size_t used = 0;
    rate = std::stod(std::string(s), &used);
    if (used != s.size()) throw std::invalid_argument("trailing characters");
  } catch (const std::exception&) {
    throw ConfigError("invalid threshold rate '" + std::string(s) + "'");
  }
  if (!(rate > 0.0)) throw ConfigError("threshold rate must be positive, got '" + std::string(s) + "'");
  return ExponentialThreshold(rate);
}

inline bool is_particle_filter(FilterKind f) {
  return f == FilterKind::pf || f == FilterKind::convpf || f == FilterKind::apf || f == FilterKind::stpf;
}

inline StateSpaceModel build_model(System system, MismatchCase mismatch) {
  switch (system) {
    case System::wiener: return build_wiener_velocity(mismatch);
    case System::sequence: return build_sequence_forecast(mismatch);
    case System::reactor: return build_gas_reactor(mismatch);
  }
  throw ConfigError("unknown system");
}

struct ExperimentConfig {
  System system = System::wiener;
  MismatchCase mismatch = MismatchCase::none;
  FilterKind filter = FilterKind::kf;
  ExponentialThreshold alpha = ExponentialThreshold::disabled();
  ExponentialThreshold beta = ExponentialThreshold::disabled();
  std::size_t runs = 100;
  std::size_t steps = 40;
  std::size_t particles = 200;
  std::uint64_t seed = 42;
  double huber_delta = 1.345;
  UnscentedParams ut;
  double stpf_dof = 3.0;
  int iekf_max_iters = 10;
  double iekf_tol = 1e-8;
  /// Particle filters resample after every step unless overridden.
  ResampleSpec resample = ResampleSpec::always();
  /// Simulate truth without process or measurement noise.
  bool noiseless_truth = false;
};

inline StateSpaceModel experiment_model(const ExperimentConfig& cfg) {
  StateSpaceModel model = build_model(cfg.system, cfg.mismatch);
  return cfg.noiseless_truth ? noiseless(std::move(model)) : model;
}

/// Seeds of run r: simulation stream hash64(seed_r, 0), filter stream
/// hash64(seed_r, 1), with seed_r = hash64(seed, r).
inline std::uint64_t run_seed(std::uint64_t seed, std::size_t run) { return hash64(seed, run); }

struct RmseSummary {
  /// One entry per run; NaN marks a failed run.
  std::vector<double> per_run_rmse;
  double mean = 0.0;
  double median = 0.0;
  double q1 = 0.0;
  double q3 = 0.0;
  double min = 0.0;
  double max = 0.0;
  std::size_t failed_runs = 0;

  double failure_fraction() const {
    return per_run_rmse.empty() ? 0.0 : static_cast<double>(failed_runs) / static_cast<double>(per_run_rmse.size());
  }

  friend bool operator==(const RmseSummary& a, const RmseSummary& b) {
    auto same = [](double x, double y) { return x == y || (std::isnan(x) && std::isnan(y)); };
    if (a.per_run_rmse.size() != b.per_run_rmse.size()) return false;
    for (std::size_t i = 0; i < a.per_run_rmse.size(); ++i) {
      if (!same(a.per_run_rmse[i], b.per_run_rmse[i])) return false;
    }
    return same(a.mean, b.mean) && same(a.median, b.median) && same(a.q1, b.q1) && same(a.q3, b.q3) &&
           same(a.min, b.min) && same(a.max, b.max) && a.failed_runs == b.failed_runs;
  }
};

/// sqrt(1/M sum ||x_i - xhat_i||^2) over x_1..x_M.
inline double rmse(const Trajectory& truth, const std::vector<Vector>& estimates) {
  if (estimates.size() != truth.steps() || truth.states.size() != truth.steps() + 1) {
    throw InputError("rmse: expected " + std::to_string(truth.steps()) + " estimates, got " +
                     std::to_string(estimates.size()));
  }
  if (estimates.empty()) throw InputError("rmse: empty trajectory");
  double acc = 0.0;
  for (std::size_t i = 0; i < estimates.size(); ++i) {
    if (estimates[i].size() != truth.states[i + 1].size()) throw InputError("rmse: state dimension mismatch");
    acc += (truth.states[i + 1] - estimates[i]).squaredNorm();
  }
  return std::sqrt(acc / static_cast<double>(estimates.size()));
}

namespace detail {

/// Inclusive-method quantile of a sorted sample.
inline double quantile_sorted(const std::vector<double>& sorted, double p) {
  const double pos = p * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

}  // namespace detail

/// Box-plot statistics over the finite entries; non-finite entries count as
/// failed runs.
inline RmseSummary summarize(const std::vector<double>& per_run) {
  if (per_run.empty()) throw InputError("summarize: empty input");
  RmseSummary s;
  s.per_run_rmse = per_run;
  std::vector<double> finite;
  finite.reserve(per_run.size());
  for (double v : per_run) {
    if (std::isfinite(v)) {
      finite.push_back(v);
    } else {
      ++s.failed_runs;
    }
  }
  if (finite.empty()) throw InputError("summarize: no finite values");
  std::sort(finite.begin(), finite.end());
  double total = 0.0;
  for (double v : finite) total += v;
  s.mean = std::clamp(total / static_cast<double>(finite.size()), finite.front(), finite.back());
  s.min = finite.front();
  s.max = finite.back();
  s.q1 = detail::quantile_sorted(finite, 0.25);
  s.median = detail::quantile_sorted(finite, 0.5);
  s.q3 = detail::quantile_sorted(finite, 0.75);
  return s;
}

/// Reason the configuration cannot run, or nullopt.
inline std::optional<std::string> incompatibility(const ExperimentConfig& cfg) {
  if (cfg.runs < 1) return "runs must be at least 1";
  if (cfg.steps < 1) return "steps must be at least 1";
  const StateSpaceModel model = build_model(cfg.system, cfg.mismatch);
  switch (cfg.filter) {
    case FilterKind::huber_kf:
    case FilterKind::huber_ukf:
      if (!(cfg.huber_delta > 0.0)) return "huber_delta must be positive";
      break;
    case FilterKind::iekf:
      if (cfg.iekf_max_iters < 1) return "iekf max iterations must be at least 1";
      break;
    case FilterKind::pf:
    case FilterKind::apf:
    case FilterKind::stpf:
    case FilterKind::convpf:
      if (cfg.particles < 2) return "particle filters need at least 2 particles";
      if (cfg.filter == FilterKind::stpf && !(cfg.stpf_dof > 0.0)) return "stpf dof must be positive";
      if (cfg.filter == FilterKind::convpf &&
          (!supports_rescaling(model.nominal_process_noise) || !supports_rescaling(model.nominal_meas_noise))) {
        return std::string("convpf requires Gaussian or Laplace nominal noises; ") + to_string(cfg.system) +
               " uses " + family_name(model.nominal_process_noise) + "/" + family_name(model.nominal_meas_noise);
      }
      break;
    default:
      break;
  }
  if (cfg.filter == FilterKind::ukf || cfg.filter == FilterKind::convukf || cfg.filter == FilterKind::huber_ukf) {
    const auto n = model.state_dim;
    if (!(static_cast<double>(n) + cfg.ut.lambda(n) > 0.0)) return "unscented parameters give n + lambda <= 0";
  }
  try {
    // Kalman-family filters consume Gaussian moments of the nominal noises.
    if (!is_particle_filter(cfg.filter)) {
      conv_noise(model.nominal_process_noise, cfg.alpha);
      conv_noise(model.nominal_meas_noise, cfg.beta);
    }
  } catch (const std::exception& e) {
    return std::string("nominal noise has no usable covariance: ") + e.what();
  }
  return std::nullopt;
}

inline void require_compatible(const ExperimentConfig& cfg) {
  if (auto reason = incompatibility(cfg)) {
    throw ConfigError(std::string(to_string(cfg.filter)) + " on " + to_string(cfg.system) + ": " + *reason);
  }
}

/// Runs the configured filter over one trajectory; returns estimates of
/// x_1..x_M. Kalman-family filters on nonlinear models linearize f and g at
/// the current mean.
inline std::vector<Vector> run_filter(const ExperimentConfig& cfg, const StateSpaceModel& model,
                                      const Trajectory& truth, Rng& rng) {
  std::vector<Vector> estimates;
  estimates.reserve(truth.steps());

  if (is_particle_filter(cfg.filter)) {
    ParticleEnsemble ens = initialize_ensemble(model.filter_prior(), cfg.particles, rng);
    const ConvConfig conv{cfg.alpha, cfg.beta};
    for (std::size_t t = 0; t < truth.steps(); ++t) {
      const Vector& y = truth.measurements[t];
      ParticleStep step;
      switch (cfg.filter) {
        case FilterKind::pf: step = pf_step(ens, model, y, rng, cfg.resample, t + 1); break;
        case FilterKind::convpf: step = convpf_step(ens, model, y, rng, conv, cfg.resample, t + 1); break;
        case FilterKind::apf: step = apf_step(ens, model, y, rng, t + 1); break;
        default: step = stpf_step(ens, model, y, rng, cfg.stpf_dof, cfg.resample, t + 1); break;
      }
      estimates.push_back(step.estimate);
      ens = std::move(step.ensemble);
    }
    return estimates;
  }

  const bool conv = cfg.filter == FilterKind::convkf || cfg.filter == FilterKind::convekf ||
                    cfg.filter == FilterKind::convukf;
  const ExponentialThreshold off = ExponentialThreshold::disabled();
  const Matrix q = conv_noise(model.nominal_process_noise, conv ? cfg.alpha : off);
  const Matrix r = conv_noise(model.nominal_meas_noise, conv ? cfg.beta : off);
  const bool linear = model.is_linear();

  GaussianBelief belief(model.filter_prior());
  for (std::size_t t = 0; t < truth.steps(); ++t) {
    const Vector& y = truth.measurements[t];
    switch (cfg.filter) {
      case FilterKind::kf:
      case FilterKind::convkf:
      case FilterKind::huber_kf: {
        const GaussianBelief prior =
            linear ? kf_predict(belief, *model.linear_transition, q) : ekf_predict(belief, model, q);
        if (cfg.filter == FilterKind::huber_kf) {
          const Matrix c = linear ? *model.linear_measurement : model.measurement_jacobian(prior.mean);
          const Vector shifted = linear ? y : Vector(y - model.measurement_fn(prior.mean) + c * prior.mean);
          belief = huber_kf_update(prior, c, r, shifted, cfg.huber_delta).belief;
        } else {
          belief = linear ? kf_update(prior, *model.linear_measurement, r, y) : ekf_update(prior, model, r, y);
        }
        break;
      }
      case FilterKind::ekf:
      case FilterKind::convekf:
        belief = ekf_update(ekf_predict(belief, model, q), model, r, y);
        break;
      case FilterKind::iekf:
        belief = iekf_update(ekf_predict(belief, model, q), model, r, y, cfg.iekf_max_iters, cfg.iekf_tol).belief;
        break;
      case FilterKind::ukf:
      case FilterKind::convukf:
        belief = ukf_step(belief, model, q, r, y, cfg.ut);
        break;
      case FilterKind::huber_ukf:
        belief = huber_ukf_update(ukf_predict(belief, model, q, cfg.ut), model, r, y, cfg.huber_delta, cfg.ut).belief;
        break;
      default:
        throw ConfigError("unhandled filter");
    }
    if (!belief.mean.allFinite() || !belief.covariance.allFinite()) {
      throw NumericalError("non-finite belief at step " + std::to_string(t + 1));
    }
    estimates.push_back(belief.mean);
  }
  return estimates;
}

/// RMSE of a single run, NaN when the filter fails numerically.
inline double run_single(const ExperimentConfig& cfg, const StateSpaceModel& model, std::size_t run) {
  const std::uint64_t seed_r = run_seed(cfg.seed, run);
  Rng sim_rng(hash64(seed_r, 0));
  Rng filter_rng(hash64(seed_r, 1));
  const Trajectory truth = simulate(model, cfg.steps, sim_rng);
  try {
    const double value = rmse(truth, run_filter(cfg, model, truth, filter_rng));
    return std::isfinite(value) ? value : std::numeric_limits<double>::quiet_NaN();
  } catch (const NumericalError&) {
    return std::numeric_limits<double>::quiet_NaN();
  }
}

/// Runs a campaign on `threads` workers (0 = hardware concurrency). Results
/// are stored by run index, so any thread count gives identical output.
inline RmseSummary run_experiment(const ExperimentConfig& cfg, unsigned threads = 1) {
  require_compatible(cfg);
  const StateSpaceModel model = experiment_model(cfg);
  std::vector<double> per_run(cfg.runs, std::numeric_limits<double>::quiet_NaN());

  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, cfg.runs));
  if (threads <= 1) {
    for (std::size_t r = 0; r < cfg.runs; ++r) per_run[r] = run_single(cfg, model, r);
  } else {
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (unsigned w = 0; w < threads; ++w) {
      pool.emplace_back([&] {
        for (std::size_t r = next++; r < cfg.runs; r = next++) {
          try {
            per_run[r] = run_single(cfg, model, r);
          } catch (...) {
            std::lock_guard lock(error_mutex);
            if (!error) error = std::current_exception();
          }
        }
      });
    }
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
  }

  std::size_t failed = 0;
  for (double v : per_run) failed += std::isfinite(v) ? 0 : 1;
  if (failed == per_run.size()) {
    RmseSummary s;
    s.per_run_rmse = per_run;
    s.failed_runs = failed;
    s.mean = s.median = s.q1 = s.q3 = s.min = s.max = std::numeric_limits<double>::quiet_NaN();
    return s;
  }
  return summarize(per_run);
}

/// Acceptance budget: a filter failing more than 5% of its runs fails.
inline bool within_failure_budget(const RmseSummary& s) { return s.failure_fraction() <= 0.05; }

struct CampaignResult {
  ExperimentConfig config;
  RmseSummary summary;
};

/// Cross product of filters x alphas x betas over a base configuration.
inline std::vector<ExperimentConfig> expand_sweep(const ExperimentConfig& base, const std::vector<FilterKind>& filters,
                                                  const std::vector<ExponentialThreshold>& alphas,
                                                  const std::vector<ExponentialThreshold>& betas) {
  if (filters.empty() || alphas.empty() || betas.empty()) throw ConfigError("sweep: empty parameter list");
  std::vector<ExperimentConfig> out;
  for (auto f : filters) {
    for (const auto& a : alphas) {
      for (const auto& b : betas) {
        ExperimentConfig cfg = base;
        cfg.filter = f;
        cfg.alpha = a;
        cfg.beta = b;
        out.push_back(cfg);
      }
    }
  }
  return out;
}

/// Validates every configuration before running any of them.
inline std::vector<CampaignResult> run_campaign(const std::vector<ExperimentConfig>& configs, unsigned threads = 1) {
  for (const auto& cfg : configs) require_compatible(cfg);
  std::vector<CampaignResult> out;
  out.reserve(configs.size());
  for (const auto& cfg : configs) out.push_back({cfg, run_experiment(cfg, threads)});
  return out;
}

}  // namespace convbf
