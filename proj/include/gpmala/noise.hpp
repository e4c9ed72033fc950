#pragma once

#include "gpmala/types.hpp"

#include <cstdint>
#include <span>

namespace gpmala {

/// One design point with the log of its Monte-Carlo mean and the variance of that log.
struct NoisyObservation {
  Vector point;
  double log_estimate = 0.0;
  double noise_var = 0.0;
  int replications = 0;
};

struct LogMeanEstimate {
  double log_estimate;
  double noise_var;
};

/// Delta-method estimate from R >= 2 nonnegative samples: log(mean) and
/// s^2 / (mean^2 R) with the unbiased sample variance.
[[nodiscard]] LogMeanEstimate mc_log_estimate(std::span<const double> samples);

/// Same estimator fed with log-samples, accumulated with a max shift so that
/// likelihoods far below the double range still give a finite log mean.
/// A log-sample of -inf stands for an exact zero.
[[nodiscard]] LogMeanEstimate mc_log_estimate_from_logs(std::span<const double> log_samples);

/// Empirical variance of log(mean(resample)) over B bootstrap resamples.
[[nodiscard]] double bootstrap_variance(std::span<const double> samples, int resamples, std::uint64_t seed);

/// Bootstrap on log-samples (see mc_log_estimate_from_logs).
[[nodiscard]] double bootstrap_log_variance(std::span<const double> log_samples, int resamples, std::uint64_t seed);

}  // namespace gpmala
