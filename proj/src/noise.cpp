#include "gpmala/noise.hpp"

#include "gpmala/error.hpp"
#include "gpmala/random.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace gpmala {

namespace {

// Shifted moments of exp(log_samples - shift).
struct ShiftedMoments {
  double shift;
  double mean;
  double variance;  // unbiased
};

ShiftedMoments shifted_moments(std::span<const double> log_samples) {
  const double shift = *std::max_element(log_samples.begin(), log_samples.end());
  if (!(shift > -std::numeric_limits<double>::infinity()))
    throw DegenerateLikelihood("every replication returned zero likelihood");
  const auto r = static_cast<double>(log_samples.size());
  double sum = 0.0;
  for (double l : log_samples) sum += std::exp(l - shift);
  const double mean = sum / r;
  double ss = 0.0;
  for (double l : log_samples) {
    const double dev = std::exp(l - shift) - mean;
    ss += dev * dev;
  }
  return {shift, mean, ss / (r - 1.0)};
}

void check_logs(std::span<const double> log_samples) {
  require(log_samples.size() >= 2, "at least two replications are required");
  for (double l : log_samples)
    require(!std::isnan(l) && l < std::numeric_limits<double>::infinity(), "log-samples must be finite or -inf");
}

std::vector<double> to_logs(std::span<const double> samples) {
  std::vector<double> logs;
  logs.reserve(samples.size());
  for (double s : samples) {
    require(std::isfinite(s) && s >= 0.0, "samples must be finite and nonnegative");
    logs.push_back(s > 0.0 ? std::log(s) : -std::numeric_limits<double>::infinity());
  }
  return logs;
}

}  // namespace

LogMeanEstimate mc_log_estimate_from_logs(std::span<const double> log_samples) {
  check_logs(log_samples);
  const auto m = shifted_moments(log_samples);
  const auto r = static_cast<double>(log_samples.size());
  return {m.shift + std::log(m.mean), m.variance / (m.mean * m.mean * r)};
}

LogMeanEstimate mc_log_estimate(std::span<const double> samples) {
  require(samples.size() >= 2, "at least two replications are required");
  double sum = 0.0;
  for (double s : samples) {
    require(std::isfinite(s) && s >= 0.0, "samples must be finite and nonnegative");
    sum += s;
  }
  const auto r = static_cast<double>(samples.size());
  const double mean = sum / r;
  if (!(mean > 0.0)) {
    // Products of tiny likelihoods can all underflow; retry in log space.
    const auto logs = to_logs(samples);
    return mc_log_estimate_from_logs(logs);
  }
  double ss = 0.0;
  for (double s : samples) ss += (s - mean) * (s - mean);
  return {std::log(mean), ss / (r - 1.0) / (mean * mean * r)};
}

double bootstrap_log_variance(std::span<const double> log_samples, int resamples, std::uint64_t seed) {
  check_logs(log_samples);
  require(resamples >= 100, "bootstrap needs at least 100 resamples");
  const double shift = *std::max_element(log_samples.begin(), log_samples.end());
  if (!(shift > -std::numeric_limits<double>::infinity()))
    throw DegenerateLikelihood("every replication returned zero likelihood");
  std::vector<double> shifted(log_samples.size());
  std::transform(log_samples.begin(), log_samples.end(), shifted.begin(),
                 [shift](double l) { return std::exp(l - shift); });

  Rng rng = make_rng(seed, {0xb007ULL});
  std::uniform_int_distribution<std::size_t> pick(0, shifted.size() - 1);
  std::vector<double> logs;
  logs.reserve(static_cast<std::size_t>(resamples));
  const long max_attempts = 10L * resamples;
  for (long attempt = 0; attempt < max_attempts && static_cast<int>(logs.size()) < resamples; ++attempt) {
    double sum = 0.0;
    for (std::size_t k = 0; k < shifted.size(); ++k) sum += shifted[pick(rng)];
    if (sum > 0.0) logs.push_back(std::log(sum / static_cast<double>(shifted.size())));
  }
  if (static_cast<int>(logs.size()) < resamples)
    throw DegenerateLikelihood("too many bootstrap resamples had a nonpositive mean");

  double mean = 0.0;
  for (double l : logs) mean += l;
  mean /= static_cast<double>(logs.size());
  double ss = 0.0;
  for (double l : logs) ss += (l - mean) * (l - mean);
  return ss / static_cast<double>(logs.size() - 1);
}

double bootstrap_variance(std::span<const double> samples, int resamples, std::uint64_t seed) {
  require(samples.size() >= 2, "at least two replications are required");
  const auto logs = to_logs(samples);
  return bootstrap_log_variance(logs, resamples, seed);
}

}  // namespace gpmala
