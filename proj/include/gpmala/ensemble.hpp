#pragma once

#include "gpmala/gp.hpp"
#include "gpmala/kde.hpp"
#include "gpmala/mala.hpp"
#include "gpmala/noise.hpp"
#include "gpmala/trajectory.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace gpmala {

/// Runs task(i) for i in [0, count) on up to `workers` threads. Exceptions are
/// rethrown (the one from the lowest index) after all threads finish.
void parallel_for(int count, int workers, const std::function<void(int)>& task);

struct EnsembleMeta {
  int design_size = 0;  ///< N
  std::string strategy;
  std::uint64_t seed = 0;
};

/// M KDE models of a common size; their stacked points form the candidate pool.
struct EnsembleEstimate {
  std::vector<KdeModel> models;
  Matrix all_points;
  EnsembleMeta meta;

  EnsembleEstimate(std::vector<KdeModel> kdes, EnsembleMeta info = {});
  [[nodiscard]] int size() const { return static_cast<int>(models.size()); }
  [[nodiscard]] int dim() const { return static_cast<int>(all_points.cols()); }
  [[nodiscard]] Eigen::Index kept() const { return models.front().size(); }
};

[[nodiscard]] double estimate_density(const EnsembleEstimate& ens, const Vector& x);
/// Sample variance (divisor M - 1) of the model densities at x.
[[nodiscard]] double estimate_variance(const EnsembleEstimate& ens, const Vector& x);

struct DensityVariance {
  Vector density;
  Vector variance;
};
[[nodiscard]] DensityVariance estimate_many(const EnsembleEstimate& ens, const Matrix& queries, int workers = 1);

/// Draws from h-tilde: a uniformly chosen model, then one draw from it.
[[nodiscard]] Matrix sample_mixture(const EnsembleEstimate& ens, Eigen::Index count, Rng& rng);

/// Pool candidate with the largest variance, lowest index on ties.
[[nodiscard]] Vector select_next_point(const EnsembleEstimate& ens, int workers = 1);
[[nodiscard]] Matrix select_batch(const EnsembleEstimate& ens, int batch_size, double min_separation,
                                  int workers = 1);

/// `count` points of the 2,3,5,... Halton sequence mapped into the domain,
/// with a seeded Cranley-Patterson rotation.
[[nodiscard]] Matrix halton_pool(const Box& domain, int count, std::uint64_t seed);
/// Maximin candidate over halton_pool(domain, pool_size, seed); first candidate when `existing` is empty.
[[nodiscard]] Vector space_filling_next(const Matrix& existing, const Box& domain, int pool_size,
                                        std::uint64_t seed = 0);
/// Greedy maximin design of `count` points from the same pool.
[[nodiscard]] Matrix initial_design(const Box& domain, int count, int pool_size, std::uint64_t seed);

/// Monte-Carlo integral of the ensemble variance over the domain.
[[nodiscard]] double integrated_variance(const EnsembleEstimate& ens, const Box& domain, int points,
                                         std::uint64_t seed, int workers = 1);

/// Expensive stochastic model: log g(x, z) for a nuisance realization z.
class Problem {
 public:
  virtual ~Problem() = default;
  [[nodiscard]] virtual Box domain() const = 0;
  [[nodiscard]] int dim() const { return domain().dim(); }
  [[nodiscard]] virtual Vector draw_z(Rng& rng) const = 0;
  [[nodiscard]] virtual double log_g(const Vector& x, const Vector& z) const = 0;
  /// R replications at x; override to farm them out.
  [[nodiscard]] virtual std::vector<double> log_replications(const Vector& x, int replications, Rng& rng) const;
  /// Variance of the log Monte-Carlo mean when known in closed form.
  [[nodiscard]] virtual std::optional<double> noise_variance(int /*replications*/) const { return std::nullopt; }
};

enum class Strategy { var_based, space_filling };
[[nodiscard]] std::string to_string(Strategy s);
[[nodiscard]] Strategy parse_strategy(const std::string& s);

enum class NoiseEstimator { automatic, delta, bootstrap };

struct CalibrationConfig {
  int initial_size = 20;     ///< N0
  int max_size = 100;        ///< N_max
  int replications = 100;    ///< R
  int chains = 100;          ///< M
  int kept = 100;            ///< K-tilde per chain
  int batch = 1;
  double batch_separation = 0.0;
  Strategy strategy = Strategy::var_based;
  std::uint64_t seed = 0;
  int workers = 1;

  MalaConfig mala;  ///< max_steps is derived from kept, burn-in and thinning
  TrajectoryConfig trajectory;
  HyperparameterSearch search;
  NoiseEstimator noise = NoiseEstimator::automatic;
  int bootstrap_resamples = 2000;

  int halton_size = 4096;
  int variance_points = 10000;
  /// Round sizes N at which integrated variance is computed; empty means every round.
  std::vector<int> metric_sizes;

  void validate(int dim) const;
};

struct RoundRecord {
  int design_size = 0;
  std::vector<NoisyObservation> observations;
  KernelParams params;
  double log_likelihood = 0.0;
  std::optional<double> w1;
  std::optional<double> integrated_variance;
  double acceptance_rate = 0.0;
  long anchors_total = 0;
  double wall_ms = 0.0;
  int attempts = 1;
};

struct CalibrationHistory {
  std::vector<RoundRecord> rounds;
};

/// Called once per round after the ensemble is fitted, before enrichment; may fill record.w1.
using RoundObserver = std::function<void(RoundRecord&, const EnsembleEstimate&)>;

/// One round's ensemble: M trajectories on the conditioned GP, MALA, post-processing and KDE.
struct EnsembleRun {
  EnsembleEstimate ensemble;
  double acceptance_rate = 0.0;
  long anchors_total = 0;
};
[[nodiscard]] EnsembleRun run_ensemble(std::shared_ptr<const PosteriorGP> gp, const Box& domain,
                                       const CalibrationConfig& config, std::uint64_t round_seed);

[[nodiscard]] NoisyObservation observe(const Problem& problem, const Vector& x, const CalibrationConfig& config,
                                       std::uint64_t seed);

[[nodiscard]] CalibrationHistory run_calibration(const Problem& problem, const CalibrationConfig& config,
                                                 const RoundObserver& observer = {});

}  // namespace gpmala
