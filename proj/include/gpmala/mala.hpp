#pragma once

#include "gpmala/random.hpp"
#include "gpmala/trajectory.hpp"
#include "gpmala/types.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

namespace gpmala {

struct MalaConfig {
  double step_size = 0.1;  ///< tau
  int max_steps = 1000;    ///< K, including the start point
  double burn_in_fraction = 0.2;
  int thinning = 1;
  std::uint64_t seed = 0;
  /// Adapt tau during burn-in toward target_acceptance, frozen afterwards.
  bool adapt_step = true;
  double target_acceptance = 0.574;

  void validate() const;
};

/// MALA output. accepted[k] tells whether state k was reached by accepting a
/// proposal (accepted[0] is true for the start); a rejected step repeats the state.
struct Chain {
  Matrix states;       ///< K x d
  Vector log_values;   ///< K
  Matrix gradients;    ///< K x d
  std::vector<bool> accepted;
  double step_size = 0.0;  ///< tau used after burn-in

  [[nodiscard]] Eigen::Index size() const { return states.rows(); }
  /// Fraction of accepted proposals over steps 1..K-1 (post burn-in when given).
  [[nodiscard]] double acceptance_rate(Eigen::Index from = 1) const;
};

/// Deterministic log-density with gradient; values of -inf or NaN reject.
struct LogDensity {
  std::function<double(const Vector&)> value;
  std::function<Vector(const Vector&)> gradient;
};

struct MalaState {
  Vector point;
  double value = 0.0;
  Vector gradient;
};

struct MalaStep {
  MalaState next;
  bool accepted = false;
  double log_alpha = 0.0;  ///< min(0, log acceptance ratio); -inf for auto-rejections
};

/// -|xp - x - tau grad|^2 / (4 tau).
[[nodiscard]] double log_proposal(const Vector& xp, const Vector& x, const Vector& grad, double tau);

/// One Metropolis-adjusted Langevin step. Proposals outside `domain` (when given)
/// or with a non-finite log density are rejected.
[[nodiscard]] MalaStep mala_step_deterministic(const LogDensity& target, const MalaState& current, double tau,
                                               Rng& rng, const std::optional<Box>& domain = std::nullopt);

/// Full deterministic-target chain of config.max_steps states.
[[nodiscard]] Chain run_mala(const LogDensity& target, const Vector& start, const MalaConfig& config,
                             const std::optional<Box>& domain = std::nullopt);

/// MALA against a lazily revealed GP realization: every proposal's (value, gradient)
/// is drawn from the trajectory and offered for admission before the accept test.
[[nodiscard]] Chain run_mala_on_trajectory(Trajectory& trajectory, const Vector& start, const MalaConfig& config,
                                           const Box& domain);

/// Drops the first floor(burn_in_fraction * K) states and keeps every thinning-th of the rest.
[[nodiscard]] Matrix postprocess(const Chain& chain, double burn_in_fraction, int thinning);

/// Smallest chain length whose post-processing yields at least `kept` states.
[[nodiscard]] int chain_length_for(int kept, double burn_in_fraction, int thinning);

/// Robbins-Monro update of log tau used during burn-in.
class StepSizeAdapter {
 public:
  StepSizeAdapter(double initial, double target);
  void update(double acceptance_probability);
  [[nodiscard]] double step_size() const { return step_; }
  [[nodiscard]] bool diverged() const { return step_ < 1e-8 || step_ > 1e4; }

 private:
  double initial_;
  double target_;
  double step_;
  double log_step_;
  int count_ = 0;
};

struct StepSizeTuning {
  double step_size = 0.0;
  double validation_acceptance = 0.0;
};

/// Adapts tau on a pilot chain (burn-in rule of MalaConfig) and measures the
/// acceptance of the frozen tau on a validation run of `validation_steps`.
[[nodiscard]] StepSizeTuning tune_step_size(double target_rate, const LogDensity& target, const Vector& start,
                                            const MalaConfig& config, int validation_steps = 5000,
                                            const std::optional<Box>& domain = std::nullopt);

}  // namespace gpmala
