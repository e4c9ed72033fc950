#include "gpmala/mala.hpp"

#include "gpmala/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace gpmala {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

Vector propose(const MalaState& current, double tau, Rng& rng) {
  const auto d = static_cast<int>(current.point.size());
  return current.point + tau * current.gradient + std::sqrt(2.0 * tau) * standard_normal(d, rng);
}

double log_ratio(const MalaState& current, const Vector& proposal, double value, const Vector& gradient, double tau) {
  const double log_r = value - current.value + log_proposal(current.point, proposal, gradient, tau) -
                       log_proposal(proposal, current.point, current.gradient, tau);
  return std::isnan(log_r) ? kNegInf : std::min(0.0, log_r);
}

struct ChainBuilder {
  Chain chain;
  Eigen::Index next = 0;

  ChainBuilder(int steps, int dim) {
    chain.states.resize(steps, dim);
    chain.log_values.resize(steps);
    chain.gradients.resize(steps, dim);
    chain.accepted.assign(static_cast<std::size_t>(steps), false);
  }

  void push(const MalaState& s, bool accepted) {
    chain.states.row(next) = s.point.transpose();
    chain.log_values[next] = s.value;
    chain.gradients.row(next) = s.gradient.transpose();
    chain.accepted[static_cast<std::size_t>(next)] = accepted;
    ++next;
  }
};

int adaptation_steps(const MalaConfig& config) {
  return config.adapt_step ? static_cast<int>(std::floor(config.burn_in_fraction * config.max_steps)) : 0;
}

}  // namespace

void MalaConfig::validate() const {
  require(std::isfinite(step_size) && step_size > 0.0, "MALA step size must be positive");
  require(max_steps >= 1, "MALA needs at least one step");
  require(burn_in_fraction >= 0.0 && burn_in_fraction < 1.0, "burn-in fraction must lie in [0, 1)");
  require(thinning >= 1, "thinning must be at least 1");
  require(target_acceptance > 0.0 && target_acceptance < 1.0, "target acceptance must lie in (0, 1)");
}

double Chain::acceptance_rate(Eigen::Index from) const {
  from = std::max<Eigen::Index>(from, 1);
  if (size() <= from) return 0.0;
  Eigen::Index count = 0;
  for (Eigen::Index k = from; k < size(); ++k) count += accepted[static_cast<std::size_t>(k)] ? 1 : 0;
  return static_cast<double>(count) / static_cast<double>(size() - from);
}

double log_proposal(const Vector& xp, const Vector& x, const Vector& grad, double tau) {
  require(tau > 0.0, "tau must be positive");
  return -(xp - x - tau * grad).squaredNorm() / (4.0 * tau);
}

MalaStep mala_step_deterministic(const LogDensity& target, const MalaState& current, double tau, Rng& rng,
                                 const std::optional<Box>& domain) {
  require(tau > 0.0, "tau must be positive");
  const Vector proposal = propose(current, tau, rng);
  const double log_u = std::log(uniform01(rng));
  MalaStep step{current, false, kNegInf};
  if (!proposal.allFinite() || (domain && !domain->contains(proposal))) return step;
  const double value = target.value(proposal);
  if (!std::isfinite(value)) return step;
  const Vector gradient = target.gradient(proposal);
  if (!gradient.allFinite()) return step;
  step.log_alpha = log_ratio(current, proposal, value, gradient, tau);
  if (step.log_alpha >= log_u) {
    step.next = {proposal, value, gradient};
    step.accepted = true;
  }
  return step;
}

StepSizeAdapter::StepSizeAdapter(double initial, double target)
    : initial_(initial), target_(target), step_(initial), log_step_(std::log(initial)) {}

void StepSizeAdapter::update(double acceptance_probability) {
  ++count_;
  const double gain = 2.0 / std::pow(static_cast<double>(count_), 0.6);
  log_step_ += gain * (acceptance_probability - target_);
  log_step_ = std::clamp(log_step_, std::log(1e-9), std::log(1e5));
  step_ = std::exp(log_step_);
}

Chain run_mala(const LogDensity& target, const Vector& start, const MalaConfig& config,
               const std::optional<Box>& domain) {
  config.validate();
  require(start.allFinite(), "start point must be finite");
  require(!domain || domain->contains(start), "start point must lie inside the domain");
  MalaState current{start, target.value(start), target.gradient(start)};
  require(std::isfinite(current.value) && current.gradient.allFinite(),
          "log density must be finite at the start point");

  Rng rng = make_rng(config.seed, {0x3a1aULL});
  ChainBuilder builder(config.max_steps, static_cast<int>(start.size()));
  builder.push(current, true);
  StepSizeAdapter adapter(config.step_size, config.target_acceptance);
  const int adapt = adaptation_steps(config);
  double tau = config.step_size;
  for (int k = 1; k < config.max_steps; ++k) {
    const MalaStep step = mala_step_deterministic(target, current, tau, rng, domain);
    current = step.next;
    builder.push(current, step.accepted);
    if (k <= adapt) {
      adapter.update(std::exp(step.log_alpha));
      tau = adapter.step_size();
      if (k == adapt && adapter.diverged()) tau = config.step_size;
    }
  }
  builder.chain.step_size = tau;
  return std::move(builder.chain);
}

Chain run_mala_on_trajectory(Trajectory& trajectory, const Vector& start, const MalaConfig& config,
                             const Box& domain) {
  config.validate();
  require(domain.contains(start), "start point must lie inside the domain");
  const int d = static_cast<int>(start.size());
  Rng rng = make_rng(config.seed, {0x7a1aULL});

  JointDraw first = trajectory.draw_at(start);
  trajectory.admit(start, first.value, first.gradient);
  MalaState current{start, first.value, first.gradient};

  ChainBuilder builder(config.max_steps, d);
  builder.push(current, true);
  StepSizeAdapter adapter(config.step_size, config.target_acceptance);
  const int adapt = adaptation_steps(config);
  double tau = config.step_size;
  for (int k = 1; k < config.max_steps; ++k) {
    const Vector proposal = propose(current, tau, rng);
    const double log_u = std::log(uniform01(rng));
    double log_alpha = kNegInf;
    bool accepted = false;
    if (proposal.allFinite() && domain.contains(proposal)) {
      const JointDraw draw = trajectory.draw_at(proposal);
      trajectory.admit(proposal, draw.value, draw.gradient);
      log_alpha = log_ratio(current, proposal, draw.value, draw.gradient, tau);
      if (log_alpha >= log_u) {
        current = {proposal, draw.value, draw.gradient};
        accepted = true;
      }
    }
    builder.push(current, accepted);
    if (k <= adapt) {
      adapter.update(std::exp(log_alpha));
      tau = adapter.step_size();
      if (k == adapt && adapter.diverged()) tau = config.step_size;
    }
  }
  builder.chain.step_size = tau;
  return std::move(builder.chain);
}

Matrix postprocess(const Chain& chain, double burn_in_fraction, int thinning) {
  require(chain.size() >= 1, "chain must be nonempty");
  require(burn_in_fraction >= 0.0 && burn_in_fraction < 1.0, "burn-in fraction must lie in [0, 1)");
  require(thinning >= 1, "thinning must be at least 1");
  const auto burn = static_cast<Eigen::Index>(std::floor(burn_in_fraction * static_cast<double>(chain.size())));
  const Eigen::Index kept = (chain.size() - burn) / thinning;
  if (kept == 0) throw InsufficientChain("post-processing left no states");
  Matrix out(kept, chain.states.cols());
  for (Eigen::Index i = 0; i < kept; ++i) out.row(i) = chain.states.row(burn + (i + 1) * thinning - 1);
  return out;
}

int chain_length_for(int kept, double burn_in_fraction, int thinning) {
  require(kept >= 1 && thinning >= 1, "kept count and thinning must be positive");
  require(burn_in_fraction >= 0.0 && burn_in_fraction < 1.0, "burn-in fraction must lie in [0, 1)");
  int length = std::max(1, static_cast<int>(std::floor(kept * thinning / (1.0 - burn_in_fraction))) - 2);
  while ((length - static_cast<int>(std::floor(burn_in_fraction * length))) / thinning < kept) ++length;
  return length;
}

StepSizeTuning tune_step_size(double target_rate, const LogDensity& target, const Vector& start,
                              const MalaConfig& config, int validation_steps, const std::optional<Box>& domain) {
  require(target_rate > 0.0 && target_rate < 1.0, "target acceptance rate must lie in (0, 1)");
  require(validation_steps >= 2, "validation run needs at least two steps");
  StepSizeTuning out;
  out.step_size = config.step_size;
  if (config.adapt_step) {
    MalaConfig pilot = config;
    pilot.target_acceptance = target_rate;
    out.step_size = run_mala(target, start, pilot, domain).step_size;
  }
  MalaConfig validation = config;
  validation.adapt_step = false;
  validation.step_size = out.step_size;
  validation.max_steps = validation_steps;
  validation.seed = derive_seed(config.seed, {0x7a11dULL});
  out.validation_acceptance = run_mala(target, start, validation, domain).acceptance_rate();
  return out;
}

}  // namespace gpmala
