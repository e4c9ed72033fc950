#pragma once

#include "gpmala/gp.hpp"
#include "gpmala/random.hpp"
#include "gpmala/types.hpp"

#include <cstdint>
#include <memory>
#include <optional>
#include <vector>

namespace gpmala {

struct TrajectoryConfig {
  /// Minimum Euclidean deviation of a draw from its conditional mean for it to be
  /// fixed into the realization (gamma). See default_admission_threshold().
  double admission_threshold = 0.0;
  /// Condition anchors on their value only instead of the full (value, gradient) block.
  bool values_only = false;
  /// Once this many anchors exist, draws condition on the `neighbor_count` anchors
  /// most correlated with the query under C_N instead of all of them.
  std::size_t anchor_cap = 500;
  std::size_t neighbor_count = 100;
  JitterPolicy jitter;
};

/// 0.01 times the prior standard deviation.
[[nodiscard]] double default_admission_threshold(const KernelParams& params);

struct JointDraw {
  double value = 0.0;
  Vector gradient;
};

struct Anchor {
  Vector point;
  double value = 0.0;
  Vector gradient;
};

/// One realization Z of a conditioned GP, revealed lazily: every admitted
/// (value, gradient) draw becomes conditioning data for the following draws.
/// Single-owner; not safe to share between threads.
class Trajectory {
 public:
  Trajectory(std::shared_ptr<const PosteriorGP> base, TrajectoryConfig config, std::uint64_t seed);

  /// Samples (Z(x), grad Z(x)) given the base data and every anchor. At an anchor
  /// location the stored anchor is returned without consuming randomness.
  JointDraw draw_at(const Vector& x);

  /// Appends (x, value, gradient) as an anchor iff its deviation from the current
  /// conditional mean at x exceeds the admission threshold.
  bool admit(const Vector& x, double value, const Vector& gradient);

  [[nodiscard]] JointDraw conditional_mean_at(const Vector& x) const;
  /// Conditional (d+1) covariance of (Z(x), grad Z(x)).
  [[nodiscard]] Matrix conditional_covariance_at(const Vector& x) const;

  [[nodiscard]] const std::vector<Anchor>& anchors() const { return anchors_; }
  [[nodiscard]] const PosteriorGP& base() const { return *base_; }
  [[nodiscard]] const TrajectoryConfig& config() const { return config_; }
  [[nodiscard]] int block_size() const { return block_; }
  /// True once the anchor cap has been reached and nearest-anchor conditioning is in use.
  [[nodiscard]] bool truncated() const { return anchors_.size() >= config_.anchor_cap; }

  /// Incrementally maintained lower factor of the anchor covariance (valid while not truncated).
  [[nodiscard]] Matrix anchor_factor() const;
  /// Anchor covariance under C_N rebuilt from scratch, with the same per-block jitter.
  [[nodiscard]] Matrix anchor_covariance() const;

 private:
  struct Conditional {
    Vector x;
    Vector mean;       // (d+1)
    Matrix cov;        // (d+1) x (d+1)
    Matrix solved;     // L_A^{-1} S^T restricted to the conditioning anchors, (b*A) x (d+1)
    Matrix whitened;   // L^{-1} r(x) block of the base GP, N x (d+1)
    Vector base_mean;  // (d+1) mean under the base GP only
    std::optional<std::size_t> replay;  // anchor index when x is an anchor location
  };

  [[nodiscard]] Conditional compute(const Vector& x) const;
  [[nodiscard]] std::optional<std::size_t> find_anchor(const Vector& x) const;
  [[nodiscard]] std::vector<std::size_t> nearest_anchors(const Vector& x, const Matrix& whitened) const;
  [[nodiscard]] Matrix prior_cross(const Vector& x, std::size_t anchor) const;
  [[nodiscard]] Matrix anchor_block(std::size_t i, std::size_t j) const;
  void append_anchor(const Conditional& cond, const Vector& observed, const JitteredFactor& block_factor);
  void reserve_anchor_storage(std::size_t anchors);

  std::shared_ptr<const PosteriorGP> base_;
  TrajectoryConfig config_;
  Rng rng_;
  int dim_;
  int block_;
  Vector base_residual_;  // L^{-1}(y - beta)

  std::vector<Anchor> anchors_;
  std::vector<double> block_jitter_;
  Matrix anchor_whitened_;  // N x capacity*b, stacked L^{-1} r(a_j)
  Vector anchor_base_mean_;  // capacity*b
  Matrix factor_;           // capacity*b square, lower-triangular leading block
  Vector rho_;              // L_A^{-1}(o_A - m_A)
  std::optional<Conditional> pending_;
};

}  // namespace gpmala
