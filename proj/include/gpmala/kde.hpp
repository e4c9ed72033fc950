#pragma once

#include "gpmala/random.hpp"
#include "gpmala/types.hpp"

#include <optional>

namespace gpmala {

/// Lower factor of the unbiased sample covariance (mean divided by K).
/// A singular covariance gets `ridge * trace/d` on its diagonal (ridge * 1 when
/// the trace vanishes); ridge = 0 turns that off.
[[nodiscard]] Matrix sample_cov_sqrt(const Matrix& points, double ridge = 1e-8);

/// (4 / (K (d + 2)))^(1 / (d + 4)).
[[nodiscard]] double silverman_window(Eigen::Index count, int dim);

/// Leave-one-out likelihood maximizer over 40 log-spaced windows in
/// [0.05, 5] * silverman_window. Ties go to the smaller window.
[[nodiscard]] double select_window(const Matrix& points, const Matrix& cov_sqrt);

/// Gaussian KDE with bandwidth matrix B = window * cov_sqrt.
class KdeModel {
 public:
  KdeModel(Matrix points, Matrix cov_sqrt, double window);

  /// Covariance factor from the points, window by leave-one-out unless given.
  static KdeModel fit(const Matrix& points, std::optional<double> window = std::nullopt, double ridge = 1e-8);

  [[nodiscard]] const Matrix& points() const { return points_; }
  [[nodiscard]] const Matrix& cov_sqrt() const { return cov_sqrt_; }
  [[nodiscard]] double window() const { return window_; }
  [[nodiscard]] double log_det_bandwidth() const { return log_det_bandwidth_; }
  [[nodiscard]] Matrix bandwidth() const { return window_ * cov_sqrt_; }
  [[nodiscard]] int dim() const { return static_cast<int>(points_.cols()); }
  [[nodiscard]] Eigen::Index size() const { return points_.rows(); }

  [[nodiscard]] double evaluate(const Vector& x) const;
  [[nodiscard]] double log_evaluate(const Vector& x) const;
  /// Row-wise evaluation of many queries at once.
  [[nodiscard]] Vector evaluate_many(const Matrix& queries) const;
  [[nodiscard]] Vector log_evaluate_many(const Matrix& queries) const;

  /// Draws from the mixture: a uniformly chosen center plus B times a standard normal.
  [[nodiscard]] Matrix sample(Eigen::Index count, Rng& rng) const;

 private:
  [[nodiscard]] Matrix whiten(const Matrix& rows) const;

  Matrix points_;
  Matrix cov_sqrt_;
  double window_;
  double log_det_bandwidth_;
  double log_norm_;           // -log K - log det B - d/2 log(2 pi)
  Matrix whitened_;           // B^-1 x_k, one per row
  Vector whitened_sq_norms_;
};

}  // namespace gpmala
