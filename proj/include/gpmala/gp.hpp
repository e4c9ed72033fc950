#pragma once

#include "gpmala/kernel.hpp"
#include "gpmala/types.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace gpmala {

/// Noisy observations y_n of the latent function at N design points, with the
/// diagonal of the noise covariance.
struct TrainingData {
  Matrix points;     ///< N x d
  Vector values;     ///< N
  Vector noise_vars;  ///< N, nonnegative

  [[nodiscard]] Eigen::Index size() const { return points.rows(); }
  [[nodiscard]] int dim() const { return static_cast<int>(points.cols()); }
  void validate() const;
};

/// Merges exactly repeated inputs into one observation: the values are averaged
/// and the variance of that average is mean(noise) / count. Order of first
/// occurrence is preserved.
[[nodiscard]] TrainingData merge_duplicates(const TrainingData& data);

/// Diagonal jitter schedule: start * sigma2, multiplied by `growth` until `max * sigma2`.
struct JitterPolicy {
  double start = 1e-10;
  double max = 1e-4;
  double growth = 10.0;
};

/// Lower Cholesky factor of `matrix + jitter * I`, escalating the jitter per the policy
/// (relative to `scale`). Returns the factor and the applied jitter; throws
/// IllConditionedGram when every level fails.
struct JitteredFactor {
  Matrix lower;
  double jitter = 0.0;
};
[[nodiscard]] JitteredFactor jittered_cholesky(const Matrix& matrix, double scale, const JitterPolicy& policy);

struct Prediction {
  Vector mean;
  Matrix cov;
};

/// Gaussian process conditioned on noisy data (mu_N, C_N). Immutable once built.
class PosteriorGP {
 public:
  /// Merges duplicate inputs, factorizes C + Gamma + jitter I and solves for the weights.
  /// An empty data set gives the prior.
  static PosteriorGP condition(const TrainingData& data, const KernelParams& params, const JitterPolicy& jitter = {});

  [[nodiscard]] const KernelParams& params() const { return params_; }
  [[nodiscard]] const TrainingData& data() const { return data_; }
  [[nodiscard]] const Matrix& gram_factor() const { return factor_; }
  [[nodiscard]] const Vector& weights() const { return weights_; }
  [[nodiscard]] double jitter() const { return jitter_; }
  [[nodiscard]] int dim() const { return params_.dim(); }

  [[nodiscard]] double mean(const Eigen::Ref<const Vector>& x) const;
  [[nodiscard]] Vector mean_gradient(const Eigen::Ref<const Vector>& x) const;
  [[nodiscard]] Prediction predict(const Matrix& queries) const;

  /// Joint law of (Y_N(x), grad Y_N(x)): (d+1) mean and covariance.
  [[nodiscard]] Prediction predict_joint_with_gradient(const Eigen::Ref<const Vector>& x) const;

  /// Rows n hold cov(Y(x_n), (Y(x), grad Y(x))) under the prior: N x (d+1).
  [[nodiscard]] Matrix joint_cross_covariance(const Eigen::Ref<const Vector>& x) const;
  /// L^{-1} times joint_cross_covariance(x), used to form posterior cross-covariances.
  [[nodiscard]] Matrix whitened_cross_covariance(const Eigen::Ref<const Vector>& x) const;
  /// Posterior mean of (Y_N(x), grad Y_N(x)) given the prior cross-covariance rows.
  [[nodiscard]] Vector joint_mean(const Matrix& cross) const;

 private:
  KernelParams params_;
  TrainingData data_;
  Matrix factor_;
  Vector weights_;
  double jitter_ = 0.0;
};

/// -1/2 r^T (C+Gamma)^{-1} r - 1/2 log det(C+Gamma) - N/2 log(2 pi) with r = y - beta.
[[nodiscard]] double log_marginal_likelihood(const TrainingData& data, const KernelParams& params,
                                             const JitterPolicy& jitter = {});

/// Generalized-least-squares estimate of the constant mean for fixed (sigma2, lengthscales).
[[nodiscard]] double profiled_beta(const TrainingData& data, const KernelParams& params,
                                   const JitterPolicy& jitter = {});

struct HyperparameterSearch {
  int starts = 10;
  int iterations = 200;
  double lengthscale_low = 0.01;  ///< times the domain width
  double lengthscale_high = 2.0;
  double sigma2_low = 1e-4;  ///< times var(y)
  double sigma2_high = 1e4;
  double sigma2_floor = 1e-12;
  std::uint64_t seed = 0;
  /// Per-dimension widths used to scale lengthscales; the data range when empty.
  Vector domain_width;
  /// Additional start points (e.g. the previous round's optimum).
  std::vector<KernelParams> extra_starts;
  JitterPolicy jitter;
};

struct HyperparameterFit {
  KernelParams params;
  double log_likelihood = 0.0;
  std::vector<double> start_log_likelihoods;  ///< profiled likelihood at each start point
};

/// Multi-start Nelder-Mead maximization of the profiled likelihood over
/// (log sigma2, log lengthscales); beta is set to its GLS estimate.
[[nodiscard]] HyperparameterFit fit_hyperparameters(const TrainingData& data, const HyperparameterSearch& search);

}  // namespace gpmala
