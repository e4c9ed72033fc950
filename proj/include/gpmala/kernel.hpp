#pragma once

#include "gpmala/types.hpp"

namespace gpmala {

/// Hyperparameters of the constant-mean, tensorized Matérn 5/2 prior.
struct KernelParams {
  double beta = 0.0;    ///< constant prior mean
  double sigma2 = 1.0;  ///< prior variance
  Vector lengthscales;  ///< one positive lengthscale per input dimension

  [[nodiscard]] int dim() const { return static_cast<int>(lengthscales.size()); }
  /// Throws InvalidArgument unless sigma2 > 0 and every lengthscale > 0.
  void validate() const;
};

/// sigma2 * prod_i (1 + sqrt5 u_i + 5/3 u_i^2) exp(-sqrt5 u_i), u_i = |x_i - x'_i| / l_i.
[[nodiscard]] double matern52_kernel(const Eigen::Ref<const Vector>& x, const Eigen::Ref<const Vector>& xp,
                                     const KernelParams& params);

struct KernelGradients {
  Vector first;  ///< dC/dx_i, derivative in the first argument
  Matrix cross;  ///< d2C/(dx_i dx'_j)
};

[[nodiscard]] KernelGradients kernel_gradients(const Eigen::Ref<const Vector>& x, const Eigen::Ref<const Vector>& xp,
                                               const KernelParams& params);

/// Covariance between (Y(x), grad Y(x)) and (Y(xp), grad Y(xp)) under the prior,
/// a (d+1)x(d+1) block with the value component first.
[[nodiscard]] Matrix joint_prior_covariance(const Eigen::Ref<const Vector>& x, const Eigen::Ref<const Vector>& xp,
                                            const KernelParams& params);

/// Prior covariance of (Y(x), grad Y(x)) with itself: blockdiag(sigma2, 5 sigma2 / (3 l_i^2)).
[[nodiscard]] Matrix joint_prior_variance(const KernelParams& params);

/// Gram matrix C(points_n, points_m) of an N x d point set.
[[nodiscard]] Matrix gram_matrix(const Matrix& points, const KernelParams& params);

}  // namespace gpmala
