#include "gpmala/kernel.hpp"

#include "gpmala/error.hpp"

#include <cmath>

namespace gpmala {

namespace {

constexpr double kSqrt5 = 2.23606797749978969641;

// One tensor factor of the Matérn 5/2 kernel as a function of r = x - x',
// together with its first and second derivatives in r.
struct Factor {
  double value;
  double d1;
  double d2;
};

inline Factor matern_factor(double r, double lengthscale) {
  const double a = kSqrt5 / lengthscale;
  const double s = a * std::abs(r);
  const double e = std::exp(-s);
  const double a2_3 = a * a / 3.0;
  return {(1.0 + s + s * s / 3.0) * e, -a2_3 * r * (1.0 + s) * e, -a2_3 * (1.0 + s - s * s) * e};
}

inline double matern_value(double r, double lengthscale) {
  const double s = kSqrt5 * std::abs(r) / lengthscale;
  return (1.0 + s + s * s / 3.0) * std::exp(-s);
}

void check_inputs(const Eigen::Ref<const Vector>& x, const Eigen::Ref<const Vector>& xp, const KernelParams& params) {
  require(x.size() == params.dim() && xp.size() == params.dim(), "kernel input dimension mismatch");
  require(x.allFinite() && xp.allFinite(), "kernel inputs must be finite");
}

}  // namespace

void KernelParams::validate() const {
  require(std::isfinite(beta), "beta must be finite");
  require(std::isfinite(sigma2) && sigma2 > 0.0, "sigma2 must be positive");
  require(lengthscales.size() > 0, "at least one lengthscale is required");
  require(lengthscales.allFinite() && (lengthscales.array() > 0.0).all(), "lengthscales must be positive");
}

double matern52_kernel(const Eigen::Ref<const Vector>& x, const Eigen::Ref<const Vector>& xp,
                       const KernelParams& params) {
  check_inputs(x, xp, params);
  double c = params.sigma2;
  for (int i = 0; i < params.dim(); ++i) c *= matern_value(x[i] - xp[i], params.lengthscales[i]);
  return c;
}

KernelGradients kernel_gradients(const Eigen::Ref<const Vector>& x, const Eigen::Ref<const Vector>& xp,
                                 const KernelParams& params) {
  const Matrix block = joint_prior_covariance(x, xp, params);
  const int d = params.dim();
  return {block.col(0).tail(d), block.bottomRightCorner(d, d)};
}

Matrix joint_prior_covariance(const Eigen::Ref<const Vector>& x, const Eigen::Ref<const Vector>& xp,
                              const KernelParams& params) {
  check_inputs(x, xp, params);
  const int d = params.dim();
  Eigen::ArrayXd f(d), f1(d), f2(d);
  for (int i = 0; i < d; ++i) {
    const auto fac = matern_factor(x[i] - xp[i], params.lengthscales[i]);
    f[i] = fac.value;
    f1[i] = fac.d1;
    f2[i] = fac.d2;
  }
  // Products over all factors but i (and j) without dividing by f, which may underflow.
  auto product_except = [&](int skip_a, int skip_b) {
    double p = params.sigma2;
    for (int k = 0; k < d; ++k)
      if (k != skip_a && k != skip_b) p *= f[k];
    return p;
  };

  Matrix block(d + 1, d + 1);
  block(0, 0) = product_except(-1, -1);
  for (int i = 0; i < d; ++i) {
    const double rest = product_except(i, -1);
    block(i + 1, 0) = f1[i] * rest;   // dC/dx_i
    block(0, i + 1) = -f1[i] * rest;  // dC/dx'_i
  }
  for (int i = 0; i < d; ++i) {
    block(i + 1, i + 1) = -f2[i] * product_except(i, -1);
    for (int j = i + 1; j < d; ++j) {
      const double v = -f1[i] * f1[j] * product_except(i, j);
      block(i + 1, j + 1) = v;
      block(j + 1, i + 1) = v;
    }
  }
  return block;
}

Matrix joint_prior_variance(const KernelParams& params) {
  const int d = params.dim();
  Matrix block = Matrix::Zero(d + 1, d + 1);
  block(0, 0) = params.sigma2;
  for (int i = 0; i < d; ++i)
    block(i + 1, i + 1) = 5.0 * params.sigma2 / (3.0 * params.lengthscales[i] * params.lengthscales[i]);
  return block;
}

Matrix gram_matrix(const Matrix& points, const KernelParams& params) {
  const Eigen::Index n = points.rows();
  const int d = params.dim();
  require(points.cols() == d, "point dimension does not match kernel");
  Matrix gram(n, n);
  for (Eigen::Index a = 0; a < n; ++a) {
    gram(a, a) = params.sigma2;
    for (Eigen::Index b = a + 1; b < n; ++b) {
      double c = params.sigma2;
      for (int i = 0; i < d; ++i) c *= matern_value(points(a, i) - points(b, i), params.lengthscales[i]);
      gram(a, b) = c;
      gram(b, a) = c;
    }
  }
  return gram;
}

}  // namespace gpmala
