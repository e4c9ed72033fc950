#pragma once

#include "gpmala/ensemble.hpp"
#include "gpmala/mala.hpp"

#include <cstdint>
#include <vector>

namespace gpmala {

/// log g(x, z) = y(x) + z - 1/2 on the two-mode test problem.
[[nodiscard]] double log_g_analytic(const Vector& x, double z);
[[nodiscard]] double g_analytic(const Vector& x, double z);
/// E_Z[g(x, Z)] is exp(y_exact(x)) for standard normal Z.
[[nodiscard]] double y_exact(const Vector& x);
[[nodiscard]] Vector y_exact_gradient(const Vector& x);
/// (e - 1) / R.
[[nodiscard]] double benchmark_noise_variance(int replications);
[[nodiscard]] Box benchmark_domain();

class AnalyticProblem : public Problem {
 public:
  [[nodiscard]] Box domain() const override { return benchmark_domain(); }
  [[nodiscard]] Vector draw_z(Rng& rng) const override { return standard_normal(1, rng); }
  [[nodiscard]] double log_g(const Vector& x, const Vector& z) const override { return log_g_analytic(x, z[0]); }
  [[nodiscard]] std::optional<double> noise_variance(int replications) const override {
    return benchmark_noise_variance(replications);
  }
};

struct ReferenceSampling {
  int chains = 20;
  int thinning = 200;
  double burn_in_fraction = 0.2;
  double step_size = 0.5;
};

/// `count` points from exp(y_exact) restricted to the domain, pooled over
/// independent deterministic-target MALA chains with uniform starts.
[[nodiscard]] Matrix reference_posterior_samples(int count, std::uint64_t seed, const ReferenceSampling& opts = {});

/// Solves min sum_i cost(i, assignment[i]) over permutations of an n x n problem.
/// `row_costs(i, out)` fills out with the costs of row i against every column.
[[nodiscard]] std::vector<int> linear_assignment(int n, const std::function<void(int, Vector&)>& row_costs);

/// Exact W1 between two equal-size empirical measures with Euclidean cost.
[[nodiscard]] double wasserstein1(const Matrix& a, const Matrix& b);

/// Uniform subsample of rows without replacement (the rows themselves when count >= rows).
[[nodiscard]] Matrix subsample_rows(const Matrix& points, Eigen::Index count, std::uint64_t seed);

/// Strict local maxima of a sampled curve; a flat top counts once.
[[nodiscard]] int count_modes(const Vector& values);

/// Modes of the 1D KDE of `samples` with the given window, evaluated on `grid_size` points of [lo, hi].
[[nodiscard]] int count_kde_modes_1d(const Vector& samples, double window, double lo, double hi, int grid_size = 2001);

}  // namespace gpmala
