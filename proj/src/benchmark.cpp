#include "gpmala/benchmark.hpp"

#include "gpmala/error.hpp"
#include "gpmala/kde.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

namespace gpmala {

namespace {

void check_point(const Vector& x) { require(x.size() == 2 && x.allFinite(), "benchmark input must be a finite 2-vector"); }

}  // namespace

double y_exact(const Vector& x) {
  check_point(x);
  const double a = x[0], b = x[1];
  return -(a * a * b * b + a * a + 0.95 * b * b - 8.0 * a - 8.0 * b) / 2.0;
}

Vector y_exact_gradient(const Vector& x) {
  check_point(x);
  const double a = x[0], b = x[1];
  Vector g(2);
  g[0] = -(2.0 * a * b * b + 2.0 * a - 8.0) / 2.0;
  g[1] = -(2.0 * a * a * b + 1.9 * b - 8.0) / 2.0;
  return g;
}

double log_g_analytic(const Vector& x, double z) { return y_exact(x) + z - 0.5; }

double g_analytic(const Vector& x, double z) { return std::exp(log_g_analytic(x, z)); }

double benchmark_noise_variance(int replications) {
  require(replications >= 1, "replications must be positive");
  return (std::numbers::e - 1.0) / replications;
}

Box benchmark_domain() { return {Vector::Constant(2, -1.0), Vector::Constant(2, 8.0)}; }

Matrix reference_posterior_samples(int count, std::uint64_t seed, const ReferenceSampling& opts) {
  require(count >= 1, "sample count must be positive");
  require(opts.chains >= 1, "need at least one chain");
  const Box domain = benchmark_domain();
  const LogDensity target{[](const Vector& x) { return y_exact(x); }, [](const Vector& x) { return y_exact_gradient(x); }};
  Matrix out(count, 2);
  Eigen::Index filled = 0;
  for (int c = 0; c < opts.chains; ++c) {
    const int share = count / opts.chains + (c < count % opts.chains ? 1 : 0);
    if (share == 0) continue;
    Rng rng = make_rng(seed, {0x4ef0ULL, static_cast<std::uint64_t>(c)});
    const Vector start = uniform_in(domain, rng);
    MalaConfig cfg;
    cfg.step_size = opts.step_size;
    cfg.burn_in_fraction = opts.burn_in_fraction;
    cfg.thinning = opts.thinning;
    cfg.seed = derive_seed(seed, {0x4ef1ULL, static_cast<std::uint64_t>(c)});
    cfg.max_steps = chain_length_for(share, cfg.burn_in_fraction, cfg.thinning);
    const Chain chain = run_mala(target, start, cfg, domain);
    out.middleRows(filled, share) = postprocess(chain, cfg.burn_in_fraction, cfg.thinning).topRows(share);
    filled += share;
  }
  return out;
}

Matrix subsample_rows(const Matrix& points, Eigen::Index count, std::uint64_t seed) {
  require(count >= 0, "subsample size must be nonnegative");
  if (count >= points.rows()) return points;
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(points.rows()));
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng = make_rng(seed, {0x5b5ULL});
  // Partial Fisher-Yates.
  for (Eigen::Index i = 0; i < count; ++i) {
    std::uniform_int_distribution<Eigen::Index> pick(i, points.rows() - 1);
    std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(pick(rng))]);
  }
  Matrix out(count, points.cols());
  for (Eigen::Index i = 0; i < count; ++i) out.row(i) = points.row(idx[static_cast<std::size_t>(i)]);
  return out;
}

int count_modes(const Vector& values) {
  const Eigen::Index n = values.size();
  int modes = 0;
  Eigen::Index i = 0;
  while (i < n) {
    Eigen::Index j = i;
    while (j + 1 < n && values[j + 1] == values[i]) ++j;
    const bool left = i == 0 || values[i - 1] < values[i];
    const bool right = j == n - 1 || values[j + 1] < values[i];
    if (left && right && n > 1) ++modes;
    i = j + 1;
  }
  return modes;
}

int count_kde_modes_1d(const Vector& samples, double window, double lo, double hi, int grid_size) {
  require(grid_size >= 3 && hi > lo, "mode grid must have at least three points on a nonempty interval");
  const KdeModel kde = KdeModel::fit(Matrix(samples), window);
  const Vector grid = Vector::LinSpaced(grid_size, lo, hi);
  return count_modes(kde.evaluate_many(Matrix(grid)));
}

}  // namespace gpmala
