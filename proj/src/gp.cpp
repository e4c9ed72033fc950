#include "gpmala/gp.hpp"

#include "gpmala/error.hpp"
#include "gpmala/random.hpp"

#include <gsl/gsl_multimin.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <memory>
#include <numbers>

namespace gpmala {

void TrainingData::validate() const {
  require(values.size() == points.rows() && noise_vars.size() == points.rows(),
          "training data sizes are inconsistent");
  require(points.allFinite() && values.allFinite() && noise_vars.allFinite(), "training data must be finite");
  require((noise_vars.array() >= 0.0).all(), "noise variances must be nonnegative");
}

TrainingData merge_duplicates(const TrainingData& data) {
  data.validate();
  struct Group {
    Eigen::Index first;
    double value_sum = 0.0;
    double noise_sum = 0.0;
    int count = 0;
  };
  std::map<std::vector<double>, std::size_t> index;
  std::vector<Group> groups;
  for (Eigen::Index n = 0; n < data.size(); ++n) {
    std::vector<double> key(data.dim());
    for (int i = 0; i < data.dim(); ++i) key[i] = data.points(n, i);
    auto [it, inserted] = index.emplace(std::move(key), groups.size());
    if (inserted) groups.push_back({n});
    auto& g = groups[it->second];
    g.value_sum += data.values[n];
    g.noise_sum += data.noise_vars[n];
    ++g.count;
  }
  if (static_cast<Eigen::Index>(groups.size()) == data.size()) return data;

  TrainingData merged;
  const auto m = static_cast<Eigen::Index>(groups.size());
  merged.points.resize(m, data.dim());
  merged.values.resize(m);
  merged.noise_vars.resize(m);
  for (Eigen::Index g = 0; g < m; ++g) {
    const auto& group = groups[g];
    merged.points.row(g) = data.points.row(group.first);
    merged.values[g] = group.value_sum / group.count;
    merged.noise_vars[g] = group.noise_sum / group.count / group.count;
  }
  return merged;
}

JitteredFactor jittered_cholesky(const Matrix& matrix, double scale, const JitterPolicy& policy) {
  const Eigen::Index n = matrix.rows();
  if (n == 0) return {Matrix(0, 0), 0.0};
  for (double level = policy.start; level <= policy.max * (1.0 + 1e-12); level *= policy.growth) {
    const double jitter = level * scale;
    Matrix shifted = matrix;
    shifted.diagonal().array() += jitter;
    Eigen::LLT<Matrix> llt(shifted);
    if (llt.info() == Eigen::Success && llt.matrixLLT().diagonal().allFinite() &&
        (llt.matrixLLT().diagonal().array() > 0.0).all()) {
      return {llt.matrixL(), jitter};
    }
  }
  throw IllConditionedGram("matrix not factorizable after maximum jitter " + std::to_string(policy.max * scale));
}

PosteriorGP PosteriorGP::condition(const TrainingData& data, const KernelParams& params, const JitterPolicy& jitter) {
  params.validate();
  PosteriorGP gp;
  gp.params_ = params;
  gp.data_ = merge_duplicates(data);
  if (gp.data_.size() > 0) require(gp.data_.dim() == params.dim(), "training data dimension mismatch");
  Matrix gram = gram_matrix(gp.data_.points, params);
  gram.diagonal() += gp.data_.noise_vars;
  auto factor = jittered_cholesky(gram, params.sigma2, jitter);
  gp.factor_ = std::move(factor.lower);
  gp.jitter_ = factor.jitter;
  gp.weights_ = gp.data_.values.array() - params.beta;
  if (gp.data_.size() > 0) {
    gp.factor_.triangularView<Eigen::Lower>().solveInPlace(gp.weights_);
    gp.factor_.transpose().triangularView<Eigen::Upper>().solveInPlace(gp.weights_);
  }
  return gp;
}

Matrix PosteriorGP::joint_cross_covariance(const Eigen::Ref<const Vector>& x) const {
  const Eigen::Index n = data_.size();
  const int d = dim();
  Matrix cross(n, d + 1);
  for (Eigen::Index k = 0; k < n; ++k) {
    // First column of the joint block of (x, x_n) is cov((Y(x), grad Y(x)), Y(x_n)).
    const Matrix block = joint_prior_covariance(x, data_.points.row(k).transpose(), params_);
    cross.row(k) = block.col(0).transpose();
  }
  return cross;
}

Matrix PosteriorGP::whitened_cross_covariance(const Eigen::Ref<const Vector>& x) const {
  Matrix cross = joint_cross_covariance(x);
  if (cross.rows() > 0) factor_.triangularView<Eigen::Lower>().solveInPlace(cross);
  return cross;
}

Vector PosteriorGP::joint_mean(const Matrix& cross) const {
  Vector m = Vector::Zero(dim() + 1);
  m[0] = params_.beta;
  if (cross.rows() > 0) m += cross.transpose() * weights_;
  return m;
}

double PosteriorGP::mean(const Eigen::Ref<const Vector>& x) const {
  require(x.size() == dim() && x.allFinite(), "query must be finite with matching dimension");
  double m = params_.beta;
  for (Eigen::Index k = 0; k < data_.size(); ++k)
    m += weights_[k] * matern52_kernel(x, data_.points.row(k).transpose(), params_);
  return m;
}

Vector PosteriorGP::mean_gradient(const Eigen::Ref<const Vector>& x) const {
  return joint_mean(joint_cross_covariance(x)).tail(dim());
}

Prediction PosteriorGP::predict(const Matrix& queries) const {
  require(queries.rows() >= 1 && queries.cols() == dim(), "queries must be a nonempty Q x d matrix");
  require(queries.allFinite(), "queries must be finite");
  const Eigen::Index q = queries.rows();
  const Eigen::Index n = data_.size();
  Matrix cross(n, q);  // r(x_q) as columns
  for (Eigen::Index j = 0; j < q; ++j)
    for (Eigen::Index k = 0; k < n; ++k)
      cross(k, j) = matern52_kernel(queries.row(j).transpose(), data_.points.row(k).transpose(), params_);
  Prediction out;
  out.mean = Vector::Constant(q, params_.beta);
  if (n > 0) out.mean += cross.transpose() * weights_;
  out.cov.resize(q, q);
  for (Eigen::Index a = 0; a < q; ++a)
    for (Eigen::Index b = a; b < q; ++b) {
      const double c = matern52_kernel(queries.row(a).transpose(), queries.row(b).transpose(), params_);
      out.cov(a, b) = c;
      out.cov(b, a) = c;
    }
  if (n > 0) {
    factor_.triangularView<Eigen::Lower>().solveInPlace(cross);
    out.cov.noalias() -= cross.transpose() * cross;
  }
  for (Eigen::Index a = 0; a < q; ++a)
    if (out.cov(a, a) < 0.0 && out.cov(a, a) > -1e-10 * params_.sigma2) out.cov(a, a) = 0.0;
  return out;
}

Prediction PosteriorGP::predict_joint_with_gradient(const Eigen::Ref<const Vector>& x) const {
  require(x.size() == dim() && x.allFinite(), "query must be finite with matching dimension");
  const Matrix cross = joint_cross_covariance(x);
  Prediction out;
  out.mean = joint_mean(cross);
  out.cov = joint_prior_variance(params_);
  if (cross.rows() > 0) {
    const Matrix whitened = factor_.triangularView<Eigen::Lower>().solve(cross);
    out.cov.noalias() -= whitened.transpose() * whitened;
  }
  out.cov = 0.5 * (out.cov + out.cov.transpose());
  return out;
}

namespace {

struct ProfiledTerms {
  double beta;
  double log_likelihood;
};

// Log marginal likelihood with either a fixed or a GLS-profiled constant mean.
ProfiledTerms likelihood_terms(const TrainingData& merged, const KernelParams& params, const JitterPolicy& jitter,
                               bool profile) {
  const Eigen::Index n = merged.size();
  Matrix gram = gram_matrix(merged.points, params);
  gram.diagonal() += merged.noise_vars;
  const auto factor = jittered_cholesky(gram, params.sigma2, jitter);
  const auto l = factor.lower.triangularView<Eigen::Lower>();
  double beta = params.beta;
  if (profile) {
    const Vector ones_w = l.solve(Vector::Ones(n));
    const Vector y_w = l.solve(merged.values);
    beta = ones_w.dot(y_w) / ones_w.squaredNorm();
  }
  const Vector resid_w = l.solve((merged.values.array() - beta).matrix());
  const double log_det = 2.0 * factor.lower.diagonal().array().log().sum();
  const double ll = -0.5 * resid_w.squaredNorm() - 0.5 * log_det -
                    0.5 * static_cast<double>(n) * std::log(2.0 * std::numbers::pi);
  return {beta, ll};
}

constexpr double kPenaltyObjective = 1e100;

// Objective handed to GSL: negative profiled log-likelihood over
// theta = (log sigma2, log l_1..l_d), with a quadratic penalty outside the box.
struct SearchObjective {
  const TrainingData* data;
  const JitterPolicy* jitter;
  Vector lower;
  Vector upper;

  KernelParams params_of(const Vector& theta) const {
    const Vector clamped = theta.cwiseMax(lower).cwiseMin(upper);
    KernelParams p;
    p.sigma2 = std::exp(clamped[0]);
    p.lengthscales = clamped.tail(clamped.size() - 1).array().exp();
    return p;
  }

  double operator()(const Vector& theta) const {
    const Vector clamped = theta.cwiseMax(lower).cwiseMin(upper);
    const double penalty = 1e3 * (theta - clamped).squaredNorm();
    try {
      const auto terms = likelihood_terms(*data, params_of(theta), *jitter, true);
      if (!std::isfinite(terms.log_likelihood)) return kPenaltyObjective;
      return -terms.log_likelihood + penalty;
    } catch (const IllConditionedGram&) {
      return kPenaltyObjective;
    }
  }
};

double gsl_objective(const gsl_vector* v, void* raw) {
  const auto* objective = static_cast<const SearchObjective*>(raw);
  Vector theta(static_cast<Eigen::Index>(v->size));
  for (std::size_t i = 0; i < v->size; ++i) theta[static_cast<Eigen::Index>(i)] = gsl_vector_get(v, i);
  return (*objective)(theta);
}

struct MinimizerDeleter {
  void operator()(gsl_multimin_fminimizer* m) const { gsl_multimin_fminimizer_free(m); }
};
struct VectorDeleter {
  void operator()(gsl_vector* v) const { gsl_vector_free(v); }
};

Vector nelder_mead(const SearchObjective& objective, const Vector& start, int iterations) {
  const auto n = static_cast<std::size_t>(start.size());
  std::unique_ptr<gsl_vector, VectorDeleter> x(gsl_vector_alloc(n));
  std::unique_ptr<gsl_vector, VectorDeleter> step(gsl_vector_alloc(n));
  for (std::size_t i = 0; i < n; ++i) {
    gsl_vector_set(x.get(), i, start[static_cast<Eigen::Index>(i)]);
    gsl_vector_set(step.get(), i, 0.5);
  }
  gsl_multimin_function fn{&gsl_objective, n, const_cast<SearchObjective*>(&objective)};
  std::unique_ptr<gsl_multimin_fminimizer, MinimizerDeleter> minimizer(
      gsl_multimin_fminimizer_alloc(gsl_multimin_fminimizer_nmsimplex2, n));
  gsl_multimin_fminimizer_set(minimizer.get(), &fn, x.get(), step.get());
  for (int it = 0; it < iterations; ++it) {
    if (gsl_multimin_fminimizer_iterate(minimizer.get()) != GSL_SUCCESS) break;
    if (gsl_multimin_test_size(gsl_multimin_fminimizer_size(minimizer.get()), 1e-6) == GSL_SUCCESS) break;
  }
  Vector best(start.size());
  const gsl_vector* found = gsl_multimin_fminimizer_x(minimizer.get());
  for (std::size_t i = 0; i < n; ++i) best[static_cast<Eigen::Index>(i)] = gsl_vector_get(found, i);
  // nmsimplex2 reports its best vertex; keep the start if it is at least as good.
  return objective(best) <= objective(start) ? best : start;
}

}  // namespace

double log_marginal_likelihood(const TrainingData& data, const KernelParams& params, const JitterPolicy& jitter) {
  params.validate();
  const TrainingData merged = merge_duplicates(data);
  require(merged.size() >= 1, "log marginal likelihood needs at least one observation");
  require(merged.dim() == params.dim(), "training data dimension mismatch");
  return likelihood_terms(merged, params, jitter, false).log_likelihood;
}

double profiled_beta(const TrainingData& data, const KernelParams& params, const JitterPolicy& jitter) {
  params.validate();
  const TrainingData merged = merge_duplicates(data);
  require(merged.size() >= 1, "profiled beta needs at least one observation");
  return likelihood_terms(merged, params, jitter, true).beta;
}

HyperparameterFit fit_hyperparameters(const TrainingData& data, const HyperparameterSearch& search) {
  const TrainingData merged = merge_duplicates(data);
  require(merged.size() >= 2, "hyperparameter fitting needs at least two distinct observations");
  require(search.starts >= 1 || !search.extra_starts.empty(), "at least one start point is required");
  const int d = merged.dim();

  Vector width = search.domain_width;
  if (width.size() == 0) width = merged.points.colwise().maxCoeff() - merged.points.colwise().minCoeff();
  require(width.size() == d, "domain width dimension mismatch");
  width = width.cwiseMax(1e-12);

  const double mean_y = merged.values.mean();
  const double var_y = std::max((merged.values.array() - mean_y).square().sum() / static_cast<double>(merged.size()),
                                search.sigma2_floor);

  SearchObjective objective{&merged, &search.jitter, Vector(d + 1), Vector(d + 1)};
  objective.lower[0] = std::log(std::max(search.sigma2_floor, 1e-4 * search.sigma2_low * var_y));
  objective.upper[0] = std::log(1e4 * search.sigma2_high * var_y);
  for (int i = 0; i < d; ++i) {
    objective.lower[i + 1] = std::log(0.1 * search.lengthscale_low * width[i]);
    objective.upper[i + 1] = std::log(10.0 * search.lengthscale_high * width[i]);
  }

  std::vector<Vector> starts;
  Rng rng = make_rng(search.seed, {0x6870ULL});
  for (int s = 0; s < search.starts; ++s) {
    Vector theta(d + 1);
    const double u = uniform01(rng);
    theta[0] = std::log(std::max(search.sigma2_floor, var_y * search.sigma2_low)) +
               u * std::log(search.sigma2_high / search.sigma2_low);
    for (int i = 0; i < d; ++i)
      theta[i + 1] = std::log(search.lengthscale_low * width[i]) +
                     uniform01(rng) * std::log(search.lengthscale_high / search.lengthscale_low);
    starts.push_back(theta);
  }
  for (const auto& extra : search.extra_starts) {
    extra.validate();
    require(extra.dim() == d, "extra start dimension mismatch");
    Vector theta(d + 1);
    theta[0] = std::log(extra.sigma2);
    theta.tail(d) = extra.lengthscales.array().log();
    starts.push_back(theta.cwiseMax(objective.lower).cwiseMin(objective.upper));
  }

  HyperparameterFit fit;
  double best_objective = std::numeric_limits<double>::infinity();
  Vector best_theta;
  for (const auto& start : starts) {
    const double start_objective = objective(start);
    fit.start_log_likelihoods.push_back(start_objective >= kPenaltyObjective
                                            ? -std::numeric_limits<double>::infinity()
                                            : -start_objective);
    const Vector found = nelder_mead(objective, start, search.iterations);
    const double value = objective(found);
    if (value < best_objective) {
      best_objective = value;
      best_theta = found;
    }
  }
  if (!(best_objective < kPenaltyObjective))
    throw IllConditionedGram("every hyperparameter start failed to factorize the Gram matrix");

  fit.params = objective.params_of(best_theta);
  const auto terms = likelihood_terms(merged, fit.params, search.jitter, true);
  fit.params.beta = terms.beta;
  fit.log_likelihood = terms.log_likelihood;
  return fit;
}

}  // namespace gpmala
