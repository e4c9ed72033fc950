#include "gpmala/trajectory.hpp"

#include "gpmala/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <utility>

namespace gpmala {

double default_admission_threshold(const KernelParams& params) { return 0.01 * std::sqrt(params.sigma2); }

Trajectory::Trajectory(std::shared_ptr<const PosteriorGP> base, TrajectoryConfig config, std::uint64_t seed)
    : base_(std::move(base)), config_(std::move(config)), rng_(seed) {
  require(base_ != nullptr, "trajectory needs a base GP");
  require(config_.admission_threshold >= 0.0, "admission threshold must be nonnegative");
  require(config_.neighbor_count >= 1, "neighbor count must be positive");
  dim_ = base_->dim();
  block_ = config_.values_only ? 1 : dim_ + 1;
  const auto n = base_->data().size();
  base_residual_ = (base_->data().values.array() - base_->params().beta).matrix();
  if (n > 0) base_->gram_factor().triangularView<Eigen::Lower>().solveInPlace(base_residual_);
  reserve_anchor_storage(16);
}

void Trajectory::reserve_anchor_storage(std::size_t anchors) {
  const auto cols = static_cast<Eigen::Index>(anchors) * block_;
  if (cols <= factor_.rows()) return;
  const auto used = static_cast<Eigen::Index>(anchors_.size()) * block_;
  const auto n = base_->data().size();
  Matrix whitened(n, cols);
  whitened.leftCols(used) = anchor_whitened_.leftCols(used);
  Vector means(cols);
  means.head(used) = anchor_base_mean_.head(used);
  Matrix factor = Matrix::Zero(cols, cols);
  factor.topLeftCorner(used, used) = factor_.topLeftCorner(used, used);
  anchor_whitened_ = std::move(whitened);
  anchor_base_mean_ = std::move(means);
  factor_ = std::move(factor);
}

std::optional<std::size_t> Trajectory::find_anchor(const Vector& x) const {
  for (std::size_t j = anchors_.size(); j-- > 0;)
    if (anchors_[j].point == x) return j;
  return std::nullopt;
}

Matrix Trajectory::prior_cross(const Vector& x, std::size_t anchor) const {
  return joint_prior_covariance(x, anchors_[anchor].point, base_->params()).leftCols(block_);
}

Matrix Trajectory::anchor_block(std::size_t i, std::size_t j) const {
  const auto b = static_cast<Eigen::Index>(block_);
  Matrix block = joint_prior_covariance(anchors_[i].point, anchors_[j].point, base_->params()).topLeftCorner(b, b);
  if (base_->data().size() > 0)
    block.noalias() -= anchor_whitened_.middleCols(static_cast<Eigen::Index>(i) * b, b).transpose() *
                       anchor_whitened_.middleCols(static_cast<Eigen::Index>(j) * b, b);
  if (i == j) block.diagonal().array() += block_jitter_[i];
  return block;
}

std::vector<std::size_t> Trajectory::nearest_anchors(const Vector& x, const Matrix& whitened) const {
  const std::size_t count = anchors_.size();
  std::vector<double> score(count);
  for (std::size_t j = 0; j < count; ++j) {
    double c = matern52_kernel(x, anchors_[j].point, base_->params());
    if (whitened.rows() > 0)
      c -= whitened.col(0).dot(anchor_whitened_.col(static_cast<Eigen::Index>(j) * block_));
    score[j] = c;
  }
  std::vector<std::size_t> order(count);
  std::iota(order.begin(), order.end(), 0);
  const std::size_t keep = std::min(config_.neighbor_count, count);
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(keep), order.end(),
                    [&](std::size_t a, std::size_t b) { return score[a] > score[b] || (score[a] == score[b] && a < b); });
  order.resize(keep);
  std::sort(order.begin(), order.end());
  return order;
}

Trajectory::Conditional Trajectory::compute(const Vector& x) const {
  require(x.size() == dim_ && x.allFinite(), "trajectory query must be finite with matching dimension");
  Conditional c;
  c.x = x;
  c.replay = find_anchor(x);
  const auto b = static_cast<Eigen::Index>(block_);
  if (c.replay) {
    const auto& a = anchors_[*c.replay];
    c.mean.resize(dim_ + 1);
    c.mean[0] = a.value;
    c.mean.tail(dim_) = a.gradient;
    c.cov = Matrix::Zero(dim_ + 1, dim_ + 1);
    return c;
  }

  const auto& base = *base_;
  const auto n = base.data().size();
  c.whitened = base.whitened_cross_covariance(x);
  c.base_mean = Vector::Zero(dim_ + 1);
  c.base_mean[0] = base.params().beta;
  c.cov = joint_prior_variance(base.params());
  if (n > 0) {
    c.base_mean.noalias() += c.whitened.transpose() * base_residual_;
    c.cov.noalias() -= c.whitened.transpose() * c.whitened;
  }
  c.mean = c.base_mean;

  const std::size_t count = anchors_.size();
  if (count == 0) return c;

  if (!truncated()) {
    const auto used = static_cast<Eigen::Index>(count) * b;
    Matrix cross(dim_ + 1, used);
    for (std::size_t j = 0; j < count; ++j) cross.middleCols(static_cast<Eigen::Index>(j) * b, b) = prior_cross(x, j);
    if (n > 0) cross.noalias() -= c.whitened.transpose() * anchor_whitened_.leftCols(used);
    c.solved = factor_.topLeftCorner(used, used).triangularView<Eigen::Lower>().solve(cross.transpose());
    c.mean.noalias() += c.solved.transpose() * rho_;
    c.cov.noalias() -= c.solved.transpose() * c.solved;
  } else {
    // Nearest-anchor conditioning: condition on a subset, rebuilt per query.
    const auto subset = nearest_anchors(x, c.whitened);
    const auto q = static_cast<Eigen::Index>(subset.size()) * b;
    Matrix cov_qq(q, q);
    Matrix cross(dim_ + 1, q);
    Vector resid(q);
    for (std::size_t s = 0; s < subset.size(); ++s) {
      const auto i = subset[s];
      const auto si = static_cast<Eigen::Index>(s) * b;
      for (std::size_t t = 0; t <= s; ++t) {
        const Matrix block = anchor_block(i, subset[t]);
        cov_qq.block(si, static_cast<Eigen::Index>(t) * b, b, b) = block;
        cov_qq.block(static_cast<Eigen::Index>(t) * b, si, b, b) = block.transpose();
      }
      Matrix cr = prior_cross(x, i);
      if (n > 0) cr.noalias() -= c.whitened.transpose() * anchor_whitened_.middleCols(static_cast<Eigen::Index>(i) * b, b);
      cross.middleCols(si, b) = cr;
      Vector observed(dim_ + 1);
      observed[0] = anchors_[i].value;
      observed.tail(dim_) = anchors_[i].gradient;
      resid.segment(si, b) = observed.head(b) - anchor_base_mean_.segment(static_cast<Eigen::Index>(i) * b, b);
    }
    const auto factor = jittered_cholesky(cov_qq, base.params().sigma2, config_.jitter);
    const auto l = factor.lower.triangularView<Eigen::Lower>();
    c.solved = l.solve(cross.transpose());
    const Vector rho = l.solve(resid);
    c.mean.noalias() += c.solved.transpose() * rho;
    c.cov.noalias() -= c.solved.transpose() * c.solved;
  }
  c.cov = 0.5 * (c.cov + c.cov.transpose());
  return c;
}

JointDraw Trajectory::draw_at(const Vector& x) {
  Conditional c = compute(x);
  JointDraw draw;
  if (c.replay) {
    draw.value = c.mean[0];
    draw.gradient = c.mean.tail(dim_);
  } else {
    const auto factor = jittered_cholesky(c.cov, base_->params().sigma2, config_.jitter);
    const Vector sample = c.mean + factor.lower * standard_normal(dim_ + 1, rng_);
    draw.value = sample[0];
    draw.gradient = sample.tail(dim_);
  }
  pending_ = std::move(c);
  return draw;
}

bool Trajectory::admit(const Vector& x, double value, const Vector& gradient) {
  require(gradient.size() == dim_, "gradient dimension mismatch");
  if (!pending_ || pending_->x != x) pending_ = compute(x);
  const Conditional& c = *pending_;
  if (c.replay) return false;

  Vector observed(dim_ + 1);
  observed[0] = value;
  observed.tail(dim_) = gradient;
  if (!((observed - c.mean).norm() > config_.admission_threshold)) return false;

  const auto b = static_cast<Eigen::Index>(block_);
  const auto factor = jittered_cholesky(c.cov.topLeftCorner(b, b), base_->params().sigma2, config_.jitter);
  append_anchor(c, observed, factor);
  anchors_.push_back({x, value, gradient});
  pending_.reset();
  return true;
}

void Trajectory::append_anchor(const Conditional& c, const Vector& observed, const JitteredFactor& block_factor) {
  const auto b = static_cast<Eigen::Index>(block_);
  const std::size_t count = anchors_.size();
  if (count + 1 > static_cast<std::size_t>(factor_.rows() / b)) reserve_anchor_storage(2 * (count + 1));
  const auto used = static_cast<Eigen::Index>(count) * b;
  if (base_->data().size() > 0) anchor_whitened_.middleCols(used, b) = c.whitened.leftCols(b);
  anchor_base_mean_.segment(used, b) = c.base_mean.head(b);
  block_jitter_.push_back(block_factor.jitter);
  if (truncated()) return;  // factor no longer maintained

  if (count > 0) factor_.block(used, 0, b, used) = c.solved.leftCols(b).transpose();
  factor_.block(used, used, b, b) = block_factor.lower;
  Vector rho(used + b);
  rho.head(used) = rho_;
  rho.tail(b) = block_factor.lower.triangularView<Eigen::Lower>().solve((observed - c.mean).head(b));
  rho_ = std::move(rho);
}

JointDraw Trajectory::conditional_mean_at(const Vector& x) const {
  const Conditional c = compute(x);
  return {c.mean[0], c.mean.tail(dim_)};
}

Matrix Trajectory::conditional_covariance_at(const Vector& x) const { return compute(x).cov; }

Matrix Trajectory::anchor_factor() const {
  const auto used = static_cast<Eigen::Index>(std::min(anchors_.size(), config_.anchor_cap)) * block_;
  return factor_.topLeftCorner(used, used).triangularView<Eigen::Lower>();
}

Matrix Trajectory::anchor_covariance() const {
  const auto b = static_cast<Eigen::Index>(block_);
  const std::size_t count = anchors_.size();
  Matrix cov(static_cast<Eigen::Index>(count) * b, static_cast<Eigen::Index>(count) * b);
  for (std::size_t i = 0; i < count; ++i)
    for (std::size_t j = 0; j <= i; ++j) {
      const Matrix block = anchor_block(i, j);
      cov.block(static_cast<Eigen::Index>(i) * b, static_cast<Eigen::Index>(j) * b, b, b) = block;
      cov.block(static_cast<Eigen::Index>(j) * b, static_cast<Eigen::Index>(i) * b, b, b) = block.transpose();
    }
  return cov;
}

}  // namespace gpmala
