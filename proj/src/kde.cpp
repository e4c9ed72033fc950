#include "gpmala/kde.hpp"

#include "gpmala/error.hpp"

#include <cmath>
#include <limits>
#include <numbers>

namespace gpmala {

namespace {

constexpr int kWindowGrid = 40;

Matrix covariance(const Matrix& points) {
  const Vector mean = points.colwise().mean();
  const Matrix centered = points.rowwise() - mean.transpose();
  return centered.transpose() * centered / static_cast<double>(points.rows() - 1);
}

bool usable(const Eigen::LLT<Matrix>& llt, double scale) {
  if (llt.info() != Eigen::Success) return false;
  const Vector diag = llt.matrixL().toDenseMatrix().diagonal();
  return diag.minCoeff() > 0.0 && diag.minCoeff() * diag.minCoeff() > 1e-14 * scale;
}

double log_sum_exp(const Eigen::Ref<const Eigen::ArrayXd>& terms) {
  const double top = terms.maxCoeff();
  if (!std::isfinite(top)) return top;
  return top + std::log((terms - top).exp().sum());
}

}  // namespace

Matrix sample_cov_sqrt(const Matrix& points, double ridge) {
  require(points.rows() >= 1 && points.cols() >= 1, "points must be nonempty");
  require(all_finite(points), "points must be finite");
  require(ridge >= 0.0, "ridge must be nonnegative");
  if (points.rows() < 2) throw DegenerateSample("covariance needs at least two points");
  Matrix cov = covariance(points);
  const double trace = cov.trace();
  const auto d = static_cast<double>(points.cols());
  const double scale = trace > 0.0 ? trace / d : 1.0;
  Eigen::LLT<Matrix> llt(cov);
  if (!usable(llt, scale)) {
    if (ridge == 0.0) throw DegenerateSample("sample covariance is singular");
    cov.diagonal().array() += ridge * scale;
    llt.compute(cov);
    if (llt.info() != Eigen::Success) throw DegenerateSample("sample covariance is singular after ridge");
  }
  return llt.matrixL();
}

double silverman_window(Eigen::Index count, int dim) {
  require(count >= 1 && dim >= 1, "count and dimension must be positive");
  return std::pow(4.0 / (static_cast<double>(count) * (dim + 2.0)), 1.0 / (dim + 4.0));
}

double select_window(const Matrix& points, const Matrix& cov_sqrt) {
  const Eigen::Index k = points.rows();
  const int d = static_cast<int>(points.cols());
  require(k >= 2, "window selection needs at least two points");
  require(cov_sqrt.rows() == d && cov_sqrt.cols() == d, "covariance factor has wrong shape");
  const double base = silverman_window(k, d);

  Eigen::ArrayXd windows(kWindowGrid);
  for (int i = 0; i < kWindowGrid; ++i) {
    const double t = static_cast<double>(i) / (kWindowGrid - 1);
    windows[i] = base * std::exp(std::log(0.05) + t * (std::log(5.0) - std::log(0.05)));
  }
  const Eigen::ArrayXd inv_two_w2 = 0.5 / windows.square();

  const Matrix white = cov_sqrt.triangularView<Eigen::Lower>().solve(points.transpose()).transpose();
  const Vector sq = white.rowwise().squaredNorm();

  // Sum over k of log sum_{j != k} exp(-|w_k - w_j|^2 / (2 w^2)); the constant parts are added after.
  Eigen::ArrayXd score = Eigen::ArrayXd::Zero(kWindowGrid);
  constexpr Eigen::Index kBlock = 256;
  Eigen::ArrayXd dist(k - 1);
  for (Eigen::Index start = 0; start < k; start += kBlock) {
    const Eigen::Index rows = std::min(kBlock, k - start);
    Matrix block = -2.0 * white.middleRows(start, rows) * white.transpose();
    block.colwise() += sq.segment(start, rows);
    block.rowwise() += sq.transpose();
    for (Eigen::Index r = 0; r < rows; ++r) {
      const Eigen::Index self = start + r;
      const auto row = block.row(r).array();
      dist.head(self) = row.head(self).transpose();
      dist.tail(k - 1 - self) = row.tail(k - 1 - self).transpose();
      dist = dist.max(0.0);
      const double nearest = dist.minCoeff();
      const Eigen::ArrayXd shifted = dist - nearest;
      for (int i = 0; i < kWindowGrid; ++i)
        score[i] += -nearest * inv_two_w2[i] + std::log((-shifted * inv_two_w2[i]).exp().sum());
    }
  }
  score -= static_cast<double>(k) * d * windows.log();

  int best = 0;
  for (int i = 1; i < kWindowGrid; ++i)
    if (score[i] > score[best]) best = i;
  return windows[best];
}

KdeModel::KdeModel(Matrix points, Matrix cov_sqrt, double window)
    : points_(std::move(points)), cov_sqrt_(std::move(cov_sqrt)), window_(window) {
  const int d = dim();
  require(points_.rows() >= 1 && d >= 1, "KDE needs at least one point");
  require(all_finite(points_), "KDE points must be finite");
  require(cov_sqrt_.rows() == d && cov_sqrt_.cols() == d, "covariance factor has wrong shape");
  require(std::isfinite(window_) && window_ > 0.0, "window must be positive");
  const Vector diag = cov_sqrt_.diagonal();
  require(diag.allFinite() && (diag.array() > 0.0).all(), "covariance factor must have a positive diagonal");
  cov_sqrt_ = cov_sqrt_.triangularView<Eigen::Lower>();
  log_det_bandwidth_ = d * std::log(window_) + diag.array().log().sum();
  log_norm_ = -std::log(static_cast<double>(size())) - log_det_bandwidth_ - 0.5 * d * std::log(2.0 * std::numbers::pi);
  whitened_ = whiten(points_);
  whitened_sq_norms_ = whitened_.rowwise().squaredNorm();
}

KdeModel KdeModel::fit(const Matrix& points, std::optional<double> window, double ridge) {
  Matrix factor = sample_cov_sqrt(points, ridge);
  const double w = window ? *window : select_window(points, factor);
  return {points, std::move(factor), w};
}

Matrix KdeModel::whiten(const Matrix& rows) const {
  return (cov_sqrt_.triangularView<Eigen::Lower>().solve(rows.transpose()) / window_).transpose();
}

double KdeModel::log_evaluate(const Vector& x) const {
  require(x.size() == dim(), "query dimension mismatch");
  const Vector w = whiten(x.transpose()).transpose();
  const Eigen::ArrayXd terms = -0.5 * (whitened_.rowwise() - w.transpose()).rowwise().squaredNorm().array();
  return log_norm_ + log_sum_exp(terms);
}

double KdeModel::evaluate(const Vector& x) const { return std::exp(log_evaluate(x)); }

Vector KdeModel::log_evaluate_many(const Matrix& queries) const {
  require(queries.cols() == dim(), "query dimension mismatch");
  const Matrix w = whiten(queries);
  const Vector wq = w.rowwise().squaredNorm();
  Vector out(queries.rows());
  constexpr Eigen::Index kBlock = 512;
  for (Eigen::Index start = 0; start < queries.rows(); start += kBlock) {
    const Eigen::Index rows = std::min(kBlock, queries.rows() - start);
    Matrix block = 2.0 * w.middleRows(start, rows) * whitened_.transpose();
    block.colwise() -= wq.segment(start, rows);
    block.rowwise() -= whitened_sq_norms_.transpose();
    Eigen::ArrayXXd terms = (0.5 * block.array()).min(0.0);
    for (Eigen::Index r = 0; r < rows; ++r) out[start + r] = log_norm_ + log_sum_exp(terms.row(r).transpose());
  }
  return out;
}

Vector KdeModel::evaluate_many(const Matrix& queries) const { return log_evaluate_many(queries).array().exp(); }

Matrix KdeModel::sample(Eigen::Index count, Rng& rng) const {
  require(count >= 0, "sample count must be nonnegative");
  std::uniform_int_distribution<Eigen::Index> pick(0, size() - 1);
  const Matrix b = bandwidth();
  Matrix out(count, dim());
  for (Eigen::Index i = 0; i < count; ++i) {
    const Eigen::Index k = pick(rng);
    out.row(i) = points_.row(k) + (b * standard_normal(dim(), rng)).transpose();
  }
  return out;
}

}  // namespace gpmala
