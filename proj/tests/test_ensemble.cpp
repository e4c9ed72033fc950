#include "doctest.h"

#include "gpmala/benchmark.hpp"
#include "gpmala/ensemble.hpp"
#include "gpmala/error.hpp"

#include <atomic>
#include <cmath>
#include <numbers>

using namespace gpmala;

namespace {

KdeModel point_mass(const Matrix& pts, double window = 0.1) { return {pts, Matrix::Identity(pts.cols(), pts.cols()), window}; }

Matrix row(double a, double b) {
  Matrix m(1, 2);
  m << a, b;
  return m;
}

// Two models sharing a grid of centers, with model B moving one center far away
// so that they disagree only near the moved point and its replacement.
EnsembleEstimate planted(const Matrix& grid, const std::vector<Eigen::Index>& moved, const Vector& offset) {
  Matrix other = grid;
  for (auto i : moved) other.row(i) += offset.transpose();
  return EnsembleEstimate({point_mass(grid, 0.05), point_mass(other, 0.05)});
}

Matrix grid_points(int per_side, double spacing) {
  Matrix g(per_side * per_side, 2);
  for (int i = 0; i < per_side; ++i)
    for (int j = 0; j < per_side; ++j) g.row(i * per_side + j) << i * spacing, j * spacing;
  return g;
}

}  // namespace

TEST_CASE("density and variance arithmetic") {
  const KdeModel base = point_mass(row(0, 0), 1.0);
  const EnsembleEstimate same({base, base, base});
  const Vector x = Vector::Constant(2, 0.3);
  CHECK(estimate_density(same, x) == doctest::Approx(base.evaluate(x)).epsilon(1e-15));
  CHECK(estimate_variance(same, x) == 0.0);
  CHECK(estimate_density(same, Vector::Constant(2, 100.0)) == 0.0);

  // Two unit-window kernels at distances chosen to give densities 0.1 and 0.3 at the origin.
  const double peak = 1.0 / (2.0 * std::numbers::pi);
  const double r1 = std::sqrt(-2.0 * std::log(0.1 / peak));
  const EnsembleEstimate hand({point_mass(row(r1, 0), 1.0), KdeModel(row(0, 0), Matrix::Identity(2, 2), std::sqrt(peak / 0.3))});
  CHECK(hand.models[0].evaluate(Vector::Zero(2)) == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(hand.models[1].evaluate(Vector::Zero(2)) == doctest::Approx(0.3).epsilon(1e-12));
  CHECK(estimate_density(hand, Vector::Zero(2)) == doctest::Approx(0.2).epsilon(1e-12));
  CHECK(estimate_variance(hand, Vector::Zero(2)) == doctest::Approx(0.02).epsilon(1e-12));
  const EnsembleEstimate single({base});
  CHECK_THROWS_AS((void)estimate_variance(single, x), InvalidArgument);
  const auto many = estimate_many(hand, Matrix::Zero(1, 2));
  CHECK(many.variance[0] == doctest::Approx(0.02).epsilon(1e-12));
  CHECK(many.variance.minCoeff() >= 0.0);
}

TEST_CASE("next-point selection") {
  const EnsembleEstimate one({point_mass(row(1, 2)), point_mass(row(1, 2))});
  CHECK(select_next_point(one) == row(1, 2).transpose());

  const Matrix grid = grid_points(5, 1.0);
  Vector off(2);
  off << 10.0, 10.0;
  const EnsembleEstimate ens = planted(grid, {7}, off);
  // Pool index 7 (model A) sits where only model A has mass; its mirror 32 sits where only B has mass.
  const Vector chosen = select_next_point(ens);
  CHECK((chosen == grid.row(7).transpose() || chosen == (grid.row(7) + off.transpose()).transpose()));
  // Ties at the two planted spots resolve to the lower pool index.
  CHECK(chosen == grid.row(7).transpose());

  const EnsembleEstimate agree({point_mass(grid), point_mass(grid)});
  CHECK(select_next_point(agree) == grid.row(0).transpose());
}

TEST_CASE("batch selection") {
  const Matrix grid = grid_points(6, 1.0);
  Vector off(2);
  off << 20.0, 0.0;
  const EnsembleEstimate ens = planted(grid, {3, 32}, off);
  CHECK(select_batch(ens, 1, 0.0).row(0).transpose() == select_next_point(ens));
  const Matrix top = select_batch(ens, 2, 0.0);
  const Matrix spread = select_batch(ens, 2, 5.0);
  CHECK((spread.row(0) - spread.row(1)).norm() >= 5.0);
  // One pick near each planted region (either copy of it).
  auto near = [&](const Matrix& pick, Eigen::Index i) {
    return (pick - grid.row(i)).norm() < 1e-12 || (pick - grid.row(i) - off.transpose()).norm() < 1e-12;
  };
  CHECK(((near(spread.row(0), 3) && near(spread.row(1), 32)) || (near(spread.row(0), 32) && near(spread.row(1), 3))));
  CHECK(top.rows() == 2);
  const Matrix relaxed = select_batch(ens, 10, 1e6);
  CHECK(relaxed.rows() == 10);
}

TEST_CASE("space-filling candidates") {
  const Box unit(Vector::Zero(2), Vector::Ones(2));
  const Matrix pool = halton_pool(unit, 4096, 0);
  CHECK(space_filling_next(Matrix(0, 2), unit, 4096, 0) == pool.row(0).transpose());
  const Vector far = space_filling_next(Matrix::Zero(1, 2), unit, 4096, 0);
  CHECK((far - Vector::Ones(2)).norm() < 0.1);
  for (Eigen::Index i = 0; i < pool.rows(); ++i) CHECK(unit.contains(pool.row(i).transpose()));
  CHECK(halton_pool(unit, 100, 3) == halton_pool(unit, 100, 3));
  CHECK(halton_pool(unit, 100, 3) != halton_pool(unit, 100, 4));

  const Matrix small_pool = halton_pool(unit, 1024, 1);
  Matrix design = initial_design(unit, 8, 1024, 1);
  CHECK(design.row(0) == small_pool.row(0));
  for (int step = 0; step < 5; ++step) {
    const Vector next = space_filling_next(design, unit, 1024, 1);
    auto gap = [&](const Vector& p) {
      double d = 1e300;
      for (Eigen::Index i = 0; i < design.rows(); ++i) d = std::min(d, (design.row(i).transpose() - p).norm());
      return d;
    };
    const double chosen = gap(next);
    CHECK(chosen > 0.0);
    for (Eigen::Index k = 0; k < small_pool.rows(); ++k) CHECK(gap(small_pool.row(k).transpose()) <= chosen);
    design.conservativeResize(design.rows() + 1, Eigen::NoChange);
    design.bottomRows(1) = next.transpose();
  }
}

TEST_CASE("ensemble density integrates to one") {
  Rng rng = make_rng(7);
  std::vector<KdeModel> models;
  for (int m = 0; m < 5; ++m) {
    Matrix pts(30, 2);
    for (int i = 0; i < 30; ++i) pts.row(i) = (Vector::Constant(2, 4.0) + standard_normal(2, rng)).transpose();
    models.push_back(KdeModel::fit(pts));
  }
  const EnsembleEstimate ens(std::move(models));
  const Box box(Vector::Constant(2, -4.0), Vector::Constant(2, 12.0));
  Matrix q(200000, 2);
  for (Eigen::Index i = 0; i < q.rows(); ++i) q.row(i) = uniform_in(box, rng).transpose();
  const double integral = estimate_many(ens, q).density.mean() * box.volume();
  CHECK(std::abs(integral - 1.0) < 0.02);
  CHECK(integrated_variance(ens, box, 1000, 3) == integrated_variance(ens, box, 1000, 3));
  CHECK(integrated_variance(ens, box, 1000, 3, 3) == integrated_variance(ens, box, 1000, 3, 1));
}

TEST_CASE("parallel_for covers every index and rethrows") {
  std::vector<int> hits(100, 0);
  parallel_for(100, 4, [&](int i) { hits[static_cast<std::size_t>(i)] += 1; });
  for (int h : hits) CHECK(h == 1);
  CHECK_THROWS_AS(parallel_for(10, 3, [](int i) { if (i == 5) throw DegenerateSample("x"); }), DegenerateSample);
}

TEST_CASE("calibration bookkeeping on the benchmark") {
  AnalyticProblem problem;
  CalibrationConfig cfg;
  cfg.initial_size = 6;
  cfg.max_size = 8;
  cfg.chains = 4;
  cfg.kept = 20;
  cfg.replications = 20;
  cfg.variance_points = 500;
  cfg.search.starts = 3;
  cfg.search.iterations = 60;
  cfg.seed = 17;
  const auto a = run_calibration(problem, cfg);
  REQUIRE(a.rounds.size() == 3);
  for (std::size_t i = 0; i < a.rounds.size(); ++i) {
    CHECK(a.rounds[i].design_size == 6 + static_cast<int>(i));
    CHECK(a.rounds[i].integrated_variance.has_value());
    CHECK(a.rounds[i].observations.size() == a.rounds[i].design_size);
    for (const auto& o : a.rounds[i].observations) CHECK(o.noise_var == doctest::Approx(benchmark_noise_variance(20)));
  }
  const auto b = run_calibration(problem, cfg);
  for (std::size_t i = 0; i < a.rounds.size(); ++i) {
    CHECK(*a.rounds[i].integrated_variance == *b.rounds[i].integrated_variance);
    CHECK(a.rounds[i].params.sigma2 == b.rounds[i].params.sigma2);
    CHECK(a.rounds[i].observations.back().point == b.rounds[i].observations.back().point);
  }
  cfg.workers = 3;
  const auto c = run_calibration(problem, cfg);
  CHECK(*c.rounds.back().integrated_variance == *a.rounds.back().integrated_variance);

  cfg.max_size = cfg.initial_size;
  CHECK(run_calibration(problem, cfg).rounds.size() == 1);
  cfg.strategy = Strategy::space_filling;
  cfg.max_size = 7;
  const auto sf = run_calibration(problem, cfg);
  CHECK(sf.rounds.size() == 2);
  cfg.initial_size = 3;
  CHECK_THROWS_AS((void)run_calibration(problem, cfg), InvalidArgument);
}
