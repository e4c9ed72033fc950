#include "gpmala/ensemble.hpp"

#include "gpmala/error.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <limits>
#include <numeric>
#include <thread>

namespace gpmala {

namespace {

// Seed stream tags.
constexpr std::uint64_t kDesignStream = 1;
constexpr std::uint64_t kObservationStream = 2;
constexpr std::uint64_t kHyperStream = 3;
constexpr std::uint64_t kRoundStream = 4;
constexpr std::uint64_t kVarianceStream = 5;

double radical_inverse(std::uint64_t index, std::uint64_t base) {
  double inv = 1.0 / static_cast<double>(base);
  double scale = inv;
  double out = 0.0;
  while (index > 0) {
    out += static_cast<double>(index % base) * scale;
    index /= base;
    scale *= inv;
  }
  return out;
}

std::uint64_t nth_prime(int i) {
  static const std::uint64_t primes[] = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53};
  require(i < static_cast<int>(std::size(primes)), "Halton sequence supports up to 16 dimensions");
  return primes[i];
}

Eigen::Index argmax_lowest(const Vector& v) {
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < v.size(); ++i)
    if (v[i] > v[best]) best = i;
  return best;
}

Vector min_distances(const Matrix& candidates, const Matrix& existing) {
  Vector out = Vector::Constant(candidates.rows(), std::numeric_limits<double>::infinity());
  for (Eigen::Index j = 0; j < existing.rows(); ++j)
    out = out.cwiseMin((candidates.rowwise() - existing.row(j)).rowwise().norm());
  return out;
}

Matrix stack_points(const std::vector<KdeModel>& models) {
  require(!models.empty(), "ensemble needs at least one model");
  const Eigen::Index k = models.front().size();
  const int d = models.front().dim();
  Matrix out(k * static_cast<Eigen::Index>(models.size()), d);
  for (std::size_t m = 0; m < models.size(); ++m) {
    require(models[m].size() == k && models[m].dim() == d, "ensemble models must share size and dimension");
    out.middleRows(static_cast<Eigen::Index>(m) * k, k) = models[m].points();
  }
  return out;
}

Matrix model_densities(const EnsembleEstimate& ens, const Matrix& queries, int workers) {
  Matrix values(queries.rows(), ens.size());
  parallel_for(ens.size(), workers, [&](int m) { values.col(m) = ens.models[static_cast<std::size_t>(m)].evaluate_many(queries); });
  return values;
}

TrainingData training_data(const std::vector<NoisyObservation>& obs, int d) {
  TrainingData data;
  const auto n = static_cast<Eigen::Index>(obs.size());
  data.points.resize(n, d);
  data.values.resize(n);
  data.noise_vars.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& o = obs[static_cast<std::size_t>(i)];
    data.points.row(i) = o.point.transpose();
    data.values[i] = o.log_estimate;
    data.noise_vars[i] = o.noise_var;
  }
  return data;
}

}  // namespace

void parallel_for(int count, int workers, const std::function<void(int)>& task) {
  if (count <= 0) return;
  workers = std::clamp(workers, 1, count);
  if (workers == 1) {
    for (int i = 0; i < count; ++i) task(i);
    return;
  }
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(count));
  std::atomic<int> next{0};
  auto body = [&] {
    for (int i = next++; i < count; i = next++) {
      try {
        task(i);
      } catch (...) {
        errors[static_cast<std::size_t>(i)] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> threads;
  threads.reserve(static_cast<std::size_t>(workers - 1));
  for (int w = 1; w < workers; ++w) threads.emplace_back(body);
  body();
  for (auto& t : threads) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

EnsembleEstimate::EnsembleEstimate(std::vector<KdeModel> kdes, EnsembleMeta info)
    : models(std::move(kdes)), all_points(stack_points(models)), meta(std::move(info)) {}

double estimate_density(const EnsembleEstimate& ens, const Vector& x) {
  double sum = 0.0;
  for (const auto& m : ens.models) sum += m.evaluate(x);
  return sum / ens.size();
}

double estimate_variance(const EnsembleEstimate& ens, const Vector& x) {
  require(ens.size() >= 2, "ensemble variance needs at least two models");
  Vector values(ens.size());
  for (int m = 0; m < ens.size(); ++m) values[m] = ens.models[static_cast<std::size_t>(m)].evaluate(x);
  return (values.array() - values.mean()).square().sum() / (ens.size() - 1);
}

DensityVariance estimate_many(const EnsembleEstimate& ens, const Matrix& queries, int workers) {
  require(ens.size() >= 2, "ensemble variance needs at least two models");
  const Matrix values = model_densities(ens, queries, workers);
  DensityVariance out;
  out.density = values.rowwise().mean();
  out.variance = (values.colwise() - out.density).array().square().rowwise().sum() / (ens.size() - 1);
  return out;
}

Matrix sample_mixture(const EnsembleEstimate& ens, Eigen::Index count, Rng& rng) {
  require(count >= 0, "sample count must be nonnegative");
  std::uniform_int_distribution<int> pick(0, ens.size() - 1);
  Matrix out(count, ens.dim());
  for (Eigen::Index i = 0; i < count; ++i) out.row(i) = ens.models[static_cast<std::size_t>(pick(rng))].sample(1, rng);
  return out;
}

Vector select_next_point(const EnsembleEstimate& ens, int workers) {
  require(ens.all_points.rows() > 0, "candidate pool is empty");
  const Vector var = estimate_many(ens, ens.all_points, workers).variance;
  return ens.all_points.row(argmax_lowest(var)).transpose();
}

Matrix select_batch(const EnsembleEstimate& ens, int batch_size, double min_separation, int workers) {
  require(batch_size >= 1, "batch size must be positive");
  require(min_separation >= 0.0, "minimum separation must be nonnegative");
  const Matrix& pool = ens.all_points;
  require(batch_size <= pool.rows(), "batch larger than the candidate pool");
  const Vector var = estimate_many(ens, pool, workers).variance;
  std::vector<Eigen::Index> order(static_cast<std::size_t>(pool.rows()));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) { return var[a] > var[b]; });

  std::vector<Eigen::Index> chosen;
  std::vector<bool> used(order.size(), false);
  double sep = min_separation;
  while (static_cast<int>(chosen.size()) < batch_size) {
    for (const auto idx : order) {
      if (static_cast<int>(chosen.size()) == batch_size) break;
      if (used[static_cast<std::size_t>(idx)]) continue;
      bool far = true;
      for (const auto c : chosen)
        if ((pool.row(idx) - pool.row(c)).norm() < sep) {
          far = false;
          break;
        }
      if (!far) continue;
      chosen.push_back(idx);
      used[static_cast<std::size_t>(idx)] = true;
    }
    sep *= 0.5;
  }
  Matrix out(batch_size, pool.cols());
  for (int i = 0; i < batch_size; ++i) out.row(i) = pool.row(chosen[static_cast<std::size_t>(i)]);
  return out;
}

Matrix halton_pool(const Box& domain, int count, std::uint64_t seed) {
  require(count >= 1, "pool size must be positive");
  const int d = domain.dim();
  Rng rng = make_rng(seed, {0x4a170ULL});
  Vector shift(d);
  for (int j = 0; j < d; ++j) shift[j] = uniform01(rng);
  Matrix out(count, d);
  for (int i = 0; i < count; ++i)
    for (int j = 0; j < d; ++j) {
      double u = radical_inverse(static_cast<std::uint64_t>(i) + 1, nth_prime(j)) + shift[j];
      u -= std::floor(u);
      out(i, j) = domain.lower[j] + u * (domain.upper[j] - domain.lower[j]);
    }
  return out;
}

Vector space_filling_next(const Matrix& existing, const Box& domain, int pool_size, std::uint64_t seed) {
  require(existing.rows() == 0 || existing.cols() == domain.dim(), "design dimension mismatch");
  const Matrix pool = halton_pool(domain, pool_size, seed);
  if (existing.rows() == 0) return pool.row(0).transpose();
  return pool.row(argmax_lowest(min_distances(pool, existing))).transpose();
}

Matrix initial_design(const Box& domain, int count, int pool_size, std::uint64_t seed) {
  require(count >= 1 && count <= pool_size, "design size must lie in [1, pool size]");
  const Matrix pool = halton_pool(domain, pool_size, seed);
  Matrix design(count, domain.dim());
  design.row(0) = pool.row(0);
  Vector dist = min_distances(pool, design.topRows(1));
  for (int i = 1; i < count; ++i) {
    design.row(i) = pool.row(argmax_lowest(dist));
    dist = dist.cwiseMin((pool.rowwise() - design.row(i)).rowwise().norm());
  }
  return design;
}

double integrated_variance(const EnsembleEstimate& ens, const Box& domain, int points, std::uint64_t seed,
                           int workers) {
  require(points >= 1, "need at least one integration point");
  Rng rng = make_rng(seed, {kVarianceStream});
  Matrix queries(points, domain.dim());
  for (int i = 0; i < points; ++i) queries.row(i) = uniform_in(domain, rng).transpose();
  return estimate_many(ens, queries, workers).variance.mean() * domain.volume();
}

std::vector<double> Problem::log_replications(const Vector& x, int replications, Rng& rng) const {
  std::vector<double> out(static_cast<std::size_t>(replications));
  for (auto& v : out) v = log_g(x, draw_z(rng));
  return out;
}

std::string to_string(Strategy s) { return s == Strategy::var_based ? "var-based" : "space-filling"; }

Strategy parse_strategy(const std::string& s) {
  if (s == "var-based") return Strategy::var_based;
  if (s == "space-filling") return Strategy::space_filling;
  throw InvalidArgument("unknown strategy: " + s);
}

void CalibrationConfig::validate(int dim) const {
  require(initial_size >= dim + 2, "initial design needs at least d + 2 points");
  require(max_size >= initial_size, "N_max must be at least N0");
  require(replications >= 2, "need at least two replications");
  require(chains >= 2, "ensemble needs at least two chains");
  require(kept >= 2, "each chain must keep at least two points");
  require(batch >= 1, "batch size must be positive");
  require(workers >= 1, "worker count must be positive");
  require(halton_size >= max_size, "Halton pool smaller than the design budget");
  require(variance_points >= 1, "integrated variance needs points");
  require(bootstrap_resamples >= 100, "bootstrap needs at least 100 resamples");
  mala.validate();
}

NoisyObservation observe(const Problem& problem, const Vector& x, const CalibrationConfig& config,
                         std::uint64_t seed) {
  Rng rng = make_rng(seed);
  const auto logs = problem.log_replications(x, config.replications, rng);
  const auto est = mc_log_estimate_from_logs(logs);
  NoisyObservation obs{x, est.log_estimate, est.noise_var, config.replications};
  const auto closed = problem.noise_variance(config.replications);
  switch (config.noise) {
    case NoiseEstimator::delta:
      break;
    case NoiseEstimator::automatic:
      if (closed) {
        obs.noise_var = *closed;
        break;
      }
      [[fallthrough]];
    case NoiseEstimator::bootstrap:
      obs.noise_var = bootstrap_log_variance(logs, config.bootstrap_resamples, derive_seed(seed, {1}));
      break;
  }
  return obs;
}

EnsembleRun run_ensemble(std::shared_ptr<const PosteriorGP> gp, const Box& domain, const CalibrationConfig& config,
                         std::uint64_t round_seed) {
  MalaConfig mala = config.mala;
  mala.max_steps = chain_length_for(config.kept, mala.burn_in_fraction, mala.thinning);
  TrajectoryConfig tcfg = config.trajectory;
  if (tcfg.admission_threshold == 0.0) tcfg.admission_threshold = default_admission_threshold(gp->params());

  const auto m_count = static_cast<std::size_t>(config.chains);
  std::vector<std::optional<KdeModel>> models(m_count);
  std::vector<double> acceptance(m_count);
  std::vector<long> anchors(m_count);
  parallel_for(config.chains, config.workers, [&](int m) {
    const std::uint64_t chain_seed = derive_seed(round_seed, {static_cast<std::uint64_t>(m)});
    Trajectory trajectory(gp, tcfg, derive_seed(chain_seed, {1}));
    Rng start_rng = make_rng(chain_seed, {2});
    const Vector start = uniform_in(domain, start_rng);
    MalaConfig cfg = mala;
    cfg.seed = derive_seed(chain_seed, {3});
    const Chain chain = run_mala_on_trajectory(trajectory, start, cfg, domain);
    const auto burn = static_cast<Eigen::Index>(std::floor(cfg.burn_in_fraction * chain.size()));
    const Matrix kept = postprocess(chain, cfg.burn_in_fraction, cfg.thinning).topRows(config.kept);
    const auto idx = static_cast<std::size_t>(m);
    models[idx] = KdeModel::fit(kept);
    acceptance[idx] = chain.acceptance_rate(burn + 1);
    anchors[idx] = static_cast<long>(trajectory.anchors().size());
  });

  std::vector<KdeModel> kdes;
  kdes.reserve(m_count);
  for (auto& m : models) kdes.push_back(std::move(*m));
  EnsembleRun out{EnsembleEstimate(std::move(kdes), {static_cast<int>(gp->data().size()), "", round_seed}), 0.0, 0};
  out.acceptance_rate = std::accumulate(acceptance.begin(), acceptance.end(), 0.0) / static_cast<double>(m_count);
  out.anchors_total = std::accumulate(anchors.begin(), anchors.end(), 0L);
  return out;
}

CalibrationHistory run_calibration(const Problem& problem, const CalibrationConfig& config,
                                   const RoundObserver& observer) {
  const Box domain = problem.domain();
  const int d = domain.dim();
  config.validate(d);
  const std::uint64_t pool_seed = derive_seed(config.seed, {kDesignStream});

  std::vector<NoisyObservation> observations;
  auto add_points = [&](const Matrix& points) {
    for (Eigen::Index i = 0; i < points.rows(); ++i) {
      const auto n = static_cast<std::uint64_t>(observations.size());
      observations.push_back(observe(problem, points.row(i).transpose(), config,
                                     derive_seed(config.seed, {kObservationStream, n})));
    }
  };
  add_points(initial_design(domain, config.initial_size, config.halton_size, pool_seed));

  CalibrationHistory history;
  std::optional<KernelParams> previous;
  for (int round = 0;; ++round) {
    const auto t0 = std::chrono::steady_clock::now();
    const int n = static_cast<int>(observations.size());
    const TrainingData data = training_data(observations, d);

    CalibrationConfig cfg = config;
    cfg.search.seed = derive_seed(config.seed, {kHyperStream, static_cast<std::uint64_t>(round)});
    cfg.search.domain_width = domain.width();
    if (previous) cfg.search.extra_starts.push_back(*previous);

    RoundRecord record;
    record.design_size = n;
    record.observations = observations;
    std::optional<EnsembleRun> run;
    for (int attempt = 1; !run; ++attempt) {
      try {
        const HyperparameterFit fit = fit_hyperparameters(data, cfg.search);
        auto gp = std::make_shared<const PosteriorGP>(PosteriorGP::condition(data, fit.params, cfg.search.jitter));
        record.params = fit.params;
        record.log_likelihood = fit.log_likelihood;
        run = run_ensemble(gp, domain, cfg,
                           derive_seed(config.seed, {kRoundStream, static_cast<std::uint64_t>(round)}));
        record.attempts = attempt;
      } catch (const Error& e) {
        if (attempt >= 2)
          throw Error("round with N=" + std::to_string(n) + " failed after retry: " + e.what());
        cfg.search.jitter.start *= 1e3;
        cfg.search.jitter.max *= 1e2;
        cfg.trajectory.jitter.start *= 1e3;
        cfg.trajectory.jitter.max *= 1e2;
      }
    }
    previous = record.params;
    const EnsembleEstimate& ens = run->ensemble;
    record.acceptance_rate = run->acceptance_rate;
    record.anchors_total = run->anchors_total;
    const bool metrics = config.metric_sizes.empty() ||
                         std::find(config.metric_sizes.begin(), config.metric_sizes.end(), n) != config.metric_sizes.end();
    if (metrics)
      record.integrated_variance =
          integrated_variance(ens, domain, config.variance_points, config.seed, config.workers);
    if (observer) observer(record, ens);

    const bool last = n >= config.max_size;
    Matrix next;
    if (!last) {
      const int count = std::min(config.batch, config.max_size - n);
      if (config.strategy == Strategy::var_based) {
        next = count == 1 ? Matrix(select_next_point(ens, config.workers).transpose())
                          : select_batch(ens, count, config.batch_separation, config.workers);
      } else {
        next.resize(count, d);
        Matrix design = data.points;
        for (int i = 0; i < count; ++i) {
          next.row(i) = space_filling_next(design, domain, config.halton_size, pool_seed).transpose();
          design.conservativeResize(design.rows() + 1, Eigen::NoChange);
          design.bottomRows(1) = next.row(i);
        }
      }
    }
    record.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    history.rounds.push_back(std::move(record));
    if (last) break;
    add_points(next);
  }
  return history;
}

}  // namespace gpmala
