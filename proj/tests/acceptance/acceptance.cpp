// End-to-end acceptance checks. `acceptance <criterion>` runs one criterion and
// prints a single [PASS]/[FAIL] line for it, preceded by indented measurements.
// `acceptance experiments <dir>` produces the runs shared by criteria 6 and 7.

#include "oracles.hpp"

#include "gpmala/benchmark.hpp"
#include "gpmala/experiment.hpp"
#include "gpmala/gp.hpp"
#include "gpmala/kde.hpp"
#include "gpmala/mala.hpp"
#include "gpmala/noise.hpp"
#include "gpmala/trajectory.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numbers>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

using namespace gpmala;
namespace fs = std::filesystem;

namespace {

// Pinned tolerances.
constexpr double kNoiseVarianceRel = 0.05;
constexpr double kKsCritical1pc = 1.6276;  // asymptotic, times 1/sqrt(n)
constexpr double kGpOracleTol = 1e-8;
constexpr double kGradientRel = 1e-4;
constexpr double kMalaMeanTol = 0.05;
constexpr double kMalaCovTol = 0.1;
constexpr double kAcceptLow = 0.42, kAcceptHigh = 0.72;
constexpr double kReferenceW1 = 0.1;
constexpr double kFinalToReference = 2.0;
constexpr double kSeventyToReference = 3.0;
constexpr double kVarianceDrop = 10.0;
constexpr double kKdeNormTol = 0.02;
constexpr double kKdeClosedTol = 1e-12;
constexpr double kFactorTol = 1e-8;

struct Outcome {
  bool pass = true;
  std::vector<std::string> notes;
  void check(bool ok, const std::string& what) {
    pass = pass && ok;
    notes.push_back(std::string(ok ? "ok   " : "FAIL ") + what);
  }
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

double normal_cdf(double x, double mean, double sd) { return 0.5 * std::erfc(-(x - mean) / (sd * std::numbers::sqrt2)); }

// One-sample Kolmogorov-Smirnov statistic against N(mean, sd^2).
double ks_normal(std::vector<double> v, double mean, double sd) {
  std::sort(v.begin(), v.end());
  const double n = static_cast<double>(v.size());
  double d = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double f = normal_cdf(v[i], mean, sd);
    d = std::max({d, (i + 1) / n - f, f - i / n});
  }
  return d;
}

Vector xy(double a, double b) {
  Vector x(2);
  x << a, b;
  return x;
}

// ---------------------------------------------------------------------------

Outcome noise_validation() {
  Outcome out;
  const auto t0 = std::chrono::steady_clock::now();
  const int replications = 100, trials = 10000;
  const double target = benchmark_noise_variance(replications);
  const double sd = std::sqrt(target);
  for (const Vector& x : {xy(1, 2), xy(3, 6)}) {
    Rng rng = make_rng(2024, {static_cast<std::uint64_t>(x[0]), static_cast<std::uint64_t>(x[1])});
    std::vector<double> ys(trials), logs(replications);
    for (int t = 0; t < trials; ++t) {
      for (int r = 0; r < replications; ++r) logs[r] = log_g_analytic(x, standard_normal(1, rng)[0]);
      ys[t] = mc_log_estimate_from_logs(logs).log_estimate;
    }
    double mean = 0.0;
    for (double y : ys) mean += y;
    mean /= trials;
    double var = 0.0;
    for (double y : ys) var += (y - mean) * (y - mean);
    var /= trials - 1;
    const double rel = var / target - 1.0;
    out.check(std::abs(rel) <= kNoiseVarianceRel,
              fmt("x=(%g,%g): var(y_n)=%.6f vs (e-1)/R=%.6f, rel %+.4f (tol %.2f)", x[0], x[1], var, target, rel,
                  kNoiseVarianceRel));
    const double crit = kKsCritical1pc / std::sqrt(trials);
    const double d = ks_normal(ys, y_exact(x), sd);
    out.check(d < crit, fmt("x=(%g,%g): KS vs N(y_exact, (e-1)/R) D=%.5f, 1%% critical %.5f", x[0], x[1], d, crit));
    // Diagnostic only: the same test centred on the mean shifted by the O(1/R) bias of a log-mean.
    out.notes.push_back(fmt("info x=(%g,%g): mean(y_n)-y_exact=%+.5f; KS vs N(y_exact-(e-1)/(2R), (e-1)/R) D=%.5f",
                            x[0], x[1], mean - y_exact(x), ks_normal(ys, y_exact(x) - 0.5 * target, sd)));
  }
  const double secs = seconds_since(t0);
  out.check(secs < 60.0, fmt("runtime %.1f s (limit 60)", secs));
  return out;
}

TrainingData random_design(Rng& rng, int n, bool noisy) {
  TrainingData data{Matrix(n, 2), Vector(n), Vector::Zero(n)};
  for (int i = 0; i < n; ++i) {
    data.points.row(i) = uniform_in(Box(Vector::Zero(2), Vector::Ones(2)), rng).transpose();
    data.values[i] = std::sin(3.0 * data.points(i, 0)) * std::cos(2.0 * data.points(i, 1)) + 0.2 * standard_normal(1, rng)[0];
    if (noisy) data.noise_vars[i] = 0.005 + 0.1 * uniform01(rng);
  }
  return data;
}

KernelParams random_kernel(Rng& rng, double lo, double hi) {
  KernelParams p;
  p.beta = standard_normal(1, rng)[0];
  p.sigma2 = 0.5 + 2.0 * uniform01(rng);
  p.lengthscales = Vector(2);
  for (int j = 0; j < 2; ++j) p.lengthscales[j] = lo + (hi - lo) * uniform01(rng);
  return p;
}

Outcome gp_oracle() {
  Outcome out;
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng = make_rng(77);
  double worst_mean[2] = {0, 0}, worst_cov[2] = {0, 0};
  for (int t = 0; t < 20; ++t) {
    const int n = 5 + static_cast<int>(uniform01(rng) * 46);  // 5..50
    const KernelParams p = random_kernel(rng, 0.05, 0.25);
    Matrix q(25, 2);
    for (int i = 0; i < 25; ++i) q.row(i) = uniform_in(Box(Vector::Constant(2, -0.2), Vector::Constant(2, 1.2)), rng).transpose();
    for (int noisy = 0; noisy < 2; ++noisy) {
      const TrainingData data = random_design(rng, n, noisy == 1);
      const auto gp = PosteriorGP::condition(data, p);
      const auto pred = gp.predict(q);
      const auto ref = oracle::condition(data, p, q, gp.jitter());
      const double em = (pred.mean - ref.mean).cwiseAbs().maxCoeff() / std::max(1.0, ref.mean.cwiseAbs().maxCoeff());
      const double ec = (pred.cov - ref.cov).cwiseAbs().maxCoeff() / p.sigma2;
      worst_mean[noisy] = std::max(worst_mean[noisy], em);
      worst_cov[noisy] = std::max(worst_cov[noisy], ec);
    }
  }
  for (int noisy = 0; noisy < 2; ++noisy) {
    const char* label = noisy ? "heteroscedastic noise" : "noise-free";
    out.check(worst_mean[noisy] <= kGpOracleTol, fmt("%s: worst scaled mean error %.3g (tol %.0e)", label, worst_mean[noisy], kGpOracleTol));
    out.check(worst_cov[noisy] <= kGpOracleTol,
              fmt("%s: worst covariance error / sigma2 %.3g (tol %.0e)", label, worst_cov[noisy], kGpOracleTol));
  }
  const double secs = seconds_since(t0);
  out.check(secs < 10.0, fmt("runtime %.2f s (limit 10)", secs));
  return out;
}

Outcome gradient_check() {
  Outcome out;
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng = make_rng(78);
  double worst = 0.0;
  for (int g = 0; g < 10; ++g) {
    const TrainingData data = random_design(rng, 10 + 3 * g, true);
    const KernelParams p = random_kernel(rng, 0.1, 0.8);
    const auto gp = PosteriorGP::condition(data, p);
    for (int k = 0; k < 10; ++k) {
      const Vector x = uniform_in(Box(Vector::Constant(2, -0.2), Vector::Constant(2, 1.2)), rng);
      const Vector grad = gp.mean_gradient(x);
      Vector fd(2);
      for (int i = 0; i < 2; ++i) {
        Vector e = Vector::Zero(2);
        e[i] = 1e-5 * p.lengthscales[i];
        fd[i] = (gp.mean(x + e) - gp.mean(x - e)) / (2.0 * e[i]);
      }
      // Relative to the gradient scale sigma/ell so that near-stationary points do not divide by zero.
      const double scale = std::max(fd.norm(), 1e-3 * std::sqrt(p.sigma2) / p.lengthscales.minCoeff());
      worst = std::max(worst, (grad - fd).norm() / scale);
    }
  }
  out.check(worst < kGradientRel, fmt("worst relative gradient error over 100 queries %.3g (tol %.0e)", worst, kGradientRel));
  const double secs = seconds_since(t0);
  out.check(secs < 30.0, fmt("runtime %.2f s (limit 30)", secs));
  return out;
}

Outcome mala_sanity() {
  Outcome out;
  const auto t0 = std::chrono::steady_clock::now();
  const LogDensity normal{[](const Vector& x) { return -0.5 * x.squaredNorm(); }, [](const Vector& x) { return Vector(-x); }};
  MalaConfig cfg;
  cfg.step_size = 0.1;
  cfg.max_steps = 5000;
  cfg.seed = 404;
  const StepSizeTuning tuned = tune_step_size(0.574, normal, Vector::Zero(2), cfg);
  cfg.step_size = tuned.step_size;
  cfg.max_steps = 100000;
  cfg.adapt_step = false;
  cfg.seed = 405;
  const Chain chain = run_mala(normal, xy(3.0, -3.0), cfg);
  const Matrix kept = postprocess(chain, cfg.burn_in_fraction, 1);
  const Vector mean = kept.colwise().mean();
  const Matrix centred = kept.rowwise() - mean.transpose();
  const Matrix cov = centred.transpose() * centred / static_cast<double>(kept.rows() - 1);
  const double burn = std::floor(cfg.burn_in_fraction * cfg.max_steps);
  const double acc = chain.acceptance_rate(static_cast<Eigen::Index>(burn) + 1);
  out.notes.push_back(fmt("info tuned tau %.4f, %ld post-burn-in states", tuned.step_size, static_cast<long>(kept.rows())));
  out.check(mean.cwiseAbs().maxCoeff() <= kMalaMeanTol, fmt("mean (%.4f, %.4f) (tol %.2f)", mean[0], mean[1], kMalaMeanTol));
  out.check((cov - Matrix::Identity(2, 2)).cwiseAbs().maxCoeff() <= kMalaCovTol,
            fmt("covariance [[%.4f, %.4f], [%.4f, %.4f]] (tol %.1f)", cov(0, 0), cov(0, 1), cov(1, 0), cov(1, 1), kMalaCovTol));
  out.check(tuned.validation_acceptance >= kAcceptLow && tuned.validation_acceptance <= kAcceptHigh,
            fmt("validation acceptance %.3f in [%.2f, %.2f]", tuned.validation_acceptance, kAcceptLow, kAcceptHigh));
  out.check(acc >= kAcceptLow && acc <= kAcceptHigh, fmt("chain acceptance %.3f in [%.2f, %.2f]", acc, kAcceptLow, kAcceptHigh));
  const double secs = seconds_since(t0);
  out.check(secs < 60.0, fmt("runtime %.2f s (limit 60)", secs));
  return out;
}

Outcome reference_reconstruction() {
  Outcome out;
  const auto t0 = std::chrono::steady_clock::now();
  const Matrix a = reference_posterior_samples(10000, 501);
  const Matrix b = reference_posterior_samples(10000, 502);
  // The x1 marginal is reconstructed by a 1D KDE of the first coordinate with
  // its own leave-one-out window.
  const Box dom = benchmark_domain();
  const KdeModel marginal = KdeModel::fit(Matrix(a.col(0)));
  const int modes = count_kde_modes_1d(a.col(0), marginal.window(), dom.lower[0], dom.upper[0]);
  out.check(modes == 2, fmt("x1 marginal KDE has %d modes (window %.4f)", modes, marginal.window()));
  // For reference, the x1 marginal of the 2D reconstruction keeps the 2D window.
  const KdeModel joint = KdeModel::fit(a);
  out.notes.push_back(fmt("info x1 marginal of the 2D KDE (window %.4f) has %d modes", joint.window(),
                          count_kde_modes_1d(a.col(0), joint.window(), dom.lower[0], dom.upper[0])));
  const double silverman = silverman_window(a.rows(), 1);
  out.notes.push_back(fmt("info with the 1D Silverman window (%.4f) the x1 marginal KDE has %d modes", silverman,
                          count_kde_modes_1d(a.col(0), silverman, dom.lower[0], dom.upper[0])));
  const double w1 = wasserstein1(a, b);
  out.check(w1 < kReferenceW1, fmt("W1 between two 10^4-point reference sets %.4f (limit %.1f, diameter %.2f)", w1,
                                   kReferenceW1, dom.diameter()));
  const double secs = seconds_since(t0);
  out.check(secs < 300.0, fmt("runtime %.1f s (limit 300)", secs));
  return out;
}

// ---------------------------------------------------------------------------
// Benchmark experiments for criteria 6 and 7.

ExperimentConfig benchmark_config(const std::string& strategy, const fs::path& dir) {
  ExperimentConfig c;
  c.strategy = strategy;
  c.repetitions = 5;
  c.n0 = 20;
  c.n_max = 100;
  c.replications = 100;
  c.chains = 100;
  c.metric_sizes = {20, 30, 40, 50, 60, 70, 80, 90, 100};
  c.samples = "final";
  c.output_dir = dir / strategy;
  return c;
}

int run_experiments(const fs::path& dir) {
  int status = 0;
  for (const std::string s : {"var-based", "space-filling"}) {
    const auto t0 = std::chrono::steady_clock::now();
    const ExperimentConfig c = benchmark_config(s, dir);
    const int workers = std::max(1u, std::thread::hardware_concurrency());
    status |= run_experiment(c, static_cast<int>(workers), std::cout);
    std::cout << s << ": " << fmt("%.0f s", seconds_since(t0)) << " with " << workers << " worker(s)\n";
  }
  return status;
}

struct Medians {
  std::map<int, double> w1, iv;
  double epsilon_ref = 0.0;
};

Medians load_summary(const fs::path& dir) {
  std::ifstream in(dir / "summary.json");
  if (!in) throw std::runtime_error("missing " + (dir / "summary.json").string() + "; run the experiments first");
  const auto j = nlohmann::json::parse(in);
  Medians m;
  m.epsilon_ref = j["epsilon_ref"].get<double>();
  for (const auto& e : j["per_N"]) {
    const int n = e["N"];
    auto num = [](const nlohmann::json& v) { return v.is_number() ? v.get<double>() : std::nan(""); };
    m.w1[n] = num(e["W1"]["median"]);
    m.iv[n] = num(e["integrated_variance"]["median"]);
  }
  return m;
}

double at(const std::map<int, double>& m, int n) {
  const auto it = m.find(n);
  return it == m.end() ? std::nan("") : it->second;
}

Outcome convergence(const fs::path& dir) {
  Outcome out;
  const Medians var = load_summary(dir / "var-based");
  const std::vector<int> sizes{20, 40, 60, 80, 100};
  std::string curve;
  int inversions = 0;
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    curve += fmt(" %d:%.4f", sizes[i], at(var.w1, sizes[i]));
    if (i > 0 && !(at(var.w1, sizes[i]) <= at(var.w1, sizes[i - 1]))) ++inversions;
  }
  out.notes.push_back("info median W1 (var-based)" + curve + fmt("; epsilon_ref %.4f", var.epsilon_ref));
  out.check(inversions <= 1, fmt("median W1 non-increasing up to one inversion (%d inversions)", inversions));
  const double r100 = at(var.w1, 100) / var.epsilon_ref, r70 = at(var.w1, 70) / var.epsilon_ref;
  out.check(r100 <= kFinalToReference, fmt("median W1 at N=100 is %.3f x epsilon_ref (limit %.0f)", r100, kFinalToReference));
  out.check(r70 <= kSeventyToReference, fmt("median W1 at N=70 is %.3f x epsilon_ref (limit %.0f)", r70, kSeventyToReference));
  return out;
}

Outcome dominance(const fs::path& dir) {
  Outcome out;
  const Medians var = load_summary(dir / "var-based");
  const Medians sf = load_summary(dir / "space-filling");
  for (int n : {60, 80, 100})
    out.check(at(var.w1, n) <= at(sf.w1, n),
              fmt("N=%d: median W1 var-based %.4f <= space-filling %.4f", n, at(var.w1, n), at(sf.w1, n)));
  const double drop = at(var.iv, 20) / at(var.iv, 100);
  out.check(drop >= kVarianceDrop, fmt("var-based integrated variance N=20 %.4g -> N=100 %.4g, drop %.1fx (need %.0fx)",
                                       at(var.iv, 20), at(var.iv, 100), drop, kVarianceDrop));
  out.check(at(sf.iv, 100) > at(var.iv, 100),
            fmt("N=100: integrated variance space-filling %.4g > var-based %.4g", at(sf.iv, 100), at(var.iv, 100)));
  return out;
}

// ---------------------------------------------------------------------------

Outcome kde_and_factor() {
  Outcome out;
  Rng rng = make_rng(808);
  double worst_norm = 0.0;
  for (int t = 0; t < 20; ++t) {
    const int k = 10 + static_cast<int>(uniform01(rng) * 90);
    Matrix pts(k, 2);
    for (int i = 0; i < k; ++i) pts.row(i) = standard_normal(2, rng).transpose();
    pts.col(0) *= 0.5 + 2.0 * uniform01(rng);
    pts.col(1) += (uniform01(rng) - 0.5) * pts.col(0);
    const KdeModel kde(pts, sample_cov_sqrt(pts), 0.1 + 0.9 * uniform01(rng));
    // Importance sampling from the same mixture with every kernel widened 1.5x,
    // whose density is coded independently here; the weight f/q stays below 2.25.
    const double widen = 1.5;
    const Matrix band = widen * kde.window() * sample_cov_sqrt(pts);
    const Matrix band_inv = band.triangularView<Eigen::Lower>().solve(Matrix::Identity(2, 2));
    const double q_norm = 1.0 / (2.0 * std::numbers::pi * std::abs(band.determinant()) * k);
    const int n = 200000;
    Matrix q(n, 2);
    Vector q_density = Vector::Zero(n);
    for (int i = 0; i < n; ++i) {
      const int m = std::min(k - 1, static_cast<int>(uniform01(rng) * k));
      q.row(i) = (pts.row(m).transpose() + band * standard_normal(2, rng)).transpose();
      for (int j = 0; j < k; ++j)
        q_density[i] += std::exp(-0.5 * (band_inv * (q.row(i) - pts.row(j)).transpose()).squaredNorm());
      q_density[i] *= q_norm;
    }
    const double sum = (kde.evaluate_many(q).array() / q_density.array()).sum();
    worst_norm = std::max(worst_norm, std::abs(sum / n - 1.0));
  }
  out.check(worst_norm <= kKdeNormTol, fmt("normalization over 20 random models: worst |I-1| %.4f (tol %.2f)", worst_norm, kKdeNormTol));

  const KdeModel one(Matrix::Zero(1, 2), Matrix::Identity(2, 2), 1.0);
  const double centre_err = std::abs(one.evaluate(Vector::Zero(2)) - 1.0 / (2.0 * std::numbers::pi));
  const double off_err = std::abs(one.evaluate(xy(1.0, 1.0)) - std::exp(-1.0) / (2.0 * std::numbers::pi));
  out.check(std::max(centre_err, off_err) <= kKdeClosedTol,
            fmt("single kernel: |f(0)-1/(2pi)| %.2g, |f(1,1)-e^-1/(2pi)| %.2g (tol %.0e)", centre_err, off_err, kKdeClosedTol));

  TrainingData data{Matrix(8, 2), Vector(8), Vector::Constant(8, 1e-3)};
  for (int i = 0; i < 8; ++i) {
    data.points.row(i) = uniform_in(Box(Vector::Zero(2), Vector::Ones(2)), rng).transpose();
    data.values[i] = std::cos(4.0 * data.points(i, 0)) * data.points(i, 1);
  }
  const auto gp = std::make_shared<const PosteriorGP>(PosteriorGP::condition(data, KernelParams{0.2, 1.5, Vector::Constant(2, 0.35)}));
  Trajectory traj(gp, {}, 809);
  int admitted = 0;
  while (admitted < 30) {
    const Vector x = uniform_in(Box(Vector::Constant(2, -0.5), Vector::Constant(2, 1.5)), rng);
    const JointDraw d = traj.draw_at(x);
    admitted += traj.admit(x, d.value, d.gradient) ? 1 : 0;
  }
  const Matrix fresh = Eigen::LLT<Matrix>(traj.anchor_covariance()).matrixL();
  const double err = oracle::rel_frobenius(traj.anchor_factor(), fresh);
  out.check(err <= kFactorTol, fmt("incremental anchor factor vs fresh Cholesky after 30 admissions: rel %.3g (tol %.0e)", err, kFactorTol));
  return out;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// history.csv without its wall-clock column.
std::string history_without_timing(const fs::path& p) {
  std::istringstream in(slurp(p));
  std::string line, out;
  while (std::getline(in, line)) out += line.substr(0, line.rfind(',')) + '\n';
  return out;
}

Outcome determinism(const fs::path& dir) {
  Outcome out;
  ExperimentConfig c;
  c.repetitions = 2;
  c.n0 = 6;
  c.n_max = 9;
  c.replications = 30;
  c.chains = 8;
  c.kept = 40;
  c.reference_size = 600;
  c.w1_size = 200;
  c.variance_points = 1000;
  c.reference_draws = 3;
  c.hyper_starts = 4;
  std::ostringstream log;
  const fs::path a = dir / "run_a", b = dir / "run_b";
  for (const auto& [d, workers] : {std::pair{a, 1}, std::pair{b, 3}}) {
    fs::remove_all(d);
    c.output_dir = d;
    out.check(run_experiment(c, workers, log) == 0, fmt("run into %s with %d worker(s) succeeds", d.filename().c_str(), workers));
  }
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(a))
    if (e.is_regular_file()) files.push_back(fs::relative(e.path(), a));
  std::sort(files.begin(), files.end());
  int identical = 0;
  std::string differing;
  for (const auto& f : files) {
    const bool same = f == "history.csv" ? history_without_timing(a / f) == history_without_timing(b / f)
                                         : slurp(a / f) == slurp(b / f);
    if (same) ++identical;
    else differing += " " + f.string();
  }
  out.check(!files.empty() && identical == static_cast<int>(files.size()),
            fmt("%d of %zu output files byte-identical (history.csv compared without wall_ms)%s", identical, files.size(),
                differing.c_str()));
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    std::cerr << "usage: acceptance <1-9> [workdir] | acceptance experiments <dir>\n";
    return 2;
  }
  const std::string which = argv[1];
  const fs::path dir = argc > 2 ? fs::path(argv[2]) : fs::current_path() / "acceptance_runs";
  try {
    if (which == "experiments") return run_experiments(dir);
    const std::map<std::string, std::pair<std::string, std::function<Outcome()>>> criteria{
        {"1", {"delta-method noise validation", noise_validation}},
        {"2", {"GP oracle equivalence", gp_oracle}},
        {"3", {"gradient correctness", gradient_check}},
        {"4", {"MALA sanity", mala_sanity}},
        {"5", {"reference reconstruction", reference_reconstruction}},
        {"6", {"end-to-end convergence", [&] { return convergence(dir); }}},
        {"7", {"strategy dominance", [&] { return dominance(dir); }}},
        {"8", {"KDE and incremental factor correctness", kde_and_factor}},
        {"9", {"determinism", [&] { fs::create_directories(dir); return determinism(dir / "determinism"); }}},
    };
    const auto it = criteria.find(which);
    if (it == criteria.end()) {
      std::cerr << "unknown criterion " << which << '\n';
      return 2;
    }
    const auto t0 = std::chrono::steady_clock::now();
    const Outcome o = it->second.second();
    for (const auto& n : o.notes) std::cout << "    " << n << '\n';
    std::cout << (o.pass ? "[PASS]" : "[FAIL]") << " criterion " << which << ": " << it->second.first
              << fmt(" (%.1f s)", seconds_since(t0)) << std::endl;
    return o.pass ? 0 : 1;
  } catch (const std::exception& e) {
    std::cout << "[FAIL] criterion " << which << ": " << e.what() << std::endl;
    return 1;
  }
}
