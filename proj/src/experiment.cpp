#include "gpmala/experiment.hpp"

#include "gpmala/benchmark.hpp"
#include "gpmala/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <sstream>

namespace gpmala {

namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kReferenceA = 11;
constexpr std::uint64_t kReferenceB = 12;
constexpr std::uint64_t kReferenceDraw = 13;
constexpr std::uint64_t kRepetition = 14;
constexpr std::uint64_t kRoundW1 = 15;

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  const char* end = value.data() + value.size();
  const auto res = std::from_chars(value.data(), end, out);
  if (res.ec != std::errc() || res.ptr != end) throw InvalidArgument("bad value for " + key + ": '" + value + "'");
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  throw InvalidArgument("bad boolean for " + key + ": '" + value + "'");
}

std::vector<int> parse_int_list(const std::string& key, const std::string& value) {
  std::vector<int> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(parse_number<int>(key, item));
  }
  return out;
}

void write_matrix_csv(const fs::path& path, const Matrix& m) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  for (Eigen::Index j = 0; j < m.cols(); ++j) out << (j ? "," : "") << 'x' << j + 1;
  out << '\n';
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) out << (j ? "," : "") << format_double(m(i, j));
    out << '\n';
  }
}

struct Stats {
  double median, q1, q3;
};

Stats stats(const std::vector<double>& v) { return {quantile(v, 0.5), quantile(v, 0.25), quantile(v, 0.75)}; }

std::string json_number(double v) { return std::isfinite(v) ? format_double(v) : "null"; }

void json_stats(std::ostream& out, const char* name, const Stats& s) {
  out << '"' << name << "\": {\"median\": " << json_number(s.median) << ", \"q1\": " << json_number(s.q1)
      << ", \"q3\": " << json_number(s.q3) << '}';
}

std::unique_ptr<Problem> make_problem(const std::string& name) {
  if (name == "analytic") return std::make_unique<AnalyticProblem>();
  throw InvalidArgument("unknown problem: " + name);
}

// Reference material shared by every repetition of a run.
struct Reference {
  Matrix a, b, target;  // target: W1 subsample of a
  double epsilon = 0.0;
};

Reference build_reference(const ExperimentConfig& cfg) {
  Reference ref;
  ref.a = reference_posterior_samples(cfg.reference_size, derive_seed(cfg.seed, {kReferenceA}));
  ref.b = reference_posterior_samples(cfg.reference_size, derive_seed(cfg.seed, {kReferenceB}));
  ref.target = subsample_rows(ref.a, cfg.w1_size, derive_seed(cfg.seed, {kReferenceA, 1}));
  const KdeModel kde = KdeModel::fit(ref.b);
  std::vector<double> errors;
  for (int j = 0; j < cfg.reference_draws; ++j) {
    Rng rng = make_rng(cfg.seed, {kReferenceDraw, static_cast<std::uint64_t>(j)});
    errors.push_back(wasserstein1(kde.sample(ref.target.rows(), rng), ref.target));
  }
  ref.epsilon = quantile(errors, 0.5);
  return ref;
}

}  // namespace

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double quantile(std::vector<double> values, double q) {
  std::erase_if(values, [](double v) { return !std::isfinite(v); });
  if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

void ExperimentConfig::set(const std::string& raw_key, const std::string& raw_value) {
  const std::string key = trim(raw_key), value = trim(raw_value);
  auto i = [&] { return parse_number<int>(key, value); };
  auto d = [&] { return parse_number<double>(key, value); };
  if (key == "problem") problem = value;
  else if (key == "strategy") strategy = value;
  else if (key == "repetitions") repetitions = i();
  else if (key == "seed") seed = parse_number<std::uint64_t>(key, value);
  else if (key == "n0") n0 = i();
  else if (key == "n_max") n_max = i();
  else if (key == "replications") replications = i();
  else if (key == "chains") chains = i();
  else if (key == "kept") kept = i();
  else if (key == "batch") batch = i();
  else if (key == "batch_separation") batch_separation = d();
  else if (key == "step_size") {
    if (value == "auto") adapt_step = true;
    else step_size = d();
  } else if (key == "adapt_step") adapt_step = parse_bool(key, value);
  else if (key == "burn_in") burn_in = d();
  else if (key == "thinning") thinning = i();
  else if (key == "gamma") gamma = value == "auto" ? 0.0 : d();
  else if (key == "values_only") values_only = parse_bool(key, value);
  else if (key == "anchor_cap") anchor_cap = i();
  else if (key == "neighbor_count") neighbor_count = i();
  else if (key == "hyper_starts") hyper_starts = i();
  else if (key == "hyper_iterations") hyper_iterations = i();
  else if (key == "noise") noise = value;
  else if (key == "bootstrap_resamples") bootstrap_resamples = i();
  else if (key == "halton_size") halton_size = i();
  else if (key == "variance_points") variance_points = i();
  else if (key == "metric_sizes") metric_sizes = parse_int_list(key, value);
  else if (key == "reference_size") reference_size = i();
  else if (key == "w1_size") w1_size = i();
  else if (key == "reference_draws") reference_draws = i();
  else if (key == "samples") samples = value;
  else if (key == "output_dir") output_dir = value;
  else throw InvalidArgument("unknown config key: " + key);
}

void ExperimentConfig::validate() const {
  require(problem == "analytic", "unknown problem: " + problem);
  require(strategy == "var-based" || strategy == "space-filling" || strategy == "reference-only",
          "strategy must be var-based, space-filling or reference-only");
  require(repetitions >= 1, "repetitions must be positive");
  require(n0 >= 1 && n_max >= n0, "need 1 <= n0 <= n_max");
  require(replications >= 1 && chains >= 1 && kept >= 1 && batch >= 1, "counts must be positive");
  require(step_size > 0.0 && thinning >= 1 && burn_in >= 0.0 && burn_in < 1.0, "bad MALA settings");
  require(gamma >= 0.0, "gamma must be nonnegative");
  require(anchor_cap >= 1 && neighbor_count >= 1, "anchor settings must be positive");
  require(hyper_starts >= 1 && hyper_iterations >= 1, "hyperparameter search settings must be positive");
  require(noise == "auto" || noise == "delta" || noise == "bootstrap", "noise must be auto, delta or bootstrap");
  require(reference_size >= 2 && reference_draws >= 1, "reference_size must be >= 2 and reference_draws >= 1");
  require(w1_size >= 1 && w1_size <= reference_size, "w1_size must lie in [1, reference_size]");
  require(halton_size >= 1 && variance_points >= 1, "design settings must be positive");
  require(samples == "all" || samples == "final" || samples == "none", "samples must be all, final or none");
  if (strategy != "reference-only") calibration(1).validate(make_problem(problem)->dim());
}

CalibrationConfig ExperimentConfig::calibration(int workers) const {
  CalibrationConfig c;
  c.initial_size = n0;
  c.max_size = n_max;
  c.replications = replications;
  c.chains = chains;
  c.kept = kept;
  c.batch = batch;
  c.batch_separation = batch_separation;
  c.strategy = strategy == "space-filling" ? Strategy::space_filling : Strategy::var_based;
  c.workers = workers;
  c.mala.step_size = step_size;
  c.mala.adapt_step = adapt_step;
  c.mala.burn_in_fraction = burn_in;
  c.mala.thinning = thinning;
  c.trajectory.admission_threshold = gamma;
  c.trajectory.values_only = values_only;
  c.trajectory.anchor_cap = static_cast<std::size_t>(anchor_cap);
  c.trajectory.neighbor_count = static_cast<std::size_t>(neighbor_count);
  c.search.starts = hyper_starts;
  c.search.iterations = hyper_iterations;
  c.noise = noise == "delta" ? NoiseEstimator::delta
            : noise == "bootstrap" ? NoiseEstimator::bootstrap
                                   : NoiseEstimator::automatic;
  c.bootstrap_resamples = bootstrap_resamples;
  c.halton_size = halton_size;
  c.variance_points = variance_points;
  c.metric_sizes = metric_sizes;
  return c;
}

ExperimentConfig parse_config(std::istream& in, const std::string& source) {
  ExperimentConfig cfg;
  std::string line;
  for (int number = 1; std::getline(in, line); ++number) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw InvalidArgument(source + ":" + std::to_string(number) + ": expected key=value");
    try {
      cfg.set(line.substr(0, eq), line.substr(eq + 1));
    } catch (const InvalidArgument& e) {
      throw InvalidArgument(source + ":" + std::to_string(number) + ": " + e.what());
    }
  }
  return cfg;
}

ExperimentConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open config " + path.string());
  return parse_config(in, path.string());
}

void apply_override(ExperimentConfig& config, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw InvalidArgument("override must look like key=value: " + assignment);
  config.set(assignment.substr(0, eq), assignment.substr(eq + 1));
}

int run_experiment(const ExperimentConfig& config, int workers, std::ostream& log) {
  config.validate();
  const fs::path out = config.output_dir;
  fs::create_directories(out);
  if (config.samples != "none") fs::create_directories(out / "samples");

  const Reference ref = build_reference(config);
  log << "reference error " << format_double(ref.epsilon) << std::endl;
  if (config.samples != "none") {
    write_matrix_csv(out / "samples" / "reference_a.csv", ref.a);
    write_matrix_csv(out / "samples" / "reference_b.csv", ref.b);
  }

  std::ofstream history(out / "history.csv");
  history << "repetition,N,strategy,W1,integrated_variance,acceptance_rate,anchors_total,wall_ms\n";
  std::ofstream design(out / "design.csv");
  design << "repetition,index,x1,x2,y,noise_var\n";

  std::map<int, std::vector<double>> w1_by_n, iv_by_n;
  int failures = 0;
  if (config.strategy != "reference-only") {
    const auto problem = make_problem(config.problem);
    for (int rep = 0; rep < config.repetitions; ++rep) {
      CalibrationConfig cal = config.calibration(workers);
      cal.seed = derive_seed(config.seed, {kRepetition, static_cast<std::uint64_t>(rep)});
      int round = 0;
      const RoundObserver observer = [&](RoundRecord& r, const EnsembleEstimate& ens) {
        Rng rng = make_rng(cal.seed, {kRoundW1, static_cast<std::uint64_t>(r.design_size)});
        r.w1 = wasserstein1(sample_mixture(ens, ref.target.rows(), rng), ref.target);
        const bool final_round = r.design_size >= config.n_max;
        if (config.samples == "all" || (config.samples == "final" && final_round))
          write_matrix_csv(out / "samples" / ("rep" + std::to_string(rep) + "_round" + std::to_string(round) + ".csv"),
                           ens.all_points);
        ++round;
      };
      try {
        const auto hist = run_calibration(*problem, cal, observer);
        for (const auto& r : hist.rounds) {
          const double iv = r.integrated_variance.value_or(std::numeric_limits<double>::quiet_NaN());
          history << rep << ',' << r.design_size << ',' << config.strategy << ',' << format_double(*r.w1) << ','
                  << format_double(iv) << ',' << format_double(r.acceptance_rate) << ',' << r.anchors_total << ','
                  << format_double(r.wall_ms) << '\n';
          w1_by_n[r.design_size].push_back(*r.w1);
          iv_by_n[r.design_size].push_back(iv);
        }
        history.flush();
        const auto& obs = hist.rounds.back().observations;
        for (std::size_t i = 0; i < obs.size(); ++i)
          design << rep << ',' << i << ',' << format_double(obs[i].point[0]) << ',' << format_double(obs[i].point[1])
                 << ',' << format_double(obs[i].log_estimate) << ',' << format_double(obs[i].noise_var) << '\n';
        design.flush();
        log << "repetition " << rep << " done: W1 at N=" << hist.rounds.back().design_size << " is "
            << format_double(*hist.rounds.back().w1) << std::endl;
      } catch (const std::exception& e) {
        ++failures;
        log << "repetition " << rep << " failed: " << e.what() << std::endl;
      }
    }
  }

  std::ofstream summary(out / "summary.json");
  summary << "{\n  \"strategy\": \"" << config.strategy << "\",\n  \"repetitions\": " << config.repetitions
          << ",\n  \"epsilon_ref\": " << json_number(ref.epsilon) << ",\n  \"per_N\": [";
  bool first = true;
  for (const auto& [n, w1] : w1_by_n) {
    summary << (first ? "\n" : ",\n") << "    {\"N\": " << n << ", \"count\": " << w1.size() << ", ";
    json_stats(summary, "W1", stats(w1));
    summary << ", ";
    json_stats(summary, "integrated_variance", stats(iv_by_n[n]));
    summary << '}';
    first = false;
  }
  summary << (first ? "]\n}\n" : "\n  ]\n}\n");
  return failures == 0 ? 0 : 1;
}

std::vector<HistoryRow> read_history(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || trim(line) != "repetition,N,strategy,W1,integrated_variance,acceptance_rate,anchors_total,wall_ms")
    throw InvalidArgument(path.string() + ":1: unexpected header");
  std::vector<HistoryRow> rows;
  for (int number = 2; std::getline(in, line); ++number) {
    if (trim(line).empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string item;
    while (std::getline(ss, item, ',')) f.push_back(trim(item));
    auto where = [&] { return path.string() + ":" + std::to_string(number) + ": "; };
    if (f.size() != 8) throw InvalidArgument(where() + "expected 8 fields");
    auto num = [&](const std::string& s) {
      if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
      try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
      } catch (const std::exception&) {
        throw InvalidArgument(where() + "bad number '" + s + "'");
      }
    };
    HistoryRow r;
    r.repetition = static_cast<int>(num(f[0]));
    r.n = static_cast<int>(num(f[1]));
    r.strategy = f[2];
    r.w1 = num(f[3]);
    r.integrated_variance = num(f[4]);
    r.acceptance_rate = num(f[5]);
    r.anchors_total = static_cast<long>(num(f[6]));
    r.wall_ms = num(f[7]);
    rows.push_back(r);
  }
  return rows;
}

void compare_histories(const std::vector<fs::path>& files, std::ostream& out) {
  require(!files.empty(), "compare needs at least one history file");
  struct Group {
    std::string label, strategy;
    std::map<int, std::vector<double>> w1, iv;
  };
  std::vector<Group> groups;
  for (const auto& f : files) {
    Group g;
    g.label = f.string();
    for (const auto& r : read_history(f)) {
      g.strategy = r.strategy;
      g.w1[r.n].push_back(r.w1);
      g.iv[r.n].push_back(r.integrated_variance);
    }
    groups.push_back(std::move(g));
  }
  // Ratio pairing: var-based over space-filling when both appear, else first over second.
  int num = -1, den = -1;
  for (std::size_t i = 0; i < groups.size(); ++i) {
    if (num < 0 && groups[i].strategy == "var-based") num = static_cast<int>(i);
    if (den < 0 && groups[i].strategy == "space-filling") den = static_cast<int>(i);
  }
  if (num < 0 || den < 0) {
    num = groups.size() > 1 ? 0 : -1;
    den = groups.size() > 1 ? 1 : -1;
  }

  for (std::size_t i = 0; i < groups.size(); ++i)
    out << "# [" << i << "] " << groups[i].label << " (" << groups[i].strategy << ")\n";
  out << "N";
  for (std::size_t i = 0; i < groups.size(); ++i) out << ",W1_median[" << i << "],IV_median[" << i << "]";
  if (num >= 0) out << ",W1_ratio[" << num << "/" << den << "]";
  out << '\n';
  std::vector<int> sizes;
  for (const auto& g : groups)
    for (const auto& [n, v] : g.w1) sizes.push_back(n);
  std::sort(sizes.begin(), sizes.end());
  sizes.erase(std::unique(sizes.begin(), sizes.end()), sizes.end());
  auto median_at = [](const std::map<int, std::vector<double>>& m, int n) {
    const auto it = m.find(n);
    return it == m.end() ? std::numeric_limits<double>::quiet_NaN() : quantile(it->second, 0.5);
  };
  for (int n : sizes) {
    out << n;
    for (const auto& g : groups) out << ',' << format_double(median_at(g.w1, n)) << ',' << format_double(median_at(g.iv, n));
    if (num >= 0)
      out << ',' << format_double(median_at(groups[static_cast<std::size_t>(num)].w1, n) /
                                   median_at(groups[static_cast<std::size_t>(den)].w1, n));
    out << '\n';
  }
}

}  // namespace gpmala
