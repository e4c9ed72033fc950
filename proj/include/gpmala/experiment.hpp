#pragma once

#include "gpmala/ensemble.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace gpmala {

/// Flat key=value experiment description. See README for the key list.
struct ExperimentConfig {
  std::string problem = "analytic";
  std::string strategy = "var-based";  ///< var-based, space-filling or reference-only
  int repetitions = 5;
  std::uint64_t seed = 1;

  int n0 = 20;
  int n_max = 100;
  int replications = 100;
  int chains = 100;
  int kept = 100;
  int batch = 1;
  double batch_separation = 0.0;

  double step_size = 0.1;
  bool adapt_step = true;
  double burn_in = 0.2;
  int thinning = 4;
  double gamma = 0.0;  ///< 0 selects 0.01 sigma
  bool values_only = false;
  int anchor_cap = 500;
  int neighbor_count = 100;

  int hyper_starts = 10;
  int hyper_iterations = 200;
  std::string noise = "auto";  ///< auto, delta or bootstrap
  int bootstrap_resamples = 2000;

  int halton_size = 4096;
  int variance_points = 10000;
  std::vector<int> metric_sizes;  ///< empty: every round

  int reference_size = 10000;
  int w1_size = 1000;
  int reference_draws = 5;
  std::string samples = "all";  ///< all, final or none

  std::filesystem::path output_dir = "results";

  void set(const std::string& key, const std::string& value);
  void validate() const;
  [[nodiscard]] CalibrationConfig calibration(int workers) const;
};

[[nodiscard]] ExperimentConfig parse_config(std::istream& in, const std::string& source = "<config>");
[[nodiscard]] ExperimentConfig load_config(const std::filesystem::path& path);
/// Applies "key=value".
void apply_override(ExperimentConfig& config, const std::string& assignment);

/// Runs every repetition and writes history.csv, design.csv, samples/ and summary.json
/// under config.output_dir. Returns 0 when every round succeeded.
int run_experiment(const ExperimentConfig& config, int workers, std::ostream& log);

struct HistoryRow {
  int repetition = 0;
  int n = 0;
  std::string strategy;
  double w1 = 0.0;
  double integrated_variance = 0.0;
  double acceptance_rate = 0.0;
  long anchors_total = 0;
  double wall_ms = 0.0;
};

[[nodiscard]] std::vector<HistoryRow> read_history(const std::filesystem::path& path);

/// Per-N medians of W1 and integrated variance for each input file, with the
/// var-based / space-filling W1 ratio (or first / second file when that pairing is absent).
void compare_histories(const std::vector<std::filesystem::path>& files, std::ostream& out);

/// Linear-interpolation quantile of the finite entries; NaN when there are none.
[[nodiscard]] double quantile(std::vector<double> values, double q);

/// %.17g, with nan/inf spelled out.
[[nodiscard]] std::string format_double(double v);

}  // namespace gpmala
