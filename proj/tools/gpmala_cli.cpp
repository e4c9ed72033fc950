// Experiment runner: `run` executes a configured study, `compare` summarizes histories.

#include "gpmala/error.hpp"
#include "gpmala/experiment.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>

namespace {

int default_workers() {
  if (const char* env = std::getenv("GPMALA_WORKERS")) {
    try {
      const int n = std::stoi(env);
      if (n >= 1) return n;
    } catch (const std::exception&) {
    }
    std::cerr << "ignoring invalid GPMALA_WORKERS='" << env << "'\n";
  }
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"GP-surrogate MALA posterior reconstruction experiments"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> overrides;
  int workers = 0;
  std::string out_dir;
  auto* run = app.add_subcommand("run", "Run an experiment from a key=value config");
  run->add_option("--config", config_path, "Config file")->required()->check(CLI::ExistingFile);
  run->add_option("--set", overrides, "Override a config entry, key=value (repeatable)");
  run->add_option("--workers", workers, "Parallel tasks (default: $GPMALA_WORKERS or 1)")->check(CLI::PositiveNumber);
  run->add_option("--out", out_dir, "Output directory (overrides output_dir)");

  std::vector<std::string> files;
  auto* compare = app.add_subcommand("compare", "Per-N medians of one or more history.csv files");
  compare->add_option("files", files, "history.csv files")->required()->check(CLI::ExistingFile);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      gpmala::ExperimentConfig cfg = gpmala::load_config(config_path);
      for (const auto& o : overrides) gpmala::apply_override(cfg, o);
      if (!out_dir.empty()) cfg.output_dir = out_dir;
      return gpmala::run_experiment(cfg, workers > 0 ? workers : default_workers(), std::cerr);
    }
    std::vector<std::filesystem::path> paths(files.begin(), files.end());
    gpmala::compare_histories(paths, std::cout);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
