#include <CLI11.hpp>

#include <cstdio>
#include <optional>

#include "emc/harness.hpp"

int main(int argc, char** argv) {
  CLI::App app{"EMC: episodic multi-agent Q-learning with curiosity-driven exploration"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "train on a config, one output directory per seed");
  std::string config_path, out_dir;
  long long seed = -1;
  run->add_option("--config", config_path, "key=value config file")->required();
  run->add_option("--seed", seed, "run a single seed instead of the config's list");
  run->add_option("--out", out_dir, "output directory (default: config out_dir)");

  auto* agg = app.add_subcommand("aggregate", "median and quartile bands across seed runs");
  std::string runs_dir, agg_out;
  agg->add_option("--runs", runs_dir, "directory containing seed run directories")->required();
  agg->add_option("--out", agg_out, "output csv (default: <runs>/aggregate.csv)");

  auto* heat = app.add_subcommand("heatmap", "print recorded visitation/intrinsic grids");
  std::string heat_dir;
  long long window = 0;
  heat->add_option("--run", heat_dir, "a single seed's run directory")->required();
  heat->add_option("--window", window, "eval-point step of the recording window")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) {
      auto cfg = emc::ExperimentConfig::from_file(config_path);
      std::optional<uint64_t> seed_override;
      if (seed >= 0) seed_override = static_cast<uint64_t>(seed);
      return emc::run_experiment(cfg, seed_override, out_dir);
    }
    if (agg->parsed()) return emc::aggregate_cli(runs_dir, agg_out);
    if (heat->parsed()) return emc::heatmap_cli(heat_dir, window);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
