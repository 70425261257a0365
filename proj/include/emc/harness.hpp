#pragma once

#include <optional>
#include <string>
#include <vector>

#include "emc/config.hpp"
#include "emc/learner.hpp"

namespace emc {

struct EvalResult {
  double win_rate = 0.0;
  double mean_return = 0.0;
};

// n fresh episodes with greedy decentralized action selection; no learning
// side effects.
EvalResult evaluate(std::vector<AgentNet>& nets, Env& env, int n_episodes, uint64_t seed_base);

struct EvalPoint {
  long long step = 0;
  double win_rate = 0.0;
  double mean_return = 0.0;
  double loss_inference = 0.0;
  double loss_memory = 0.0;
  double loss_predictor = 0.0;
  double mean_r_int = 0.0;
  double eta = 0.0;
  double epsilon = 0.0;
};

// One seeded training run: collect -> train -> periodic evaluation. Can be
// advanced incrementally so several seeds can be driven in lockstep. With an
// output directory it streams metrics.csv, heatmap grids, and checkpoints;
// without one it only keeps the evaluation curve in memory.
class Run {
 public:
  Run(const ExperimentConfig& cfg, uint64_t seed, const std::string& out_dir);
  ~Run();

  // Advance until env steps reach min(target, cfg.total_steps).
  // Returns true while the run has steps left.
  bool advance_to(long long target_steps);
  void run_all();
  void finalize();  // final eval-point flush, checkpoint, memory snapshot

  long long steps() const { return env_steps_; }
  bool finished() const { return env_steps_ >= cfg_.total_steps; }
  const std::vector<EvalPoint>& curve() const { return curve_; }
  uint64_t seed() const { return seed_; }

 private:
  void do_eval(long long nominal_step);
  void record_episode_artifacts(const EpisodeRecord& ep);
  void write_heatmaps(long long nominal_step);
  void save_checkpoint(bool include_curiosity);

  ExperimentConfig cfg_;
  uint64_t seed_;
  std::string dir_;

  std::unique_ptr<Env> env_, eval_env_;
  EnvSpec spec_;
  std::unique_ptr<Learner> learner_;
  std::unique_ptr<CuriosityModule> curiosity_;
  std::unique_ptr<ProjectionMatrix> proj_;
  std::unique_ptr<MemoryTable> memory_;
  std::unique_ptr<ReplayBuffer> buffer_;
  Rng action_rng_, sample_rng_;

  long long env_steps_ = 0;
  long long episodes_ = 0;
  long long next_eval_ = 0;
  long long pending_train_ = 0;
  long long evals_done_ = 0;

  // accumulated since the last eval point
  double acc_loss_inf_ = 0.0, acc_loss_mem_ = 0.0, acc_loss_pred_ = 0.0, acc_r_int_ = 0.0;
  long long acc_trains_ = 0;

  // heatmap window (gridworld only)
  int grid_rows_ = 0, grid_cols_ = 0;
  long long window_start_ = 0;
  std::vector<long long> window_visits_;
  std::vector<double> window_rint_;

  std::vector<EvalPoint> curve_;
  FILE* metrics_ = nullptr;
  FILE* trace_ = nullptr;
  bool finalized_ = false;
};

// CLI entry points -----------------------------------------------------------

// Runs every seed in the config (or just the override); returns a process
// exit code.
int run_experiment(const ExperimentConfig& cfg, std::optional<uint64_t> seed_override,
                   const std::string& out_dir_override);

struct AggregateRow {
  long long step = 0;
  int n = 0;
  double win_median = 0.0, win_q25 = 0.0, win_q75 = 0.0;
  double return_median = 0.0;
};

// Percentile with linear interpolation between closest ranks (p in [0,100]).
double percentile(std::vector<double> values, double p);

std::vector<AggregateRow> aggregate_metric_files(const std::vector<std::string>& files);
int aggregate_cli(const std::string& runs_dir, const std::string& out_file);
int heatmap_cli(const std::string& run_dir, long long window_step);

void save_params(const std::string& bin_path, const std::string& manifest_path,
                 const std::vector<ParamGrad>& params);

}  // namespace emc
