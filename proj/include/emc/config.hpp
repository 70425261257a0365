#pragma once

#include <memory>
#include <string>
#include <vector>

#include "emc/curiosity.hpp"
#include "emc/env.hpp"
#include "emc/factorization.hpp"
#include "emc/learner.hpp"

namespace emc {

// Everything that determines a run. Flat key=value text on disk; any key can
// be overridden through an EMC_<KEY> environment variable.
struct ExperimentConfig {
  // environment
  std::string env = "gridworld";
  double grid_penalty = 2.0;
  double grid_sigma = 0.0;
  double grid_slip = 0.0;
  int grid_horizon = 60;
  int pp_grid = 10;
  int pp_predators = 4;
  int pp_prey = 2;
  double pp_capture_reward = 10.0;
  double pp_lone_penalty = 2.0;
  int pp_horizon = 100;
  bool pp_prey_moves = false;

  // algorithm
  std::string mixer = "linear-sum";
  std::string curiosity = "emc";
  double lambda = 0.1;
  double eta0 = 0.05;
  double rho = 0.05;
  double gamma = 0.99;
  double lr = 5e-4;
  int hidden = 64;
  int mixer_hidden = 32;
  int batch_size = 32;
  int buffer_capacity = 5000;
  int target_interval = 200;
  int train_interval = 0;  // env steps between learner updates; 0 = once per episode
  double eps_start = 1.0;
  double eps_end = 0.05;
  long long eps_anneal = 50000;
  bool recompute_intrinsic = false;

  // episodic memory
  int mem_latent_dim = 4;
  double mem_delta = 1e-6;
  long long mem_capacity = 1000000;

  // schedule
  long long total_steps = 1000000;
  long long eval_interval = 10000;
  int eval_episodes = 32;
  std::string seeds = "1,2,3,4,5";
  std::string out_dir = "runs";
  bool trace_dump = false;

  static ExperimentConfig from_file(const std::string& path);
  static ExperimentConfig from_lines(const std::vector<std::string>& lines);
  void set(const std::string& key, const std::string& value);
  void apply_env_overrides();  // EMC_<KEY>=value
  void validate() const;
  std::string serialize() const;

  std::vector<uint64_t> seed_list() const;
  std::unique_ptr<Env> make_env() const;
  LearnerConfig learner_config() const;
  CuriosityConfig curiosity_config() const;
};

}  // namespace emc
