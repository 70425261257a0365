#pragma once

#include <memory>
#include <vector>

#include "emc/rng.hpp"

namespace emc {

struct EnvSpec {
  int n_agents = 0;
  int n_actions = 0;
  int obs_width = 0;
  int state_width = 0;
  int horizon = 0;
};

struct StepResult {
  std::vector<std::vector<double>> obs;  // per agent
  std::vector<double> state;
  double reward = 0.0;
  bool done = false;
};

class Env {
 public:
  virtual ~Env() = default;
  virtual EnvSpec spec() const = 0;
  virtual StepResult reset(uint64_t seed) = 0;
  virtual StepResult step(const std::vector<int>& joint_action) = 0;
  // true once the episode's success event has occurred (win condition)
  virtual bool episode_won() const = 0;
  // grid dimensions for heatmap emission; returns false for non-grid envs
  virtual bool grid_shape(int& rows, int& cols) const { return false; }
  // per-agent grid cells (row, col) for heatmap recording
  virtual std::vector<std::pair<int, int>> agent_cells() const { return {}; }
};

// Two-agent coordination gridworld. Actions: 0=up 1=down 2=left 3=right
// 4=stay. A wall column splits the grid; each agent has a goal cell on its
// own side. Both agents on their goals in the same step ends the episode
// with +10; exactly one on its goal costs -p. Agents see each other only
// while both are inside the shaded region. Optional per-step Gaussian reward
// noise inside a noisy band, and per-agent action slip probability.
struct GridworldConfig {
  int width = 12;
  int height = 11;
  double penalty = 2.0;        // p >= 0
  double noise_sigma = 0.0;    // sigma >= 0, reward noise inside the noisy band
  double slip_prob = 0.0;      // xi in [0,1]
  int horizon = 60;
  double reward_win = 10.0;

  // layout (defaults follow the 11x12 game: full-height wall at column 6,
  // 5x6 shaded region at the bottom centre, goals flanking the wall)
  int wall_col = 6;
  int shaded_row0 = 6, shaded_row1 = 10;  // inclusive
  int shaded_col0 = 3, shaded_col1 = 8;
  int noisy_row0 = 4, noisy_row1 = 5;     // 2x6 band above the shaded region
  int noisy_col0 = 3, noisy_col1 = 8;
  int goal0_row = 8, goal0_col = 5;       // agent 0 (left side)
  int goal1_row = 8, goal1_col = 7;       // agent 1 (right side)
  int start0_row = 0, start0_col = 0;
  int start1_row = 0, start1_col = 11;

  void validate() const;
};

class GridworldEnv : public Env {
 public:
  explicit GridworldEnv(const GridworldConfig& cfg);

  EnvSpec spec() const override;
  StepResult reset(uint64_t seed) override;
  StepResult step(const std::vector<int>& joint_action) override;
  bool episode_won() const override { return won_; }
  bool grid_shape(int& rows, int& cols) const override {
    rows = cfg_.height;
    cols = cfg_.width;
    return true;
  }
  std::vector<std::pair<int, int>> agent_cells() const override;

  bool is_wall(int row, int col) const;
  bool in_shaded(int row, int col) const;
  bool in_noisy(int row, int col) const;

  static constexpr int kActions = 5;  // up, down, left, right, stay

 private:
  std::vector<double> observe(int agent) const;
  std::vector<double> global_state() const;
  StepResult snapshot(double reward, bool done) const;

  GridworldConfig cfg_;
  Rng rng_{0};
  int row_[2] = {0, 0}, col_[2] = {0, 0};
  int t_ = 0;
  bool done_ = true;
  bool won_ = false;
};

// Cooperative predator-prey on a torus with miscoordination penalties.
// Actions: 0=up 1=down 2=left 3=right 4=stay 5=capture. A prey is captured
// when at least two adjacent predators choose capture simultaneously; a
// predator capturing with no partner is penalised.
struct PredatorPreyConfig {
  int grid = 10;
  int n_predators = 4;
  int n_prey = 2;
  double reward_capture = 10.0;
  double penalty_lone = 2.0;
  int horizon = 100;
  bool prey_moves = false;  // prey takes a uniform random move each step
  int sight = 2;            // Chebyshev visibility radius

  void validate() const;
};

class PredatorPreyEnv : public Env {
 public:
  explicit PredatorPreyEnv(const PredatorPreyConfig& cfg);

  EnvSpec spec() const override;
  StepResult reset(uint64_t seed) override;
  StepResult step(const std::vector<int>& joint_action) override;
  bool episode_won() const override { return won_; }

  static constexpr int kActions = 6;

 private:
  std::vector<double> observe(int agent) const;
  std::vector<double> global_state() const;
  StepResult snapshot(double reward, bool done) const;
  int wrap(int v) const;

  PredatorPreyConfig cfg_;
  Rng rng_{0};
  std::vector<int> pred_r_, pred_c_;
  std::vector<int> prey_r_, prey_c_;
  std::vector<bool> prey_alive_;
  int t_ = 0;
  bool done_ = true;
  bool won_ = false;
};

}  // namespace emc
