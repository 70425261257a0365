#pragma once

#include <cstdint>
#include <vector>

#include "emc/tensor.hpp"

namespace emc {

// One complete rollout. obs and state have T+1 rows (the extra row is the
// bootstrap observation after the final transition); everything else has T.
struct EpisodeRecord {
  std::vector<std::vector<std::vector<double>>> obs;  // [T+1][agent][obs_w]
  std::vector<std::vector<double>> state;             // [T+1][state_w]
  std::vector<std::vector<int>> actions;              // [T][agent]
  std::vector<double> reward_ext;                     // [T]
  std::vector<double> reward_int;                     // [T] raw, unscaled
  std::vector<uint8_t> done;                          // [T], true exactly once (last step)
  bool truncated = false;                             // done was the horizon, not the task
  bool won = false;

  int length() const { return static_cast<int>(actions.size()); }
  void check() const;
};

// Episodes padded to a common length with a per-step validity mask.
// All tensors are batch-major: row b of obs[t][i] belongs to episode b.
struct Batch {
  int b = 0, t_max = 0, n_agents = 0, n_actions = 0;
  std::vector<std::vector<Tensor2>> obs;   // [T+1][agent] -> B x obs_w
  std::vector<Tensor2> state;              // [T+1] -> B x state_w
  std::vector<std::vector<int>> actions;   // [T] -> B*n_agents (row-major)
  std::vector<std::vector<double>> r_ext;  // [T] -> B
  std::vector<std::vector<double>> r_int;  // [T] -> B
  std::vector<std::vector<double>> done;   // [T] -> B (1.0 = terminal)
  std::vector<std::vector<double>> mask;   // [T] -> B (1.0 = real step)
  std::vector<const EpisodeRecord*> episodes;

  int action_of(int t, int row, int agent) const { return actions[t][row * n_agents + agent]; }
};

Batch make_batch(const std::vector<const EpisodeRecord*>& eps, int n_agents, int obs_w,
                 int state_w, int n_actions);

}  // namespace emc
