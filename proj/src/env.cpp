#include "emc/env.hpp"

#include <stdexcept>
#include <string>

#include "emc/tensor.hpp"

namespace emc {

namespace {
constexpr int kDRow[5] = {-1, 1, 0, 0, 0};  // up, down, left, right, stay
constexpr int kDCol[5] = {0, 0, -1, 1, 0};
}  // namespace

void GridworldConfig::validate() const {
  require(width > 0 && height > 0, "gridworld: non-positive dimensions");
  require(penalty >= 0.0, "gridworld: penalty must be >= 0");
  require(noise_sigma >= 0.0, "gridworld: noise_sigma must be >= 0");
  require(slip_prob >= 0.0 && slip_prob <= 1.0, "gridworld: slip_prob must be in [0,1]");
  require(horizon > 0, "gridworld: horizon must be positive");
  auto inside = [&](int r, int c) { return r >= 0 && r < height && c >= 0 && c < width; };
  require(inside(goal0_row, goal0_col) && inside(goal1_row, goal1_col),
          "gridworld: goal outside grid");
  require(inside(start0_row, start0_col) && inside(start1_row, start1_col),
          "gridworld: start outside grid");
  require(goal0_col != wall_col && goal1_col != wall_col, "gridworld: goal on wall");
  require(start0_col != wall_col && start1_col != wall_col, "gridworld: start on wall");
}

GridworldEnv::GridworldEnv(const GridworldConfig& cfg) : cfg_(cfg) { cfg_.validate(); }

EnvSpec GridworldEnv::spec() const {
  EnvSpec s;
  s.n_agents = 2;
  s.n_actions = kActions;
  s.obs_width = 5;  // own (x, y), other (x, y), visibility bit
  s.state_width = 4;
  s.horizon = cfg_.horizon;
  return s;
}

bool GridworldEnv::is_wall(int row, int col) const { return col == cfg_.wall_col; }

bool GridworldEnv::in_shaded(int row, int col) const {
  return row >= cfg_.shaded_row0 && row <= cfg_.shaded_row1 && col >= cfg_.shaded_col0 &&
         col <= cfg_.shaded_col1;
}

bool GridworldEnv::in_noisy(int row, int col) const {
  return row >= cfg_.noisy_row0 && row <= cfg_.noisy_row1 && col >= cfg_.noisy_col0 &&
         col <= cfg_.noisy_col1;
}

std::vector<double> GridworldEnv::observe(int agent) const {
  const int other = 1 - agent;
  const double wn = cfg_.width - 1, hn = cfg_.height - 1;
  bool visible = in_shaded(row_[0], col_[0]) && in_shaded(row_[1], col_[1]);
  std::vector<double> o(5);
  o[0] = col_[agent] / wn;
  o[1] = row_[agent] / hn;
  if (visible) {
    o[2] = col_[other] / wn;
    o[3] = row_[other] / hn;
    o[4] = 1.0;
  } else {
    o[2] = -1.0;  // sentinel: other agent unseen
    o[3] = -1.0;
    o[4] = 0.0;
  }
  return o;
}

std::vector<double> GridworldEnv::global_state() const {
  const double wn = cfg_.width - 1, hn = cfg_.height - 1;
  return {col_[0] / wn, row_[0] / hn, col_[1] / wn, row_[1] / hn};
}

StepResult GridworldEnv::snapshot(double reward, bool done) const {
  StepResult r;
  r.obs = {observe(0), observe(1)};
  r.state = global_state();
  r.reward = reward;
  r.done = done;
  return r;
}

StepResult GridworldEnv::reset(uint64_t seed) {
  rng_ = Rng(seed, 0x6772696477ULL);
  row_[0] = cfg_.start0_row;
  col_[0] = cfg_.start0_col;
  row_[1] = cfg_.start1_row;
  col_[1] = cfg_.start1_col;
  t_ = 0;
  done_ = false;
  won_ = false;
  return snapshot(0.0, false);
}

StepResult GridworldEnv::step(const std::vector<int>& joint_action) {
  if (done_) throw std::runtime_error("gridworld: step() after episode end");
  require(joint_action.size() == 2, "gridworld: need one action per agent");

  int acts[2];
  for (int i = 0; i < 2; ++i) {
    int a = joint_action[i];
    require(a >= 0 && a < kActions, "gridworld: action out of range");
    if (cfg_.slip_prob > 0.0 && rng_.uniform() < cfg_.slip_prob) a = rng_.uniform_int(kActions);
    acts[i] = a;
  }

  for (int i = 0; i < 2; ++i) {
    int nr = row_[i] + kDRow[acts[i]];
    int nc = col_[i] + kDCol[acts[i]];
    if (nr < 0 || nr >= cfg_.height || nc < 0 || nc >= cfg_.width) continue;
    if (is_wall(nr, nc)) continue;  // bumping a wall leaves position unchanged
    row_[i] = nr;
    col_[i] = nc;
  }

  bool on_goal0 = (row_[0] == cfg_.goal0_row && col_[0] == cfg_.goal0_col);
  bool on_goal1 = (row_[1] == cfg_.goal1_row && col_[1] == cfg_.goal1_col);

  double reward = 0.0;
  bool done = false;
  if (on_goal0 && on_goal1) {
    reward = cfg_.reward_win;
    done = true;
    won_ = true;
  } else if (on_goal0 || on_goal1) {
    reward = -cfg_.penalty;
  }

  if (cfg_.noise_sigma > 0.0) {
    for (int i = 0; i < 2; ++i)
      if (in_noisy(row_[i], col_[i])) reward += rng_.normal(0.0, cfg_.noise_sigma);
  }

  ++t_;
  if (t_ >= cfg_.horizon) done = true;
  done_ = done;
  return snapshot(reward, done);
}

std::vector<std::pair<int, int>> GridworldEnv::agent_cells() const {
  return {{row_[0], col_[0]}, {row_[1], col_[1]}};
}

void PredatorPreyConfig::validate() const {
  require(grid >= 3, "predator-prey: grid too small");
  require(n_predators >= 2, "predator-prey: need at least two predators");
  require(n_prey >= 1, "predator-prey: need at least one prey");
  require(horizon > 0, "predator-prey: horizon must be positive");
  require(reward_capture > 0.0, "predator-prey: capture reward must be positive");
  require(penalty_lone >= 0.0, "predator-prey: lone penalty must be >= 0");
  require(n_predators + n_prey <= grid * grid, "predator-prey: too many entities");
}

PredatorPreyEnv::PredatorPreyEnv(const PredatorPreyConfig& cfg) : cfg_(cfg) { cfg_.validate(); }

EnvSpec PredatorPreyEnv::spec() const {
  EnvSpec s;
  s.n_agents = cfg_.n_predators;
  s.n_actions = kActions;
  s.obs_width = 2 + 3 * (cfg_.n_predators - 1 + cfg_.n_prey);
  s.state_width = 2 * (cfg_.n_predators + cfg_.n_prey) + cfg_.n_prey;
  s.horizon = cfg_.horizon;
  return s;
}

int PredatorPreyEnv::wrap(int v) const { return ((v % cfg_.grid) + cfg_.grid) % cfg_.grid; }

std::vector<double> PredatorPreyEnv::observe(int agent) const {
  const double g = cfg_.grid;
  std::vector<double> o;
  o.reserve(spec().obs_width);
  o.push_back(pred_c_[agent] / g);
  o.push_back(pred_r_[agent] / g);
  auto push_rel = [&](int r, int c, bool present) {
    if (!present) {
      o.push_back(0.0);
      o.push_back(0.0);
      o.push_back(0.0);
      return;
    }
    int dr = wrap(r - pred_r_[agent] + cfg_.grid / 2) - cfg_.grid / 2;
    int dc = wrap(c - pred_c_[agent] + cfg_.grid / 2) - cfg_.grid / 2;
    bool seen = std::abs(dr) <= cfg_.sight && std::abs(dc) <= cfg_.sight;
    if (!seen) {
      o.push_back(0.0);
      o.push_back(0.0);
      o.push_back(0.0);
    } else {
      o.push_back(dc / g);
      o.push_back(dr / g);
      o.push_back(1.0);
    }
  };
  for (int j = 0; j < cfg_.n_predators; ++j)
    if (j != agent) push_rel(pred_r_[j], pred_c_[j], true);
  for (int j = 0; j < cfg_.n_prey; ++j) push_rel(prey_r_[j], prey_c_[j], prey_alive_[j]);
  return o;
}

std::vector<double> PredatorPreyEnv::global_state() const {
  const double g = cfg_.grid;
  std::vector<double> s;
  s.reserve(spec().state_width);
  for (int i = 0; i < cfg_.n_predators; ++i) {
    s.push_back(pred_c_[i] / g);
    s.push_back(pred_r_[i] / g);
  }
  for (int j = 0; j < cfg_.n_prey; ++j) {
    s.push_back(prey_c_[j] / g);
    s.push_back(prey_r_[j] / g);
  }
  for (int j = 0; j < cfg_.n_prey; ++j) s.push_back(prey_alive_[j] ? 1.0 : 0.0);
  return s;
}

StepResult PredatorPreyEnv::snapshot(double reward, bool done) const {
  StepResult r;
  r.obs.reserve(cfg_.n_predators);
  for (int i = 0; i < cfg_.n_predators; ++i) r.obs.push_back(observe(i));
  r.state = global_state();
  r.reward = reward;
  r.done = done;
  return r;
}

StepResult PredatorPreyEnv::reset(uint64_t seed) {
  rng_ = Rng(seed, 0x7072657955ULL);
  pred_r_.assign(cfg_.n_predators, 0);
  pred_c_.assign(cfg_.n_predators, 0);
  prey_r_.assign(cfg_.n_prey, 0);
  prey_c_.assign(cfg_.n_prey, 0);
  prey_alive_.assign(cfg_.n_prey, true);

  std::vector<bool> used(static_cast<size_t>(cfg_.grid) * cfg_.grid, false);
  auto place = [&](int& r, int& c) {
    for (;;) {
      int cell = rng_.uniform_int(cfg_.grid * cfg_.grid);
      if (used[cell]) continue;
      used[cell] = true;
      r = cell / cfg_.grid;
      c = cell % cfg_.grid;
      return;
    }
  };
  for (int i = 0; i < cfg_.n_predators; ++i) place(pred_r_[i], pred_c_[i]);
  for (int j = 0; j < cfg_.n_prey; ++j) place(prey_r_[j], prey_c_[j]);

  t_ = 0;
  done_ = false;
  won_ = false;
  return snapshot(0.0, false);
}

StepResult PredatorPreyEnv::step(const std::vector<int>& joint_action) {
  if (done_) throw std::runtime_error("predator-prey: step() after episode end");
  require(static_cast<int>(joint_action.size()) == cfg_.n_predators,
          "predator-prey: need one action per predator");
  for (int a : joint_action)
    require(a >= 0 && a < kActions, "predator-prey: action out of range");

  for (int i = 0; i < cfg_.n_predators; ++i) {
    int a = joint_action[i];
    if (a < 5) {
      pred_r_[i] = wrap(pred_r_[i] + kDRow[a]);
      pred_c_[i] = wrap(pred_c_[i] + kDCol[a]);
    }
  }

  double reward = 0.0;
  std::vector<bool> successful(cfg_.n_predators, false);
  for (int j = 0; j < cfg_.n_prey; ++j) {
    if (!prey_alive_[j]) continue;
    std::vector<int> attackers;
    for (int i = 0; i < cfg_.n_predators; ++i) {
      if (joint_action[i] != 5) continue;
      int dr = wrap(prey_r_[j] - pred_r_[i] + cfg_.grid / 2) - cfg_.grid / 2;
      int dc = wrap(prey_c_[j] - pred_c_[i] + cfg_.grid / 2) - cfg_.grid / 2;
      if (std::abs(dr) + std::abs(dc) <= 1) attackers.push_back(i);
    }
    if (attackers.size() >= 2) {
      prey_alive_[j] = false;
      reward += cfg_.reward_capture;
      for (int i : attackers) successful[i] = true;
    }
  }
  for (int i = 0; i < cfg_.n_predators; ++i)
    if (joint_action[i] == 5 && !successful[i]) reward -= cfg_.penalty_lone;

  if (cfg_.prey_moves) {
    for (int j = 0; j < cfg_.n_prey; ++j) {
      if (!prey_alive_[j]) continue;
      int a = rng_.uniform_int(5);
      prey_r_[j] = wrap(prey_r_[j] + kDRow[a]);
      prey_c_[j] = wrap(prey_c_[j] + kDCol[a]);
    }
  }

  bool all_captured = true;
  for (bool alive : prey_alive_)
    if (alive) all_captured = false;
  bool done = all_captured;
  if (all_captured) won_ = true;

  ++t_;
  if (t_ >= cfg_.horizon) done = true;
  done_ = done;
  return snapshot(reward, done);
}

}  // namespace emc
