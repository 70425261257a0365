#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "emc/env.hpp"
#include "emc/rng.hpp"

using namespace emc;

namespace {
constexpr int UP = 0, DOWN = 1, LEFT = 2, RIGHT = 3, STAY = 4, CAPTURE = 5;

// 13-step choreography landing both agents on their goals simultaneously
std::vector<std::vector<int>> winning_script() {
  std::vector<std::vector<int>> steps;
  for (int i = 0; i < 8; ++i) steps.push_back({DOWN, DOWN});
  steps.push_back({RIGHT, STAY});
  for (int i = 0; i < 4; ++i) steps.push_back({RIGHT, LEFT});
  return steps;
}
}  // namespace

TEST_CASE("reset is deterministic and clean") {
  GridworldConfig cfg;
  GridworldEnv env(cfg);
  StepResult a = env.reset(7);
  StepResult b = env.reset(7);
  CHECK(a.obs == b.obs);
  CHECK(a.state == b.state);
  CHECK_FALSE(a.done);
  CHECK(a.reward == 0.0);
}

TEST_CASE("simultaneous goal arrival pays +10 and ends the episode") {
  GridworldConfig cfg;
  cfg.penalty = 2.0;
  GridworldEnv env(cfg);
  env.reset(1);
  auto script = winning_script();
  StepResult sr;
  for (size_t t = 0; t < script.size(); ++t) {
    sr = env.step(script[t]);
    if (t + 1 < script.size()) {
      CHECK(sr.reward == 0.0);
      CHECK_FALSE(sr.done);
    }
  }
  CHECK(sr.reward == 10.0);
  CHECK(sr.done);
  CHECK(env.episode_won());
}

TEST_CASE("lone arrival is punished by -p each step") {
  GridworldConfig cfg;
  cfg.penalty = 2.0;
  GridworldEnv env(cfg);
  env.reset(1);
  // agent 1 walks to its goal while agent 0 stays home
  for (int i = 0; i < 8; ++i) env.step({STAY, DOWN});
  StepResult sr;
  for (int i = 0; i < 3; ++i) sr = env.step({STAY, LEFT});
  CHECK(sr.reward == 0.0);
  sr = env.step({STAY, LEFT});  // lands on (8,7)
  CHECK(sr.reward == -2.0);
  CHECK_FALSE(sr.done);
  sr = env.step({STAY, STAY});  // camping on the goal keeps costing p
  CHECK(sr.reward == -2.0);
}

TEST_CASE("deterministic motion without noise or slip") {
  GridworldConfig cfg;
  GridworldEnv env(cfg);
  StepResult sr = env.reset(3);
  double x0 = sr.obs[0][0], y0 = sr.obs[0][1];
  sr = env.step({DOWN, DOWN});
  CHECK(sr.reward == 0.0);
  CHECK(sr.obs[0][0] == x0);
  CHECK(sr.obs[0][1] == doctest::Approx(y0 + 1.0 / (cfg.height - 1)));
}

TEST_CASE("walls block movement") {
  GridworldConfig cfg;
  GridworldEnv env(cfg);
  env.reset(1);
  for (int i = 0; i < 8; ++i) env.step({DOWN, STAY});
  for (int i = 0; i < 5; ++i) env.step({RIGHT, STAY});
  auto cells = env.agent_cells();
  CHECK(cells[0] == std::pair<int, int>{8, 5});
  env.step({RIGHT, STAY});  // into the wall column
  cells = env.agent_cells();
  CHECK(cells[0] == std::pair<int, int>{8, 5});
  // and grid edges clamp
  GridworldEnv env2(cfg);
  env2.reset(1);
  auto sr = env2.step({UP, UP});
  CHECK(env2.agent_cells()[0] == std::pair<int, int>{0, 0});
  CHECK(sr.reward == 0.0);
}

TEST_CASE("visibility requires both agents inside the shaded region") {
  GridworldConfig cfg;
  GridworldEnv env(cfg);
  StepResult sr = env.reset(1);
  // far apart: sentinel encoding, fixed width
  CHECK(sr.obs[0].size() == 5);
  CHECK(sr.obs[0][2] == -1.0);
  CHECK(sr.obs[0][3] == -1.0);
  CHECK(sr.obs[0][4] == 0.0);

  // walk both into the shaded region (rows >= 6, cols 3..8)
  for (int i = 0; i < 8; ++i) sr = env.step({DOWN, DOWN});
  for (int i = 0; i < 2; ++i) sr = env.step({RIGHT, LEFT});
  auto cells = env.agent_cells();
  CHECK_FALSE(env.in_shaded(cells[0].first, cells[0].second));  // col 2 is one move short
  CHECK_FALSE(env.in_shaded(cells[1].first, cells[1].second));  // col 9 is one move short
  CHECK(sr.obs[0][4] == 0.0);
  sr = env.step({RIGHT, LEFT});
  cells = env.agent_cells();
  CHECK(env.in_shaded(cells[1].first, cells[1].second));
  CHECK(sr.obs[0][4] == 1.0);
  CHECK(sr.obs[1][4] == 1.0);
  CHECK(sr.obs[0][2] == doctest::Approx(cells[1].second / 11.0));
  CHECK(sr.obs[0][3] == doctest::Approx(cells[1].first / 10.0));
  CHECK(sr.obs[0].size() == 5);
}

TEST_CASE("visibility is symmetric along random rollouts") {
  GridworldConfig cfg;
  GridworldEnv env(cfg);
  Rng rng(99);
  StepResult sr = env.reset(5);
  while (!sr.done) {
    sr = env.step({rng.uniform_int(5), rng.uniform_int(5)});
    CHECK(sr.obs[0][4] == sr.obs[1][4]);
  }
}

TEST_CASE("faults: bad actions and stepping after done") {
  GridworldConfig cfg;
  GridworldEnv env(cfg);
  env.reset(1);
  CHECK_THROWS_AS(env.step({5, 0}), std::invalid_argument);
  for (int i = 0; i < cfg.horizon; ++i) env.step({STAY, STAY});
  CHECK_THROWS_AS(env.step({STAY, STAY}), std::runtime_error);
}

TEST_CASE("horizon truncation emits done exactly once") {
  GridworldConfig cfg;
  GridworldEnv env(cfg);
  env.reset(1);
  int dones = 0;
  for (int i = 0; i < cfg.horizon; ++i) {
    StepResult sr = env.step({STAY, STAY});
    if (sr.done) ++dones;
  }
  CHECK(dones == 1);
  CHECK_FALSE(env.episode_won());
}

TEST_CASE("per-step rewards stay in {10, -p, 0} when sigma = xi = 0") {
  GridworldConfig cfg;
  cfg.penalty = 1.5;
  GridworldEnv env(cfg);
  Rng rng(123);
  for (uint64_t seed = 0; seed < 5; ++seed) {
    StepResult sr = env.reset(seed);
    while (!sr.done) {
      sr = env.step({rng.uniform_int(5), rng.uniform_int(5)});
      bool ok = sr.reward == 10.0 || sr.reward == -1.5 || sr.reward == 0.0;
      CHECK(ok);
    }
  }
}

TEST_CASE("slip probability randomizes executed actions") {
  GridworldConfig cfg;
  cfg.slip_prob = 1.0;
  GridworldEnv env(cfg);
  env.reset(17);
  bool moved = false;
  for (int i = 0; i < 50 && !moved; ++i) {
    env.step({STAY, STAY});
    auto cells = env.agent_cells();
    moved = cells[0] != std::pair<int, int>{0, 0} || cells[1] != std::pair<int, int>{0, 11};
  }
  CHECK(moved);
}

TEST_CASE("noise applies only inside the noisy band") {
  GridworldConfig cfg;
  cfg.noise_sigma = 0.25;
  GridworldEnv env(cfg);
  env.reset(2);
  StepResult sr = env.step({DOWN, STAY});
  CHECK(sr.reward == 0.0);  // (1,0) is outside the band
  // move agent 0 to the noisy band at (4,3)
  for (int i = 0; i < 3; ++i) sr = env.step({DOWN, STAY});
  for (int i = 0; i < 3; ++i) sr = env.step({RIGHT, STAY});
  auto cells = env.agent_cells();
  CHECK(env.in_noisy(cells[0].first, cells[0].second));
  bool saw_noise = sr.reward != 0.0;
  for (int i = 0; i < 20 && !saw_noise; ++i) {
    sr = env.step({STAY, STAY});
    saw_noise = sr.reward != 0.0;
  }
  CHECK(saw_noise);
}

TEST_CASE("replaying a stored action sequence reproduces rewards bit-exactly") {
  GridworldConfig cfg;
  cfg.noise_sigma = 0.1;
  cfg.slip_prob = 0.2;
  GridworldEnv env(cfg);
  Rng rng(31);

  std::vector<std::vector<int>> actions;
  std::vector<double> rewards;
  StepResult sr = env.reset(77);
  while (!sr.done) {
    std::vector<int> a = {rng.uniform_int(5), rng.uniform_int(5)};
    sr = env.step(a);
    actions.push_back(a);
    rewards.push_back(sr.reward);
  }

  GridworldEnv replay(cfg);
  sr = replay.reset(77);
  for (size_t t = 0; t < actions.size(); ++t) {
    sr = replay.step(actions[t]);
    CHECK(sr.reward == rewards[t]);
  }
}

TEST_CASE("gridworld spec constants") {
  GridworldConfig cfg;
  GridworldEnv env(cfg);
  EnvSpec s = env.spec();
  CHECK(s.n_agents == 2);
  CHECK(s.n_actions == 5);
  CHECK(s.obs_width == 5);
  CHECK(s.state_width == 4);
}

namespace {
// decode torus positions out of the normalized global state
struct PpPositions {
  std::vector<std::pair<int, int>> pred, prey;  // (row, col)
  std::vector<bool> alive;
};

PpPositions decode(const std::vector<double>& state, const PredatorPreyConfig& cfg) {
  PpPositions p;
  int idx = 0;
  for (int i = 0; i < cfg.n_predators; ++i) {
    int c = static_cast<int>(std::lround(state[idx++] * cfg.grid));
    int r = static_cast<int>(std::lround(state[idx++] * cfg.grid));
    p.pred.push_back({r, c});
  }
  for (int j = 0; j < cfg.n_prey; ++j) {
    int c = static_cast<int>(std::lround(state[idx++] * cfg.grid));
    int r = static_cast<int>(std::lround(state[idx++] * cfg.grid));
    p.prey.push_back({r, c});
  }
  for (int j = 0; j < cfg.n_prey; ++j) p.alive.push_back(state[idx++] != 0.0);
  return p;
}

int toward(int from, int to, int grid) {
  int d = ((to - from) % grid + grid + grid / 2) % grid - grid / 2;
  return d == 0 ? 0 : (d > 0 ? 1 : -1);
}

// one pursuit step for a predator: close Manhattan distance to the prey
int pursuit_action(std::pair<int, int> pred, std::pair<int, int> prey, int grid) {
  int dr = toward(pred.first, prey.first, grid);
  if (dr == 1) return DOWN;
  if (dr == -1) return UP;
  int dc = toward(pred.second, prey.second, grid);
  if (dc == 1) return RIGHT;
  if (dc == -1) return LEFT;
  return STAY;
}

int torus_manhattan(std::pair<int, int> a, std::pair<int, int> b, int grid) {
  auto dist1 = [&](int x, int y) {
    int d = std::abs(x - y);
    return std::min(d, grid - d);
  };
  return dist1(a.first, b.first) + dist1(a.second, b.second);
}
}  // namespace

TEST_CASE("predator-prey capture, lone penalty, and idle rewards") {
  PredatorPreyConfig cfg;
  cfg.n_predators = 2;
  cfg.n_prey = 1;
  cfg.grid = 6;
  cfg.horizon = 200;
  PredatorPreyEnv env(cfg);
  StepResult sr = env.reset(11);

  // no capture actions -> zero reward
  sr = env.step({STAY, STAY});
  CHECK(sr.reward == 0.0);

  // chase until both predators are adjacent to the prey
  for (int guard = 0; guard < 100; ++guard) {
    auto p = decode(sr.state, cfg);
    int d0 = torus_manhattan(p.pred[0], p.prey[0], cfg.grid);
    int d1 = torus_manhattan(p.pred[1], p.prey[0], cfg.grid);
    if (d0 <= 1 && d1 <= 1) break;
    std::vector<int> acts(2);
    acts[0] = d0 <= 1 ? STAY : pursuit_action(p.pred[0], p.prey[0], cfg.grid);
    acts[1] = d1 <= 1 ? STAY : pursuit_action(p.pred[1], p.prey[0], cfg.grid);
    sr = env.step(acts);
  }
  auto p = decode(sr.state, cfg);
  REQUIRE(torus_manhattan(p.pred[0], p.prey[0], cfg.grid) <= 1);
  REQUIRE(torus_manhattan(p.pred[1], p.prey[0], cfg.grid) <= 1);

  // lone capture attempt -> penalty
  sr = env.step({CAPTURE, STAY});
  CHECK(sr.reward == -cfg.penalty_lone);
  CHECK(decode(sr.state, cfg).alive[0]);

  // coordinated capture -> team reward, prey gone, episode won
  sr = env.step({CAPTURE, CAPTURE});
  CHECK(sr.reward == cfg.reward_capture);
  CHECK_FALSE(decode(sr.state, cfg).alive[0]);
  CHECK(sr.done);
  CHECK(env.episode_won());
}

TEST_CASE("predator-prey reset determinism and spec") {
  PredatorPreyConfig cfg;
  PredatorPreyEnv env(cfg);
  StepResult a = env.reset(4);
  StepResult b = env.reset(4);
  CHECK(a.state == b.state);
  CHECK(a.obs == b.obs);
  EnvSpec s = env.spec();
  CHECK(s.n_agents == 4);
  CHECK(s.n_actions == 6);
  CHECK(s.obs_width == 2 + 3 * 5);
  CHECK(s.state_width == 14);
}
