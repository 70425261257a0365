#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "emc/harness.hpp"

using namespace emc;
namespace fs = std::filesystem;

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// A hand-built net walking its agent down to the goal row and then along it
// to the goal column, staying put on the goal. The GRU is wired as a
// pass-through (update gate biased hard off, small new-gate weights).
AgentNet scripted_goal_policy(double goal_col_norm) {
  Rng rng(1);
  AgentNet net = AgentNet::make(5, 8, 5, rng);
  for (auto& pg : net.params()) pg.p->zero();

  // encoder features: e0 = relu(0.8 - y), e1 = relu(x) = x
  net.enc.w(0, 1) = -1.0;
  net.enc.b(0, 0) = 0.8;
  net.enc.w(1, 0) = 1.0;

  const int H = 8;
  net.gru.wi(2 * H + 0, 0) = 0.1;  // new-gate passes e0, e1 (scaled down)
  net.gru.wi(2 * H + 1, 1) = 0.1;
  for (int j = 0; j < H; ++j) net.gru.bi(0, H + j) = -40.0;  // update gate off

  // head: up, down, left, right, stay
  net.head.b(0, 0) = -1.0;
  net.head.w(1, 0) = 100.0;  // ~ 10 * (0.8 - y)
  net.head.w(2, 1) = 10.0;   // ~ x
  net.head.b(0, 2) = -goal_col_norm;
  net.head.w(3, 1) = -10.0;
  net.head.b(0, 3) = goal_col_norm;
  net.head.b(0, 4) = 0.01;
  return net;
}

ExperimentConfig tiny_run_config() {
  ExperimentConfig cfg;
  cfg.env = "gridworld";
  cfg.grid_penalty = 2.0;
  cfg.hidden = 8;
  cfg.batch_size = 4;
  cfg.buffer_capacity = 64;
  cfg.total_steps = 1500;
  cfg.eval_interval = 500;
  cfg.eval_episodes = 4;
  cfg.eps_anneal = 600;
  cfg.curiosity = "emc";
  cfg.lambda = 0.1;
  return cfg;
}

}  // namespace

TEST_CASE("a scripted goal-walking policy wins every evaluation episode") {
  std::vector<AgentNet> nets;
  nets.push_back(scripted_goal_policy(5.0 / 11.0));
  nets.push_back(scripted_goal_policy(7.0 / 11.0));
  GridworldConfig gcfg;
  gcfg.penalty = 2.0;
  GridworldEnv env(gcfg);
  EvalResult r = evaluate(nets, env, 32, 99);
  CHECK(r.win_rate == 1.0);
  CHECK(r.mean_return > 0.0);
}

TEST_CASE("win rate is a multiple of 1/32 and evaluation is repeatable") {
  Rng rng(7);
  std::vector<AgentNet> nets;
  for (int i = 0; i < 2; ++i) nets.push_back(AgentNet::make(5, 8, 5, rng));
  GridworldConfig gcfg;
  GridworldEnv env(gcfg);
  EvalResult a = evaluate(nets, env, 32, 5);
  EvalResult b = evaluate(nets, env, 32, 5);
  CHECK(a.win_rate == b.win_rate);
  CHECK(a.mean_return == b.mean_return);
  double scaled = a.win_rate * 32.0;
  CHECK(scaled == doctest::Approx(std::round(scaled)));
}

TEST_CASE("random behaviour practically never wins at p=2") {
  GridworldConfig gcfg;
  gcfg.penalty = 2.0;
  GridworldEnv env(gcfg);
  LearnerConfig lc;
  lc.hidden = 8;
  Rng rng(11);
  Learner learner(lc, env.spec(), rng);
  Rng act_rng(13);
  int wins = 0;
  for (int e = 0; e < 32; ++e) {
    learner.collect_episode(env, 1000 + e, 1.0, nullptr, act_rng);
    if (env.episode_won()) ++wins;
  }
  CHECK(wins <= 1);  // <= 0.05 win rate over 32 uniform-random episodes
}

TEST_CASE("percentiles use linear interpolation") {
  CHECK(percentile({0.2, 0.5, 0.8}, 50.0) == doctest::Approx(0.5));
  CHECK(percentile({0.7}, 25.0) == doctest::Approx(0.7));
  CHECK(percentile({0.7}, 75.0) == doctest::Approx(0.7));
  std::vector<double> five = {0.1, 0.2, 0.3, 0.4, 0.5};
  CHECK(percentile(five, 25.0) == doctest::Approx(0.2));
  CHECK(percentile(five, 75.0) == doctest::Approx(0.4));
}

TEST_CASE("config round-trips losslessly and rejects bad keys") {
  ExperimentConfig cfg = tiny_run_config();
  cfg.lambda = 0.017;
  cfg.eta0 = 1.25e-3;
  std::string text = cfg.serialize();
  std::vector<std::string> lines;
  std::stringstream ss(text);
  std::string line;
  while (std::getline(ss, line)) lines.push_back(line);
  ExperimentConfig back = ExperimentConfig::from_lines(lines);
  CHECK(back.serialize() == text);

  CHECK_THROWS_WITH_AS(back.set("not_a_field", "1"),
                       "config: unknown key 'not_a_field'", std::invalid_argument);
  CHECK_THROWS_AS(ExperimentConfig::from_lines({"lambda=-1"}), std::invalid_argument);
  CHECK_THROWS_AS(ExperimentConfig::from_lines({"curiosity=icm"}), std::invalid_argument);
}

TEST_CASE("environment variables override config keys") {
  setenv("EMC_LAMBDA", "0.25", 1);
  setenv("EMC_CURIOSITY", "td", 1);
  auto cfg = ExperimentConfig::from_lines({"lambda=0.1", "curiosity=emc"});
  unsetenv("EMC_LAMBDA");
  unsetenv("EMC_CURIOSITY");
  CHECK(cfg.lambda == 0.25);
  CHECK(cfg.curiosity == "td");
}

TEST_CASE("aggregate is permutation-invariant and medians are right") {
  std::string dir = "/tmp/emc_agg_test";
  fs::remove_all(dir);
  fs::create_directories(dir + "/a");
  fs::create_directories(dir + "/b");
  fs::create_directories(dir + "/c");
  auto write = [&](const std::string& sub, double w) {
    std::ofstream out(dir + "/" + sub + "/metrics.csv");
    out << "step,win_rate,mean_return,loss_inference,loss_memory,loss_predictor,mean_r_int,eta,"
           "epsilon\n";
    out << "0," << w << "," << w * 10 << ",0,0,0,0,0.05,1\n";
  };
  write("a", 0.2);
  write("b", 0.5);
  write("c", 0.8);

  std::vector<std::string> files = {dir + "/a/metrics.csv", dir + "/b/metrics.csv",
                                    dir + "/c/metrics.csv"};
  auto rows = aggregate_metric_files(files);
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].win_median == doctest::Approx(0.5));
  CHECK(rows[0].n == 3);

  std::swap(files[0], files[2]);
  auto rows2 = aggregate_metric_files(files);
  CHECK(rows2[0].win_median == rows[0].win_median);
  CHECK(rows2[0].win_q25 == rows[0].win_q25);
  CHECK(rows2[0].win_q75 == rows[0].win_q75);

  CHECK(aggregate_cli(dir, "") == 0);
  CHECK(fs::exists(dir + "/aggregate.csv"));
  fs::remove_all(dir);
}

TEST_CASE("a short run writes a stable metrics schema, heatmaps, and checkpoints") {
  std::string dir = "/tmp/emc_run_test";
  fs::remove_all(dir);
  ExperimentConfig cfg = tiny_run_config();
  cfg.trace_dump = true;

  Run run(cfg, 3, dir + "/seed3");
  run.run_all();
  run.finalize();

  std::string metrics = read_file(dir + "/seed3/metrics.csv");
  CHECK(metrics.rfind("step,win_rate,mean_return,loss_inference,loss_memory,loss_predictor,"
                      "mean_r_int,eta,epsilon\n", 0) == 0);
  // one row per eval point: steps 0, 500, 1000, 1500
  int lines = 0;
  for (char c : metrics)
    if (c == '\n') ++lines;
  CHECK(lines == 5);
  CHECK(fs::exists(dir + "/seed3/params.bin"));
  CHECK(fs::exists(dir + "/seed3/manifest.txt"));
  CHECK(fs::exists(dir + "/seed3/memory.csv"));
  CHECK(fs::exists(dir + "/seed3/config.txt"));
  CHECK(fs::exists(dir + "/seed3/trace.csv"));

  // visitation grids: header carries the window, cells sum to agent-steps,
  // wall column is never visited
  long long sum_all = 0, span_all = 0;
  for (long long w : {0LL, 500LL, 1000LL, 1500LL}) {
    std::string path = dir + "/seed3/heatmap_visit_" + std::to_string(w) + ".txt";
    REQUIRE(fs::exists(path));
    std::ifstream in(path);
    std::string header;
    std::getline(in, header);
    long long from = 0, to = 0;
    REQUIRE(std::sscanf(header.c_str(), "# rows=11 cols=12 from=%lld to=%lld", &from, &to) == 2);
    long long cell_sum = 0;
    for (int r = 0; r < 11; ++r)
      for (int c = 0; c < 12; ++c) {
        long long v;
        in >> v;
        if (c == 6) CHECK(v == 0);  // wall column
        cell_sum += v;
      }
    CHECK(cell_sum == 2 * (to - from));
    sum_all += cell_sum;
    span_all += to - from;
  }
  CHECK(sum_all == 2 * span_all);
  CHECK(heatmap_cli(dir + "/seed3", 500) == 0);
  CHECK(heatmap_cli(dir + "/seed3", 123456) == 1);

  // the step-0 grid is all zeros (nothing recorded yet)
  std::ifstream z(dir + "/seed3/heatmap_visit_0.txt");
  std::string header;
  std::getline(z, header);
  long long v, zsum = 0;
  while (z >> v) zsum += v;
  CHECK(zsum == 0);
  fs::remove_all(dir);
}

TEST_CASE("identical config and seed give byte-identical metrics") {
  ExperimentConfig cfg = tiny_run_config();
  std::string d1 = "/tmp/emc_det1", d2 = "/tmp/emc_det2";
  fs::remove_all(d1);
  fs::remove_all(d2);
  {
    Run r1(cfg, 11, d1);
    r1.run_all();
    r1.finalize();
  }
  {
    Run r2(cfg, 11, d2);
    r2.run_all();
    r2.finalize();
  }
  CHECK(read_file(d1 + "/metrics.csv") == read_file(d2 + "/metrics.csv"));
  CHECK(read_file(d1 + "/memory.csv") == read_file(d2 + "/memory.csv"));
  CHECK(read_file(d1 + "/params.bin") == read_file(d2 + "/params.bin"));
  fs::remove_all(d1);
  fs::remove_all(d2);
}

TEST_CASE("plain value-decomposition training is the curiosity=none lambda=0 corner") {
  ExperimentConfig cfg = tiny_run_config();
  cfg.curiosity = "none";
  cfg.lambda = 0.0;
  cfg.total_steps = 600;
  Run run(cfg, 1, "");
  run.run_all();
  CHECK(run.curve().size() >= 1);
  for (const auto& p : run.curve()) {
    CHECK(p.mean_r_int == 0.0);
    CHECK(p.loss_memory == 0.0);
    CHECK(p.win_rate >= 0.0);
    CHECK(p.win_rate <= 1.0);
  }
}

TEST_CASE("the ablation lattice runs without code changes") {
  for (const char* kind : {"none", "emc", "td", "ind", "global-rnd", "local-rnd"}) {
    for (const char* mixer : {"linear-sum", "monotonic"}) {
      ExperimentConfig cfg = tiny_run_config();
      cfg.curiosity = kind;
      cfg.mixer = mixer;
      cfg.lambda = 0.01;
      cfg.total_steps = 200;
      cfg.eval_interval = 200;
      cfg.eval_episodes = 2;
      Run run(cfg, 2, "");
      run.run_all();
      CHECK(run.finished());
    }
  }
}
