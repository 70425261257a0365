#include "emc/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

namespace emc {

namespace fs = std::filesystem;

EvalResult evaluate(std::vector<AgentNet>& nets, Env& env, int n_episodes, uint64_t seed_base) {
  const EnvSpec spec = env.spec();
  int wins = 0;
  double return_sum = 0.0;
  for (int e = 0; e < n_episodes; ++e) {
    StepResult sr = env.reset(seed_base + static_cast<uint64_t>(e));
    std::vector<Tensor2> hidden(spec.n_agents, Tensor2(1, nets[0].hidden_size()));
    double ep_return = 0.0;
    while (!sr.done) {
      std::vector<int> joint(spec.n_agents);
      for (int i = 0; i < spec.n_agents; ++i) {
        Tensor2 x(1, spec.obs_width);
        x.data = sr.obs[i];
        Tensor2 q = nets[i].step(x, hidden[i]);
        joint[i] = argmax_lowest(q.data);
      }
      sr = env.step(joint);
      ep_return += sr.reward;
    }
    if (env.episode_won()) ++wins;
    return_sum += ep_return;
  }
  return {static_cast<double>(wins) / n_episodes, return_sum / n_episodes};
}

Run::Run(const ExperimentConfig& cfg, uint64_t seed, const std::string& out_dir)
    : cfg_(cfg), seed_(seed), dir_(out_dir), action_rng_(seed, 0xac710aULL),
      sample_rng_(seed, 0x5a3b1eULL) {
  cfg_.validate();
  env_ = cfg_.make_env();
  eval_env_ = cfg_.make_env();
  spec_ = env_->spec();

  Rng init_rng(seed, 0x1a171ULL);
  learner_ = std::make_unique<Learner>(cfg_.learner_config(), spec_, init_rng);
  curiosity_ = std::make_unique<CuriosityModule>(cfg_.curiosity_config(), spec_.n_agents,
                                                 spec_.obs_width, spec_.state_width,
                                                 spec_.n_actions, init_rng);
  proj_ = std::make_unique<ProjectionMatrix>(
      ProjectionMatrix::make(cfg_.mem_latent_dim, spec_.state_width, seed));
  memory_ = std::make_unique<MemoryTable>(cfg_.mem_latent_dim, cfg_.mem_delta, cfg_.gamma,
                                          static_cast<size_t>(cfg_.mem_capacity));
  buffer_ = std::make_unique<ReplayBuffer>(static_cast<size_t>(cfg_.buffer_capacity));

  if (env_->grid_shape(grid_rows_, grid_cols_)) {
    window_visits_.assign(static_cast<size_t>(grid_rows_) * grid_cols_, 0);
    window_rint_.assign(static_cast<size_t>(grid_rows_) * grid_cols_, 0.0);
  }

  if (!dir_.empty()) {
    fs::create_directories(dir_);
    std::ofstream cfg_out(dir_ + "/config.txt");
    cfg_out << cfg_.serialize();
    metrics_ = std::fopen((dir_ + "/metrics.csv").c_str(), "w");
    if (!metrics_) throw std::runtime_error("run: cannot open metrics.csv in " + dir_);
    std::fprintf(metrics_,
                 "step,win_rate,mean_return,loss_inference,loss_memory,loss_predictor,"
                 "mean_r_int,eta,epsilon\n");
    if (cfg_.trace_dump) {
      trace_ = std::fopen((dir_ + "/trace.csv").c_str(), "w");
      if (!trace_) throw std::runtime_error("run: cannot open trace.csv in " + dir_);
      std::fprintf(trace_, "episode,t");
      for (int c = 0; c < spec_.state_width; ++c) std::fprintf(trace_, ",s%d", c);
      for (int i = 0; i < spec_.n_agents; ++i) std::fprintf(trace_, ",a%d", i);
      std::fprintf(trace_, ",reward\n");
    }
  }
}

Run::~Run() {
  if (metrics_) std::fclose(metrics_);
  if (trace_) std::fclose(trace_);
}

void Run::do_eval(long long nominal_step) {
  EvalResult r = evaluate(learner_->nets(), *eval_env_, cfg_.eval_episodes,
                          seed_ * 1000003ULL + 0xe7a1ULL * static_cast<uint64_t>(evals_done_));
  EvalPoint p;
  p.step = nominal_step;
  p.win_rate = r.win_rate;
  p.mean_return = r.mean_return;
  if (acc_trains_ > 0) {
    p.loss_inference = acc_loss_inf_ / acc_trains_;
    p.loss_memory = acc_loss_mem_ / acc_trains_;
    p.loss_predictor = acc_loss_pred_ / acc_trains_;
    p.mean_r_int = acc_r_int_ / acc_trains_;
  }
  p.eta = curiosity_->eta(env_steps_);
  p.epsilon = epsilon_at(env_steps_, cfg_.eps_start, cfg_.eps_end, cfg_.eps_anneal);
  curve_.push_back(p);
  ++evals_done_;
  acc_loss_inf_ = acc_loss_mem_ = acc_loss_pred_ = acc_r_int_ = 0.0;
  acc_trains_ = 0;

  if (metrics_) {
    std::fprintf(metrics_, "%lld,%.6f,%.6f,%.9g,%.9g,%.9g,%.9g,%.9g,%.6f\n", p.step, p.win_rate,
                 p.mean_return, p.loss_inference, p.loss_memory, p.loss_predictor, p.mean_r_int,
                 p.eta, p.epsilon);
    std::fflush(metrics_);
    write_heatmaps(nominal_step);
    save_checkpoint(false);
  }
  window_start_ = env_steps_;
}

void Run::record_episode_artifacts(const EpisodeRecord& ep) {
  if (trace_) {
    for (int t = 0; t < ep.length(); ++t) {
      std::fprintf(trace_, "%lld,%d", episodes_, t);
      for (double v : ep.state[t + 1]) std::fprintf(trace_, ",%.17g", v);
      for (int a : ep.actions[t]) std::fprintf(trace_, ",%d", a);
      std::fprintf(trace_, ",%.17g\n", ep.reward_ext[t]);
    }
  }
  if (grid_rows_ > 0) {
    // visitation and intrinsic attribution on the pre-transition state
    for (int t = 0; t < ep.length(); ++t) {
      const auto& s = ep.state[t];
      for (int i = 0; i < spec_.n_agents; ++i) {
        int col = static_cast<int>(std::lround(s[2 * i] * (grid_cols_ - 1)));
        int row = static_cast<int>(std::lround(s[2 * i + 1] * (grid_rows_ - 1)));
        size_t cell = static_cast<size_t>(row) * grid_cols_ + col;
        window_visits_[cell] += 1;
        window_rint_[cell] += ep.reward_int[t];
      }
    }
  }
}

void Run::write_heatmaps(long long nominal_step) {
  if (grid_rows_ == 0 || dir_.empty()) return;
  auto write_grid = [&](const std::string& name, auto value_at) {
    std::ofstream out(dir_ + "/" + name);
    out << "# rows=" << grid_rows_ << " cols=" << grid_cols_ << " from=" << window_start_
        << " to=" << env_steps_ << "\n";
    for (int r = 0; r < grid_rows_; ++r) {
      for (int c = 0; c < grid_cols_; ++c) {
        if (c) out << " ";
        out << value_at(static_cast<size_t>(r) * grid_cols_ + c);
      }
      out << "\n";
    }
  };
  write_grid("heatmap_visit_" + std::to_string(nominal_step) + ".txt",
             [&](size_t i) { return window_visits_[i]; });
  write_grid("heatmap_rint_" + std::to_string(nominal_step) + ".txt", [&](size_t i) {
    return window_visits_[i] > 0 ? window_rint_[i] / window_visits_[i] : 0.0;
  });
  std::fill(window_visits_.begin(), window_visits_.end(), 0);
  std::fill(window_rint_.begin(), window_rint_.end(), 0.0);
}

void Run::save_checkpoint(bool include_curiosity) {
  if (dir_.empty()) return;
  std::vector<ParamGrad> ps = learner_->online_params();
  if (include_curiosity)
    for (auto& p : curiosity_->all_params()) ps.push_back(p);
  save_params(dir_ + "/params.bin", dir_ + "/manifest.txt", ps);
}

bool Run::advance_to(long long target_steps) {
  const long long target = std::min(target_steps, cfg_.total_steps);
  while (env_steps_ < target) {
    while (next_eval_ <= env_steps_) {
      do_eval(next_eval_);
      next_eval_ += cfg_.eval_interval;
    }

    double eps = epsilon_at(env_steps_, cfg_.eps_start, cfg_.eps_end, cfg_.eps_anneal);
    EpisodeRecord ep = learner_->collect_episode(
        *env_, seed_ * 2654435761ULL + static_cast<uint64_t>(episodes_), eps, curiosity_.get(),
        action_rng_);
    const long long ep_len = ep.length();
    env_steps_ += ep_len;
    ++episodes_;

    record_episode_artifacts(ep);
    if (cfg_.lambda > 0.0) {
      std::vector<std::vector<double>> keys(ep.length());
      for (int t = 0; t < ep.length(); ++t) keys[t] = proj_->project(ep.state[t]);
      memory_->update_from_episode(keys, ep.reward_ext);
    }
    buffer_->push(std::move(ep));

    long long due = 0;
    if (cfg_.train_interval == 0) {
      due = 1;
    } else {
      pending_train_ += ep_len;
      while (pending_train_ >= cfg_.train_interval) {
        pending_train_ -= cfg_.train_interval;
        ++due;
      }
    }
    for (long long k = 0; k < due; ++k) {
      if (buffer_->size() < static_cast<size_t>(cfg_.batch_size)) break;
      TrainMetrics m = learner_->train_step(*buffer_, *curiosity_, memory_.get(), proj_.get(),
                                            curiosity_->eta(env_steps_), sample_rng_);
      acc_loss_inf_ += m.loss_inference;
      acc_loss_mem_ += m.loss_memory;
      acc_loss_pred_ += m.loss_pred;
      acc_r_int_ += m.mean_r_int;
      ++acc_trains_;
    }
  }
  if (finished() && !finalized_) finalize();
  return !finished();
}

void Run::run_all() { advance_to(cfg_.total_steps); }

void Run::finalize() {
  if (finalized_) return;
  finalized_ = true;
  while (next_eval_ <= env_steps_ && next_eval_ <= cfg_.total_steps) {
    do_eval(next_eval_);
    next_eval_ += cfg_.eval_interval;
  }
  if (!dir_.empty()) {
    save_checkpoint(true);
    memory_->save_csv(dir_ + "/memory.csv");
  }
}

int run_experiment(const ExperimentConfig& cfg, std::optional<uint64_t> seed_override,
                   const std::string& out_dir_override) {
  std::vector<uint64_t> seeds = seed_override ? std::vector<uint64_t>{*seed_override}
                                              : cfg.seed_list();
  std::string base = out_dir_override.empty() ? cfg.out_dir : out_dir_override;
  for (uint64_t seed : seeds) {
    Run run(cfg, seed, base + "/seed" + std::to_string(seed));
    run.run_all();
    run.finalize();
    std::printf("seed %llu done: %lld env steps, final win rate %.3f\n",
                static_cast<unsigned long long>(seed), run.steps(),
                run.curve().empty() ? 0.0 : run.curve().back().win_rate);
  }
  return 0;
}

double percentile(std::vector<double> values, double p) {
  require(!values.empty(), "percentile: empty input");
  std::sort(values.begin(), values.end());
  if (values.size() == 1) return values[0];
  double pos = (static_cast<double>(values.size()) - 1.0) * p / 100.0;
  size_t lo = static_cast<size_t>(std::floor(pos));
  size_t hi = std::min(lo + 1, values.size() - 1);
  double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

std::vector<AggregateRow> aggregate_metric_files(const std::vector<std::string>& files) {
  require(!files.empty(), "aggregate: no metric files");
  std::map<long long, std::vector<std::pair<double, double>>> by_step;  // win, return
  for (const auto& path : files) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("aggregate: cannot open " + path);
    std::string line;
    std::getline(in, line);  // header
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      std::stringstream ss(line);
      std::string field;
      std::vector<std::string> fields;
      while (std::getline(ss, field, ',')) fields.push_back(field);
      if (fields.size() < 3) continue;
      long long step = std::stoll(fields[0]);
      by_step[step].push_back({std::stod(fields[1]), std::stod(fields[2])});
    }
  }
  std::vector<AggregateRow> rows;
  for (auto& [step, vals] : by_step) {
    AggregateRow r;
    r.step = step;
    r.n = static_cast<int>(vals.size());
    std::vector<double> wins, rets;
    for (auto& [w, ret] : vals) {
      wins.push_back(w);
      rets.push_back(ret);
    }
    r.win_median = percentile(wins, 50.0);
    r.win_q25 = percentile(wins, 25.0);
    r.win_q75 = percentile(wins, 75.0);
    r.return_median = percentile(rets, 50.0);
    rows.push_back(r);
  }
  return rows;
}

int aggregate_cli(const std::string& runs_dir, const std::string& out_file) {
  std::vector<std::string> files;
  for (const auto& entry : fs::recursive_directory_iterator(runs_dir))
    if (entry.is_regular_file() && entry.path().filename() == "metrics.csv")
      files.push_back(entry.path().string());
  std::sort(files.begin(), files.end());
  if (files.empty()) {
    std::fprintf(stderr, "aggregate: no metrics.csv found under %s\n", runs_dir.c_str());
    return 1;
  }
  auto rows = aggregate_metric_files(files);
  std::string out = out_file.empty() ? runs_dir + "/aggregate.csv" : out_file;
  FILE* f = std::fopen(out.c_str(), "w");
  if (!f) {
    std::fprintf(stderr, "aggregate: cannot open %s\n", out.c_str());
    return 1;
  }
  std::fprintf(f, "step,n,win_median,win_q25,win_q75,return_median\n");
  for (const auto& r : rows)
    std::fprintf(f, "%lld,%d,%.6f,%.6f,%.6f,%.6f\n", r.step, r.n, r.win_median, r.win_q25,
                 r.win_q75, r.return_median);
  std::fclose(f);
  std::printf("aggregated %zu runs into %s\n", files.size(), out.c_str());
  return 0;
}

int heatmap_cli(const std::string& run_dir, long long window_step) {
  bool any = false;
  for (const char* kind : {"visit", "rint"}) {
    std::string path =
        run_dir + "/heatmap_" + kind + "_" + std::to_string(window_step) + ".txt";
    std::ifstream in(path);
    if (!in) continue;
    any = true;
    std::printf("== %s ==\n", path.c_str());
    std::string line;
    while (std::getline(in, line)) std::printf("%s\n", line.c_str());
  }
  if (!any) {
    std::fprintf(stderr, "heatmap: no grids for window %lld in %s (gridworld runs only)\n",
                 window_step, run_dir.c_str());
    return 1;
  }
  return 0;
}

void save_params(const std::string& bin_path, const std::string& manifest_path,
                 const std::vector<ParamGrad>& params) {
  FILE* bin = std::fopen(bin_path.c_str(), "wb");
  if (!bin) throw std::runtime_error("checkpoint: cannot open " + bin_path);
  std::ofstream man(manifest_path);
  size_t offset = 0;
  for (const auto& p : params) {
    std::fwrite(p.p->data.data(), sizeof(double), p.p->data.size(), bin);
    man << p.name << " " << p.p->rows << " " << p.p->cols << " " << offset << "\n";
    offset += p.p->data.size();
  }
  std::fclose(bin);
}

}  // namespace emc
