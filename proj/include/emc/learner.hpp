#pragma once

#include <memory>
#include <optional>
#include <vector>

#include "emc/curiosity.hpp"
#include "emc/env.hpp"
#include "emc/episode.hpp"
#include "emc/episodic_memory.hpp"
#include "emc/factorization.hpp"
#include "emc/nn.hpp"

namespace emc {

// Ring of complete episodes with uniform sampling.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(size_t capacity);

  void push(EpisodeRecord ep);
  size_t size() const { return store_.size(); }
  size_t capacity() const { return capacity_; }
  const EpisodeRecord& at(size_t i) const { return store_[i]; }
  std::vector<const EpisodeRecord*> sample(int n, Rng& rng) const;

 private:
  size_t capacity_;
  size_t next_ = 0;
  std::vector<EpisodeRecord> store_;
};

// Linear anneal from eps_start to eps_end over anneal_steps, constant after.
double epsilon_at(long long env_steps, double eps_start, double eps_end, long long anneal_steps);

// One-step target of the inference module; terminal steps drop the bootstrap.
double td_target(double r_ext, double scaled_r_int, double gamma, double target_max_next,
                 bool terminal);

struct LearnerConfig {
  MixerKind mixer = MixerKind::LinearSum;
  double gamma = 0.99;
  double lambda = 0.1;  // episodic-memory loss weight
  double lr = 5e-4;
  int hidden = 64;
  int mixer_hidden = 32;
  int batch_size = 32;
  int target_interval = 200;  // learner steps between hard target refreshes
  double eps_start = 1.0, eps_end = 0.05;
  long long eps_anneal_steps = 50000;
  bool recompute_intrinsic = false;  // recompute r_int at replay instead of using stored values
};

struct TrainMetrics {
  double loss_inference = 0.0;
  double loss_memory = 0.0;
  double loss_ext = 0.0;
  double loss_pred = 0.0;
  double mean_r_int = 0.0;  // raw intrinsic mean over the batch
  double grad_norm = 0.0;
};

// The inference module: per-agent recurrent Q-networks, a mixer, target
// copies, and the combined TD + episodic-memory objective.
class Learner {
 public:
  Learner(const LearnerConfig& cfg, const EnvSpec& spec, Rng& rng);

  const LearnerConfig& config() const { return cfg_; }
  std::vector<AgentNet>& nets() { return online_; }
  std::vector<AgentNet>& target_nets() { return target_; }
  MonotonicMixer& mixer() { return mixer_; }
  long long train_steps() const { return train_steps_; }

  // Roll out one episode with per-agent epsilon-greedy action selection;
  // intrinsic rewards are computed by the curiosity module and stored.
  EpisodeRecord collect_episode(Env& env, uint64_t episode_seed, double eps,
                                const CuriosityModule* curiosity, Rng& action_rng);

  // Forward-only loss evaluation (no parameter change).
  TrainMetrics compute_losses(const Batch& batch, const MemoryTable* memory,
                              const ProjectionMatrix* proj, double eta);

  // One gradient step on the combined objective.
  TrainMetrics train_on_batch(const Batch& batch, const MemoryTable* memory,
                              const ProjectionMatrix* proj, double eta,
                              const CuriosityModule* recompute_source = nullptr);

  // Sample, update inference nets, update the curiosity module, refresh
  // targets on schedule.
  TrainMetrics train_step(ReplayBuffer& buffer, CuriosityModule& curiosity,
                          const MemoryTable* memory, const ProjectionMatrix* proj, double eta,
                          Rng& sample_rng);

  void hard_update_targets();
  std::vector<ParamGrad> online_params();
  std::vector<ParamGrad> all_params();

  Batch make_batch_for(const std::vector<const EpisodeRecord*>& eps) const;

 private:
  TrainMetrics run_batch(const Batch& batch, const MemoryTable* memory,
                         const ProjectionMatrix* proj, double eta, bool backprop,
                         const CuriosityModule* recompute_source);

  LearnerConfig cfg_;
  EnvSpec spec_;
  std::vector<AgentNet> online_, target_;
  MonotonicMixer mixer_, target_mixer_;
  AdamState opt_;
  long long train_steps_ = 0;
};

}  // namespace emc
