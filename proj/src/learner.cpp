#include "emc/learner.hpp"

#include <cmath>
#include <stdexcept>

namespace emc {

ReplayBuffer::ReplayBuffer(size_t capacity) : capacity_(capacity) {
  require(capacity > 0, "replay buffer: capacity must be positive");
  store_.reserve(capacity);
}

void ReplayBuffer::push(EpisodeRecord ep) {
  ep.check();
  if (store_.size() < capacity_) {
    store_.push_back(std::move(ep));
  } else {
    store_[next_] = std::move(ep);
  }
  next_ = (next_ + 1) % capacity_;
}

std::vector<const EpisodeRecord*> ReplayBuffer::sample(int n, Rng& rng) const {
  require(!store_.empty(), "replay buffer: empty");
  std::vector<const EpisodeRecord*> out;
  out.reserve(n);
  for (int i = 0; i < n; ++i) out.push_back(&store_[rng.uniform_int(static_cast<int>(store_.size()))]);
  return out;
}

double epsilon_at(long long env_steps, double eps_start, double eps_end, long long anneal_steps) {
  if (env_steps >= anneal_steps) return eps_end;
  double frac = static_cast<double>(env_steps) / static_cast<double>(anneal_steps);
  return eps_start + (eps_end - eps_start) * frac;
}

double td_target(double r_ext, double scaled_r_int, double gamma, double target_max_next,
                 bool terminal) {
  double y = r_ext + scaled_r_int;
  if (!terminal) y += gamma * target_max_next;
  return y;
}

Learner::Learner(const LearnerConfig& cfg, const EnvSpec& spec, Rng& rng)
    : cfg_(cfg), spec_(spec) {
  require(cfg.lambda >= 0.0, "learner: lambda must be >= 0");
  require(cfg.gamma >= 0.0 && cfg.gamma < 1.0, "learner: gamma must be in [0,1)");
  for (int i = 0; i < spec.n_agents; ++i)
    online_.push_back(AgentNet::make(spec.obs_width, cfg.hidden, spec.n_actions, rng));
  if (cfg.mixer == MixerKind::Monotonic)
    mixer_ = MonotonicMixer::make(spec.n_agents, spec.state_width, cfg.mixer_hidden, rng);
  target_ = online_;
  target_mixer_ = mixer_;
  opt_.lr = cfg.lr;
  opt_.init(online_params());
}

std::vector<ParamGrad> Learner::online_params() {
  std::vector<ParamGrad> ps;
  for (int i = 0; i < spec_.n_agents; ++i)
    for (auto& p : online_[i].params("inf.agent" + std::to_string(i))) ps.push_back(p);
  if (cfg_.mixer == MixerKind::Monotonic)
    for (auto& p : mixer_.params("inf.mixer")) ps.push_back(p);
  return ps;
}

std::vector<ParamGrad> Learner::all_params() {
  std::vector<ParamGrad> ps = online_params();
  for (int i = 0; i < spec_.n_agents; ++i)
    for (auto& p : target_[i].params("inf.target" + std::to_string(i))) ps.push_back(p);
  if (cfg_.mixer == MixerKind::Monotonic)
    for (auto& p : target_mixer_.params("inf.target_mixer")) ps.push_back(p);
  return ps;
}

void Learner::hard_update_targets() {
  target_ = online_;
  target_mixer_ = mixer_;
}

EpisodeRecord Learner::collect_episode(Env& env, uint64_t episode_seed, double eps,
                                       const CuriosityModule* curiosity, Rng& action_rng) {
  StepResult sr = env.reset(episode_seed);
  const int n = spec_.n_agents;
  EpisodeRecord ep;
  ep.obs.push_back(sr.obs);
  ep.state.push_back(sr.state);

  std::vector<Tensor2> hidden(n, Tensor2(1, cfg_.hidden));
  while (!sr.done) {
    std::vector<int> joint(n);
    for (int i = 0; i < n; ++i) {
      Tensor2 x(1, spec_.obs_width);
      x.data = sr.obs[i];
      Tensor2 q = online_[i].step(x, hidden[i]);
      if (eps > 0.0 && action_rng.uniform() < eps)
        joint[i] = action_rng.uniform_int(spec_.n_actions);
      else
        joint[i] = argmax_lowest(q.data);
    }
    sr = env.step(joint);
    ep.obs.push_back(sr.obs);
    ep.state.push_back(sr.state);
    ep.actions.push_back(joint);
    ep.reward_ext.push_back(sr.reward);
    ep.done.push_back(sr.done ? 1 : 0);
  }
  ep.won = env.episode_won();
  ep.truncated = !ep.won;
  if (curiosity)
    ep.reward_int = curiosity->episode_intrinsic(ep);
  else
    ep.reward_int.assign(ep.length(), 0.0);
  ep.check();
  return ep;
}

Batch Learner::make_batch_for(const std::vector<const EpisodeRecord*>& eps) const {
  return make_batch(eps, spec_.n_agents, spec_.obs_width, spec_.state_width, spec_.n_actions);
}

TrainMetrics Learner::compute_losses(const Batch& batch, const MemoryTable* memory,
                                     const ProjectionMatrix* proj, double eta) {
  return run_batch(batch, memory, proj, eta, false, nullptr);
}

TrainMetrics Learner::train_on_batch(const Batch& batch, const MemoryTable* memory,
                                     const ProjectionMatrix* proj, double eta,
                                     const CuriosityModule* recompute_source) {
  return run_batch(batch, memory, proj, eta, true, recompute_source);
}

TrainMetrics Learner::run_batch(const Batch& batch, const MemoryTable* memory,
                                const ProjectionMatrix* proj, double eta, bool backprop,
                                const CuriosityModule* recompute_source) {
  const int T = batch.t_max, B = batch.b, n = spec_.n_agents, A = spec_.n_actions;
  const bool monotonic = cfg_.mixer == MixerKind::Monotonic;
  TrainMetrics out;

  // optionally refresh intrinsic rewards with the current curiosity nets
  std::vector<std::vector<double>> r_int = batch.r_int;
  if (recompute_source && cfg_.recompute_intrinsic) {
    for (int b = 0; b < B; ++b) {
      auto fresh = recompute_source->episode_intrinsic(*batch.episodes[b]);
      for (int t = 0; t < batch.episodes[b]->length(); ++t) r_int[t][b] = fresh[t];
    }
  }

  double mask_total = 0.0;
  for (int t = 0; t < T; ++t)
    for (int b = 0; b < B; ++b) mask_total += batch.mask[t][b];
  require(mask_total > 0.0, "learner: batch has no valid steps");

  if (backprop) {
    for (auto& net : online_) net.zero_grads();
    if (monotonic) mixer_.zero_grads();
  }

  // forward all agents: online over 0..T-1 (cached), target over 0..T
  std::vector<AgentNet::SeqCache> caches(n);
  std::vector<std::vector<Tensor2>> q(n), qt(n);
  for (int i = 0; i < n; ++i) {
    std::vector<Tensor2> oi(T), oti(T + 1);
    for (int t = 0; t < T; ++t) oi[t] = batch.obs[t][i];
    for (int t = 0; t <= T; ++t) oti[t] = batch.obs[t][i];
    Tensor2 h0(B, cfg_.hidden);
    q[i] = online_[i].forward_sequence(oi, h0, nullptr, backprop ? &caches[i] : nullptr);
    Tensor2 th0(B, cfg_.hidden);
    qt[i] = target_[i].forward_sequence(oti, th0);
  }

  // chosen joint values and bootstrap maxima
  std::vector<Tensor2> q_sel(T), q_tot(T), max_next(T);
  std::vector<MonotonicMixer::Cache> mix_cache(monotonic && backprop ? T : 0);
  for (int t = 0; t < T; ++t) {
    q_sel[t] = Tensor2(B, n);
    for (int b = 0; b < B; ++b)
      for (int i = 0; i < n; ++i) q_sel[t](b, i) = q[i][t](b, batch.action_of(t, b, i));
    if (monotonic) {
      q_tot[t] = mixer_.forward(q_sel[t], batch.state[t],
                                (backprop ? &mix_cache[t] : nullptr));
    } else {
      q_tot[t] = Tensor2(B, 1);
      for (int b = 0; b < B; ++b) {
        double s = 0.0;
        for (int i = 0; i < n; ++i) s += q_sel[t](b, i);
        q_tot[t](b, 0) = s;
      }
    }

    // greedy joint value under the target parameters at t+1
    Tensor2 tm(B, n);
    for (int b = 0; b < B; ++b)
      for (int i = 0; i < n; ++i) {
        double best = qt[i][t + 1](b, 0);
        for (int a = 1; a < A; ++a) best = std::max(best, qt[i][t + 1](b, a));
        tm(b, i) = best;
      }
    if (monotonic) {
      max_next[t] = target_mixer_.forward(tm, batch.state[t + 1]);
    } else {
      max_next[t] = Tensor2(B, 1);
      for (int b = 0; b < B; ++b) {
        double s = 0.0;
        for (int i = 0; i < n; ++i) s += tm(b, i);
        max_next[t](b, 0) = s;
      }
    }
  }

  // memory targets for each valid transition
  std::vector<std::vector<double>> h_target(T, std::vector<double>(B, 0.0));
  std::vector<std::vector<double>> h_mask(T, std::vector<double>(B, 0.0));
  double mem_total = 0.0;
  if (memory && proj && cfg_.lambda > 0.0) {
    for (int b = 0; b < B; ++b) {
      const EpisodeRecord& epr = *batch.episodes[b];
      for (int t = 0; t < epr.length(); ++t) {
        bool terminal = epr.done[t] != 0;
        auto ht = memory->memory_target(epr.reward_ext[t],
                                        terminal ? std::vector<double>(proj->k(), 0.0)
                                                 : proj->project(epr.state[t + 1]),
                                        terminal);
        if (ht) {
          h_target[t][b] = *ht;
          h_mask[t][b] = 1.0;
          mem_total += 1.0;
        }
      }
    }
  }

  // losses and dL/dQ_tot
  double loss_inf = 0.0, loss_mem = 0.0, rint_sum = 0.0;
  std::vector<Tensor2> dqtot(T);
  for (int t = 0; t < T; ++t) {
    dqtot[t] = Tensor2(B, 1);
    for (int b = 0; b < B; ++b) {
      if (batch.mask[t][b] == 0.0) continue;
      rint_sum += r_int[t][b];
      double y = td_target(batch.r_ext[t][b], eta * r_int[t][b], cfg_.gamma, max_next[t](b, 0),
                           batch.done[t][b] != 0.0);
      double err = q_tot[t](b, 0) - y;
      loss_inf += err * err;
      double g = 2.0 * err / mask_total;
      if (h_mask[t][b] != 0.0) {
        double merr = q_tot[t](b, 0) - h_target[t][b];
        loss_mem += merr * merr;
        g += cfg_.lambda * 2.0 * merr / mem_total;
      }
      dqtot[t](b, 0) = g;
    }
  }
  loss_inf /= mask_total;
  if (mem_total > 0.0) loss_mem /= mem_total;
  out.loss_inference = loss_inf;
  out.loss_memory = loss_mem;
  out.mean_r_int = rint_sum / mask_total;

  if (!std::isfinite(loss_inf) || !std::isfinite(loss_mem))
    throw std::runtime_error("learner: non-finite loss");
  if (!backprop) return out;

  // backprop: mixer (or identity) then per-agent BPTT
  std::vector<std::vector<Tensor2>> dq(n);
  for (int i = 0; i < n; ++i) dq[i].assign(T, Tensor2(B, A));
  for (int t = 0; t < T; ++t) {
    Tensor2 dsel;
    if (monotonic) {
      mixer_.backward(dqtot[t], mix_cache[t], dsel);
    } else {
      dsel = Tensor2(B, n);
      for (int b = 0; b < B; ++b)
        for (int i = 0; i < n; ++i) dsel(b, i) = dqtot[t](b, 0);
    }
    for (int b = 0; b < B; ++b)
      for (int i = 0; i < n; ++i) dq[i][t](b, batch.action_of(t, b, i)) = dsel(b, i);
  }
  for (int i = 0; i < n; ++i) online_[i].backward_sequence(caches[i], dq[i]);

  auto ps = online_params();
  double gn = 0.0;
  for (auto& p : ps)
    for (double v : p.g->data) gn += v * v;
  out.grad_norm = std::sqrt(gn);

  adam_step(ps, opt_);
  return out;
}

TrainMetrics Learner::train_step(ReplayBuffer& buffer, CuriosityModule& curiosity,
                                 const MemoryTable* memory, const ProjectionMatrix* proj,
                                 double eta, Rng& sample_rng) {
  require(buffer.size() >= static_cast<size_t>(cfg_.batch_size),
          "learner: buffer smaller than batch size");
  auto eps = buffer.sample(cfg_.batch_size, sample_rng);
  Batch batch = make_batch_for(eps);

  TrainMetrics m = train_on_batch(batch, memory, proj, eta, &curiosity);
  auto cm = curiosity.train(batch);
  m.loss_ext = cm.loss_ext;
  m.loss_pred = cm.loss_pred;

  ++train_steps_;
  if (train_steps_ % cfg_.target_interval == 0) hard_update_targets();
  return m;
}

}  // namespace emc
