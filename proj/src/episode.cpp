#include "emc/episode.hpp"

namespace emc {

void EpisodeRecord::check() const {
  const size_t T = actions.size();
  require(T > 0, "episode: empty");
  require(obs.size() == T + 1, "episode: obs length mismatch");
  require(state.size() == T + 1, "episode: state length mismatch");
  require(reward_ext.size() == T && reward_int.size() == T && done.size() == T,
          "episode: per-step field length mismatch");
  for (size_t t = 0; t + 1 < T; ++t) require(!done[t], "episode: done before last step");
  require(done[T - 1], "episode: missing terminal flag");
}

Batch make_batch(const std::vector<const EpisodeRecord*>& eps, int n_agents, int obs_w,
                 int state_w, int n_actions) {
  require(!eps.empty(), "batch: no episodes");
  Batch b;
  b.b = static_cast<int>(eps.size());
  b.n_agents = n_agents;
  b.n_actions = n_actions;
  b.episodes = eps;
  for (const auto* ep : eps) b.t_max = std::max(b.t_max, ep->length());
  const int T = b.t_max;
  const int B = b.b;

  b.obs.resize(T + 1);
  b.state.resize(T + 1);
  for (int t = 0; t <= T; ++t) {
    b.obs[t].assign(n_agents, Tensor2(B, obs_w));
    b.state[t] = Tensor2(B, state_w);
  }
  b.actions.assign(T, std::vector<int>(static_cast<size_t>(B) * n_agents, 0));
  b.r_ext.assign(T, std::vector<double>(B, 0.0));
  b.r_int.assign(T, std::vector<double>(B, 0.0));
  b.done.assign(T, std::vector<double>(B, 1.0));
  b.mask.assign(T, std::vector<double>(B, 0.0));

  for (int row = 0; row < B; ++row) {
    const EpisodeRecord& ep = *eps[row];
    const int len = ep.length();
    for (int t = 0; t <= len; ++t) {
      for (int i = 0; i < n_agents; ++i)
        for (int c = 0; c < obs_w; ++c) b.obs[t][i](row, c) = ep.obs[t][i][c];
      for (int c = 0; c < state_w; ++c) b.state[t](row, c) = ep.state[t][c];
    }
    // padding repeats the bootstrap observation so recurrent forward stays
    // well-defined; the mask keeps padded steps out of every loss
    for (int t = len + 1; t <= T; ++t) {
      for (int i = 0; i < n_agents; ++i)
        for (int c = 0; c < obs_w; ++c) b.obs[t][i](row, c) = ep.obs[len][i][c];
      for (int c = 0; c < state_w; ++c) b.state[t](row, c) = ep.state[len][c];
    }
    for (int t = 0; t < len; ++t) {
      for (int i = 0; i < n_agents; ++i) b.actions[t][row * n_agents + i] = ep.actions[t][i];
      b.r_ext[t][row] = ep.reward_ext[t];
      b.r_int[t][row] = ep.reward_int[t];
      b.done[t][row] = ep.done[t] ? 1.0 : 0.0;
      b.mask[t][row] = 1.0;
    }
  }
  return b;
}

}  // namespace emc
