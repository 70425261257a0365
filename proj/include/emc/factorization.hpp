#pragma once

#include <string>
#include <vector>

#include "emc/nn.hpp"

namespace emc {

enum class MixerKind { LinearSum, Monotonic };

MixerKind mixer_kind_from_string(const std::string& s);
std::string to_string(MixerKind k);

// Q_tot = sum_i Q_i. Gradient w.r.t. every input is exactly 1.
double mix_linear(const std::vector<double>& chosen_q);

// Per-agent greedy actions; ties broken by the lowest action index. Under a
// linear mixer this realizes the joint argmax of Q_tot exactly.
std::vector<int> greedy_joint_action(const std::vector<std::vector<double>>& q_vectors);
int argmax_lowest(const std::vector<double>& v);

// State-conditioned monotonic mixer. A hyper-network (one dense layer per
// output) produces mixing weights whose absolute value is used, so
// dQ_tot/dQ_i >= 0 for every agent. Middle activation is ELU.
struct MonotonicMixer {
  int n_agents = 0;
  int state_width = 0;
  int hidden = 32;

  DenseLayer hyper_w1;  // state -> n_agents * hidden (abs applied)
  DenseLayer hyper_b1;  // state -> hidden
  DenseLayer hyper_w2;  // state -> hidden (abs applied)
  DenseLayer hyper_b2;  // state -> 1

  static MonotonicMixer make(int n_agents, int state_width, int hidden, Rng& rng);

  struct Cache {
    DenseLayer::Cache cw1, cb1, cw2, cb2;
    Tensor2 q;        // B x n
    Tensor2 w1_raw;   // B x n*hidden
    Tensor2 pre;      // B x hidden (before ELU)
    Tensor2 mid;      // B x hidden (after ELU)
    Tensor2 w2_raw;   // B x hidden
  };

  // q: B x n_agents, state: B x state_width -> B x 1
  Tensor2 forward(const Tensor2& q, const Tensor2& state, Cache* cache = nullptr) const;
  // dq_out receives dL/dq (B x n_agents); hyper-net grads accumulate.
  void backward(const Tensor2& dqtot, const Cache& cache, Tensor2& dq_out);

  double mix(const std::vector<double>& chosen_q, const std::vector<double>& state) const;

  void zero_grads();
  std::vector<ParamGrad> params(const std::string& prefix = "mixer");
};

}  // namespace emc
