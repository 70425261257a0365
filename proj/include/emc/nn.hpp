#pragma once

#include <functional>
#include <string>
#include <vector>

#include "emc/rng.hpp"
#include "emc/tensor.hpp"

namespace emc {

enum class Activation { Identity, Relu, Tanh };

struct ParamGrad {
  Tensor2* p;
  Tensor2* g;
  std::string name;
};

// Fully-connected layer, y = act(x * W^T + b). Parameters carry paired
// gradient buffers that backward() accumulates into.
struct DenseLayer {
  Tensor2 w;  // out x in
  Tensor2 b;  // 1 x out
  Activation act = Activation::Identity;
  Tensor2 gw, gb;

  static DenseLayer make(int in, int out, Activation act, Rng& rng);

  int in_width() const { return w.cols; }
  int out_width() const { return w.rows; }

  struct Cache {
    Tensor2 x, y;
  };

  Tensor2 forward(const Tensor2& x, Cache* cache = nullptr) const;
  // returns dx, accumulates gw/gb
  Tensor2 backward(const Tensor2& dy, const Cache& cache);

  void zero_grads() {
    gw.zero();
    gb.zero();
  }
  std::vector<ParamGrad> params(const std::string& prefix);
};

// GRU cell with stacked gate matrices, rows [r; z; n]:
//   r = sigmoid(Wi_r x + bi_r + Wh_r h + bh_r)
//   z = sigmoid(Wi_z x + bi_z + Wh_z h + bh_z)
//   n = tanh  (Wi_n x + bi_n + r .* (Wh_n h + bh_n))
//   h' = (1 - z) .* n + z .* h
struct GruCell {
  Tensor2 wi;  // 3H x in
  Tensor2 wh;  // 3H x H
  Tensor2 bi;  // 1 x 3H
  Tensor2 bh;  // 1 x 3H
  Tensor2 gwi, gwh, gbi, gbh;

  static GruCell make(int in, int hidden, Rng& rng);

  int input_size() const { return wi.cols; }
  int hidden_size() const { return wh.cols; }

  struct Cache {
    Tensor2 x, h_prev, r, z, n, gh_n;
  };

  Tensor2 step_forward(const Tensor2& x, const Tensor2& h_prev, Cache* cache = nullptr) const;
  // dh is the gradient w.r.t. this step's output h'. Returns dx and adds the
  // recurrent gradient into dh_prev.
  Tensor2 step_backward(const Tensor2& dh, const Cache& cache, Tensor2& dh_prev);

  void zero_grads() {
    gwi.zero();
    gwh.zero();
    gbi.zero();
    gbh.zero();
  }
  std::vector<ParamGrad> params(const std::string& prefix);
};

// Recurrent action-value network: dense encoder -> GRU -> linear head over
// actions. Forward over a whole history is deterministic given parameters.
struct AgentNet {
  DenseLayer enc;
  GruCell gru;
  DenseLayer head;

  static AgentNet make(int obs_width, int hidden, int n_actions, Rng& rng);

  int obs_width() const { return enc.in_width(); }
  int hidden_size() const { return gru.hidden_size(); }
  int n_actions() const { return head.out_width(); }

  struct SeqCache {
    std::vector<DenseLayer::Cache> enc;
    std::vector<GruCell::Cache> gru;
    std::vector<DenseLayer::Cache> head;
  };

  // Batched: obs[t] is B x obs_width, h0 is B x hidden. Returns q[t] (B x A).
  std::vector<Tensor2> forward_sequence(const std::vector<Tensor2>& obs, const Tensor2& h0,
                                        Tensor2* h_final = nullptr,
                                        SeqCache* cache = nullptr) const;
  // Backprop-through-time over the full sequence; dq[t] matches q[t].
  void backward_sequence(const SeqCache& cache, const std::vector<Tensor2>& dq);

  // One step for rollouts: updates h in place, returns q (B x A).
  Tensor2 step(const Tensor2& obs, Tensor2& h) const;

  // Single-trajectory convenience over plain vectors.
  std::vector<std::vector<double>> forward_single(const std::vector<std::vector<double>>& obs,
                                                  std::vector<double>* h_final = nullptr) const;

  void zero_grads();
  std::vector<ParamGrad> params(const std::string& prefix = "net");
};

// Small feed-forward stack (used by the random-distillation nets).
struct Mlp {
  std::vector<DenseLayer> layers;

  static Mlp make(const std::vector<int>& widths, Activation hidden_act, Rng& rng);

  struct Cache {
    std::vector<DenseLayer::Cache> layer;
  };

  Tensor2 forward(const Tensor2& x, Cache* cache = nullptr) const;
  Tensor2 backward(const Tensor2& dy, const Cache& cache);
  void zero_grads();
  std::vector<ParamGrad> params(const std::string& prefix);
};

// Adam with bias-corrected moments; moment buffers shape-match parameters.
struct AdamState {
  double lr = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  long long t = 0;
  std::vector<Tensor2> m, v;

  void init(const std::vector<ParamGrad>& ps);
};

// One optimizer step; throws on non-finite gradients.
void adam_step(std::vector<ParamGrad>& params, AdamState& st);

// target <- (1 - rho) * target + rho * source
void soft_update_params(std::vector<ParamGrad> target, std::vector<ParamGrad> source, double rho);
void copy_params(std::vector<ParamGrad> dst, std::vector<ParamGrad> src);
bool params_bitwise_equal(std::vector<ParamGrad> a, std::vector<ParamGrad> b);

}  // namespace emc
