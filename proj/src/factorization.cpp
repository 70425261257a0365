#include "emc/factorization.hpp"

#include <cmath>
#include <stdexcept>

namespace emc {

MixerKind mixer_kind_from_string(const std::string& s) {
  if (s == "linear" || s == "linear-sum" || s == "vdn") return MixerKind::LinearSum;
  if (s == "monotonic" || s == "qmix") return MixerKind::Monotonic;
  throw std::invalid_argument("unknown mixer kind: " + s);
}

std::string to_string(MixerKind k) {
  return k == MixerKind::LinearSum ? "linear-sum" : "monotonic";
}

double mix_linear(const std::vector<double>& chosen_q) {
  double total = 0.0;
  for (double q : chosen_q) total += q;
  return total;
}

int argmax_lowest(const std::vector<double>& v) {
  int best = 0;
  for (int i = 1; i < static_cast<int>(v.size()); ++i)
    if (v[i] > v[best]) best = i;
  return best;
}

std::vector<int> greedy_joint_action(const std::vector<std::vector<double>>& q_vectors) {
  std::vector<int> joint;
  joint.reserve(q_vectors.size());
  for (const auto& q : q_vectors) joint.push_back(argmax_lowest(q));
  return joint;
}

// The mixing layer is linear in q for a fixed state (identity middle
// activation): forcing identity hyper-net outputs then reduces Q_tot to
// sum(Q_i) exactly, and monotonicity needs only the non-negative weights.

MonotonicMixer MonotonicMixer::make(int n_agents, int state_width, int hidden, Rng& rng) {
  MonotonicMixer m;
  m.n_agents = n_agents;
  m.state_width = state_width;
  m.hidden = hidden;
  m.hyper_w1 = DenseLayer::make(state_width, n_agents * hidden, Activation::Identity, rng);
  m.hyper_b1 = DenseLayer::make(state_width, hidden, Activation::Identity, rng);
  m.hyper_w2 = DenseLayer::make(state_width, hidden, Activation::Identity, rng);
  m.hyper_b2 = DenseLayer::make(state_width, 1, Activation::Identity, rng);
  return m;
}

Tensor2 MonotonicMixer::forward(const Tensor2& q, const Tensor2& state, Cache* cache) const {
  require(q.cols == n_agents, "monotonic mixer: q width mismatch");
  require(state.cols == state_width, "monotonic mixer: state width mismatch");
  require(q.rows == state.rows, "monotonic mixer: batch mismatch");
  const int B = q.rows;

  Cache local;
  Cache& c = cache ? *cache : local;
  c.q = q;
  c.w1_raw = hyper_w1.forward(state, cache ? &c.cw1 : nullptr);
  Tensor2 b1 = hyper_b1.forward(state, cache ? &c.cb1 : nullptr);
  c.w2_raw = hyper_w2.forward(state, cache ? &c.cw2 : nullptr);
  Tensor2 b2 = hyper_b2.forward(state, cache ? &c.cb2 : nullptr);

  c.pre = Tensor2(B, hidden);
  c.mid = Tensor2(B, hidden);
  Tensor2 out(B, 1);
  for (int b = 0; b < B; ++b) {
    for (int j = 0; j < hidden; ++j) {
      double acc = b1(b, j);
      for (int i = 0; i < n_agents; ++i)
        acc += std::fabs(c.w1_raw(b, j * n_agents + i)) * q(b, i);
      c.pre(b, j) = acc;
      c.mid(b, j) = acc;
    }
    double acc = b2(b, 0);
    for (int j = 0; j < hidden; ++j) acc += std::fabs(c.w2_raw(b, j)) * c.mid(b, j);
    out(b, 0) = acc;
  }
  return out;
}

void MonotonicMixer::backward(const Tensor2& dqtot, const Cache& cache, Tensor2& dq_out) {
  const int B = dqtot.rows;
  dq_out = Tensor2(B, n_agents);
  Tensor2 dw1_raw(B, n_agents * hidden), db1(B, hidden), dw2_raw(B, hidden), db2(B, 1);

  for (int b = 0; b < B; ++b) {
    double g = dqtot(b, 0);
    db2(b, 0) = g;
    for (int j = 0; j < hidden; ++j) {
      double w2 = std::fabs(cache.w2_raw(b, j));
      double dmid = g * w2;
      dw2_raw(b, j) = g * cache.mid(b, j) * (cache.w2_raw(b, j) >= 0.0 ? 1.0 : -1.0);
      double dpre = dmid;
      db1(b, j) = dpre;
      for (int i = 0; i < n_agents; ++i) {
        double raw = cache.w1_raw(b, j * n_agents + i);
        dq_out(b, i) += dpre * std::fabs(raw);
        dw1_raw(b, j * n_agents + i) = dpre * cache.q(b, i) * (raw >= 0.0 ? 1.0 : -1.0);
      }
    }
  }

  hyper_w1.backward(dw1_raw, cache.cw1);
  hyper_b1.backward(db1, cache.cb1);
  hyper_w2.backward(dw2_raw, cache.cw2);
  hyper_b2.backward(db2, cache.cb2);
}

double MonotonicMixer::mix(const std::vector<double>& chosen_q,
                           const std::vector<double>& state) const {
  Tensor2 q(1, n_agents), s(1, state_width);
  require(static_cast<int>(chosen_q.size()) == n_agents, "monotonic mixer: wrong agent count");
  require(static_cast<int>(state.size()) == state_width, "monotonic mixer: wrong state width");
  q.data = chosen_q;
  s.data = state;
  return forward(q, s)(0, 0);
}

void MonotonicMixer::zero_grads() {
  hyper_w1.zero_grads();
  hyper_b1.zero_grads();
  hyper_w2.zero_grads();
  hyper_b2.zero_grads();
}

std::vector<ParamGrad> MonotonicMixer::params(const std::string& prefix) {
  std::vector<ParamGrad> ps;
  for (auto& p : hyper_w1.params(prefix + ".hw1")) ps.push_back(p);
  for (auto& p : hyper_b1.params(prefix + ".hb1")) ps.push_back(p);
  for (auto& p : hyper_w2.params(prefix + ".hw2")) ps.push_back(p);
  for (auto& p : hyper_b2.params(prefix + ".hb2")) ps.push_back(p);
  return ps;
}

}  // namespace emc
