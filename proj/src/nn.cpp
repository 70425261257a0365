#include "emc/nn.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstring>
#include <stdexcept>

namespace emc {

using EMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using EMap = Eigen::Map<EMat>;
using ECMap = Eigen::Map<const EMat>;

void matmul(const Tensor2& a, const Tensor2& b, Tensor2& c) {
  require(a.cols == b.rows, "matmul: inner dimensions differ");
  if (c.rows != a.rows || c.cols != b.cols) c = Tensor2(a.rows, b.cols);
  EMap(c.data.data(), c.rows, c.cols).noalias() =
      ECMap(a.data.data(), a.rows, a.cols) * ECMap(b.data.data(), b.rows, b.cols);
}

void matmul_at_b_acc(const Tensor2& a, const Tensor2& b, Tensor2& c) {
  require(a.rows == b.rows, "matmul_at_b_acc: batch dimensions differ");
  require(c.rows == a.cols && c.cols == b.cols, "matmul_at_b_acc: output shape mismatch");
  EMap(c.data.data(), c.rows, c.cols).noalias() +=
      ECMap(a.data.data(), a.rows, a.cols).transpose() * ECMap(b.data.data(), b.rows, b.cols);
}

void matmul_a_bt(const Tensor2& a, const Tensor2& b, Tensor2& c) {
  require(a.cols == b.cols, "matmul_a_bt: inner dimensions differ");
  if (c.rows != a.rows || c.cols != b.rows) c = Tensor2(a.rows, b.rows);
  EMap(c.data.data(), c.rows, c.cols).noalias() =
      ECMap(a.data.data(), a.rows, a.cols) * ECMap(b.data.data(), b.rows, b.cols).transpose();
}

namespace {

void init_uniform_fan_in(Tensor2& t, int fan_in, Rng& rng) {
  double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (double& v : t.data) v = rng.uniform(-bound, bound);
}

inline double apply_act(Activation a, double x) {
  switch (a) {
    case Activation::Identity: return x;
    case Activation::Relu: return x > 0.0 ? x : 0.0;
    case Activation::Tanh: return std::tanh(x);
  }
  return x;
}

// derivative expressed through the activation output y
inline double act_grad_from_out(Activation a, double y) {
  switch (a) {
    case Activation::Identity: return 1.0;
    case Activation::Relu: return y > 0.0 ? 1.0 : 0.0;
    case Activation::Tanh: return 1.0 - y * y;
  }
  return 1.0;
}

void add_bias_rows(Tensor2& y, const Tensor2& b) {
  for (int r = 0; r < y.rows; ++r) {
    double* row = &y.data[static_cast<size_t>(r) * y.cols];
    for (int c = 0; c < y.cols; ++c) row[c] += b.data[c];
  }
}

void accumulate_col_sums(const Tensor2& dy, Tensor2& gb) {
  for (int r = 0; r < dy.rows; ++r) {
    const double* row = &dy.data[static_cast<size_t>(r) * dy.cols];
    for (int c = 0; c < dy.cols; ++c) gb.data[c] += row[c];
  }
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

DenseLayer DenseLayer::make(int in, int out, Activation act, Rng& rng) {
  DenseLayer l;
  l.w = Tensor2(out, in);
  l.b = Tensor2(1, out);
  l.act = act;
  init_uniform_fan_in(l.w, in, rng);
  init_uniform_fan_in(l.b, in, rng);
  l.gw = Tensor2(out, in);
  l.gb = Tensor2(1, out);
  return l;
}

Tensor2 DenseLayer::forward(const Tensor2& x, Cache* cache) const {
  require(x.cols == w.cols, "DenseLayer: input width mismatch");
  Tensor2 y;
  matmul_a_bt(x, w, y);
  add_bias_rows(y, b);
  for (double& v : y.data) v = apply_act(act, v);
  if (cache) {
    cache->x = x;
    cache->y = y;
  }
  return y;
}

Tensor2 DenseLayer::backward(const Tensor2& dy, const Cache& cache) {
  require(dy.same_shape(cache.y), "DenseLayer backward: gradient shape mismatch");
  Tensor2 dpre = dy;
  for (size_t i = 0; i < dpre.data.size(); ++i)
    dpre.data[i] *= act_grad_from_out(act, cache.y.data[i]);
  matmul_at_b_acc(dpre, cache.x, gw);
  accumulate_col_sums(dpre, gb);
  Tensor2 dx;
  matmul(dpre, w, dx);
  return dx;
}

std::vector<ParamGrad> DenseLayer::params(const std::string& prefix) {
  return {{&w, &gw, prefix + ".w"}, {&b, &gb, prefix + ".b"}};
}

GruCell GruCell::make(int in, int hidden, Rng& rng) {
  GruCell c;
  c.wi = Tensor2(3 * hidden, in);
  c.wh = Tensor2(3 * hidden, hidden);
  c.bi = Tensor2(1, 3 * hidden);
  c.bh = Tensor2(1, 3 * hidden);
  init_uniform_fan_in(c.wi, in, rng);
  init_uniform_fan_in(c.wh, hidden, rng);
  init_uniform_fan_in(c.bi, in, rng);
  init_uniform_fan_in(c.bh, hidden, rng);
  c.gwi = Tensor2(3 * hidden, in);
  c.gwh = Tensor2(3 * hidden, hidden);
  c.gbi = Tensor2(1, 3 * hidden);
  c.gbh = Tensor2(1, 3 * hidden);
  return c;
}

Tensor2 GruCell::step_forward(const Tensor2& x, const Tensor2& h_prev, Cache* cache) const {
  const int H = hidden_size();
  require(x.cols == wi.cols, "GruCell: input width mismatch");
  require(h_prev.cols == H && h_prev.rows == x.rows, "GruCell: hidden shape mismatch");

  Tensor2 gi, gh;
  matmul_a_bt(x, wi, gi);
  add_bias_rows(gi, bi);
  matmul_a_bt(h_prev, wh, gh);
  add_bias_rows(gh, bh);

  const int B = x.rows;
  Tensor2 r(B, H), z(B, H), n(B, H), gh_n(B, H), h(B, H);
  for (int b = 0; b < B; ++b) {
    const double* gi_row = &gi.data[static_cast<size_t>(b) * 3 * H];
    const double* gh_row = &gh.data[static_cast<size_t>(b) * 3 * H];
    const double* hp = &h_prev.data[static_cast<size_t>(b) * H];
    double* rr = &r.data[static_cast<size_t>(b) * H];
    double* zz = &z.data[static_cast<size_t>(b) * H];
    double* nn = &n.data[static_cast<size_t>(b) * H];
    double* gn = &gh_n.data[static_cast<size_t>(b) * H];
    double* hh = &h.data[static_cast<size_t>(b) * H];
    for (int j = 0; j < H; ++j) {
      rr[j] = sigmoid(gi_row[j] + gh_row[j]);
      zz[j] = sigmoid(gi_row[H + j] + gh_row[H + j]);
      gn[j] = gh_row[2 * H + j];
      nn[j] = std::tanh(gi_row[2 * H + j] + rr[j] * gn[j]);
      hh[j] = (1.0 - zz[j]) * nn[j] + zz[j] * hp[j];
    }
  }
  if (cache) {
    cache->x = x;
    cache->h_prev = h_prev;
    cache->r = r;
    cache->z = z;
    cache->n = n;
    cache->gh_n = gh_n;
  }
  return h;
}

Tensor2 GruCell::step_backward(const Tensor2& dh, const Cache& cache, Tensor2& dh_prev) {
  const int H = hidden_size();
  const int B = dh.rows;
  require(dh.cols == H, "GruCell backward: gradient width mismatch");

  Tensor2 dgi(B, 3 * H), dgh(B, 3 * H);
  for (int b = 0; b < B; ++b) {
    const double* dhow = &dh.data[static_cast<size_t>(b) * H];
    const double* rr = &cache.r.data[static_cast<size_t>(b) * H];
    const double* zz = &cache.z.data[static_cast<size_t>(b) * H];
    const double* nn = &cache.n.data[static_cast<size_t>(b) * H];
    const double* gn = &cache.gh_n.data[static_cast<size_t>(b) * H];
    const double* hp = &cache.h_prev.data[static_cast<size_t>(b) * H];
    double* dgi_row = &dgi.data[static_cast<size_t>(b) * 3 * H];
    double* dgh_row = &dgh.data[static_cast<size_t>(b) * 3 * H];
    double* dhp = &dh_prev.data[static_cast<size_t>(b) * H];
    for (int j = 0; j < H; ++j) {
      double dn = dhow[j] * (1.0 - zz[j]);
      double dz = dhow[j] * (hp[j] - nn[j]);
      dhp[j] += dhow[j] * zz[j];
      double dpre_n = dn * (1.0 - nn[j] * nn[j]);
      double dr = dpre_n * gn[j];
      double dpre_r = dr * rr[j] * (1.0 - rr[j]);
      double dpre_z = dz * zz[j] * (1.0 - zz[j]);
      dgi_row[j] = dpre_r;
      dgi_row[H + j] = dpre_z;
      dgi_row[2 * H + j] = dpre_n;
      dgh_row[j] = dpre_r;
      dgh_row[H + j] = dpre_z;
      dgh_row[2 * H + j] = dpre_n * rr[j];
    }
  }

  matmul_at_b_acc(dgi, cache.x, gwi);
  accumulate_col_sums(dgi, gbi);
  matmul_at_b_acc(dgh, cache.h_prev, gwh);
  accumulate_col_sums(dgh, gbh);

  Tensor2 tmp;
  matmul(dgh, wh, tmp);
  for (size_t i = 0; i < dh_prev.data.size(); ++i) dh_prev.data[i] += tmp.data[i];

  Tensor2 dx;
  matmul(dgi, wi, dx);
  return dx;
}

std::vector<ParamGrad> GruCell::params(const std::string& prefix) {
  return {{&wi, &gwi, prefix + ".wi"},
          {&wh, &gwh, prefix + ".wh"},
          {&bi, &gbi, prefix + ".bi"},
          {&bh, &gbh, prefix + ".bh"}};
}

AgentNet AgentNet::make(int obs_width, int hidden, int n_actions, Rng& rng) {
  AgentNet net;
  net.enc = DenseLayer::make(obs_width, hidden, Activation::Relu, rng);
  net.gru = GruCell::make(hidden, hidden, rng);
  net.head = DenseLayer::make(hidden, n_actions, Activation::Identity, rng);
  return net;
}

std::vector<Tensor2> AgentNet::forward_sequence(const std::vector<Tensor2>& obs, const Tensor2& h0,
                                                Tensor2* h_final, SeqCache* cache) const {
  const size_t T = obs.size();
  std::vector<Tensor2> q(T);
  if (cache) {
    cache->enc.resize(T);
    cache->gru.resize(T);
    cache->head.resize(T);
  }
  Tensor2 h = h0;
  for (size_t t = 0; t < T; ++t) {
    Tensor2 e = enc.forward(obs[t], cache ? &cache->enc[t] : nullptr);
    h = gru.step_forward(e, h, cache ? &cache->gru[t] : nullptr);
    q[t] = head.forward(h, cache ? &cache->head[t] : nullptr);
  }
  if (h_final) *h_final = h;
  return q;
}

void AgentNet::backward_sequence(const SeqCache& cache, const std::vector<Tensor2>& dq) {
  require(dq.size() == cache.gru.size(), "backward_sequence: missing forward cache");
  const size_t T = dq.size();
  if (T == 0) return;
  const int B = dq[0].rows;
  Tensor2 dh_carry(B, gru.hidden_size());
  DenseLayer& head_mut = const_cast<DenseLayer&>(head);
  for (size_t ti = T; ti-- > 0;) {
    Tensor2 dh = head_mut.backward(dq[ti], cache.head[ti]);
    for (size_t i = 0; i < dh.data.size(); ++i) dh.data[i] += dh_carry.data[i];
    dh_carry.zero();
    Tensor2 de = gru.step_backward(dh, cache.gru[ti], dh_carry);
    enc.backward(de, cache.enc[ti]);
  }
}

Tensor2 AgentNet::step(const Tensor2& obs, Tensor2& h) const {
  Tensor2 e = enc.forward(obs);
  h = gru.step_forward(e, h);
  return head.forward(h);
}

std::vector<std::vector<double>> AgentNet::forward_single(
    const std::vector<std::vector<double>>& obs, std::vector<double>* h_final) const {
  Tensor2 h(1, hidden_size());
  std::vector<std::vector<double>> out;
  out.reserve(obs.size());
  for (const auto& o : obs) {
    require(static_cast<int>(o.size()) == obs_width(), "forward_single: observation width mismatch");
    Tensor2 x(1, obs_width());
    x.data = o;
    Tensor2 q = step(x, h);
    out.push_back(q.data);
  }
  if (h_final) *h_final = h.data;
  return out;
}

void AgentNet::zero_grads() {
  enc.zero_grads();
  gru.zero_grads();
  head.zero_grads();
}

std::vector<ParamGrad> AgentNet::params(const std::string& prefix) {
  std::vector<ParamGrad> ps;
  for (auto& p : enc.params(prefix + ".enc")) ps.push_back(p);
  for (auto& p : gru.params(prefix + ".gru")) ps.push_back(p);
  for (auto& p : head.params(prefix + ".head")) ps.push_back(p);
  return ps;
}

Mlp Mlp::make(const std::vector<int>& widths, Activation hidden_act, Rng& rng) {
  require(widths.size() >= 2, "Mlp: need at least input and output widths");
  Mlp m;
  for (size_t i = 0; i + 1 < widths.size(); ++i) {
    Activation a = (i + 2 == widths.size()) ? Activation::Identity : hidden_act;
    m.layers.push_back(DenseLayer::make(widths[i], widths[i + 1], a, rng));
  }
  return m;
}

Tensor2 Mlp::forward(const Tensor2& x, Cache* cache) const {
  if (cache) cache->layer.resize(layers.size());
  Tensor2 cur = x;
  for (size_t i = 0; i < layers.size(); ++i)
    cur = layers[i].forward(cur, cache ? &cache->layer[i] : nullptr);
  return cur;
}

Tensor2 Mlp::backward(const Tensor2& dy, const Cache& cache) {
  Tensor2 cur = dy;
  for (size_t i = layers.size(); i-- > 0;) cur = layers[i].backward(cur, cache.layer[i]);
  return cur;
}

void Mlp::zero_grads() {
  for (auto& l : layers) l.zero_grads();
}

std::vector<ParamGrad> Mlp::params(const std::string& prefix) {
  std::vector<ParamGrad> ps;
  for (size_t i = 0; i < layers.size(); ++i)
    for (auto& p : layers[i].params(prefix + ".l" + std::to_string(i))) ps.push_back(p);
  return ps;
}

void AdamState::init(const std::vector<ParamGrad>& ps) {
  m.clear();
  v.clear();
  for (const auto& p : ps) {
    m.emplace_back(p.p->rows, p.p->cols);
    v.emplace_back(p.p->rows, p.p->cols);
  }
  t = 0;
}

void adam_step(std::vector<ParamGrad>& params, AdamState& st) {
  require(params.size() == st.m.size(), "adam_step: state not initialized for these parameters");
  st.t += 1;
  const double bc1 = 1.0 - std::pow(st.beta1, static_cast<double>(st.t));
  const double bc2 = 1.0 - std::pow(st.beta2, static_cast<double>(st.t));
  for (size_t i = 0; i < params.size(); ++i) {
    Tensor2& p = *params[i].p;
    Tensor2& g = *params[i].g;
    require(p.same_shape(st.m[i]), "adam_step: moment buffer shape mismatch");
    if (!g.all_finite())
      throw std::runtime_error("adam_step: non-finite gradient in " + params[i].name);
    for (size_t j = 0; j < p.data.size(); ++j) {
      double gj = g.data[j];
      st.m[i].data[j] = st.beta1 * st.m[i].data[j] + (1.0 - st.beta1) * gj;
      st.v[i].data[j] = st.beta2 * st.v[i].data[j] + (1.0 - st.beta2) * gj * gj;
      double mhat = st.m[i].data[j] / bc1;
      double vhat = st.v[i].data[j] / bc2;
      p.data[j] -= st.lr * mhat / (std::sqrt(vhat) + st.eps);
    }
  }
}

void soft_update_params(std::vector<ParamGrad> target, std::vector<ParamGrad> source, double rho) {
  require(target.size() == source.size(), "soft_update: parameter lists differ");
  for (size_t i = 0; i < target.size(); ++i) {
    Tensor2& t = *target[i].p;
    const Tensor2& s = *source[i].p;
    require(t.same_shape(s), "soft_update: shape mismatch");
    for (size_t j = 0; j < t.data.size(); ++j)
      t.data[j] = (1.0 - rho) * t.data[j] + rho * s.data[j];
  }
}

void copy_params(std::vector<ParamGrad> dst, std::vector<ParamGrad> src) {
  require(dst.size() == src.size(), "copy_params: parameter lists differ");
  for (size_t i = 0; i < dst.size(); ++i) {
    require(dst[i].p->same_shape(*src[i].p), "copy_params: shape mismatch");
    dst[i].p->data = src[i].p->data;
  }
}

bool params_bitwise_equal(std::vector<ParamGrad> a, std::vector<ParamGrad> b) {
  if (a.size() != b.size()) return false;
  for (size_t i = 0; i < a.size(); ++i) {
    if (!a[i].p->same_shape(*b[i].p)) return false;
    if (std::memcmp(a[i].p->data.data(), b[i].p->data.data(),
                    a[i].p->data.size() * sizeof(double)) != 0)
      return false;
  }
  return true;
}

}  // namespace emc
