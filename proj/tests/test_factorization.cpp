#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "emc/factorization.hpp"

using namespace emc;

TEST_CASE("linear mixing is plain summation") {
  CHECK(mix_linear({1.0, 2.0, 3.0}) == 6.0);
  CHECK(mix_linear({0.0, 0.0}) == 0.0);
  CHECK(mix_linear({-1.5, 0.5}) == -1.0);
}

TEST_CASE("greedy joint action with lowest-index tie break") {
  CHECK(greedy_joint_action({{0.0, 5.0}, {3.0, 1.0}}) == std::vector<int>{1, 0});
  CHECK(greedy_joint_action({{2.0, 2.0, 2.0}}) == std::vector<int>{0});
}

TEST_CASE("IGM exactness for the linear mixer by exhaustive enumeration") {
  Rng rng(5);
  for (int trial = 0; trial < 2000; ++trial) {
    int n = 1 + rng.uniform_int(4);
    int actions = 2 + rng.uniform_int(5);
    std::vector<std::vector<double>> q(n, std::vector<double>(actions));
    for (auto& qi : q)
      for (double& v : qi) v = rng.normal();

    auto joint = greedy_joint_action(q);
    double greedy_value = 0.0;
    for (int i = 0; i < n; ++i) greedy_value += q[i][joint[i]];

    // brute force over all joint actions
    double best = -1e300;
    std::vector<int> idx(n, 0);
    for (;;) {
      double total = 0.0;
      for (int i = 0; i < n; ++i) total += q[i][idx[i]];
      best = std::max(best, total);
      int d = 0;
      while (d < n && idx[d] == actions - 1) idx[d++] = 0;
      if (d == n) break;
      ++idx[d];
    }
    CHECK(greedy_value == best);
  }
}

TEST_CASE("monotonic mixer reduces to summation under identity hyper outputs") {
  Rng rng(7);
  const int n = 3, sw = 4, hidden = 8;
  MonotonicMixer m = MonotonicMixer::make(n, sw, hidden, rng);
  // force the hyper-nets to constant outputs: W1 = identity pattern, w2 = unit
  // weights on the first n rows, zero biases
  m.hyper_w1.w.zero();
  m.hyper_w1.b.zero();
  m.hyper_b1.w.zero();
  m.hyper_b1.b.zero();
  m.hyper_w2.w.zero();
  m.hyper_w2.b.zero();
  m.hyper_b2.w.zero();
  m.hyper_b2.b.zero();
  for (int i = 0; i < n; ++i) {
    m.hyper_w1.b(0, i * n + i) = 1.0;
    m.hyper_w2.b(0, i) = 1.0;
  }
  std::vector<double> state = {0.1, -0.3, 0.5, 0.9};
  CHECK(m.mix({1.0, -2.0, 0.25}, state) == doctest::Approx(-0.75).epsilon(1e-14));
  CHECK(m.mix({0.0, 0.0, 0.0}, state) == 0.0);
}

TEST_CASE("monotonic mixer: zero q-values give the state-dependent bias") {
  Rng rng(8);
  const int n = 2, sw = 3, hidden = 5;
  MonotonicMixer m = MonotonicMixer::make(n, sw, hidden, rng);
  std::vector<double> state = {0.4, -1.2, 2.0};
  Tensor2 s(1, sw);
  s.data = state;
  Tensor2 b1 = m.hyper_b1.forward(s);
  Tensor2 w2 = m.hyper_w2.forward(s);
  Tensor2 b2 = m.hyper_b2.forward(s);
  double expected = b2(0, 0);
  for (int j = 0; j < hidden; ++j) expected += std::fabs(w2(0, j)) * b1(0, j);
  CHECK(m.mix({0.0, 0.0}, state) == doctest::Approx(expected).epsilon(1e-14));
}

TEST_CASE("monotonic mixer never decreases under per-agent improvements") {
  Rng rng(9);
  const int n = 4, sw = 5;
  MonotonicMixer m = MonotonicMixer::make(n, sw, 32, rng);
  Rng data_rng(10);
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<double> q(n), s(sw);
    for (double& v : q) v = data_rng.normal();
    for (double& v : s) v = data_rng.normal();
    double base = m.mix(q, s);
    for (int i = 0; i < n; ++i) {
      auto bumped = q;
      bumped[i] += 1e-3;
      CHECK(m.mix(bumped, s) >= base);
    }
  }
}

TEST_CASE("monotonic mixer backward matches finite differences") {
  Rng rng(11);
  const int n = 3, sw = 4, hidden = 6, B = 2;
  MonotonicMixer m = MonotonicMixer::make(n, sw, hidden, rng);
  Tensor2 q(B, n), s(B, sw), coeff(B, 1);
  Rng data_rng(12);
  for (double& v : q.data) v = data_rng.normal();
  for (double& v : s.data) v = data_rng.normal();
  for (double& v : coeff.data) v = data_rng.normal();

  auto loss = [&]() {
    Tensor2 out = m.forward(q, s);
    double acc = 0.0;
    for (int b = 0; b < B; ++b) acc += coeff(b, 0) * out(b, 0);
    return acc;
  };

  MonotonicMixer::Cache cache;
  m.forward(q, s, &cache);
  m.zero_grads();
  Tensor2 dq;
  m.backward(coeff, cache, dq);

  const double h = 1e-5;
  // input gradients
  for (int b = 0; b < B; ++b)
    for (int i = 0; i < n; ++i) {
      double saved = q(b, i);
      q(b, i) = saved + h;
      double up = loss();
      q(b, i) = saved - h;
      double down = loss();
      q(b, i) = saved;
      double fd = (up - down) / (2 * h);
      CHECK(std::fabs(dq(b, i) - fd) / std::max({std::fabs(fd), std::fabs(dq(b, i)), 1e-3}) <
            1e-4);
    }
  // hyper-net parameter gradients
  for (auto& pg : m.params()) {
    for (size_t j = 0; j < pg.p->data.size(); ++j) {
      double saved = pg.p->data[j];
      pg.p->data[j] = saved + h;
      double up = loss();
      pg.p->data[j] = saved - h;
      double down = loss();
      pg.p->data[j] = saved;
      double fd = (up - down) / (2 * h);
      double an = pg.g->data[j];
      CHECK(std::fabs(an - fd) / std::max({std::fabs(fd), std::fabs(an), 1e-3}) < 1e-4);
    }
  }
}

TEST_CASE("mixer kind parsing") {
  CHECK(mixer_kind_from_string("linear-sum") == MixerKind::LinearSum);
  CHECK(mixer_kind_from_string("vdn") == MixerKind::LinearSum);
  CHECK(mixer_kind_from_string("monotonic") == MixerKind::Monotonic);
  CHECK_THROWS_AS(mixer_kind_from_string("attention"), std::invalid_argument);
  CHECK(to_string(MixerKind::Monotonic) == "monotonic");
}

TEST_CASE("mixer dimension mismatch is fatal") {
  Rng rng(13);
  MonotonicMixer m = MonotonicMixer::make(2, 3, 4, rng);
  CHECK_THROWS_AS(m.mix({1.0, 2.0}, {0.0}), std::invalid_argument);
  CHECK_THROWS_AS(m.mix({1.0}, {0.0, 0.0, 0.0}), std::invalid_argument);
}
