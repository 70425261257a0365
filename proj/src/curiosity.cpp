#include "emc/curiosity.hpp"

#include <cmath>
#include <stdexcept>

#include "emc/factorization.hpp"

namespace emc {

CuriosityKind curiosity_kind_from_string(const std::string& s) {
  if (s == "none") return CuriosityKind::None;
  if (s == "emc") return CuriosityKind::Emc;
  if (s == "td") return CuriosityKind::Td;
  if (s == "ind") return CuriosityKind::Ind;
  if (s == "global-rnd") return CuriosityKind::GlobalRnd;
  if (s == "local-rnd") return CuriosityKind::LocalRnd;
  throw std::invalid_argument("unknown curiosity kind: " + s);
}

std::string to_string(CuriosityKind k) {
  switch (k) {
    case CuriosityKind::None: return "none";
    case CuriosityKind::Emc: return "emc";
    case CuriosityKind::Td: return "td";
    case CuriosityKind::Ind: return "ind";
    case CuriosityKind::GlobalRnd: return "global-rnd";
    case CuriosityKind::LocalRnd: return "local-rnd";
  }
  return "none";
}

double eta_at(long long env_steps, double eta0, long long period, double factor) {
  require(env_steps >= 0, "eta_at: negative step count");
  long long n = env_steps / period;
  if (n > 4096) return eta0 * std::pow(factor, static_cast<double>(n));
  double eta = eta0;
  for (long long i = 0; i < n; ++i) eta *= factor;
  return eta;
}

double intrinsic_emc(const std::vector<std::vector<double>>& predictor,
                     const std::vector<std::vector<double>>& target) {
  require(predictor.size() == target.size() && !predictor.empty(),
          "intrinsic_emc: agent count mismatch");
  double sum = 0.0;
  for (size_t i = 0; i < predictor.size(); ++i) {
    require(predictor[i].size() == target[i].size(), "intrinsic_emc: action width mismatch");
    double d2 = 0.0;
    for (size_t a = 0; a < predictor[i].size(); ++a) {
      double d = predictor[i][a] - target[i][a];
      d2 += d * d;
    }
    sum += std::sqrt(d2);
  }
  return sum / static_cast<double>(predictor.size());
}

double intrinsic_td(double q_tot, double r_ext, double target_max_next, double gamma,
                    int n_agents, bool terminal) {
  double y = terminal ? r_ext : r_ext + gamma * target_max_next;
  return std::fabs(q_tot - y) / static_cast<double>(n_agents);
}

double intrinsic_ind(const std::vector<std::vector<double>>& utilities,
                     const std::vector<std::vector<double>>& target) {
  return intrinsic_emc(utilities, target);
}

double intrinsic_rnd(const std::vector<double>& fixed_out, const std::vector<double>& pred_out) {
  require(fixed_out.size() == pred_out.size(), "intrinsic_rnd: width mismatch");
  double d2 = 0.0;
  for (size_t i = 0; i < fixed_out.size(); ++i) {
    double d = fixed_out[i] - pred_out[i];
    d2 += d * d;
  }
  return std::sqrt(d2);
}

CuriosityModule::CuriosityModule(const CuriosityConfig& cfg, int n_agents, int obs_width,
                                 int state_width, int n_actions, Rng& rng)
    : cfg_(cfg), n_agents_(n_agents), obs_w_(obs_width), state_w_(state_width),
      n_actions_(n_actions) {
  require(cfg.rho > 0.0 && cfg.rho <= 1.0, "curiosity: rho must be in (0,1]");
  require(cfg.eta0 > 0.0, "curiosity: eta0 must be positive");

  const bool needs_q = cfg_.kind == CuriosityKind::Emc || cfg_.kind == CuriosityKind::Td ||
                       cfg_.kind == CuriosityKind::Ind;
  if (needs_q) {
    for (int i = 0; i < n_agents; ++i)
      ext_.push_back(AgentNet::make(obs_width, cfg_.hidden, n_actions, rng));
    target_ = ext_;  // hard copy at start
    std::vector<ParamGrad> ps;
    for (int i = 0; i < n_agents; ++i)
      for (auto& p : ext_[i].params("cur.ext" + std::to_string(i))) ps.push_back(p);
    opt_ext_.lr = cfg_.lr;
    opt_ext_.init(ps);
    if (cfg_.kind == CuriosityKind::Emc) {
      for (int i = 0; i < n_agents; ++i)
        pred_.push_back(AgentNet::make(obs_width, cfg_.hidden, n_actions, rng));
      std::vector<ParamGrad> pp;
      for (int i = 0; i < n_agents; ++i)
        for (auto& p : pred_[i].params("cur.pred" + std::to_string(i))) pp.push_back(p);
      opt_pred_.lr = cfg_.lr;
      opt_pred_.init(pp);
    }
  } else if (cfg_.kind == CuriosityKind::GlobalRnd) {
    rnd_fixed_ = Mlp::make({state_width, cfg_.rnd_hidden, cfg_.rnd_out}, Activation::Relu, rng);
    rnd_pred_ = Mlp::make({state_width, cfg_.rnd_hidden, cfg_.rnd_out}, Activation::Relu, rng);
    opt_rnd_.lr = cfg_.lr;
    opt_rnd_.init(rnd_pred_.params("cur.rnd"));
  } else if (cfg_.kind == CuriosityKind::LocalRnd) {
    for (int i = 0; i < n_agents; ++i) {
      lrnd_fixed_.push_back(AgentNet::make(obs_width, cfg_.rnd_hidden, cfg_.rnd_out, rng));
      lrnd_pred_.push_back(AgentNet::make(obs_width, cfg_.rnd_hidden, cfg_.rnd_out, rng));
    }
    std::vector<ParamGrad> pp;
    for (int i = 0; i < n_agents; ++i)
      for (auto& p : lrnd_pred_[i].params("cur.lrnd" + std::to_string(i))) pp.push_back(p);
    opt_rnd_.lr = cfg_.lr;
    opt_rnd_.init(pp);
  }
}

std::vector<double> CuriosityModule::episode_intrinsic(const EpisodeRecord& ep) const {
  const int T = ep.length();
  std::vector<double> r(T, 0.0);
  switch (cfg_.kind) {
    case CuriosityKind::None:
      break;
    case CuriosityKind::Emc: {
      std::vector<std::vector<std::vector<double>>> pq(n_agents_), tq(n_agents_);
      for (int i = 0; i < n_agents_; ++i) {
        std::vector<std::vector<double>> oi(T);
        for (int t = 0; t < T; ++t) oi[t] = ep.obs[t][i];
        pq[i] = pred_[i].forward_single(oi);
        tq[i] = target_[i].forward_single(oi);
      }
      for (int t = 0; t < T; ++t) {
        std::vector<std::vector<double>> p(n_agents_), q(n_agents_);
        for (int i = 0; i < n_agents_; ++i) {
          p[i] = pq[i][t];
          q[i] = tq[i][t];
        }
        r[t] = intrinsic_emc(p, q);
      }
      break;
    }
    case CuriosityKind::Ind:
    case CuriosityKind::Td: {
      std::vector<std::vector<std::vector<double>>> eq(n_agents_), tq(n_agents_);
      for (int i = 0; i < n_agents_; ++i) {
        std::vector<std::vector<double>> oi(T + 1);
        for (int t = 0; t <= T; ++t) oi[t] = ep.obs[t][i];
        eq[i] = ext_[i].forward_single(oi);
        tq[i] = target_[i].forward_single(oi);
      }
      for (int t = 0; t < T; ++t) {
        if (cfg_.kind == CuriosityKind::Ind) {
          std::vector<std::vector<double>> u(n_agents_), q(n_agents_);
          for (int i = 0; i < n_agents_; ++i) {
            u[i] = eq[i][t];
            q[i] = tq[i][t];
          }
          r[t] = intrinsic_ind(u, q);
        } else {
          double q_tot = 0.0, max_next = 0.0;
          for (int i = 0; i < n_agents_; ++i) {
            q_tot += eq[i][t][ep.actions[t][i]];
            max_next += tq[i][t + 1][argmax_lowest(tq[i][t + 1])];
          }
          r[t] = intrinsic_td(q_tot, ep.reward_ext[t], max_next, cfg_.gamma, n_agents_,
                              ep.done[t] != 0);
        }
      }
      break;
    }
    case CuriosityKind::GlobalRnd: {
      for (int t = 0; t < T; ++t) {
        Tensor2 s(1, state_w_);
        s.data = ep.state[t];
        Tensor2 f = rnd_fixed_.forward(s);
        Tensor2 p = rnd_pred_.forward(s);
        r[t] = intrinsic_rnd(f.data, p.data);
      }
      break;
    }
    case CuriosityKind::LocalRnd: {
      std::vector<std::vector<std::vector<double>>> fe(n_agents_), pe(n_agents_);
      for (int i = 0; i < n_agents_; ++i) {
        std::vector<std::vector<double>> oi(T);
        for (int t = 0; t < T; ++t) oi[t] = ep.obs[t][i];
        fe[i] = lrnd_fixed_[i].forward_single(oi);
        pe[i] = lrnd_pred_[i].forward_single(oi);
      }
      for (int t = 0; t < T; ++t) {
        double sum = 0.0;
        for (int i = 0; i < n_agents_; ++i) sum += intrinsic_rnd(fe[i][t], pe[i][t]);
        r[t] = sum / n_agents_;
      }
      break;
    }
  }
  return r;
}

double CuriosityModule::train_extrinsic(const Batch& batch) {
  if (ext_.empty()) return 0.0;
  const int T = batch.t_max, B = batch.b;

  double mask_total = 0.0;
  for (int t = 0; t < T; ++t)
    for (int b = 0; b < B; ++b) mask_total += batch.mask[t][b];
  if (mask_total <= 0.0) return 0.0;

  for (auto& net : ext_) net.zero_grads();

  std::vector<AgentNet::SeqCache> caches(n_agents_);
  std::vector<std::vector<Tensor2>> q(n_agents_);       // online, steps 0..T-1
  std::vector<std::vector<Tensor2>> qt(n_agents_);      // target, steps 0..T
  for (int i = 0; i < n_agents_; ++i) {
    std::vector<Tensor2> oi(T), oti(T + 1);
    for (int t = 0; t < T; ++t) oi[t] = batch.obs[t][i];
    for (int t = 0; t <= T; ++t) oti[t] = batch.obs[t][i];
    Tensor2 h0(B, ext_[i].hidden_size());
    q[i] = ext_[i].forward_sequence(oi, h0, nullptr, &caches[i]);
    Tensor2 th0(B, target_[i].hidden_size());
    qt[i] = target_[i].forward_sequence(oti, th0);
  }

  double loss = 0.0;
  std::vector<std::vector<Tensor2>> dq(n_agents_);
  for (int i = 0; i < n_agents_; ++i) {
    dq[i].assign(T, Tensor2(B, n_actions_));
  }
  for (int t = 0; t < T; ++t) {
    for (int b = 0; b < B; ++b) {
      if (batch.mask[t][b] == 0.0) continue;
      double q_tot = 0.0;
      for (int i = 0; i < n_agents_; ++i) q_tot += q[i][t](b, batch.action_of(t, b, i));
      double max_next = 0.0;
      for (int i = 0; i < n_agents_; ++i) {
        double best = qt[i][t + 1](b, 0);
        for (int a = 1; a < n_actions_; ++a) best = std::max(best, qt[i][t + 1](b, a));
        max_next += best;
      }
      double y = batch.r_ext[t][b] + cfg_.gamma * (1.0 - batch.done[t][b]) * max_next;
      double err = q_tot - y;
      loss += err * err;
      double g = 2.0 * err / mask_total;
      for (int i = 0; i < n_agents_; ++i) dq[i][t](b, batch.action_of(t, b, i)) = g;
    }
  }
  loss /= mask_total;

  std::vector<ParamGrad> ps;
  for (int i = 0; i < n_agents_; ++i) {
    ext_[i].backward_sequence(caches[i], dq[i]);
    for (auto& p : ext_[i].params("cur.ext" + std::to_string(i))) ps.push_back(p);
  }
  adam_step(ps, opt_ext_);
  return loss;
}

double CuriosityModule::train_predictors(const Batch& batch) {
  if (cfg_.kind == CuriosityKind::GlobalRnd || cfg_.kind == CuriosityKind::LocalRnd)
    return train_rnd(batch);
  if (pred_.empty()) return 0.0;
  const int T = batch.t_max, B = batch.b;

  double mask_total = 0.0;
  for (int t = 0; t < T; ++t)
    for (int b = 0; b < B; ++b) mask_total += batch.mask[t][b];
  if (mask_total <= 0.0) return 0.0;
  const double norm = mask_total * n_agents_ * n_actions_;

  for (auto& net : pred_) net.zero_grads();

  double loss = 0.0;
  std::vector<ParamGrad> ps;
  for (int i = 0; i < n_agents_; ++i) {
    std::vector<Tensor2> oi(T);
    for (int t = 0; t < T; ++t) oi[t] = batch.obs[t][i];
    AgentNet::SeqCache cache;
    Tensor2 h0(B, pred_[i].hidden_size());
    auto qp = pred_[i].forward_sequence(oi, h0, nullptr, &cache);
    Tensor2 th0(B, target_[i].hidden_size());
    auto qt = target_[i].forward_sequence(oi, th0);

    std::vector<Tensor2> dq(T, Tensor2(B, n_actions_));
    for (int t = 0; t < T; ++t) {
      for (int b = 0; b < B; ++b) {
        if (batch.mask[t][b] == 0.0) continue;
        for (int a = 0; a < n_actions_; ++a) {
          double err = qp[t](b, a) - qt[t](b, a);
          loss += err * err;
          dq[t](b, a) = 2.0 * err / norm;
        }
      }
    }
    pred_[i].backward_sequence(cache, dq);
    for (auto& p : pred_[i].params("cur.pred" + std::to_string(i))) ps.push_back(p);
  }
  loss /= norm;
  adam_step(ps, opt_pred_);
  return loss;
}

double CuriosityModule::train_rnd(const Batch& batch) {
  const int T = batch.t_max, B = batch.b;
  double mask_total = 0.0;
  for (int t = 0; t < T; ++t)
    for (int b = 0; b < B; ++b) mask_total += batch.mask[t][b];
  if (mask_total <= 0.0) return 0.0;

  double loss = 0.0;
  std::vector<ParamGrad> ps;
  if (cfg_.kind == CuriosityKind::GlobalRnd) {
    rnd_pred_.zero_grads();
    const double norm = mask_total * cfg_.rnd_out;
    // stack all masked states into one batch
    for (int t = 0; t < T; ++t) {
      Mlp::Cache cache;
      Tensor2 f = rnd_fixed_.forward(batch.state[t]);
      Tensor2 p = rnd_pred_.forward(batch.state[t], &cache);
      Tensor2 dp(B, cfg_.rnd_out);
      for (int b = 0; b < B; ++b) {
        if (batch.mask[t][b] == 0.0) continue;
        for (int c = 0; c < cfg_.rnd_out; ++c) {
          double err = p(b, c) - f(b, c);
          loss += err * err;
          dp(b, c) = 2.0 * err / norm;
        }
      }
      rnd_pred_.backward(dp, cache);
    }
    loss /= norm;
    ps = rnd_pred_.params("cur.rnd");
  } else {
    const double norm = mask_total * n_agents_ * cfg_.rnd_out;
    for (int i = 0; i < n_agents_; ++i) {
      lrnd_pred_[i].zero_grads();
      std::vector<Tensor2> oi(T);
      for (int t = 0; t < T; ++t) oi[t] = batch.obs[t][i];
      AgentNet::SeqCache cache;
      Tensor2 h0(B, lrnd_pred_[i].hidden_size());
      auto pe = lrnd_pred_[i].forward_sequence(oi, h0, nullptr, &cache);
      Tensor2 fh0(B, lrnd_fixed_[i].hidden_size());
      auto fe = lrnd_fixed_[i].forward_sequence(oi, fh0);
      std::vector<Tensor2> dq(T, Tensor2(B, cfg_.rnd_out));
      for (int t = 0; t < T; ++t)
        for (int b = 0; b < B; ++b) {
          if (batch.mask[t][b] == 0.0) continue;
          for (int c = 0; c < cfg_.rnd_out; ++c) {
            double err = pe[t](b, c) - fe[t](b, c);
            loss += err * err;
            dq[t](b, c) = 2.0 * err / norm;
          }
        }
      lrnd_pred_[i].backward_sequence(cache, dq);
      for (auto& p : lrnd_pred_[i].params("cur.lrnd" + std::to_string(i))) ps.push_back(p);
    }
    loss /= norm;
  }
  adam_step(ps, opt_rnd_);
  return loss;
}

void CuriosityModule::soft_update_targets() {
  if (ext_.empty()) return;
  for (int i = 0; i < n_agents_; ++i)
    soft_update_params(target_[i].params(""), ext_[i].params(""), cfg_.rho);
}

CuriosityModule::TrainMetrics CuriosityModule::train(const Batch& batch) {
  TrainMetrics m;
  if (cfg_.kind == CuriosityKind::None) return m;
  m.loss_ext = train_extrinsic(batch);
  m.loss_pred = train_predictors(batch);
  soft_update_targets();
  if (!std::isfinite(m.loss_ext) || !std::isfinite(m.loss_pred))
    throw std::runtime_error("curiosity: non-finite training loss");
  return m;
}

std::vector<ParamGrad> CuriosityModule::all_params() {
  std::vector<ParamGrad> ps;
  auto add = [&](std::vector<AgentNet>& nets, const std::string& tag) {
    for (size_t i = 0; i < nets.size(); ++i)
      for (auto& p : nets[i].params("cur." + tag + std::to_string(i))) ps.push_back(p);
  };
  add(ext_, "ext");
  add(target_, "tgt");
  add(pred_, "pred");
  add(lrnd_fixed_, "lrndf");
  add(lrnd_pred_, "lrndp");
  for (auto& p : rnd_fixed_.params("cur.rndf")) ps.push_back(p);
  for (auto& p : rnd_pred_.params("cur.rndp")) ps.push_back(p);
  return ps;
}

}  // namespace emc
