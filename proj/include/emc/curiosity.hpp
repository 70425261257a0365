#pragma once

#include <string>
#include <vector>

#include "emc/episode.hpp"
#include "emc/nn.hpp"

namespace emc {

enum class CuriosityKind { None, Emc, Td, Ind, GlobalRnd, LocalRnd };

CuriosityKind curiosity_kind_from_string(const std::string& s);
std::string to_string(CuriosityKind k);

// Piecewise-constant intrinsic-reward scale: eta0 * factor^floor(t / period).
double eta_at(long long env_steps, double eta0, long long period = 200000, double factor = 0.9);

// Mean per-agent L2 distance between predictor and target action-value
// vectors at one timestep.
double intrinsic_emc(const std::vector<std::vector<double>>& predictor,
                     const std::vector<std::vector<double>>& target);

// Normalized magnitude of the factored one-step TD error.
double intrinsic_td(double q_tot, double r_ext, double target_max_next, double gamma,
                    int n_agents, bool terminal);

// Same form as intrinsic_emc with the learner utilities in the predictor slot.
double intrinsic_ind(const std::vector<std::vector<double>>& utilities,
                     const std::vector<std::vector<double>>& target);

// L2 distance between a fixed random embedding and its trained prediction.
double intrinsic_rnd(const std::vector<double>& fixed_out, const std::vector<double>& pred_out);

struct CuriosityConfig {
  CuriosityKind kind = CuriosityKind::Emc;
  double rho = 0.05;       // soft-update weight
  double eta0 = 0.05;      // initial intrinsic scale
  double gamma = 0.99;     // used by the extrinsic learner and the TD variant
  double lr = 5e-4;
  int hidden = 64;
  int rnd_hidden = 64;
  int rnd_out = 16;
};

// The exploration module: a linear-factorized extrinsic learner (trained on
// environment rewards only), soft-updated targets, predictors regressing on
// the targets, and the intrinsic-reward variants used in the ablations. Its
// parameters are fully disjoint from the inference module's.
class CuriosityModule {
 public:
  CuriosityModule(const CuriosityConfig& cfg, int n_agents, int obs_width, int state_width,
                  int n_actions, Rng& rng);

  CuriosityKind kind() const { return cfg_.kind; }
  double eta(long long env_steps) const { return eta_at(env_steps, cfg_.eta0); }

  // Raw (unscaled) intrinsic reward per step of a finished episode.
  std::vector<double> episode_intrinsic(const EpisodeRecord& ep) const;

  struct TrainMetrics {
    double loss_ext = 0.0;
    double loss_pred = 0.0;
  };

  // One update: extrinsic TD step, predictor regression step, soft update.
  TrainMetrics train(const Batch& batch);

  // Exposed pieces (also used by tests).
  double train_extrinsic(const Batch& batch);
  double train_predictors(const Batch& batch);
  void soft_update_targets();

  std::vector<AgentNet>& ext_nets() { return ext_; }
  std::vector<AgentNet>& target_nets() { return target_; }
  std::vector<AgentNet>& predictor_nets() { return pred_; }
  Mlp& rnd_fixed() { return rnd_fixed_; }
  Mlp& rnd_predictor() { return rnd_pred_; }

  std::vector<ParamGrad> all_params();

 private:
  double train_rnd(const Batch& batch);

  CuriosityConfig cfg_;
  int n_agents_ = 0, obs_w_ = 0, state_w_ = 0, n_actions_ = 0;

  std::vector<AgentNet> ext_, target_, pred_;
  AdamState opt_ext_, opt_pred_;

  // global-rnd operates on the state through feed-forward nets; local-rnd
  // embeds each agent's observation history through recurrent nets
  Mlp rnd_fixed_, rnd_pred_;
  std::vector<AgentNet> lrnd_fixed_, lrnd_pred_;
  AdamState opt_rnd_;
};

}  // namespace emc
