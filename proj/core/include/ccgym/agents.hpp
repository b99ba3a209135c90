#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ccgym/nnkit.hpp"
#include "ccgym/rng.hpp"

namespace ccgym {

enum class AgentKind { kNone, kReinforce, kPpo, kDdpg };

std::string_view to_string(AgentKind kind);
AgentKind parse_agent(std::string_view name);

struct ReinforceConfig {
  double lr = 1e-4;
  double gamma = 0.99;
  std::vector<int> hidden{256, 256};
  nn::Activation activation = nn::Activation::kTanh;
  double init_log_std = std::log(0.3);
};

struct PpoConfig {
  bool use_gae = true;
  double gae_lambda = 1.0;
  double kl_coeff = 0.2;
  int train_batch_size = 4000;
  int minibatch_size = 128;
  int num_sgd_iter = 30;
  double lr = 5e-5;
  double vf_loss_coeff = 1.0;
  double entropy_coeff = 0.0;
  double clip_param = 0.3;
  double kl_target = 0.01;
  double gamma = 0.99;
  std::vector<int> hidden{256, 256};
  nn::Activation activation = nn::Activation::kTanh;
  double init_log_std = std::log(0.3);
};

struct DdpgConfig {
  double ou_theta = 0.15;
  double ou_sigma = 0.2;
  double noise_scale = 1.0;
  double tau = 1e-3;
  int target_update_every = 1;  // updates between soft target updates
  bool prioritized_replay = false;
  std::vector<int> actor_hidden{400, 300};
  nn::Activation actor_activation = nn::Activation::kRelu;
  std::vector<int> critic_hidden{400, 300};
  nn::Activation critic_activation = nn::Activation::kRelu;
  double actor_lr = 1e-4;
  double critic_lr = 1e-3;
  double weight_decay = 1e-2;
  std::string critic_loss = "square";
  double gamma = 0.99;
  int buffer_size = 100'000;
  int batch_size = 64;
  int warmup = 1000;
  double final_layer_init = 3e-3;
  double input_shift = 0.5;  // subtracted from every state feature
};

struct AgentConfig {
  AgentKind kind = AgentKind::kNone;
  ReinforceConfig reinforce;
  PpoConfig ppo;
  DdpgConfig ddpg;
};

/// One environment transition as the agent sees it. `raw_action` is what
/// act() returned; `applied_action` is the clamped action the env used.
struct StepSample {
  nn::Vec state;
  nn::Vec raw_action;
  nn::Vec applied_action;
  double reward = 0.0;
  nn::Vec next_state;
  /// Horizon reached. The task is continuing, so this is a truncation.
  bool done = false;
};

class Agent {
 public:
  virtual ~Agent() = default;
  virtual AgentKind kind() const = 0;
  /// Raw action; the environment clamps it.
  virtual nn::Vec act(const nn::Vec& state, bool explore) = 0;
  virtual void observe(const StepSample& sample) = 0;
};

std::unique_ptr<Agent> make_agent(const AgentConfig& config, int state_dim,
                                  int action_dim, std::uint64_t seed);

/// Pins every host at full rate; used for the transport baselines.
class NoneAgent final : public Agent {
 public:
  explicit NoneAgent(int action_dim) : action_dim_(action_dim) {}
  AgentKind kind() const override { return AgentKind::kNone; }
  nn::Vec act(const nn::Vec& state, bool explore) override;
  void observe(const StepSample&) override {}

 private:
  int action_dim_;
};

/// Diagonal Gaussian with an MLP mean and a state-independent log_std.
struct GaussianPolicy {
  nn::Mlp mean_net;
  nn::Vec log_std;

  GaussianPolicy() = default;
  GaussianPolicy(int state_dim, int action_dim, std::span<const int> hidden,
                 nn::Activation activation, double init_log_std, Rng& rng);

  nn::Vec mean(const nn::Vec& state) const { return mean_net.forward(state); }
  nn::Vec sample(const nn::Vec& state, Rng& rng) const;
  double logprob(const nn::Vec& state, const nn::Vec& action) const;
};

struct PolicyGrads {
  nn::MlpGrads mean_net;
  nn::Vec log_std;
};

/// Backpropagates per-sample dL/dmean (action_dim x B) and summed dL/dlog_std
/// through the mean network for the batch of states (state_dim x B).
PolicyGrads policy_backward(const GaussianPolicy& policy, const nn::Mat& states,
                            const nn::Mat& d_mean, const nn::Vec& d_log_std);

struct Trajectory {
  std::vector<nn::Vec> states;
  std::vector<nn::Vec> actions;  // raw sampled actions
  std::vector<double> rewards;
};

/// Discounted reward-to-go G_t = sum_k gamma^k r_{t+k}.
std::vector<double> discounted_returns(std::span<const double> rewards,
                                       double gamma);

/// Gradient of the loss -sum_t log pi(a_t | s_t) G_t, summed over the
/// trajectories.
PolicyGrads reinforce_gradient(const GaussianPolicy& policy,
                               std::span<const Trajectory> batch, double gamma);

struct GaeResult {
  std::vector<double> advantages;
  std::vector<double> returns;
};

/// delta_t = r_t + gamma V_{t+1} (1 - done_t) - V_t and
/// A_t = delta_t + gamma lambda (1 - done_t) A_{t+1}. `values` carries the
/// bootstrap value at index T.
GaeResult compute_gae(std::span<const double> rewards,
                      std::span<const double> values,
                      std::span<const std::uint8_t> dones, double gamma,
                      double lambda);

class ReinforceAgent final : public Agent {
 public:
  ReinforceAgent(const ReinforceConfig& config, int state_dim, int action_dim,
                 std::uint64_t seed);
  AgentKind kind() const override { return AgentKind::kReinforce; }
  nn::Vec act(const nn::Vec& state, bool explore) override;
  void observe(const StepSample& sample) override;

  /// Applies one gradient step for a finished episode.
  void update(const Trajectory& episode);

  const GaussianPolicy& policy() const { return policy_; }
  GaussianPolicy& policy() { return policy_; }

 private:
  ReinforceConfig config_;
  GaussianPolicy policy_;
  nn::Adam optimizer_;
  Rng rng_;
  Trajectory episode_;
};

/// A PPO training sample with everything recorded at collection time.
struct PpoSample {
  nn::Vec state;
  nn::Vec action;
  nn::Vec mean_old;
  nn::Vec log_std_old;
  double logprob_old = 0.0;
  double advantage = 0.0;
  double value_target = 0.0;
};

struct PpoLossTerms {
  double surrogate = 0.0;  // -min(r A, clip(r) A), batch mean
  double kl = 0.0;
  double value = 0.0;
  double entropy = 0.0;
  double total = 0.0;
};

struct PpoDiagnostics {
  double mean_kl = 0.0;
  double kl_coeff = 0.0;
  double last_loss = 0.0;
  int minibatches = 0;
};

class PpoAgent final : public Agent {
 public:
  PpoAgent(const PpoConfig& config, int state_dim, int action_dim,
           std::uint64_t seed);
  AgentKind kind() const override { return AgentKind::kPpo; }
  nn::Vec act(const nn::Vec& state, bool explore) override;
  void observe(const StepSample& sample) override;

  /// Loss over `batch` and, when requested, its gradients.
  PpoLossTerms loss(std::span<const PpoSample* const> batch,
                    PolicyGrads* policy_grads, nn::MlpGrads* value_grads) const;

  /// 30 epochs of minibatch SGD over the batch, then KL-coefficient
  /// adaptation. Throws if the batch is smaller than one minibatch.
  PpoDiagnostics update(std::vector<PpoSample> batch);

  double kl_coeff() const { return kl_coeff_; }
  const GaussianPolicy& policy() const { return policy_; }
  GaussianPolicy& policy() { return policy_; }
  const nn::Mlp& value_net() const { return value_net_; }
  nn::Mlp& value_net() { return value_net_; }
  const PpoDiagnostics& last_update() const { return diag_; }

  struct Pending {
    nn::Vec state;
    nn::Vec action;
    nn::Vec mean_old;
    nn::Vec log_std_old;
    double logprob_old;
    double value;
    double reward;
    bool done;
  };
  const std::vector<Pending>& pending() const { return pending_; }

 private:
  void train_on_pending(const nn::Vec& bootstrap_state);

  PpoConfig config_;
  GaussianPolicy policy_;
  nn::Mlp value_net_;
  nn::Adam optimizer_;
  Rng rng_;
  double kl_coeff_;
  std::vector<Pending> pending_;
  // act() output awaiting its observe()
  nn::Vec last_mean_;
  double last_logprob_ = 0.0;
  double last_value_ = 0.0;
  PpoDiagnostics diag_;
};

class DdpgAgent final : public Agent {
 public:
  DdpgAgent(const DdpgConfig& config, int state_dim, int action_dim,
            std::uint64_t seed);
  AgentKind kind() const override { return AgentKind::kDdpg; }
  nn::Vec act(const nn::Vec& state, bool explore) override;
  void observe(const StepSample& sample) override;

  /// One critic + actor step on a replay sample; returns false (no-op) while
  /// the buffer holds fewer than `warmup` transitions.
  bool update();
  /// One step on an explicit batch, bypassing replay.
  void update_on(std::span<const nn::Transition* const> batch);

  /// r + gamma Q'(s', mu'(s')) (1 - done) for each sample.
  nn::Vec critic_targets(std::span<const nn::Transition* const> batch) const;
  double critic_value(const nn::Vec& state, const nn::Vec& action) const;

  nn::Mlp& actor() { return actor_; }
  nn::Mlp& critic() { return critic_; }
  nn::Mlp& target_actor() { return target_actor_; }
  nn::Mlp& target_critic() { return target_critic_; }
  const nn::ReplayBuffer& replay() const { return replay_; }
  nn::OuNoise& noise() { return noise_; }
  std::int64_t updates() const { return updates_; }

 private:
  nn::Vec shifted(const nn::Vec& state) const;

  DdpgConfig config_;
  int state_dim_;
  int action_dim_;
  nn::Mlp actor_, critic_, target_actor_, target_critic_;
  nn::Adam actor_opt_, critic_opt_;
  nn::ReplayBuffer replay_;
  nn::OuNoise noise_;
  Rng rng_;
  Rng noise_rng_;
  std::int64_t updates_ = 0;
};

}  // namespace ccgym
