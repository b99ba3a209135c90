#include "ccgym/agents.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "ccgym/error.hpp"

namespace ccgym {

using nn::Mat;
using nn::Vec;

std::string_view to_string(AgentKind kind) {
  switch (kind) {
    case AgentKind::kNone: return "none";
    case AgentKind::kReinforce: return "reinforce";
    case AgentKind::kPpo: return "ppo";
    case AgentKind::kDdpg: return "ddpg";
  }
  return "?";
}

AgentKind parse_agent(std::string_view name) {
  if (name == "none") return AgentKind::kNone;
  if (name == "reinforce") return AgentKind::kReinforce;
  if (name == "ppo") return AgentKind::kPpo;
  if (name == "ddpg") return AgentKind::kDdpg;
  throw ConfigError("unknown agent '" + std::string(name) + "'");
}

std::unique_ptr<Agent> make_agent(const AgentConfig& config, int state_dim,
                                  int action_dim, std::uint64_t seed) {
  switch (config.kind) {
    case AgentKind::kNone: return std::make_unique<NoneAgent>(action_dim);
    case AgentKind::kReinforce:
      return std::make_unique<ReinforceAgent>(config.reinforce, state_dim, action_dim, seed);
    case AgentKind::kPpo:
      return std::make_unique<PpoAgent>(config.ppo, state_dim, action_dim, seed);
    case AgentKind::kDdpg:
      return std::make_unique<DdpgAgent>(config.ddpg, state_dim, action_dim, seed);
  }
  throw ConfigError("unknown agent kind");
}

Vec NoneAgent::act(const Vec&, bool) { return Vec::Ones(action_dim_); }

namespace {

std::vector<int> layer_sizes(int in, std::span<const int> hidden, int out) {
  std::vector<int> sizes{in};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(out);
  return sizes;
}

std::vector<nn::Activation> layer_acts(std::size_t hidden, nn::Activation act,
                                       nn::Activation out) {
  std::vector<nn::Activation> acts(hidden, act);
  acts.push_back(out);
  return acts;
}

void check_dim(const Vec& v, int expected, const char* what) {
  if (v.size() != expected) {
    throw ArgumentError(std::string(what) + ": expected length " +
                        std::to_string(expected) + ", got " + std::to_string(v.size()));
  }
}

Mat stack_columns(std::span<const Vec> cols) {
  Mat m(cols.front().size(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t i = 0; i < cols.size(); ++i) m.col(static_cast<Eigen::Index>(i)) = cols[i];
  return m;
}

}  // namespace

GaussianPolicy::GaussianPolicy(int state_dim, int action_dim,
                               std::span<const int> hidden,
                               nn::Activation activation, double init_log_std,
                               Rng& rng) {
  const auto sizes = layer_sizes(state_dim, hidden, action_dim);
  const auto acts = layer_acts(hidden.size(), activation, nn::Activation::kIdentity);
  mean_net = nn::Mlp(sizes, acts, rng);
  log_std = Vec::Constant(action_dim, init_log_std);
}

Vec GaussianPolicy::sample(const Vec& state, Rng& rng) const {
  Vec a = mean(state);
  for (Eigen::Index i = 0; i < a.size(); ++i) a(i) += std::exp(log_std(i)) * rng.normal();
  return a;
}

double GaussianPolicy::logprob(const Vec& state, const Vec& action) const {
  return nn::gaussian_logprob(mean(state), log_std, action);
}

PolicyGrads policy_backward(const GaussianPolicy& policy, const Mat& states,
                            const Mat& d_mean, const Vec& d_log_std) {
  nn::ForwardCache cache;
  policy.mean_net.forward(states, &cache);
  return {policy.mean_net.backward(cache, d_mean), d_log_std};
}

std::vector<double> discounted_returns(std::span<const double> rewards, double gamma) {
  std::vector<double> g(rewards.size());
  double acc = 0.0;
  for (std::size_t t = rewards.size(); t-- > 0;) {
    acc = rewards[t] + gamma * acc;
    g[t] = acc;
  }
  return g;
}

PolicyGrads reinforce_gradient(const GaussianPolicy& policy,
                               std::span<const Trajectory> batch, double gamma) {
  PolicyGrads total{policy.mean_net.zero_grads(), Vec::Zero(policy.log_std.size())};
  for (const auto& traj : batch) {
    if (traj.states.empty() || traj.states.size() != traj.actions.size() ||
        traj.states.size() != traj.rewards.size()) {
      throw ArgumentError("reinforce: empty or ragged trajectory");
    }
    const auto returns = discounted_returns(traj.rewards, gamma);
    const Mat states = stack_columns(traj.states);
    const Mat means = policy.mean_net.forward(states);
    const Vec var = (2.0 * policy.log_std.array()).exp();
    Mat d_mean(means.rows(), means.cols());
    Vec d_log_std = Vec::Zero(policy.log_std.size());
    for (Eigen::Index t = 0; t < means.cols(); ++t) {
      const Vec diff = traj.actions[t] - means.col(t);
      const double g = returns[t];
      d_mean.col(t) = -g * (diff.array() / var.array()).matrix();
      d_log_std.array() -= g * (diff.array().square() / var.array() - 1.0);
    }
    PolicyGrads pg = policy_backward(policy, states, d_mean, d_log_std);
    total.mean_net += pg.mean_net;
    total.log_std += pg.log_std;
  }
  return total;
}

GaeResult compute_gae(std::span<const double> rewards, std::span<const double> values,
                      std::span<const std::uint8_t> dones, double gamma, double lambda) {
  const std::size_t T = rewards.size();
  if (values.size() != T + 1 || dones.size() != T) {
    throw ArgumentError("compute_gae: values must have length T+1 and dones length T");
  }
  GaeResult out;
  out.advantages.assign(T, 0.0);
  out.returns.assign(T, 0.0);
  double next_adv = 0.0;
  for (std::size_t t = T; t-- > 0;) {
    const double live = dones[t] ? 0.0 : 1.0;
    const double delta = rewards[t] + gamma * values[t + 1] * live - values[t];
    next_adv = delta + gamma * lambda * live * next_adv;
    out.advantages[t] = next_adv;
    out.returns[t] = next_adv + values[t];
  }
  return out;
}

// ---------------------------------------------------------------- REINFORCE

ReinforceAgent::ReinforceAgent(const ReinforceConfig& config, int state_dim,
                               int action_dim, std::uint64_t seed)
    : config_(config), optimizer_(config.lr), rng_(seed, RngStream::kAgent) {
  policy_ = GaussianPolicy(state_dim, action_dim, config_.hidden,
                           config_.activation, config_.init_log_std, rng_);
}

Vec ReinforceAgent::act(const Vec& state, bool explore) {
  check_dim(state, policy_.mean_net.input_dim(), "reinforce act");
  return explore ? policy_.sample(state, rng_) : policy_.mean(state);
}

void ReinforceAgent::observe(const StepSample& s) {
  episode_.states.push_back(s.state);
  episode_.actions.push_back(s.raw_action);
  episode_.rewards.push_back(s.reward);
  if (s.done) {
    update(episode_);
    episode_ = {};
  }
}

void ReinforceAgent::update(const Trajectory& episode) {
  PolicyGrads g = reinforce_gradient(policy_, std::span(&episode, 1), config_.gamma);
  auto blocks = nn::param_blocks(policy_.mean_net, g.mean_net);
  blocks.push_back({{policy_.log_std.data(), std::size_t(policy_.log_std.size())},
                    {g.log_std.data(), std::size_t(g.log_std.size())}});
  optimizer_.step(blocks);
}

// ---------------------------------------------------------------------- PPO

PpoAgent::PpoAgent(const PpoConfig& config, int state_dim, int action_dim,
                   std::uint64_t seed)
    : config_(config), optimizer_(config.lr), rng_(seed, RngStream::kAgent),
      kl_coeff_(config.kl_coeff) {
  if (config_.minibatch_size < 1 || config_.train_batch_size < config_.minibatch_size) {
    throw ConfigError("ppo: train batch must hold at least one minibatch");
  }
  policy_ = GaussianPolicy(state_dim, action_dim, config_.hidden,
                           config_.activation, config_.init_log_std, rng_);
  const auto sizes = layer_sizes(state_dim, config_.hidden, 1);
  const auto acts = layer_acts(config_.hidden.size(), config_.activation,
                               nn::Activation::kIdentity);
  value_net_ = nn::Mlp(sizes, acts, rng_);
}

Vec PpoAgent::act(const Vec& state, bool explore) {
  check_dim(state, policy_.mean_net.input_dim(), "ppo act");
  last_mean_ = policy_.mean(state);
  Vec a = last_mean_;
  if (explore) {
    for (Eigen::Index i = 0; i < a.size(); ++i) {
      a(i) += std::exp(policy_.log_std(i)) * rng_.normal();
    }
  }
  last_logprob_ = nn::gaussian_logprob(last_mean_, policy_.log_std, a);
  last_value_ = value_net_.forward(state)(0);
  return a;
}

void PpoAgent::observe(const StepSample& s) {
  Pending p{s.state, s.raw_action, last_mean_, policy_.log_std,
            last_logprob_, last_value_, s.reward, s.done};
  if (s.done) {
    // Horizon truncation of a continuing task: fold in the bootstrap value.
    p.reward += config_.gamma * value_net_.forward(s.next_state)(0);
  }
  pending_.push_back(std::move(p));
  if (static_cast<int>(pending_.size()) >= config_.train_batch_size) {
    train_on_pending(s.next_state);
  }
}

void PpoAgent::train_on_pending(const Vec& bootstrap_state) {
  const std::size_t T = pending_.size();
  std::vector<double> rewards(T), values(T + 1);
  std::vector<std::uint8_t> dones(T);
  for (std::size_t t = 0; t < T; ++t) {
    rewards[t] = pending_[t].reward;
    values[t] = pending_[t].value;
    dones[t] = pending_[t].done ? 1 : 0;
  }
  values[T] = value_net_.forward(bootstrap_state)(0);
  const double lambda = config_.use_gae ? config_.gae_lambda : 1.0;
  const GaeResult gae = compute_gae(rewards, values, dones, config_.gamma, lambda);

  std::vector<PpoSample> batch;
  batch.reserve(T);
  for (std::size_t t = 0; t < T; ++t) {
    auto& p = pending_[t];
    batch.push_back({std::move(p.state), std::move(p.action), std::move(p.mean_old),
                     std::move(p.log_std_old), p.logprob_old, gae.advantages[t],
                     gae.returns[t]});
  }
  pending_.clear();
  update(std::move(batch));
}

PpoLossTerms PpoAgent::loss(std::span<const PpoSample* const> batch,
                            PolicyGrads* policy_grads,
                            nn::MlpGrads* value_grads) const {
  const auto B = static_cast<Eigen::Index>(batch.size());
  if (B == 0) throw ArgumentError("ppo loss: empty batch");
  const int in = policy_.mean_net.input_dim();
  const int n = policy_.mean_net.output_dim();
  Mat states(in, B);
  for (Eigen::Index i = 0; i < B; ++i) states.col(i) = batch[i]->state;

  nn::ForwardCache pcache, vcache;
  const Mat means = policy_.mean_net.forward(states, &pcache);
  const Mat values = value_net_.forward(states, &vcache);
  const Vec& lsn = policy_.log_std;
  const double inv_b = 1.0 / static_cast<double>(B);

  PpoLossTerms terms;
  Mat d_mean = Mat::Zero(n, B);
  Vec d_log_std = Vec::Zero(n);
  Mat d_value(1, B);
  for (Eigen::Index i = 0; i < B; ++i) {
    const PpoSample& s = *batch[i];
    const Vec mu = means.col(i);
    const double lp = nn::gaussian_logprob(mu, lsn, s.action);
    const double ratio = std::exp(lp - s.logprob_old);
    const double clipped =
        std::clamp(ratio, 1.0 - config_.clip_param, 1.0 + config_.clip_param);
    const double surr1 = ratio * s.advantage;
    const double surr2 = clipped * s.advantage;
    terms.surrogate -= std::min(surr1, surr2) * inv_b;
    const double kl = nn::gaussian_kl(s.mean_old, s.log_std_old, mu, lsn);
    terms.kl += kl * inv_b;
    const double verr = values(0, i) - s.value_target;
    terms.value += verr * verr * inv_b;

    // d(-min)/d(logprob): only the unclipped branch carries gradient.
    const double d_lp = surr1 <= surr2 ? -surr1 * inv_b : 0.0;
    const auto lg = nn::gaussian_logprob_grad(mu, lsn, s.action);
    const auto kg = nn::gaussian_kl_grad(s.mean_old, s.log_std_old, mu, lsn);
    d_mean.col(i) = d_lp * lg.d_mean + kl_coeff_ * inv_b * kg.d_mean;
    d_log_std += d_lp * lg.d_log_std + kl_coeff_ * inv_b * kg.d_log_std;
    d_value(0, i) = 2.0 * config_.vf_loss_coeff * verr * inv_b;
  }
  constexpr double kHalfLog2PiE = 1.4189385332046727;
  terms.entropy = (lsn.array() + kHalfLog2PiE).sum();
  d_log_std.array() -= config_.entropy_coeff;
  terms.total = terms.surrogate + kl_coeff_ * terms.kl +
                config_.vf_loss_coeff * terms.value -
                config_.entropy_coeff * terms.entropy;

  if (policy_grads) {
    policy_grads->mean_net = policy_.mean_net.backward(pcache, d_mean);
    policy_grads->log_std = d_log_std;
  }
  if (value_grads) *value_grads = value_net_.backward(vcache, d_value);
  return terms;
}

PpoDiagnostics PpoAgent::update(std::vector<PpoSample> batch) {
  const std::size_t N = batch.size();
  const auto mb = static_cast<std::size_t>(config_.minibatch_size);
  if (N < mb) throw ArgumentError("ppo update: batch smaller than a minibatch");

  double mean = 0.0;
  for (const auto& s : batch) mean += s.advantage;
  mean /= static_cast<double>(N);
  double var = 0.0;
  for (const auto& s : batch) var += (s.advantage - mean) * (s.advantage - mean);
  const double sd = std::sqrt(var / static_cast<double>(N));
  for (auto& s : batch) s.advantage = (s.advantage - mean) / (sd + 1e-8);

  std::vector<std::size_t> order(N);
  std::iota(order.begin(), order.end(), 0);
  std::vector<const PpoSample*> minibatch;
  PpoDiagnostics diag;
  for (int epoch = 0; epoch < config_.num_sgd_iter; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng_.engine());
    for (std::size_t start = 0; start < N; start += mb) {
      minibatch.clear();
      for (std::size_t j = start; j < std::min(N, start + mb); ++j) {
        minibatch.push_back(&batch[order[j]]);
      }
      PolicyGrads pg;
      nn::MlpGrads vg;
      diag.last_loss = loss(minibatch, &pg, &vg).total;
      auto blocks = nn::param_blocks(policy_.mean_net, pg.mean_net);
      blocks.push_back({{policy_.log_std.data(), std::size_t(policy_.log_std.size())},
                        {pg.log_std.data(), std::size_t(pg.log_std.size())}});
      const auto vblocks = nn::param_blocks(value_net_, vg);
      blocks.insert(blocks.end(), vblocks.begin(), vblocks.end());
      optimizer_.step(blocks);
      ++diag.minibatches;
    }
  }

  double kl = 0.0;
  for (const auto& s : batch) {
    kl += nn::gaussian_kl(s.mean_old, s.log_std_old, policy_.mean(s.state),
                          policy_.log_std);
  }
  diag.mean_kl = kl / static_cast<double>(N);
  if (diag.mean_kl > config_.kl_target * 1.5) {
    kl_coeff_ *= 2.0;
  } else if (diag.mean_kl < config_.kl_target / 1.5) {
    kl_coeff_ *= 0.5;
  }
  diag.kl_coeff = kl_coeff_;
  diag_ = diag;
  return diag;
}

// --------------------------------------------------------------------- DDPG

DdpgAgent::DdpgAgent(const DdpgConfig& config, int state_dim, int action_dim,
                     std::uint64_t seed)
    : config_(config),
      state_dim_(state_dim),
      action_dim_(action_dim),
      actor_opt_(config.actor_lr),
      critic_opt_(config.critic_lr),
      replay_(static_cast<std::size_t>(config.buffer_size)),
      noise_(action_dim, config.ou_theta, config.ou_sigma, 0.0, config.noise_scale),
      rng_(seed, RngStream::kAgent),
      noise_rng_(seed, RngStream::kNoise) {
  if (config_.prioritized_replay) {
    throw ConfigError("ddpg: prioritized replay is not supported");
  }
  if (config_.critic_loss != "square") {
    throw ConfigError("ddpg: only the square critic loss is supported");
  }
  const auto asizes = layer_sizes(state_dim, config_.actor_hidden, action_dim);
  const auto aacts = layer_acts(config_.actor_hidden.size(),
                                config_.actor_activation, nn::Activation::kSigmoid);
  actor_ = nn::Mlp(asizes, aacts, rng_);
  actor_.init_last_layer(config_.final_layer_init, rng_);
  const auto csizes = layer_sizes(state_dim + action_dim, config_.critic_hidden, 1);
  const auto cacts = layer_acts(config_.critic_hidden.size(),
                                config_.critic_activation, nn::Activation::kIdentity);
  critic_ = nn::Mlp(csizes, cacts, rng_);
  critic_.init_last_layer(config_.final_layer_init, rng_);
  target_actor_ = actor_;
  target_critic_ = critic_;
}

Vec DdpgAgent::shifted(const Vec& state) const {
  return (state.array() - config_.input_shift).matrix();
}

Vec DdpgAgent::act(const Vec& state, bool explore) {
  check_dim(state, state_dim_, "ddpg act");
  Vec a = actor_.forward(shifted(state));
  if (explore) a += noise_.sample(noise_rng_);
  return a;
}

void DdpgAgent::observe(const StepSample& s) {
  // Horizon ends are truncations: keep bootstrapping through them.
  replay_.add({s.state, s.applied_action, s.reward, s.next_state, false});
  if (s.done) noise_.reset();
  update();
}

bool DdpgAgent::update() {
  if (replay_.size() < static_cast<std::size_t>(std::max(config_.warmup, 1))) {
    return false;
  }
  const auto batch = replay_.sample(static_cast<std::size_t>(config_.batch_size), rng_);
  update_on(batch);
  return true;
}

double DdpgAgent::critic_value(const Vec& state, const Vec& action) const {
  Vec x(state_dim_ + action_dim_);
  x << shifted(state), action;
  return critic_.forward(x)(0);
}

Vec DdpgAgent::critic_targets(std::span<const nn::Transition* const> batch) const {
  const auto B = static_cast<Eigen::Index>(batch.size());
  Mat next(state_dim_, B);
  for (Eigen::Index i = 0; i < B; ++i) next.col(i) = shifted(batch[i]->next_state);
  const Mat next_actions = target_actor_.forward(next);
  Mat critic_in(state_dim_ + action_dim_, B);
  critic_in << next, next_actions;
  const Mat q_next = target_critic_.forward(critic_in);
  Vec y(B);
  for (Eigen::Index i = 0; i < B; ++i) {
    const double live = batch[i]->done ? 0.0 : 1.0;
    y(i) = batch[i]->reward + config_.gamma * q_next(0, i) * live;
  }
  return y;
}

void DdpgAgent::update_on(std::span<const nn::Transition* const> batch) {
  const auto B = static_cast<Eigen::Index>(batch.size());
  if (B == 0) throw ArgumentError("ddpg update: empty batch");
  const double inv_b = 1.0 / static_cast<double>(B);
  const Vec y = critic_targets(batch);

  Mat states(state_dim_, B);
  Mat critic_in(state_dim_ + action_dim_, B);
  for (Eigen::Index i = 0; i < B; ++i) {
    states.col(i) = shifted(batch[i]->state);
    critic_in.col(i) << states.col(i), batch[i]->action;
  }

  // Critic: mean squared TD error plus L2 on weights.
  nn::ForwardCache ccache;
  const Mat q = critic_.forward(critic_in, &ccache);
  const Mat dq = (2.0 * inv_b) * (q.row(0).transpose() - y).transpose();
  nn::MlpGrads cg = critic_.backward(ccache, dq);
  for (std::size_t l = 0; l < critic_.layers.size(); ++l) {
    cg.weights[l] += config_.weight_decay * critic_.layers[l].weights;
  }
  critic_opt_.step(critic_, cg);

  // Actor: ascend Q(s, mu(s)) through the updated critic.
  nn::ForwardCache acache, qcache;
  const Mat actions = actor_.forward(states, &acache);
  Mat actor_in(state_dim_ + action_dim_, B);
  actor_in << states, actions;
  critic_.forward(actor_in, &qcache);
  Mat dx;
  critic_.backward(qcache, Mat::Constant(1, B, -inv_b), &dx);
  const Mat d_actions = dx.bottomRows(action_dim_);
  const nn::MlpGrads ag = actor_.backward(acache, d_actions);
  actor_opt_.step(actor_, ag);

  ++updates_;
  if (updates_ % std::max(config_.target_update_every, 1) == 0) {
    nn::soft_update(target_actor_, actor_, config_.tau);
    nn::soft_update(target_critic_, critic_, config_.tau);
  }
}

}  // namespace ccgym
