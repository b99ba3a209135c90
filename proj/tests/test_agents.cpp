#include <cmath>
#include <numeric>

#include "ccgym/agents.hpp"
#include "ccgym/envgym.hpp"
#include "ccgym/error.hpp"
#include "doctest.h"
#include "oracles/finite_diff.hpp"
#include "oracles/gae.hpp"

using namespace ccgym;
using nn::Mat;
using nn::Vec;

namespace {

Vec random_vec(int n, Rng& rng, double lo = 0.0, double hi = 1.0) {
  Vec v(n);
  for (int i = 0; i < n; ++i) v(i) = rng.uniform(lo, hi);
  return v;
}

/// Flat views of a policy's parameters and a matching gradient.
std::vector<nn::ParamBlock> policy_blocks(GaussianPolicy& p, const PolicyGrads& g) {
  auto blocks = nn::param_blocks(p.mean_net, g.mean_net);
  blocks.push_back({{p.log_std.data(), std::size_t(p.log_std.size())},
                    {g.log_std.data(), std::size_t(g.log_std.size())}});
  return blocks;
}

double mlp_distance(const nn::Mlp& a, const nn::Mlp& b) {
  double d = 0.0;
  for (std::size_t l = 0; l < a.layers.size(); ++l) {
    d += (a.layers[l].weights - b.layers[l].weights).squaredNorm();
    d += (a.layers[l].bias - b.layers[l].bias).squaredNorm();
  }
  return std::sqrt(d);
}

std::vector<double> flat(const nn::Mlp& m) {
  std::vector<double> out;
  for (const auto& l : m.layers) {
    out.insert(out.end(), l.weights.data(), l.weights.data() + l.weights.size());
    out.insert(out.end(), l.bias.data(), l.bias.data() + l.bias.size());
  }
  return out;
}

PpoConfig small_ppo() {
  PpoConfig c;
  c.hidden = {5, 4};
  c.train_batch_size = 8;
  c.minibatch_size = 4;
  c.num_sgd_iter = 2;
  return c;
}

DdpgConfig small_ddpg() {
  DdpgConfig c;
  c.actor_hidden = {6};
  c.critic_hidden = {6};
  c.warmup = 16;
  c.batch_size = 8;
  return c;
}

}  // namespace

TEST_CASE("agent config defaults") {
  const AgentConfig c;
  CHECK(c.kind == AgentKind::kNone);

  const ReinforceConfig& r = c.reinforce;
  CHECK(r.lr == 1e-4);
  CHECK(r.hidden == std::vector<int>{256, 256});
  CHECK(r.activation == nn::Activation::kTanh);
  CHECK(r.init_log_std == std::log(0.3));

  const PpoConfig& p = c.ppo;
  CHECK(p.use_gae);
  CHECK(p.gae_lambda == 1.0);
  CHECK(p.kl_coeff == 0.2);
  CHECK(p.train_batch_size == 4000);
  CHECK(p.minibatch_size == 128);
  CHECK(p.num_sgd_iter == 30);
  CHECK(p.lr == 5e-5);
  CHECK(p.vf_loss_coeff == 1.0);
  CHECK(p.entropy_coeff == 0.0);
  CHECK(p.clip_param == 0.3);
  CHECK(p.kl_target == 0.01);
  CHECK(p.hidden == std::vector<int>{256, 256});
  CHECK(p.activation == nn::Activation::kTanh);

  const DdpgConfig& d = c.ddpg;
  CHECK(d.ou_theta == 0.15);
  CHECK(d.ou_sigma == 0.2);
  CHECK(d.noise_scale == 1.0);
  CHECK(d.tau == 1e-3);
  CHECK(d.target_update_every == 1);
  CHECK_FALSE(d.prioritized_replay);
  CHECK(d.actor_hidden == std::vector<int>{400, 300});
  CHECK(d.actor_activation == nn::Activation::kRelu);
  CHECK(d.critic_hidden == std::vector<int>{400, 300});
  CHECK(d.critic_activation == nn::Activation::kRelu);
  CHECK(d.actor_lr == 1e-4);
  CHECK(d.critic_lr == 1e-3);
  CHECK(d.weight_decay == 1e-2);
  CHECK(d.critic_loss == "square");
}

TEST_CASE("agent names round-trip") {
  for (auto k : {AgentKind::kNone, AgentKind::kReinforce, AgentKind::kPpo, AgentKind::kDdpg}) {
    CHECK(parse_agent(to_string(k)) == k);
  }
  CHECK_THROWS_AS(parse_agent("sac"), ConfigError);
}

TEST_CASE("network shapes") {
  const int in = 12, out = 4;
  PpoAgent ppo(PpoConfig{}, in, out, 1);
  CHECK(ppo.policy().mean_net.layers.size() == 3);
  CHECK(ppo.policy().mean_net.layers[0].weights.rows() == 256);
  CHECK(ppo.policy().mean_net.layers[1].activation == nn::Activation::kTanh);
  CHECK(ppo.policy().mean_net.output_dim() == out);
  CHECK(ppo.value_net().output_dim() == 1);

  DdpgAgent ddpg(DdpgConfig{}, in, out, 1);
  CHECK(ddpg.actor().layers[0].weights.rows() == 400);
  CHECK(ddpg.actor().layers[1].weights.rows() == 300);
  CHECK(ddpg.actor().layers[2].activation == nn::Activation::kSigmoid);
  CHECK(ddpg.actor().output_dim() == out);
  CHECK(ddpg.critic().input_dim() == in + out);
  CHECK(ddpg.critic().output_dim() == 1);
  CHECK(ddpg.critic().layers[0].activation == nn::Activation::kRelu);
  CHECK(ddpg.critic().layers[2].activation == nn::Activation::kIdentity);
}

TEST_CASE("make_agent and the none agent") {
  AgentConfig c;
  auto none = make_agent(c, 6, 4, 1);
  CHECK(none->kind() == AgentKind::kNone);
  CHECK(none->act(Vec::Zero(6), true) == Vec::Ones(4));
  c.kind = AgentKind::kPpo;
  c.ppo = small_ppo();
  CHECK(make_agent(c, 6, 4, 1)->kind() == AgentKind::kPpo);
}

TEST_CASE("act rejects a state of the wrong length") {
  ReinforceConfig rc;
  rc.hidden = {4};
  ReinforceAgent r(rc, 5, 2, 1);
  CHECK_THROWS_AS(r.act(Vec::Zero(4), false), ArgumentError);
  PpoAgent p(small_ppo(), 5, 2, 1);
  CHECK_THROWS_AS(p.act(Vec::Zero(6), true), ArgumentError);
  DdpgAgent d(small_ddpg(), 5, 2, 1);
  CHECK_THROWS_AS(d.act(Vec::Zero(1), false), ArgumentError);
}

TEST_CASE("greedy act is deterministic") {
  Rng rng(4);
  const Vec s = random_vec(5, rng);
  ReinforceConfig rc;
  rc.hidden = {4};
  ReinforceAgent r(rc, 5, 2, 1);
  CHECK(r.act(s, false) == r.act(s, false));
  PpoAgent p(small_ppo(), 5, 2, 1);
  CHECK(p.act(s, false) == p.act(s, false));
  DdpgAgent d(small_ddpg(), 5, 2, 1);
  CHECK(d.act(s, false) == d.act(s, false));
  // Exploring draws differ.
  CHECK(p.act(s, true) != p.act(s, true));
  CHECK(d.act(s, true) != d.act(s, true));
}

TEST_CASE("gaussian sample collapses to the mean as sigma shrinks") {
  PpoAgent p(small_ppo(), 3, 2, 7);
  p.policy().log_std.setConstant(-40.0);
  const Vec s = Vec::Constant(3, 0.25);
  const Vec a = p.act(s, true);
  CHECK((a - p.policy().mean(s)).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("ddpg with a zero final layer acts at one half") {
  DdpgAgent d(small_ddpg(), 4, 3, 2);
  d.actor().layers.back().weights.setZero();
  d.actor().layers.back().bias.setZero();
  CHECK(d.act(Vec::Constant(4, 0.3), false) == Vec::Constant(3, 0.5));
}

TEST_CASE("discounted returns") {
  const std::vector<double> r{1.0, 2.0, 3.0};
  const auto g = discounted_returns(r, 0.5);
  CHECK(g[2] == 3.0);
  CHECK(g[1] == 2.0 + 0.5 * 3.0);
  CHECK(g[0] == 1.0 + 0.5 * 3.5);
  CHECK(discounted_returns(std::vector<double>{}, 0.9).empty());
}

TEST_CASE("gae examples") {
  const std::vector<double> r{1.0, 1.0}, v{0.0, 0.0, 0.0};
  const std::vector<std::uint8_t> d{0, 0};
  const auto out = compute_gae(r, v, d, 1.0, 1.0);
  CHECK(out.advantages == std::vector<double>{2.0, 1.0});
  CHECK(out.returns == std::vector<double>{2.0, 1.0});

  const std::vector<double> r2{0.5, -1.0, 2.0}, v2{0.1, 0.2, 0.3, 0.4};
  const std::vector<std::uint8_t> d2{0, 1, 0};
  const auto td = compute_gae(r2, v2, d2, 0.9, 0.0);
  for (std::size_t t = 0; t < 3; ++t) {
    const double delta = r2[t] + 0.9 * v2[t + 1] * (d2[t] ? 0.0 : 1.0) - v2[t];
    CHECK(td.advantages[t] == delta);
    CHECK(td.returns[t] == delta + v2[t]);
  }

  CHECK_THROWS_AS(compute_gae(r, std::vector<double>{0.0, 0.0}, d, 0.9, 1.0), ArgumentError);
  CHECK_THROWS_AS(compute_gae(r, v, std::vector<std::uint8_t>{0}, 0.9, 1.0), ArgumentError);
}

TEST_CASE("gae matches the double-loop oracle") {
  Rng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t T = 50;
    std::vector<double> r(T), v(T + 1);
    std::vector<std::uint8_t> d(T);
    for (auto& x : r) x = rng.uniform(-2, 2);
    for (auto& x : v) x = rng.uniform(-5, 5);
    for (auto& x : d) x = rng.uniform(0, 1) < 0.1 ? 1 : 0;
    const double gamma = rng.uniform(0.5, 1.0);
    const double lambda = rng.uniform(0.0, 1.0);
    const auto got = compute_gae(r, v, d, gamma, lambda);
    const auto want = oracle::gae_double_loop(r, v, d, gamma, lambda);
    for (std::size_t t = 0; t < T; ++t) {
      REQUIRE(std::abs(got.advantages[t] - want[t]) < 1e-10);
      REQUIRE(std::abs(got.returns[t] - (want[t] + v[t])) < 1e-10);
    }
  }
}

TEST_CASE("reinforce gradient matches finite differences") {
  Rng rng(3);
  const std::vector<int> hidden{4};
  GaussianPolicy policy(2, 1, hidden, nn::Activation::kTanh, std::log(0.3), rng);

  SUBCASE("single step, scalar action") {
    Trajectory tr{{random_vec(2, rng)}, {random_vec(1, rng)}, {1.7}};
    const PolicyGrads g = reinforce_gradient(policy, std::span(&tr, 1), 0.99);
    auto loss = [&] { return -policy.logprob(tr.states[0], tr.actions[0]) * 1.7; };
    for (const auto& b : policy_blocks(policy, g)) {
      CHECK(oracle::max_rel_error(b.value, b.grad, loss) < 1e-4);
    }
  }

  SUBCASE("multi-step with discounting") {
    Trajectory tr;
    for (int t = 0; t < 6; ++t) {
      tr.states.push_back(random_vec(2, rng));
      tr.actions.push_back(random_vec(1, rng));
      tr.rewards.push_back(rng.uniform(-1, 1));
    }
    const double gamma = 0.9;
    const auto G = discounted_returns(tr.rewards, gamma);
    const PolicyGrads g = reinforce_gradient(policy, std::span(&tr, 1), gamma);
    auto loss = [&] {
      double l = 0.0;
      for (std::size_t t = 0; t < G.size(); ++t) {
        l -= policy.logprob(tr.states[t], tr.actions[t]) * G[t];
      }
      return l;
    };
    for (const auto& b : policy_blocks(policy, g)) {
      CHECK(oracle::max_rel_error(b.value, b.grad, loss) < 1e-4);
    }
  }
}

TEST_CASE("reinforce gradient is linear in the batch") {
  Rng rng(5);
  const std::vector<int> hidden{3};
  GaussianPolicy policy(3, 2, hidden, nn::Activation::kTanh, std::log(0.3), rng);
  Trajectory tr;
  for (int t = 0; t < 4; ++t) {
    tr.states.push_back(random_vec(3, rng));
    tr.actions.push_back(random_vec(2, rng));
    tr.rewards.push_back(rng.uniform(-1, 1));
  }
  const std::vector<Trajectory> one{tr}, two{tr, tr};
  const PolicyGrads g1 = reinforce_gradient(policy, one, 0.99);
  const PolicyGrads g2 = reinforce_gradient(policy, two, 0.99);
  for (std::size_t l = 0; l < g1.mean_net.weights.size(); ++l) {
    CHECK(g2.mean_net.weights[l] == 2.0 * g1.mean_net.weights[l]);
    CHECK(g2.mean_net.bias[l] == 2.0 * g1.mean_net.bias[l]);
  }
  CHECK(g2.log_std == 2.0 * g1.log_std);

  CHECK_THROWS_AS(reinforce_gradient(policy, std::vector<Trajectory>{Trajectory{}}, 0.99),
                  ArgumentError);
  Trajectory ragged = tr;
  ragged.rewards.pop_back();
  CHECK_THROWS_AS(reinforce_gradient(policy, std::vector<Trajectory>{ragged}, 0.99),
                  ArgumentError);
}

TEST_CASE("reinforce with zero returns leaves parameters unchanged") {
  ReinforceConfig rc;
  rc.hidden = {4};
  ReinforceAgent agent(rc, 3, 2, 9);
  const auto before = flat(agent.policy().mean_net);
  const Vec log_std = agent.policy().log_std;
  Rng rng(1);
  Trajectory tr;
  for (int t = 0; t < 5; ++t) {
    tr.states.push_back(random_vec(3, rng));
    tr.actions.push_back(random_vec(2, rng));
    tr.rewards.push_back(0.0);
  }
  agent.update(tr);
  CHECK(flat(agent.policy().mean_net) == before);
  CHECK(agent.policy().log_std == log_std);

  tr.rewards.assign(5, 1.0);
  agent.update(tr);
  CHECK(flat(agent.policy().mean_net) != before);
  CHECK_THROWS_AS(agent.update(Trajectory{}), ArgumentError);
}

TEST_CASE("reinforce updates once per finished episode") {
  ReinforceConfig rc;
  rc.hidden = {4};
  ReinforceAgent agent(rc, 3, 2, 9);
  const auto before = flat(agent.policy().mean_net);
  Rng rng(2);
  auto sample = [&](bool done) {
    StepSample s;
    s.state = random_vec(3, rng);
    s.raw_action = agent.act(s.state, true);
    s.applied_action = s.raw_action;
    s.reward = 1.0;
    s.next_state = random_vec(3, rng);
    s.done = done;
    return s;
  };
  agent.observe(sample(false));
  agent.observe(sample(false));
  CHECK(flat(agent.policy().mean_net) == before);
  agent.observe(sample(true));
  CHECK(flat(agent.policy().mean_net) != before);
}

namespace {

/// A PPO batch whose old policy is a small perturbation of `agent`'s.
std::vector<PpoSample> ppo_batch(const PpoAgent& agent, int n, Rng& rng,
                                 double shift) {
  const auto& pol = agent.policy();
  const int in = pol.mean_net.input_dim();
  const int out = pol.mean_net.output_dim();
  std::vector<PpoSample> batch;
  for (int i = 0; i < n; ++i) {
    PpoSample s;
    s.state = random_vec(in, rng);
    s.mean_old = pol.mean(s.state) + random_vec(out, rng, -shift, shift);
    s.log_std_old = pol.log_std + random_vec(out, rng, -shift, shift);
    s.action = s.mean_old;
    for (int k = 0; k < out; ++k) s.action(k) += std::exp(s.log_std_old(k)) * rng.normal();
    s.logprob_old = nn::gaussian_logprob(s.mean_old, s.log_std_old, s.action);
    s.advantage = rng.normal();
    s.value_target = rng.uniform(-1, 1);
    batch.push_back(s);
  }
  return batch;
}

std::vector<const PpoSample*> pointers(const std::vector<PpoSample>& batch) {
  std::vector<const PpoSample*> p;
  for (const auto& s : batch) p.push_back(&s);
  return p;
}

}  // namespace

TEST_CASE("ppo identical policies give ratio one and zero kl") {
  PpoAgent agent(small_ppo(), 3, 2, 4);
  Rng rng(8);
  auto batch = ppo_batch(agent, 6, rng, 0.0);
  double surrogate = 0.0;
  for (const auto& s : batch) {
    const double lp = agent.policy().logprob(s.state, s.action);
    CHECK(std::exp(lp - s.logprob_old) == doctest::Approx(1.0).epsilon(1e-12));
    surrogate -= s.advantage / 6.0;
  }
  const auto terms = agent.loss(pointers(batch), nullptr, nullptr);
  CHECK(terms.kl == doctest::Approx(0.0).epsilon(1e-14));
  CHECK(terms.surrogate == doctest::Approx(surrogate).epsilon(1e-12));
}

TEST_CASE("ppo loss gradient matches finite differences") {
  PpoConfig cfg = small_ppo();
  cfg.entropy_coeff = 0.01;  // exercise the entropy path too
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    PpoAgent agent(cfg, 1, 1, seed);
    Rng rng(seed + 100);
    auto batch = ppo_batch(agent, 5, rng, 0.2);
    const auto ptrs = pointers(batch);
    // Keep every ratio clear of the clip corners so the loss is smooth.
    for (const auto& s : batch) {
      const double ratio =
          std::exp(agent.policy().logprob(s.state, s.action) - s.logprob_old);
      REQUIRE(std::abs(ratio - 0.7) > 1e-3);
      REQUIRE(std::abs(ratio - 1.3) > 1e-3);
    }
    PolicyGrads pg;
    nn::MlpGrads vg;
    agent.loss(ptrs, &pg, &vg);
    auto loss = [&] { return agent.loss(ptrs, nullptr, nullptr).total; };
    for (const auto& b : policy_blocks(agent.policy(), pg)) {
      CHECK(oracle::max_rel_error(b.value, b.grad, loss) < 1e-4);
    }
    for (const auto& b : nn::param_blocks(agent.value_net(), vg)) {
      CHECK(oracle::max_rel_error(b.value, b.grad, loss) < 1e-4);
    }
  }
}

TEST_CASE("ppo constant advantages leave the policy unchanged") {
  PpoAgent agent(small_ppo(), 3, 2, 6);
  Rng rng(9);
  auto batch = ppo_batch(agent, 8, rng, 0.0);
  for (auto& s : batch) s.advantage = 0.75;
  const auto before = flat(agent.policy().mean_net);
  const Vec log_std = agent.policy().log_std;
  const auto value_before = flat(agent.value_net());
  const auto diag = agent.update(batch);
  CHECK(diag.minibatches == 4);
  CHECK(flat(agent.policy().mean_net) == before);
  CHECK(agent.policy().log_std == log_std);
  CHECK(flat(agent.value_net()) != value_before);
}

TEST_CASE("ppo kl coefficient adaptation") {
  PpoConfig cfg = small_ppo();
  SUBCASE("no policy movement halves the coefficient") {
    PpoAgent agent(cfg, 3, 2, 6);
    Rng rng(9);
    auto batch = ppo_batch(agent, 8, rng, 0.0);
    for (auto& s : batch) s.advantage = 1.0;
    const auto d = agent.update(batch);
    CHECK(d.mean_kl == 0.0);
    CHECK(agent.kl_coeff() == 0.1);
  }
  SUBCASE("large policy movement doubles it") {
    cfg.lr = 0.05;
    cfg.num_sgd_iter = 20;
    PpoAgent agent(cfg, 3, 2, 6);
    Rng rng(9);
    const auto d = agent.update(ppo_batch(agent, 8, rng, 0.0));
    CHECK(d.mean_kl > 0.015);
    CHECK(agent.kl_coeff() == 0.4);
  }
}

TEST_CASE("ppo rejects a batch smaller than a minibatch") {
  PpoAgent agent(small_ppo(), 3, 2, 6);
  Rng rng(1);
  CHECK_THROWS_AS(agent.update(ppo_batch(agent, 3, rng, 0.0)), ArgumentError);
  CHECK_THROWS_AS(agent.loss({}, nullptr, nullptr), ArgumentError);
  PpoConfig bad = small_ppo();
  bad.minibatch_size = 16;
  CHECK_THROWS_AS(PpoAgent(bad, 3, 2, 1), ConfigError);
}

TEST_CASE("ppo ratio is one at collection time") {
  PpoConfig cfg = small_ppo();
  cfg.train_batch_size = 64;
  cfg.minibatch_size = 8;
  PpoAgent agent(cfg, 4, 3, 12);
  Rng rng(12);
  for (int t = 0; t < 40; ++t) {
    StepSample s;
    s.state = random_vec(4, rng);
    s.raw_action = agent.act(s.state, true);
    s.applied_action = s.raw_action;
    s.reward = rng.uniform(-1, 1);
    s.next_state = random_vec(4, rng);
    s.done = t % 10 == 9;
    agent.observe(s);
  }
  REQUIRE(agent.pending().size() == 40);
  for (const auto& p : agent.pending()) {
    const double lp = agent.policy().logprob(p.state, p.action);
    CHECK(std::exp(lp - p.logprob_old) == 1.0);
    CHECK(p.value == agent.value_net().forward(p.state)(0));
  }
}

TEST_CASE("ppo trains once the batch fills") {
  PpoConfig cfg = small_ppo();
  PpoAgent agent(cfg, 4, 2, 12);
  Rng rng(3);
  const auto before = flat(agent.policy().mean_net);
  for (int t = 0; t < cfg.train_batch_size; ++t) {
    StepSample s;
    s.state = random_vec(4, rng);
    s.raw_action = agent.act(s.state, true);
    s.applied_action = s.raw_action;
    s.reward = rng.uniform(-1, 1);
    s.next_state = random_vec(4, rng);
    agent.observe(s);
  }
  CHECK(agent.pending().empty());
  CHECK(agent.last_update().minibatches == cfg.num_sgd_iter * 2);
  CHECK(flat(agent.policy().mean_net) != before);
}

namespace {

std::vector<nn::Transition> transitions(int n, int state_dim, int action_dim, Rng& rng) {
  std::vector<nn::Transition> out;
  for (int i = 0; i < n; ++i) {
    nn::Transition t;
    t.state = random_vec(state_dim, rng);
    t.action = random_vec(action_dim, rng);
    t.reward = rng.uniform(-1, 1);
    t.next_state = random_vec(state_dim, rng);
    t.done = false;
    out.push_back(t);
  }
  return out;
}

std::vector<const nn::Transition*> pointers(const std::vector<nn::Transition>& v) {
  std::vector<const nn::Transition*> p;
  for (const auto& t : v) p.push_back(&t);
  return p;
}

}  // namespace

TEST_CASE("ddpg critic targets") {
  DdpgConfig cfg = small_ddpg();
  Rng rng(2);
  auto batch = transitions(10, 3, 2, rng);
  SUBCASE("gamma zero reduces to the reward") {
    cfg.gamma = 0.0;
    DdpgAgent agent(cfg, 3, 2, 1);
    const Vec y = agent.critic_targets(pointers(batch));
    for (std::size_t i = 0; i < batch.size(); ++i) CHECK(y(i) == batch[i].reward);
  }
  SUBCASE("bootstrap through the target networks") {
    DdpgAgent agent(cfg, 3, 2, 1);
    batch[3].done = true;
    const Vec y = agent.critic_targets(pointers(batch));
    for (std::size_t i = 0; i < batch.size(); ++i) {
      const Vec s = (batch[i].next_state.array() - cfg.input_shift).matrix();
      Vec x(5);
      x << s, agent.target_actor().forward(s);
      const double q = agent.target_critic().forward(x)(0);
      const double want = batch[i].reward + (batch[i].done ? 0.0 : cfg.gamma * q);
      CHECK(y(i) == doctest::Approx(want).epsilon(1e-14));
    }
  }
}

TEST_CASE("soft update fixed point and contraction") {
  Rng rng(5);
  const std::vector<int> sizes{3, 4, 2};
  const std::vector<nn::Activation> acts{nn::Activation::kRelu, nn::Activation::kSigmoid};
  const nn::Mlp online(sizes, acts, rng);

  nn::Mlp same = online;
  for (double tau : {1e-3, 0.3, 1.0}) {
    nn::soft_update(same, online, tau);
    CHECK(mlp_distance(same, online) < 1e-15);
  }

  nn::Mlp target(sizes, acts, rng);
  double prev = mlp_distance(target, online);
  for (int i = 0; i < 1000; ++i) {
    nn::soft_update(target, online, 1e-3);
    const double d = mlp_distance(target, online);
    REQUIRE(d < prev);
    CHECK(d == doctest::Approx(prev * (1.0 - 1e-3)).epsilon(1e-9));
    prev = d;
  }
}

TEST_CASE("ddpg update moves targets by tau") {
  DdpgConfig cfg = small_ddpg();
  cfg.tau = 0.25;
  DdpgAgent agent(cfg, 3, 2, 1);
  Rng rng(6);
  const auto batch = transitions(8, 3, 2, rng);
  const nn::Mlp target_before = agent.target_critic();
  agent.update_on(pointers(batch));
  CHECK(agent.updates() == 1);
  for (std::size_t l = 0; l < target_before.layers.size(); ++l) {
    const Mat want = 0.25 * agent.critic().layers[l].weights +
                     0.75 * target_before.layers[l].weights;
    CHECK((agent.target_critic().layers[l].weights - want).cwiseAbs().maxCoeff() < 1e-15);
  }
  CHECK_THROWS_AS(agent.update_on({}), ArgumentError);
}

TEST_CASE("ddpg linear critic reaches the ridge solution") {
  DdpgConfig cfg = small_ddpg();
  cfg.critic_hidden = {};
  cfg.actor_hidden = {};
  cfg.gamma = 0.0;
  const int sd = 3, ad = 2;
  DdpgAgent agent(cfg, sd, ad, 21);
  Rng rng(21);
  auto batch = transitions(32, sd, ad, rng);
  for (auto& t : batch) {
    t.reward = 0.8 * t.state(0) - 0.5 * t.state(2) + 1.2 * t.action(1) + 0.1 +
               0.05 * rng.normal();
  }
  const auto ptrs = pointers(batch);
  for (int i = 0; i < 10'000; ++i) agent.update_on(ptrs);

  // Closed form of mean (w.x + b - r)^2 + (lambda / 2) |w|^2.
  const int n = sd + ad + 1;
  const double B = static_cast<double>(batch.size());
  Mat X(batch.size(), n);
  Vec y(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    X.row(i).head(sd) = (batch[i].state.array() - cfg.input_shift).matrix().transpose();
    X.row(i).segment(sd, ad) = batch[i].action.transpose();
    X(i, n - 1) = 1.0;
    y(i) = batch[i].reward;
  }
  Mat A = (2.0 / B) * X.transpose() * X;
  A.diagonal().head(n - 1).array() += cfg.weight_decay;
  const Vec theta = A.ldlt().solve((2.0 / B) * X.transpose() * y);

  Vec got(n);
  got.head(n - 1) = agent.critic().layers[0].weights.row(0).transpose();
  got(n - 1) = agent.critic().layers[0].bias(0);
  CHECK((got - theta).norm() / theta.norm() < 0.01);
}

TEST_CASE("ddpg update waits for warmup") {
  DdpgConfig cfg = small_ddpg();
  DdpgAgent agent(cfg, 3, 2, 1);
  CHECK_FALSE(agent.update());
  Rng rng(7);
  const Vec s = random_vec(3, rng);
  for (int i = 0; i < cfg.warmup - 1; ++i) {
    StepSample x{s, Vec::Constant(2, 0.5), Vec::Constant(2, 0.5), 0.1, s, false};
    agent.observe(x);
  }
  CHECK(agent.replay().size() == std::size_t(cfg.warmup - 1));
  CHECK(agent.updates() == 0);
  CHECK_FALSE(agent.update());
  agent.observe({s, Vec::Constant(2, 0.5), Vec::Constant(2, 0.5), 0.1, s, false});
  CHECK(agent.updates() == 1);
  CHECK(agent.update());
  CHECK(agent.updates() == 2);
}

TEST_CASE("ddpg stores applied actions and resets noise at horizon") {
  DdpgAgent agent(small_ddpg(), 3, 2, 1);
  const Vec s = Vec::Constant(3, 0.2);
  agent.act(s, true);
  agent.act(s, true);
  CHECK(agent.noise().state().norm() > 0.0);
  agent.observe({s, Vec::Constant(2, 1.4), Vec::Constant(2, 1.0), 0.3, s, true});
  CHECK(agent.noise().state().norm() == 0.0);
  CHECK(agent.replay().at(0).action == Vec::Constant(2, 1.0));
  CHECK_FALSE(agent.replay().at(0).done);

  DdpgConfig bad = small_ddpg();
  bad.prioritized_replay = true;
  CHECK_THROWS_AS(DdpgAgent(bad, 3, 2, 1), ConfigError);
  bad = small_ddpg();
  bad.critic_loss = "huber";
  CHECK_THROWS_AS(DdpgAgent(bad, 3, 2, 1), ConfigError);
}

namespace {

std::vector<double> train_rewards(AgentKind kind, std::uint64_t seed, int steps) {
  EnvConfig ec;
  ec.ticks_per_step = 20;
  ec.horizon = 25;
  Environment env(ec);
  const auto m = env.metadata();
  AgentConfig ac;
  ac.kind = kind;
  ac.reinforce.hidden = {8};
  ac.ppo = small_ppo();
  ac.ppo.train_batch_size = 32;
  ac.ddpg = small_ddpg();
  auto agent = make_agent(ac, m.state_rows * m.state_cols, m.action_len, seed);
  auto to_vec = [](const StateMatrix& s) {
    return Vec(Eigen::Map<const Vec>(s.values.data(), Eigen::Index(s.values.size())));
  };
  std::vector<double> rewards;
  Vec state = to_vec(env.reset());
  for (int t = 0; t < steps; ++t) {
    const Vec raw = agent->act(state, true);
    const auto res = env.step(std::span(raw.data(), std::size_t(raw.size())));
    const Vec next = to_vec(res.state);
    StepSample s{state, raw, Eigen::Map<const Vec>(res.action.data(), Eigen::Index(res.action.size())),
                 res.reward.total, next, res.done};
    agent->observe(s);
    rewards.push_back(res.reward.total);
    state = res.done ? to_vec(env.reset()) : next;
  }
  return rewards;
}

}  // namespace

TEST_CASE("training is deterministic per seed") {
  for (auto kind : {AgentKind::kReinforce, AgentKind::kPpo, AgentKind::kDdpg}) {
    CAPTURE(to_string(kind));
    const auto a = train_rewards(kind, 17, 120);
    const auto b = train_rewards(kind, 17, 120);
    CHECK(a == b);
    CHECK(train_rewards(kind, 18, 120) != a);
  }
}
