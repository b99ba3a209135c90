#include "ccgym/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

#include "ccgym/error.hpp"

namespace ccgym {

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double to_double(std::string_view key, std::string_view v) {
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw ConfigError("'" + std::string(key) + "': expected a number, got '" +
                      std::string(v) + "'");
  }
  return out;
}

std::int64_t to_int(std::string_view key, std::string_view v) {
  std::int64_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec == std::errc() && ptr == v.data() + v.size()) return out;
  // Accept integral values written in floating form, e.g. 1e4.
  const double d = to_double(key, v);
  if (d != static_cast<double>(static_cast<std::int64_t>(d))) {
    throw ConfigError("'" + std::string(key) + "': expected an integer");
  }
  return static_cast<std::int64_t>(d);
}

bool to_bool(std::string_view key, std::string_view v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("'" + std::string(key) + "': expected true or false");
}

std::vector<int> to_int_list(std::string_view key, std::string_view v) {
  std::vector<int> out;
  if (trim(v).empty() || trim(v) == "none") return out;
  std::size_t start = 0;
  while (start <= v.size()) {
    const auto comma = v.find(',', start);
    const auto item = trim(v.substr(start, comma - start));
    out.push_back(static_cast<int>(to_int(key, item)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

std::string join(const std::vector<int>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(v[i]);
  }
  return s.empty() ? "none" : s;
}

nn::Activation to_activation(std::string_view key, std::string_view v) {
  if (v == "tanh") return nn::Activation::kTanh;
  if (v == "relu") return nn::Activation::kRelu;
  if (v == "sigmoid") return nn::Activation::kSigmoid;
  if (v == "identity") return nn::Activation::kIdentity;
  throw ConfigError("'" + std::string(key) + "': unknown activation '" +
                    std::string(v) + "'");
}

std::string_view activation_name(nn::Activation a) {
  switch (a) {
    case nn::Activation::kTanh: return "tanh";
    case nn::Activation::kRelu: return "relu";
    case nn::Activation::kSigmoid: return "sigmoid";
    case nn::Activation::kIdentity: return "identity";
  }
  return "?";
}

using Setter = std::function<void(AgentConfig&, std::string_view key, std::string_view)>;

const std::map<std::string, Setter, std::less<>>& agent_setters() {
  static const std::map<std::string, Setter, std::less<>> table = [] {
    std::map<std::string, Setter, std::less<>> t;
    auto num = [&](const char* name, auto member) {
      t[name] = [member](AgentConfig& c, std::string_view k, std::string_view v) {
        member(c) = to_double(k, v);
      };
    };
    auto integer = [&](const char* name, auto member) {
      t[name] = [member](AgentConfig& c, std::string_view k, std::string_view v) {
        member(c) = static_cast<int>(to_int(k, v));
      };
    };
    auto list = [&](const char* name, auto member) {
      t[name] = [member](AgentConfig& c, std::string_view k, std::string_view v) {
        member(c) = to_int_list(k, v);
      };
    };
    auto act = [&](const char* name, auto member) {
      t[name] = [member](AgentConfig& c, std::string_view k, std::string_view v) {
        member(c) = to_activation(k, v);
      };
    };
    num("agent.reinforce.lr", [](AgentConfig& c) -> double& { return c.reinforce.lr; });
    num("agent.reinforce.gamma", [](AgentConfig& c) -> double& { return c.reinforce.gamma; });
    num("agent.reinforce.init_log_std", [](AgentConfig& c) -> double& { return c.reinforce.init_log_std; });
    list("agent.reinforce.hidden", [](AgentConfig& c) -> std::vector<int>& { return c.reinforce.hidden; });
    act("agent.reinforce.activation", [](AgentConfig& c) -> nn::Activation& { return c.reinforce.activation; });

    t["agent.ppo.use_gae"] = [](AgentConfig& c, std::string_view k, std::string_view v) {
      c.ppo.use_gae = to_bool(k, v);
    };
    num("agent.ppo.lambda", [](AgentConfig& c) -> double& { return c.ppo.gae_lambda; });
    num("agent.ppo.kl_coeff", [](AgentConfig& c) -> double& { return c.ppo.kl_coeff; });
    integer("agent.ppo.train_batch_size", [](AgentConfig& c) -> int& { return c.ppo.train_batch_size; });
    integer("agent.ppo.minibatch_size", [](AgentConfig& c) -> int& { return c.ppo.minibatch_size; });
    integer("agent.ppo.num_sgd_iter", [](AgentConfig& c) -> int& { return c.ppo.num_sgd_iter; });
    num("agent.ppo.lr", [](AgentConfig& c) -> double& { return c.ppo.lr; });
    num("agent.ppo.vf_loss_coeff", [](AgentConfig& c) -> double& { return c.ppo.vf_loss_coeff; });
    num("agent.ppo.entropy_coeff", [](AgentConfig& c) -> double& { return c.ppo.entropy_coeff; });
    num("agent.ppo.clip_param", [](AgentConfig& c) -> double& { return c.ppo.clip_param; });
    num("agent.ppo.kl_target", [](AgentConfig& c) -> double& { return c.ppo.kl_target; });
    num("agent.ppo.gamma", [](AgentConfig& c) -> double& { return c.ppo.gamma; });
    num("agent.ppo.init_log_std", [](AgentConfig& c) -> double& { return c.ppo.init_log_std; });
    list("agent.ppo.hidden", [](AgentConfig& c) -> std::vector<int>& { return c.ppo.hidden; });
    act("agent.ppo.activation", [](AgentConfig& c) -> nn::Activation& { return c.ppo.activation; });

    num("agent.ddpg.theta", [](AgentConfig& c) -> double& { return c.ddpg.ou_theta; });
    num("agent.ddpg.sigma", [](AgentConfig& c) -> double& { return c.ddpg.ou_sigma; });
    num("agent.ddpg.noise_scale", [](AgentConfig& c) -> double& { return c.ddpg.noise_scale; });
    num("agent.ddpg.tau", [](AgentConfig& c) -> double& { return c.ddpg.tau; });
    integer("agent.ddpg.target_update_every", [](AgentConfig& c) -> int& { return c.ddpg.target_update_every; });
    t["agent.ddpg.prioritized_replay"] = [](AgentConfig& c, std::string_view k, std::string_view v) {
      c.ddpg.prioritized_replay = to_bool(k, v);
    };
    list("agent.ddpg.actor_hidden", [](AgentConfig& c) -> std::vector<int>& { return c.ddpg.actor_hidden; });
    act("agent.ddpg.actor_activation", [](AgentConfig& c) -> nn::Activation& { return c.ddpg.actor_activation; });
    list("agent.ddpg.critic_hidden", [](AgentConfig& c) -> std::vector<int>& { return c.ddpg.critic_hidden; });
    act("agent.ddpg.critic_activation", [](AgentConfig& c) -> nn::Activation& { return c.ddpg.critic_activation; });
    num("agent.ddpg.actor_lr", [](AgentConfig& c) -> double& { return c.ddpg.actor_lr; });
    num("agent.ddpg.critic_lr", [](AgentConfig& c) -> double& { return c.ddpg.critic_lr; });
    num("agent.ddpg.weight_decay", [](AgentConfig& c) -> double& { return c.ddpg.weight_decay; });
    t["agent.ddpg.critic_loss"] = [](AgentConfig& c, std::string_view, std::string_view v) {
      c.ddpg.critic_loss = std::string(v);
    };
    num("agent.ddpg.gamma", [](AgentConfig& c) -> double& { return c.ddpg.gamma; });
    integer("agent.ddpg.buffer_size", [](AgentConfig& c) -> int& { return c.ddpg.buffer_size; });
    integer("agent.ddpg.batch_size", [](AgentConfig& c) -> int& { return c.ddpg.batch_size; });
    integer("agent.ddpg.warmup", [](AgentConfig& c) -> int& { return c.ddpg.warmup; });
    num("agent.ddpg.final_layer_init", [](AgentConfig& c) -> double& { return c.ddpg.final_layer_init; });
    num("agent.ddpg.input_shift", [](AgentConfig& c) -> double& { return c.ddpg.input_shift; });
    return t;
  }();
  return table;
}

std::string topology_name(TopologyKind k) {
  return k == TopologyKind::kDumbbell ? "dumbbell" : "fattree";
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) return "nan";
  return std::string(buf, ptr);
}

int default_steps(TopologyKind kind) {
  return kind == TopologyKind::kDumbbell ? 5000 : 10000;
}

void set_config_value(ExperimentConfig& c, std::string_view key, std::string_view raw) {
  const std::string_view v = trim(raw);
  const std::string k(key);
  EnvConfig& e = c.env;
  if (k == "experiment.topology") {
    if (v == "dumbbell") {
      e.topology = TopologyKind::kDumbbell;
    } else if (v == "fattree") {
      e.topology = TopologyKind::kFatTree;
    } else {
      throw ConfigError("experiment.topology: expected dumbbell or fattree");
    }
  } else if (k == "experiment.hosts" || k == "experiment.k") {
    e.topology_size = static_cast<int>(to_int(k, v));
  } else if (k == "experiment.transport") {
    e.transport = parse_transport(v);
  } else if (k == "experiment.agent") {
    c.agent.kind = parse_agent(v);
  } else if (k == "experiment.pattern") {
    e.pattern = std::string(v);
  } else if (k == "experiment.steps") {
    c.steps = static_cast<int>(to_int(k, v));
  } else if (k == "experiment.seeds" || k == "experiment.seed") {
    c.seeds.clear();
    for (int s : to_int_list(k, v)) {
      if (s < 0) throw ConfigError("seeds must be non-negative");
      c.seeds.push_back(static_cast<std::uint64_t>(s));
    }
  } else if (k == "experiment.threads") {
    c.threads = static_cast<int>(to_int(k, v));
  } else if (k == "experiment.output") {
    c.output = std::string(v);
  } else if (k == "network.bw_max") {
    e.bw_max_bps = to_double(k, v);
  } else if (k == "network.demand") {
    e.demand_bps = to_double(k, v);
  } else if (k == "network.q_max") {
    e.q_max_bytes = to_int(k, v);
  } else if (k == "network.ecn_threshold") {
    if (v == "none") {
      e.ecn_threshold_bytes.reset();
    } else {
      e.ecn_threshold_bytes = to_int(k, v);
    }
  } else if (k == "network.prop_delay") {
    e.prop_delay_s = to_double(k, v);
  } else if (k == "env.tick") {
    e.tick_s = to_double(k, v);
  } else if (k == "env.step_ticks") {
    e.ticks_per_step = static_cast<int>(to_int(k, v));
  } else if (k == "env.horizon") {
    e.horizon = static_cast<int>(to_int(k, v));
  } else if (k == "env.a_min") {
    e.a_min = to_double(k, v);
  } else if (k == "env.encoding") {
    if (v == "full") {
      e.encoding = StateEncoding::kFull;
    } else if (v == "flags") {
      e.encoding = StateEncoding::kFlowFlagsOnly;
    } else {
      throw ConfigError("env.encoding: expected full or flags");
    }
  } else if (const auto& setters = agent_setters(); setters.count(k) != 0) {
    setters.find(k)->second(c.agent, k, v);
    c.agent_overrides[k] = std::string(v);
  } else {
    throw ConfigError("unknown key '" + k + "'");
  }
}

ExperimentConfig parse_config(std::string_view text) {
  ExperimentConfig c;
  c.steps = 0;
  bool has_topology = false, has_transport = false, has_agent = false, has_steps = false;
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string_view l = trim(line);
    if (l.empty() || l.front() == '#') continue;
    const auto eq = l.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("line " + std::to_string(lineno) + ": expected 'key = value'");
    }
    const std::string_view key = trim(l.substr(0, eq));
    try {
      set_config_value(c, key, l.substr(eq + 1));
    } catch (const ConfigError& err) {
      throw ConfigError("line " + std::to_string(lineno) + ": " + err.what());
    } catch (const std::exception& err) {
      throw ConfigError("line " + std::to_string(lineno) + ": " + err.what());
    }
    has_topology |= key == "experiment.topology";
    has_transport |= key == "experiment.transport";
    has_agent |= key == "experiment.agent";
    has_steps |= key == "experiment.steps";
  }
  if (!has_topology) throw ConfigError("missing required key experiment.topology");
  if (!has_transport) throw ConfigError("missing required key experiment.transport");
  if (!has_agent) throw ConfigError("missing required key experiment.agent");
  if (!has_steps) throw ConfigError("missing required key experiment.steps");
  validate(c);
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse_config(ss.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

void validate(const ExperimentConfig& c) {
  if (c.steps < 1) throw ConfigError("experiment.steps must be >= 1");
  if (c.seeds.empty()) throw ConfigError("experiment.seeds must list at least one seed");
  if (c.threads < 1) throw ConfigError("experiment.threads must be >= 1");
  validate(c.env);
  const auto& p = c.agent.ppo;
  if (p.minibatch_size < 1 || p.train_batch_size < p.minibatch_size) {
    throw ConfigError("agent.ppo: train batch must hold at least one minibatch");
  }
  if (c.agent.ddpg.batch_size < 1 || c.agent.ddpg.buffer_size < 1) {
    throw ConfigError("agent.ddpg: batch and buffer sizes must be positive");
  }
}

std::string to_config_text(const ExperimentConfig& c) {
  const EnvConfig& e = c.env;
  std::ostringstream o;
  o << "experiment.topology = " << topology_name(e.topology) << "\n";
  o << (e.topology == TopologyKind::kDumbbell ? "experiment.hosts = " : "experiment.k = ")
    << e.topology_size << "\n";
  o << "experiment.transport = " << to_string(e.transport) << "\n";
  o << "experiment.agent = " << to_string(c.agent.kind) << "\n";
  o << "experiment.pattern = "
    << (e.pattern.empty() ? default_pattern(e.topology) : e.pattern) << "\n";
  o << "experiment.steps = " << c.steps << "\n";
  o << "experiment.seeds = ";
  for (std::size_t i = 0; i < c.seeds.size(); ++i) o << (i ? "," : "") << c.seeds[i];
  o << "\n";
  o << "experiment.threads = " << c.threads << "\n";
  o << "experiment.output = " << c.output.string() << "\n";
  o << "network.bw_max = " << format_double(e.bw_max_bps) << "\n";
  o << "network.demand = " << format_double(e.demand_bps) << "\n";
  o << "network.q_max = " << e.q_max_bytes << "\n";
  o << "network.ecn_threshold = "
    << (e.ecn_threshold_bytes ? std::to_string(*e.ecn_threshold_bytes) : "none") << "\n";
  o << "network.prop_delay = " << format_double(e.prop_delay_s) << "\n";
  o << "env.tick = " << format_double(e.tick_s) << "\n";
  o << "env.step_ticks = " << e.ticks_per_step << "\n";
  o << "env.horizon = " << e.horizon << "\n";
  o << "env.a_min = " << format_double(e.a_min) << "\n";
  o << "env.encoding = " << (e.encoding == StateEncoding::kFull ? "full" : "flags") << "\n";

  const AgentConfig& a = c.agent;
  o << "agent.reinforce.lr = " << format_double(a.reinforce.lr) << "\n";
  o << "agent.reinforce.gamma = " << format_double(a.reinforce.gamma) << "\n";
  o << "agent.reinforce.init_log_std = " << format_double(a.reinforce.init_log_std) << "\n";
  o << "agent.reinforce.hidden = " << join(a.reinforce.hidden) << "\n";
  o << "agent.reinforce.activation = " << activation_name(a.reinforce.activation) << "\n";
  o << "agent.ppo.use_gae = " << (a.ppo.use_gae ? "true" : "false") << "\n";
  o << "agent.ppo.lambda = " << format_double(a.ppo.gae_lambda) << "\n";
  o << "agent.ppo.kl_coeff = " << format_double(a.ppo.kl_coeff) << "\n";
  o << "agent.ppo.train_batch_size = " << a.ppo.train_batch_size << "\n";
  o << "agent.ppo.minibatch_size = " << a.ppo.minibatch_size << "\n";
  o << "agent.ppo.num_sgd_iter = " << a.ppo.num_sgd_iter << "\n";
  o << "agent.ppo.lr = " << format_double(a.ppo.lr) << "\n";
  o << "agent.ppo.vf_loss_coeff = " << format_double(a.ppo.vf_loss_coeff) << "\n";
  o << "agent.ppo.entropy_coeff = " << format_double(a.ppo.entropy_coeff) << "\n";
  o << "agent.ppo.clip_param = " << format_double(a.ppo.clip_param) << "\n";
  o << "agent.ppo.kl_target = " << format_double(a.ppo.kl_target) << "\n";
  o << "agent.ppo.gamma = " << format_double(a.ppo.gamma) << "\n";
  o << "agent.ppo.init_log_std = " << format_double(a.ppo.init_log_std) << "\n";
  o << "agent.ppo.hidden = " << join(a.ppo.hidden) << "\n";
  o << "agent.ppo.activation = " << activation_name(a.ppo.activation) << "\n";
  o << "agent.ddpg.theta = " << format_double(a.ddpg.ou_theta) << "\n";
  o << "agent.ddpg.sigma = " << format_double(a.ddpg.ou_sigma) << "\n";
  o << "agent.ddpg.noise_scale = " << format_double(a.ddpg.noise_scale) << "\n";
  o << "agent.ddpg.tau = " << format_double(a.ddpg.tau) << "\n";
  o << "agent.ddpg.target_update_every = " << a.ddpg.target_update_every << "\n";
  o << "agent.ddpg.prioritized_replay = " << (a.ddpg.prioritized_replay ? "true" : "false") << "\n";
  o << "agent.ddpg.actor_hidden = " << join(a.ddpg.actor_hidden) << "\n";
  o << "agent.ddpg.actor_activation = " << activation_name(a.ddpg.actor_activation) << "\n";
  o << "agent.ddpg.critic_hidden = " << join(a.ddpg.critic_hidden) << "\n";
  o << "agent.ddpg.critic_activation = " << activation_name(a.ddpg.critic_activation) << "\n";
  o << "agent.ddpg.actor_lr = " << format_double(a.ddpg.actor_lr) << "\n";
  o << "agent.ddpg.critic_lr = " << format_double(a.ddpg.critic_lr) << "\n";
  o << "agent.ddpg.weight_decay = " << format_double(a.ddpg.weight_decay) << "\n";
  o << "agent.ddpg.critic_loss = " << a.ddpg.critic_loss << "\n";
  o << "agent.ddpg.gamma = " << format_double(a.ddpg.gamma) << "\n";
  o << "agent.ddpg.buffer_size = " << a.ddpg.buffer_size << "\n";
  o << "agent.ddpg.batch_size = " << a.ddpg.batch_size << "\n";
  o << "agent.ddpg.warmup = " << a.ddpg.warmup << "\n";
  o << "agent.ddpg.final_layer_init = " << format_double(a.ddpg.final_layer_init) << "\n";
  o << "agent.ddpg.input_shift = " << format_double(a.ddpg.input_shift) << "\n";
  return o.str();
}

}  // namespace ccgym
