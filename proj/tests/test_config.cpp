#include <filesystem>
#include <fstream>
#include <string>

#include "ccgym/config.hpp"
#include "ccgym/error.hpp"
#include "doctest.h"

using namespace ccgym;

namespace {

constexpr const char* kMinimal =
    "experiment.topology = dumbbell\n"
    "experiment.transport = udp\n"
    "experiment.agent = ddpg\n"
    "experiment.steps = 100\n";

std::string error_of(const std::string& text) {
  try {
    parse_config(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("minimal config takes defaults") {
  const ExperimentConfig c = parse_config(kMinimal);
  CHECK(c.env.topology == TopologyKind::kDumbbell);
  CHECK(c.env.topology_size == 4);
  CHECK(c.env.transport == TransportKind::kUdp);
  CHECK(c.agent.kind == AgentKind::kDdpg);
  CHECK(c.steps == 100);
  CHECK(c.seeds == std::vector<std::uint64_t>{1});
  CHECK(c.threads == 1);
  CHECK(c.env.bw_max_bps == 10e6);
  CHECK(c.env.q_max_bytes == 150'000);
  CHECK(c.env.ecn_threshold_bytes == 30'000);
  CHECK(c.env.ticks_per_step == 500);
  CHECK(c.env.horizon == 200);
  CHECK(c.env.a_min == 0.01);
  CHECK(c.agent.ddpg.tau == 1e-3);
}

TEST_CASE("every section parses") {
  const std::string text = std::string(kMinimal) +
                           "# comment\n"
                           "\n"
                           "experiment.seeds = 3, 5,7\n"
                           "experiment.threads = 2\n"
                           "experiment.output = out/x\n"
                           "network.bw_max = 1e8\n"
                           "network.q_max = 90000\n"
                           "network.ecn_threshold = none\n"
                           "network.prop_delay = 0.0002\n"
                           "env.tick = 0.002\n"
                           "env.step_ticks = 50\n"
                           "env.horizon = 10\n"
                           "env.a_min = 0.05\n"
                           "env.encoding = flags\n"
                           "agent.ppo.lambda = 0.95\n"
                           "agent.ppo.hidden = 64,32\n"
                           "agent.ddpg.actor_activation = tanh\n"
                           "agent.ddpg.prioritized_replay = false\n"
                           "agent.reinforce.lr = 3e-4\n";
  const ExperimentConfig c = parse_config(text);
  CHECK(c.seeds == std::vector<std::uint64_t>{3, 5, 7});
  CHECK(c.threads == 2);
  CHECK(c.output == std::filesystem::path("out/x"));
  CHECK(c.env.bw_max_bps == 1e8);
  CHECK(c.env.q_max_bytes == 90'000);
  CHECK_FALSE(c.env.ecn_threshold_bytes.has_value());
  CHECK(c.env.prop_delay_s == 0.0002);
  CHECK(c.env.tick_s == 0.002);
  CHECK(c.env.ticks_per_step == 50);
  CHECK(c.env.horizon == 10);
  CHECK(c.env.a_min == 0.05);
  CHECK(c.env.encoding == StateEncoding::kFlowFlagsOnly);
  CHECK(c.agent.ppo.gae_lambda == 0.95);
  CHECK(c.agent.ppo.hidden == std::vector<int>{64, 32});
  CHECK(c.agent.ddpg.actor_activation == nn::Activation::kTanh);
  CHECK(c.agent.reinforce.lr == 3e-4);
}

TEST_CASE("fat-tree config") {
  const ExperimentConfig c = parse_config(
      "experiment.topology = fattree\nexperiment.k = 4\n"
      "experiment.transport = dctcp\nexperiment.agent = none\nexperiment.steps = 5\n");
  CHECK(c.env.topology == TopologyKind::kFatTree);
  CHECK(c.env.topology_size == 4);
  CHECK(c.env.transport == TransportKind::kDctcp);
  CHECK(default_steps(TopologyKind::kDumbbell) == 5000);
  CHECK(default_steps(TopologyKind::kFatTree) == 10000);
}

TEST_CASE("unknown keys are rejected with their line") {
  const std::string err = error_of(std::string(kMinimal) + "\nnetwork.bandwidth = 5\n");
  CHECK(err.find("line 6") != std::string::npos);
  CHECK(err.find("network.bandwidth") != std::string::npos);
  CHECK(error_of(std::string(kMinimal) + "agent.ppo.learning_rate = 1\n").find("line 5") !=
        std::string::npos);
}

TEST_CASE("malformed values are rejected with their line") {
  CHECK(error_of(std::string(kMinimal) + "env.horizon = ten\n").find("line 5") !=
        std::string::npos);
  CHECK(error_of(std::string(kMinimal) + "env.horizon\n").find("line 5") != std::string::npos);
  CHECK(error_of(std::string(kMinimal) + "experiment.agent = sac\n").find("line 5") !=
        std::string::npos);
  CHECK(error_of(std::string(kMinimal) + "env.encoding = dense\n").find("line 5") !=
        std::string::npos);
  CHECK(error_of(std::string(kMinimal) + "agent.ddpg.critic_activation = gelu\n")
            .find("line 5") != std::string::npos);
  CHECK(error_of(std::string(kMinimal) + "agent.ppo.use_gae = maybe\n").find("line 5") !=
        std::string::npos);
}

TEST_CASE("missing required keys") {
  for (const char* key : {"experiment.topology", "experiment.transport", "experiment.agent",
                          "experiment.steps"}) {
    std::string text;
    std::istringstream in(kMinimal);
    for (std::string line; std::getline(in, line);) {
      if (line.rfind(key, 0) != 0) text += line + "\n";
    }
    CAPTURE(key);
    CHECK(error_of(text).find(key) != std::string::npos);
  }
}

TEST_CASE("cross-field validation") {
  CHECK_FALSE(error_of(std::string(kMinimal) + "experiment.steps = 0\n").empty());
  CHECK_FALSE(error_of(std::string(kMinimal) + "experiment.threads = 0\n").empty());
  CHECK_FALSE(error_of(std::string(kMinimal) + "network.ecn_threshold = 200000\n").empty());
  CHECK_FALSE(error_of(std::string(kMinimal) + "experiment.hosts = 3\n").empty());
  CHECK_FALSE(error_of(std::string(kMinimal) + "env.a_min = 0\n").empty());
  CHECK_FALSE(error_of(std::string(kMinimal) + "experiment.pattern = ring\n").empty());
  CHECK_FALSE(error_of(std::string(kMinimal) + "agent.ppo.minibatch_size = 5000\n").empty());
}

TEST_CASE("canonical text round-trips") {
  ExperimentConfig c = parse_config(kMinimal);
  c.seeds = {4, 9};
  c.env.bw_max_bps = 12.5e6;
  c.env.prop_delay_s = 0.1 + 0.2;  // needs all 17 digits
  c.env.ecn_threshold_bytes.reset();
  c.agent.ddpg.tau = 1.0 / 3.0;
  c.agent.ppo.hidden = {7};
  c.agent.reinforce.activation = nn::Activation::kRelu;
  const std::string text = to_config_text(c);
  const ExperimentConfig back = parse_config(text);
  CHECK(to_config_text(back) == text);
  CHECK(back.env.prop_delay_s == c.env.prop_delay_s);
  CHECK(back.agent.ddpg.tau == c.agent.ddpg.tau);
  CHECK(back.seeds == c.seeds);
  CHECK(back.agent.ppo.hidden == c.agent.ppo.hidden);
  CHECK(back.agent.reinforce.activation == nn::Activation::kRelu);
  CHECK_FALSE(back.env.ecn_threshold_bytes.has_value());
}

TEST_CASE("format_double is shortest round-trip") {
  CHECK(format_double(0.5) == "0.5");
  CHECK(std::stod(format_double(1e-4)) == 1e-4);
  CHECK(std::stod(format_double(0.1 + 0.2)) == 0.1 + 0.2);
}

TEST_CASE("load_config reports the path") {
  const auto dir = std::filesystem::temp_directory_path() / "ccgym_test_config";
  std::filesystem::create_directories(dir);
  const auto path = dir / "bad.cfg";
  std::ofstream(path) << kMinimal << "bogus.key = 1\n";
  try {
    load_config(path);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("bad.cfg") != std::string::npos);
  }
  CHECK_THROWS_AS(load_config(dir / "missing.cfg"), IoError);
  std::filesystem::remove_all(dir);
}
