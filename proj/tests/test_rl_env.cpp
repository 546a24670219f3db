#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include <json.hpp>

#include "raps/engine.hpp"
#include "raps/error.hpp"
#include "raps/rl_env.hpp"
#include "support/fixtures.hpp"

using fixtures::job;
using nlohmann::json;

namespace {

const std::string kData = RAPS_DATA_DIR;

raps::Scenario trace_scenario(raps::ClusterConfig cluster, std::vector<raps::JobRecord> jobs,
                              raps::RewardWeights w = {}, double horizon = 86400.0) {
  raps::Scenario sc;
  sc.cluster = std::make_shared<const raps::ClusterConfig>(std::move(cluster));
  sc.trace_jobs = std::move(jobs);
  sc.sim.scheduler = raps::Policy::External;
  sc.sim.horizon_s = horizon;
  sc.env.weights = w;
  return sc;
}

raps::RewardWeights throughput_only() {
  raps::RewardWeights w;
  w.w_energy = 0.0;
  w.w_carbon = 0.0;
  return w;
}

raps::Scenario env20() { return raps::Scenario::load(kData + "/scenarios/env_20.json"); }

raps::ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const raps::Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected raps::Error";
  return raps::ErrorCode::InvalidArgument;
}

}  // namespace

TEST(Env, ObservationLength) {
  raps::Environment env(env20());
  EXPECT_EQ(env.observation_size(), 46u);
  EXPECT_EQ(env.action_count(), 9u);
  EXPECT_EQ(env.reset(1).size(), 46u);
}

TEST(Env, ResetDeterministicPerSeed) {
  raps::Environment env(env20());
  const auto a = env.reset(1);
  env.step(8);
  const auto b = env.reset(1);
  EXPECT_EQ(a, b);
}

TEST(Env, EmptyQueuePadsWithZeros) {
  raps::Environment env(trace_scenario(fixtures::uniform_cluster(2), {job("late", 100, 5)}));
  const auto obs = env.reset(std::nullopt);
  for (std::size_t i = 0; i < 40; ++i) EXPECT_EQ(obs[i], 0.0);
  EXPECT_EQ(obs[40], 1.0);  // all cores free
  EXPECT_EQ(obs[42], 1.0);  // all nodes free
}

TEST(Env, ObservationFeatures) {
  raps::Environment env(trace_scenario(fixtures::uniform_cluster(2), {job("A", 0, 3600, 1, 2)}, {}, 7200.0));
  auto obs = env.reset(std::nullopt);
  EXPECT_EQ(obs[0], 0.0);
  EXPECT_EQ(obs[1], 2.0 / 8.0);
  EXPECT_EQ(obs[3], 0.5);
  EXPECT_EQ(obs[4], 0.5);
  EXPECT_EQ(obs[44], 1.0 / 8.0);  // queue length / K
  const auto r = env.step(0);
  EXPECT_FALSE(r.invalid_action);
  EXPECT_EQ(r.observation[0], 0.0);  // queue now empty
  EXPECT_EQ(r.observation[40], 6.0 / 8.0);
  EXPECT_EQ(r.observation[42], 0.5);
  EXPECT_EQ(r.observation[45], 0.5);  // one running job over two nodes
}

TEST(Env, ThroughputReward) {
  // B takes two steps, A one; dispatching A in the second step finishes both.
  raps::Environment env(
      trace_scenario(fixtures::uniform_cluster(2), {job("B", 0, 2), job("A", 0.5, 1)}, throughput_only()));
  env.reset(std::nullopt);
  EXPECT_EQ(env.step(0).reward, 0.0);
  const auto r = env.step(0);
  EXPECT_FALSE(r.invalid_action);
  EXPECT_EQ(r.reward, 2.0);
  EXPECT_TRUE(r.done);
  EXPECT_FALSE(r.truncated);
}

TEST(Env, IdleNoopReward) {
  raps::RewardWeights w;
  w.w_throughput = 0.0;
  w.w_energy = 0.1;
  w.w_carbon = 0.0;
  auto cluster = fixtures::cluster({fixtures::node("a", 4, 0, 100, 300), fixtures::node("b", 4, 0, 150, 450)});
  raps::Environment env(trace_scenario(cluster, {job("late", 100, 5)}, w));
  env.reset(std::nullopt);
  const auto r = env.step(8);
  // Idle facility energy over one second, normalized by rated facility power.
  EXPECT_DOUBLE_EQ(r.reward, -0.1 * (250.0 * 1.0) / (750.0 * 1.0));
  EXPECT_FALSE(r.invalid_action);
}

TEST(Env, InvalidSlotPenalizedAndAdvances) {
  raps::Environment env(trace_scenario(fixtures::uniform_cluster(4), {job("A", 0, 50), job("B", 0, 50)}, throughput_only()));
  env.reset(std::nullopt);
  const auto r = env.step(3);
  EXPECT_TRUE(r.invalid_action);
  EXPECT_TRUE(r.advanced);
  EXPECT_EQ(r.reward, -0.1);
  EXPECT_EQ(r.clock_s, 1.0);
}

TEST(Env, SessionStateErrors) {
  raps::Environment env(trace_scenario(fixtures::uniform_cluster(1), {job("A", 0, 1)}));
  EXPECT_EQ(code_of([&] { env.step(0); }), raps::ErrorCode::SessionState);
  env.reset(std::nullopt);
  EXPECT_EQ(code_of([&] { env.step(99); }), raps::ErrorCode::InvalidArgument);
  EXPECT_TRUE(env.step(0).done);
  EXPECT_EQ(code_of([&] { env.step(0); }), raps::ErrorCode::SessionState);
}

TEST(Env, HorizonTruncates) {
  raps::Environment env(trace_scenario(fixtures::uniform_cluster(1), {job("A", 0, 100)}, {}, 3.0));
  env.reset(std::nullopt);
  env.step(0);
  env.step(8);
  const auto r = env.step(8);
  EXPECT_TRUE(r.done);
  EXPECT_TRUE(r.truncated);
}

TEST(Protocol, ReplyShapes) {
  raps::Session s(env20(), kData + "/scenarios");
  const auto early = json::parse(s.handle(R"({"cmd":"step"})"));
  EXPECT_EQ(early["ok"], false);
  EXPECT_EQ(early["error"], "SessionStateError");

  const auto reset = json::parse(s.handle(R"({"cmd":"reset","seed":1})"));
  EXPECT_EQ(reset["ok"], true);
  EXPECT_EQ(reset["obs"].size(), 46u);
  EXPECT_EQ(reset["info"], json::object());

  const auto step = json::parse(s.handle(R"({"cmd":"step","action":8})"));
  EXPECT_EQ(step["ok"], true);
  EXPECT_EQ(step["obs"].size(), 46u);
  EXPECT_TRUE(step["reward"].is_number());
  EXPECT_EQ(step["done"], false);
  for (const char* key : {"it_power_w", "jobs_finished_total", "energy_kwh", "carbon_g", "invalid_action"}) {
    EXPECT_TRUE(step["info"].contains(key)) << key;
  }
  EXPECT_LT(step["reward"].get<double>(), 0.0);

  const auto spec = json::parse(s.handle(R"({"cmd":"spec"})"));
  EXPECT_EQ(spec["K"], 8);
  EXPECT_EQ(spec["obs_len"], 46);
  EXPECT_EQ(spec["action_count"], 9);
  EXPECT_EQ(spec["weights"]["w_throughput"], 1.0);
}

TEST(Protocol, ErrorsKeepSessionAlive) {
  raps::Session s(env20(), kData + "/scenarios");
  s.handle(R"({"cmd":"reset","seed":3})");
  for (const char* bad : {"{not json", R"({"cmd":"jump"})", R"([1,2])", R"({"cmd":"step","action":9})",
                          R"({"cmd":"step","action":"x"})", R"({"cmd":"step"})", R"({"cmd":"reset","seed":-1})"}) {
    const auto reply = json::parse(s.handle(bad));
    EXPECT_EQ(reply["ok"], false) << bad;
    EXPECT_EQ(reply["error"], "ProtocolError") << bad;
    EXPECT_TRUE(reply["message"].is_string());
  }
  EXPECT_EQ(json::parse(s.handle(R"({"cmd":"step","action":0})"))["ok"], true);
  EXPECT_EQ(json::parse(s.handle(R"({"cmd":"close"})"))["ok"], true);
  EXPECT_TRUE(s.closed());
}

TEST(Protocol, ResetWithInlineScenario) {
  raps::Session s(env20(), kData + "/scenarios");
  const auto reply = json::parse(s.handle(
      R"({"cmd":"reset","seed":2,"scenario":{"cluster":"../clusters/tx_mini.json",)"
      R"("workload":{"synth_params":"../synth_20.json"},"env":{"queue_slots":4}}})"));
  ASSERT_EQ(reply["ok"], true) << reply.dump();
  EXPECT_EQ(reply["obs"].size(), 26u);
  const auto bad = json::parse(s.handle(R"({"cmd":"reset","scenario":{"cluster":"nope.json"}})"));
  EXPECT_EQ(bad["ok"], false);
}

TEST(EnvProperty, RandomRolloutKeepsInvariants) {
  raps::Environment env(env20());
  std::mt19937_64 rng(123);
  std::uniform_int_distribution<std::int64_t> pick(0, 8);
  env.reset(0);
  std::uint64_t episode = 0;
  for (int i = 0; i < 10000; ++i) {
    const auto r = env.step(pick(rng));
    ASSERT_TRUE(std::isfinite(r.reward));
    ASSERT_EQ(r.observation.size(), 46u);
    for (double x : r.observation) ASSERT_TRUE(std::isfinite(x));
    ASSERT_TRUE(env.engine()->ledger().consistent());
    for (const auto& f : env.engine()->ledger().free()) ASSERT_TRUE(f.non_negative());
    if (r.done) env.reset(++episode);
  }
}

TEST(EnvProperty, ReturnEqualsJobsFinished) {
  auto sc = env20();
  sc.env.weights = throughput_only();
  sc.env.invalid_penalty = 0.0;
  raps::Environment env(sc);
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<std::int64_t> pick(0, 8);
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    env.reset(seed);
    double ret = 0.0;
    raps::StepResult r;
    do {
      r = env.step(pick(rng));
      ret += r.reward;
    } while (!r.done);
    EXPECT_EQ(ret, static_cast<double>(r.jobs_finished_total));
    EXPECT_GT(r.jobs_finished_total, 0);
  }
}

TEST(EnvProperty, HeadFirstAgentMatchesFcfs) {
  // Always asking for slot 0: a successful dispatch stays at the same
  // instant, a failed one advances, which is exactly strict FCFS.
  auto sc = env20();
  sc.env.dispatch_advances = false;
  sc.sim.horizon_s = 1e6;
  raps::Environment env(sc);
  env.reset(std::nullopt);
  while (env.step(0).done == false) {
  }
  const auto via_env = env.engine()->result({}).summary;

  auto cfg = sc.sim;
  cfg.scheduler = raps::Policy::Fcfs;
  const auto direct = raps::run(*sc.cluster, raps::generate_synthetic(*sc.synth), cfg).summary;
  EXPECT_EQ(via_env.metrics.makespan_s, direct.metrics.makespan_s);
  EXPECT_EQ(*via_env.metrics.mean_slowdown, *direct.metrics.mean_slowdown);
  EXPECT_EQ(via_env.metrics.facility_energy_kwh, direct.metrics.facility_energy_kwh);
  EXPECT_EQ(via_env.metrics.carbon_g, direct.metrics.carbon_g);
  EXPECT_EQ(via_env.metrics.jobs_finished, direct.metrics.jobs_finished);
  EXPECT_EQ(via_env.metrics.jobs_finished, 20);
}

TEST(EnvProperty, TrajectoryReproducible) {
  auto trajectory = [] {
    raps::Session s(env20(), kData + "/scenarios");
    std::string out = s.handle(R"({"cmd":"reset","seed":11})");
    std::mt19937_64 rng(99);
    std::uniform_int_distribution<int> pick(0, 8);
    for (int i = 0; i < 1000; ++i) {
      const std::string reply = s.handle(R"({"cmd":"step","action":)" + std::to_string(pick(rng)) + "}");
      out += reply + "\n";
      if (json::parse(reply)["done"] == true) out += s.handle(R"({"cmd":"reset","seed":12})");
    }
    return out;
  };
  EXPECT_EQ(trajectory(), trajectory());
}
